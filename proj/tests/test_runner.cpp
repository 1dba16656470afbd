#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "trgtime/evolution.hpp"
#include "trgtime/runner.hpp"

namespace fs = std::filesystem;
using trgtime::DiffReport;
using trgtime::EvolutionRun;
using trgtime::ExperimentConfig;
using trgtime::ExperimentKind;
using trgtime::OracleKind;
using trgtime::StepRecord;

namespace {

constexpr double kPi = 3.14159265358979323846;

fs::path fresh_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "trgtime-test-runner" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

int count_lines(const std::string& body) {
  int n = 0;
  for (char c : body)
    if (c == '\n') ++n;
  return n;
}

EvolutionRun flat_run(int records, int sites, double value, double cbar) {
  EvolutionRun run;
  run.steps = records - 1;
  run.dt = 0.01;
  for (int s = 0; s < records; ++s) {
    StepRecord rec;
    rec.step = s;
    rec.t = 0.01 * s;
    rec.n_expect.assign(static_cast<std::size_t>(sites), value);
    rec.cbar = cbar;
    rec.norm = 1.0;
    run.series.push_back(rec);
  }
  return run;
}

ExperimentConfig small_spectrum_config(const fs::path& out,
                                       const fs::path& cache) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::spectrum;
  cfg.params.n_sites = 4;
  cfg.params.lambda = 0.3;
  cfg.params.dt = 0.01;
  cfg.params.d_cut = 16;
  cfg.oracle = OracleKind::ed_exact;
  cfg.out_dir = out;
  cfg.cache_dir = cache;
  return cfg;
}

}  // namespace

TEST_CASE("config files parse and bad keys are named") {
  const fs::path dir = fresh_dir("parse");
  {
    std::ofstream os(dir / "run.cfg");
    os << "# two-packet collision\n"
       << "kind = evolve-two\n"
       << "sites = 8\n"
       << "lambda = 0.2\n"
       << "dt = 0.01\n"
       << "dcut = 37   # kept states\n"
       << "steps = 25\n"
       << "oracle = ed-trotter\n"
       << "packet1_k = 3pi/8\n"
       << "packet1_x = 0\n"
       << "packet1_sigma = 2\n"
       << "packet1_sector = even\n"
       << "packet2_k = -3pi/8\n"
       << "packet2_x = 4\n"
       << "packet2_sigma = 2\n"
       << "packet2_sector = even\n";
  }
  const ExperimentConfig cfg = trgtime::parse_config(dir / "run.cfg");
  CHECK(cfg.kind == ExperimentKind::evolve_two);
  CHECK(cfg.params.n_sites == 8);
  CHECK(cfg.params.d_cut == 37);
  CHECK(cfg.steps == 25);
  CHECK(cfg.oracle == OracleKind::ed_trotter);
  REQUIRE(cfg.packets.size() == 2);
  CHECK(cfg.packets[0].k_center == doctest::Approx(3 * kPi / 8).epsilon(1e-15));
  CHECK(cfg.packets[1].k_center ==
        doctest::Approx(-3 * kPi / 8).epsilon(1e-15));
  CHECK(cfg.packets[1].x_center == 4);
  CHECK(cfg.packets[1].sector == trgtime::Sector::even);
  CHECK_NOTHROW(cfg.validate());

  ExperimentConfig scratch;
  CHECK_THROWS_WITH_AS(trgtime::apply_setting(scratch, "frobnicate", "3"),
                       "unknown config key: frobnicate", std::invalid_argument);
  CHECK_THROWS_WITH_AS(trgtime::apply_setting(scratch, "dt", "fast"),
                       "dt: not a number: 'fast'", std::invalid_argument);
  CHECK_THROWS_WITH_AS(trgtime::apply_setting(scratch, "packet1_width", "2"),
                       "unknown config key: packet1_width",
                       std::invalid_argument);
  CHECK_THROWS_AS(trgtime::apply_setting(scratch, "packet9_k", "pi"),
                  std::invalid_argument);
  CHECK_THROWS_AS(trgtime::apply_setting(scratch, "packet1_k", "3qi/8"),
                  std::invalid_argument);
  CHECK_THROWS_AS(trgtime::apply_setting(scratch, "oracle", "psychic"),
                  std::invalid_argument);

  trgtime::apply_setting(scratch, "packet1_k", "pi");
  CHECK(scratch.packets[0].k_center == doctest::Approx(kPi).epsilon(1e-15));
  trgtime::apply_setting(scratch, "packet1_k", "-pi/2");
  CHECK(scratch.packets[0].k_center ==
        doctest::Approx(-kPi / 2).epsilon(1e-15));
  trgtime::apply_setting(scratch, "packet1_k", "0.5");
  CHECK(scratch.packets[0].k_center == doctest::Approx(0.5).epsilon(1e-15));
  trgtime::apply_setting(scratch, "allow_large_dt", "yes");
  CHECK(scratch.params.allow_large_dt);
  trgtime::apply_setting(scratch, "lambdas", "0, 0.2, 0.5");
  REQUIRE(scratch.lambdas.size() == 3);
  CHECK(scratch.lambdas[1] == doctest::Approx(0.2).epsilon(1e-15));

  CHECK_THROWS_AS(trgtime::parse_config(dir / "missing.cfg"),
                  std::invalid_argument);
  {
    std::ofstream os(dir / "broken.cfg");
    os << "this line has no equals sign\n";
  }
  CHECK_THROWS_AS(trgtime::parse_config(dir / "broken.cfg"),
                  std::invalid_argument);
}

TEST_CASE("validation names the offending field") {
  auto base = [] {
    ExperimentConfig cfg;
    cfg.params.n_sites = 4;
    cfg.params.d_cut = 16;
    return cfg;
  };

  auto message_of = [](const ExperimentConfig& cfg) {
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      return std::string(e.what());
    }
    return std::string("(no error)");
  };

  {
    ExperimentConfig cfg = base();
    cfg.kind = ExperimentKind::evolve_one;
    CHECK(message_of(cfg).find("packet1") != std::string::npos);
  }
  {
    ExperimentConfig cfg = base();
    cfg.kind = ExperimentKind::evolve_two;
    trgtime::apply_setting(cfg, "packet1_k", "pi/2");
    cfg.packets[0].x_center = 1;
    CHECK(message_of(cfg).find("packet2") != std::string::npos);
  }
  {
    ExperimentConfig cfg = base();
    cfg.kind = ExperimentKind::longitudinal;
    CHECK(message_of(cfg).find("epsilon") != std::string::npos);
  }
  {
    ExperimentConfig cfg = base();
    cfg.kind = ExperimentKind::lambda_scan;
    CHECK(message_of(cfg).find("lambdas") != std::string::npos);
  }
  {
    ExperimentConfig cfg = base();
    cfg.kind = ExperimentKind::q_sweep;
    cfg.oracle = OracleKind::ed_exact;
    CHECK(message_of(cfg).find("oracle") != std::string::npos);
    cfg.oracle = OracleKind::none;
    cfg.q_level = 5;
    CHECK(message_of(cfg).find("q_level") != std::string::npos);
  }
  {
    ExperimentConfig cfg = base();
    cfg.kind = ExperimentKind::tebd_compare;
    trgtime::apply_setting(cfg, "packet1_k", "pi/2");
    cfg.packets[0].x_center = 1;
    CHECK(message_of(cfg).find("oracle") != std::string::npos);
  }
  {
    ExperimentConfig cfg = base();
    cfg.params.dt = 1.0;
    CHECK(message_of(cfg).find("dt") != std::string::npos);
  }
  {
    ExperimentConfig cfg = base();
    cfg.kind = ExperimentKind::evolve_one;
    trgtime::apply_setting(cfg, "packet1_k", "pi/2");
    cfg.packets[0].x_center = 1;
    cfg.steps = 0;
    CHECK(message_of(cfg).find("steps") != std::string::npos);
  }
}

TEST_CASE("diff metrics follow the definitions") {
  const EvolutionRun a = flat_run(4, 3, 0.11, 1.5);
  const EvolutionRun b = flat_run(4, 3, 0.10, 1.25);

  const DiffReport zero = trgtime::diff_series(a, a);
  CHECK(zero.mean_abs_diff == 0.0);
  CHECK(zero.mean_pct_diff == 0.0);
  CHECK(zero.max_abs_diff == 0.0);
  REQUIRE(zero.cbar_mean_abs_diff.has_value());
  CHECK(*zero.cbar_mean_abs_diff == 0.0);

  const DiffReport rep = trgtime::diff_series(a, b);
  CHECK(rep.mean_abs_diff == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(rep.max_abs_diff == doctest::Approx(0.01).epsilon(1e-12));
  REQUIRE(rep.per_step_abs.size() == 4);
  for (double v : rep.per_step_abs)
    CHECK(v == doctest::Approx(0.01).epsilon(1e-12));
  // 100 * sum|a-b| / sum|b| with every reference entry 0.10.
  CHECK(rep.mean_pct_diff == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(*rep.cbar_mean_abs_diff == doctest::Approx(0.25).epsilon(1e-12));

  // Pointwise convention: mean of d/|b| per entry, identical here.
  const DiffReport pw = trgtime::diff_series(a, b, true);
  CHECK(pw.mean_pct_diff == doctest::Approx(10.0).epsilon(1e-12));

  // Mixed reference entries separate the two conventions.
  EvolutionRun c = flat_run(1, 2, 0.0, 0.0);
  EvolutionRun d = c;
  c.series[0].n_expect = {0.11, 0.21};
  d.series[0].n_expect = {0.10, 0.20};
  const double ratio_mean = 0.5 * (0.01 / 0.10 + 0.01 / 0.20);
  CHECK(trgtime::diff_series(c, d, true).mean_pct_diff ==
        doctest::Approx(100.0 * ratio_mean).epsilon(1e-12));
  CHECK(trgtime::diff_series(c, d, false).mean_pct_diff ==
        doctest::Approx(100.0 * 0.02 / 0.30).epsilon(1e-12));

  // Centers missing on either side drop out pairwise.
  EvolutionRun e = flat_run(3, 2, 0.1, 1.0);
  EvolutionRun f = flat_run(3, 2, 0.1, 1.2);
  e.series[1].cbar.reset();
  f.series[2].cbar.reset();
  const DiffReport paired = trgtime::diff_series(e, f);
  REQUIRE(paired.cbar_mean_abs_diff.has_value());
  CHECK(*paired.cbar_mean_abs_diff == doctest::Approx(0.2).epsilon(1e-12));
  for (auto& rec : e.series) rec.cbar.reset();
  CHECK_FALSE(trgtime::diff_series(e, f).cbar_mean_abs_diff.has_value());

  EvolutionRun shorter = flat_run(3, 3, 0.1, 1.0);
  CHECK_THROWS_AS(trgtime::diff_series(a, shorter), std::invalid_argument);
  EvolutionRun thinner = flat_run(4, 2, 0.1, 1.0);
  CHECK_THROWS_AS(trgtime::diff_series(a, thinner), std::invalid_argument);
}

TEST_CASE("spectrum artifacts are deterministic and cache safe") {
  const fs::path cache = fresh_dir("cache");
  const fs::path out_a = fresh_dir("spectrum-a");
  const fs::path out_b = fresh_dir("spectrum-b");

  const auto cold = trgtime::run_experiment(small_spectrum_config(out_a, cache));
  CHECK_FALSE(cold.cache_hit);
  REQUIRE(cold.csv_files.size() == 1);
  const std::string body_a = slurp(out_a / "spectrum.csv");
  CHECK(body_a.rfind("index,re_E,im_E,source\n", 0) == 0);
  // 16 kept energies plus the full 16-state dense spectrum, one header.
  CHECK(count_lines(body_a) == 1 + 16 + 16);

  const auto warm = trgtime::run_experiment(small_spectrum_config(out_b, cache));
  CHECK(warm.cache_hit);
  CHECK(slurp(out_b / "spectrum.csv") == body_a);

  const std::string manifest = slurp(out_b / "manifest.txt");
  CHECK(manifest.find("code_version: " + trgtime::code_version()) !=
        std::string::npos);
  CHECK(manifest.find("discarded_weight_level_1") != std::string::npos);
  CHECK(manifest.find("teo_cache: 1 hits, 0 builds") != std::string::npos);

  // A corrupted cache entry is rebuilt, with identical numbers.
  fs::path entry;
  for (const auto& de : fs::directory_iterator(cache))
    if (de.path().extension() == ".trg") entry = de.path();
  REQUIRE_FALSE(entry.empty());
  {
    std::ofstream os(entry, std::ios::binary | std::ios::trunc);
    os << "not a cache file";
  }
  const auto rebuilt =
      trgtime::run_experiment(small_spectrum_config(out_b, cache));
  CHECK_FALSE(rebuilt.cache_hit);
  CHECK(slurp(out_b / "spectrum.csv") == body_a);
}

TEST_CASE("evolution artifacts carry the oracle and the diff") {
  const fs::path out = fresh_dir("evolve");
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::evolve_one;
  cfg.params.n_sites = 4;
  cfg.params.lambda = 0.1;
  cfg.params.dt = 0.02;
  cfg.params.d_cut = 16;
  cfg.steps = 5;
  cfg.oracle = OracleKind::ed_trotter;
  cfg.out_dir = out;
  trgtime::apply_setting(cfg, "packet1_k", "pi/2");
  cfg.packets[0].x_center = 1;
  cfg.packets[0].sigma = 1.5;

  const auto art = trgtime::run_experiment(cfg);
  REQUIRE(art.csv_files.size() == 4);
  for (const char* name : {"occupations.csv", "center.csv",
                           "oracle-occupations.csv", "oracle-center.csv"})
    CHECK(fs::exists(out / name));

  const std::string occ = slurp(out / "occupations.csv");
  CHECK(occ.rfind("step,t,site,n_expect\n", 0) == 0);
  CHECK(count_lines(occ) == 1 + (cfg.steps + 1) * cfg.params.n_sites);
  const std::string center = slurp(out / "center.csv");
  CHECK(center.rfind("step,t,cbar,norm\n", 0) == 0);
  CHECK(count_lines(center) == 1 + cfg.steps + 1);

  // Untruncated coarse step vs the splitting: only the cubic-in-dt step
  // defect separates them (measured 5e-7 here), far below any physics.
  REQUIRE(art.diff.has_value());
  CHECK(art.diff->mean_abs_diff < 5e-6);
  CHECK(art.diff->cbar_mean_abs_diff.has_value());
}

TEST_CASE("lambda scan matches the library sweep") {
  const fs::path out = fresh_dir("scan");
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::lambda_scan;
  cfg.params.n_sites = 4;
  cfg.params.d_cut = 16;
  cfg.lambdas = {0.3};
  cfg.out_dir = out;
  trgtime::run_experiment(cfg);

  const std::string body = slurp(out / "lambda-scan.csv");
  REQUIRE(body.rfind("lambda,d_cut,nbar,source\n", 0) == 0);
  const auto line_start = body.find('\n') + 1;
  const auto line = body.substr(line_start,
                                body.find('\n', line_start) - line_start);
  const auto fields = [&] {
    std::vector<std::string> out_fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        out_fields.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    out_fields.push_back(cur);
    return out_fields;
  }();
  REQUIRE(fields.size() == 4);
  CHECK(fields[3] == "hotrg");

  const auto rows = trgtime::lambda_scan(std::span(cfg.lambdas), cfg.params);
  REQUIRE(rows.size() == 1);
  // 17 significant digits round-trip doubles exactly.
  CHECK(std::stod(fields[2]) == rows[0].nbar);
}

TEST_CASE("the step guard blocks and the override records diagnostics") {
  const fs::path out = fresh_dir("guard");
  ExperimentConfig cfg = small_spectrum_config(out, out);
  cfg.oracle = OracleKind::none;
  cfg.params.dt = 1.0;
  cfg.params.d_cut = 8;
  CHECK_THROWS_AS(trgtime::run_experiment(cfg), std::invalid_argument);

  cfg.params.allow_large_dt = true;
  const auto art = trgtime::run_experiment(cfg);
  const std::string manifest = slurp(art.manifest);
  const auto pos = manifest.find("discarded_weight_level_2: ");
  REQUIRE(pos != std::string::npos);
  const double w = std::stod(manifest.substr(
      pos + std::string("discarded_weight_level_2: ").size()));
  CHECK(w > 0.0);
  CHECK(manifest.find("allow_large_dt = true") != std::string::npos);
}
