#include "trgtime/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include "trgtime/ed.hpp"
#include "trgtime/tebd.hpp"

namespace trgtime {

namespace {

constexpr const char* kVersion = "trgtime 0.1.0";

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != value.size())
    throw std::invalid_argument(key + ": not a number: '" + value + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(value, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != value.size())
    throw std::invalid_argument(key + ": not an integer: '" + value + "'");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw std::invalid_argument(key + ": not a boolean: '" + value + "'");
}

// Momenta may be written as multiples of pi ("pi/2", "-3pi/8") so that grid
// values round-trip exactly; plain decimals are accepted too.
double parse_momentum(const std::string& key, const std::string& value) {
  const auto p = value.find("pi");
  if (p == std::string::npos) return parse_double(key, value);
  std::string num = trim(value.substr(0, p));
  std::string den = trim(value.substr(p + 2));
  double sign = 1.0;
  if (!num.empty() && (num[0] == '+' || num[0] == '-')) {
    if (num[0] == '-') sign = -1.0;
    num = trim(num.substr(1));
  }
  const double numerator = num.empty() ? 1.0 : parse_double(key, num);
  double denominator = 1.0;
  if (!den.empty()) {
    if (den[0] != '/')
      throw std::invalid_argument(key + ": bad momentum: '" + value + "'");
    denominator = parse_double(key, trim(den.substr(1)));
  }
  return sign * numerator * M_PI / denominator;
}

Sector parse_sector(const std::string& key, const std::string& value) {
  if (value == "odd") return Sector::odd;
  if (value == "even") return Sector::even;
  throw std::invalid_argument(key + ": expected odd or even, got '" + value +
                              "'");
}

WavePacketSpec& packet_slot(ExperimentConfig& cfg, const std::string& key,
                            int index) {
  if (index < 1 || index > 2)
    throw std::invalid_argument("unknown config key: " + key);
  if (static_cast<int>(cfg.packets.size()) < index)
    cfg.packets.resize(static_cast<std::size_t>(index));
  return cfg.packets[static_cast<std::size_t>(index - 1)];
}

// Simple fixed-size pool over an index range; used for sweep points. The
// first exception wins and is rethrown after the pool drains.
void parallel_for(int n, const std::function<void(int)>& body) {
  const unsigned hw = std::thread::hardware_concurrency();
  const int workers = std::max(1, std::min(n, hw ? static_cast<int>(hw) : 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto work = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::filesystem::path cache_root(const ExperimentConfig& cfg) {
  if (!cfg.cache_dir.empty()) return cfg.cache_dir;
  if (const char* env = std::getenv("TRGTIME_CACHE_DIR"); env && *env)
    return env;
  return cfg.out_dir;
}

// Gathers everything the manifest needs while the experiment runs.
struct RunLog {
  std::vector<std::pair<std::string, std::string>> files;  // name -> body
  std::optional<DiffReport> diff;
  std::vector<std::string> notes;
  std::vector<std::string> warnings;
  int cache_hits = 0;
  int cache_builds = 0;
  std::mutex mu;  // guards the counters and cache writes from sweep workers
};

// The slice operator never depends on epsilon (the drive is applied as a
// separate factor), so the cache key drops it and longitudinal runs share
// the unperturbed entry.
ModelParams teo_params(const ExperimentConfig& cfg) {
  ModelParams p = cfg.params;
  p.epsilon = 0.0;
  return p;
}

CoarseTEO cached_teo(const ModelParams& p, const ExperimentConfig& cfg,
                     RunLog& log) {
  const std::filesystem::path root = cache_root(cfg);
  std::filesystem::create_directories(root);
  char name[32];
  std::snprintf(name, sizeof name, "teo-%016llx.trg",
                static_cast<unsigned long long>(fnv1a64(p.fingerprint())));
  const std::filesystem::path path = root / name;
  if (auto teo = load_teo(path, p)) {
    const std::lock_guard<std::mutex> lock(log.mu);
    ++log.cache_hits;
    return std::move(*teo);
  }
  CoarseTEO teo = build_teo(p);
  {
    const std::lock_guard<std::mutex> lock(log.mu);
    ++log.cache_builds;
    save_teo(teo, path);
  }
  return teo;
}

void note_tree(const IsometryTree& tree, RunLog& log) {
  for (const auto& lvl : tree.levels)
    log.notes.push_back("discarded_weight_level_" + std::to_string(lvl.level) +
                        ": " + g17(lvl.discarded_weight));
}

std::string occupations_csv(const EvolutionRun& run) {
  std::string s = "step,t,site,n_expect\n";
  for (const auto& rec : run.series)
    for (std::size_t j = 0; j < rec.n_expect.size(); ++j) {
      s += std::to_string(rec.step) + ',' + g17(rec.t) + ',' +
           std::to_string(j) + ',' + g17(rec.n_expect[j]) + '\n';
    }
  return s;
}

std::string center_csv(const EvolutionRun& run) {
  std::string s = "step,t,cbar,norm\n";
  for (const auto& rec : run.series) {
    s += std::to_string(rec.step) + ',' + g17(rec.t) + ',';
    if (rec.cbar) s += g17(*rec.cbar);
    s += ',' + g17(rec.norm) + '\n';
  }
  return s;
}

void add_series_files(RunLog& log, const std::string& prefix,
                      const EvolutionRun& run) {
  log.files.emplace_back(prefix + "occupations.csv", occupations_csv(run));
  log.files.emplace_back(prefix + "center.csv", center_csv(run));
}

// Dense drive factor exp(-i dt epsilon sum_j sx_j); site 0 is the major bit,
// matching the dense reference.
MatrixXcd dense_drive(const ModelParams& p) {
  const std::int64_t dim = std::int64_t{1} << p.n_sites;
  MatrixXcd h = MatrixXcd::Zero(dim, dim);
  for (int j = 0; j < p.n_sites; ++j) {
    const std::int64_t mask = std::int64_t{1} << (p.n_sites - 1 - j);
    for (std::int64_t b = 0; b < dim; ++b) h(b ^ mask, b) += p.epsilon;
  }
  return ed::exact_teo(h, p.dt);
}

EvolutionRun dense_oracle_run(const ExperimentConfig& cfg) {
  const ModelParams base = teo_params(cfg);
  const MatrixXcd h = ed::build_hamiltonian(base);
  VectorXcd psi = ed::dense_ground_state(h);
  for (const auto& spec : cfg.packets)
    psi = ed::dense_packet(spec, base.n_sites, psi);
  const MatrixXcd teo = cfg.oracle == OracleKind::ed_exact
                            ? ed::exact_teo(h, base.dt)
                            : ed::trotter_teo(base);
  MatrixXcd drive;
  const MatrixXcd* pert = nullptr;
  if (cfg.params.epsilon > 0.0) {
    drive = dense_drive(cfg.params);
    pert = &drive;
  }
  return ed::dense_evolve(psi, teo, base.n_sites, cfg.steps, base.dt, pert);
}

EvolutionRun tebd_run(const ExperimentConfig& cfg, RunLog& log) {
  MPS psi = vacuum_mps(teo_params(cfg));
  // The packet sum is built essentially exactly; the configured cutoff and
  // bond cap govern the evolution truncation only, so the comparison
  // measures the walker and not the starting-state construction.
  psi.num_cutoff = 1e-24;
  psi.max_bond = 0;
  for (const auto& spec : cfg.packets) psi = apply_packet(spec, psi);
  normalize(psi);
  psi.num_cutoff = cfg.tebd_cutoff;
  psi.max_bond = cfg.tebd_max_bond;
  psi.total_discarded = 0.0;
  EvolutionRun run = tebd_evolve(std::move(psi), cfg.params, cfg.steps);
  log.notes.push_back("tebd_total_discarded: " + g17(run.total_discarded));
  return run;
}

EvolutionRun oracle_run(const ExperimentConfig& cfg, RunLog& log) {
  if (cfg.oracle == OracleKind::tebd) return tebd_run(cfg, log);
  return dense_oracle_run(cfg);
}

void run_spectrum(const ExperimentConfig& cfg, RunLog& log) {
  const CoarseTEO teo = cached_teo(teo_params(cfg), cfg, log);
  note_tree(teo.tree, log);
  for (const auto& w : teo.warnings) log.warnings.push_back(w);

  const SpectrumResult sr = spectrum(teo);
  int aliased = 0;
  std::string csv = "index,re_E,im_E,source\n";
  for (std::size_t i = 0; i < sr.energies.size(); ++i) {
    csv += std::to_string(i) + ',' + g17(sr.energies[i].real()) + ',' +
           g17(sr.energies[i].imag()) + ",hotrg\n";
    if (sr.aliased[i]) ++aliased;
  }
  if (aliased > 0)
    log.warnings.push_back(std::to_string(aliased) +
                           " eigenvalues on the energy branch cut");
  if (cfg.oracle == OracleKind::ed_exact) {
    const auto ed_vals =
        ed::dense_spectrum(ed::build_hamiltonian(teo_params(cfg)));
    for (std::size_t i = 0; i < ed_vals.size(); ++i)
      csv += std::to_string(i) + ',' + g17(ed_vals[i]) + ",0,ed\n";
  }
  log.files.emplace_back("spectrum.csv", std::move(csv));
}

void run_lambda_scan(const ExperimentConfig& cfg, RunLog& log) {
  const int n = static_cast<int>(cfg.lambdas.size());
  std::vector<LambdaScanRow> rows(static_cast<std::size_t>(n));
  std::vector<double> final_discarded(static_cast<std::size_t>(n));
  parallel_for(n, [&](int i) {
    ModelParams p = teo_params(cfg);
    p.lambda = cfg.lambdas[static_cast<std::size_t>(i)];
    const CoarseTEO teo = cached_teo(p, cfg, log);
    const ProjectedState vac = vacuum_state(teo);
    double total = 0.0;
    for (const auto& op : projected_number_operators(teo.tree))
      total += expectation(op, vac).real();
    rows[static_cast<std::size_t>(i)] = {p.lambda, p.d_cut,
                                         total / p.n_sites};
    final_discarded[static_cast<std::size_t>(i)] =
        teo.tree.levels.back().discarded_weight;
  });

  std::string csv = "lambda,d_cut,nbar,source\n";
  for (const auto& row : rows)
    csv += g17(row.lambda) + ',' + std::to_string(row.d_cut) + ',' +
           g17(row.nbar) + ",hotrg\n";
  if (cfg.oracle == OracleKind::ed_exact) {
    for (double lam : cfg.lambdas) {
      ModelParams p = teo_params(cfg);
      p.lambda = lam;
      const VectorXcd gs = ed::dense_ground_state(ed::build_hamiltonian(p));
      const auto occ = ed::measure_n(p.n_sites, gs);
      double total = 0.0;
      for (double v : occ) total += v;
      csv += g17(lam) + ',' + std::to_string(p.d_cut) + ',' +
             g17(total / p.n_sites) + ",ed\n";
    }
  }
  log.files.emplace_back("lambda-scan.csv", std::move(csv));
  for (int i = 0; i < n; ++i)
    log.notes.push_back(
        "discarded_weight_lambda_" + g17(cfg.lambdas[static_cast<std::size_t>(i)]) +
        ": " + g17(final_discarded[static_cast<std::size_t>(i)]));
}

void run_evolution(const ExperimentConfig& cfg, RunLog& log) {
  const CoarseTEO teo = cached_teo(teo_params(cfg), cfg, log);
  note_tree(teo.tree, log);
  for (const auto& w : teo.warnings) log.warnings.push_back(w);

  ProjectedState psi = vacuum_state(teo);
  for (const auto& spec : cfg.packets)
    psi = gaussian_packet(spec, teo.tree, psi);

  EvolveOptions opts;
  ProjectedOperator drive;
  if (cfg.kind == ExperimentKind::longitudinal) {
    drive = longitudinal_unitary(teo.tree, cfg.params.epsilon, cfg.params.dt);
    opts.perturbation = &drive;
  }
  const EvolutionRun run = evolve(psi, teo, cfg.steps, opts);
  add_series_files(log, "", run);

  if (cfg.oracle != OracleKind::none) {
    const EvolutionRun ref = oracle_run(cfg, log);
    add_series_files(log, "oracle-", ref);
    log.diff = diff_series(run, ref, cfg.pointwise_pct);
  }
}

void run_q_sweep(const ExperimentConfig& cfg, RunLog& log) {
  const int n = cfg.sweep_points;
  std::vector<double> thetas(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    thetas[static_cast<std::size_t>(i)] =
        (M_PI / 2) * static_cast<double>(i) / (n - 1);
  std::vector<QSweepRow> rows(static_cast<std::size_t>(n));
  parallel_for(n, [&](int i) {
    const std::span<const double> one(&thetas[static_cast<std::size_t>(i)], 1);
    rows[static_cast<std::size_t>(i)] =
        q_sweep(teo_params(cfg), one, cfg.params.q_variant, cfg.q_level)[0];
  });
  std::string csv = "theta,eigen_index,value\n";
  for (const auto& row : rows)
    for (std::size_t k = 0; k < row.eigenvalues.size(); ++k)
      csv += g17(row.theta) + ',' + std::to_string(k) + ',' +
             g17(row.eigenvalues[k]) + '\n';
  log.files.emplace_back("q-sweep.csv", std::move(csv));
}

void run_tebd_compare(const ExperimentConfig& cfg, RunLog& log) {
  const EvolutionRun run = tebd_run(cfg, log);
  add_series_files(log, "", run);
  const EvolutionRun ref = dense_oracle_run(cfg);
  add_series_files(log, "oracle-", ref);
  log.diff = diff_series(run, ref, cfg.pointwise_pct);
}

void write_atomic(const std::filesystem::path& path, const std::string& body) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!os) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string packet_value(const WavePacketSpec& s) {
  return "k=" + g17(s.k_center) + " x=" + std::to_string(s.x_center) +
         " sigma=" + g17(s.sigma) + " sector=" + to_string(s.sector);
}

std::string manifest_text(const ExperimentConfig& cfg, const RunLog& log,
                          double wall_seconds) {
  std::string m;
  m += "experiment: " + to_string(cfg.kind) + '\n';
  m += "code_version: " + code_version() + '\n';
  m += "wall_seconds: " + g17(wall_seconds) + '\n';
  if (log.cache_hits + log.cache_builds > 0)
    m += "teo_cache: " + std::to_string(log.cache_hits) + " hits, " +
         std::to_string(log.cache_builds) + " builds\n";
  m += "fingerprint: " + teo_params(cfg).fingerprint() + '\n';
  m += "params:\n";
  m += "  sites = " + std::to_string(cfg.params.n_sites) + '\n';
  m += "  lambda = " + g17(cfg.params.lambda) + '\n';
  m += "  dt = " + g17(cfg.params.dt) + '\n';
  m += "  epsilon = " + g17(cfg.params.epsilon) + '\n';
  m += "  dcut = " + std::to_string(cfg.params.d_cut) + '\n';
  m += "  boundary = " + to_string(cfg.params.boundary) + '\n';
  m += "  q_variant = " + to_string(cfg.params.q_variant) + '\n';
  m += "  mode = " + to_string(cfg.params.mode) + '\n';
  m += "  allow_large_dt = " +
       std::string(cfg.params.allow_large_dt ? "true" : "false") + '\n';
  m += "  steps = " + std::to_string(cfg.steps) + '\n';
  m += "  oracle = " + to_string(cfg.oracle) + '\n';
  for (std::size_t i = 0; i < cfg.packets.size(); ++i)
    m += "  packet" + std::to_string(i + 1) + " = " +
         packet_value(cfg.packets[i]) + '\n';
  if (!cfg.lambdas.empty()) {
    m += "  lambdas =";
    for (double v : cfg.lambdas) m += ' ' + g17(v);
    m += '\n';
  }
  if (cfg.kind == ExperimentKind::q_sweep) {
    m += "  sweep_points = " + std::to_string(cfg.sweep_points) + '\n';
    m += "  q_level = " + std::to_string(cfg.q_level) + '\n';
  }
  if (cfg.oracle == OracleKind::tebd ||
      cfg.kind == ExperimentKind::tebd_compare) {
    m += "  tebd_cutoff = " + g17(cfg.tebd_cutoff) + '\n';
    m += "  tebd_max_bond = " + std::to_string(cfg.tebd_max_bond) + '\n';
  }
  for (const auto& note : log.notes) m += note + '\n';
  if (log.diff) {
    m += "diff_mean_abs: " + g17(log.diff->mean_abs_diff) + '\n';
    m += "diff_mean_pct" +
         std::string(cfg.pointwise_pct ? " (pointwise): " : ": ") +
         g17(log.diff->mean_pct_diff) + '\n';
    m += "diff_max_abs: " + g17(log.diff->max_abs_diff) + '\n';
    if (log.diff->cbar_mean_abs_diff)
      m += "diff_cbar_mean_abs: " + g17(*log.diff->cbar_mean_abs_diff) + '\n';
  }
  for (const auto& w : log.warnings) m += "warning: " + w + '\n';
  m += "files:\n";
  for (const auto& [name, body] : log.files) {
    (void)body;
    m += "  " + name + '\n';
  }
  return m;
}

}  // namespace

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::spectrum: return "spectrum";
    case ExperimentKind::lambda_scan: return "lambda-scan";
    case ExperimentKind::evolve_one: return "evolve-one";
    case ExperimentKind::evolve_two: return "evolve-two";
    case ExperimentKind::longitudinal: return "longitudinal";
    case ExperimentKind::q_sweep: return "q-sweep";
    case ExperimentKind::tebd_compare: return "tebd-compare";
  }
  throw std::logic_error("bad ExperimentKind");
}

std::string to_string(OracleKind k) {
  switch (k) {
    case OracleKind::ed_exact: return "ed-exact";
    case OracleKind::ed_trotter: return "ed-trotter";
    case OracleKind::tebd: return "tebd";
    case OracleKind::none: return "none";
  }
  throw std::logic_error("bad OracleKind");
}

ExperimentKind experiment_kind_from(const std::string& name) {
  for (ExperimentKind k :
       {ExperimentKind::spectrum, ExperimentKind::lambda_scan,
        ExperimentKind::evolve_one, ExperimentKind::evolve_two,
        ExperimentKind::longitudinal, ExperimentKind::q_sweep,
        ExperimentKind::tebd_compare})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("kind: unknown experiment '" + name + "'");
}

OracleKind oracle_from(const std::string& name) {
  for (OracleKind k : {OracleKind::ed_exact, OracleKind::ed_trotter,
                       OracleKind::tebd, OracleKind::none})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("oracle: unknown oracle '" + name + "'");
}

void ExperimentConfig::validate() const {
  params.validate();
  for (const auto& spec : packets) spec.validate(params.n_sites);

  const bool evolves = kind == ExperimentKind::evolve_one ||
                       kind == ExperimentKind::evolve_two ||
                       kind == ExperimentKind::longitudinal ||
                       kind == ExperimentKind::tebd_compare;
  if (evolves && steps < 1)
    throw std::invalid_argument("steps: must be >= 1");
  if (!(tebd_cutoff >= 0.0))
    throw std::invalid_argument("tebd_cutoff: must be >= 0");
  if (tebd_max_bond < 0)
    throw std::invalid_argument("tebd_max_bond: must be >= 0 (0 = unlimited)");

  const bool dense_oracle =
      oracle == OracleKind::ed_exact || oracle == OracleKind::ed_trotter;
  if (dense_oracle && params.n_sites > ed::kMaxDenseSites)
    throw std::invalid_argument(
        "oracle: dense references are capped at " +
        std::to_string(ed::kMaxDenseSites) + " sites");

  switch (kind) {
    case ExperimentKind::spectrum:
      if (oracle != OracleKind::none && oracle != OracleKind::ed_exact)
        throw std::invalid_argument(
            "oracle: spectrum compares against ed-exact only");
      break;
    case ExperimentKind::lambda_scan:
      if (lambdas.empty())
        throw std::invalid_argument(
            "lambdas: lambda-scan needs at least one value");
      for (double v : lambdas)
        if (!(v >= 0.0) || !std::isfinite(v))
          throw std::invalid_argument("lambdas: values must be finite, >= 0");
      if (oracle != OracleKind::none && oracle != OracleKind::ed_exact)
        throw std::invalid_argument(
            "oracle: lambda-scan compares against ed-exact only");
      break;
    case ExperimentKind::evolve_one:
      if (packets.size() != 1)
        throw std::invalid_argument(
            "packet1: evolve-one needs exactly one packet");
      break;
    case ExperimentKind::evolve_two:
      if (packets.size() != 2)
        throw std::invalid_argument(
            "packet2: evolve-two needs exactly two packets");
      break;
    case ExperimentKind::longitudinal:
      if (!(params.epsilon > 0.0))
        throw std::invalid_argument(
            "epsilon: the longitudinal drive needs epsilon > 0");
      break;
    case ExperimentKind::q_sweep:
      if (sweep_points < 2)
        throw std::invalid_argument("sweep_points: must be >= 2");
      if (q_level < 1 || q_level > params.levels())
        throw std::invalid_argument("q_level: outside [1, levels]");
      if (oracle != OracleKind::none)
        throw std::invalid_argument("oracle: q-sweep has no reference series");
      break;
    case ExperimentKind::tebd_compare:
      if (packets.empty())
        throw std::invalid_argument(
            "packet1: tebd-compare needs a starting packet");
      if (oracle != OracleKind::ed_exact && oracle != OracleKind::ed_trotter)
        throw std::invalid_argument(
            "oracle: tebd-compare needs ed-exact or ed-trotter");
      break;
  }
}

void apply_setting(ExperimentConfig& cfg, const std::string& key,
                   const std::string& value) {
  if (key == "kind") {
    cfg.kind = experiment_kind_from(value);
  } else if (key == "sites") {
    cfg.params.n_sites = parse_int(key, value);
  } else if (key == "lambda") {
    cfg.params.lambda = parse_double(key, value);
  } else if (key == "dt") {
    cfg.params.dt = parse_double(key, value);
  } else if (key == "epsilon") {
    cfg.params.epsilon = parse_double(key, value);
  } else if (key == "dcut") {
    cfg.params.d_cut = parse_int(key, value);
  } else if (key == "boundary") {
    if (value == "periodic")
      cfg.params.boundary = Boundary::periodic;
    else if (value == "open")
      cfg.params.boundary = Boundary::open;
    else
      throw std::invalid_argument("boundary: expected periodic or open");
  } else if (key == "q_variant") {
    if (value == "ReMMT")
      cfg.params.q_variant = QVariant::ReMMT;
    else if (value == "MMdag")
      cfg.params.q_variant = QVariant::MMdag;
    else if (value == "ImMMdag")
      cfg.params.q_variant = QVariant::ImMMdag;
    else if (value == "ImMMT")
      cfg.params.q_variant = QVariant::ImMMT;
    else
      throw std::invalid_argument(
          "q_variant: expected ReMMT, MMdag, ImMMdag or ImMMT");
  } else if (key == "mode") {
    if (value == "real")
      cfg.params.mode = TimeMode::real_time;
    else if (value == "imaginary")
      cfg.params.mode = TimeMode::imaginary_time;
    else
      throw std::invalid_argument("mode: expected real or imaginary");
  } else if (key == "allow_large_dt") {
    cfg.params.allow_large_dt = parse_bool(key, value);
  } else if (key == "steps") {
    cfg.steps = parse_int(key, value);
  } else if (key == "oracle") {
    cfg.oracle = oracle_from(value);
  } else if (key == "lambdas") {
    cfg.lambdas.clear();
    for (const auto& part : split(value, ','))
      cfg.lambdas.push_back(parse_double(key, trim(part)));
  } else if (key == "sweep_points") {
    cfg.sweep_points = parse_int(key, value);
  } else if (key == "q_level") {
    cfg.q_level = parse_int(key, value);
  } else if (key == "tebd_cutoff") {
    cfg.tebd_cutoff = parse_double(key, value);
  } else if (key == "tebd_max_bond") {
    cfg.tebd_max_bond = parse_int(key, value);
  } else if (key == "pointwise_pct") {
    cfg.pointwise_pct = parse_bool(key, value);
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "cache_dir") {
    cfg.cache_dir = value;
  } else if (key.rfind("packet", 0) == 0 && key.size() > 7 &&
             key[7] == '_') {
    const int index = key[6] - '0';
    const std::string field = key.substr(8);
    WavePacketSpec& spec = packet_slot(cfg, key, index);
    if (field == "k")
      spec.k_center = parse_momentum(key, value);
    else if (field == "x")
      spec.x_center = parse_int(key, value);
    else if (field == "sigma")
      spec.sigma = parse_double(key, value);
    else if (field == "sector")
      spec.sector = parse_sector(key, value);
    else
      throw std::invalid_argument("unknown config key: " + key);
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

ExperimentConfig parse_config(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is)
    throw std::invalid_argument("config: cannot open " + file.string());
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not key = value");
    apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

DiffReport diff_series(const EvolutionRun& a, const EvolutionRun& b,
                       bool pointwise_pct) {
  if (a.series.size() != b.series.size())
    throw std::invalid_argument("diff_series: record counts differ");
  DiffReport rep;
  rep.per_step_abs.reserve(a.series.size());
  double sum_abs = 0.0, sum_ref = 0.0, sum_ratio = 0.0;
  std::size_t count = 0;
  double cbar_sum = 0.0;
  std::size_t cbar_count = 0;
  for (std::size_t s = 0; s < a.series.size(); ++s) {
    const auto& ra = a.series[s];
    const auto& rb = b.series[s];
    if (ra.n_expect.size() != rb.n_expect.size())
      throw std::invalid_argument("diff_series: site counts differ");
    double step_sum = 0.0;
    for (std::size_t j = 0; j < ra.n_expect.size(); ++j) {
      const double d = std::abs(ra.n_expect[j] - rb.n_expect[j]);
      step_sum += d;
      sum_abs += d;
      sum_ref += std::abs(rb.n_expect[j]);
      if (rb.n_expect[j] != 0.0) sum_ratio += d / std::abs(rb.n_expect[j]);
      rep.max_abs_diff = std::max(rep.max_abs_diff, d);
      ++count;
    }
    rep.per_step_abs.push_back(
        ra.n_expect.empty()
            ? 0.0
            : step_sum / static_cast<double>(ra.n_expect.size()));
    if (ra.cbar && rb.cbar) {
      cbar_sum += std::abs(*ra.cbar - *rb.cbar);
      ++cbar_count;
    }
  }
  if (count > 0) {
    rep.mean_abs_diff = sum_abs / static_cast<double>(count);
    rep.mean_pct_diff =
        pointwise_pct
            ? 100.0 * sum_ratio / static_cast<double>(count)
            : (sum_ref > 0.0 ? 100.0 * sum_abs / sum_ref : 0.0);
  }
  if (cbar_count > 0)
    rep.cbar_mean_abs_diff = cbar_sum / static_cast<double>(cbar_count);
  return rep;
}

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  RunLog log;
  switch (cfg.kind) {
    case ExperimentKind::spectrum: run_spectrum(cfg, log); break;
    case ExperimentKind::lambda_scan: run_lambda_scan(cfg, log); break;
    case ExperimentKind::evolve_one:
    case ExperimentKind::evolve_two:
    case ExperimentKind::longitudinal: run_evolution(cfg, log); break;
    case ExperimentKind::q_sweep: run_q_sweep(cfg, log); break;
    case ExperimentKind::tebd_compare: run_tebd_compare(cfg, log); break;
  }

  std::filesystem::create_directories(cfg.out_dir);
  RunArtifacts artifacts;
  for (const auto& [name, body] : log.files) {
    const std::filesystem::path path = cfg.out_dir / name;
    write_atomic(path, body);
    artifacts.csv_files.push_back(path);
  }
  artifacts.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  artifacts.manifest = cfg.out_dir / "manifest.txt";
  write_atomic(artifacts.manifest,
               manifest_text(cfg, log, artifacts.wall_seconds));
  artifacts.diff = log.diff;
  artifacts.cache_hit = log.cache_hits > 0 && log.cache_builds == 0;
  return artifacts;
}

std::string code_version() { return kVersion; }

}  // namespace trgtime
