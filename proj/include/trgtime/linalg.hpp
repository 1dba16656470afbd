#pragma once

#include "trgtime/tensor.hpp"

namespace trgtime {

// Kronecker product, first factor major (block) index.
MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b);

}  // namespace trgtime
