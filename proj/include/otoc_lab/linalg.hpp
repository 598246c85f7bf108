#pragma once

#include "otoc_lab/operators.hpp"

namespace otoc {

enum class Op { none, adjoint };

// out = op(a) * op(b) through the BLAS zgemm. `out` is resized as needed and
// must not alias either operand.
void multiply_into(Matrix& out, const Matrix& a, Op op_a, const Matrix& b, Op op_b);

Matrix multiply(const Matrix& a, Op op_a, const Matrix& b, Op op_b);
inline Matrix multiply(const Matrix& a, const Matrix& b) {
  return multiply(a, Op::none, b, Op::none);
}

}  // namespace otoc
