#include "otoc_lab/linalg.hpp"

#include <cblas.h>

#include "otoc_lab/errors.hpp"

namespace otoc {

void multiply_into(Matrix& out, const Matrix& a, Op op_a, const Matrix& b, Op op_b) {
  const Eigen::Index m = op_a == Op::none ? a.rows() : a.cols();
  const Eigen::Index k = op_a == Op::none ? a.cols() : a.rows();
  const Eigen::Index kb = op_b == Op::none ? b.rows() : b.cols();
  const Eigen::Index n = op_b == Op::none ? b.cols() : b.rows();
  if (k != kb) throw DimensionError("matrix product with mismatched inner dimensions");
  if (&out == &a || &out == &b) throw ContractError("matrix product output aliases an operand");
  out.resize(m, n);
  if (m == 0 || n == 0) return;
  if (k == 0) {
    out.setZero();
    return;
  }
  const Complex one(1.0, 0.0);
  const Complex zero(0.0, 0.0);
  const auto trans = [](Op op) { return op == Op::none ? CblasNoTrans : CblasConjTrans; };
  cblas_zgemm(CblasColMajor, trans(op_a), trans(op_b), static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), &one, a.data(), static_cast<int>(a.rows()), b.data(),
              static_cast<int>(b.rows()), &zero, out.data(), static_cast<int>(out.rows()));
}

Matrix multiply(const Matrix& a, Op op_a, const Matrix& b, Op op_b) {
  Matrix out;
  multiply_into(out, a, op_a, b, op_b);
  return out;
}

}  // namespace otoc
