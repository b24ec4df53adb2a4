#pragma once

// Differentiable primitives. Every op is pure: inputs are never mutated.
// 1-D tensors are treated as a single row wherever a matrix is expected.

#include <cstdint>
#include <span>
#include <vector>

#include "licm/random.hpp"
#include "licm/tensor.hpp"

namespace licm::num {

Tensor matmul(const Tensor& a, const Tensor& b);
// a · bᵀ without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Adds a length-n vector to every row of an [m x n] matrix.
Tensor add_bias(const Tensor& a, const Tensor& bias);
Tensor scale(const Tensor& a, double s);
// 1 - a, elementwise.
Tensor one_minus(const Tensor& a);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// Max-subtracted softmax. axis 0 or 1 for matrices; 0 for vectors.
Tensor softmax(const Tensor& x, int axis);
// Softmax of a vector restricted to positions where mask is true; masked
// positions are exactly 0. Throws when no position is unmasked.
Tensor masked_softmax(const Tensor& x, const std::vector<bool>& mask);
Tensor log_softmax(const Tensor& x);

Tensor sum(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);
// Single element of a tensor, as a scalar.
Tensor element(const Tensor& a, std::size_t index);

// Concatenation of 1-D tensors into one 1-D tensor.
Tensor concat(const std::vector<Tensor>& parts);
// Horizontal concatenation of matrices with equal row counts.
Tensor concat_cols(const std::vector<Tensor>& parts);
// Stacks equal-length vectors (or row blocks) vertically.
Tensor stack_rows(const std::vector<Tensor>& rows);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor row(const Tensor& a, std::size_t index);
Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> indices);
Tensor repeat_rows(const Tensor& v, std::size_t n);

// Constant sparse matrix in CSR form; only the dense operand is differentiated.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;  // rows + 1 entries
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
};
Tensor spmm(const SparseMatrix& a, const Tensor& dense);

// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& a, double p, Rng& rng);

}  // namespace licm::num
