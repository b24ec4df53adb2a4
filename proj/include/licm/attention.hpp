#pragma once

#include <cstddef>
#include <vector>

#include "licm/tensor.hpp"

namespace licm::num {

// Additive attention pooling: alpha = softmax_i(q . tanh(W v_i)), out = sum alpha_i v_i.
struct AttentionPoolParams {
  Tensor proj;   // [d x a], applied as v_i W
  Tensor query;  // [a]
};

struct PoolResult {
  Tensor output;   // [d]
  Tensor weights;  // [T], exactly 0 at masked positions
};

PoolResult attention_pool(const Tensor& values, const AttentionPoolParams& params,
                          const std::vector<bool>& mask);
// All positions unmasked.
PoolResult attention_pool(const Tensor& values, const AttentionPoolParams& params);

struct MsaParams {
  Tensor wq;  // [d_in x d_out]
  Tensor wk;
  Tensor wv;
  std::size_t heads = 1;
};

struct MsaResult {
  Tensor output;                 // [T x d_out]
  std::vector<Tensor> attention;  // one [T x T] row-stochastic matrix per head
};

// Scaled dot-product self-attention per head, heads concatenated. No positional
// encoding, so the op is permutation-equivariant over rows.
MsaResult multi_head_self_attention(const Tensor& x, const MsaParams& params);

}  // namespace licm::num
