#include "licm/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "licm/ops.hpp"

namespace licm::num {

PoolResult attention_pool(const Tensor& values, const AttentionPoolParams& params,
                          const std::vector<bool>& mask) {
  if (mask.size() != values.rows()) {
    throw DimensionError("attention_pool: mask length " + std::to_string(mask.size()) +
                         " vs values " + shape_str(values.shape()));
  }
  bool any = false;
  for (bool m : mask) any = any || m;
  if (!any) throw std::invalid_argument("attention_pool: every position is masked");

  const Tensor hidden = tanh(matmul(values, params.proj));  // [T x a]
  const Tensor logits = matmul_nt(params.query, hidden);     // [T]
  Tensor alpha = masked_softmax(logits, mask);
  Tensor out = matmul(alpha, values);
  return {std::move(out), std::move(alpha)};
}

PoolResult attention_pool(const Tensor& values, const AttentionPoolParams& params) {
  return attention_pool(values, params, std::vector<bool>(values.rows(), true));
}

MsaResult multi_head_self_attention(const Tensor& x, const MsaParams& params) {
  if (x.ndim() != 2) {
    throw DimensionError("multi_head_self_attention expects [T x d], got " + shape_str(x.shape()));
  }
  const std::size_t d_out = params.wq.cols();
  if (params.heads == 0 || d_out % params.heads != 0) {
    throw std::invalid_argument("configuration error: output dim " + std::to_string(d_out) +
                                " not divisible by " + std::to_string(params.heads) + " heads");
  }
  const std::size_t dh = d_out / params.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  const Tensor q = matmul(x, params.wq);
  const Tensor k = matmul(x, params.wk);
  const Tensor v = matmul(x, params.wv);

  MsaResult result;
  std::vector<Tensor> head_out;
  head_out.reserve(params.heads);
  for (std::size_t h = 0; h < params.heads; ++h) {
    const std::size_t b = h * dh, e = b + dh;
    Tensor qh = slice_cols(q, b, e);
    Tensor kh = slice_cols(k, b, e);
    Tensor vh = slice_cols(v, b, e);
    Tensor attn = softmax(scale(matmul_nt(qh, kh), inv_sqrt), 1);
    head_out.push_back(matmul(attn, vh));
    result.attention.push_back(std::move(attn));
  }
  result.output = params.heads == 1 ? head_out[0] : concat_cols(head_out);
  return result;
}

}  // namespace licm::num
