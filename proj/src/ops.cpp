#include "licm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace licm::num {

namespace {

// Gradient buffer of parent i, or nullptr when it does not need one.
double* parent_grad(Node& n, std::size_t i) {
  Node& p = *n.parents[i];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

const double* parent_value(Node& n, std::size_t i) { return n.parents[i]->value.data(); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m x n] += a[m x k] * b[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

Shape result_shape(const Tensor& a, std::size_t m, std::size_t n) {
  if (a.ndim() == 1 && m == 1) return {n};
  return {m, n};
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols();
  if (b.ndim() != 2 || b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  const std::size_t n = b.cols();
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_result(result_shape(a, m, n), std::move(out), {a, b}, [m, k, n](Node& self) {
    const double* g = self.grad.data();
    if (double* ga = parent_grad(self, 0)) gemm_nt(g, parent_value(self, 1), ga, m, n, k);
    if (double* gb = parent_grad(self, 1)) gemm_tn(parent_value(self, 0), g, gb, m, k, n);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt: inner dimensions differ for " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()) + "^T");
  }
  const std::size_t n = b.rows();
  std::vector<double> out(m * n, 0.0);
  gemm_nt(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_result(result_shape(a, m, n), std::move(out), {a, b}, [m, k, n](Node& self) {
    const double* g = self.grad.data();
    // C = A B^T: dA = G B, dB = G^T A
    if (double* ga = parent_grad(self, 0)) gemm_nn(g, parent_value(self, 1), ga, m, n, k);
    if (double* gb = parent_grad(self, 1)) gemm_tn(g, parent_value(self, 0), gb, m, n, k);
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  const double* x = a.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      const double* g = self.grad.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& g = self.grad;
    for (std::size_t p = 0; p < 2; ++p)
      if (double* gp = parent_grad(self, p))
        for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& g = self.grad;
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (double* gb = parent_grad(self, 1))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& g = self.grad;
    const double* av = parent_value(self, 0);
    const double* bv = parent_value(self, 1);
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    if (double* gb = parent_grad(self, 1))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  const std::size_t m = a.rows(), n = a.cols();
  if (bias.size() != n) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " vs matrix " +
                         shape_str(a.shape()));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bd[j];
  return make_result(a.shape(), std::move(out), {a, bias}, [m, n](Node& self) {
    const auto& g = self.grad;
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (double* gb = parent_grad(self, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  return make_result(a.shape(), std::move(out), {a}, [s](Node& self) {
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += s * self.grad[i];
  });
}

Tensor one_minus(const Tensor& a) {
  std::vector<double> out(a.size());
  const auto ad = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - ad[i];
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] -= self.grad[i];
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.size());
  const auto ad = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(ad[i]);
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double y = self.value[i];
        ga[i] += self.grad[i] * (1.0 - y * y);
      }
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.size());
  const auto ad = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = ad[i];
    // Branches keep exp() from overflowing for large |x|.
    if (x >= 0) {
      out[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      out[i] = e / (1.0 + e);
    }
  }
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double y = self.value[i];
        ga[i] += self.grad[i] * y * (1.0 - y);
      }
  });
}

namespace {

// Applies softmax over `count` elements spaced `stride` apart.
void softmax_strided(const double* x, double* y, std::size_t count, std::size_t stride) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) mx = std::max(mx, x[i * stride]);
  double z = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    y[i * stride] = std::exp(x[i * stride] - mx);
    z += y[i * stride];
  }
  for (std::size_t i = 0; i < count; ++i) y[i * stride] /= z;
}

void softmax_backward_strided(const double* y, const double* g, double* gx, std::size_t count,
                              std::size_t stride) {
  double s = 0.0;
  for (std::size_t i = 0; i < count; ++i) s += g[i * stride] * y[i * stride];
  for (std::size_t i = 0; i < count; ++i) gx[i * stride] += y[i * stride] * (g[i * stride] - s);
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  if (x.ndim() == 1 && axis != 0) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for vector");
  }
  if (x.ndim() == 2 && axis != 0 && axis != 1) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for matrix");
  }
  const std::size_t m = x.rows(), n = x.cols();
  // For a vector treat the single row as the axis.
  const bool along_rows = x.ndim() == 1 || axis == 1;
  std::vector<double> out(x.size());
  const double* xv = x.data().data();
  if (along_rows) {
    for (std::size_t i = 0; i < m; ++i) softmax_strided(xv + i * n, out.data() + i * n, n, 1);
  } else {
    for (std::size_t j = 0; j < n; ++j) softmax_strided(xv + j, out.data() + j, m, n);
  }
  return make_result(x.shape(), std::move(out), {x}, [m, n, along_rows](Node& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    const double* y = self.value.data();
    const double* g = self.grad.data();
    if (along_rows) {
      for (std::size_t i = 0; i < m; ++i)
        softmax_backward_strided(y + i * n, g + i * n, gx + i * n, n, 1);
    } else {
      for (std::size_t j = 0; j < n; ++j) softmax_backward_strided(y + j, g + j, gx + j, m, n);
    }
  });
}

Tensor masked_softmax(const Tensor& x, const std::vector<bool>& mask) {
  const std::size_t n = x.size();
  if (mask.size() != n) {
    throw DimensionError("masked_softmax: mask length " + std::to_string(mask.size()) +
                         " vs " + shape_str(x.shape()));
  }
  const double* xv = x.data().data();
  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i]) {
      mx = std::max(mx, xv[i]);
      any = true;
    }
  if (!any) throw std::invalid_argument("masked_softmax: every position is masked");
  std::vector<double> out(n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i]) {
      out[i] = std::exp(xv[i] - mx);
      z += out[i];
    }
  for (auto& v : out) v /= z;
  return make_result(x.shape(), std::move(out), {x}, [n](Node& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    // Masked outputs are constant 0 and y_i = 0 there, so the dense formula holds.
    softmax_backward_strided(self.value.data(), self.grad.data(), gx, n, 1);
  });
}

Tensor log_softmax(const Tensor& x) {
  if (x.ndim() != 1) throw DimensionError("log_softmax expects a vector, got " + shape_str(x.shape()));
  const std::size_t n = x.size();
  const double* xv = x.data().data();
  const double mx = *std::max_element(xv, xv + n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(xv[i] - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = xv[i] - lse;
  return make_result(x.shape(), std::move(out), {x}, [n](Node& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    double gs = 0.0;
    for (std::size_t i = 0; i < n; ++i) gs += self.grad[i];
    for (std::size_t i = 0; i < n; ++i) gx[i] += self.grad[i] - std::exp(self.value[i]) * gs;
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result({1}, {s}, {a}, [](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[0];
    }
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  double s = 0.0;
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) s += ad[i] * bd[i];
  return make_result({1}, {s}, {a, b}, [](Node& self) {
    const double g = self.grad[0];
    const std::size_t n = self.parents[0]->value.size();
    const double* av = parent_value(self, 0);
    const double* bv = parent_value(self, 1);
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < n; ++i) ga[i] += g * bv[i];
    if (double* gb = parent_grad(self, 1))
      for (std::size_t i = 0; i < n; ++i) gb[i] += g * av[i];
  });
}

Tensor element(const Tensor& a, std::size_t index) {
  if (index >= a.size()) {
    throw DimensionError("element: index " + std::to_string(index) + " out of " +
                         shape_str(a.shape()));
  }
  return make_result({1}, {a.data()[index]}, {a}, [index](Node& self) {
    if (double* ga = parent_grad(self, 0)) ga[index] += self.grad[0];
  });
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.ndim() != 1) throw DimensionError("concat expects vectors, got " + shape_str(p.shape()));
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  const std::size_t n = out.size();
  return make_result({n}, std::move(out), parts, [offsets](Node& self) {
    for (std::size_t p = 0; p < offsets.size(); ++p)
      if (double* gp = parent_grad(self, p)) {
        const std::size_t len = self.parents[p]->value.size();
        for (std::size_t i = 0; i < len; ++i) gp[i] += self.grad[offsets[p] + i];
      }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols of zero tensors");
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> widths, offsets;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) {
      throw DimensionError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    offsets.push_back(total);
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const double* src = parts[p].data().data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(src + i * widths[p], widths[p], out.data() + i * total + offsets[p]);
  }
  return make_result({m, total}, std::move(out), parts, [m, total, widths, offsets](Node& self) {
    for (std::size_t p = 0; p < widths.size(); ++p)
      if (double* gp = parent_grad(self, p))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[p]; ++j)
            gp[i * widths[p] + j] += self.grad[i * total + offsets[p] + j];
  });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows of zero tensors");
  const std::size_t n = rows[0].cols();
  std::size_t m = 0;
  std::vector<std::size_t> offsets;
  for (const auto& r : rows) {
    if (r.cols() != n) {
      throw DimensionError("stack_rows: width mismatch " + shape_str(rows[0].shape()) + " vs " +
                           shape_str(r.shape()));
    }
    offsets.push_back(m * n);
    m += r.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const auto& r : rows) out.insert(out.end(), r.data().begin(), r.data().end());
  return make_result({m, n}, std::move(out), rows, [offsets](Node& self) {
    for (std::size_t p = 0; p < offsets.size(); ++p)
      if (double* gp = parent_grad(self, p)) {
        const std::size_t len = self.parents[p]->value.size();
        for (std::size_t i = 0; i < len; ++i) gp[i] += self.grad[offsets[p] + i];
      }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t m = a.rows(), n = a.cols();
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of " + shape_str(a.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  const double* x = a.data().data();
  for (std::size_t i = 0; i < m; ++i) std::copy_n(x + i * n + begin, w, out.data() + i * w);
  return make_result(result_shape(a, m, w), std::move(out), {a}, [m, n, w, begin](Node& self) {
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) ga[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor row(const Tensor& a, std::size_t index) {
  const std::size_t m = a.rows(), n = a.cols();
  if (index >= m) {
    throw DimensionError("row " + std::to_string(index) + " out of " + shape_str(a.shape()));
  }
  std::vector<double> out(a.data().begin() + index * n, a.data().begin() + (index + 1) * n);
  return make_result({n}, std::move(out), {a}, [index, n](Node& self) {
    if (double* ga = parent_grad(self, 0))
      for (std::size_t j = 0; j < n; ++j) ga[index * n + j] += self.grad[j];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> indices) {
  const std::size_t v = table.rows(), n = table.cols();
  if (indices.empty()) throw DimensionError("gather_rows with no indices");
  std::vector<double> out(indices.size() * n);
  const double* x = table.data().data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto idx = indices[i];
    if (idx < 0 || static_cast<std::size_t>(idx) >= v) {
      throw DimensionError("gather_rows: index " + std::to_string(idx) + " out of " +
                           shape_str(table.shape()));
    }
    std::copy_n(x + static_cast<std::size_t>(idx) * n, n, out.data() + i * n);
  }
  std::vector<std::int32_t> idx(indices.begin(), indices.end());
  return make_result({indices.size(), n}, std::move(out), {table}, [idx, n](Node& self) {
    if (double* gt = parent_grad(self, 0))
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < n; ++j)
          gt[static_cast<std::size_t>(idx[i]) * n + j] += self.grad[i * n + j];
  });
}

Tensor repeat_rows(const Tensor& v, std::size_t n) {
  const std::size_t d = v.size();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) std::copy(v.data().begin(), v.data().end(), out.begin() + i * d);
  return make_result({n, d}, std::move(out), {v}, [n, d](Node& self) {
    if (double* gv = parent_grad(self, 0))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) gv[j] += self.grad[i * d + j];
  });
}

Tensor spmm(const SparseMatrix& a, const Tensor& dense) {
  if (dense.rows() != a.cols) {
    throw DimensionError("spmm: sparse [" + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + "] x " + shape_str(dense.shape()));
  }
  const std::size_t n = dense.cols();
  std::vector<double> out(a.rows * n, 0.0);
  const double* x = dense.data().data();
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      const double w = a.values[p];
      const double* xr = x + a.col_idx[p] * n;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += w * xr[j];
    }
  return make_result({a.rows, n}, std::move(out), {dense}, [a, n](Node& self) {
    double* gd = parent_grad(self, 0);
    if (!gd) return;
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
        const double w = a.values[p];
        double* gr = gd + a.col_idx[p] * n;
        for (std::size_t j = 0; j < n; ++j) gr[j] += w * self.grad[i * n + j];
      }
  });
}

Tensor dropout(const Tensor& a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw std::invalid_argument("dropout probability must be < 1");
  const double keep = 1.0 / (1.0 - p);
  std::vector<double> mask(a.size());
  for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep;
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_result(a.shape(), std::move(out), {a}, [mask = std::move(mask)](Node& self) {
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < mask.size(); ++i) ga[i] += self.grad[i] * mask[i];
  });
}

}  // namespace licm::num
