#include "licm/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace licm::num {

Tensor& ParamStore::add_xavier(const std::string& name, Shape shape, Rng& rng) {
  const std::size_t fan_in = shape[0];
  const std::size_t fan_out = shape.size() > 1 ? shape[1] : 1;
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> values(numel(shape));
  for (auto& v : values) v = rng.uniform(-bound, bound);
  return add(name, Tensor::from(std::move(shape), std::move(values), true));
}

Tensor& ParamStore::add_zeros(const std::string& name, Shape shape) {
  return add(name, Tensor::zeros(std::move(shape), true));
}

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  auto [it, inserted] = params_.emplace(name, std::move(value));
  if (!inserted) throw std::invalid_argument("duplicate parameter " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

Adam::Adam(AdamConfig config) : config_(config) {
  if (config_.total_steps < 1) throw std::invalid_argument("Adam: total_steps must be >= 1");
  if (config_.warmup_fraction < 0.0 || config_.warmup_fraction > 1.0) {
    throw std::invalid_argument("Adam: warmup_fraction must lie in [0, 1]");
  }
  warmup_ = static_cast<std::int64_t>(
      std::floor(config_.warmup_fraction * static_cast<double>(config_.total_steps)));
}

double Adam::learning_rate(std::int64_t step) const {
  if (step < 0 || step >= config_.total_steps) return 0.0;
  if (step < warmup_) {
    return config_.base_lr * static_cast<double>(step) / static_cast<double>(warmup_);
  }
  return config_.base_lr * static_cast<double>(config_.total_steps - step) /
         static_cast<double>(config_.total_steps - warmup_);
}

void Adam::apply(ParamStore& params) {
  for (const auto& [name, t] : params.all()) {
    for (double g : t.grad()) {
      if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient in parameter " + name);
    }
  }
  const double lr = learning_rate(step_);
  const double t = static_cast<double>(step_ + 1);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (auto& [name, p] : params.all()) {
    if (!p.has_grad()) continue;
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    auto w = p.mutable_data();
    const auto g = p.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
  ++step_;
}

}  // namespace licm::num
