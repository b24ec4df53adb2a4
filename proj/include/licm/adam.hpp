#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "licm/random.hpp"
#include "licm/tensor.hpp"

namespace licm::num {

// Named trainable leaves. Iteration order is the lexicographic name order,
// which fixes the order of optimizer updates and checkpoint records.
class ParamStore {
 public:
  // Glorot-uniform init over (rows, cols); a 1-D shape is treated as [n x 1].
  Tensor& add_xavier(const std::string& name, Shape shape, Rng& rng);
  Tensor& add_zeros(const std::string& name, Shape shape);
  Tensor& add(const std::string& name, Tensor value);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const std::map<std::string, Tensor>& all() const { return params_; }
  std::map<std::string, Tensor>& all() { return params_; }
  std::size_t total_size() const;

  void zero_grad();

 private:
  std::map<std::string, Tensor> params_;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double base_lr = 2e-4;
  double warmup_fraction = 0.1;
  std::int64_t total_steps = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with linear warm-up to base_lr over warmup_fraction * total_steps steps,
// then linear decay to 0 at total_steps.
class Adam {
 public:
  explicit Adam(AdamConfig config);

  std::int64_t warmup_steps() const { return warmup_; }
  std::int64_t step() const { return step_; }
  double learning_rate(std::int64_t step) const;
  double current_learning_rate() const { return learning_rate(step_); }

  // Applies one update to every parameter that has a gradient, then advances
  // the step counter. Throws NonFiniteGradient (naming the parameter) before
  // touching anything if a gradient holds NaN or Inf.
  void apply(ParamStore& params);

  const std::vector<double>& first_moment(const std::string& name) const { return m_.at(name); }
  const std::vector<double>& second_moment(const std::string& name) const { return v_.at(name); }

 private:
  AdamConfig config_;
  std::int64_t warmup_ = 0;
  std::int64_t step_ = 0;
  std::map<std::string, std::vector<double>> m_;
  std::map<std::string, std::vector<double>> v_;
};

}  // namespace licm::num
