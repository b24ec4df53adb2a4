#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "licm/config.hpp"
#include "licm/graph.hpp"
#include "licm/synth.hpp"
#include "licm/tensor.hpp"

namespace licm::testing {

// ||a - n|| / (||a|| + ||n||) over one tensor, 0 when both vanish.
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nn);
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

struct GradCheck {
  std::vector<double> errors;  // per leaf
  double worst() const { return errors.empty() ? 0.0 : *std::max_element(errors.begin(), errors.end()); }
};

// Compares backward() against central differences for every element of every
// leaf. `f` must rebuild the scalar from the leaves' current values.
inline GradCheck check_gradients(const std::function<num::Tensor()>& f, std::vector<num::Tensor> leaves,
                                 double h = 1e-6) {
  for (auto& l : leaves) l.zero_grad();
  f().backward();
  GradCheck out;
  for (auto& leaf : leaves) {
    std::vector<double> analytic(leaf.size(), 0.0);
    if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());
    std::vector<double> numeric(leaf.size());
    auto data = leaf.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      data[i] = keep + h;
      const double up = f().item();
      data[i] = keep - h;
      const double down = f().item();
      data[i] = keep;
      numeric[i] = (up - down) / (2.0 * h);
    }
    out.errors.push_back(relative_error(analytic, numeric));
  }
  for (auto& l : leaves) l.zero_grad();
  return out;
}

inline num::Tensor random_tensor(num::Shape shape, Rng& rng, double scale = 1.0, bool grad = true) {
  std::vector<double> v(num::numel(shape));
  for (auto& x : v) x = scale * rng.normal();
  return num::Tensor::from(std::move(shape), std::move(v), grad);
}

// Small model dimensions shared by model-level tests.
inline RunConfig tiny_config() {
  RunConfig c;
  c.d = 8;
  c.heads = 2;
  c.cat_dim = 4;
  c.att_dim = 4;
  c.m_n = 3;
  c.n_hops = 2;
  c.m_e = 2;
  c.top_n = 2;
  c.max_hops = 3;
  c.k_neg = 2;
  c.batch_size = 4;
  c.epochs = 1;
  c.lr = 2e-3;
  c.dropout = 0.0;
  return c;
}

inline data::Bundle tiny_bundle(std::uint64_t seed = 3, std::size_t users = 8, std::size_t news = 24) {
  data::SynthOptions o;
  o.seed = seed;
  o.n_users = users;
  o.n_news = news;
  o.n_categories = 2;
  o.subcategories_per_category = 2;
  o.min_history = 3;
  o.max_history = 5;
  o.impressions_per_user = 2;
  o.negatives_per_impression = 3;
  o.horizon = 3;
  o.word_dim = 6;
  o.entity_dim = 5;
  o.valid_fraction = 0.2;
  auto b = data::synth_corpus(o);
  b.config_hash = tiny_config().hash();
  return b;
}

inline graph::GraphSnapshot snapshot_of(const data::Bundle& b, const RunConfig& c) {
  return {graph::build_news_graph(b), graph::build_entity_graph(b.corpus), c.hash()};
}

}  // namespace licm::testing
