#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "licm/chain.hpp"
#include "licm/data.hpp"

namespace licm {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Every tunable of the pipeline. Only the fields that fix the shape of the
// bundle and of the parameter tensors (l_his, l_title, l_entity, d, heads,
// cat_dim, att_dim) enter the config hash.
struct RunConfig {
  // data
  std::size_t l_his = 50;
  std::size_t l_title = 30;
  std::size_t l_entity = 5;
  // graph
  std::size_t m_n = 10;
  std::size_t n_hops = 2;
  std::size_t m_e = 10;
  // chains
  std::size_t top_n = 3;
  std::size_t max_hops = 8;
  std::string chain_context = "origin";  // or "rolling"
  bool use_chain = true;                 // false = neighbor-only ablation
  // model
  std::size_t d = 400;
  std::size_t heads = 20;
  std::size_t cat_dim = 100;
  std::size_t att_dim = 200;
  std::size_t ggnn_layers = 2;
  // optimization
  std::size_t k_neg = 4;
  double lr = 2e-4;
  double warmup = 0.1;
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double dropout = 0.2;
  double valid_fraction = 0.1;
  // runtime
  std::uint64_t seed = 42;
  std::size_t threads = 1;

  void validate() const;
  data::Limits limits() const { return {l_title, l_entity, l_his}; }
  chain::ChainConfig chain_config() const;

  nlohmann::json to_json() const;
  // Unknown keys and ill-typed values are rejected. Fields absent from `j`
  // keep their current value.
  void merge_json(const nlohmann::json& j);
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);

  std::uint64_t hash() const;
};

class HashMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws HashMismatch naming the artifact when hashes differ.
void require_same_hash(std::uint64_t expected, std::uint64_t actual, const std::string& artifact);

}  // namespace licm
