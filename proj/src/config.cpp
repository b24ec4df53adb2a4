#include "licm/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "licm/hash.hpp"

namespace licm {

using nlohmann::json;

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  try {
    out = j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type: " + j.dump());
  }
}

void read_count(const json& j, const char* key, std::size_t& out) {
  if (!j.is_number_unsigned()) {
    throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
  }
  out = j.get<std::size_t>();
}

void read_number(const json& j, const char* key, double& out) {
  if (!j.is_number()) throw ConfigError(std::string("config key '") + key + "' must be a number");
  out = j.get<double>();
}

}  // namespace

void RunConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  need(l_his >= 1, "l_his >= 1");
  need(l_title >= 1, "l_title >= 1");
  need(top_n >= 1, "top_n >= 1");
  need(max_hops >= 1, "max_hops >= 1");
  need(chain_context == "origin" || chain_context == "rolling",
       "chain_context is 'origin' or 'rolling'");
  need(d >= 1 && heads >= 1 && d % heads == 0, "d divisible by heads");
  need(cat_dim >= 1 && att_dim >= 1, "cat_dim, att_dim >= 1");
  need(k_neg >= 1, "k_neg >= 1");
  need(lr > 0.0, "lr > 0");
  need(warmup >= 0.0 && warmup <= 1.0, "warmup in [0,1]");
  need(epochs >= 1, "epochs >= 1");
  need(batch_size >= 1, "batch_size >= 1");
  need(dropout >= 0.0 && dropout < 1.0, "dropout in [0,1)");
  need(valid_fraction >= 0.0 && valid_fraction < 1.0, "valid_fraction in [0,1)");
  need(threads >= 1, "threads >= 1");
}

chain::ChainConfig RunConfig::chain_config() const {
  chain::ChainConfig c;
  c.top_n = top_n;
  c.max_hops = max_hops;
  c.context = chain_context == "rolling" ? chain::SimilarityContext::kRolling
                                         : chain::SimilarityContext::kOrigin;
  return c;
}

json RunConfig::to_json() const {
  return json{{"l_his", l_his},
              {"l_title", l_title},
              {"l_entity", l_entity},
              {"m_n", m_n},
              {"n_hops", n_hops},
              {"m_e", m_e},
              {"top_n", top_n},
              {"max_hops", max_hops},
              {"chain_context", chain_context},
              {"use_chain", use_chain},
              {"d", d},
              {"heads", heads},
              {"cat_dim", cat_dim},
              {"att_dim", att_dim},
              {"ggnn_layers", ggnn_layers},
              {"k_neg", k_neg},
              {"lr", lr},
              {"warmup", warmup},
              {"epochs", epochs},
              {"batch_size", batch_size},
              {"dropout", dropout},
              {"valid_fraction", valid_fraction},
              {"seed", seed},
              {"threads", threads}};
}

void RunConfig::merge_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const std::map<std::string, std::function<void(const json&)>> setters = {
      {"l_his", [&](const json& v) { read_count(v, "l_his", l_his); }},
      {"l_title", [&](const json& v) { read_count(v, "l_title", l_title); }},
      {"l_entity", [&](const json& v) { read_count(v, "l_entity", l_entity); }},
      {"m_n", [&](const json& v) { read_count(v, "m_n", m_n); }},
      {"n_hops", [&](const json& v) { read_count(v, "n_hops", n_hops); }},
      {"m_e", [&](const json& v) { read_count(v, "m_e", m_e); }},
      {"top_n", [&](const json& v) { read_count(v, "top_n", top_n); }},
      {"max_hops", [&](const json& v) { read_count(v, "max_hops", max_hops); }},
      {"chain_context", [&](const json& v) { read_field(v, "chain_context", chain_context); }},
      {"use_chain", [&](const json& v) { read_field(v, "use_chain", use_chain); }},
      {"d", [&](const json& v) { read_count(v, "d", d); }},
      {"heads", [&](const json& v) { read_count(v, "heads", heads); }},
      {"cat_dim", [&](const json& v) { read_count(v, "cat_dim", cat_dim); }},
      {"att_dim", [&](const json& v) { read_count(v, "att_dim", att_dim); }},
      {"ggnn_layers", [&](const json& v) { read_count(v, "ggnn_layers", ggnn_layers); }},
      {"k_neg", [&](const json& v) { read_count(v, "k_neg", k_neg); }},
      {"lr", [&](const json& v) { read_number(v, "lr", lr); }},
      {"warmup", [&](const json& v) { read_number(v, "warmup", warmup); }},
      {"epochs", [&](const json& v) { read_count(v, "epochs", epochs); }},
      {"batch_size", [&](const json& v) { read_count(v, "batch_size", batch_size); }},
      {"dropout", [&](const json& v) { read_number(v, "dropout", dropout); }},
      {"valid_fraction", [&](const json& v) { read_number(v, "valid_fraction", valid_fraction); }},
      {"seed",
       [&](const json& v) {
         if (!v.is_number_unsigned()) throw ConfigError("config key 'seed' must be unsigned");
         seed = v.get<std::uint64_t>();
       }},
      {"threads", [&](const json& v) { read_count(v, "threads", threads); }},
  };
  if (j.contains("use_chain") && !j["use_chain"].is_boolean()) {
    throw ConfigError("config key 'use_chain' must be a boolean");
  }
  if (j.contains("chain_context") && !j["chain_context"].is_string()) {
    throw ConfigError("config key 'chain_context' must be a string");
  }
  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(value);
  }
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  c.merge_json(j);
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

std::uint64_t RunConfig::hash() const {
  const json full = to_json();
  json j;
  for (const char* key : {"l_his", "l_title", "l_entity", "d", "heads", "cat_dim", "att_dim"}) {
    j[key] = full.at(key);
  }
  // nlohmann's object keys are sorted, so dump() is canonical.
  return fnv1a64(j.dump());
}

void require_same_hash(std::uint64_t expected, std::uint64_t actual, const std::string& artifact) {
  if (expected != actual) {
    throw HashMismatch(artifact + " was produced with config hash " + hex64(actual) +
                       ", current config hash is " + hex64(expected));
  }
}

}  // namespace licm
