#pragma once

// Binary parameter checkpoints (little-endian):
//   "LICMCKPT" | u32 version | u64 config_hash
//   u32 meta_len | meta JSON (model config, dims and vocabulary sizes)
//   u32 groups | per group: u32 name_len | name | u32 ndim | u64 dims[ndim]
//                           | f64 values[prod(dims)]
// Groups are written in lexicographic name order.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "licm/bundle.hpp"
#include "licm/model.hpp"

namespace licm::ckpt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParamGroup {
  num::Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::uint64_t config_hash = 0;
  nlohmann::json meta;
  std::map<std::string, ParamGroup> groups;
};

// Metadata describing the model and the vocabulary it was trained against.
nlohmann::json model_meta(const enc::LicmModel& model, const data::Bundle& bundle);

Checkpoint capture(const enc::LicmModel& model, std::uint64_t config_hash, nlohmann::json meta);

std::string serialize(const Checkpoint& ckpt);
Checkpoint deserialize(std::string_view bytes);
void save(const Checkpoint& ckpt, const std::string& path);
Checkpoint load(const std::string& path);

// Copies every group into the model. Missing, extra or misshapen groups are
// errors; the model is left untouched on failure.
void restore(const Checkpoint& ckpt, enc::LicmModel& model);

// Rebuilds a model from the stored metadata and parameters after checking
// that `bundle` carries the same vocabulary sizes and embedding dims.
enc::LicmModel instantiate(const Checkpoint& ckpt, const data::Bundle& bundle);

}  // namespace licm::ckpt
