#pragma once

#include <cstddef>
#include <cstdint>

#include "licm/bundle.hpp"

namespace licm::data {

// Category-clustered synthetic corpus.
//
// The news of each category are arranged on a cycle (a running story line);
// subcategories are contiguous blocks of that cycle. A user prefers one
// category and reads along its cycle: each click is, with probability
// `preference`, the next story on the cycle and otherwise a uniformly random
// article. Positive candidates continue the same walk 1..`horizon` steps past
// the history; negatives are half same-category stories from elsewhere on the
// cycle and half uniform draws.
struct SynthOptions {
  std::uint64_t seed = 7;
  std::size_t n_users = 100;
  std::size_t n_news = 200;
  std::size_t n_categories = 5;
  std::size_t subcategories_per_category = 4;
  double preference = 0.8;
  std::size_t min_history = 5;
  std::size_t max_history = 15;
  std::size_t impressions_per_user = 3;  // the last one goes to the test split
  std::size_t negatives_per_impression = 6;
  std::size_t horizon = 8;
  std::size_t word_dim = 32;
  std::size_t entity_dim = 16;
  double valid_fraction = 0.1;
  Limits limits{};
};

Bundle synth_corpus(const SynthOptions& options);

// Category of a synthetic user, recoverable from the generated user id.
std::size_t synth_user_category(const std::string& user_id);

}  // namespace licm::data
