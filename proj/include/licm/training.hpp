#pragma once

// Negative-sampling batch construction, the ranking loss and the training loop.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "licm/config.hpp"
#include "licm/graph.hpp"
#include "licm/model.hpp"

namespace licm::train {

using graph::NodeId;

struct TrainingSample {
  std::size_t impression = 0;  // index into the impression span given to build_samples
  NodeId positive = data::kPad;
  std::vector<NodeId> negatives;
};

struct SampleSet {
  std::vector<TrainingSample> samples;
  std::size_t skipped_impressions = 0;  // impressions with a click but no negatives
};

// One sample per clicked candidate. Negatives are drawn uniformly without
// replacement from the impression's non-clicked candidates, then topped up
// with replacement when fewer than k_neg exist.
SampleSet build_samples(std::span<const data::IndexedImpression* const> impressions,
                        std::size_t k_neg, std::uint64_t seed);

// -log softmax(scores)[0]; scores[0] is the positive.
num::Tensor nce_loss(const num::Tensor& scores);
num::Tensor nce_loss(const num::Tensor& emb_user, std::span<const num::Tensor> emb_cands);

std::size_t steps_per_epoch(std::size_t samples, std::size_t batch_size);

// Visiting order of the samples in one epoch; a pure function of its inputs.
std::vector<std::size_t> epoch_order(std::size_t samples, std::uint64_t seed, std::size_t epoch);

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double total_loss = 0.0;
  double mean_loss = 0.0;  // per sample
  double val_auc = 0.0;    // NaN without validation impressions
};

struct TrainOptions {
  std::string checkpoint_path;  // best-validation checkpoint; empty = keep in memory only
  std::size_t threads = 1;      // chain walking and validation scoring
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::size_t samples = 0;
  std::size_t skipped_impressions = 0;
  std::size_t total_steps = 0;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;
  bool diverged = false;
  std::string divergence;  // diagnostic when diverged
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Trains `model` on the bundle's training split. On return the model holds
// the best-validation parameters (the last epoch's when there is no
// validation split). A NaN loss or gradient stops training early with
// `diverged` set; the best parameters seen so far (initial ones when no epoch
// completed) are restored.
TrainResult train(enc::LicmModel& model, const data::Bundle& bundle,
                  const graph::GraphSnapshot& graphs, const RunConfig& config,
                  const TrainOptions& options = {});

}  // namespace licm::train
