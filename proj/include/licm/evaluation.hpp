#pragma once

// Impression-level ranking metrics and the evaluation harness.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "licm/chain.hpp"
#include "licm/config.hpp"
#include "licm/graph.hpp"
#include "licm/model.hpp"

namespace licm::eval {

// Probability that a random positive outranks a random negative, ties
// counting one half. nullopt unless both classes are present.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

// Mean reciprocal rank over the positives. Ranks follow descending score with
// ties broken by ascending candidate index. nullopt without positives.
std::optional<double> mrr(std::span<const double> scores, std::span<const int> labels);

// DCG@k with gain 2^label - 1 and log2(rank + 1) discount over the ideal DCG@k.
// Same ordering and exclusion rule as mrr.
std::optional<double> ndcg_at_k(std::span<const double> scores, std::span<const int> labels,
                                std::size_t k);

struct ScoredImpression {
  std::vector<double> scores;
  std::vector<int> labels;
  bool cold_user = false;
};

struct MetricReport {
  double auc = 0.0;
  double mrr = 0.0;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  std::size_t impressions = 0;
  std::size_t auc_counted = 0;
  std::size_t auc_excluded = 0;   // single-class impressions
  std::size_t rank_counted = 0;
  std::size_t rank_excluded = 0;  // impressions without a positive
  std::size_t cold_users = 0;

  nlohmann::json to_json() const;
};

// Macro average over impressions, accumulated in input order.
MetricReport summarize(std::span<const ScoredImpression> impressions);

// Scores impressions with frozen parameters. Work is striped over `threads`;
// the output order equals the input order. `news` and `chains` are computed
// when not supplied.
std::vector<ScoredImpression> score_impressions(
    const enc::LicmModel& model, const data::Bundle& bundle, const graph::GraphSnapshot& graphs,
    const RunConfig& config, std::span<const data::IndexedImpression* const> impressions,
    std::size_t threads = 1, const std::vector<enc::NewsRepr>* news = nullptr,
    const chain::ChainCache* chains = nullptr);

MetricReport evaluate(const enc::LicmModel& model, const data::Bundle& bundle,
                      const graph::GraphSnapshot& graphs, const RunConfig& config, data::Split split,
                      std::size_t threads = 1);

// Full report: metrics, counts, config hash and graph hash.
nlohmann::json report_json(const MetricReport& report, std::uint64_t config_hash,
                           std::uint64_t graph_hash, data::Split split);

}  // namespace licm::eval
