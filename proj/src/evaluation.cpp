#include "licm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "licm/hash.hpp"
#include "licm/scoring.hpp"

namespace licm::eval {

namespace {

void check_lengths(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("metric: " + std::to_string(scores.size()) + " scores vs " +
                                std::to_string(labels.size()) + " labels");
  }
}

// Candidate indices by descending score, ties by ascending index.
std::vector<std::size_t> ranking(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

bool has_positive(std::span<const int> labels) {
  return std::any_of(labels.begin(), labels.end(), [](int l) { return l > 0; });
}

}  // namespace

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores, labels);
  // Mann-Whitney U with midranks for tied groups.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] > 0) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::optional<double> mrr(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores, labels);
  if (!has_positive(labels)) return std::nullopt;
  const auto order = ranking(scores);
  double total = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (labels[order[r]] > 0) {
      total += 1.0 / static_cast<double>(r + 1);
      ++n_pos;
    }
  }
  return total / static_cast<double>(n_pos);
}

std::optional<double> ndcg_at_k(std::span<const double> scores, std::span<const int> labels,
                                std::size_t k) {
  check_lengths(scores, labels);
  if (!has_positive(labels)) return std::nullopt;
  const auto order = ranking(scores);
  auto gain = [](int l) { return std::exp2(static_cast<double>(l)) - 1.0; };
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
    dcg += gain(labels[order[r]]) / std::log2(static_cast<double>(r + 2));
  }
  std::vector<int> ideal(labels.begin(), labels.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, ideal.size()); ++r) {
    idcg += gain(ideal[r]) / std::log2(static_cast<double>(r + 2));
  }
  return dcg / idcg;
}

nlohmann::json MetricReport::to_json() const {
  return {{"auc", auc},
          {"mrr", mrr},
          {"ndcg@5", ndcg5},
          {"ndcg@10", ndcg10},
          {"impressions", impressions},
          {"auc_counted", auc_counted},
          {"auc_excluded", auc_excluded},
          {"rank_counted", rank_counted},
          {"rank_excluded", rank_excluded},
          {"cold_users", cold_users}};
}

MetricReport summarize(std::span<const ScoredImpression> impressions) {
  MetricReport r;
  r.impressions = impressions.size();
  for (const auto& imp : impressions) {
    if (imp.cold_user) ++r.cold_users;
    if (auto a = auc(imp.scores, imp.labels)) {
      r.auc += *a;
      ++r.auc_counted;
    } else {
      ++r.auc_excluded;
    }
    if (auto m = mrr(imp.scores, imp.labels)) {
      r.mrr += *m;
      r.ndcg5 += *ndcg_at_k(imp.scores, imp.labels, 5);
      r.ndcg10 += *ndcg_at_k(imp.scores, imp.labels, 10);
      ++r.rank_counted;
    } else {
      ++r.rank_excluded;
    }
  }
  if (r.auc_counted) r.auc /= static_cast<double>(r.auc_counted);
  if (r.rank_counted) {
    const double n = static_cast<double>(r.rank_counted);
    r.mrr /= n;
    r.ndcg5 /= n;
    r.ndcg10 /= n;
  }
  return r;
}

std::vector<ScoredImpression> score_impressions(
    const enc::LicmModel& model, const data::Bundle& bundle, const graph::GraphSnapshot& graphs,
    const RunConfig& config, std::span<const data::IndexedImpression* const> impressions,
    std::size_t threads, const std::vector<enc::NewsRepr>* news, const chain::ChainCache* chains) {
  threads = std::max<std::size_t>(1, threads);
  std::vector<enc::NewsRepr> own_news;
  if (news == nullptr) {
    own_news = encode_all_news(model, bundle, threads);
    news = &own_news;
  }
  chain::ChainCache own_chains;
  if (chains == nullptr && model.config().use_chain) {
    const auto origins = history_origins(bundle);
    own_chains.rebuild(graphs.news, origins, chain_vectors(*news, model.config().d),
                       config.chain_config(), threads);
    chains = &own_chains;
  } else if (chains == nullptr) {
    chains = &own_chains;
  }

  std::vector<ScoredImpression> out(impressions.size());
  threads = std::min(threads, std::max<std::size_t>(1, impressions.size()));
  auto work = [&](std::size_t t) {
    num::NoGradGuard no_grad;
    enc::ForwardContext ctx;
    enc::NewsReprCache cache(model, bundle, ctx, news);
    ImpressionScorer scorer(model, bundle, graphs, config, *chains, cache, ctx);
    for (std::size_t i = t; i < impressions.size(); i += threads) {
      const auto& imp = *impressions[i];
      std::vector<NodeId> cands;
      auto& res = out[i];
      for (const auto& c : imp.candidates) {
        cands.push_back(c.news);
        res.labels.push_back(c.clicked ? 1 : 0);
      }
      const auto user = scorer.user(imp.history);
      res.cold_user = user.cold;
      if (cands.empty()) continue;
      const auto s = scorer.scores(user, cands);
      res.scores.assign(s.data().begin(), s.data().end());
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  return out;
}

MetricReport evaluate(const enc::LicmModel& model, const data::Bundle& bundle,
                      const graph::GraphSnapshot& graphs, const RunConfig& config, data::Split split,
                      std::size_t threads) {
  const auto imps = bundle.split(split);
  const auto scored = score_impressions(model, bundle, graphs, config, imps, threads);
  return summarize(scored);
}

nlohmann::json report_json(const MetricReport& report, std::uint64_t config_hash,
                           std::uint64_t graph_hash, data::Split split) {
  auto j = report.to_json();
  j["split"] = data::split_name(split);
  j["config_hash"] = hex64(config_hash);
  j["graph_hash"] = hex64(graph_hash);
  return j;
}

}  // namespace licm::eval
