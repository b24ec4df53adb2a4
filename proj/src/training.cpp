#include "licm/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include <spdlog/spdlog.h>

#include "licm/adam.hpp"
#include "licm/checkpoint.hpp"
#include "licm/evaluation.hpp"
#include "licm/scoring.hpp"

namespace licm::train {

SampleSet build_samples(std::span<const data::IndexedImpression* const> impressions,
                        std::size_t k_neg, std::uint64_t seed) {
  if (k_neg < 1) throw std::invalid_argument("k_neg must be >= 1");
  Rng rng(seed, 0x73616d706c6573);
  SampleSet out;
  for (std::size_t i = 0; i < impressions.size(); ++i) {
    const auto& imp = *impressions[i];
    std::vector<NodeId> pos, neg;
    for (const auto& c : imp.candidates) (c.clicked ? pos : neg).push_back(c.news);
    if (pos.empty()) continue;
    if (neg.empty()) {
      ++out.skipped_impressions;
      continue;
    }
    for (NodeId p : pos) {
      TrainingSample s;
      s.impression = i;
      s.positive = p;
      std::vector<NodeId> pool = neg;
      rng.shuffle(pool);
      const std::size_t take = std::min(k_neg, pool.size());
      s.negatives.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
      while (s.negatives.size() < k_neg) s.negatives.push_back(neg[rng.below(neg.size())]);
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

num::Tensor nce_loss(const num::Tensor& scores) {
  if (scores.size() < 2) throw std::invalid_argument("nce_loss needs a positive and at least one negative");
  for (double s : scores.data()) {
    if (std::isnan(s)) throw DivergenceError("NaN score in nce_loss");
  }
  return num::scale(num::element(num::log_softmax(scores), 0), -1.0);
}

num::Tensor nce_loss(const num::Tensor& emb_user, std::span<const num::Tensor> emb_cands) {
  return nce_loss(num::matmul_nt(emb_user, num::stack_rows({emb_cands.begin(), emb_cands.end()})));
}

std::size_t steps_per_epoch(std::size_t samples, std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  return (samples + batch_size - 1) / batch_size;
}

std::vector<std::size_t> epoch_order(std::size_t samples, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(samples);
  for (std::size_t i = 0; i < samples; ++i) order[i] = i;
  Rng rng(seed, 0x65706f6368000000ULL + epoch);
  rng.shuffle(order);
  return order;
}

namespace {

using Snapshot = std::map<std::string, std::vector<double>>;

Snapshot snapshot(const enc::LicmModel& model) {
  Snapshot s;
  for (const auto& [name, t] : model.params().all()) s[name] = {t.data().begin(), t.data().end()};
  return s;
}

void restore(enc::LicmModel& model, const Snapshot& s) {
  for (auto& [name, t] : model.params().all()) {
    const auto& v = s.at(name);
    std::copy(v.begin(), v.end(), t.mutable_data().begin());
  }
}

}  // namespace

TrainResult train(enc::LicmModel& model, const data::Bundle& bundle,
                  const graph::GraphSnapshot& graphs, const RunConfig& config,
                  const TrainOptions& options) {
  config.validate();
  const auto train_imps = bundle.split(data::Split::kTrain);
  const auto valid_imps = bundle.split(data::Split::kValid);
  const SampleSet set = build_samples(train_imps, config.k_neg, config.seed);

  TrainResult result;
  result.samples = set.samples.size();
  result.skipped_impressions = set.skipped_impressions;
  const std::size_t per_epoch = steps_per_epoch(set.samples.size(), config.batch_size);
  result.total_steps = config.epochs * per_epoch;
  if (set.skipped_impressions) {
    spdlog::warn("skipped {} training impressions without negatives", set.skipped_impressions);
  }

  num::AdamConfig ac;
  ac.base_lr = config.lr;
  ac.warmup_fraction = config.warmup;
  ac.total_steps = static_cast<std::int64_t>(std::max<std::size_t>(1, result.total_steps));
  num::Adam adam(ac);

  const auto origins = history_origins(bundle);
  std::vector<std::optional<graph::NeighborSubgraph>> subgraphs(train_imps.size());
  Snapshot best = snapshot(model);
  double best_auc = -std::numeric_limits<double>::infinity();
  bool have_best = false;
  const bool use_chain = model.config().use_chain;

  auto keep_best = [&](std::size_t epoch, double val_auc) {
    best = snapshot(model);
    result.best_epoch = epoch;
    result.best_val_auc = val_auc;
    have_best = true;
    if (!options.checkpoint_path.empty()) {
      ckpt::save(ckpt::capture(model, config.hash(), ckpt::model_meta(model, bundle)),
                 options.checkpoint_path);
    }
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    // Chains follow the current news encoder once per epoch.
    auto news = encode_all_news(model, bundle, options.threads);
    chain::ChainCache chains;
    if (use_chain) {
      chains.rebuild(graphs.news, origins, chain_vectors(news, model.config().d),
                     config.chain_config(), options.threads);
    }

    EpochLog log;
    log.epoch = epoch + 1;
    const auto order = epoch_order(set.samples.size(), config.seed, epoch);
    try {
      for (std::size_t b = 0; b < per_epoch; ++b) {
        const std::size_t begin = b * config.batch_size;
        const std::size_t end = std::min(order.size(), begin + config.batch_size);
        enc::ForwardContext ctx(true, config.seed ^ (0x9e3779b97f4a7c15ULL * (epoch * per_epoch + b + 1)));
        enc::NewsReprCache cache(model, bundle, ctx);
        ImpressionScorer scorer(model, bundle, graphs, config, chains, cache, ctx);
        std::map<std::size_t, enc::UserRepr> users;
        std::vector<num::Tensor> losses;
        for (std::size_t k = begin; k < end; ++k) {
          const auto& s = set.samples[order[k]];
          const auto& imp = *train_imps[s.impression];
          auto it = users.find(s.impression);
          if (it == users.end()) {
            const graph::NeighborSubgraph* sg = nullptr;
            if (!imp.history.empty()) {
              auto& slot = subgraphs[s.impression];
              if (!slot) {
                slot = graph::extract_neighbor_subgraph(graphs.news, imp.history, config.m_n,
                                                        config.n_hops);
              }
              sg = &*slot;
            }
            it = users.emplace(s.impression, scorer.user(imp.history, sg)).first;
          }
          std::vector<NodeId> cands{s.positive};
          cands.insert(cands.end(), s.negatives.begin(), s.negatives.end());
          const auto scores = scorer.scores(it->second, cands);
          try {
            losses.push_back(nce_loss(scores));
          } catch (const DivergenceError&) {
            throw DivergenceError("NaN score at epoch " + std::to_string(epoch + 1) + " batch " +
                                  std::to_string(b) + " sample " + std::to_string(order[k]));
          }
        }
        const num::Tensor loss = num::sum(num::stack_rows(losses));
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw DivergenceError("non-finite loss " + std::to_string(value) + " at epoch " +
                                std::to_string(epoch + 1) + " batch " + std::to_string(b));
        }
        loss.backward();
        adam.apply(model.params());
        model.params().zero_grad();
        log.total_loss += value;
        ++log.steps;
      }
    } catch (const std::runtime_error& e) {
      if (!dynamic_cast<const DivergenceError*>(&e) && !dynamic_cast<const num::NonFiniteGradient*>(&e)) throw;
      result.diverged = true;
      result.divergence = e.what();
      spdlog::error("training diverged: {}", e.what());
      model.params().zero_grad();
      restore(model, best);
      return result;
    }
    log.mean_loss = set.samples.empty() ? 0.0 : log.total_loss / static_cast<double>(set.samples.size());

    if (!valid_imps.empty()) {
      news = encode_all_news(model, bundle, options.threads);
      if (use_chain) {
        chains.rebuild(graphs.news, origins, chain_vectors(news, model.config().d),
                       config.chain_config(), options.threads);
      }
      const auto scored = eval::score_impressions(model, bundle, graphs, config, valid_imps,
                                                  options.threads, &news, &chains);
      log.val_auc = eval::summarize(scored).auc;
    } else {
      log.val_auc = std::numeric_limits<double>::quiet_NaN();
    }
    spdlog::info("epoch {} steps {} loss {:.6f} val_auc {:.4f}", log.epoch, log.steps, log.mean_loss,
                 log.val_auc);
    result.epochs.push_back(log);
    if (options.on_epoch) options.on_epoch(log);

    if (std::isnan(log.val_auc) || log.val_auc > best_auc) {
      if (!std::isnan(log.val_auc)) best_auc = log.val_auc;
      keep_best(log.epoch, log.val_auc);
    }
  }
  if (have_best) restore(model, best);
  return result;
}

}  // namespace licm::train
