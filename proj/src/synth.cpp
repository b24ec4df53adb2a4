#include "licm/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "licm/random.hpp"

namespace licm::data {

namespace {

constexpr std::size_t kCategoryWords = 6;
constexpr std::size_t kSubcategoryWords = 3;
constexpr std::size_t kGenericWords = 40;
constexpr std::size_t kCategoryEntities = 4;
constexpr std::size_t kSubcategoryEntities = 2;

struct Story {
  std::size_t category = 0;
  std::vector<std::int32_t> cycle;  // news indices in reading order
};

void fill_table(EmbeddingTable& t, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(t.dim()));
  for (std::size_t r = 1; r < t.rows(); ++r)
    for (auto& v : t.mutable_row(static_cast<std::int32_t>(r))) v = s * rng.normal();
  t.coverage = 1.0;
}

}  // namespace

std::size_t synth_user_category(const std::string& user_id) {
  const auto pos = user_id.rfind("-c");
  if (pos == std::string::npos) throw std::invalid_argument("not a synthetic user id: " + user_id);
  return std::stoul(user_id.substr(pos + 2));
}

Bundle synth_corpus(const SynthOptions& o) {
  if (o.n_users == 0 || o.n_news == 0 || o.n_categories == 0) {
    throw std::invalid_argument("synth_corpus: counts must be >= 1");
  }
  if (o.preference < 0.0 || o.preference > 1.0) {
    throw std::invalid_argument("synth_corpus: preference must lie in [0,1]");
  }
  Rng rng(o.seed);
  Bundle b;
  auto& corpus = b.corpus;

  for (std::size_t c = 0; c < o.n_categories; ++c) corpus.categories.add(fmt::format("cat{}", c));

  // Assign news to categories round-robin over a random permutation.
  std::vector<std::size_t> perm(o.n_news);
  for (std::size_t i = 0; i < o.n_news; ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<Story> stories(std::min(o.n_categories, o.n_news));
  for (std::size_t c = 0; c < stories.size(); ++c) stories[c].category = c;
  std::vector<std::size_t> news_category(o.n_news), news_position(o.n_news);
  for (std::size_t k = 0; k < o.n_news; ++k) {
    const std::size_t news = perm[k];
    const std::size_t c = k % stories.size();
    news_category[news] = c;
    news_position[news] = stories[c].cycle.size();
    stories[c].cycle.push_back(static_cast<std::int32_t>(news + 1));
  }

  for (std::size_t i = 0; i < o.n_news; ++i) {
    const std::size_t c = news_category[i];
    const std::size_t len = stories[c].cycle.size();
    const std::size_t blocks = std::min(o.subcategories_per_category, len);
    const std::size_t sub = news_position[i] * blocks / len;

    NewsArticle a;
    a.news_id = fmt::format("N{}", i + 1);
    a.category = corpus.categories.find(fmt::format("cat{}", c));
    a.subcategory = corpus.subcategories.add(fmt::format("cat{}-sub{}", c, sub));
    std::vector<std::string> words;
    for (int k = 0; k < 2; ++k) words.push_back(fmt::format("c{}w{}", c, rng.below(kCategoryWords)));
    for (int k = 0; k < 2; ++k)
      words.push_back(fmt::format("c{}s{}w{}", c, sub, rng.below(kSubcategoryWords)));
    for (int k = 0; k < 3; ++k) words.push_back(fmt::format("g{}", rng.below(kGenericWords)));
    rng.shuffle(words);
    if (words.size() > o.limits.l_title) words.resize(o.limits.l_title);
    for (const auto& w : words) a.title_tokens.push_back(corpus.words.add(w));
    if (rng.uniform() < 0.9) {
      std::vector<std::string> ents = {
          fmt::format("Qc{}e{}", c, rng.below(kCategoryEntities)),
          fmt::format("Qc{}s{}e{}", c, sub, rng.below(kSubcategoryEntities))};
      if (ents.size() > o.limits.l_entity) ents.resize(o.limits.l_entity);
      for (const auto& e : ents) a.entities.push_back(corpus.entities.add(e));
    }
    if (corpus.news_ids.add(a.news_id) != static_cast<std::int32_t>(i + 1)) {
      throw std::logic_error("synthetic news index mismatch");
    }
    corpus.articles.push_back(std::move(a));
  }

  b.word_embeddings = EmbeddingTable(corpus.words.size(), o.word_dim);
  b.entity_embeddings = EmbeddingTable(corpus.entities.size(), o.entity_dim);
  fill_table(b.word_embeddings, rng);
  fill_table(b.entity_embeddings, rng);

  auto random_news = [&] { return static_cast<std::int32_t>(rng.below(o.n_news) + 1); };

  for (std::size_t u = 0; u < o.n_users; ++u) {
    const std::size_t c = rng.below(stories.size());
    const auto& cycle = stories[c].cycle;
    const std::size_t len = cycle.size();
    const std::string user_id = fmt::format("U{}-c{}", u, c);

    const std::size_t span = o.max_history >= o.min_history ? o.max_history - o.min_history : 0;
    std::size_t hist_len = o.min_history + rng.below(span + 1);
    hist_len = std::min(hist_len, o.limits.l_his);
    std::size_t pos = rng.below(len);
    std::vector<std::int32_t> history;
    for (std::size_t k = 0; k < hist_len; ++k) {
      if (rng.uniform() < o.preference) {
        history.push_back(cycle[pos]);
        pos = (pos + 1) % len;
      } else {
        history.push_back(random_news());
      }
    }
    const std::size_t end_pos = pos;

    for (std::size_t j = 0; j < o.impressions_per_user; ++j) {
      IndexedImpression imp;
      imp.user_id = user_id;
      imp.history = history;
      imp.split = (j + 1 == o.impressions_per_user && o.impressions_per_user > 1) ? Split::kTest
                                                                                 : Split::kTrain;
      std::int32_t positive;
      if (rng.uniform() < o.preference) {
        const std::size_t offset = rng.below(std::max<std::size_t>(o.horizon, 1));
        positive = cycle[(end_pos + offset) % len];
      } else {
        positive = random_news();
      }
      std::vector<std::int32_t> picked{positive};
      auto usable = [&](std::int32_t n) {
        return std::find(picked.begin(), picked.end(), n) == picked.end() &&
               std::find(history.begin(), history.end(), n) == history.end();
      };
      std::vector<IndexedCandidate> cands{{positive, true}};
      for (std::size_t k = 0; k < o.negatives_per_impression; ++k) {
        const bool hard = k % 2 == 0;
        std::int32_t neg = kPad;
        for (int attempt = 0; attempt < 32 && neg == kPad; ++attempt) {
          std::int32_t n;
          if (hard) {
            const std::size_t p = rng.below(len);
            const std::size_t ahead = (p + len - end_pos) % len;
            if (ahead <= o.horizon) continue;
            n = cycle[p];
          } else {
            n = random_news();
          }
          if (usable(n)) neg = n;
        }
        if (neg == kPad) continue;
        picked.push_back(neg);
        cands.push_back({neg, false});
      }
      rng.shuffle(cands);
      imp.candidates = std::move(cands);
      b.impressions.push_back(std::move(imp));
    }
  }
  assign_validation(b.impressions, o.valid_fraction, o.seed);
  validate_bundle(b);
  return b;
}

}  // namespace licm::data
