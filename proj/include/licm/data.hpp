#pragma once

// MIND-format ingestion: news/behaviors TSV parsing, vocabularies and
// pretrained embedding tables.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace licm::data {

// Index 0 of every vocabulary is padding / out-of-vocabulary.
inline constexpr std::int32_t kPad = 0;

class Vocab {
 public:
  Vocab();
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::int32_t add(std::string_view token);
  // kPad when absent.
  std::int32_t find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token) != kPad; }
  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::int32_t index) const { return tokens_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct Limits {
  std::size_t l_title = 30;
  std::size_t l_entity = 5;
  std::size_t l_his = 50;
};

struct NewsArticle {
  std::string news_id;
  std::int32_t category = kPad;
  std::int32_t subcategory = kPad;
  std::vector<std::int32_t> title_tokens;
  std::vector<std::int32_t> entities;
  bool empty_title = false;

  friend bool operator==(const NewsArticle&, const NewsArticle&) = default;
};

// Articles indexed by news index; articles[0] is the padding article.
struct NewsCorpus {
  Vocab news_ids;
  Vocab words;
  Vocab categories;
  Vocab subcategories;
  Vocab entities;
  std::vector<NewsArticle> articles;
  std::size_t skipped_lines = 0;

  NewsCorpus();
  std::size_t num_news() const { return articles.size(); }
  const NewsArticle& article(std::int32_t index) const {
    return articles.at(static_cast<std::size_t>(index));
  }
};

// Lowercase, drop ASCII punctuation, split on whitespace.
std::vector<std::string> tokenize(std::string_view text);

// WikidataId values from a MIND entity column; malformed JSON yields none.
std::vector<std::string> parse_entity_ids(std::string_view json_text);

// Appends articles to `corpus`; duplicate news ids keep the first record.
void parse_news_tsv(std::istream& in, NewsCorpus& corpus, const Limits& limits);
NewsCorpus parse_news_tsv(const std::string& path, const Limits& limits);
void parse_news_tsv(const std::string& path, NewsCorpus& corpus, const Limits& limits);

struct Candidate {
  std::string news_id;
  bool clicked = false;
};

struct Impression {
  std::string impression_id;
  std::string user_id;
  std::vector<std::string> history;  // most recent last
  std::vector<Candidate> candidates;
};

struct BehaviorLog {
  std::vector<Impression> impressions;
  std::size_t rejected_lines = 0;
};

BehaviorLog parse_behaviors_tsv(std::istream& in, const Limits& limits);
BehaviorLog parse_behaviors_tsv(const std::string& path, const Limits& limits);

enum class Split : std::uint8_t { kTrain = 0, kValid = 1, kTest = 2 };
const char* split_name(Split split);
Split parse_split(std::string_view name);

struct IndexedCandidate {
  std::int32_t news = kPad;
  bool clicked = false;
  friend bool operator==(const IndexedCandidate&, const IndexedCandidate&) = default;
};

struct IndexedImpression {
  std::string user_id;
  std::vector<std::int32_t> history;
  std::vector<IndexedCandidate> candidates;
  Split split = Split::kTrain;
  friend bool operator==(const IndexedImpression&, const IndexedImpression&) = default;
};

struct IndexingStats {
  std::size_t dropped_history_ids = 0;
  std::size_t dropped_impressions = 0;
};

// Resolves string ids against the corpus. Unknown history ids are dropped;
// impressions with an unknown candidate are dropped.
std::vector<IndexedImpression> index_impressions(const BehaviorLog& log, const NewsCorpus& corpus,
                                                 Split split, IndexingStats* stats = nullptr);

// Moves roughly `fraction` of training impressions to the validation split,
// chosen by a seeded shuffle.
void assign_validation(std::vector<IndexedImpression>& impressions, double fraction,
                       std::uint64_t seed);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t rows, std::size_t dim);
  EmbeddingTable(std::size_t rows, std::size_t dim, std::vector<double> values);

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return rows_; }
  std::span<const double> row(std::int32_t index) const;
  std::span<double> mutable_row(std::int32_t index);
  const std::vector<double>& values() const { return values_; }

  double coverage = 0.0;  // matched / |vocab| as reported by load_embeddings
  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.dim_ == b.dim_ && a.rows_ == b.rows_ && a.values_ == b.values_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

class EmbeddingFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reads "token v1 ... v_dim" lines. Rows for vocabulary tokens absent from the
// file stay zero. Any line with the wrong number of values is a hard error.
EmbeddingTable load_embeddings(std::istream& in, const Vocab& vocab, std::size_t dim);
EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab, std::size_t dim);

}  // namespace licm::data
