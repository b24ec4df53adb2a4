#include "licm/data.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "licm/random.hpp"

namespace licm::data {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

}  // namespace

Vocab::Vocab() { add("<pad>"); }

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.empty()) throw std::invalid_argument("vocabulary needs the padding token");
  Vocab v;
  v.tokens_.clear();
  v.index_.clear();
  for (auto& t : tokens) {
    if (!v.index_.emplace(t, static_cast<std::int32_t>(v.tokens_.size())).second) {
      throw std::invalid_argument("duplicate vocabulary token '" + t + "'");
    }
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

std::int32_t Vocab::add(std::string_view token) {
  std::string key(token);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  const auto idx = static_cast<std::int32_t>(tokens_.size());
  index_.emplace(key, idx);
  tokens_.push_back(std::move(key));
  return idx;
}

std::int32_t Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() || it->second == 0 ? kPad : it->second;
}

NewsCorpus::NewsCorpus() { articles.emplace_back(); }

std::vector<std::string> tokenize(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 128 && std::ispunct(c)) continue;
    cleaned.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : ch);
  }
  std::vector<std::string> tokens;
  for (auto t : split_ws(cleaned)) tokens.emplace_back(t);
  return tokens;
}

std::vector<std::string> parse_entity_ids(std::string_view json_text) {
  std::vector<std::string> ids;
  if (json_text.empty()) return ids;
  const auto doc = nlohmann::json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_array()) return ids;
  for (const auto& e : doc) {
    if (e.is_object() && e.contains("WikidataId") && e["WikidataId"].is_string()) {
      ids.push_back(e["WikidataId"].get<std::string>());
    }
  }
  return ids;
}

void parse_news_tsv(std::istream& in, NewsCorpus& corpus, const Limits& limits) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = strip_cr(line);
    if (text.empty()) continue;
    const auto fields = split_tabs(text);
    if (fields.size() < 4 || fields[0].empty()) {
      spdlog::warn("news.tsv line {}: expected at least 4 tab-separated fields, got {}; skipped",
                   line_no, fields.size());
      ++corpus.skipped_lines;
      continue;
    }
    if (corpus.news_ids.contains(fields[0])) continue;

    NewsArticle a;
    a.news_id = std::string(fields[0]);
    a.category = corpus.categories.add(fields[1]);
    a.subcategory = corpus.subcategories.add(fields[2]);
    auto tokens = tokenize(fields[3]);
    if (tokens.size() > limits.l_title) tokens.resize(limits.l_title);
    for (const auto& t : tokens) a.title_tokens.push_back(corpus.words.add(t));
    a.empty_title = a.title_tokens.empty();
    if (a.empty_title) spdlog::debug("news.tsv line {}: empty title for {}", line_no, a.news_id);
    if (fields.size() > 6) {
      auto ents = parse_entity_ids(fields[6]);
      if (ents.size() > limits.l_entity) ents.resize(limits.l_entity);
      for (const auto& e : ents) a.entities.push_back(corpus.entities.add(e));
    }
    const auto idx = corpus.news_ids.add(a.news_id);
    if (static_cast<std::size_t>(idx) != corpus.articles.size()) {
      throw std::logic_error("news index out of sync with article list");
    }
    corpus.articles.push_back(std::move(a));
  }
}

void parse_news_tsv(const std::string& path, NewsCorpus& corpus, const Limits& limits) {
  auto in = open_or_throw(path);
  parse_news_tsv(in, corpus, limits);
}

NewsCorpus parse_news_tsv(const std::string& path, const Limits& limits) {
  NewsCorpus corpus;
  parse_news_tsv(path, corpus, limits);
  return corpus;
}

BehaviorLog parse_behaviors_tsv(std::istream& in, const Limits& limits) {
  BehaviorLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = strip_cr(line);
    if (text.empty()) continue;
    const auto fields = split_tabs(text);
    if (fields.size() < 5) {
      spdlog::warn("behaviors.tsv line {}: expected 5 fields, got {}; rejected", line_no,
                   fields.size());
      ++log.rejected_lines;
      continue;
    }
    Impression imp;
    imp.impression_id = std::string(fields[0]);
    imp.user_id = std::string(fields[1]);
    for (auto h : split_ws(fields[3])) imp.history.emplace_back(h);
    if (imp.history.size() > limits.l_his) {
      imp.history.erase(imp.history.begin(),
                        imp.history.end() - static_cast<std::ptrdiff_t>(limits.l_his));
    }
    bool ok = true;
    for (auto tok : split_ws(fields[4])) {
      const auto dash = tok.rfind('-');
      if (dash == std::string_view::npos || dash == 0 || dash + 2 != tok.size() ||
          (tok[dash + 1] != '0' && tok[dash + 1] != '1')) {
        spdlog::warn("behaviors.tsv line {}: candidate '{}' lacks a -0/-1 label; rejected",
                     line_no, tok);
        ok = false;
        break;
      }
      imp.candidates.push_back({std::string(tok.substr(0, dash)), tok[dash + 1] == '1'});
    }
    if (ok && imp.candidates.empty()) {
      spdlog::warn("behaviors.tsv line {}: no candidates; rejected", line_no);
      ok = false;
    }
    if (!ok) {
      ++log.rejected_lines;
      continue;
    }
    log.impressions.push_back(std::move(imp));
  }
  return log;
}

BehaviorLog parse_behaviors_tsv(const std::string& path, const Limits& limits) {
  auto in = open_or_throw(path);
  return parse_behaviors_tsv(in, limits);
}

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid") return Split::kValid;
  if (name == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

std::vector<IndexedImpression> index_impressions(const BehaviorLog& log, const NewsCorpus& corpus,
                                                 Split split, IndexingStats* stats) {
  IndexingStats local;
  std::vector<IndexedImpression> out;
  out.reserve(log.impressions.size());
  for (const auto& imp : log.impressions) {
    IndexedImpression x;
    x.user_id = imp.user_id;
    x.split = split;
    for (const auto& h : imp.history) {
      const auto idx = corpus.news_ids.find(h);
      if (idx == kPad) {
        ++local.dropped_history_ids;
      } else {
        x.history.push_back(idx);
      }
    }
    bool ok = true;
    for (const auto& c : imp.candidates) {
      const auto idx = corpus.news_ids.find(c.news_id);
      if (idx == kPad) {
        ok = false;
        break;
      }
      x.candidates.push_back({idx, c.clicked});
    }
    if (!ok) {
      ++local.dropped_impressions;
      continue;
    }
    out.push_back(std::move(x));
  }
  if (local.dropped_history_ids || local.dropped_impressions) {
    spdlog::warn("indexing: dropped {} unknown history ids and {} impressions with unknown "
                 "candidates",
                 local.dropped_history_ids, local.dropped_impressions);
  }
  if (stats) *stats = local;
  return out;
}

void assign_validation(std::vector<IndexedImpression>& impressions, double fraction,
                       std::uint64_t seed) {
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < impressions.size(); ++i)
    if (impressions[i].split == Split::kTrain) train.push_back(i);
  Rng rng(seed, 0x76616c);
  rng.shuffle(train);
  const auto n_valid = static_cast<std::size_t>(fraction * static_cast<double>(train.size()));
  for (std::size_t i = 0; i < n_valid; ++i) impressions[train[i]].split = Split::kValid;
}

EmbeddingTable::EmbeddingTable(std::size_t rows, std::size_t dim)
    : rows_(rows), dim_(dim), values_(rows * dim, 0.0) {}

EmbeddingTable::EmbeddingTable(std::size_t rows, std::size_t dim, std::vector<double> values)
    : rows_(rows), dim_(dim), values_(std::move(values)) {
  if (values_.size() != rows_ * dim_) {
    throw std::invalid_argument("embedding table payload does not match rows x dim");
  }
}

std::span<const double> EmbeddingTable::row(std::int32_t index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= rows_) {
    throw std::out_of_range("embedding row " + std::to_string(index) + " out of " +
                            std::to_string(rows_));
  }
  return {values_.data() + static_cast<std::size_t>(index) * dim_, dim_};
}

std::span<double> EmbeddingTable::mutable_row(std::int32_t index) {
  if (index < 0 || static_cast<std::size_t>(index) >= rows_) {
    throw std::out_of_range("embedding row " + std::to_string(index) + " out of " +
                            std::to_string(rows_));
  }
  return {values_.data() + static_cast<std::size_t>(index) * dim_, dim_};
}

EmbeddingTable load_embeddings(std::istream& in, const Vocab& vocab, std::size_t dim) {
  EmbeddingTable table(vocab.size(), dim);
  std::vector<bool> seen(vocab.size(), false);
  std::size_t matched = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto parts = split_ws(strip_cr(line));
    if (parts.empty()) continue;
    if (parts.size() != dim + 1) {
      throw EmbeddingFormatError("embedding line " + std::to_string(line_no) + " ('" +
                                 std::string(parts[0]) + "') has " +
                                 std::to_string(parts.size() - 1) + " values, expected " +
                                 std::to_string(dim));
    }
    const auto idx = vocab.find(parts[0]);
    if (idx == kPad || seen[static_cast<std::size_t>(idx)]) continue;
    auto row = table.mutable_row(idx);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto tok = parts[j + 1];
      double v = 0.0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        throw EmbeddingFormatError("embedding line " + std::to_string(line_no) +
                                   ": bad number '" + std::string(tok) + "'");
      }
      row[j] = v;
    }
    seen[static_cast<std::size_t>(idx)] = true;
    ++matched;
  }
  const std::size_t real = vocab.size() > 0 ? vocab.size() - 1 : 0;
  table.coverage = real == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(real);
  spdlog::info("embeddings: matched {}/{} vocabulary tokens", matched, real);
  return table;
}

EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab, std::size_t dim) {
  auto in = open_or_throw(path);
  return load_embeddings(in, vocab, dim);
}

}  // namespace licm::data
