#include "licm/bundle.hpp"

#include <fmt/format.h>

#include <fstream>
#include <json.hpp>

namespace licm::data {

using nlohmann::json;

namespace {

constexpr const char* kVocabNames[] = {"news", "words", "categories", "subcategories", "entities"};

Vocab& vocab_by_name(NewsCorpus& c, const std::string& name) {
  if (name == "news") return c.news_ids;
  if (name == "words") return c.words;
  if (name == "categories") return c.categories;
  if (name == "subcategories") return c.subcategories;
  if (name == "entities") return c.entities;
  throw BundleFormatError("unknown vocabulary '" + name + "'");
}

const Vocab& vocab_by_name(const NewsCorpus& c, const std::string& name) {
  return vocab_by_name(const_cast<NewsCorpus&>(c), name);
}

void write_table(std::ostream& out, const std::string& name, const EmbeddingTable& t) {
  out << json{{"kind", "table"}, {"name", name}, {"rows", t.rows()}, {"dim", t.dim()},
              {"coverage", t.coverage}}
             .dump()
      << '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto row = t.row(static_cast<std::int32_t>(r));
    bool nonzero = false;
    for (double v : row) nonzero = nonzero || v != 0.0;
    if (!nonzero) continue;
    out << json{{"kind", "row"},
                {"table", name},
                {"index", r},
                {"values", std::vector<double>(row.begin(), row.end())}}
               .dump()
        << '\n';
  }
}

}  // namespace

std::vector<const IndexedImpression*> Bundle::split(Split s) const {
  std::vector<const IndexedImpression*> out;
  for (const auto& imp : impressions)
    if (imp.split == s) out.push_back(&imp);
  return out;
}

void save_bundle(const Bundle& bundle, std::ostream& out) {
  out << json{{"format", "licm-bundle"},
              {"version", kBundleVersion},
              {"config_hash", fmt::format("{:016x}", bundle.config_hash)}}
             .dump()
      << '\n';
  for (const char* name : kVocabNames) {
    out << json{{"kind", "vocab"}, {"name", name},
                {"tokens", vocab_by_name(bundle.corpus, name).tokens()}}
               .dump()
        << '\n';
  }
  const auto& arts = bundle.corpus.articles;
  for (std::size_t i = 1; i < arts.size(); ++i) {
    const auto& a = arts[i];
    out << json{{"kind", "news"},          {"index", i},
                {"category", a.category},  {"subcategory", a.subcategory},
                {"title", a.title_tokens}, {"entities", a.entities},
                {"empty_title", a.empty_title}}
               .dump()
        << '\n';
  }
  write_table(out, "words", bundle.word_embeddings);
  write_table(out, "entities", bundle.entity_embeddings);
  for (const auto& imp : bundle.impressions) {
    json cands = json::array();
    for (const auto& c : imp.candidates) cands.push_back({c.news, c.clicked ? 1 : 0});
    out << json{{"kind", "impression"},
                {"user", imp.user_id},
                {"split", split_name(imp.split)},
                {"history", imp.history},
                {"candidates", cands}}
               .dump()
        << '\n';
  }
}

void save_bundle(const Bundle& bundle, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save_bundle(bundle, out);
  if (!out) throw std::runtime_error("write failed for " + path);
}

Bundle load_bundle(std::istream& in) {
  Bundle b;
  std::string line;
  if (!std::getline(in, line)) throw BundleFormatError("empty bundle");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw BundleFormatError(std::string("bad bundle header: ") + e.what());
  }
  if (header.value("format", "") != "licm-bundle") throw BundleFormatError("not a licm bundle");
  if (header.value("version", -1) != kBundleVersion) {
    throw BundleFormatError("unsupported bundle version " + header["version"].dump());
  }
  b.config_hash = std::stoull(header.at("config_hash").get<std::string>(), nullptr, 16);

  std::size_t line_no = 1;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto rec = json::parse(line);
      const auto kind = rec.at("kind").get<std::string>();
      if (kind == "vocab") {
        vocab_by_name(b.corpus, rec.at("name").get<std::string>()) =
            Vocab::from_tokens(rec.at("tokens").get<std::vector<std::string>>());
      } else if (kind == "news") {
        const auto idx = rec.at("index").get<std::size_t>();
        if (idx != b.corpus.articles.size()) throw BundleFormatError("news records out of order");
        NewsArticle a;
        a.news_id = b.corpus.news_ids.token(static_cast<std::int32_t>(idx));
        a.category = rec.at("category").get<std::int32_t>();
        a.subcategory = rec.at("subcategory").get<std::int32_t>();
        a.title_tokens = rec.at("title").get<std::vector<std::int32_t>>();
        a.entities = rec.at("entities").get<std::vector<std::int32_t>>();
        a.empty_title = rec.at("empty_title").get<bool>();
        b.corpus.articles.push_back(std::move(a));
      } else if (kind == "table") {
        EmbeddingTable t(rec.at("rows").get<std::size_t>(), rec.at("dim").get<std::size_t>());
        t.coverage = rec.at("coverage").get<double>();
        (rec.at("name") == "words" ? b.word_embeddings : b.entity_embeddings) = std::move(t);
      } else if (kind == "row") {
        auto& t = rec.at("table") == "words" ? b.word_embeddings : b.entity_embeddings;
        const auto values = rec.at("values").get<std::vector<double>>();
        auto row = t.mutable_row(rec.at("index").get<std::int32_t>());
        if (values.size() != row.size()) throw BundleFormatError("embedding row width mismatch");
        std::copy(values.begin(), values.end(), row.begin());
      } else if (kind == "impression") {
        IndexedImpression imp;
        imp.user_id = rec.at("user").get<std::string>();
        imp.split = parse_split(rec.at("split").get<std::string>());
        imp.history = rec.at("history").get<std::vector<std::int32_t>>();
        for (const auto& c : rec.at("candidates")) {
          imp.candidates.push_back({c.at(0).get<std::int32_t>(), c.at(1).get<int>() != 0});
        }
        b.impressions.push_back(std::move(imp));
      } else {
        throw BundleFormatError("unknown record kind '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw BundleFormatError("bundle line " + std::to_string(line_no) + ": " + e.what());
  } catch (const std::out_of_range& e) {
    throw BundleFormatError("bundle line " + std::to_string(line_no) + ": " + e.what());
  }
  validate_bundle(b);
  return b;
}

Bundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_bundle(in);
}

void validate_bundle(const Bundle& b) {
  const auto& c = b.corpus;
  auto check = [](std::int32_t idx, std::size_t bound, const char* what) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= bound) {
      throw BundleFormatError(fmt::format("{} index {} out of range [0,{})", what, idx, bound));
    }
  };
  if (c.articles.size() != c.news_ids.size()) {
    throw BundleFormatError("article count does not match news vocabulary");
  }
  for (const auto& a : c.articles) {
    check(a.category, c.categories.size(), "category");
    check(a.subcategory, c.subcategories.size(), "subcategory");
    for (auto w : a.title_tokens) check(w, c.words.size(), "word");
    for (auto e : a.entities) check(e, c.entities.size(), "entity");
  }
  if (b.word_embeddings.rows() != c.words.size()) {
    throw BundleFormatError("word table rows do not match word vocabulary");
  }
  if (b.entity_embeddings.rows() != c.entities.size()) {
    throw BundleFormatError("entity table rows do not match entity vocabulary");
  }
  for (const auto& imp : b.impressions) {
    for (auto h : imp.history) check(h, c.articles.size(), "history news");
    for (const auto& cand : imp.candidates) check(cand.news, c.articles.size(), "candidate news");
  }
}

}  // namespace licm::data
