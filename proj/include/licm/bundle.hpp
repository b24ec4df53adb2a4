#pragma once

// Processed-data bundle: vocabularies, indexed articles, impressions and the
// embedding tables, serialized as JSON lines.
//
// Line 1 is the header:
//   {"format":"licm-bundle","version":1,"config_hash":"<16 hex digits>"}
// followed by records distinguished by "kind":
//   vocab       {"kind":"vocab","name":<words|categories|subcategories|entities|news>,"tokens":[...]}
//   news        {"kind":"news","index":i,"category":c,"subcategory":s,"title":[...],
//                "entities":[...],"empty_title":b}          (news id = news vocab token i)
//   table       {"kind":"table","name":<words|entities>,"rows":r,"dim":d,"coverage":x}
//   row         {"kind":"row","table":<words|entities>,"index":i,"values":[...]}
//               (rows not listed are zero)
//   impression  {"kind":"impression","user":u,"split":<train|valid|test>,
//                "history":[...],"candidates":[[news,label],...]}

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "licm/data.hpp"

namespace licm::data {

inline constexpr int kBundleVersion = 1;

struct Bundle {
  NewsCorpus corpus;
  std::vector<IndexedImpression> impressions;
  EmbeddingTable word_embeddings;
  EmbeddingTable entity_embeddings;
  std::uint64_t config_hash = 0;

  std::vector<const IndexedImpression*> split(Split s) const;
};

class BundleFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_bundle(const Bundle& bundle, std::ostream& out);
void save_bundle(const Bundle& bundle, const std::string& path);
Bundle load_bundle(std::istream& in);
Bundle load_bundle(const std::string& path);

// Checks every index in the bundle against its vocabulary and table sizes.
void validate_bundle(const Bundle& bundle);

}  // namespace licm::data
