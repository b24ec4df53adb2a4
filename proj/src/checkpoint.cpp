#include "licm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace licm::ckpt {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'L', 'I', 'C', 'M', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

namespace {

json dims_json(const enc::ModelDims& d) {
  return {{"word_dim", d.word_dim},
          {"entity_dim", d.entity_dim},
          {"n_categories", d.n_categories},
          {"n_subcategories", d.n_subcategories}};
}

json vocab_json(const data::Bundle& bundle) {
  return {{"news", bundle.corpus.news_ids.size()},
          {"words", bundle.corpus.words.size()},
          {"entities", bundle.corpus.entities.size()}};
}

}  // namespace

json model_meta(const enc::LicmModel& model, const data::Bundle& bundle) {
  const auto& c = model.config();
  return {{"model",
           {{"d", c.d},
            {"heads", c.heads},
            {"cat_dim", c.cat_dim},
            {"att_dim", c.att_dim},
            {"ggnn_layers", c.ggnn_layers},
            {"dropout", c.dropout},
            {"use_chain", c.use_chain}}},
          {"dims", dims_json(model.dims())},
          {"vocab", vocab_json(bundle)}};
}

Checkpoint capture(const enc::LicmModel& model, std::uint64_t config_hash, json meta) {
  Checkpoint c;
  c.config_hash = config_hash;
  c.meta = std::move(meta);
  for (const auto& [name, t] : model.params().all()) {
    c.groups[name] = {t.shape(), {t.data().begin(), t.data().end()}};
  }
  return c;
}

std::string serialize(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, ckpt.config_hash);
  const std::string meta = ckpt.meta.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.groups.size()));
  for (const auto& [name, g] : ckpt.groups) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(g.shape.size()));
    for (auto dim : g.shape) put<std::uint64_t>(out, dim);
    for (double v : g.values) put<double>(out, v);
  }
  return out;
}

Checkpoint deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.config_hash = r.get<std::uint64_t>();
  const auto meta_len = r.get<std::uint32_t>();
  try {
    c.meta = json::parse(r.take(meta_len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata is not JSON: ") + e.what());
  }
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::string name(r.take(r.get<std::uint32_t>()));
    ParamGroup g;
    const auto ndim = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < ndim; ++k) g.shape.push_back(r.get<std::uint64_t>());
    const std::size_t count = num::numel(g.shape);
    g.values.resize(count);
    for (auto& v : g.values) v = r.get<double>();
    if (!c.groups.emplace(name, std::move(g)).second) {
      throw CheckpointError("duplicate parameter group '" + name + "'");
    }
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint");
  return c;
}

void save(const Checkpoint& ckpt, const std::string& path) {
  const std::string bytes = serialize(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot move checkpoint to " + path);
}

Checkpoint load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

void restore(const Checkpoint& ckpt, enc::LicmModel& model) {
  auto& params = model.params().all();
  if (params.size() != ckpt.groups.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(ckpt.groups.size()) +
                          " parameter groups, model has " + std::to_string(params.size()));
  }
  for (const auto& [name, t] : params) {
    auto it = ckpt.groups.find(name);
    if (it == ckpt.groups.end()) throw CheckpointError("checkpoint lacks parameter group '" + name + "'");
    if (it->second.shape != t.shape()) {
      throw CheckpointError("parameter group '" + name + "' has shape " +
                            num::shape_str(it->second.shape) + ", model expects " +
                            num::shape_str(t.shape()));
    }
  }
  for (auto& [name, t] : params) {
    const auto& src = ckpt.groups.at(name).values;
    std::copy(src.begin(), src.end(), t.mutable_data().begin());
  }
}

enc::LicmModel instantiate(const Checkpoint& ckpt, const data::Bundle& bundle) {
  enc::ModelConfig mc;
  enc::ModelDims md;
  try {
    const auto& m = ckpt.meta.at("model");
    mc.d = m.at("d");
    mc.heads = m.at("heads");
    mc.cat_dim = m.at("cat_dim");
    mc.att_dim = m.at("att_dim");
    mc.ggnn_layers = m.at("ggnn_layers");
    mc.dropout = m.at("dropout");
    mc.use_chain = m.at("use_chain");
    const auto& d = ckpt.meta.at("dims");
    md.word_dim = d.at("word_dim");
    md.entity_dim = d.at("entity_dim");
    md.n_categories = d.at("n_categories");
    md.n_subcategories = d.at("n_subcategories");
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata incomplete: ") + e.what());
  }
  const json expected{{"dims", dims_json(enc::ModelDims::from(bundle))}, {"vocab", vocab_json(bundle)}};
  for (const char* key : {"dims", "vocab"}) {
    if (ckpt.meta.value(key, json()) != expected.at(key)) {
      throw CheckpointError(std::string("checkpoint/bundle vocabulary mismatch in '") + key +
                            "': checkpoint " + ckpt.meta.value(key, json()).dump() + ", bundle " +
                            expected.at(key).dump());
    }
  }
  enc::LicmModel model(mc, md, 0);
  restore(ckpt, model);
  return model;
}

}  // namespace licm::ckpt
