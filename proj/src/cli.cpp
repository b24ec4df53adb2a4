#include "licm/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "licm/bundle.hpp"
#include "licm/checkpoint.hpp"
#include "licm/config.hpp"
#include "licm/evaluation.hpp"
#include "licm/graph.hpp"
#include "licm/hash.hpp"
#include "licm/scoring.hpp"
#include "licm/synth.hpp"
#include "licm/training.hpp"

namespace licm::cli {

using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "JSON config file");
  sub->add_option("--set", f.overrides, "Override a config key (key=value, repeatable)");
  sub->add_option("--seed", f.seed, "Random seed");
  sub->add_option("--threads", f.threads, "Worker threads");
}

// Default < config file < LICM_SEED < command-line flags.
RunConfig resolve_config(const CommonFlags& f) {
  RunConfig c;
  std::string seed_source = "default";
  if (!f.config_path.empty()) {
    c = RunConfig::load(f.config_path);
    seed_source = "config file";
  }
  if (const char* env = std::getenv("LICM_SEED")) {
    try {
      std::size_t used = 0;
      c.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("LICM_SEED is not an unsigned integer: ") + env);
    }
    seed_source = "LICM_SEED";
  }
  json patch = json::object();
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    patch[key] = value;
  }
  if (patch.contains("seed")) seed_source = "--set";
  c.merge_json(patch);
  if (f.seed) {
    c.seed = *f.seed;
    seed_source = "--seed";
  }
  if (f.threads) c.threads = *f.threads;
  c.validate();
  spdlog::info("config hash {} seed {} ({}) threads {}", hex64(c.hash()), c.seed, seed_source,
               c.threads);
  return c;
}

data::Bundle load_checked_bundle(const std::string& path, const RunConfig& config) {
  auto bundle = data::load_bundle(path);
  require_same_hash(config.hash(), bundle.config_hash, "bundle " + path);
  return bundle;
}

graph::GraphSnapshot load_checked_graph(const std::string& path, const RunConfig& config) {
  auto snap = graph::load_snapshot(path);
  require_same_hash(config.hash(), snap.config_hash, "graph snapshot " + path);
  return snap;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const HashMismatch*>(&e)) return "hash_mismatch";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const data::BundleFormatError*>(&e)) return "bundle_format";
  if (dynamic_cast<const graph::SnapshotFormatError*>(&e)) return "graph_format";
  if (dynamic_cast<const ckpt::CheckpointError*>(&e)) return "checkpoint";
  if (dynamic_cast<const train::DivergenceError*>(&e)) return "divergence";
  return "runtime";
}

void setup_logging(bool quiet) {
  auto logger = spdlog::get("licm");
  if (!logger) logger = spdlog::stderr_color_mt("licm");
  spdlog::set_default_logger(logger);
  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"licm: long-chain interest news recommender"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  // ingest
  CommonFlags ingest_f;
  std::string news_path, behaviors_path, test_behaviors_path, word_path, entity_path, ingest_out;
  std::size_t word_dim = 300, entity_dim = 100;
  auto* ingest = app.add_subcommand("ingest", "Parse news/behaviors TSV and embeddings into a bundle");
  add_common(ingest, ingest_f);
  ingest->add_option("--news", news_path, "news.tsv")->required();
  ingest->add_option("--behaviors", behaviors_path, "behaviors.tsv for training")->required();
  ingest->add_option("--test-behaviors", test_behaviors_path, "behaviors.tsv for the test split");
  ingest->add_option("--word-emb", word_path, "Word vectors (token v1 .. vd)");
  ingest->add_option("--word-dim", word_dim, "Word vector dimension");
  ingest->add_option("--entity-emb", entity_path, "Entity vectors (id v1 .. vd)");
  ingest->add_option("--entity-dim", entity_dim, "Entity vector dimension");
  ingest->add_option("--out", ingest_out, "Bundle path")->required();

  // synth
  CommonFlags synth_f;
  data::SynthOptions so;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a category-clustered synthetic bundle");
  add_common(synth, synth_f);
  synth->add_option("--users", so.n_users, "Number of users");
  synth->add_option("--news", so.n_news, "Number of articles");
  synth->add_option("--categories", so.n_categories, "Number of categories");
  synth->add_option("--subcategories", so.subcategories_per_category, "Subcategories per category");
  synth->add_option("--preference", so.preference, "Probability of following the preferred story line");
  synth->add_option("--impressions", so.impressions_per_user, "Impressions per user");
  synth->add_option("--negatives", so.negatives_per_impression, "Negatives per impression");
  synth->add_option("--horizon", so.horizon, "Steps ahead a positive may lie");
  synth->add_option("--word-dim", so.word_dim, "Word vector dimension");
  synth->add_option("--entity-dim", so.entity_dim, "Entity vector dimension");
  synth->add_option("--out", synth_out, "Bundle path")->required();

  // build-graph
  CommonFlags graph_f;
  std::string graph_in, graph_out;
  auto* build = app.add_subcommand("build-graph", "Build the click and entity graphs from the training split");
  add_common(build, graph_f);
  build->add_option("--in", graph_in, "Bundle path")->required();
  build->add_option("--out", graph_out, "Snapshot path")->required();

  // select-chains
  CommonFlags chains_f;
  std::string chains_graph, chains_bundle, chains_out, chains_ckpt;
  auto* select = app.add_subcommand("select-chains", "Walk long chains for every user's history");
  add_common(select, chains_f);
  select->add_option("--graph", chains_graph, "Snapshot path")->required();
  select->add_option("--bundle", chains_bundle, "Bundle path")->required();
  select->add_option("--out", chains_out, "JSONL output")->required();
  select->add_option("--ckpt", chains_ckpt,
                     "Checkpoint whose news encoder supplies similarity vectors (default: mean title word vectors)");

  // train
  CommonFlags train_f;
  std::string train_bundle, train_graph, train_out, train_history;
  auto* trn = app.add_subcommand("train", "Train a model and keep the best-validation checkpoint");
  add_common(trn, train_f);
  trn->add_option("--bundle", train_bundle, "Bundle path")->required();
  trn->add_option("--graph", train_graph, "Snapshot path")->required();
  trn->add_option("--out", train_out, "Checkpoint path")->required();
  trn->add_option("--history", train_history, "Write per-epoch loss and validation AUC as JSON");

  // evaluate
  CommonFlags eval_f;
  std::string eval_ckpt, eval_bundle, eval_graph, eval_json, eval_split = "test";
  auto* evl = app.add_subcommand("evaluate", "Score a split and report AUC, MRR, nDCG@5/10");
  add_common(evl, eval_f);
  evl->add_option("--ckpt", eval_ckpt, "Checkpoint path")->required();
  evl->add_option("--bundle", eval_bundle, "Bundle path")->required();
  evl->add_option("--graph", eval_graph, "Snapshot path")->required();
  evl->add_option("--json", eval_json, "Report path (stdout when omitted)");
  evl->add_option("--split", eval_split, "train, valid or test");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return 2;
  }

  setup_logging(quiet);
  try {
    if (ingest->parsed()) {
      const auto config = resolve_config(ingest_f);
      data::Bundle b;
      data::parse_news_tsv(news_path, b.corpus, config.limits());
      const auto train_log = data::parse_behaviors_tsv(behaviors_path, config.limits());
      data::IndexingStats stats;
      b.impressions = data::index_impressions(train_log, b.corpus, data::Split::kTrain, &stats);
      data::assign_validation(b.impressions, config.valid_fraction, config.seed);
      if (!test_behaviors_path.empty()) {
        const auto test_log = data::parse_behaviors_tsv(test_behaviors_path, config.limits());
        auto test = data::index_impressions(test_log, b.corpus, data::Split::kTest, &stats);
        b.impressions.insert(b.impressions.end(), test.begin(), test.end());
      }
      b.word_embeddings = word_path.empty() ? data::EmbeddingTable(b.corpus.words.size(), word_dim)
                                            : data::load_embeddings(word_path, b.corpus.words, word_dim);
      b.entity_embeddings = entity_path.empty()
                                ? data::EmbeddingTable(b.corpus.entities.size(), entity_dim)
                                : data::load_embeddings(entity_path, b.corpus.entities, entity_dim);
      b.config_hash = config.hash();
      data::save_bundle(b, ingest_out);
      out << json{{"bundle", ingest_out},
                  {"news", b.corpus.num_news() - 1},
                  {"impressions", b.impressions.size()},
                  {"skipped_news_lines", b.corpus.skipped_lines},
                  {"rejected_behavior_lines", train_log.rejected_lines},
                  {"dropped_history_ids", stats.dropped_history_ids},
                  {"dropped_impressions", stats.dropped_impressions},
                  {"word_coverage", b.word_embeddings.coverage},
                  {"entity_coverage", b.entity_embeddings.coverage},
                  {"config_hash", hex64(b.config_hash)}}
                 .dump()
          << "\n";
    } else if (synth->parsed()) {
      const auto config = resolve_config(synth_f);
      so.seed = config.seed;
      so.valid_fraction = config.valid_fraction;
      so.limits = config.limits();
      auto b = data::synth_corpus(so);
      b.config_hash = config.hash();
      data::save_bundle(b, synth_out);
      std::ifstream in(synth_out, std::ios::binary);
      const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      out << json{{"bundle", synth_out},
                  {"news", b.corpus.num_news() - 1},
                  {"impressions", b.impressions.size()},
                  {"bundle_hash", hex64(fnv1a64(bytes))},
                  {"config_hash", hex64(b.config_hash)}}
                 .dump()
          << "\n";
    } else if (build->parsed()) {
      const auto config = resolve_config(graph_f);
      const auto b = load_checked_bundle(graph_in, config);
      graph::GraphSnapshot snap{graph::build_news_graph(b), graph::build_entity_graph(b.corpus),
                                config.hash()};
      graph::save_snapshot(snap, graph_out);
      out << json{{"snapshot", graph_out},
                  {"news_nodes", snap.news.num_nodes()},
                  {"news_edges", snap.news.num_edges()},
                  {"entity_nodes", snap.entities.num_nodes()},
                  {"entity_edges", snap.entities.num_edges()},
                  {"graph_hash", hex64(graph::snapshot_hash(snap))},
                  {"config_hash", hex64(snap.config_hash)}}
                 .dump()
          << "\n";
    } else if (select->parsed()) {
      const auto config = resolve_config(chains_f);
      const auto b = load_checked_bundle(chains_bundle, config);
      const auto snap = load_checked_graph(chains_graph, config);
      chain::NewsVectors vectors;
      if (chains_ckpt.empty()) {
        vectors = title_vectors(b);
      } else {
        const auto ck = ckpt::load(chains_ckpt);
        require_same_hash(config.hash(), ck.config_hash, "checkpoint " + chains_ckpt);
        const auto model = ckpt::instantiate(ck, b);
        vectors = chain_vectors(encode_all_news(model, b, config.threads), model.config().d);
      }
      std::vector<const data::IndexedImpression*> all;
      for (const auto& imp : b.impressions) all.push_back(&imp);
      const auto histories = graph::user_histories(all);
      std::ofstream jl(chains_out);
      if (!jl) throw std::runtime_error("cannot write " + chains_out);
      std::size_t records = 0;
      const auto cc = config.chain_config();
      auto news_id = [&](NodeId n) { return b.corpus.news_ids.token(n); };
      for (const auto& [user, history] : histories) {
        for (std::size_t t = 0; t < history.size(); ++t) {
          const auto ch = chain::walk_chain(snap.news, history[t], vectors, cc);
          json ids = json::array();
          for (auto n : ch.nodes) ids.push_back(news_id(n));
          jl << json{{"user", user},
                     {"position", t},
                     {"origin", news_id(history[t])},
                     {"chain", ids},
                     {"weights", ch.weights},
                     {"similarities", ch.similarities}}
                    .dump()
             << "\n";
          ++records;
        }
      }
      out << json{{"chains", chains_out}, {"records", records}, {"users", histories.size()}}.dump()
          << "\n";
    } else if (trn->parsed()) {
      const auto config = resolve_config(train_f);
      const auto b = load_checked_bundle(train_bundle, config);
      const auto snap = load_checked_graph(train_graph, config);
      enc::LicmModel model(enc::ModelConfig::from(config), enc::ModelDims::from(b), config.seed);
      train::TrainOptions opts;
      opts.checkpoint_path = train_out;
      opts.threads = config.threads;
      const auto result = train::train(model, b, snap, config, opts);
      json epochs = json::array();
      for (const auto& e : result.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"steps", e.steps},
                          {"loss", e.mean_loss},
                          {"val_auc", std::isnan(e.val_auc) ? json(nullptr) : json(e.val_auc)}});
      }
      const json summary{{"checkpoint", train_out},
                         {"samples", result.samples},
                         {"skipped_impressions", result.skipped_impressions},
                         {"total_steps", result.total_steps},
                         {"best_epoch", result.best_epoch},
                         {"epochs", epochs},
                         {"config_hash", hex64(config.hash())}};
      if (!train_history.empty()) write_json(train_history, summary);
      if (result.diverged) throw train::DivergenceError(result.divergence);
      out << summary.dump() << "\n";
    } else if (evl->parsed()) {
      const auto config = resolve_config(eval_f);
      const auto split = data::parse_split(eval_split);
      const auto b = load_checked_bundle(eval_bundle, config);
      const auto snap = load_checked_graph(eval_graph, config);
      const auto ck = ckpt::load(eval_ckpt);
      require_same_hash(config.hash(), ck.config_hash, "checkpoint " + eval_ckpt);
      auto model = ckpt::instantiate(ck, b);
      const auto report = eval::evaluate(model, b, snap, config, split, config.threads);
      const auto j = eval::report_json(report, config.hash(), graph::snapshot_hash(snap), split);
      if (eval_json.empty()) {
        out << j.dump() << "\n";
      } else {
        write_json(eval_json, j);
        out << json{{"report", eval_json}, {"auc", report.auc}}.dump() << "\n";
      }
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << json{{"error", error_kind(e)}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace licm::cli
