#pragma once

// Run configuration: flat `key = value` text with [sections], parsed with
// CLI11's INI reader. Every field has a default and `to_json` prints all of
// them, so a manifest shows the full effective configuration.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kamg/data/pipeline.hpp"
#include "kamg/data/synthetic.hpp"
#include "kamg/errors.hpp"
#include "kamg/eval/evaluate.hpp"
#include "kamg/model/config.hpp"
#include "kamg/train/trainer.hpp"

namespace kamg::data {

struct RunPaths {
  std::string corpus;      // corpus records
  std::string labels;      // label catalog records
  std::string taxonomy;    // child<TAB>parent lines
  std::string embeddings;  // word-vector text file
  std::string out = "out";
};

struct RunConfig {
  RunPaths paths;
  model::ModelConfig model;
  bool embed_dim_set = false;  // otherwise taken from the embedding file
  train::TrainConfig train;
  GraphOptions graphs;
  std::vector<std::size_t> ks{10};
  std::size_t few_threshold = 5;
  eval::CandidateMode candidates = eval::CandidateMode::within_bucket;
  SyntheticSpec synth;
  std::uint64_t seed = 0;

  /// Paths of a directory written by `write_synthetic`.
  void use_data_dir(const std::string& dir) {
    paths.corpus = dir + "/" + SyntheticFiles::corpus;
    paths.labels = dir + "/" + SyntheticFiles::labels;
    paths.taxonomy = dir + "/" + SyntheticFiles::taxonomy;
    paths.embeddings = dir + "/" + SyntheticFiles::embeddings;
  }

  void set_seed(std::uint64_t s) {
    seed = s;
    train.seed = s;
    synth.seed = s;
  }
};

namespace detail {

inline std::string join(const std::vector<std::string>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s.push_back(sep);
    s += v[i];
  }
  return s;
}

template <class T>
T parse_as(const std::string& key, const std::string& text) {
  T out{};
  if constexpr (std::is_unsigned_v<T>) {
    if (text.find('-') != std::string::npos) throw InputError("config: " + key + " must be nonnegative");
  }
  std::istringstream in(text);
  if (!(in >> out) || !(in >> std::ws).eof()) throw InputError("config: bad value for " + key + ": '" + text + "'");
  return out;
}

inline std::vector<std::size_t> parse_k_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> ks;
  std::string tok;
  std::istringstream in(text);
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    const auto k = parse_as<std::size_t>(key, tok);
    if (k == 0) throw InputError("config: " + key + " values must be >= 1");
    ks.push_back(k);
  }
  if (ks.empty()) throw InputError("config: " + key + " is empty");
  return ks;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto num = [](auto get) {
      return [get](RunConfig& c, const std::string& v) {
        auto& ref = get(c);
        ref = parse_as<std::remove_reference_t<decltype(ref)>>("value", v);
      };
    };
    t["paths.corpus"] = [](RunConfig& c, const std::string& v) { c.paths.corpus = v; };
    t["paths.labels"] = [](RunConfig& c, const std::string& v) { c.paths.labels = v; };
    t["paths.taxonomy"] = [](RunConfig& c, const std::string& v) { c.paths.taxonomy = v; };
    t["paths.embeddings"] = [](RunConfig& c, const std::string& v) { c.paths.embeddings = v; };
    t["paths.out"] = [](RunConfig& c, const std::string& v) { c.paths.out = v; };
    t["paths.data"] = [](RunConfig& c, const std::string& v) { c.use_data_dir(v); };

    t["model.embed_dim"] = [](RunConfig& c, const std::string& v) {
      c.model.embed_dim = parse_as<std::size_t>("model.embed_dim", v);
      c.embed_dim_set = true;
    };
    t["model.filters"] = num([](RunConfig& c) -> auto& { return c.model.filters; });
    t["model.kernel_width"] = num([](RunConfig& c) -> auto& { return c.model.kernel_width; });
    t["model.gcn_hidden"] = num([](RunConfig& c) -> auto& { return c.model.gcn_hidden; });
    t["model.gcn_out"] = num([](RunConfig& c) -> auto& { return c.model.gcn_out; });
    t["model.fused_dim"] = num([](RunConfig& c) -> auto& { return c.model.fused_dim; });
    t["model.graphs"] = [](RunConfig& c, const std::string& v) { c.model.graphs = model::parse_graph_list(v); };
    t["model.fusion"] = [](RunConfig& c, const std::string& v) { c.model.fusion = model::parse_fusion(v); };

    t["train.epochs"] = num([](RunConfig& c) -> auto& { return c.train.epochs; });
    t["train.batch_size"] = num([](RunConfig& c) -> auto& { return c.train.batch_size; });
    t["train.learning_rate"] = num([](RunConfig& c) -> auto& { return c.train.learning_rate; });
    t["train.dropout"] = num([](RunConfig& c) -> auto& { return c.train.dropout; });
    t["train.patience"] = num([](RunConfig& c) -> auto& { return c.train.patience; });
    t["train.max_len"] = num([](RunConfig& c) -> auto& { return c.train.max_len; });
    t["train.dev_k"] = num([](RunConfig& c) -> auto& { return c.train.dev_k; });
    t["train.clip_norm"] = num([](RunConfig& c) -> auto& { return c.train.clip_norm; });
    t["run.seed"] = [](RunConfig& c, const std::string& v) { c.set_seed(parse_as<std::uint64_t>("run.seed", v)); };

    t["graphs.k"] = num([](RunConfig& c) -> auto& { return c.graphs.knn; });
    t["graphs.tau"] = num([](RunConfig& c) -> auto& { return c.graphs.min_cosine; });

    t["eval.K"] = [](RunConfig& c, const std::string& v) { c.ks = parse_k_list("eval.K", v); };
    t["eval.few_threshold"] = num([](RunConfig& c) -> auto& { return c.few_threshold; });
    t["eval.candidates"] = [](RunConfig& c, const std::string& v) {
      if (v == "bucket") c.candidates = eval::CandidateMode::within_bucket;
      else if (v == "all") c.candidates = eval::CandidateMode::all_labels;
      else throw InputError("config: eval.candidates must be 'bucket' or 'all'");
    };

    t["synth.frequent_labels"] = num([](RunConfig& c) -> auto& { return c.synth.frequent_labels; });
    t["synth.few_labels"] = num([](RunConfig& c) -> auto& { return c.synth.few_labels; });
    t["synth.zero_labels"] = num([](RunConfig& c) -> auto& { return c.synth.zero_labels; });
    t["synth.words_per_topic"] = num([](RunConfig& c) -> auto& { return c.synth.words_per_topic; });
    t["synth.parent_overlap"] = num([](RunConfig& c) -> auto& { return c.synth.parent_overlap; });
    t["synth.related_overlap"] = num([](RunConfig& c) -> auto& { return c.synth.related_overlap; });
    t["synth.group_affinity"] = num([](RunConfig& c) -> auto& { return c.synth.group_affinity; });
    t["synth.noise_vocab"] = num([](RunConfig& c) -> auto& { return c.synth.noise_vocab; });
    t["synth.noise_rate"] = num([](RunConfig& c) -> auto& { return c.synth.noise_rate; });
    t["synth.tokens_per_label"] = num([](RunConfig& c) -> auto& { return c.synth.tokens_per_label; });
    t["synth.max_labels_per_doc"] = num([](RunConfig& c) -> auto& { return c.synth.max_labels_per_doc; });
    t["synth.train_docs"] = num([](RunConfig& c) -> auto& { return c.synth.train_docs; });
    t["synth.dev_docs"] = num([](RunConfig& c) -> auto& { return c.synth.dev_docs; });
    t["synth.test_docs"] = num([](RunConfig& c) -> auto& { return c.synth.test_docs; });
    t["synth.zero_doc_rate"] = num([](RunConfig& c) -> auto& { return c.synth.zero_doc_rate; });
    t["synth.few_max_freq"] = num([](RunConfig& c) -> auto& { return c.synth.few_max_freq; });
    t["synth.group_size"] = num([](RunConfig& c) -> auto& { return c.synth.group_size; });
    t["synth.embed_dim"] = num([](RunConfig& c) -> auto& { return c.synth.embed_dim; });
    t["synth.embed_noise"] = num([](RunConfig& c) -> auto& { return c.synth.embed_noise; });
    return t;
  }();
  return table;
}

}  // namespace detail

/// Applies one `section.key = value`; unknown keys are rejected so typos
/// do not silently fall back to defaults.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  const auto& t = detail::setters();
  const auto it = t.find(key);
  if (it == t.end()) throw InputError("config: unknown key '" + key + "'");
  try {
    it->second(c, value);
  } catch (const InputError& e) {
    const std::string what = e.what();
    if (what.find(key) != std::string::npos) throw;
    throw InputError("config: " + key + ": " + what);
  }
}

inline void apply_config_stream(RunConfig& c, std::istream& in) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    apply_setting(c, item.fullname(), detail::join(item.inputs, ','));
  }
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  apply_config_stream(c, in);
}

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  const auto& m = c.model;
  const auto& t = c.train;
  const auto& s = c.synth;
  return json{
      {"paths", {{"corpus", c.paths.corpus}, {"labels", c.paths.labels}, {"taxonomy", c.paths.taxonomy},
                 {"embeddings", c.paths.embeddings}, {"out", c.paths.out}}},
      {"model", {{"embed_dim", m.embed_dim}, {"filters", m.filters}, {"kernel_width", m.kernel_width},
                 {"gcn_hidden", m.gcn_hidden}, {"gcn_out", m.gcn_out}, {"fused_dim", m.fused_dim},
                 {"graphs", model::graph_list_string(m.graphs)}, {"fusion", model::fusion_name(m.fusion)}}},
      {"train", {{"epochs", t.epochs}, {"batch_size", t.batch_size}, {"learning_rate", t.learning_rate},
                 {"dropout", t.dropout}, {"patience", t.patience}, {"max_len", t.max_len}, {"dev_k", t.dev_k},
                 {"clip_norm", t.clip_norm}, {"seed", t.seed}}},
      {"graphs", {{"k", c.graphs.knn}, {"tau", c.graphs.min_cosine}}},
      {"eval", {{"K", c.ks}, {"few_threshold", c.few_threshold},
                {"candidates", c.candidates == eval::CandidateMode::within_bucket ? "bucket" : "all"}}},
      {"synth", {{"frequent_labels", s.frequent_labels}, {"few_labels", s.few_labels}, {"zero_labels", s.zero_labels},
                 {"words_per_topic", s.words_per_topic}, {"parent_overlap", s.parent_overlap},
                 {"related_overlap", s.related_overlap}, {"group_affinity", s.group_affinity},
                 {"noise_vocab", s.noise_vocab}, {"noise_rate", s.noise_rate}, {"tokens_per_label", s.tokens_per_label},
                 {"max_labels_per_doc", s.max_labels_per_doc}, {"train_docs", s.train_docs}, {"dev_docs", s.dev_docs},
                 {"test_docs", s.test_docs}, {"zero_doc_rate", s.zero_doc_rate}, {"few_max_freq", s.few_max_freq},
                 {"group_size", s.group_size}, {"embed_dim", s.embed_dim}, {"embed_noise", s.embed_noise},
                 {"seed", s.seed}}},
      {"seed", c.seed},
  };
}

}  // namespace kamg::data
