// kamg: build label graphs, train, evaluate, run the graph/fusion ablation,
// write synthetic corpora and run the oracle suites.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kamg/data/corpus.hpp"
#include "kamg/data/pipeline.hpp"
#include "kamg/data/run_config.hpp"
#include "kamg/data/synthetic.hpp"
#include "kamg/experiment.hpp"
#include "kamg/hash.hpp"
#include "kamg/oracle/suites.hpp"
#include "kamg/train/checkpoint.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace kamg;

namespace {

struct Flags {
  std::string config, out, data, corpus, labels, taxonomy, embeddings, graphs, fusion, ks;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k, few_threshold, epochs;
  std::optional<double> tau;
};

void add_common(CLI::App* sub, Flags& f, bool model_flags) {
  sub->add_option("--config", f.config, "configuration file (key = value with [sections])")->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "seed for initialisation, shuffling and generation");
  sub->add_option("--out", f.out, "output directory");
  if (!model_flags) return;
  sub->add_option("--data", f.data, "directory with corpus.jsonl, labels.jsonl, taxonomy.tsv, embeddings.txt");
  sub->add_option("--corpus", f.corpus, "corpus records");
  sub->add_option("--labels", f.labels, "label catalog records");
  sub->add_option("--taxonomy", f.taxonomy, "taxonomy (child<TAB>parent)");
  sub->add_option("--embeddings", f.embeddings, "word vectors");
  sub->add_option("--graphs", f.graphs, "graph list, e.g. g,s,c");
  sub->add_option("--k", f.k, "similarity neighbours per label");
  sub->add_option("--tau", f.tau, "similarity cosine floor");
  sub->add_option("--few-threshold", f.few_threshold, "max training frequency of a few-shot label (default 5)");
  sub->add_option("--K", f.ks, "comma-separated metric cutoffs (default 10)");
  sub->add_option("--epochs", f.epochs, "training epochs");
}

data::RunConfig resolve(const Flags& f) {
  data::RunConfig c;
  if (!f.config.empty()) data::apply_config_file(c, f.config);
  if (f.seed) c.set_seed(*f.seed);
  if (!f.out.empty()) c.paths.out = f.out;
  if (!f.data.empty()) c.use_data_dir(f.data);
  if (!f.corpus.empty()) c.paths.corpus = f.corpus;
  if (!f.labels.empty()) c.paths.labels = f.labels;
  if (!f.taxonomy.empty()) c.paths.taxonomy = f.taxonomy;
  if (!f.embeddings.empty()) c.paths.embeddings = f.embeddings;
  if (!f.graphs.empty()) c.model.graphs = model::parse_graph_list(f.graphs);
  if (!f.fusion.empty() && f.fusion.find(',') == std::string::npos) c.model.fusion = model::parse_fusion(f.fusion);
  if (f.k) c.graphs.knn = *f.k;
  if (f.tau) c.graphs.min_cosine = *f.tau;
  if (f.few_threshold) c.few_threshold = *f.few_threshold;
  if (!f.ks.empty()) data::apply_setting(c, "eval.K", f.ks);
  if (f.epochs) c.train.epochs = *f.epochs;
  return c;
}

/// Dimension of a word-vector file: the header's second number, or the
/// field count of the first line minus the token.
std::size_t sniff_embedding_dim(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embeddings: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("embeddings file is empty: " + path);
  const auto f = text::detail::split_ws(line);
  std::size_t a = 0, b = 0;
  if (f.size() == 2 && text::detail::parse_number(f[0], a) && text::detail::parse_number(f[1], b)) return b;
  if (f.size() < 2) throw ParseError("embeddings line 1: no vector values");
  return f.size() - 1;
}

void require_file(const std::string& what, const std::string& path) {
  if (path.empty()) throw InputError("no " + what + " file given (use --data, --" + what + " or the config file)");
  if (!fs::is_regular_file(path)) throw InputError(what + " file does not exist: " + path);
}

struct Loaded {
  data::PreparedData prep;
  std::uint64_t input_fingerprint = 0;  // vocabulary plus embedding table
};

Loaded load_inputs(data::RunConfig& c) {
  require_file("corpus", c.paths.corpus);
  require_file("labels", c.paths.labels);
  require_file("taxonomy", c.paths.taxonomy);
  require_file("embeddings", c.paths.embeddings);
  const data::Corpus corpus = data::load_corpus(c.paths.corpus, data::load_labels(c.paths.labels));
  const auto taxonomy = graphs::load_taxonomy(c.paths.taxonomy);
  if (!c.embed_dim_set) c.model.embed_dim = sniff_embedding_dim(c.paths.embeddings);
  const text::Vocab vocab = data::corpus_vocab(corpus);
  Rng rng(c.seed);
  Loaded l{data::prepare(corpus, taxonomy, text::load_embeddings(c.paths.embeddings, vocab, c.model.embed_dim, rng), c.graphs,
                         c.few_threshold),
           0};
  l.input_fingerprint = Fnv1a().update_u64(l.prep.vocab.fingerprint()).update_f64s(l.prep.embeddings.rows.data()).digest();
  return l;
}

fs::path out_dir(const data::RunConfig& c) {
  fs::path p(c.paths.out);
  fs::create_directories(p);
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write " + p.string());
  return out;
}

/// One record: command, full configuration, seeds and input hashes. No
/// timestamps, so equal manifests mean equal runs.
void write_manifest(const fs::path& dir, const std::string& command, const data::RunConfig& c,
                    const std::vector<std::string>& inputs, json extra = json::object()) {
  json hashes = json::object();
  for (const auto& p : inputs)
    if (!p.empty()) hashes[p] = hex64(hash_file(p));
  json rec{{"command", command},
           {"config", data::to_json(c)},
           {"seeds", {{"run", c.seed}, {"train", c.train.seed}, {"synth", c.synth.seed}}},
           {"inputs", hashes}};
  for (auto& [k, v] : extra.items()) rec[k] = v;
  open_out(dir / "manifest.jsonl") << rec.dump() << '\n';
}

std::vector<std::string> input_paths(const data::RunConfig& c) {
  return {c.paths.corpus, c.paths.labels, c.paths.taxonomy, c.paths.embeddings};
}

// --------------------------------------------------------------------------

int cmd_synth(const Flags& f, const std::string& preset) {
  data::RunConfig c = resolve(f);
  if (preset == "acceptance") {
    c.synth = synthetic_preset(c.seed).synth;
  } else if (!preset.empty() && preset != "default") {
    throw InputError("unknown synthetic preset: " + preset);
  }
  const fs::path dir = out_dir(c);
  const data::SyntheticDataset ds = data::generate_synthetic(c.synth);
  data::write_synthetic(dir.string(), ds);
  const auto freq = ds.corpus.train_label_freq();
  const auto b = eval::assign_buckets(freq, c.few_threshold);
  std::printf("wrote %zu documents, %zu labels (%zu frequent, %zu few, %zu zero at threshold %zu) to %s\n",
              ds.corpus.documents.size(), ds.corpus.catalog.size(), b.labels_in(eval::Bucket::frequent).size(),
              b.labels_in(eval::Bucket::few).size(), b.labels_in(eval::Bucket::zero).size(), c.few_threshold,
              dir.string().c_str());
  write_manifest(dir, "synth", c, {}, {{"preset", preset.empty() ? "default" : preset}});
  return 0;
}

json graph_stats(const graphs::LabelGraph& g, const data::PreparedData& p) {
  const std::size_t n = g.size();
  std::size_t isolated = 0, zero_linked = 0, zero_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false, seen_nbr = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || g.adjacency(i, j) == 0.0) continue;
      any = true;
      seen_nbr = seen_nbr || !p.unseen[j];
    }
    isolated += !any;
    if (p.unseen[i]) {
      ++zero_total;
      zero_linked += seen_nbr;
    }
  }
  const double pairs = n > 1 ? static_cast<double>(n) * static_cast<double>(n - 1) / 2.0 : 1.0;
  return {{"graph", graphs::kind_name(g.kind)},
          {"labels", n},
          {"edges", g.edge_count()},
          {"density", static_cast<double>(g.edge_count()) / pairs},
          {"mean_degree", n ? 2.0 * static_cast<double>(g.edge_count()) / static_cast<double>(n) : 0.0},
          {"isolated_labels", isolated},
          {"zero_labels", zero_total},
          {"zero_labels_with_seen_neighbour", zero_linked},
          {"fingerprint", hex64(g.fingerprint())}};
}

int cmd_build_graphs(const Flags& f) {
  data::RunConfig c = resolve(f);
  const Loaded l = load_inputs(c);
  const fs::path dir = out_dir(c);
  auto stats = open_out(dir / "graph_stats.jsonl");
  for (const auto& [kind, g] : l.prep.graphs) {
    graphs::write_graph((dir / (std::string("graph_") + graphs::kind_name(kind) + ".txt")).string(), g);
    const json s = graph_stats(g, l.prep);
    stats << s.dump() << '\n';
    std::printf("%-13s %6zu edges, %zu isolated labels, %zu/%zu zero labels linked to a seen label\n", graphs::kind_name(kind),
                s["edges"].get<std::size_t>(), s["isolated_labels"].get<std::size_t>(),
                s["zero_labels_with_seen_neighbour"].get<std::size_t>(), s["zero_labels"].get<std::size_t>());
  }
  write_manifest(dir, "build-graphs", c, input_paths(c));
  return 0;
}

int cmd_train(const Flags& f) {
  data::RunConfig c = resolve(f);
  const Loaded l = load_inputs(c);
  const fs::path dir = out_dir(c);
  std::cerr << "training {" << model::graph_list_string(c.model.graphs) << "} " << model::fusion_name(c.model.fusion) << '\n';
  const auto r = train::train(l.prep.train, l.prep.dev, l.prep.unseen, l.prep.label_inputs(c.model), l.prep.embeddings, c.model,
                              c.train, &std::cerr);
  train::save_checkpoint((dir / "checkpoint.bin").string(),
                         train::Checkpoint{r.best, l.input_fingerprint, l.prep.graph_hashes()});
  auto hist = open_out(dir / "history.jsonl");
  for (const auto& e : r.history.epochs) {
    hist << json{{"epoch", e.epoch},
                 {"train_loss", e.train_loss},
                 {"dev_recall_at_" + std::to_string(c.train.dev_k), e.dev_metric},
                 {"graph_grad_norm", e.graph_grad_norm},
                 {"best", e.epoch == r.history.best_epoch && !r.history.epochs.empty()}}
                .dump()
         << '\n';
  }
  if (!r.history.epochs.empty()) {
    const auto& best = r.history.epochs[r.history.best_epoch];
    std::printf("best epoch %zu: dev R@%zu %.4f, train loss %.5f\n", best.epoch + 1, c.train.dev_k, best.dev_metric,
                best.train_loss);
  }
  write_manifest(dir, "train", c, input_paths(c), {{"input_fingerprint", hex64(l.input_fingerprint)}});
  return 0;
}

void write_report(const fs::path& dir, const eval::MetricsReport& rep) {
  auto jl = open_out(dir / "report.jsonl");
  for (const auto& note : rep.header_notes) jl << json{{"note", note}}.dump() << '\n';
  eval::write_report_records(jl, rep);
  auto tbl = open_out(dir / "report.txt");
  eval::write_report_table(tbl, rep);
  eval::write_report_table(std::cout, rep);
}

int cmd_evaluate(const Flags& f, const std::string& checkpoint, const std::string& split) {
  data::RunConfig c = resolve(f);
  const Loaded l = load_inputs(c);
  const train::Checkpoint ck = train::load_checkpoint(checkpoint);
  if (f.graphs.empty() && f.fusion.empty() && f.config.empty()) c.model = ck.params.config;
  train::validate_checkpoint(ck, c.model, l.input_fingerprint, l.prep.graph_hashes());
  const train::SplitData& data = split == "dev" ? l.prep.dev : l.prep.test;
  if (data.size() == 0) throw InputError("the " + split + " split is empty");
  const auto rep = evaluate_split(ck.params, l.prep, data, eval::EvalOptions{c.ks, c.candidates}, c.train.max_len);
  const fs::path dir = out_dir(c);
  write_report(dir, rep);
  auto inputs = input_paths(c);
  inputs.push_back(checkpoint);
  write_manifest(dir, "evaluate", c, inputs, {{"split", split}});
  return 0;
}

/// The seven nonempty subsets of the chosen graphs, smallest first.
std::vector<std::vector<graphs::GraphKind>> graph_subsets(const std::vector<graphs::GraphKind>& universe) {
  std::vector<std::vector<graphs::GraphKind>> out;
  const std::size_t n = universe.size();
  for (std::size_t size = 1; size <= n; ++size)
    for (std::size_t mask = 1; mask < (1u << n); ++mask) {
      if (static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(mask))) != size) continue;
      std::vector<graphs::GraphKind> s;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) s.push_back(universe[i]);
      out.push_back(s);
    }
  return out;
}

std::string subset_name(const std::vector<graphs::GraphKind>& s) {
  std::string out = "ACNN-KAMG (";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", H_" : "H_") + std::string(1, graphs::kind_letter(s[i]));
  return out + ")";
}

int cmd_ablate(const Flags& f) {
  data::RunConfig c = resolve(f);
  const Loaded l = load_inputs(c);
  const fs::path dir = out_dir(c);

  std::vector<model::FusionMode> fusions;
  {
    std::string spec = f.fusion.empty() ? "post,pre" : f.fusion, tok;
    std::istringstream in(spec);
    while (std::getline(in, tok, ','))
      if (!tok.empty()) fusions.push_back(model::parse_fusion(tok));
  }
  const auto universe = f.graphs.empty() ? std::vector<graphs::GraphKind>{graphs::GraphKind::hierarchy, graphs::GraphKind::similarity,
                                                                          graphs::GraphKind::cooccurrence}
                                         : c.model.graphs;

  struct Row {
    std::string name;
    eval::MetricsReport report;
  };
  std::vector<Row> rows;
  auto jl = open_out(dir / "ablation.jsonl");
  for (model::FusionMode fusion : fusions) {
    for (const auto& subset : graph_subsets(universe)) {
      if (fusion == model::FusionMode::pre_gcn_merge && subset.size() < 2) continue;
      model::ModelConfig mc = c.model;
      mc.graphs = subset;
      mc.fusion = fusion;
      const std::string name = subset_name(subset) + " " + model::fusion_name(fusion);
      std::cerr << "ablate: " << name << '\n';
      const RunResult r = train_and_evaluate(l.prep, mc, c.train, eval::EvalOptions{c.ks, c.candidates});
      for (const auto& cell : r.report.cells) {
        jl << json{{"model", subset_name(subset)},
                   {"graphs", model::graph_list_string(subset)},
                   {"fusion", model::fusion_name(fusion)},
                   {"bucket", eval::group_name(cell.group)},
                   {"metric", eval::metric_name(cell.metric)},
                   {"K", cell.k},
                   {"value", cell.value ? json(*cell.value) : json(nullptr)},
                   {"n_docs", cell.n_docs}}
                  .dump()
           << '\n';
      }
      rows.push_back({name, r.report});
    }
  }

  auto table = open_out(dir / "ablation.txt");
  for (std::ostream* os : {static_cast<std::ostream*>(&table), static_cast<std::ostream*>(&std::cout)}) {
    auto& out = *os;
    if (!rows.empty())
      for (const auto& note : rows.front().report.header_notes) out << "# " << note << '\n';
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-34s", "");
    out << buf;
    const std::size_t width = c.ks.size() * 2 * 9 - 1;
    for (eval::Group g : eval::kAllGroups) {
      std::snprintf(buf, sizeof buf, " | %-*s", static_cast<int>(width), eval::group_name(g));
      out << buf;
    }
    out << '\n';
    std::snprintf(buf, sizeof buf, "%-34s", "Model");
    out << buf;
    for (std::size_t gi = 0; gi < eval::kAllGroups.size(); ++gi) {
      out << " |";
      for (std::size_t k : c.ks)
        for (const char* m : {"R@", "nDCG@"}) {
          std::snprintf(buf, sizeof buf, " %8s", (m + std::to_string(k)).c_str());
          out << buf;
        }
    }
    out << '\n';
    for (const auto& row : rows) {
      std::snprintf(buf, sizeof buf, "%-34s", row.name.c_str());
      out << buf;
      for (eval::Group g : eval::kAllGroups) {
        out << " |";
        for (std::size_t k : c.ks)
          for (eval::Metric m : {eval::Metric::recall, eval::Metric::ndcg}) {
            const auto& cell = row.report.cell(g, m, k);
            if (cell.value) {
              std::snprintf(buf, sizeof buf, " %8.4f", *cell.value);
            } else {
              std::snprintf(buf, sizeof buf, " %8s", "-");
            }
            out << buf;
          }
      }
      out << '\n';
    }
  }
  write_manifest(dir, "ablate", c, input_paths(c), {{"fusion_modes", f.fusion.empty() ? "post,pre" : f.fusion}});
  return 0;
}

int cmd_oracle_check() {
  bool ok = true;
  auto report = [&](const char* suite, const oracle::SuiteResult& r) {
    for (const auto& chk : r.checks)
      std::printf("  %-4s %-10s %-40s %.3e (limit %.1e)\n", chk.passed ? "ok" : "FAIL", suite, chk.name.c_str(), chk.value,
                  chk.limit);
    std::printf("%s suite: %s in %.2f s\n", suite, r.passed() ? "green" : "RED", r.seconds);
    ok = ok && r.passed();
  };
  report("gradient", oracle::gradient_suite());
  const auto m = oracle::metric_suite();
  std::printf("metric suite: %zu instances, %zu values, %zu mismatches, identity violations %zu/%zu: %s in %.2f s\n", m.instances,
              m.evaluations, m.mismatches, m.identity_violations, m.identity_checked, m.passed() ? "green" : "RED", m.seconds);
  ok = ok && m.passed();
  report("graph", oracle::graph_suite());
  std::printf("%s\n", ok ? "all oracle suites green" : "oracle failures");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KAMG zero-shot multi-label text classification"};
  app.require_subcommand(1);

  Flags f;
  std::string preset, checkpoint, split = "test";

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus, catalog, taxonomy and embeddings");
  add_common(synth, f, false);
  synth->add_option("--preset", preset, "default | acceptance");

  auto* build = app.add_subcommand("build-graphs", "write the hierarchy, similarity and co-occurrence graphs");
  add_common(build, f, true);

  auto* tr = app.add_subcommand("train", "train and write checkpoint.bin and history.jsonl");
  add_common(tr, f, true);
  tr->add_option("--fusion", f.fusion, "post | pre | none");

  auto* ev = app.add_subcommand("evaluate", "bucketed ranking metrics for a checkpoint");
  add_common(ev, f, true);
  ev->add_option("--fusion", f.fusion, "post | pre | none");
  ev->add_option("--checkpoint", checkpoint, "checkpoint from `kamg train`")->required()->check(CLI::ExistingFile);
  ev->add_option("--split", split, "test | dev")->check(CLI::IsMember({"test", "dev"}));

  auto* ab = app.add_subcommand("ablate", "every graph subset under each fusion mode");
  add_common(ab, f, true);
  ab->add_option("--fusion", f.fusion, "comma list of post, pre (default post,pre)");

  auto* oc = app.add_subcommand("oracle-check", "gradient, metric and graph oracle suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) return cmd_synth(f, preset);
    if (build->parsed()) return cmd_build_graphs(f);
    if (tr->parsed()) return cmd_train(f);
    if (ev->parsed()) return cmd_evaluate(f, checkpoint, split);
    if (ab->parsed()) return cmd_ablate(f);
    if (oc->parsed()) return cmd_oracle_check();
  } catch (const kamg::Error& e) {
    std::cerr << "kamg: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "kamg: unexpected error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
