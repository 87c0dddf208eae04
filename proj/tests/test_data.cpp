#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "kamg/data/corpus.hpp"
#include "kamg/data/pipeline.hpp"
#include "kamg/data/run_config.hpp"
#include "kamg/data/synthetic.hpp"
#include "kamg/experiment.hpp"

using namespace kamg;
using namespace kamg::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path p = fs::temp_directory_path() / (std::string("kamg_") + info->test_suite_name() + "_" + info->name());
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_file(const fs::path& p, const std::string& contents) {
  std::ofstream(p, std::ios::binary) << contents;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

LabelCatalog small_catalog() {
  LabelCatalog c;
  c.add("c1", "chest pain");
  c.add("c2", "kidney failure");
  return c;
}

SyntheticSpec tiny_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.frequent_labels = 6;
  s.few_labels = 2;
  s.zero_labels = 3;
  s.group_size = 3;
  s.train_docs = 120;
  s.dev_docs = 20;
  s.test_docs = 30;
  s.noise_vocab = 20;
  s.embed_dim = 8;
  s.seed = seed;
  return s;
}

template <class E>
std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const E& e) {
    return e.what();
  }
  return "<no exception>";
}

}  // namespace

TEST(Corpus, LoadsSingleDocument) {
  const auto dir = scratch_dir();
  const auto path = write_file(dir / "c.jsonl", R"({"id":"d1","text":"Chest PAIN, again","labels":["c1"],"split":"train"})" "\n");
  const Corpus c = load_corpus(path, small_catalog());
  ASSERT_EQ(c.documents.size(), 1u);
  EXPECT_EQ(c.documents[0].tokens, (text::TokenList{"chest", "pain", "again"}));
  EXPECT_EQ(c.documents[0].labels, (std::vector<std::size_t>{0}));
  EXPECT_EQ(c.documents[0].split, Split::train);
  EXPECT_EQ(c.train_label_freq(), (std::vector<std::size_t>{1, 0}));
}

TEST(Corpus, DuplicateIdNamesTheId) {
  const auto dir = scratch_dir();
  const auto path = write_file(dir / "c.jsonl",
                               R"({"id":"dup7","text":"a","labels":["c1"],"split":"train"})" "\n"
                               R"({"id":"dup7","text":"b","labels":["c2"],"split":"dev"})" "\n");
  const auto msg = message_of<InputError>([&] { load_corpus(path, small_catalog()); });
  EXPECT_NE(msg.find("dup7"), std::string::npos) << msg;
}

TEST(Corpus, UnknownCodesListed) {
  const auto dir = scratch_dir();
  const auto path = write_file(dir / "c.jsonl", R"({"id":"d","text":"a","labels":["c1","zz9","qq1"],"split":"test"})" "\n");
  const auto msg = message_of<InputError>([&] { load_corpus(path, small_catalog()); });
  EXPECT_NE(msg.find("zz9"), std::string::npos) << msg;
  EXPECT_NE(msg.find("qq1"), std::string::npos) << msg;
}

TEST(Corpus, MalformedLineReportsLineNumber) {
  const auto dir = scratch_dir();
  const auto path = write_file(dir / "c.jsonl",
                               R"({"id":"a","text":"x","labels":[],"split":"train"})" "\n"
                               "\n"
                               R"({"id":"b","text":)" "\n");
  const auto msg = message_of<ParseError>([&] { load_corpus(path, small_catalog()); });
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  const auto missing = write_file(dir / "m.jsonl", R"({"id":"a","labels":[],"split":"train"})" "\n");
  EXPECT_THROW(load_corpus(missing, small_catalog()), ParseError);
}

TEST(Corpus, UnknownSplitRejected) {
  const auto dir = scratch_dir();
  const auto path = write_file(dir / "c.jsonl", R"({"id":"a","text":"x","labels":[],"split":"holdout"})" "\n");
  const auto msg = message_of<InputError>([&] { load_corpus(path, small_catalog()); });
  EXPECT_NE(msg.find("holdout"), std::string::npos) << msg;
}

TEST(Corpus, MissingFileRejected) { EXPECT_THROW(load_corpus("/nonexistent/kamg.jsonl", small_catalog()), InputError); }

TEST(Corpus, RoundTripPreservesTokensLabelsSplits) {
  const auto dir = scratch_dir();
  const SyntheticDataset ds = generate_synthetic(tiny_spec(4));
  write_corpus((dir / "a.jsonl").string(), ds.corpus);
  write_labels((dir / "l.jsonl").string(), ds.corpus.catalog);
  const Corpus back = load_corpus((dir / "a.jsonl").string(), load_labels((dir / "l.jsonl").string()));
  ASSERT_EQ(back.documents.size(), ds.corpus.documents.size());
  for (std::size_t i = 0; i < back.documents.size(); ++i) {
    EXPECT_EQ(back.documents[i].id, ds.corpus.documents[i].id);
    EXPECT_EQ(back.documents[i].tokens, ds.corpus.documents[i].tokens);
    EXPECT_EQ(back.documents[i].labels, ds.corpus.documents[i].labels);
    EXPECT_EQ(back.documents[i].split, ds.corpus.documents[i].split);
  }
  EXPECT_EQ(back.catalog.fingerprint(), ds.corpus.catalog.fingerprint());
  write_corpus((dir / "b.jsonl").string(), back);
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
}

TEST(Catalog, DuplicateCodeAndMalformedRecord) {
  LabelCatalog c;
  c.add("x", "one");
  EXPECT_THROW(c.add("x", "two"), InputError);
  const auto dir = scratch_dir();
  const auto path = write_file(dir / "l.jsonl", "{\"code\":\"a\"}\n{oops}\n");
  const auto msg = message_of<ParseError>([&] { load_labels(path); });
  EXPECT_NE(msg.find(":2:"), std::string::npos) << msg;
}

TEST(Synthetic, SameSeedByteIdenticalFiles) {
  const auto dir = scratch_dir();
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  write_synthetic((dir / "a").string(), generate_synthetic(tiny_spec(9)));
  write_synthetic((dir / "b").string(), generate_synthetic(tiny_spec(9)));
  for (const char* f : {SyntheticFiles::corpus, SyntheticFiles::labels, SyntheticFiles::taxonomy, SyntheticFiles::embeddings}) {
    const std::string a = slurp(dir / "a" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(dir / "b" / f)) << f;
  }
  fs::create_directories(dir / "c");
  write_synthetic((dir / "c").string(), generate_synthetic(tiny_spec(10)));
  EXPECT_NE(slurp(dir / "a" / SyntheticFiles::corpus), slurp(dir / "c" / SyntheticFiles::corpus));
}

TEST(Synthetic, TrainSplitNeverCarriesZeroLabels) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto spec = tiny_spec(seed);
    const SyntheticDataset ds = generate_synthetic(spec);
    const auto freq = ds.corpus.train_label_freq();
    for (std::size_t l = 0; l < freq.size(); ++l) {
      const bool zero = l >= spec.frequent_labels + spec.few_labels;
      if (zero) {
        EXPECT_EQ(freq[l], 0u) << "seed " << seed << " label " << l;
      } else {
        EXPECT_GT(freq[l], 0u) << "seed " << seed << " label " << l;
      }
      if (!zero && l >= spec.frequent_labels) EXPECT_LE(freq[l], spec.few_max_freq);
    }
  }
}

TEST(Synthetic, ZeroLabelsHaveSeenHierarchyNeighbour) {
  const auto spec = tiny_spec(3);
  const SyntheticDataset ds = generate_synthetic(spec);
  const auto prep = prepare_synthetic(ds, GraphOptions{}, 5, 3);
  const auto& h = prep.graphs.at(graphs::GraphKind::hierarchy).adjacency;
  for (std::size_t l = 0; l < h.rows(); ++l) {
    if (!prep.unseen[l]) continue;
    bool has_seen = false;
    for (std::size_t j = 0; j < h.cols(); ++j) has_seen = has_seen || (j != l && h(l, j) > 0 && !prep.unseen[j]);
    EXPECT_TRUE(has_seen) << "zero label " << l;
  }
}

TEST(Synthetic, NeighbourInvariantViolationRejected) {
  SyntheticSpec s = tiny_spec(1);
  s.frequent_labels = 0;
  s.few_labels = 0;
  EXPECT_THROW(generate_synthetic(s), InputError);
  s = tiny_spec(1);
  s.parent_overlap = 0.8;
  s.related_overlap = 0.4;
  EXPECT_THROW(generate_synthetic(s), InputError);
}

TEST(Synthetic, DescriptionsContainTopicWords) {
  const SyntheticDataset ds = generate_synthetic(tiny_spec(2));
  for (std::size_t l = 0; l < ds.topic_words.size(); ++l)
    EXPECT_EQ(ds.corpus.catalog[l].description_tokens, ds.topic_words[l]);
}

TEST(Synthetic, ZeroLabelCloserToParentThanRandomLabel) {
  double parent_sum = 0.0, random_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SyntheticSpec spec = tiny_spec(seed);
    spec.related_overlap = 0.0;
    const SyntheticDataset ds = generate_synthetic(spec);
    const auto prep = prepare_synthetic(ds, GraphOptions{}, 5, seed);
    Rng pick(seed * 101);
    const std::size_t nl = spec.num_labels();
    for (std::size_t l = spec.frequent_labels + spec.few_labels; l < nl; ++l) {
      std::size_t other = pick.below(nl);
      while (other == l || other == ds.parent[l]) other = pick.below(nl);
      parent_sum += graphs::cosine(prep.label_vectors.row_span(l), prep.label_vectors.row_span(ds.parent[l]));
      random_sum += graphs::cosine(prep.label_vectors.row_span(l), prep.label_vectors.row_span(other));
    }
  }
  EXPECT_GT(parent_sum, random_sum);
}

TEST(Synthetic, NoiselessDisjointTopicsAreSeparable) {
  // Ranking by topic-word overlap is a perfect classifier on seen labels.
  SyntheticSpec spec = tiny_spec(5);
  spec.few_labels = 0;
  spec.noise_rate = 0.0;
  spec.max_labels_per_doc = 1;
  spec.parent_overlap = 0.0;
  spec.related_overlap = 0.0;
  const SyntheticDataset ds = generate_synthetic(spec);
  const auto test = ds.corpus.split(Split::test);
  Matrix scores(test.size(), spec.num_labels());
  std::vector<std::vector<std::size_t>> gold;
  for (std::size_t d = 0; d < test.size(); ++d) {
    for (std::size_t l = 0; l < spec.num_labels(); ++l)
      for (const auto& tok : test[d]->tokens)
        scores(d, l) += std::count(ds.topic_words[l].begin(), ds.topic_words[l].end(), tok) > 0;
    gold.push_back(test[d]->labels);
  }
  const auto buckets = eval::assign_buckets(ds.corpus.train_label_freq(), 5);
  const auto rep = eval::evaluate_scores(scores, gold, buckets, {{1}, eval::CandidateMode::within_bucket});
  ASSERT_GT(rep.cell(eval::Group::frequent, eval::Metric::recall, 1).n_docs, 0u);
  EXPECT_EQ(rep.value(eval::Group::frequent, eval::Metric::recall, 1), 1.0);
}

TEST(Pipeline, PrepareIsConsistent) {
  const auto spec = tiny_spec(6);
  const SyntheticDataset ds = generate_synthetic(spec);
  const auto prep = prepare_synthetic(ds, GraphOptions{3, 0.2}, 5, 6);
  const std::size_t nl = spec.num_labels();
  EXPECT_EQ(prep.label_vectors.rows(), nl);
  EXPECT_EQ(prep.label_vectors.cols(), spec.embed_dim);
  EXPECT_EQ(prep.graphs.size(), 3u);
  for (const auto& [kind, g] : prep.graphs) EXPECT_EQ(g.adjacency.rows(), nl) << graphs::kind_name(kind);
  EXPECT_EQ(prep.graph_hashes().size(), 3u);
  EXPECT_EQ(prep.train.size(), spec.train_docs);
  EXPECT_EQ(prep.dev.size(), spec.dev_docs);
  EXPECT_EQ(prep.test.size(), spec.test_docs);
  for (std::size_t l = 0; l < nl; ++l) {
    EXPECT_EQ(prep.unseen[l], prep.buckets.bucket[l] == eval::Bucket::zero);
    EXPECT_FALSE(prep.label_no_coverage[l]);
  }
  EXPECT_EQ(prep.buckets.labels_in(eval::Bucket::zero).size(), spec.zero_labels);
  for (const auto& toks : prep.train.tokens)
    for (std::size_t id : toks) EXPECT_NE(id, text::Vocab::kUnk);
}

TEST(RunConfig, SectionsAndListsParsed) {
  RunConfig c;
  std::istringstream in(
      "[model]\ngraphs = g,s\nfusion = pre\nembed_dim = 16\n"
      "[train]\nepochs = 4\nlearning_rate = 0.002\n"
      "[graphs]\nk = 7\ntau = 0.3\n"
      "[eval]\nK = 5,10\nfew_threshold = 3\n"
      "[run]\nseed = 9\n");
  apply_config_stream(c, in);
  EXPECT_EQ(model::graph_list_string(c.model.graphs), "g,s");
  EXPECT_EQ(c.model.fusion, model::FusionMode::pre_gcn_merge);
  EXPECT_EQ(c.model.embed_dim, 16u);
  EXPECT_TRUE(c.embed_dim_set);
  EXPECT_EQ(c.train.epochs, 4u);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 0.002);
  EXPECT_EQ(c.graphs.knn, 7u);
  EXPECT_DOUBLE_EQ(c.graphs.min_cosine, 0.3);
  EXPECT_EQ(c.ks, (std::vector<std::size_t>{5, 10}));
  EXPECT_EQ(c.few_threshold, 3u);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.train.seed, 9u);
}

TEST(RunConfig, BadKeysAndValuesRejected) {
  RunConfig c;
  std::istringstream unknown("[train]\nepoch = 4\n");
  EXPECT_NE(message_of<InputError>([&] { apply_config_stream(c, unknown); }).find("train.epoch"), std::string::npos);
  EXPECT_THROW(apply_setting(c, "train.epochs", "-1"), InputError);
  EXPECT_THROW(apply_setting(c, "train.epochs", "four"), InputError);
  EXPECT_THROW(apply_setting(c, "eval.K", "0"), InputError);
  EXPECT_THROW(apply_setting(c, "model.fusion", "sideways"), Error);
  EXPECT_THROW(apply_config_file(c, "/nonexistent/kamg.ini"), InputError);
}

TEST(RunConfig, DataDirAndJsonDump) {
  RunConfig c;
  c.use_data_dir("d");
  EXPECT_EQ(c.paths.corpus, "d/" + std::string(SyntheticFiles::corpus));
  EXPECT_EQ(c.paths.embeddings, "d/" + std::string(SyntheticFiles::embeddings));
  const auto j = to_json(c);
  EXPECT_EQ(j.dump(), to_json(c).dump());
  EXPECT_TRUE(j.contains("model"));
  EXPECT_TRUE(j.contains("train"));
}
