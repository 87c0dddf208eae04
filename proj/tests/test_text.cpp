#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "kamg/text/embeddings.hpp"
#include "kamg/text/tfidf.hpp"
#include "kamg/text/tokenize.hpp"
#include "kamg/text/vocab.hpp"

using namespace kamg;
using namespace kamg::text;

namespace {

EmbeddingTable table_of(const std::string& contents, const Vocab& vocab, std::size_t dim, std::uint64_t seed = 1) {
  std::istringstream in(contents);
  Rng rng(seed);
  return parse_embeddings(in, vocab, dim, rng);
}

Vocab vocab_of(std::initializer_list<const char*> toks) {
  Vocab v;
  for (const char* t : toks) v.insert(t, 1);
  return v;
}

}  // namespace

TEST(Tokenize, LowercasesAndSplits) {
  EXPECT_EQ(tokenize("Acute kidney failure"), (TokenList{"acute", "kidney", "failure"}));
  EXPECT_EQ(tokenize(""), TokenList{});
  EXPECT_EQ(tokenize("ICD-9-CM, v2"), (TokenList{"icd", "9", "cm", "v2"}));
  EXPECT_EQ(tokenize("  --  "), TokenList{});
}

TEST(BuildVocab, OrderingRule) {
  const Vocab v = build_vocab({{"a", "b"}, {"a"}}, 1);
  EXPECT_EQ(v.id("<pad>"), 0u);
  EXPECT_EQ(v.id("<unk>"), 1u);
  EXPECT_EQ(v.id("a"), 2u);
  EXPECT_EQ(v.id("b"), 3u);
}

TEST(BuildVocab, MinCountExcludesRareTokens) {
  const Vocab v = build_vocab({{"a", "b"}, {"a"}}, 2);
  EXPECT_FALSE(v.contains("b"));
  EXPECT_EQ(v.id("b"), Vocab::kUnk);
  EXPECT_EQ(v.size(), 3u);
}

TEST(BuildVocab, TiesBreakLexicographically) {
  const Vocab v = build_vocab({{"zeta", "alpha", "mid"}}, 1);
  EXPECT_EQ(v.id("alpha"), 2u);
  EXPECT_EQ(v.id("mid"), 3u);
  EXPECT_EQ(v.id("zeta"), 4u);
}

TEST(BuildVocab, InsensitiveToDocumentOrder) {
  std::vector<TokenList> docs{{"x", "y", "y"}, {"z", "x"}, {"w"}, {"y", "q", "q"}};
  const Vocab a = build_vocab(docs);
  std::reverse(docs.begin(), docs.end());
  const Vocab b = build_vocab(docs);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  for (std::size_t id = 0; id < a.size(); ++id) EXPECT_EQ(a.token(id), b.token(id));
}

TEST(Embeddings, CopiesPretrainedRow) {
  const Vocab v = vocab_of({"a"});
  const EmbeddingTable t = table_of("a 1.0 0.0\n", v, 2);
  EXPECT_EQ(t.rows(v.id("a"), 0), 1.0);
  EXPECT_EQ(t.rows(v.id("a"), 1), 0.0);
  EXPECT_TRUE(t.pretrained[v.id("a")]);
}

TEST(Embeddings, MissingTokenGetsFallbackRow) {
  const Vocab v = vocab_of({"a", "b"});
  const EmbeddingTable t = table_of("a 1.0 0.0\n", v, 2);
  EXPECT_FALSE(t.pretrained[v.id("b")]);
  EXPECT_TRUE(t.rows.all_finite());
  EXPECT_NE(norm2(t.row(v.id("b"))), 0.0);
  EXPECT_EQ(norm2(t.row(Vocab::kPad)), 0.0);
}

TEST(Embeddings, ShortLineNamesLine) {
  const Vocab v = vocab_of({"a"});
  std::string contents = "5 200\n";
  contents += "a";
  for (int i = 0; i < 199; ++i) contents += " 0.5";
  contents += "\n";
  try {
    table_of(contents, v, 200);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Embeddings, HeaderDimensionMismatch) {
  const Vocab v = vocab_of({"a"});
  EXPECT_THROW(table_of("1 3\na 1 2 3\n", v, 2), DimensionError);
}

TEST(Embeddings, NonNumericValueRejected) {
  const Vocab v = vocab_of({"a"});
  EXPECT_THROW(table_of("a 1.0 oops\n", v, 2), ParseError);
}

TEST(Embeddings, WriteLoadRoundTripIsBitExact) {
  Rng rng(77);
  std::vector<std::string> words{"alpha", "beta", "gamma"};
  Matrix vecs(3, 5);
  for (double& x : vecs.data()) x = rng.normal() * 1e-3 + rng.uniform();
  vecs(1, 2) = 1.0 / 3.0;
  vecs(2, 4) = -0.0;
  std::ostringstream out;
  write_embeddings(out, words, vecs);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, 4), "3 5\n");
  EXPECT_EQ(text.find("  "), std::string::npos);
  EXPECT_EQ(text.find('\r'), std::string::npos);

  Vocab v;
  for (const auto& w : words) v.insert(w, 1);
  const EmbeddingTable t = table_of(text, v, 5);
  for (std::size_t i = 0; i < words.size(); ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(t.rows(v.id(words[i]), j), vecs(i, j));
}

TEST(Idf, Formula) {
  const IdfTable all = compute_idf({{"t", "x"}, {"t"}});
  EXPECT_DOUBLE_EQ(all.idf("t"), 1.0);
  EXPECT_NEAR(all.idf("x"), 1.40546, 1e-5);
  EXPECT_DOUBLE_EQ(all.idf("never"), std::log(3.0) + 1.0);
}

TEST(Idf, DuplicatesWithinDescriptionCountOnce) {
  const IdfTable t = compute_idf({{"a", "a", "a"}, {"b"}});
  EXPECT_EQ(t.doc_freq("a"), 1u);
}

TEST(Idf, EmptyInputRejected) { EXPECT_THROW(compute_idf({}), InputError); }

TEST(LabelEmbedding, SingleTokenIsItsVector) {
  const Vocab v = vocab_of({"w", "z"});
  const EmbeddingTable t = table_of("w 0.25 -2\nz 1 1\n", v, 2);
  const auto le = label_embedding({"w"}, t, compute_idf({{"w"}, {"z"}}));
  EXPECT_FALSE(le.no_coverage);
  EXPECT_EQ(le.vec, (Vector{0.25, -2.0}));
}

TEST(LabelEmbedding, EqualWeightsAverage) {
  const Vocab v = vocab_of({"p", "q"});
  const EmbeddingTable t = table_of("p 1 0\nq 0 3\n", v, 2);
  const auto le = label_embedding({"p", "q"}, t, compute_idf({{"p", "q"}}));
  EXPECT_DOUBLE_EQ(le.vec[0], 0.5);
  EXPECT_DOUBLE_EQ(le.vec[1], 1.5);
}

TEST(LabelEmbedding, BruteForceWeightedMean) {
  // descriptions: {a a b}, {b c}; N = 2, df(a) = 1, df(b) = 2
  const Vocab v = vocab_of({"a", "b", "c"});
  const EmbeddingTable t = table_of("a 2 0\nb 0 4\nc 1 1\n", v, 2);
  const IdfTable idf = compute_idf({{"a", "a", "b"}, {"b", "c"}});
  const double wa = 2.0 * (std::log(3.0 / 2.0) + 1.0);
  const double wb = 1.0 * (std::log(3.0 / 3.0) + 1.0);
  const Vector expected{(wa * 2.0 + wb * 0.0) / (wa + wb), (wa * 0.0 + wb * 4.0) / (wa + wb)};
  const auto le = label_embedding({"a", "a", "b"}, t, idf);
  EXPECT_NEAR(le.vec[0], expected[0], 1e-15);
  EXPECT_NEAR(le.vec[1], expected[1], 1e-15);
}

TEST(LabelEmbedding, UncoveredTokensExcluded) {
  const Vocab v = vocab_of({"a", "b"});
  const EmbeddingTable t = table_of("a 1 2\n", v, 2);  // b gets a fallback row
  const auto le = label_embedding({"a", "b", "zzz"}, t, compute_idf({{"a", "b", "zzz"}}));
  EXPECT_EQ(le.vec, (Vector{1.0, 2.0}));
}

TEST(LabelEmbedding, AllOovGivesZeroAndFlag) {
  const Vocab v = vocab_of({"a"});
  const EmbeddingTable t = table_of("a 1 2\n", v, 2);
  const auto le = label_embedding({"nothing", "here"}, t, compute_idf({{"nothing", "here"}}));
  EXPECT_TRUE(le.no_coverage);
  EXPECT_EQ(le.vec, (Vector{0.0, 0.0}));
}

TEST(LabelEmbedding, ConvexHullAndPermutationInvariance) {
  Rng rng(31);
  std::vector<std::string> words;
  Matrix vecs(6, 3);
  for (int i = 0; i < 6; ++i) words.push_back("w" + std::to_string(i));
  for (double& x : vecs.data()) x = rng.uniform(-1, 1);
  Vocab v;
  for (const auto& w : words) v.insert(w, 1);
  const EmbeddingTable t = table_from_vectors(words, vecs, v, rng);
  for (int trial = 0; trial < 50; ++trial) {
    TokenList desc;
    for (std::size_t n = 1 + rng.below(8); n > 0; --n) desc.push_back(words[rng.below(words.size())]);
    const IdfTable idf = compute_idf({desc, {"w0", "w1"}, {"w2"}});
    const Vector a = label_embedding(desc, t, idf).vec;
    for (std::size_t j = 0; j < 3; ++j) {
      double lo = 1e9, hi = -1e9;
      for (const auto& w : desc) {
        lo = std::min(lo, t.rows(v.id(w), j));
        hi = std::max(hi, t.rows(v.id(w), j));
      }
      EXPECT_GE(a[j], lo - 1e-12);
      EXPECT_LE(a[j], hi + 1e-12);
    }
    rng.shuffle(std::span<std::string>(desc));
    EXPECT_EQ(label_embedding(desc, t, idf).vec, a);
  }
}
