#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <unordered_set>
#include <vector>

#include "kamg/errors.hpp"
#include "kamg/numerics/matrix.hpp"
#include "kamg/numerics/rng.hpp"
#include "kamg/text/vocab.hpp"

namespace kamg::text {

/// Word vectors aligned with a vocabulary: row i belongs to vocab id i.
/// `pretrained[i]` is false for rows that were filled with a fallback.
struct EmbeddingTable {
  Vocab vocab;
  std::size_t dim = 0;
  Matrix rows;
  std::vector<bool> pretrained;

  const std::span<const double> row(std::size_t id) const { return rows.row_span(id); }
  std::size_t coverage_count() const {
    std::size_t n = 0;
    for (bool b : pretrained) n += b;
    return n;
  }
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace detail

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Reads "token f_1 ... f_d" lines (optionally preceded by a "count dim"
/// header). Vocabulary tokens found in the stream get their vectors copied;
/// the rest get Glorot-uniform fallback rows. The padding row is zero.
inline EmbeddingTable parse_embeddings(std::istream& in, const Vocab& vocab, std::size_t dim, Rng& rng) {
  if (dim == 0) throw DimensionError("embedding dimension must be >= 1");
  EmbeddingTable table{vocab, dim, Matrix(vocab.size(), dim), std::vector<bool>(vocab.size(), false)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    if (lineno == 1 && fields.size() == 2) {
      std::size_t count = 0, hdim = 0;
      if (detail::parse_number(fields[0], count) && detail::parse_number(fields[1], hdim)) {
        if (hdim != dim) {
          throw DimensionError("embedding header dimension " + std::to_string(hdim) + " != expected " +
                               std::to_string(dim));
        }
        continue;
      }
    }
    if (fields.size() != dim + 1) {
      throw ParseError("embedding line " + std::to_string(lineno) + ": expected token and " + std::to_string(dim) +
                       " values, found " + std::to_string(fields.size() - 1));
    }
    std::vector<double> vals(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      if (!detail::parse_number(fields[j + 1], vals[j]) || !std::isfinite(vals[j])) {
        throw ParseError("embedding line " + std::to_string(lineno) + ": bad value '" +
                         std::string(fields[j + 1]) + "'");
      }
    }
    const std::string tok(fields[0]);
    if (!vocab.contains(tok)) continue;
    const std::size_t id = vocab.id(tok);
    if (id == Vocab::kPad || table.pretrained[id]) continue;
    std::copy(vals.begin(), vals.end(), table.rows.row_span(id).begin());
    table.pretrained[id] = true;
  }
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    if (id == Vocab::kPad || table.pretrained[id]) continue;
    const Matrix fallback = glorot_uniform_init(1, dim, rng);
    std::copy(fallback.data().begin(), fallback.data().end(), table.rows.row_span(id).begin());
  }
  return table;
}

inline EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab, std::size_t dim, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embedding file: " + path);
  try {
    return parse_embeddings(in, vocab, dim, rng);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// Writes the header line "count dim" then one "token v_1 ... v_d" line per
/// word, single spaces, '\n' line ends, shortest round-trip decimals.
inline void write_embeddings(std::ostream& out, const std::vector<std::string>& words, const Matrix& vectors) {
  if (words.size() != vectors.rows()) throw DimensionError("write_embeddings: word count != row count");
  out << words.size() << ' ' << vectors.cols() << '\n';
  for (std::size_t i = 0; i < words.size(); ++i) {
    out << words[i];
    for (double v : vectors.row_span(i)) out << ' ' << format_double(v);
    out << '\n';
  }
}

inline void write_embeddings(const std::string& path, const std::vector<std::string>& words, const Matrix& vectors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write embedding file: " + path);
  write_embeddings(out, words, vectors);
}

}  // namespace kamg::text

namespace kamg::text {

/// Table for `vocab` from in-memory word vectors, equivalent to writing them
/// with write_embeddings and loading the file.
inline EmbeddingTable table_from_vectors(const std::vector<std::string>& words, const Matrix& vectors, const Vocab& vocab,
                                         Rng& rng) {
  std::stringstream ss;
  write_embeddings(ss, words, vectors);
  return parse_embeddings(ss, vocab, vectors.cols(), rng);
}

}  // namespace kamg::text
