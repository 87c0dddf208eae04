#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "kamg/data/catalog.hpp"
#include "kamg/errors.hpp"
#include "kamg/text/tokenize.hpp"

namespace kamg::data {

enum class Split { train, dev, test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw InputError("unknown split: '" + s + "'");
}

struct Document {
  std::string id;
  text::TokenList tokens;
  std::vector<std::size_t> labels;  // sorted, unique label ids
  Split split = Split::train;
};

struct Corpus {
  std::vector<Document> documents;
  LabelCatalog catalog;

  std::vector<const Document*> split(Split s) const {
    std::vector<const Document*> out;
    for (const auto& d : documents)
      if (d.split == s) out.push_back(&d);
    return out;
  }

  /// Number of training documents carrying each label.
  std::vector<std::size_t> train_label_freq() const {
    std::vector<std::size_t> freq(catalog.size(), 0);
    for (const auto& d : documents)
      if (d.split == Split::train)
        for (std::size_t l : d.labels) ++freq[l];
    return freq;
  }
};

/// Parses one corpus record line against a catalog. `lineno` is for messages.
inline Document parse_document(const std::string& line, const LabelCatalog& catalog, std::size_t lineno) {
  nlohmann::json rec;
  try {
    rec = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("corpus line " + std::to_string(lineno) + ": " + e.what());
  }
  Document doc;
  std::vector<std::string> codes;
  try {
    doc.id = rec.at("id").get<std::string>();
    doc.tokens = text::tokenize(rec.at("text").get<std::string>());
    codes = rec.at("labels").get<std::vector<std::string>>();
    doc.split = parse_split(rec.at("split").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("corpus line " + std::to_string(lineno) + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError("corpus line " + std::to_string(lineno) + ": " + e.what());
  }
  std::vector<std::string> unknown;
  std::set<std::size_t> ids;
  for (const auto& c : codes) {
    if (!catalog.contains(c)) {
      unknown.push_back(c);
      continue;
    }
    ids.insert(catalog.id(c));
  }
  if (!unknown.empty()) {
    std::string msg = "corpus line " + std::to_string(lineno) + " (doc " + doc.id + "): unknown label codes:";
    for (const auto& u : unknown) msg += " " + u;
    throw InputError(msg);
  }
  doc.labels.assign(ids.begin(), ids.end());
  return doc;
}

/// Line-delimited records with fields id, text, labels, split.
inline Corpus load_corpus(const std::string& path, LabelCatalog catalog) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file: " + path);
  Corpus corpus;
  corpus.catalog = std::move(catalog);
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Document doc = parse_document(line, corpus.catalog, lineno);
    if (!seen_ids.insert(doc.id).second) {
      throw InputError("corpus line " + std::to_string(lineno) + ": duplicate document id '" + doc.id + "'");
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

inline std::string join_tokens(const text::TokenList& toks) {
  std::string s;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) s.push_back(' ');
    s += toks[i];
  }
  return s;
}

inline void write_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write corpus file: " + path);
  for (const auto& d : corpus.documents) {
    std::vector<std::string> codes;
    for (std::size_t l : d.labels) codes.push_back(corpus.catalog[l].code);
    out << nlohmann::json{{"id", d.id}, {"text", join_tokens(d.tokens)}, {"labels", codes}, {"split", to_string(d.split)}}
               .dump()
        << '\n';
  }
}

}  // namespace kamg::data
