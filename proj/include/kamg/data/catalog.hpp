#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "kamg/errors.hpp"
#include "kamg/hash.hpp"
#include "kamg/text/tokenize.hpp"
#include "kamg/text/vocab.hpp"

namespace kamg::data {

struct Label {
  std::string code;
  std::string description;
  text::TokenList description_tokens;
};

/// Labels in a fixed order; a label's id is its position. Every graph,
/// embedding matrix and score vector uses this order.
class LabelCatalog {
 public:
  LabelCatalog() = default;
  explicit LabelCatalog(std::vector<Label> labels) {
    for (auto& l : labels) add(std::move(l.code), std::move(l.description));
  }

  std::size_t add(std::string code, std::string description) {
    if (index_.contains(code)) throw InputError("duplicate label code: " + code);
    index_.emplace(code, labels_.size());
    auto toks = text::tokenize(description);
    labels_.push_back(Label{std::move(code), std::move(description), std::move(toks)});
    return labels_.size() - 1;
  }

  std::size_t size() const noexcept { return labels_.size(); }
  const Label& operator[](std::size_t id) const { return labels_.at(id); }
  const std::vector<Label>& labels() const noexcept { return labels_; }
  bool contains(const std::string& code) const { return index_.contains(code); }

  std::size_t id(const std::string& code) const {
    const auto it = index_.find(code);
    if (it == index_.end()) throw InputError("unknown label code: " + code);
    return it->second;
  }

  std::vector<text::TokenList> descriptions() const {
    std::vector<text::TokenList> out;
    out.reserve(labels_.size());
    for (const auto& l : labels_) out.push_back(l.description_tokens);
    return out;
  }

  std::uint64_t fingerprint() const {
    Fnv1a h;
    for (const auto& l : labels_) h.update(l.code).update(l.description);
    return h.digest();
  }

 private:
  std::vector<Label> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Line-delimited records {"code": ..., "description": ...}.
inline LabelCatalog load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open label file: " + path);
  LabelCatalog cat;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      cat.add(rec.at("code").get<std::string>(), rec.value("description", std::string{}));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cat;
}

inline void write_labels(const std::string& path, const LabelCatalog& cat) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write label file: " + path);
  for (const auto& l : cat.labels()) {
    out << nlohmann::json{{"code", l.code}, {"description", l.description}}.dump() << '\n';
  }
}

}  // namespace kamg::data
