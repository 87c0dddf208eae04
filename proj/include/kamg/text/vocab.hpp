#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "kamg/errors.hpp"
#include "kamg/hash.hpp"

namespace kamg::text {

using TokenList = std::vector<std::string>;

class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocab() {
    insert(kPadToken, 0);
    insert(kUnkToken, 0);
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t count(std::size_t id) const { return counts_.at(id); }
  bool contains(const std::string& tok) const { return ids_.contains(tok); }

  std::size_t id(const std::string& tok) const {
    const auto it = ids_.find(tok);
    return it == ids_.end() ? kUnk : it->second;
  }

  std::vector<std::size_t> encode(const TokenList& toks) const {
    std::vector<std::size_t> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(id(t));
    return out;
  }

  std::uint64_t fingerprint() const {
    Fnv1a h;
    for (const auto& t : tokens_) h.update(t);
    return h.digest();
  }

  std::size_t insert(const std::string& tok, std::size_t count) {
    if (ids_.contains(tok)) throw InputError("duplicate vocabulary token: " + tok);
    ids_.emplace(tok, tokens_.size());
    tokens_.push_back(tok);
    counts_.push_back(count);
    return tokens_.size() - 1;
  }

 private:
  std::unordered_map<std::string, std::size_t> ids_;
  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
};

/// Tokens with frequency >= min_count, ordered by descending frequency then
/// lexicographically, after the reserved padding and unknown ids.
inline Vocab build_vocab(const std::vector<TokenList>& corpus, std::size_t min_count = 1) {
  if (min_count < 1) throw InputError("build_vocab: min_count must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& doc : corpus)
    for (const auto& t : doc) ++freq[t];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq) {
    if (n >= min_count && tok != Vocab::kPadToken && tok != Vocab::kUnkToken) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (const auto& [tok, n] : kept) v.insert(tok, n);
  return v;
}

}  // namespace kamg::text
