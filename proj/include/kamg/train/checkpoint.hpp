#pragma once

// Binary checkpoint container:
//
//   "KAMGCKPT" | u32 version | config | u64 vocab hash | u64 n, n x u64 graph
//   hashes | u64 n, n x {u64 len, name, u64 rows, u64 cols, rows*cols f64}
//   | u64 FNV-1a of every preceding byte
//
// Integers and doubles are stored little-endian in native IEEE-754 layout.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "kamg/errors.hpp"
#include "kamg/hash.hpp"
#include "kamg/model/kamg.hpp"

namespace kamg::train {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'K', 'A', 'M', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Raised when a checkpoint's model configuration differs from the one a run expects.
class ConfigMismatchError : public IntegrityError {
 public:
  using IntegrityError::IntegrityError;
};

struct Checkpoint {
  model::ModelParams params;
  std::uint64_t vocab_hash = 0;
  std::vector<std::uint64_t> graph_hashes;
};

namespace detail {

class Writer {
 public:
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<char>& bytes() { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : p_(data), end_(data + size) {}
  void raw(void* out, std::size_t n) {
    if (static_cast<std::size_t>(end_ - p_) < n) throw IntegrityError("checkpoint: truncated content");
    std::memcpy(out, p_, n);
    p_ += n;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > remaining()) throw IntegrityError("checkpoint: string length exceeds file");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }

 private:
  const char* p_;
  const char* end_;
};

inline void write_config(Writer& w, const model::ModelConfig& c) {
  for (std::size_t v : {c.embed_dim, c.filters, c.kernel_width, c.gcn_hidden, c.gcn_out, c.fused_dim}) w.u64(v);
  w.u64(c.graphs.size());
  for (auto k : c.graphs) w.u8(static_cast<std::uint8_t>(graphs::kind_letter(k)));
  w.u8(static_cast<std::uint8_t>(c.fusion));
}

inline model::ModelConfig read_config(Reader& r) {
  model::ModelConfig c;
  c.embed_dim = r.u64();
  c.filters = r.u64();
  c.kernel_width = r.u64();
  c.gcn_hidden = r.u64();
  c.gcn_out = r.u64();
  c.fused_dim = r.u64();
  const std::uint64_t n = r.u64();
  if (n > 3) throw IntegrityError("checkpoint: bad graph count");
  c.graphs.clear();
  for (std::uint64_t i = 0; i < n; ++i) c.graphs.push_back(graphs::parse_kind(std::string(1, static_cast<char>(r.u8()))));
  const std::uint8_t f = r.u8();
  if (f > 2) throw IntegrityError("checkpoint: bad fusion mode");
  c.fusion = static_cast<model::FusionMode>(f);
  return c;
}

}  // namespace detail

inline std::vector<char> serialize_checkpoint(const Checkpoint& ck) {
  detail::Writer w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  detail::write_config(w, ck.params.config);
  w.u64(ck.vocab_hash);
  w.u64(ck.graph_hashes.size());
  for (auto h : ck.graph_hashes) w.u64(h);
  const auto& ps = ck.params.values;
  w.u64(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    w.str(ps.name(i));
    w.u64(ps.value(i).rows());
    w.u64(ps.value(i).cols());
    for (double v : ps.value(i).data()) w.f64(v);
  }
  const std::uint64_t sum = Fnv1a().update(w.bytes().data(), w.bytes().size()).digest();
  w.u64(sum);
  return std::move(w.bytes());
}

inline Checkpoint deserialize_checkpoint(const std::vector<char>& bytes) {
  constexpr std::size_t kMin = sizeof kCheckpointMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < kMin) throw IntegrityError("checkpoint: file too short");
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) throw IntegrityError("checkpoint: bad magic");
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof stored);
  if (Fnv1a().update(bytes.data(), body).digest() != stored) {
    throw IntegrityError("checkpoint: checksum mismatch (truncated or corrupted file)");
  }
  detail::Reader r(bytes.data() + sizeof kCheckpointMagic, body - sizeof kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IntegrityError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.params.config = detail::read_config(r);
  ck.vocab_hash = r.u64();
  const std::uint64_t ng = r.u64();
  if (ng > r.remaining() / 8) throw IntegrityError("checkpoint: bad graph hash count");
  for (std::uint64_t i = 0; i < ng; ++i) ck.graph_hashes.push_back(r.u64());
  const std::uint64_t np = r.u64();
  for (std::uint64_t i = 0; i < np; ++i) {
    std::string name = r.str();
    const std::uint64_t rows = r.u64(), cols = r.u64();
    if (cols != 0 && rows > r.remaining() / 8 / cols) throw IntegrityError("checkpoint: matrix exceeds file size");
    Matrix m(rows, cols);
    for (double& v : m.data()) v = r.f64();
    ck.params.values.add(std::move(name), std::move(m));
  }
  if (r.remaining() != 0) throw IntegrityError("checkpoint: trailing bytes");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const auto bytes = serialize_checkpoint(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path);
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

/// Rejects a checkpoint whose config or input fingerprints differ from the
/// run that wants to use it.
inline void validate_checkpoint(const Checkpoint& ck, const model::ModelConfig& expected, std::uint64_t vocab_hash,
                                const std::vector<std::uint64_t>& graph_hashes) {
  const auto& c = ck.params.config;
  if (!(c == expected)) {
    throw ConfigMismatchError("checkpoint config mismatch: trained with graphs {" + model::graph_list_string(c.graphs) +
                              "} fusion " + model::fusion_name(c.fusion) + ", run expects graphs {" +
                              model::graph_list_string(expected.graphs) + "} fusion " + model::fusion_name(expected.fusion));
  }
  if (ck.vocab_hash != vocab_hash) throw IntegrityError("checkpoint vocabulary or embedding fingerprint mismatch (train and evaluate need the same corpus, embeddings and seed)");
  if (ck.graph_hashes != graph_hashes) throw IntegrityError("checkpoint graph hash mismatch");
  Rng probe(0);
  const auto layout = model::init_params(expected, probe);
  if (!layout.values.same_layout(ck.params.values)) throw IntegrityError("checkpoint parameter layout mismatch");
}

}  // namespace kamg::train
