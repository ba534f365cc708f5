#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "lila/models/architecture.hpp"
#include "lila/numerics/adam.hpp"
#include "lila/numerics/params.hpp"

namespace lila::io {

inline constexpr char kCheckpointMagic[8] = {'L', 'I', 'L', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointError : std::runtime_error {
  enum class Kind { io, format, version, checksum, architecture };
  CheckpointError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
  Kind kind;
};

/// Everything needed to resume training or re-evaluate: parameters, Adam
/// moments, RNG state and the run configuration that produced them.
struct Checkpoint {
  model::Architecture arch;
  nlohmann::json config;  // run configuration snapshot
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::string rng_state;
  num::ParamSet<float> params;
  num::AdamState<float> adam;

  bool operator==(const Checkpoint& o) const {
    return arch == o.arch && config == o.config && seed == o.seed && step == o.step && rng_state == o.rng_state &&
           params == o.params && adam == o.adam;
  }
};

namespace detail {

class Writer {
 public:
  template <class U>
  void scalar(U v) {
    unsigned char b[sizeof(U)];
    std::memcpy(b, &v, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
    buf_.insert(buf_.end(), b, b + sizeof(U));
  }
  void bytes(const std::string& s) {
    scalar<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void floats(const std::vector<float>& v) {
    if constexpr (std::endian::native == std::endian::little) {
      raw(v.data(), v.size() * sizeof(float));
    } else {
      for (float f : v) scalar(f);
    }
  }
  std::vector<unsigned char>& buffer() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}

  template <class U>
  U scalar() {
    need(sizeof(U));
    unsigned char b[sizeof(U)];
    std::memcpy(b, p_ + pos_, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
    pos_ += sizeof(U);
    U v;
    std::memcpy(&v, b, sizeof(U));
    return v;
  }
  std::string bytes() {
    const auto n = scalar<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
    pos_ += n;
    return s;
  }
  void floats(std::vector<float>& v) {
    need(v.size() * sizeof(float));
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(v.data(), p_ + pos_, v.size() * sizeof(float));
      pos_ += v.size() * sizeof(float);
    } else {
      for (auto& f : v) f = scalar<float>();
    }
  }
  bool done() const { return pos_ == n_; }

 private:
  void need(std::size_t k) const {
    if (pos_ + k > n_) throw CheckpointError(CheckpointError::Kind::format, "checkpoint: unexpected end of data");
  }
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

inline void write_tensor(Writer& w, const num::Tensor<float>& t) {
  w.scalar<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
  for (int d : t.shape()) w.scalar<std::int32_t>(d);
  w.floats(t.values());
}

inline num::Tensor<float> read_tensor(Reader& r) {
  const int rank = r.scalar<std::uint8_t>();
  num::Shape s(rank);
  for (auto& d : s) {
    d = r.scalar<std::int32_t>();
    if (d < 0 || d > (1 << 24)) throw CheckpointError(CheckpointError::Kind::format, "checkpoint: bad tensor shape");
  }
  num::Tensor<float> t(s);
  r.floats(t.values());
  return t;
}

inline std::uint32_t crc32_of(const unsigned char* p, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
  detail::Writer w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.scalar<std::uint32_t>(kCheckpointVersion);
  w.bytes(c.arch.descriptor());
  w.bytes(c.config.dump());
  w.scalar<std::uint64_t>(c.seed);
  w.scalar<std::int64_t>(c.step);
  w.bytes(c.rng_state);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(c.params.size()));
  for (const auto& [name, t] : c.params) {
    w.bytes(name);
    detail::write_tensor(w, t);
  }
  const auto& o = c.adam.options;
  w.scalar<std::int64_t>(c.adam.step);
  w.scalar<double>(o.lr);
  w.scalar<double>(o.beta1);
  w.scalar<double>(o.beta2);
  w.scalar<double>(o.eps);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(c.adam.m.size()));
  for (std::size_t i = 0; i < c.adam.m.size(); ++i) {
    detail::write_tensor(w, c.adam.m[i]);
    detail::write_tensor(w, c.adam.v[i]);
  }
  auto& buf = w.buffer();
  const auto crc = detail::crc32_of(buf.data(), buf.size());
  w.scalar<std::uint32_t>(crc);
  return std::move(buf);
}

/// Decodes a checkpoint. With `expected`, a different architecture is an
/// error rather than silently loaded.
inline Checkpoint decode_checkpoint(const std::vector<unsigned char>& buf,
                                    const model::Architecture* expected = nullptr) {
  using K = CheckpointError::Kind;
  if (buf.size() < sizeof kCheckpointMagic + 8 || std::memcmp(buf.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw CheckpointError(K::format, "checkpoint: not a checkpoint file");
  detail::Reader head(buf.data() + sizeof kCheckpointMagic, 4);
  const auto version = head.scalar<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError(K::version, "checkpoint: format version " + std::to_string(version) + ", expected " +
                                          std::to_string(kCheckpointVersion));
  detail::Reader tail(buf.data() + buf.size() - 4, 4);
  if (detail::crc32_of(buf.data(), buf.size() - 4) != tail.scalar<std::uint32_t>())
    throw CheckpointError(K::checksum, "checkpoint: checksum mismatch (file is corrupted or truncated)");

  detail::Reader r(buf.data() + sizeof kCheckpointMagic + 4, buf.size() - sizeof kCheckpointMagic - 8);
  Checkpoint c;
  try {
    c.arch = model::Architecture::from_json(nlohmann::json::parse(r.bytes()));
    c.config = nlohmann::json::parse(r.bytes());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(K::format, std::string("checkpoint: bad header: ") + e.what());
  }
  if (expected && !(c.arch == *expected))
    throw CheckpointError(K::architecture, "checkpoint: architecture mismatch: file has " + c.arch.descriptor() +
                                               ", expected " + expected->descriptor());
  c.seed = r.scalar<std::uint64_t>();
  c.step = r.scalar<std::int64_t>();
  c.rng_state = r.bytes();
  const auto n = r.scalar<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto name = r.bytes();
    c.params.add(name, detail::read_tensor(r));
  }
  c.adam.step = r.scalar<std::int64_t>();
  c.adam.options.lr = r.scalar<double>();
  c.adam.options.beta1 = r.scalar<double>();
  c.adam.options.beta2 = r.scalar<double>();
  c.adam.options.eps = r.scalar<double>();
  const auto moments = r.scalar<std::uint32_t>();
  for (std::uint32_t i = 0; i < moments; ++i) {
    c.adam.m.push_back(detail::read_tensor(r));
    c.adam.v.push_back(detail::read_tensor(r));
  }
  if (!r.done()) throw CheckpointError(K::format, "checkpoint: trailing bytes");
  return c;
}

/// Writes to a temporary file in the same directory, then renames it over
/// `path`, so readers never see a partial checkpoint.
inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(c);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "checkpoint: cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "checkpoint: write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError(CheckpointError::Kind::io, "checkpoint: cannot rename to " + path.string() + ": " + ec.message());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, const model::Architecture* expected = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::io, "checkpoint: cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(buf, expected);
}

}  // namespace lila::io
