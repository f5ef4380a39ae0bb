#pragma once

// Synthetic page-access traces and the FQTR binary trace format.
//
// FQTR layout (all little-endian):
//   offset 0   char[4]  magic "FQTR"
//   offset 4   u32      version (1)
//   offset 8   u64      n_pages
//   offset 16  u64      n_accesses
//   offset 24  u64[n_accesses] page ids, each < n_pages

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "freqtier/hash.hpp"
#include "freqtier/random.hpp"
#include "freqtier/sketch.hpp"

namespace freqtier {

struct Zipf {
  double alpha = 1.0;
};
struct Uniform {};
struct Hotset {
  double hot_fraction = 0.1;
  double hot_share = 0.9;
};
using BaseDistribution = std::variant<Zipf, Uniform, Hotset>;

/// Accesses before `shift_at` go to the lower half of the page space, the
/// rest to the upper half; each half follows `inner` rescaled to its size.
struct PhaseShift {
  BaseDistribution inner = Zipf{};
  std::uint64_t shift_at = 0;
};
using Distribution = std::variant<Zipf, Uniform, Hotset, PhaseShift>;

struct TraceSpec {
  Distribution distribution = Zipf{};
  std::uint64_t n_pages = 1;
  std::uint64_t n_accesses = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

namespace detail {

inline void validate_base(const BaseDistribution& dist, std::uint64_t n_pages) {
  if (const auto* z = std::get_if<Zipf>(&dist)) {
    if (!(z->alpha > 0.0) || !std::isfinite(z->alpha))
      throw std::invalid_argument("zipf alpha must be > 0");
  } else if (const auto* h = std::get_if<Hotset>(&dist)) {
    if (!(h->hot_fraction > 0.0 && h->hot_fraction < 1.0))
      throw std::invalid_argument("hot_fraction must lie in (0, 1)");
    if (!(h->hot_share > 0.0 && h->hot_share < 1.0))
      throw std::invalid_argument("hot_share must lie in (0, 1)");
    if (n_pages < 2) throw std::invalid_argument("hotset needs at least 2 pages");
  }
}

}  // namespace detail

inline void TraceSpec::validate() const {
  if (n_pages < 1) throw std::invalid_argument("n_pages must be at least 1");
  if (const auto* shift = std::get_if<PhaseShift>(&distribution)) {
    if (n_pages < 2) throw std::invalid_argument("phase-shift needs at least 2 pages");
    detail::validate_base(shift->inner, n_pages / 2);
    if (shift->shift_at > n_accesses)
      throw std::invalid_argument("shift_at must not exceed n_accesses");
  } else {
    std::visit(
        [&](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (!std::is_same_v<D, PhaseShift>) detail::validate_base(d, n_pages);
        },
        distribution);
  }
}

/// Vose alias table: O(1) exact sampling from a discrete distribution.
class AliasTable {
 public:
  explicit AliasTable(std::span<const double> weights) {
    const std::size_t n = weights.size();
    if (n == 0) throw std::invalid_argument("alias table needs at least one weight");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    prob_.resize(n);
    alias_.resize(n);
    std::vector<double> scaled(n);
    std::vector<std::uint64_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = weights[i] * static_cast<double>(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::uint64_t s = small.back();
      small.pop_back();
      const std::uint64_t l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (const auto i : large) prob_[i] = 1.0, alias_[i] = i;
    for (const auto i : small) prob_[i] = 1.0, alias_[i] = i;
  }

  std::uint64_t sample(Rng& rng) const {
    const std::uint64_t column = uniform_below(rng, prob_.size());
    return uniform01(rng) < prob_[column] ? column : alias_[column];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::uint64_t> alias_;
};

/// Draws page ids in [offset, offset + n_pages) from one base distribution.
class PageSampler {
 public:
  PageSampler(const BaseDistribution& dist, std::uint64_t n_pages, std::uint64_t offset,
              std::uint64_t perm_seed)
      : dist_(dist), n_pages_(n_pages), offset_(offset) {
    if (std::holds_alternative<Uniform>(dist_)) return;
    // Popularity rank -> page id, so hot pages are scattered over the space.
    permutation_.resize(n_pages_);
    std::iota(permutation_.begin(), permutation_.end(), PageId{0});
    Rng perm_rng(perm_seed);
    shuffle(std::span<PageId>(permutation_), perm_rng);
    if (const auto* z = std::get_if<Zipf>(&dist_)) {
      std::vector<double> weights(n_pages_);
      for (std::uint64_t r = 0; r < n_pages_; ++r)
        weights[r] = std::pow(static_cast<double>(r + 1), -z->alpha);
      alias_.emplace_back(weights);
    } else {
      const auto& h = std::get<Hotset>(dist_);
      hot_pages_ = std::clamp<std::uint64_t>(
          static_cast<std::uint64_t>(h.hot_fraction * static_cast<double>(n_pages_)), 1,
          n_pages_ - 1);
    }
  }

  PageId sample(Rng& rng) const {
    if (std::holds_alternative<Uniform>(dist_)) return offset_ + uniform_below(rng, n_pages_);
    if (!alias_.empty()) return offset_ + permutation_[alias_.front().sample(rng)];
    const double share = std::get<Hotset>(dist_).hot_share;
    const std::uint64_t rank = uniform01(rng) < share
                                   ? uniform_below(rng, hot_pages_)
                                   : hot_pages_ + uniform_below(rng, n_pages_ - hot_pages_);
    return offset_ + permutation_[rank];
  }

  /// Page id holding popularity rank `rank` (0 = hottest).
  PageId page_of_rank(std::uint64_t rank) const {
    return offset_ + (permutation_.empty() ? rank : permutation_[rank]);
  }

 private:
  BaseDistribution dist_;
  std::uint64_t n_pages_;
  std::uint64_t offset_;
  std::uint64_t hot_pages_ = 0;
  std::vector<PageId> permutation_;
  std::vector<AliasTable> alias_;
};

/// Deterministic stream of page ids for a TraceSpec.
class TraceGenerator {
 public:
  explicit TraceGenerator(const TraceSpec& spec) : spec_(spec), rng_(spec.seed) {
    spec_.validate();
    if (const auto* shift = std::get_if<PhaseShift>(&spec_.distribution)) {
      const std::uint64_t half = spec_.n_pages / 2;
      shift_at_ = shift->shift_at;
      samplers_.emplace_back(shift->inner, half, 0, mix64(spec_.seed ^ 0x1));
      samplers_.emplace_back(shift->inner, spec_.n_pages - half, half, mix64(spec_.seed ^ 0x2));
    } else {
      shift_at_ = spec_.n_accesses;
      std::visit(
          [&](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            if constexpr (!std::is_same_v<D, PhaseShift>)
              samplers_.emplace_back(d, spec_.n_pages, 0, mix64(spec_.seed ^ 0x1));
          },
          spec_.distribution);
    }
  }

  const TraceSpec& spec() const { return spec_; }
  bool done() const { return position_ >= spec_.n_accesses; }
  std::uint64_t position() const { return position_; }

  PageId next() {
    const auto& sampler = position_ < shift_at_ ? samplers_.front() : samplers_.back();
    ++position_;
    return sampler.sample(rng_);
  }

  const PageSampler& sampler(std::size_t phase) const { return samplers_.at(phase); }

 private:
  TraceSpec spec_;
  Rng rng_;
  std::uint64_t shift_at_ = 0;
  std::uint64_t position_ = 0;
  std::vector<PageSampler> samplers_;
};

struct Trace {
  std::uint64_t n_pages = 1;
  std::vector<PageId> pages;

  std::uint64_t n_accesses() const { return pages.size(); }
  friend bool operator==(const Trace&, const Trace&) = default;
};

inline Trace generate(const TraceSpec& spec) {
  TraceGenerator gen(spec);
  Trace trace;
  trace.n_pages = spec.n_pages;
  trace.pages.reserve(spec.n_accesses);
  while (!gen.done()) trace.pages.push_back(gen.next());
  return trace;
}

/// Fraction of accesses that go to the `fraction` most frequently accessed pages.
inline double top_share(std::span<const PageId> pages, std::uint64_t n_pages, double fraction) {
  if (pages.empty()) return 0.0;
  std::vector<std::uint64_t> counts(n_pages, 0);
  for (const PageId p : pages) ++counts[p];
  const auto top = static_cast<std::size_t>(fraction * static_cast<double>(n_pages));
  std::nth_element(counts.begin(), counts.begin() + top, counts.end(), std::greater<>());
  const std::uint64_t hits = std::accumulate(counts.begin(), counts.begin() + top, std::uint64_t{0});
  return static_cast<double>(hits) / static_cast<double>(pages.size());
}

// ---------------------------------------------------------------------------
// FQTR file format

inline constexpr std::array<char, 4> kTraceMagic = {'F', 'Q', 'T', 'R'};
inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr std::size_t kTraceHeaderBytes = 24;

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed header, truncation or trailing bytes.
class TraceFormatError : public TraceError {
 public:
  TraceFormatError(const std::string& what, std::uint64_t offset)
      : TraceError(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

class BadMagicError : public TraceFormatError {
 public:
  BadMagicError() : TraceFormatError("bad trace magic", 0) {}
};

class TruncatedTraceError : public TraceFormatError {
 public:
  using TraceFormatError::TraceFormatError;
};

/// A record that names a page outside [0, n_pages).
class CorruptTraceError : public TraceError {
 public:
  CorruptTraceError(std::uint64_t record, PageId page, std::uint64_t n_pages)
      : TraceError("corrupt trace: record " + std::to_string(record) + " holds page " +
                   std::to_string(page) + " >= n_pages " + std::to_string(n_pages)),
        record_(record) {}
  std::uint64_t record() const { return record_; }

 private:
  std::uint64_t record_;
};

namespace detail {

inline void store_le(unsigned char* out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

inline std::uint64_t load_le(const unsigned char* in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{in[i]} << (8 * i);
  return v;
}

inline std::array<unsigned char, kTraceHeaderBytes> encode_header(std::uint64_t n_pages,
                                                                  std::uint64_t n_accesses) {
  std::array<unsigned char, kTraceHeaderBytes> h{};
  std::memcpy(h.data(), kTraceMagic.data(), 4);
  store_le(h.data() + 4, kTraceVersion, 4);
  store_le(h.data() + 8, n_pages, 8);
  store_le(h.data() + 16, n_accesses, 8);
  return h;
}

}  // namespace detail

/// Digest state after the header words; feed it the records to finish.
inline Digest64 header_digest(std::uint64_t n_pages, std::uint64_t n_accesses) {
  const auto header = detail::encode_header(n_pages, n_accesses);
  Digest64 d;
  for (int w = 0; w < 3; ++w) d.update(detail::load_le(header.data() + 8 * w, 8));
  return d;
}

/// Digest over the serialized FQTR bytes, taken as little-endian 64-bit words.
inline std::uint64_t trace_digest(std::uint64_t n_pages, std::span<const PageId> pages) {
  Digest64 d = header_digest(n_pages, pages.size());
  for (const PageId p : pages) d.update(p);
  return d.value();
}

inline std::uint64_t trace_digest(const Trace& trace) {
  return trace_digest(trace.n_pages, trace.pages);
}

/// Streams records into an FQTR file whose header is written up front.
class TraceWriter {
 public:
  TraceWriter(const std::string& path, std::uint64_t n_pages, std::uint64_t n_accesses)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc), n_pages_(n_pages),
        expected_(n_accesses) {
    if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
    const auto header = detail::encode_header(n_pages, n_accesses);
    out_.write(reinterpret_cast<const char*>(header.data()), header.size());
    buffer_.reserve(kChunk * 8);
  }

  void push(PageId page) {
    if (page >= n_pages_) throw std::invalid_argument("page id out of range for trace");
    unsigned char bytes[8];
    detail::store_le(bytes, page, 8);
    buffer_.insert(buffer_.end(), bytes, bytes + 8);
    ++written_;
    if (buffer_.size() >= kChunk * 8) flush();
  }

  void close() {
    flush();
    if (written_ != expected_)
      throw std::logic_error("trace writer received " + std::to_string(written_) +
                             " records, header promised " + std::to_string(expected_));
    out_.close();
    if (!out_) throw std::runtime_error("write failed for '" + path_ + "'");
  }

 private:
  static constexpr std::size_t kChunk = 1 << 16;

  void flush() {
    out_.write(reinterpret_cast<const char*>(buffer_.data()),
               static_cast<std::streamsize>(buffer_.size()));
    buffer_.clear();
    if (!out_) throw std::runtime_error("write failed for '" + path_ + "'");
  }

  std::string path_;
  std::ofstream out_;
  std::uint64_t n_pages_;
  std::uint64_t expected_;
  std::uint64_t written_ = 0;
  std::vector<unsigned char> buffer_;
};

inline void write_trace(const Trace& trace, const std::string& path) {
  TraceWriter writer(path, trace.n_pages, trace.pages.size());
  for (const PageId p : trace.pages) writer.push(p);
  writer.close();
}

inline Trace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace '" + path + "'");
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::beg);

  std::array<unsigned char, kTraceHeaderBytes> header{};
  if (file_size < kTraceHeaderBytes) {
    in.read(reinterpret_cast<char*>(header.data()), static_cast<std::streamsize>(file_size));
    if (file_size < 4 || std::memcmp(header.data(), kTraceMagic.data(), 4) != 0)
      throw BadMagicError();
    throw TruncatedTraceError("truncated trace header", file_size);
  }
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (std::memcmp(header.data(), kTraceMagic.data(), 4) != 0)
    throw BadMagicError();
  const auto version = static_cast<std::uint32_t>(detail::load_le(header.data() + 4, 4));
  if (version != kTraceVersion)
    throw TraceFormatError("unsupported trace version " + std::to_string(version), 4);
  Trace trace;
  trace.n_pages = detail::load_le(header.data() + 8, 8);
  if (trace.n_pages == 0) throw TraceFormatError("n_pages must be at least 1", 8);
  const std::uint64_t n_accesses = detail::load_le(header.data() + 16, 8);

  const std::uint64_t body = file_size - kTraceHeaderBytes;
  if (body / 8 < n_accesses) {
    const std::uint64_t complete = body / 8;
    throw TruncatedTraceError("truncated trace body: expected " + std::to_string(n_accesses) +
                               " records, found " + std::to_string(complete) +
                               (body % 8 ? " and a partial record" : ""),
                           kTraceHeaderBytes + complete * 8);
  }
  if (body != n_accesses * 8)
    throw TraceFormatError("trailing bytes after last record", kTraceHeaderBytes + n_accesses * 8);

  trace.pages.resize(n_accesses);
  constexpr std::uint64_t kChunk = 1 << 16;
  std::vector<unsigned char> buf(kChunk * 8);
  for (std::uint64_t done = 0; done < n_accesses;) {
    const std::uint64_t n = std::min(kChunk, n_accesses - done);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 8));
    if (!in) throw TraceFormatError("read failed", kTraceHeaderBytes + done * 8);
    for (std::uint64_t i = 0; i < n; ++i) {
      const PageId p = detail::load_le(buf.data() + 8 * i, 8);
      if (p >= trace.n_pages) throw CorruptTraceError(done + i, p, trace.n_pages);
      trace.pages[done + i] = p;
    }
    done += n;
  }
  return trace;
}

}  // namespace freqtier
