#pragma once

// Addressing of the even space-time lattice {(x, t) : x + t even} and
// stateless, bit-reproducible sampling of oriented edge statuses.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "percweb/error.hpp"

namespace percweb {

struct LatticeSite {
  std::int64_t x = 0;
  std::int64_t t = 0;

  friend bool operator==(const LatticeSite&, const LatticeSite&) = default;
};

inline bool is_even_site(std::int64_t x, std::int64_t t) { return ((x + t) & 1) == 0; }
inline bool is_even_site(const LatticeSite& s) { return is_even_site(s.x, s.t); }

inline void require_even(const LatticeSite& s) {
  if (!is_even_site(s))
    fail(ErrorCode::InvalidSite,
         "site (" + std::to_string(s.x) + ", " + std::to_string(s.t) + ") has odd parity");
}

enum class Direction : std::uint8_t { UpRight = 0, UpLeft = 1 };

struct EdgeRef {
  LatticeSite from;
  Direction dir = Direction::UpRight;

  LatticeSite target() const {
    return {from.x + (dir == Direction::UpRight ? 1 : -1), from.t + 1};
  }

  friend bool operator==(const EdgeRef&, const EdgeRef&) = default;
};

/// Streams reserved per replica. Replica r owns stream ids
/// [r * kStreamsPerReplica, (r + 1) * kStreamsPerReplica); offset 0 is the
/// primary configuration, offsets 1.. are the auxiliary independent
/// configurations used by coupled constructions.
inline constexpr std::uint64_t kStreamsPerReplica = 64;

inline constexpr std::uint64_t replica_stream(std::uint64_t replica, std::uint64_t offset = 0) {
  return replica * kStreamsPerReplica + offset;
}

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// A percolation edge configuration, evaluated lazily.
///
/// The status of an edge is a pure function of (seed, stream_id, x, t, dir)
/// and p. This mixing function is frozen; changing it changes every output
/// of the project:
///
///   key  = splitmix64(splitmix64(seed) ^ stream_id)
///   h    = splitmix64(key ^ uint64(x))
///   h    = splitmix64(h ^ ((uint64(t) << 1) | dir))      dir: 0 up-right, 1 up-left
///   open = (h >> 11) < floor(p * 2^53)
///
/// where splitmix64 is the standard finalizer (golden-gamma increment,
/// multipliers 0xbf58476d1ce4e5b9 and 0x94d049bb133111eb) and integer casts
/// are two's complement.
class Config {
 public:
  Config() = default;
  Config(std::uint64_t seed, double p, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id), p_(p) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::InvalidArgument, "p must lie in [0, 1]");
    key_ = detail::splitmix64(detail::splitmix64(seed) ^ stream_id);
    threshold_ = static_cast<std::uint64_t>(std::ldexp(p, 53));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  double p() const { return p_; }

  Config with_stream(std::uint64_t stream_id) const { return Config(seed_, p_, stream_id); }

  /// Unchecked status lookup; callers guarantee the parity of the site.
  bool is_open(std::int64_t x, std::int64_t t, Direction dir) const {
    std::uint64_t h = detail::splitmix64(key_ ^ static_cast<std::uint64_t>(x));
    h = detail::splitmix64(h ^ ((static_cast<std::uint64_t>(t) << 1) |
                                static_cast<std::uint64_t>(dir)));
    return (h >> 11) < threshold_;
  }

  bool operator()(const EdgeRef& e) const { return is_open(e.from.x, e.from.t, e.dir); }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  double p_ = 0.0;
  std::uint64_t key_ = 0;
  std::uint64_t threshold_ = 0;
};

enum class EdgeStatus : std::uint8_t { Closed = 0, Open = 1 };

inline EdgeStatus edge_status(const Config& cfg, const EdgeRef& e) {
  require_even(e.from);
  return cfg(e) ? EdgeStatus::Open : EdgeStatus::Closed;
}

/// Pearson correlation of the open-indicator sequences of two configurations
/// over the same edge sample.
inline double independence_probe(const Config& a, const Config& b, std::span<const EdgeRef> sample) {
  if (sample.empty()) fail(ErrorCode::InvalidArgument, "empty edge sample");
  double n = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (const auto& e : sample) {
    require_even(e.from);
    const double u = a(e) ? 1.0 : 0.0;
    const double v = b(e) ? 1.0 : 0.0;
    n += 1;
    sa += u;
    sb += v;
    saa += u * u;
    sbb += v * v;
    sab += u * v;
  }
  const double va = saa / n - (sa / n) * (sa / n);
  const double vb = sbb / n - (sb / n) * (sb / n);
  if (va <= 0.0 || vb <= 0.0) fail(ErrorCode::DegenerateSample, "zero-variance indicator sequence");
  return (sab / n - (sa / n) * (sb / n)) / std::sqrt(va * vb);
}

}  // namespace percweb

template <>
struct std::hash<percweb::LatticeSite> {
  std::size_t operator()(const percweb::LatticeSite& s) const noexcept {
    return static_cast<std::size_t>(
        percweb::detail::splitmix64(static_cast<std::uint64_t>(s.x) * 0x9e3779b97f4a7c15ULL ^
                                    static_cast<std::uint64_t>(s.t)));
  }
};
