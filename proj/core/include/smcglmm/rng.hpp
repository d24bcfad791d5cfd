#pragma once

#include <cmath>
#include <cstdint>

#include "smcglmm/errors.hpp"

namespace smcglmm {

// Counter-based RNG built on Philox4x64-10 (Salmon et al.; same variant and
// constants as numpy's Philox bit generator, which the unit tests cross-check
// against). Streams are addressed by (seed, domain, id, stage): every particle
// gets its own stream at every stage, derived from the single run seed alone,
// so results are bitwise reproducible no matter how particles are scheduled
// across worker threads.

struct Philox4x64 {
  static constexpr std::uint64_t kMult0 = 0xD2E7470EE14C6C93ull;
  static constexpr std::uint64_t kMult1 = 0xCA5A826395121157ull;
  static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73Bull;

  static void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                      std::uint64_t& lo) {
    const unsigned __int128 p =
        static_cast<unsigned __int128>(a) * static_cast<unsigned __int128>(b);
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
  }

  // 10-round block function: 4x64 counter, 2x64 key -> 4x64 output.
  static void block(const std::uint64_t ctr_in[4], const std::uint64_t key_in[2],
                    std::uint64_t out[4]) {
    std::uint64_t c0 = ctr_in[0], c1 = ctr_in[1], c2 = ctr_in[2], c3 = ctr_in[3];
    std::uint64_t k0 = key_in[0], k1 = key_in[1];
    for (int round = 0; round < 10; ++round) {
      if (round != 0) {
        k0 += kWeyl0;
        k1 += kWeyl1;
      }
      std::uint64_t hi0, lo0, hi1, lo1;
      mulhilo(kMult0, c0, hi0, lo0);
      mulhilo(kMult1, c2, hi1, lo1);
      const std::uint64_t n0 = hi1 ^ c1 ^ k0;
      const std::uint64_t n1 = lo1;
      const std::uint64_t n2 = hi0 ^ c3 ^ k1;
      const std::uint64_t n3 = lo0;
      c0 = n0;
      c1 = n1;
      c2 = n2;
      c3 = n3;
    }
    out[0] = c0;
    out[1] = c1;
    out[2] = c2;
    out[3] = c3;
  }
};

// Stream-address domains. Different algorithms draw from disjoint counter
// subspaces of the same run seed.
enum class RngDomain : std::uint64_t {
  init = 1,       // pi_0 initial particle draws / importance-sampler draws
  move = 2,       // MH + Gibbs kernel sweeps (SMC move and baseline chains)
  resample = 3,   // stratified resampling uniforms
  simulate = 4,   // data generators
  generic = 5,    // tests, ad hoc
};

class RngStream {
 public:
  RngStream(std::uint64_t seed, RngDomain domain, std::uint64_t stage,
            std::uint64_t id)
      : key_{seed, static_cast<std::uint64_t>(domain)},
        base_{0, 0, id, stage},
        block_(0),
        pos_(4) {}

  std::uint64_t next_u64() {
    if (pos_ == 4) {
      std::uint64_t ctr[4] = {block_, base_[1], base_[2], base_[3]};
      Philox4x64::block(ctr, key_, buf_);
      ++block_;
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe to pass to log().
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Box-Muller. Two uniforms per call; no cached spare, so the stream
  // position is a simple function of the number of calls.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  double exponential() { return -std::log(uniform_open()); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Gamma(shape, scale 1) via Marsaglia-Tsang squeeze; shape < 1 boosted
  // through the Gamma(shape+1) * U^(1/shape) identity.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw ValidationError("gamma: shape must be positive");
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      return g * std::pow(uniform_open(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Knuth-style exponential-interarrival Poisson; adequate for the modest
  // rates the simulators produce.
  long poisson(double lambda) {
    if (!(lambda >= 0.0) || lambda > 500.0)
      throw ValidationError("poisson: rate out of supported range [0, 500]");
    long k = 0;
    double sum = 0.0;
    for (;;) {
      sum += exponential();
      if (sum > lambda) return k;
      ++k;
    }
  }

 private:
  std::uint64_t key_[2];
  std::uint64_t base_[4];  // {unused block slot, domain, id, stage}
  std::uint64_t block_;
  std::uint64_t buf_[4];
  int pos_;
};

inline RngStream particle_stream(std::uint64_t seed, std::uint64_t stage,
                                 std::uint64_t particle) {
  return RngStream(seed, RngDomain::move, stage, particle);
}

inline RngStream init_stream(std::uint64_t seed, std::uint64_t particle) {
  return RngStream(seed, RngDomain::init, 0, particle);
}

inline RngStream resample_stream(std::uint64_t seed, std::uint64_t stage) {
  return RngStream(seed, RngDomain::resample, stage, 0);
}

inline RngStream simulate_stream(std::uint64_t seed) {
  return RngStream(seed, RngDomain::simulate, 0, 0);
}

}  // namespace smcglmm
