#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace phi4 {

// Philox4x32-10 (Salmon et al.), a counter-based generator: the output is a
// pure function of (key, counter), which is what makes runs independent of
// thread count.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                               std::array<std::uint32_t, 2> k) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    std::uint64_t p0 = std::uint64_t(M0) * c[0];
    std::uint64_t p1 = std::uint64_t(M1) * c[2];
    auto hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
    auto hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += W0;
    k[1] += W1;
  }
  return c;
}

// Stream purposes, folded into the counter so different uses never collide.
enum class Purpose : std::uint32_t {
  noise = 1,       // space-time white noise increments
  initial = 2,     // initial / stationary draws
  metropolis = 3,  // proposals and accept tests
  ensemble = 4,    // random test fields
  bootstrap = 5,
};

inline double u64_to_open01(std::uint64_t x) {
  return (double(x >> 11) + 0.5) * 0x1.0p-53;  // in (0,1)
}

inline std::array<double, 2> box_muller(std::uint64_t a, std::uint64_t b) {
  double u1 = u64_to_open01(a), u2 = u64_to_open01(b);
  double r = std::sqrt(-2.0 * std::log(u1));
  double t = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(t), r * std::sin(t)};
}

// Key = master seed; counter = (index, step lo, step hi ^ purpose, chain).
class CounterRng {
 public:
  CounterRng() = default;
  explicit CounterRng(std::uint64_t seed, std::uint32_t chain = 0) : chain_(chain) {
    key_ = {std::uint32_t(seed), std::uint32_t(seed >> 32)};
  }

  std::uint32_t chain() const { return chain_; }
  CounterRng with_chain(std::uint32_t c) const {
    CounterRng r = *this;
    r.chain_ = c;
    return r;
  }

  std::array<std::uint32_t, 4> block(Purpose p, std::uint64_t step, std::uint32_t index) const {
    std::array<std::uint32_t, 4> ctr = {index, std::uint32_t(step),
                                        std::uint32_t(step >> 32) ^ (std::uint32_t(p) << 24),
                                        chain_};
    return philox4x32(ctr, key_);
  }

  // Fill with iid N(0,1); entry i depends only on (seed, chain, purpose, step, i).
  void fill_normal(std::span<double> out, Purpose p, std::uint64_t step) const {
    for (std::size_t i = 0; i < out.size(); i += 2) {
      auto b = block(p, step, std::uint32_t(i / 2));
      auto z = box_muller((std::uint64_t(b[0]) << 32) | b[1], (std::uint64_t(b[2]) << 32) | b[3]);
      out[i] = z[0];
      if (i + 1 < out.size()) out[i + 1] = z[1];
    }
  }

 private:
  std::array<std::uint32_t, 2> key_{0, 0};
  std::uint32_t chain_ = 0;
};

// Sequential draws on top of the counter generator (for Metropolis, bootstrap).
class RngStream {
 public:
  RngStream(const CounterRng& base, Purpose p, std::uint64_t step = 0)
      : base_(base), purpose_(p), step_(step) {}

  std::uint64_t next_u64() {
    if (pos_ == 2) refill();
    return buf_[pos_++];
  }
  double uniform() { return u64_to_open01(next_u64()); }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    auto z = box_muller(next_u64(), next_u64());
    spare_ = z[1];
    has_spare_ = true;
    return z[0];
  }
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  void refill() {
    auto b = base_.block(purpose_, step_, index_++);
    if (index_ == 0) ++step_;
    buf_ = {(std::uint64_t(b[0]) << 32) | b[1], (std::uint64_t(b[2]) << 32) | b[3]};
    pos_ = 0;
  }

  CounterRng base_;
  Purpose purpose_;
  std::uint64_t step_;
  std::uint32_t index_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int pos_ = 2;
  bool has_spare_ = false;
  double spare_ = 0;
};

}  // namespace phi4
