#pragma once

#include <cmath>
#include <cstdint>

#include "fft.hpp"
#include "rng.hpp"

namespace phi4 {

// iid N(0, 1) per site, keyed by (seed, member).
inline Field white_field(const Lattice& lat, std::uint64_t seed, std::uint64_t member = 0) {
  Field f(lat);
  CounterRng(seed).fill_normal(f.values(), Purpose::ensemble, member);
  return f;
}

// A trigonometric polynomial with |q_i| <= cutoff (integer modes, frequency q/M)
// and Gaussian coefficients of size (1 + |q|)^-decay. The coefficients depend
// only on (seed, member, q), so the same continuum function is sampled on every
// lattice fine enough to carry it.
inline Field band_limited_field(const Lattice& lat, int cutoff, double decay, std::uint64_t seed,
                                std::uint64_t member) {
  require(2 * cutoff < lat.n_side(), "band_limited_field: cutoff not representable on this lattice");
  CounterRng rng(seed, std::uint32_t(member));
  Spectrum s(lat);
  const int w = 2 * cutoff + 1;
  const double M3 = std::pow(lat.side(), 3);
  for (int c = -cutoff; c <= cutoff; ++c)
    for (int b = -cutoff; b <= cutoff; ++b)
      for (int a = -cutoff; a <= cutoff; ++a) {
        // pair q with -q: draw once for the lexicographically positive member
        int id = ((c + cutoff) * w + (b + cutoff)) * w + (a + cutoff);
        int nid = ((-c + cutoff) * w + (-b + cutoff)) * w + (-a + cutoff);
        int key = std::max(id, nid);
        auto blk = rng.block(Purpose::ensemble, member, std::uint32_t(key));
        auto z = box_muller((std::uint64_t(blk[0]) << 32) | blk[1], (std::uint64_t(blk[2]) << 32) | blk[3]);
        double amp = std::pow(1 + std::sqrt(double(a * a + b * b + c * c)), -decay);
        cplx coef = id == nid ? cplx(z[0], 0) : (id > nid ? cplx(z[0], z[1]) : cplx(z[0], -z[1]));
        s[lat.index(a, b, c)] = M3 * amp * coef / std::sqrt(2.0);
      }
  return inverse_fourier(s);
}

}  // namespace phi4
