#pragma once

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>

#include "lattice.hpp"

namespace phi4 {

namespace detail {

// Plans are created once per grid size (the planner is not thread-safe) and
// then executed with the new-array interface, which is.
class FftPlans {
 public:
  static FftPlans& instance() {
    static FftPlans p;
    return p;
  }

  void run(int n, const cplx* in, cplx* out, int sign) {
    fftw_plan plan = get(n, sign);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
  }

  ~FftPlans() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  fftw_plan get(int n, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_pair(n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::size_t vol = std::size_t(n) * n * n;
    auto* a = fftw_alloc_complex(vol);
    auto* b = fftw_alloc_complex(vol);
    fftw_plan p = fftw_plan_dft_3d(n, n, n, a, b, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(a);
    fftw_free(b);
    plans_[key] = p;
    return p;
  }

  std::mutex mu_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

}  // namespace detail

// Unnormalized DFTs on an n^3 grid, x fastest. sign -1: sum_x f(x) e^{-2 pi i q.x/n}.
inline void dft_raw(int n, const cplx* in, cplx* out, int sign) {
  detail::FftPlans::instance().run(n, in, out, sign);
}

// F f(k) = eps^3 sum_x f(x) e^{-2 pi i k.x}
inline Spectrum forward_fourier(const Field& f) {
  const Lattice& lat = f.lattice();
  std::vector<cplx> in(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) in[i] = f[i];
  Spectrum s(lat);
  dft_raw(lat.n_side(), in.data(), s.data(), FFTW_FORWARD);
  const double c = lat.cell();
  for (auto& z : s.values()) z *= c;
  return s;
}

// F^-1 g(x) = M^-3 sum_k g(k) e^{2 pi i k.x}
inline std::vector<cplx> inverse_fourier_complex(const Spectrum& s) {
  const Lattice& lat = s.lattice();
  std::vector<cplx> out(s.size());
  dft_raw(lat.n_side(), s.data(), out.data(), FFTW_BACKWARD);
  const double c = lat.mode_measure();
  for (auto& z : out) z *= c;
  return out;
}

// Real part of the inverse transform. Callers pass Hermitian spectra.
inline Field inverse_fourier(const Spectrum& s) {
  auto z = inverse_fourier_complex(s);
  Field f(s.lattice());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = z[i].real();
  return f;
}

// Apply a real Fourier multiplier.
inline Field apply_multiplier(const Field& f, const ModeFunction& m) {
  Spectrum s = forward_fourier(f);
  s *= m;
  return inverse_fourier(s);
}

}  // namespace phi4
