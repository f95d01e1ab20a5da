#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "lattice.hpp"

namespace phi4 {

// Snapshot layout: 32-byte header ("PHI4FLD1", u32 N, f64 M, u8 domain, zero
// padding) followed by little-endian f64 values, x fastest. Domain 0 is a real
// physical field, 1 a Fourier field stored as interleaved (re, im).
enum class Domain : std::uint8_t { physical = 0, fourier = 1 };

namespace detail {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

inline void write_header(std::ofstream& out, const Lattice& lat, Domain d) {
  char h[32] = {};
  std::memcpy(h, "PHI4FLD1", 8);
  std::uint32_t N = std::uint32_t(lat.level());
  double M = lat.side();
  std::memcpy(h + 8, &N, 4);
  std::memcpy(h + 12, &M, 8);
  h[20] = char(d);
  out.write(h, 32);
}

inline std::pair<Lattice, Domain> read_header(std::ifstream& in, const std::filesystem::path& p) {
  char h[32];
  if (!in.read(h, 32) || std::memcmp(h, "PHI4FLD1", 8) != 0)
    throw ConstraintError("snapshot: bad header in " + p.string());
  std::uint32_t N;
  double M;
  std::memcpy(&N, h + 8, 4);
  std::memcpy(&M, h + 12, 8);
  return {Lattice::make(int(N), M), Domain(std::uint8_t(h[20]))};
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConstraintError("snapshot: cannot write " + p.string());
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConstraintError("snapshot: cannot read " + p.string());
  return in;
}

}  // namespace detail

inline void write_field(const std::filesystem::path& p, const Field& f) {
  auto out = detail::open_out(p);
  detail::write_header(out, f.lattice(), Domain::physical);
  out.write(reinterpret_cast<const char*>(f.data()), std::streamsize(8 * f.size()));
}

inline void write_spectrum(const std::filesystem::path& p, const Spectrum& s) {
  auto out = detail::open_out(p);
  detail::write_header(out, s.lattice(), Domain::fourier);
  out.write(reinterpret_cast<const char*>(s.data()), std::streamsize(16 * s.size()));
}

inline Field read_field(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  auto [lat, d] = detail::read_header(in, p);
  if (d != Domain::physical) throw MismatchError("snapshot: expected a physical field in " + p.string());
  Field f(lat);
  if (!in.read(reinterpret_cast<char*>(f.data()), std::streamsize(8 * f.size())))
    throw ConstraintError("snapshot: truncated " + p.string());
  return f;
}

inline Spectrum read_spectrum(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  auto [lat, d] = detail::read_header(in, p);
  if (d != Domain::fourier) throw MismatchError("snapshot: expected a Fourier field in " + p.string());
  Spectrum s(lat);
  if (!in.read(reinterpret_cast<char*>(s.data()), std::streamsize(16 * s.size())))
    throw ConstraintError("snapshot: truncated " + p.string());
  return s;
}

}  // namespace phi4
