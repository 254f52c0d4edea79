#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "stovlab/field.hpp"

namespace stovlab {

// Basis: first component S (electric field along x), second P (along y).
// Angles of optical elements are measured from x, counterclockwise looking
// along +z.

enum class PolLabel { S, P, H, V, D, A, R, L };

inline const char* to_string(PolLabel l) {
  switch (l) {
    case PolLabel::S: return "S";
    case PolLabel::P: return "P";
    case PolLabel::H: return "H";
    case PolLabel::V: return "V";
    case PolLabel::D: return "D";
    case PolLabel::A: return "A";
    case PolLabel::R: return "R";
    case PolLabel::L: return "L";
  }
  return "?";
}

inline PolLabel pol_from_string(const std::string& s) {
  static const std::array<PolLabel, 8> all{PolLabel::S, PolLabel::P, PolLabel::H, PolLabel::V,
                                           PolLabel::D, PolLabel::A, PolLabel::R, PolLabel::L};
  for (PolLabel l : all)
    if (s == to_string(l)) return l;
  throw std::invalid_argument("unknown polarization label '" + s + "' (expected S,P,H,V,D,A,R,L)");
}

struct JonesVector {
  cplx s{0.0, 0.0};
  cplx p{0.0, 0.0};

  double power() const { return std::norm(s) + std::norm(p); }
  JonesVector normalized() const {
    const double n = std::sqrt(power());
    if (n == 0.0) throw std::invalid_argument("jones vector: cannot normalize zero vector");
    return {s / n, p / n};
  }
};

/// <a|b>
inline cplx braket(const JonesVector& a, const JonesVector& b) {
  return std::conj(a.s) * b.s + std::conj(a.p) * b.p;
}

/// |<a|b>| / (|a||b|), i.e. 1 for states equal up to a global phase.
inline double alignment(const JonesVector& a, const JonesVector& b) {
  const double na = std::sqrt(a.power()), nb = std::sqrt(b.power());
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::abs(braket(a, b)) / (na * nb);
}

/// R, L ~ P +/- iS; D, A ~ P +/- S; H = P; V = S.
inline JonesVector ket(PolLabel label) {
  const double r = 1.0 / std::numbers::sqrt2;
  switch (label) {
    case PolLabel::S:
    case PolLabel::V: return {{1.0, 0.0}, {0.0, 0.0}};
    case PolLabel::P:
    case PolLabel::H: return {{0.0, 0.0}, {1.0, 0.0}};
    case PolLabel::D: return {{r, 0.0}, {r, 0.0}};
    case PolLabel::A: return {{-r, 0.0}, {r, 0.0}};
    case PolLabel::R: return {{0.0, r}, {r, 0.0}};
    case PolLabel::L: return {{0.0, -r}, {r, 0.0}};
  }
  throw std::invalid_argument("ket: invalid label");
}

/// 2x2 matrix acting on (s, p).
struct JonesMatrix {
  std::array<cplx, 4> m{cplx{1.0}, cplx{0.0}, cplx{0.0}, cplx{1.0}};

  cplx operator()(int r, int c) const { return m[static_cast<std::size_t>(2 * r + c)]; }

  JonesVector operator*(const JonesVector& v) const {
    return {m[0] * v.s + m[1] * v.p, m[2] * v.s + m[3] * v.p};
  }
  JonesMatrix operator*(const JonesMatrix& o) const {
    return {{m[0] * o.m[0] + m[1] * o.m[2], m[0] * o.m[1] + m[1] * o.m[3],
             m[2] * o.m[0] + m[3] * o.m[2], m[2] * o.m[1] + m[3] * o.m[3]}};
  }
  JonesMatrix adjoint() const {
    return {{std::conj(m[0]), std::conj(m[2]), std::conj(m[1]), std::conj(m[3])}};
  }

  static JonesMatrix identity() { return {}; }
};

namespace detail {

inline JonesMatrix rotation(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{cplx{c}, cplx{-s}, cplx{s}, cplx{c}}};
}

inline JonesMatrix rotated_diag(double angle, cplx d0, cplx d1) {
  const JonesMatrix d{{d0, cplx{0.0}, cplx{0.0}, d1}};
  return rotation(angle) * d * rotation(-angle);
}

}  // namespace detail

enum class WaveplateKind { half, quarter };

/// R(a) diag(1, e^{i retardance}) R(-a); the fast axis sits at angle a.
inline JonesMatrix waveplate(WaveplateKind kind, double fast_axis_angle) {
  const double retardance = kind == WaveplateKind::half ? std::numbers::pi : std::numbers::pi / 2.0;
  return detail::rotated_diag(fast_axis_angle, cplx{1.0}, std::polar(1.0, retardance));
}

inline JonesMatrix linear_polarizer(double axis_angle) {
  return detail::rotated_diag(axis_angle, cplx{1.0}, cplx{0.0});
}

/// Pair of co-registered scalar envelopes for the S and P components.
class VectorField {
public:
  VectorField(ScalarField s_field, ScalarField p_field)
      : s_(std::move(s_field)), p_(std::move(p_field)) {
    detail::require_compatible(s_, p_, "vector field");
  }

  const ScalarField& s_field() const { return s_; }
  const ScalarField& p_field() const { return p_; }
  const GridSpec& grid() const { return s_.grid(); }
  double y0() const { return s_.y0(); }

  JonesVector at(std::size_t i, std::size_t j) const { return {s_(i, j), p_(i, j)}; }

private:
  ScalarField s_;
  ScalarField p_;
};

/// Scalar envelope times a uniform polarization.
inline VectorField make_vector_field(const ScalarField& f, const JonesVector& pol) {
  return VectorField(scale(f, pol.s), scale(f, pol.p));
}

inline double total_power(const VectorField& vf) {
  return total_power(vf.s_field()) + total_power(vf.p_field());
}

inline RealImage intensity_map(const VectorField& vf) {
  RealImage out = intensity_map(vf.s_field());
  const RealImage p = intensity_map(vf.p_field());
  for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] += p.data()[k];
  return out;
}

inline VectorField apply_jones(const JonesMatrix& m, const VectorField& vf) {
  const GridSpec& g = vf.grid();
  ComplexGrid s(g.n_u(), g.n_w()), p(g.n_u(), g.n_w());
  const auto& src_s = vf.s_field().values().data();
  const auto& src_p = vf.p_field().values().data();
  for (std::size_t k = 0; k < src_s.size(); ++k) {
    const JonesVector out = m * JonesVector{src_s[k], src_p[k]};
    s.data()[k] = out.s;
    p.data()[k] = out.p;
  }
  return VectorField(ScalarField(g, std::move(s), vf.y0(), vf.s_field().meta()),
                     ScalarField(g, std::move(p), vf.y0(), vf.p_field().meta()));
}

/// s1 = |p|^2 - |s|^2 (P minus S), s2 = D minus A, s3 = R minus L.
struct StokesSample {
  double s0 = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;

  double degree_of_polarization() const {
    return s0 > 0.0 ? std::sqrt(s1 * s1 + s2 * s2 + s3 * s3) / s0 : 0.0;
  }
};

inline StokesSample stokes(const JonesVector& v) {
  const cplx cross = std::conj(v.p) * v.s;
  return {std::norm(v.s) + std::norm(v.p), std::norm(v.p) - std::norm(v.s), 2.0 * cross.real(),
          2.0 * cross.imag()};
}

inline StokesSample stokes_at(const VectorField& vf, std::size_t i, std::size_t j) {
  if (i >= vf.grid().n_u() || j >= vf.grid().n_w())
    throw std::out_of_range("stokes_at: index (" + std::to_string(i) + "," + std::to_string(j) +
                            ") outside grid");
  return stokes(vf.at(i, j));
}

/// Incoherent integration over w, one sample per u row: what a slow detector
/// behind polarization optics records.
inline std::vector<StokesSample> time_averaged_stokes_profile(const VectorField& vf) {
  const GridSpec& g = vf.grid();
  std::vector<StokesSample> out(g.n_u());
  for (std::size_t i = 0; i < g.n_u(); ++i) {
    StokesSample acc;
    for (std::size_t j = 0; j < g.n_w(); ++j) {
      const StokesSample s = stokes(vf.at(i, j));
      acc.s0 += s.s0;
      acc.s1 += s.s1;
      acc.s2 += s.s2;
      acc.s3 += s.s3;
    }
    acc.s0 *= g.dw();
    acc.s1 *= g.dw();
    acc.s2 *= g.dw();
    acc.s3 *= g.dw();
    out[i] = acc;
  }
  return out;
}

}  // namespace stovlab
