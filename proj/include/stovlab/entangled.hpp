#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stovlab/field.hpp"
#include "stovlab/polarization.hpp"

namespace stovlab {

struct StateTerm {
  int q = 0;
  JonesVector pol;
  cplx coeff{1.0, 0.0};
  std::string pol_label;  // empty when pol was given explicitly

  StateTerm(int charge, PolLabel label, cplx c = {1.0, 0.0})
      : q(charge), pol(ket(label)), coeff(c), pol_label(to_string(label)) {}
  StateTerm(int charge, JonesVector v, cplx c = {1.0, 0.0}) : q(charge), pol(v), coeff(c) {}
};

/// sum_k c_k |q_k>|pol_k>, with exp(i delta) multiplying the second term.
/// params supplies the shared mode, eta and y0; its q is ignored.
struct EntangledStateSpec {
  std::vector<StateTerm> terms;
  double delta = 0.0;
  StovParams params;

  void validate() const {
    if (terms.empty()) throw std::invalid_argument("entangled state: no terms");
    for (const StateTerm& t : terms) {
      if (!std::isfinite(t.coeff.real()) || !std::isfinite(t.coeff.imag()) || std::abs(t.coeff) == 0.0)
        throw std::invalid_argument("entangled state: term coefficients must be finite and nonzero");
      if (!(t.pol.power() > 0.0)) throw std::invalid_argument("entangled state: zero polarization vector");
    }
    if (!std::isfinite(delta)) throw std::invalid_argument("entangled state: delta must be finite");
    params.validate();
  }

  /// Coefficient of term k including the relative phase.
  cplx effective_coeff(std::size_t k) const {
    return k == 1 ? terms[k].coeff * std::polar(1.0, delta) : terms[k].coeff;
  }
};

/// The charge-polarization pair |+q>|R> + e^{i delta}|-q>|L>.
inline EntangledStateSpec vortex_pair_state(int q, double delta, StovParams params = {}) {
  return {{StateTerm(q, PolLabel::R), StateTerm(-q, PolLabel::L)}, delta, params};
}

inline VectorField realize(const EntangledStateSpec& spec, const GridSpec& grid) {
  spec.validate();
  ComplexGrid s(grid.n_u(), grid.n_w()), p(grid.n_u(), grid.n_w());
  std::string label;
  for (std::size_t k = 0; k < spec.terms.size(); ++k) {
    const StateTerm& t = spec.terms[k];
    StovParams mp = spec.params;
    mp.q = t.q;
    const ScalarField mode = synthesize_mode(mp, grid);
    const cplx c = spec.effective_coeff(k);
    const cplx cs = c * t.pol.s, cp = c * t.pol.p;
    const auto& src = mode.values().data();
    for (std::size_t n = 0; n < src.size(); ++n) {
      s.data()[n] += cs * src[n];
      p.data()[n] += cp * src[n];
    }
    if (!label.empty()) label += " + ";
    label += "|" + std::to_string(t.q) + ">|" + (t.pol_label.empty() ? "jones" : t.pol_label) + ">";
  }
  FieldMeta meta{to_string(spec.params.mode), 0, false, label};
  return VectorField(ScalarField(grid, std::move(s), spec.params.y0, meta),
                     ScalarField(grid, std::move(p), spec.params.y0, meta));
}

/// Local polarization of |+1>|R> +/- |-1>|L> at azimuth phi:
/// in phase cos(phi) P - sin(phi) S, out of phase sin(phi) P + cos(phi) S.
inline JonesVector analytic_polarization(double phi, Parity parity) {
  phi = std::remainder(phi, 2.0 * std::numbers::pi);
  const double c = std::cos(phi), s = std::sin(phi);
  if (parity == Parity::in_phase) return {{-s, 0.0}, {c, 0.0}};
  return {{c, 0.0}, {s, 0.0}};
}

struct OracleSample {
  std::size_t i = 0;
  std::size_t j = 0;
  double u = 0.0;
  double w = 0.0;
  double phi = 0.0;
  double alignment = 0.0;
  bool degenerate = false;
};

struct OracleReport {
  Parity parity = Parity::in_phase;
  int charge = 1;
  bool extrapolated = false;  // |q| != 1: closed form evaluated at q*phi
  std::vector<OracleSample> samples;
  std::size_t checked = 0;
  std::size_t flagged = 0;
  double min_alignment = 1.0;

  bool all_within(double tol) const { return checked > 0 && min_alignment >= 1.0 - tol; }
};

namespace detail {

struct FamilyInfo {
  int q;
  Parity parity;
};

// Folds coefficient and ket phases into one relative phase and checks the
// spec is |+q>|R> + e^{i phase}|-q>|L> with equal weights.
inline FamilyInfo classify_vortex_pair(const EntangledStateSpec& spec) {
  const auto fail = [](const std::string& why) {
    throw std::invalid_argument("oracle_check: spec is not the |+q>|R> + e^{i delta}|-q>|L> family (" + why + ")");
  };
  if (spec.terms.size() != 2) fail("need exactly two terms");
  const StateTerm& a = spec.terms[0];
  const StateTerm& b = spec.terms[1];
  if (a.q <= 0 || b.q != -a.q) fail("charges must be +q then -q");
  constexpr double tol = 1e-12;
  if (alignment(ket(PolLabel::R), a.pol) < 1.0 - tol) fail("first term must be R polarized");
  if (alignment(ket(PolLabel::L), b.pol) < 1.0 - tol) fail("second term must be L polarized");
  const cplx ca = spec.effective_coeff(0) * braket(ket(PolLabel::R), a.pol);
  const cplx cb = spec.effective_coeff(1) * braket(ket(PolLabel::L), b.pol);
  if (std::abs(std::abs(ca) - std::abs(cb)) > 1e-12 * std::abs(ca)) fail("terms must have equal weight");
  const double rel = std::arg(cb / ca);
  if (std::abs(rel) < 1e-9) return {a.q, Parity::in_phase};
  if (std::abs(std::abs(rel) - std::numbers::pi) < 1e-9) return {a.q, Parity::out_of_phase};
  fail("relative phase must be 0 or pi");
  return {};
}

}  // namespace detail

/// Compares the realized local polarization against the closed form at each
/// sample. Samples where the field is below 1e-15 of its peak are flagged
/// rather than scored.
inline OracleReport oracle_check(const EntangledStateSpec& spec, const GridSpec& grid,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& samples) {
  const detail::FamilyInfo fam = detail::classify_vortex_pair(spec);
  const VectorField vf = realize(spec, grid);
  double peak = 0.0;
  for (std::size_t i = 0; i < grid.n_u(); ++i)
    for (std::size_t j = 0; j < grid.n_w(); ++j) peak = std::max(peak, std::sqrt(vf.at(i, j).power()));

  OracleReport report;
  report.parity = fam.parity;
  report.charge = fam.q;
  report.extrapolated = fam.q != 1;
  for (const auto& [i, j] : samples) {
    if (i >= grid.n_u() || j >= grid.n_w()) throw std::out_of_range("oracle_check: sample index outside grid");
    OracleSample s;
    s.i = i;
    s.j = j;
    s.u = grid.u(i);
    s.w = grid.w(j);
    s.phi = std::atan2(s.w, s.u);
    const JonesVector actual = vf.at(i, j);
    if (std::sqrt(actual.power()) < 1e-15 * peak) {
      s.degenerate = true;
      ++report.flagged;
    } else {
      s.alignment = alignment(analytic_polarization(fam.q * s.phi, fam.parity), actual);
      report.min_alignment = std::min(report.min_alignment, s.alignment);
      ++report.checked;
    }
    report.samples.push_back(s);
  }
  return report;
}

/// Singular values of the charge x {R, L} coefficient matrix, descending.
/// Two nonzero values witness non-separability of charge and polarization.
inline std::array<double, 2> coefficient_singular_values(const EntangledStateSpec& spec) {
  spec.validate();
  std::map<int, std::array<cplx, 2>> rows;
  for (std::size_t k = 0; k < spec.terms.size(); ++k) {
    const StateTerm& t = spec.terms[k];
    const cplx c = spec.effective_coeff(k);
    auto& row = rows[t.q];
    row[0] += c * braket(ket(PolLabel::R), t.pol);
    row[1] += c * braket(ket(PolLabel::L), t.pol);
  }
  // Gram matrix G = M^dagger M is 2x2 Hermitian.
  double g00 = 0.0, g11 = 0.0;
  cplx g01{0.0, 0.0};
  for (const auto& [q, row] : rows) {
    g00 += std::norm(row[0]);
    g11 += std::norm(row[1]);
    g01 += std::conj(row[0]) * row[1];
  }
  const double tr = g00 + g11;
  const double det = g00 * g11 - std::norm(g01);
  const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  const double l0 = 0.5 * tr + disc;
  const double l1 = std::max(0.0, 0.5 * tr - disc);
  // l1 via det/l0 keeps precision when the spread is large.
  const double l1_stable = l0 > 0.0 ? std::max(0.0, det / l0) : l1;
  return {std::sqrt(l0), std::sqrt(l1_stable)};
}

inline int schmidt_rank(const EntangledStateSpec& spec, double rel_tol = 1e-12) {
  const auto sv = coefficient_singular_values(spec);
  if (sv[0] == 0.0) return 0;
  return sv[1] > rel_tol * sv[0] ? 2 : 1;
}

}  // namespace stovlab
