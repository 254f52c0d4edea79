#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stovlab/grid.hpp"

namespace stovlab {

using cplx = std::complex<double>;
using ComplexGrid = Array2D<cplx>;

enum class ModeKind { canonical, phase_only };

inline const char* to_string(ModeKind m) { return m == ModeKind::canonical ? "canonical" : "phase_only"; }

/// Relative phase 0 (in phase) or pi (out of phase) between two beams.
enum class Parity { in_phase, out_of_phase };

inline const char* to_string(Parity p) { return p == Parity::in_phase ? "in_phase" : "out_of_phase"; }

inline ModeKind mode_from_string(const std::string& s) {
  if (s == "canonical") return ModeKind::canonical;
  if (s == "phase_only") return ModeKind::phase_only;
  throw std::invalid_argument("unknown mode '" + s + "' (expected canonical|phase_only)");
}

/// Parameters of a single spatiotemporal vortex pulse. Only q, eta, mode and
/// y0 shape the sampled envelope; t0, omega0 and vg are carried for reports.
struct StovParams {
  int q = 0;
  double eta = 1.0;
  ModeKind mode = ModeKind::canonical;
  double y0 = 1.0;
  double t0 = 1.0;
  double omega0 = 2.0 * std::numbers::pi * 299792458.0 / 1030e-9;
  double vg = 299792458.0;

  void validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(eta)) throw std::invalid_argument("stov params: eta must be > 0");
    if (!positive(y0)) throw std::invalid_argument("stov params: y0 must be > 0");
    if (!positive(t0) || !positive(omega0) || !positive(vg))
      throw std::invalid_argument("stov params: t0, omega0 and vg must be > 0");
  }
};

struct FieldMeta {
  std::string mode = "canonical";
  int q = 0;
  bool has_q = false;
  std::string label;
};

/// Complex envelope on the (u, w) grid. The y dependence exp(-y^2/y0^2) is
/// separable and only stored as its width.
class ScalarField {
public:
  ScalarField(GridSpec grid, ComplexGrid values, double y0, FieldMeta meta = {})
      : grid_(std::move(grid)), values_(std::move(values)), y0_(y0), meta_(std::move(meta)) {
    if (values_.rows() != grid_.n_u() || values_.cols() != grid_.n_w())
      throw std::invalid_argument("scalar field: value array shape does not match grid");
    if (!(y0_ > 0.0)) throw std::invalid_argument("scalar field: y0 must be > 0");
  }

  const GridSpec& grid() const { return grid_; }
  const ComplexGrid& values() const { return values_; }
  double y0() const { return y0_; }
  const FieldMeta& meta() const { return meta_; }

  cplx operator()(std::size_t i, std::size_t j) const { return values_(i, j); }

private:
  GridSpec grid_;
  ComplexGrid values_;
  double y0_;
  FieldMeta meta_;
};

namespace detail {

inline cplx ipow(cplx base, unsigned n) {
  cplx out{1.0, 0.0};
  for (unsigned k = 0; k < n; ++k) out *= base;
  return out;
}

inline void require_compatible(const ScalarField& a, const ScalarField& b, const char* what) {
  if (!(a.grid() == b.grid())) throw std::invalid_argument(std::string(what) + ": grid mismatch");
  if (a.y0() != b.y0()) throw std::invalid_argument(std::string(what) + ": y0 mismatch");
}

}  // namespace detail

inline double total_power(const ScalarField& f) {
  double acc = 0.0;
  for (const cplx& v : f.values().data()) acc += std::norm(v);
  return acc * f.grid().du() * f.grid().dw();
}

inline ScalarField scale(const ScalarField& f, cplx factor) {
  ComplexGrid out = f.values();
  for (cplx& v : out.data()) v *= factor;
  return ScalarField(f.grid(), std::move(out), f.y0(), f.meta());
}

inline ScalarField normalize(const ScalarField& f) {
  const double p = total_power(f);
  if (!(p > 0.0)) throw std::invalid_argument("normalize: field has zero power");
  return scale(f, cplx{1.0 / std::sqrt(p), 0.0});
}

/// Samples a vortex of charge q. Canonical mode uses the amplitude-weighted
/// polynomial (u + i sgn(q) w)^|q|, phase_only imprints exp(i q atan2(w, u)).
/// The temporal envelope is exp(-(eta w)^2); the phase coordinate is w itself.
inline ScalarField synthesize_mode(const StovParams& params, const GridSpec& grid) {
  params.validate();
  const unsigned order = static_cast<unsigned>(params.q < 0 ? -params.q : params.q);
  const double sgn = params.q < 0 ? -1.0 : 1.0;
  ComplexGrid values(grid.n_u(), grid.n_w());
  for (std::size_t i = 0; i < grid.n_u(); ++i) {
    const double u = grid.u(i);
    for (std::size_t j = 0; j < grid.n_w(); ++j) {
      const double w = grid.w(j);
      const double ew = params.eta * w;
      const double envelope = std::exp(-u * u - ew * ew);
      cplx shape;
      if (params.mode == ModeKind::canonical) {
        shape = detail::ipow(cplx{u, sgn * w}, order);
      } else if (params.q == 0) {
        shape = 1.0;
      } else if (u == 0.0 && w == 0.0) {
        shape = 0.0;  // singular sample on odd grids
      } else {
        const double phi = std::atan2(w, u);
        shape = std::polar(1.0, static_cast<double>(params.q) * phi);
      }
      values(i, j) = shape * envelope;
    }
  }
  FieldMeta meta{to_string(params.mode), params.q, true, "q=" + std::to_string(params.q)};
  return normalize(ScalarField(grid, std::move(values), params.y0, std::move(meta)));
}

/// Pointwise linear combination; deliberately not renormalized.
inline ScalarField superpose(const std::vector<std::pair<ScalarField, cplx>>& terms) {
  if (terms.empty()) throw std::invalid_argument("superpose: no terms");
  const ScalarField& first = terms.front().first;
  ComplexGrid out(first.grid().n_u(), first.grid().n_w());
  std::string label;
  for (const auto& [field, coeff] : terms) {
    detail::require_compatible(first, field, "superpose");
    const auto& src = field.values().data();
    auto& dst = out.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += coeff * src[k];
    if (!label.empty()) label += " + ";
    label += field.meta().label;
  }
  FieldMeta meta{first.meta().mode, 0, false, label};
  return ScalarField(first.grid(), std::move(out), first.y0(), std::move(meta));
}

/// sum conj(f) g du dw
inline cplx inner_product(const ScalarField& f, const ScalarField& g) {
  detail::require_compatible(f, g, "inner_product");
  cplx acc{0.0, 0.0};
  const auto& a = f.values().data();
  const auto& b = g.values().data();
  for (std::size_t k = 0; k < a.size(); ++k) acc += std::conj(a[k]) * b[k];
  return acc * (f.grid().du() * f.grid().dw());
}

inline RealImage intensity_map(const ScalarField& f) {
  RealImage out(f.grid().n_u(), f.grid().n_w());
  const auto& src = f.values().data();
  for (std::size_t k = 0; k < src.size(); ++k) out.data()[k] = std::norm(src[k]);
  return out;
}

/// Pointwise argument in (-pi, pi]. Samples whose magnitude is below 1e-15 of
/// the peak carry NaN (phase undefined).
inline RealImage phase_map(const ScalarField& f) {
  RealImage out(f.grid().n_u(), f.grid().n_w());
  double peak = 0.0;
  for (const cplx& v : f.values().data()) peak = std::max(peak, std::abs(v));
  const auto& src = f.values().data();
  for (std::size_t k = 0; k < src.size(); ++k) {
    const double mag = std::abs(src[k]);
    if (peak == 0.0 || mag < 1e-15 * peak) {
      out.data()[k] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double a = std::arg(src[k]);
    if (a <= -std::numbers::pi) a = std::numbers::pi;
    out.data()[k] = a;
  }
  return out;
}

/// Time-integrated power per u row: sum_w |f|^2 dw.
inline std::vector<double> row_power(const ScalarField& f) {
  const GridSpec& g = f.grid();
  std::vector<double> out(g.n_u(), 0.0);
  for (std::size_t i = 0; i < g.n_u(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < g.n_w(); ++j) acc += std::norm(f(i, j));
    out[i] = acc * g.dw();
  }
  return out;
}

/// What a time-integrating beam profiler records: the z' projection of the
/// intensity, with the separable y envelope restored. Rows are u, columns y.
inline RealImage project_xy(const ScalarField& f, std::size_t n_y, double y_half) {
  if (n_y < 8) throw std::invalid_argument("project_xy: n_y must be >= 8");
  if (!(y_half > 0.0)) throw std::invalid_argument("project_xy: y_half must be > 0");
  const std::vector<double> rows = row_power(f);
  const double dy = 2.0 * y_half / static_cast<double>(n_y);
  const double y0sq = f.y0() * f.y0();
  RealImage out(rows.size(), n_y);
  for (std::size_t k = 0; k < n_y; ++k) {
    const double y = dy * (static_cast<double>(k) - 0.5 * static_cast<double>(n_y - 1));
    const double ey = std::exp(-2.0 * y * y / y0sq);
    for (std::size_t i = 0; i < rows.size(); ++i) out(i, k) = rows[i] * ey;
  }
  return out;
}

/// Intensity-weighted mean of u.
inline double u_centroid(const ScalarField& f) {
  const std::vector<double> rows = row_power(f);
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m0 += rows[i];
    m1 += rows[i] * f.grid().u(i);
  }
  if (m0 == 0.0) throw std::invalid_argument("u_centroid: zero field");
  return m1 / m0;
}

}  // namespace stovlab
