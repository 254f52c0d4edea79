#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stovlab/field.hpp"
#include "stovlab/polarization.hpp"

namespace stovlab {

// ---------------------------------------------------------------------------
// Interferometric visibility

namespace detail {

inline std::pair<double, double> two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  const double e = (a - (s - bb)) + (b - bb);
  return {s, e};
}

}  // namespace detail

/// (p_max - p_min) / (p_max + p_min), correctly rounded.
inline double visibility(double p_max, double p_min) {
  if (!std::isfinite(p_max) || !std::isfinite(p_min) || p_min < 0.0 || p_max < p_min)
    throw std::invalid_argument("visibility: need p_max >= p_min >= 0");
  if (p_max + p_min == 0.0) throw std::invalid_argument("visibility: undefined for zero total power");
  const auto [d, ed] = detail::two_sum(p_max, -p_min);
  const auto [s, es] = detail::two_sum(p_max, p_min);
  double q = d / s;
  const double r = std::fma(-q, s, d);
  q += (r + ed - q * es) / s;
  return q;
}

struct VisibilityResult {
  double v = 0.0;
  double p_max = 0.0;
  double p_min = 0.0;
  double phase_at_max = 0.0;
  std::vector<std::pair<double, double>> scan;  // (phase, power)
};

/// Records P(phi) = total_power(f + e^{i phi} g) on n_phases equally spaced
/// phases. The extrema come from the exact cosine model
/// P(phi) = |f|^2 + |g|^2 + 2|<f,g>| cos(phi + arg<f,g>), so v does not depend
/// on the sampling density.
inline VisibilityResult phase_scan(const ScalarField& f, const ScalarField& g, std::size_t n_phases) {
  if (n_phases < 8) throw std::invalid_argument("phase_scan: need at least 8 phases");
  detail::require_compatible(f, g, "phase_scan");
  VisibilityResult out;
  out.scan.reserve(n_phases);
  for (std::size_t k = 0; k < n_phases; ++k) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_phases);
    const ScalarField sum = superpose({{f, cplx{1.0, 0.0}}, {g, std::polar(1.0, phi)}});
    out.scan.emplace_back(phi, total_power(sum));
  }
  const cplx c = inner_product(f, g);
  const double base = total_power(f) + total_power(g);
  out.p_max = base + 2.0 * std::abs(c);
  out.p_min = std::max(0.0, base - 2.0 * std::abs(c));
  out.phase_at_max = std::abs(c) > 0.0 ? -std::arg(c) : 0.0;
  if (out.phase_at_max <= -std::numbers::pi) out.phase_at_max += 2.0 * std::numbers::pi;
  out.v = visibility(out.p_max, out.p_min);
  return out;
}

// ---------------------------------------------------------------------------
// Polarization analyzer: QWP -> rotating HWP -> LP -> power meter

struct PolScanResult {
  std::vector<double> angles;
  std::vector<double> powers;
  double v = 0.0;
  double p_max = 0.0;
  double p_min = 0.0;
};

inline std::vector<double> default_hwp_angles(std::size_t n = 37) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k)
    out[k] = std::numbers::pi * static_cast<double>(k) / static_cast<double>(n - 1);
  return out;
}

/// Integrated power behind QWP(qwp_angle), HWP(theta), LP(lp_angle) for each
/// theta. Uses the field's coherency matrix, so each angle costs O(1).
inline PolScanResult polarization_analyzer(const VectorField& vf, double qwp_angle,
                                           const std::vector<double>& hwp_angles, double lp_angle) {
  if (hwp_angles.size() < 8) throw std::invalid_argument("polarization_analyzer: need at least 8 HWP angles");
  const GridSpec& g = vf.grid();
  double jss = 0.0, jpp = 0.0;
  cplx jsp{0.0, 0.0};  // sum s conj(p)
  const auto& s = vf.s_field().values().data();
  const auto& p = vf.p_field().values().data();
  for (std::size_t k = 0; k < s.size(); ++k) {
    jss += std::norm(s[k]);
    jpp += std::norm(p[k]);
    jsp += s[k] * std::conj(p[k]);
  }
  const double cell = g.du() * g.dw();
  jss *= cell;
  jpp *= cell;
  jsp *= cell;

  const JonesMatrix qwp = waveplate(WaveplateKind::quarter, qwp_angle);
  const JonesMatrix lp = linear_polarizer(lp_angle);
  PolScanResult out;
  out.angles = hwp_angles;
  out.powers.reserve(hwp_angles.size());
  for (double theta : hwp_angles) {
    const JonesMatrix m = lp * waveplate(WaveplateKind::half, theta) * qwp;
    const JonesMatrix h = m.adjoint() * m;  // power = tr(H J)
    const double power = h(0, 0).real() * jss + h(1, 1).real() * jpp + 2.0 * (h(1, 0) * jsp).real();
    out.powers.push_back(std::max(0.0, power));
  }
  out.p_max = *std::max_element(out.powers.begin(), out.powers.end());
  out.p_min = *std::min_element(out.powers.begin(), out.powers.end());
  out.v = out.p_max + out.p_min > 0.0 ? visibility(out.p_max, out.p_min) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Imaging spectrometer (x - omega)

/// Intensity over (u, Omega) where Omega is the offset from the carrier
/// conjugate to w. Rows are u, columns Omega.
struct Spectrogram {
  GridSpec grid;
  std::vector<double> omega_axis;
  RealImage intensity;
  double d_omega = 0.0;
  std::string convention =
      "kernel exp(-i*Omega*w)/sqrt(2pi); positive u-Omega covariance <=> q > 0";

  double total_power() const {
    double acc = 0.0;
    for (double v : intensity.data()) acc += v;
    return acc * grid.du() * d_omega;
  }
};

namespace detail {

struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
struct FftwPlanFree {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};

}  // namespace detail

/// F(u, Omega_k) = dw / sqrt(2 pi) * sum_j f(u, w_j) exp(-i Omega_k w_j), with
/// the w axis zero padded to pad_factor * n_w samples, Omega_k = (k - M/2) dOmega
/// and dOmega = 2 pi / (M dw). Parseval holds exactly for any padding.
inline ComplexGrid spectral_amplitude(const ScalarField& f, std::size_t pad_factor, std::vector<double>* omega_out = nullptr,
                                      double* d_omega_out = nullptr) {
  if (pad_factor < 1) throw std::invalid_argument("spectrometer: pad factor must be >= 1");
  const GridSpec& g = f.grid();
  const std::size_t n = g.n_w();
  const std::size_t m = n * pad_factor;
  const std::size_t half = m / 2;
  const double d_omega = 2.0 * std::numbers::pi / (static_cast<double>(m) * g.dw());

  std::vector<double> omega(m);
  std::vector<cplx> out_phase(m);
  std::vector<cplx> in_phase(n);
  const double w0 = g.w(0);
  for (std::size_t k = 0; k < m; ++k) {
    omega[k] = d_omega * (static_cast<double>(k) - static_cast<double>(half));
    out_phase[k] = std::polar(g.dw() / std::sqrt(2.0 * std::numbers::pi), -omega[k] * w0);
  }
  // Shifting the output bins by `half` is a modulation of the input.
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t r = (half * j) % m;
    in_phase[j] = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(m));
  }

  std::unique_ptr<fftw_complex, detail::FftwFree> buf(fftw_alloc_complex(m));
  std::unique_ptr<fftw_plan_s, detail::FftwPlanFree> plan(
      fftw_plan_dft_1d(static_cast<int>(m), buf.get(), buf.get(), FFTW_FORWARD, FFTW_ESTIMATE));
  if (!plan) throw std::runtime_error("spectrometer: FFTW plan creation failed");

  ComplexGrid out(g.n_u(), m);
  auto* data = reinterpret_cast<cplx*>(buf.get());
  for (std::size_t i = 0; i < g.n_u(); ++i) {
    std::fill(data, data + m, cplx{0.0, 0.0});
    for (std::size_t j = 0; j < n; ++j) data[j] = f(i, j) * in_phase[j];
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < m; ++k) out(i, k) = data[k] * out_phase[k];
  }
  if (omega_out) *omega_out = std::move(omega);
  if (d_omega_out) *d_omega_out = d_omega;
  return out;
}

inline Spectrogram spectrometer(const ScalarField& f, std::size_t pad_factor = 4) {
  std::vector<double> omega;
  double d_omega = 0.0;
  const ComplexGrid amp = spectral_amplitude(f, pad_factor, &omega, &d_omega);
  RealImage intensity(amp.rows(), amp.cols());
  for (std::size_t k = 0; k < amp.size(); ++k) intensity.data()[k] = std::norm(amp.data()[k]);
  return Spectrogram{f.grid(), std::move(omega), std::move(intensity), d_omega};
}

/// Polarization-blind camera: component spectrograms add.
inline Spectrogram spectrometer(const VectorField& vf, std::size_t pad_factor = 4) {
  Spectrogram out = spectrometer(vf.s_field(), pad_factor);
  const Spectrogram p = spectrometer(vf.p_field(), pad_factor);
  for (std::size_t k = 0; k < out.intensity.size(); ++k) out.intensity.data()[k] += p.intensity.data()[k];
  return out;
}

// ---------------------------------------------------------------------------
// Charge readout from a spectrogram

struct ChargeEstimate {
  int magnitude = 0;
  int sign = 0;
  double confidence = 0.0;
  int dark_regions = 0;
  double covariance = 0.0;
  double correlation = 0.0;
  std::vector<double> profile;  // normalized to its peak
  double axis_u = 0.0;
  double axis_omega = 0.0;
};

struct ChargeEstimatorOptions {
  double dark_ratio = 0.10;  // a minimum is dark if at most this fraction of its weaker flanking lobe
  double lobe_floor = 0.02;  // flanking lobes below this fraction of the profile peak are tails, not lobes
  double sign_threshold = 0.10;  // |u-Omega correlation| below this: helicity indeterminate
  std::size_t samples = 801;
  double extent_sigmas = 4.0;
};

namespace detail {

inline double bilinear(const Spectrogram& sp, double u, double om) {
  const double fi = (u - sp.grid.u(0)) / sp.grid.du();
  const double fj = (om - sp.omega_axis.front()) / sp.d_omega;
  const double ni = static_cast<double>(sp.intensity.rows() - 1);
  const double nj = static_cast<double>(sp.intensity.cols() - 1);
  if (fi < 0.0 || fj < 0.0 || fi > ni || fj > nj) return 0.0;
  const std::size_t i = std::min(static_cast<std::size_t>(fi), sp.intensity.rows() - 2);
  const std::size_t j = std::min(static_cast<std::size_t>(fj), sp.intensity.cols() - 2);
  const double a = fi - static_cast<double>(i), b = fj - static_cast<double>(j);
  const RealImage& I = sp.intensity;
  return (1 - a) * (1 - b) * I(i, j) + a * (1 - b) * I(i + 1, j) + (1 - a) * b * I(i, j + 1) + a * b * I(i + 1, j + 1);
}

}  // namespace detail

/// Counts dark regions along the principal axis of the intensity distribution
/// and reads the helicity from the sign of the u-Omega covariance.
inline ChargeEstimate estimate_charge(const Spectrogram& sp, const ChargeEstimatorOptions& opt = {}) {
  const RealImage& I = sp.intensity;
  double m0 = 0.0, mu = 0.0, mo = 0.0;
  for (std::size_t i = 0; i < I.rows(); ++i)
    for (std::size_t j = 0; j < I.cols(); ++j) {
      m0 += I(i, j);
      mu += I(i, j) * sp.grid.u(i);
      mo += I(i, j) * sp.omega_axis[j];
    }
  if (!(m0 > 0.0)) throw std::invalid_argument("estimate_charge: spectrogram has no power");
  const double cu = mu / m0, co = mo / m0;
  double suu = 0.0, soo = 0.0, suo = 0.0;
  for (std::size_t i = 0; i < I.rows(); ++i)
    for (std::size_t j = 0; j < I.cols(); ++j) {
      const double du = sp.grid.u(i) - cu, dom = sp.omega_axis[j] - co;
      suu += I(i, j) * du * du;
      soo += I(i, j) * dom * dom;
      suo += I(i, j) * du * dom;
    }
  suu /= m0;
  soo /= m0;
  suo /= m0;

  ChargeEstimate out;
  out.covariance = suo;
  out.correlation = suo / std::sqrt(suu * soo);

  // Largest-eigenvalue direction of [[suu, suo], [suo, soo]].
  const double tr = suu + soo, det = suu * soo - suo * suo;
  const double lmax = 0.5 * tr + std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  double ax = suo, ay = lmax - suu;
  if (std::abs(suo) < 1e-14 * tr) {
    ax = suu >= soo ? 1.0 : 0.0;
    ay = suu >= soo ? 0.0 : 1.0;
  }
  const double an = std::hypot(ax, ay);
  ax /= an;
  ay /= an;
  out.axis_u = ax;
  out.axis_omega = ay;

  const std::size_t ns = std::max<std::size_t>(opt.samples, 3);
  const double half_len = opt.extent_sigmas * std::sqrt(lmax);
  std::vector<double> prof(ns);
  for (std::size_t k = 0; k < ns; ++k) {
    const double t = -half_len + 2.0 * half_len * static_cast<double>(k) / static_cast<double>(ns - 1);
    prof[k] = detail::bilinear(sp, cu + t * ax, co + t * ay);
  }
  const double peak = *std::max_element(prof.begin(), prof.end());
  if (peak > 0.0)
    for (double& v : prof) v /= peak;
  out.profile = prof;

  // A dark region is a local minimum well below the brightest profile value
  // on each side of it; neighbouring minima without a bright lobe between
  // them merge.
  std::vector<double> prefix_max(ns), suffix_max(ns);
  for (std::size_t k = 0; k < ns; ++k) prefix_max[k] = std::max(k ? prefix_max[k - 1] : 0.0, prof[k]);
  for (std::size_t k = ns; k-- > 0;) suffix_max[k] = std::max(k + 1 < ns ? suffix_max[k + 1] : 0.0, prof[k]);
  const auto lobe_max = [&](std::size_t a, std::size_t b) {
    return *std::max_element(prof.begin() + static_cast<std::ptrdiff_t>(a), prof.begin() + static_cast<std::ptrdiff_t>(b) + 1);
  };
  std::vector<std::size_t> minima;
  for (std::size_t k = 1; k + 1 < ns; ++k) {
    if (!(prof[k] <= prof[k - 1] && prof[k] < prof[k + 1])) continue;
    const double flank = std::min(prefix_max[k], suffix_max[k]);
    if (flank < opt.lobe_floor || prof[k] > opt.dark_ratio * flank) continue;
    if (!minima.empty()) {
      const std::size_t prev = minima.back();
      const double between = lobe_max(prev, k);
      if (between < opt.lobe_floor || std::max(prof[prev], prof[k]) > opt.dark_ratio * between) {
        if (prof[k] < prof[prev]) minima.back() = k;
        continue;
      }
    }
    minima.push_back(k);
  }
  out.dark_regions = static_cast<int>(minima.size());
  out.magnitude = out.dark_regions;

  double count_conf = 1.0;
  if (!minima.empty()) {
    // lobes bounding each dark region: outermost flanks and the peaks between
    std::vector<double> lobes{prefix_max[minima.front()]};
    for (std::size_t n = 1; n < minima.size(); ++n) lobes.push_back(lobe_max(minima[n - 1], minima[n]));
    lobes.push_back(suffix_max[minima.back()]);
    double worst_ratio = 0.0;
    for (std::size_t n = 0; n < minima.size(); ++n)
      worst_ratio = std::max(worst_ratio, prof[minima[n]] / std::min(lobes[n], lobes[n + 1]));
    const double weakest_lobe = *std::min_element(lobes.begin(), lobes.end());
    const double depth_score = 1.0 - worst_ratio / opt.dark_ratio;
    const double lobe_score = std::clamp((weakest_lobe - opt.lobe_floor) / opt.lobe_floor, 0.0, 1.0);
    count_conf = std::min(depth_score, lobe_score);
  }

  if (out.magnitude > 0 && std::abs(out.correlation) >= opt.sign_threshold) {
    out.sign = out.correlation > 0.0 ? 1 : -1;
    const double sign_score = std::clamp(std::abs(out.correlation) / (2.5 * opt.sign_threshold), 0.0, 1.0);
    out.confidence = std::min(count_conf, sign_score);
  } else {
    // Helicity unreadable: either no vortex or both orientations superposed.
    out.sign = 0;
    out.confidence = std::min(count_conf, 0.45);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference beam comparison

struct ProjectionOptions {
  std::size_t n_y = 128;
  double y_half = 3.0;
};

struct ReferenceComparison {
  RealImage image;  // x-y projection, rows u, columns y
  double power = 0.0;
};

/// Overlaps a beam under test with the reference vortex, in or out of phase.
inline ReferenceComparison reference_compare(const ScalarField& test, const ScalarField& reference, Parity parity,
                                             const ProjectionOptions& proj = {}) {
  detail::require_compatible(test, reference, "reference_compare");
  const double sign = parity == Parity::in_phase ? 1.0 : -1.0;
  const ScalarField sum = superpose({{test, cplx{1.0, 0.0}}, {reference, cplx{sign, 0.0}}});
  return {project_xy(sum, proj.n_y, proj.y_half), total_power(sum)};
}

}  // namespace stovlab
