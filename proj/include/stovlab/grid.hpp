#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace stovlab {

/// Cell-centered sampling of the normalized (u, w) plane, where u = x / x0 and
/// w = z' / (eta z'0). Coordinates are antisymmetric about zero bit-for-bit, so
/// odd counts contain an exact u = 0 (or w = 0) sample and even counts never
/// hit the origin.
class GridSpec {
public:
  GridSpec(std::size_t n_u, std::size_t n_w, double u_half, double w_half)
      : n_u_(n_u), n_w_(n_w), u_half_(u_half), w_half_(w_half) {
    if (n_u < 8 || n_w < 8)
      throw std::invalid_argument("grid: sample counts must be >= 8 (got " +
                                  std::to_string(n_u) + "x" + std::to_string(n_w) + ")");
    if (!(u_half > 0.0) || !(w_half > 0.0))
      throw std::invalid_argument("grid: half-extents must be positive");
    du_ = 2.0 * u_half / static_cast<double>(n_u);
    dw_ = 2.0 * w_half / static_cast<double>(n_w);
  }

  std::size_t n_u() const { return n_u_; }
  std::size_t n_w() const { return n_w_; }
  std::size_t size() const { return n_u_ * n_w_; }
  double u_half() const { return u_half_; }
  double w_half() const { return w_half_; }
  double du() const { return du_; }
  double dw() const { return dw_; }

  // (i - (n-1)/2) is an exact half-integer, which keeps u_{n-1-i} == -u_i.
  double u(std::size_t i) const { return du_ * (static_cast<double>(i) - 0.5 * static_cast<double>(n_u_ - 1)); }
  double w(std::size_t j) const { return dw_ * (static_cast<double>(j) - 0.5 * static_cast<double>(n_w_ - 1)); }

  std::vector<double> u_axis() const {
    std::vector<double> out(n_u_);
    for (std::size_t i = 0; i < n_u_; ++i) out[i] = u(i);
    return out;
  }
  std::vector<double> w_axis() const {
    std::vector<double> out(n_w_);
    for (std::size_t j = 0; j < n_w_; ++j) out[j] = w(j);
    return out;
  }

  bool operator==(const GridSpec&) const = default;

private:
  std::size_t n_u_;
  std::size_t n_w_;
  double u_half_;
  double w_half_;
  double du_ = 0.0;
  double dw_ = 0.0;
};

inline GridSpec make_grid(std::size_t n_u, std::size_t n_w, double u_half, double w_half) {
  return GridSpec(n_u, n_w, u_half, w_half);
}

/// Dense row-major array, rows first (u outer, w inner for field data).
template <typename T>
class Array2D {
public:
  Array2D() = default;
  Array2D(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Array2D&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealImage = Array2D<double>;

}  // namespace stovlab
