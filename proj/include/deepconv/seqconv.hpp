#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include <Eigen/Dense>

namespace dc {

using Vec = std::vector<double>;

// Finitely supported sequence w_0..w_{len-1}; zero outside.
// Everything is 0-based: vector entry i (1-based) lives at index i-1.
class FilterSeq {
 public:
  FilterSeq() : c_{0.0} {}
  explicit FilterSeq(Vec coeffs);
  FilterSeq(std::initializer_list<double> coeffs);

  const Vec& coeffs() const { return c_; }
  std::size_t size() const { return c_.size(); }
  int degree() const { return static_cast<int>(c_.size()) - 1; }
  double operator[](std::ptrdiff_t k) const {
    return (k < 0 || k >= static_cast<std::ptrdiff_t>(c_.size())) ? 0.0 : c_[k];
  }
  double l1() const;
  bool operator==(const FilterSeq& o) const { return c_ == o.c_; }

  static FilterSeq delta() { return FilterSeq{1.0}; }

 private:
  Vec c_;
};

FilterSeq convolve_seq(const FilterSeq& w, const FilterSeq& v);

// (T^w x), length d + deg(w), via sliding dot products.
Vec apply_conv(const FilterSeq& w, const Vec& x);

// out[i] = sum_k w[i-k] x[k], i < d + taps - 1. T is the accumulator type.
template <class T>
void apply_conv_raw(const double* w, std::size_t taps, const T* x, std::size_t d, T* out) {
  const std::size_t n = d + taps - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k_lo = i + 1 > taps ? i + 1 - taps : 0;
    const std::size_t k_hi = i < d - 1 ? i : d - 1;
    T acc = 0;
    for (std::size_t k = k_lo; k <= k_hi; ++k) acc += static_cast<T>(w[i - k]) * x[k];
    out[i] = acc;
  }
}

// Dense (in_dim + deg) x in_dim Toeplitz matrix. For tests and small sizes.
Eigen::MatrixXd materialize(const FilterSeq& w, int in_dim);

// D_m: keeps the m-th, 2m-th, ... entries (1-based).
Vec downsample(const Vec& v, int m);

}  // namespace dc
