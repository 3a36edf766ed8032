#include "deepconv/seqconv.hpp"

#include <cmath>
#include <string>

#include "deepconv/errors.hpp"

namespace dc {

FilterSeq::FilterSeq(Vec coeffs) : c_(std::move(coeffs)) {
  if (c_.empty()) throw ValidationError("filter must have at least one coefficient");
}

FilterSeq::FilterSeq(std::initializer_list<double> coeffs) : FilterSeq(Vec(coeffs)) {}

double FilterSeq::l1() const {
  double s = 0;
  for (double v : c_) s += std::abs(v);
  return s;
}

FilterSeq convolve_seq(const FilterSeq& w, const FilterSeq& v) {
  const Vec& a = w.coeffs();
  const Vec& b = v.coeffs();
  Vec out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k) out[i + k] += a[i] * b[k];
  return FilterSeq(std::move(out));
}

Vec apply_conv(const FilterSeq& w, const Vec& x) {
  if (x.empty()) throw ValidationError("apply_conv: empty input");
  Vec out(x.size() + w.size() - 1);
  apply_conv_raw(w.coeffs().data(), w.size(), x.data(), x.size(), out.data());
  return out;
}

Eigen::MatrixXd materialize(const FilterSeq& w, int in_dim) {
  if (in_dim < 1) throw ValidationError("materialize: in_dim must be positive");
  const int rows = in_dim + w.degree();
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows, in_dim);
  for (int k = 0; k < in_dim; ++k)
    for (int j = 0; j <= w.degree(); ++j) t(k + j, k) = w[j];
  return t;
}

Vec downsample(const Vec& v, int m) {
  if (m < 1) throw ValidationError("downsample scale must be positive");
  if (static_cast<std::size_t>(m) > v.size()) throw ValidationError("empty downsample");
  Vec out(v.size() / m);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[(i + 1) * m - 1];
  return out;
}

}  // namespace dc
