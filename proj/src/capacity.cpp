#include "deepconv/capacity.hpp"

#include <cmath>
#include <numbers>

#include "deepconv/errors.hpp"

namespace dc {

namespace {

void validate(const ArchSpec& spec) {
  if (spec.J < 1) throw ValidationError("arch: depth must be positive");
  if (static_cast<int>(spec.widths.size()) != spec.J || static_cast<int>(spec.K.size()) != spec.J)
    throw ValidationError("arch: widths and K must have J entries");
  if (spec.pieces < 1 || spec.degree < 1) throw ValidationError("arch: p and theta must be positive");
  for (int j = 0; j < spec.J; ++j)
    if (spec.widths[j] < 1 || spec.K[j] < 1) throw ValidationError("arch: widths and K must be positive");
}

}  // namespace

ArchSpec ArchSpec::dcnn(int J, int S, int d) {
  ArchSpec a;
  a.J = J;
  for (int j = 1; j <= J; ++j) {
    a.widths.push_back(d + j * S);
    a.K.push_back(j < J ? 3 * S : S + 1 + d + J * S);
  }
  return a;
}

double pdim_R(const ArchSpec& spec) {
  validate(spec);
  const double th = spec.degree;
  double R = 0;
  double pw = 1;
  for (int i = 0; i <= spec.J; ++i, pw *= th) R += pw;
  double geo = 0;  // 1 + theta + ... + theta^{i-1}
  pw = 1;
  for (int i = 1; i <= spec.J; ++i) {
    geo += pw;
    pw *= th;
    R += static_cast<double>(spec.widths[i - 1]) * spec.pieces * geo;
  }
  return R;
}

double pdim_general(const ArchSpec& spec) {
  const double R = pdim_R(spec);
  double weight = spec.widths.back();
  for (int j = 1; j <= spec.J; ++j) weight += static_cast<double>(spec.J - j + 2) * spec.K[j - 1];
  const double e = std::numbers::e;
  return spec.J + 1 + weight * (std::log2(4 * e * R) + std::log2(std::log2(2 * e * R)));
}

PdimDcnn pdim_dcnn(int J, int S, int d, double c0) {
  if (J < 2) throw ValidationError("pdim_dcnn needs J >= 2");
  if (S < 1 || d < 1) throw ValidationError("pdim_dcnn needs positive S and d");
  const double j = J, s = S, dd = d;
  const double q = j * j * s + j * dd;
  PdimDcnn r;
  r.explicit_bound = j + 1 + (3 * dd + 9 * j * j * s) * 2 * std::log2(12 * std::numbers::e * q * q);
  r.c0_form = c0 * (j * j * s + dd) * std::log(j * dd + j * j * s);
  return r;
}

double covering_log_bound(double pdim, double M, double eps) {
  if (!(M > 0)) throw ValidationError("covering bound needs M > 0");
  if (!(eps > 0)) throw ValidationError("covering bound needs eps > 0");
  if (eps > M) throw ValidationError("covering bound needs eps <= M");
  if (pdim < 0) throw ValidationError("covering bound needs pdim >= 0");
  const double r = 2 * std::numbers::e * M / eps;
  return std::log(2.0) + pdim * std::log(r * std::log(r));
}

double rate_bound_theorem2(double n, double d, double J, double delta, double C) {
  if (!(n >= 3)) throw ValidationError("rate bound needs n >= 3");
  if (!(d >= 2)) throw ValidationError("rate bound needs d >= 2");
  if (!(J >= 2)) throw ValidationError("rate bound needs J >= 2");
  if (!(delta > 0 && delta < 1)) throw ValidationError("rate bound needs 0 < delta < 1");
  if (!(C > 0)) throw ValidationError("rate bound needs C > 0");
  const double sn = std::sqrt(n);
  return C * d * std::log(d) * (1 + std::log(2 / delta) / sn) *
         (std::log(n) * J * J * std::log(J) / n + 1 / sn + std::log(J) / J);
}

}  // namespace dc
