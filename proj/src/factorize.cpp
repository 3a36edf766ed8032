#include "deepconv/factorize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "deepconv/errors.hpp"

namespace dc {

namespace {

using LComplex = std::complex<long double>;

Vec trimmed(const Vec& c) {
  Vec out = c;
  while (out.size() > 1 && out.back() == 0.0) out.pop_back();
  return out;
}

// p(z), p'(z) and sum |p_j| |z|^j by Horner.
void horner(const Vec& c, LComplex z, LComplex& p, LComplex& dp, long double& mag) {
  p = 0;
  dp = 0;
  mag = 0;
  const long double az = std::abs(z);
  for (std::size_t j = c.size(); j-- > 0;) {
    dp = dp * z + p;
    p = p * z + static_cast<long double>(c[j]);
    mag = mag * az + std::fabs(static_cast<long double>(c[j]));
  }
}

double backward_error(const Vec& c, LComplex z) {
  LComplex p, dp;
  long double mag;
  horner(c, z, p, dp, mag);
  if (mag == 0) return 0;
  return static_cast<double>(std::abs(p) / mag);
}

std::vector<LComplex> companion_roots(const Vec& c) {
  const int m = static_cast<int>(c.size()) - 1;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < m; ++i) comp(i, m - 1) = -c[i] / c[m];
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  if (es.info() != Eigen::Success) throw NumericalError("companion eigenvalue solver failed");
  std::vector<LComplex> z(m);
  for (int i = 0; i < m; ++i) z[i] = LComplex(es.eigenvalues()[i].real(), es.eigenvalues()[i].imag());
  return z;
}

void newton_polish(const Vec& c, std::vector<LComplex>& z) {
  for (auto& r : z) {
    double err = backward_error(c, r);
    for (int it = 0; it < 8 && err > 0; ++it) {
      LComplex p, dp;
      long double mag;
      horner(c, r, p, dp, mag);
      if (dp == LComplex(0)) break;
      const LComplex cand = r - p / dp;
      const double e2 = backward_error(c, cand);
      if (!(e2 < err)) break;
      r = cand;
      err = e2;
    }
  }
}

// Aberth-Ehrlich simultaneous iteration, a Durand-Kerner style refinement.
void aberth(const Vec& c, std::vector<LComplex>& z) {
  const std::size_t m = z.size();
  for (int it = 0; it < kMaxRootIter; ++it) {
    long double max_step = 0;
    for (std::size_t i = 0; i < m; ++i) {
      LComplex p, dp;
      long double mag;
      horner(c, z[i], p, dp, mag);
      if (p == LComplex(0)) continue;
      const LComplex ratio = p / dp;
      LComplex sum = 0;
      for (std::size_t j = 0; j < m; ++j)
        if (j != i) sum += 1.0L / (z[i] - z[j]);
      const LComplex step = ratio / (1.0L - ratio * sum);
      if (!std::isfinite(std::abs(step))) continue;
      z[i] -= step;
      max_step = std::max(max_step, std::abs(step) / std::max(1.0L, std::abs(z[i])));
    }
    if (max_step < 1e-17L) break;
  }
}

// position of each digit value in the order 0..r-1 sorted by frac(i / phi)
std::vector<int> golden_rank(int r) {
  std::vector<int> idx(r);
  for (int i = 0; i < r; ++i) idx[i] = i;
  constexpr double g = 0.6180339887498949;
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::fmod(a * g, 1.0) < std::fmod(b * g, 1.0);
  });
  std::vector<int> rank(r);
  for (int pos = 0; pos < r; ++pos) rank[idx[pos]] = pos;
  return rank;
}

Vec poly_mul(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k) out[i + k] += a[i] * b[k];
  return out;
}

// Pack linear/quadratic units into factors of degree <= s, in order.
std::vector<FilterSeq> pack_units(const std::vector<Vec>& units, int s) {
  std::vector<FilterSeq> out;
  Vec cur{1.0};
  for (const auto& u : units) {
    const int du = static_cast<int>(u.size()) - 1;
    if (static_cast<int>(cur.size()) - 1 + du > s) {
      out.emplace_back(cur);
      cur = Vec{1.0};
    }
    cur = poly_mul(cur, u);
  }
  if (cur.size() > 1 || out.empty()) out.emplace_back(cur);
  return out;
}

double reconvolution_error(const std::vector<FilterSeq>& filters, const Vec& target) {
  std::vector<long double> acc{1.0L};
  for (const auto& f : filters) {
    std::vector<long double> next(acc.size() + f.size() - 1, 0.0L);
    for (std::size_t i = 0; i < acc.size(); ++i)
      for (std::size_t k = 0; k < f.size(); ++k) next[i + k] += acc[i] * f.coeffs()[k];
    acc.swap(next);
  }
  long double err = 0;
  const std::size_t n = std::max(acc.size(), target.size());
  for (std::size_t i = 0; i < n; ++i) {
    const long double a = i < acc.size() ? acc[i] : 0.0L;
    const long double b = i < target.size() ? target[i] : 0.0L;
    err = std::max(err, std::fabs(a - b));
  }
  return static_cast<double>(err);
}

void pad_filters(std::vector<FilterSeq>& filters, std::optional<int> pad_to) {
  if (!pad_to) return;
  if (*pad_to < static_cast<int>(filters.size()))
    throw ValidationError("pad_to=" + std::to_string(*pad_to) + " is smaller than the " +
                          std::to_string(filters.size()) + " factors required");
  while (static_cast<int>(filters.size()) < *pad_to) filters.push_back(FilterSeq::delta());
}

}  // namespace

double root_backward_error(const FilterSeq& p, Complex r) {
  return backward_error(trimmed(p.coeffs()), LComplex(r.real(), r.imag()));
}

std::vector<Complex> find_roots(const FilterSeq& p) {
  const Vec c = trimmed(p.coeffs());
  const int deg = static_cast<int>(c.size()) - 1;
  if (deg < 1) throw ValidationError("find_roots: polynomial degree must be at least 1");
  std::size_t zeros = 0;
  while (c[zeros] == 0.0) ++zeros;
  std::vector<Complex> roots(zeros, Complex(0.0, 0.0));
  const Vec q(c.begin() + zeros, c.end());
  if (q.size() == 1) return roots;

  std::vector<LComplex> z = companion_roots(q);
  if (static_cast<int>(q.size()) - 1 <= kCompanionMaxDegree)
    newton_polish(q, z);
  else
    aberth(q, z);

  double worst = 0;
  for (const auto& r : z) worst = std::max(worst, backward_error(q, r));
  if (!(worst <= kTolRoot))
    throw NumericalError("root finding did not converge (best residual " + std::to_string(worst) + ")");
  for (const auto& r : z) roots.emplace_back(static_cast<double>(r.real()), static_cast<double>(r.imag()));
  return roots;
}

int factor_count_bound(int degree, int s) {
  if (s < 2) throw ValidationError("filter length s must be at least 2");
  if (degree <= 0) return degree == 0 ? 1 : 0;
  return (degree + s - 2) / (s - 1);
}

FactorizationResult factor_sequence(const FilterSeq& W, int s, std::optional<int> pad_to) {
  if (s < 2) throw ValidationError("filter length s must be at least 2");
  const Vec c = trimmed(W.coeffs());
  const int deg = static_cast<int>(c.size()) - 1;
  if (deg > kMaxFactorDegree)
    throw ValidationError("sequence degree " + std::to_string(deg) + " exceeds the factorization cap of " +
                          std::to_string(kMaxFactorDegree));
  FactorizationResult res;
  res.target_len = W.size();
  if (deg <= s) {
    res.filters.emplace_back(W.size() <= static_cast<std::size_t>(s) + 1 ? W.coeffs() : c);
    pad_filters(res.filters, pad_to);
    return res;
  }

  const auto roots = find_roots(FilterSeq(c));
  struct Unit {
    double angle;
    Vec poly;
  };
  std::vector<Unit> units;
  std::vector<Complex> upper, lower;
  for (const auto& r : roots) {
    const double tol = kTolConj * std::max(1.0, std::abs(r));
    if (std::abs(r.imag()) <= tol)
      units.push_back({r.real() >= 0 ? 0.0 : std::numbers::pi, Vec{-r.real(), 1.0}});
    else if (r.imag() > 0)
      upper.push_back(r);
    else
      lower.push_back(r);
  }
  if (upper.size() != lower.size()) throw NumericalError("complex roots do not come in conjugate pairs");
  std::vector<bool> used(lower.size(), false);
  for (const auto& u : upper) {
    std::size_t best = lower.size();
    double bd = 0;
    for (std::size_t j = 0; j < lower.size(); ++j) {
      if (used[j]) continue;
      const double dist = std::abs(u - std::conj(lower[j]));
      if (best == lower.size() || dist < bd) {
        best = j;
        bd = dist;
      }
    }
    if (bd > kTolConj * std::max(1.0, std::abs(u))) throw NumericalError("unpaired complex root");
    used[best] = true;
    const Complex m = 0.5 * (u + std::conj(lower[best]));
    units.push_back({std::arg(m), Vec{std::norm(m), -2.0 * m.real(), 1.0}});
  }

  std::stable_sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) { return a.angle < b.angle; });
  const auto rank = golden_rank(static_cast<int>(units.size()));
  std::vector<Vec> ordered(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) ordered[rank[i]] = units[i].poly;

  res.filters = pack_units(ordered, s);
  Vec first = res.filters[0].coeffs();
  for (double& v : first) v *= c.back();
  res.filters[0] = FilterSeq(first);
  res.residual = reconvolution_error(res.filters, W.coeffs());
  pad_filters(res.filters, pad_to);
  return res;
}

FilterSeq replication_sequence(int block_width, int N) {
  if (block_width < 1) throw ValidationError("block width must be positive");
  if (N < 1 || N % 2 == 0) throw ValidationError("N must be a positive odd integer");
  Vec w(static_cast<std::size_t>(N - 1) * block_width + 1, 0.0);
  for (int k = 0; k < N; ++k) w[static_cast<std::size_t>(k) * block_width] = 1.0;
  return FilterSeq(std::move(w));
}

std::vector<Complex> replication_roots(int block_width, int N) {
  replication_sequence(block_width, N);
  std::vector<Complex> out;
  const double M = static_cast<double>(N) * block_width;
  for (int l = 1; l < N; ++l)
    for (int j = 0; j < block_width; ++j) out.push_back(std::polar(1.0, 2.0 * std::numbers::pi * (l + j * N) / M));
  return out;
}

FactorizationResult factor_replication(int block_width, int N, int s, std::optional<int> pad_to) {
  if (s < 2) throw ValidationError("filter length s must be at least 2");
  const FilterSeq W = replication_sequence(block_width, N);
  FactorizationResult res;
  res.target_len = W.size();
  if (W.degree() <= s) {
    res.filters.push_back(W);
    pad_filters(res.filters, pad_to);
    return res;
  }
  const long long M = static_cast<long long>(N) * block_width;
  // one root a per conjugate pair: 0 < a < M/2, a not a multiple of N
  std::vector<long long> cand;
  for (long long a = 1; 2 * a < M; ++a)
    if (a % N != 0) cand.push_back(a);
  // log|z^a - z^b| for M-th roots of unity depends on a - b only
  std::vector<double> logdist(M);
  for (long long k = 1; k < M; ++k)
    logdist[k] = std::log(2.0 * std::abs(std::sin(std::numbers::pi * static_cast<double>(k) / static_cast<double>(M))));
  // Leja order: each next pair sits where the current partial product is largest
  std::vector<double> logp(cand.size(), 0.0);
  std::vector<bool> used(cand.size(), false);
  std::vector<Vec> units;
  units.reserve(cand.size());
  std::size_t pick = 0;
  for (std::size_t step = 0; step < cand.size(); ++step) {
    if (step > 0) {
      pick = cand.size();
      for (std::size_t i = 0; i < cand.size(); ++i)
        if (!used[i] && (pick == cand.size() || logp[i] > logp[pick])) pick = i;
    }
    used[pick] = true;
    const long long r = cand[pick];
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(M);
    units.push_back(Vec{1.0, -2.0 * std::cos(theta), 1.0});
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (used[i]) continue;
      const long long a = cand[i];
      logp[i] += logdist[((a - r) % M + M) % M] + logdist[(a + r) % M];
    }
  }
  res.filters = pack_units(units, s);
  res.residual = reconvolution_error(res.filters, W.coeffs());
  pad_filters(res.filters, pad_to);
  return res;
}

double max_prefix_l1(const std::vector<FilterSeq>& filters) {
  Vec acc{1.0};
  double best = 0;
  for (const auto& f : filters) {
    acc = poly_mul(acc, f.coeffs());
    double n = 0;
    for (double v : acc) n += std::abs(v);
    best = std::max(best, n);
  }
  return best;
}

}  // namespace dc
