#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "deepconv/seqconv.hpp"

namespace dc {

using Complex = std::complex<double>;

inline constexpr double kTolRoot = 1e-10;
inline constexpr double kTolConj = 1e-7;
inline constexpr int kMaxRootIter = 500;
inline constexpr int kCompanionMaxDegree = 64;
inline constexpr int kMaxFactorDegree = 4096;

// Roots of sum_j p[j] z^j, with multiplicity. Trailing (high-order) zero
// coefficients are trimmed first. Each returned root r satisfies
// |p(r)| <= kTolRoot * sum_j |p_j| |r|^j (relative backward error).
std::vector<Complex> find_roots(const FilterSeq& p);

// |p(r)| / sum_j |p_j| |r|^j
double root_backward_error(const FilterSeq& p, Complex r);

struct FactorizationResult {
  std::vector<FilterSeq> filters;  // filters[0] is applied first and carries the scalar
  std::size_t target_len = 0;
  double residual = 0;  // max |conv(filters) - W|
};

// ceil(deg / (s - 1))
int factor_count_bound(int degree, int s);

// W = filters[0] * filters[1] * ... with every filter supported in {0..s}.
// Conjugate roots are paired into real quadratics, ordered by a golden-ratio
// permutation of their angles, then packed greedily into degree <= s factors.
FactorizationResult factor_sequence(const FilterSeq& W, int s, std::optional<int> pad_to = {});

// Ones at k * block_width, k = 0..N-1.
FilterSeq replication_sequence(int block_width, int N);

// exp(i 2 pi (l + j N) / (N block_width)), l = 1..N-1, j = 0..block_width-1.
std::vector<Complex> replication_roots(int block_width, int N);

// Closed-form factorization of replication_sequence(block_width, N). Roots are
// the M-th roots of unity (M = N * block_width) off the block_width-th ones;
// conjugate pairs are taken in Leja order (each next pair where the current
// partial product is largest on the root set). This keeps the l1 norms of all
// partial products small, which the deepening blocks need.
FactorizationResult factor_replication(int block_width, int N, int s, std::optional<int> pad_to = {});

// max over prefixes of ||w1 * ... * wj||_1
double max_prefix_l1(const std::vector<FilterSeq>& filters);

}  // namespace dc
