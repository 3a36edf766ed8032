#pragma once

#include <vector>

namespace dc {

struct ArchSpec {
  int J = 1;
  std::vector<int> widths;  // d_1 .. d_J
  std::vector<int> K;       // free parameters per layer, K_1 .. K_J
  int pieces = 1;           // p
  int degree = 1;           // theta

  // DCNN of depth J, filter length S, input dim d with tied biases:
  // K_j = 3S (j < J), K_J = S + 1 + d + JS, d_j = d + jS, ReLU.
  static ArchSpec dcnn(int J, int S, int d);
};

// R = sum_{i<=J} theta^i + sum_i d_i p sum_{k<i} theta^k
double pdim_R(const ArchSpec& spec);
// J + 1 + (d_J + sum (J-j+2) K_j) (log2(4eR) + log2 log2(2eR)); base-2 logs.
double pdim_general(const ArchSpec& spec);

struct PdimDcnn {
  double explicit_bound;  // J + 1 + (3d + 9J^2 S) 2 log2(12 e (J^2 S + J d)^2)
  double c0_form;         // c0 (J^2 S + d) ln(J d + J^2 S)
};
PdimDcnn pdim_dcnn(int J, int S, int d, double c0 = 1.0);

// ln of 2 ((2eM/eps) ln(2eM/eps))^pdim, valid for 0 < eps <= M.
double covering_log_bound(double pdim, double M, double eps);

// C d ln d (1 + ln(2/delta)/sqrt n) ((ln n) J^2 ln J / n + 1/sqrt n + ln J / J); natural logs.
double rate_bound_theorem2(double n, double d, double J, double delta, double C = 1.0);

}  // namespace dc
