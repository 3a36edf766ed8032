#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "deepconv/dcnn.hpp"
#include "deepconv/factorize.hpp"

namespace dc {

struct Dataset {
  std::vector<Vec> xs;
  Vec ys;
  double M = 1;

  std::size_t size() const { return xs.size(); }
  int dim() const { return xs.empty() ? 0 : static_cast<int>(xs[0].size()); }
};

// Throws unless sizes agree, |y| <= M and (optionally) the x are distinct.
void validate_dataset(const Dataset& data, bool require_distinct);

// How the running shift B^(j) is chosen inside a block.
//   kFilterNormProduct: B^(j) = prod_{i<=j} ||w^(i)||_1 * B0
//   kPartialNorm:       B^(j) = ||w^(j) * ... * w^(1)||_1 * B0
// Both bound sup |T^{W^(j)} U| when ||U||_inf <= B0. The product overflows
// binary64 for long replication blocks; the partial norm stays near ||W||_1.
enum class ShiftRule { kFilterNormProduct, kPartialNorm };

struct Block {
  std::vector<ConvLayer> layers;
  int in_dim = 0;
  int out_dim = 0;
  Vec B;  // B^(0) .. B^(J*)
  double bound_B() const { return B.back(); }
  int depth() const { return static_cast<int>(layers.size()); }
};

struct BlockOptions {
  ShiftRule rule = ShiftRule::kPartialNorm;
  std::optional<int> last_downsample;
  // Set the last bias from the realized pre-activation at U = 0 instead of
  // the closed form; identical in exact arithmetic, absorbs the rounding of
  // the intermediate biases.
  bool calibrate = true;
};

// Layers w^(1..J*) of the given factorization, input U(x) + C_shift of width
// K. Before the last bias the output is T^W U(x) + const; the last bias is
// const + beta, so the last pre-activation is D(T^W U(x)) - beta.
Block build_block(const std::vector<FilterSeq>& factors, int s, int K, const Vec& C_shift, double B0,
                  const Vec& beta, const BlockOptions& opt = {});
// Factors W itself into J* = max(1, ceil(deg W / (s-1))) filters.
Block build_block(const FilterSeq& W, int s, int K, const Vec& C_shift, double B0, const Vec& beta,
                  const BlockOptions& opt = {});

// Pre-activation of the last layer of a block (before its bias).
LVec block_preactivation(const Block& block, const LVec& input);
// Output of the whole block.
LVec block_output(const Block& block, const LVec& input);

// Sequence whose Toeplitz matrix followed by D_d maps x to [xi.x, x1, 0, x2, 0, ..., xd, 0, ...].
FilterSeq linear_feature_sequence(const Vec& xi);
int linear_block_depth(int d, int s);  // ceil((2d^2 - 1) / (s - 1))

// Output on ||x||_inf <= B0: [xi.x, x1, 0, x2, 0, ..., xd, 0, ...] + B^(J1).
Block linear_feature_block(const Vec& xi, int s, double B0, ShiftRule rule = ShiftRule::kPartialNorm);
// J1 (s + 2) + 1
long long linear_block_free_params(int d, int s);

struct EmbeddedTeacher {
  Block block;
  double wstar = 1;  // product of the teacher's leading taps
  Vec h_bound;       // certified ||H^(i)||_inf bounds, i = 0..J2
  int teacher_width = 0;
};

// Teacher layers with filters spread onto even taps (s = 2S). Output entry 1
// is wstar * xi.x + B, entries 2k are the teacher's hidden units, others 0.
EmbeddedTeacher embed_teacher(const Dcnn& teacher, const Block& linear_block, int s);

struct InterpolationPlan {
  Vec xi;
  int sign_wstar = 1;
  double wstar_abs = 1;
  double eps = 0;
  double eps_star = 0;
  Vec u;
  Vec t_grid;
  Vec corrections;
};

// Stacks N copies of the input block, ramps |w*| relu(u - t_k) at
// positions (k-1) K + 1 and teacher units plus B at positions 2k.
Block replication_block(int in_width, int N, int s, const InterpolationPlan& plan, double B0, double first_shift,
                        int teacher_width, ShiftRule rule = ShiftRule::kPartialNorm);
int replication_block_depth(int in_width, int N, int s);  // ceil((N-1) K / (s-1))

struct InterpolateOptions {
  double eps_frac = 0.5;          // eps = eps_frac * eps*
  std::optional<int> N;           // default: smallest odd >= 3n
  std::optional<double> B0;       // default: 1.25 max ||x||_inf
  ShiftRule rule = ShiftRule::kPartialNorm;
  int xi_retries = 64;
  // Solve each hat's head weights against the realized ramp rows instead of
  // the closed form; identical in exact arithmetic.
  bool calibrate_head = true;
  // max |student(x_i) - y_i| allowed; unset: measure only
  std::optional<double> tol_interp = 1e-6;
};

struct AddedParams {
  int d_final = 0;
  int J1 = 0;
  int s = 0;
  // d_final + 1 + J1 (s + 2) + 1 + 1
  long long total() const { return d_final + 1LL + static_cast<long long>(J1) * (s + 2) + 1 + 1; }
};

struct Interpolant {
  Dcnn student;
  InterpolationPlan plan;
  int J1 = 0, J2 = 0, J3 = 0, N = 0;
  double B0 = 0;
  double rep_B0 = 0;  // max(B^(J1+J2), ||H^(J2)||)
  double max_residual = 0;  // max |student(x_i) - y_i|
  AddedParams added;
};

Interpolant interpolate(const Dcnn& teacher, const Dataset& data, int s, std::uint64_t seed,
                        const InterpolateOptions& opt = {});

// phi(u) = (relu(u + eps) - 2 relu(u) + relu(u - eps)) / eps
double hat(double u, double eps);
bool in_slab(const InterpolationPlan& plan, const Vec& x);
// Fraction of xs within eps of some u_l along sgn(w*) xi.
double slab_mass(const InterpolationPlan& plan, const std::vector<Vec>& xs, double eps);

}  // namespace dc
