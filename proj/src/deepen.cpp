#include "deepconv/deepen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "deepconv/errors.hpp"

namespace dc {

void validate_dataset(const Dataset& data, bool require_distinct) {
  if (data.xs.size() != data.ys.size()) throw ValidationError("dataset: xs and ys differ in length");
  if (data.xs.empty()) throw ValidationError("dataset is empty");
  if (!(data.M > 0)) throw ValidationError("dataset: M must be positive");
  const std::size_t d = data.xs[0].size();
  if (d == 0) throw ValidationError("dataset: points must have positive dimension");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.xs[i].size() != d) throw ValidationError("dataset: inconsistent dimension at row " + std::to_string(i));
    if (!(std::abs(data.ys[i]) <= data.M))
      throw ValidationError("dataset: |y| exceeds M at row " + std::to_string(i));
  }
  if (require_distinct) {
    std::set<Vec> seen(data.xs.begin(), data.xs.end());
    if (seen.size() != data.xs.size()) throw ValidationError("dataset: duplicate data points");
  }
}

namespace {

FilterSeq pad_taps(const FilterSeq& f, int s) {
  if (f.degree() > s) throw ValidationError("factor longer than filter_len+1");
  Vec c = f.coeffs();
  c.resize(s + 1, 0.0);
  return FilterSeq(std::move(c));
}

Vec shift_sequence(const std::vector<FilterSeq>& factors, double B0, ShiftRule rule) {
  Vec B{B0};
  Vec partial{1.0};
  for (const auto& f : factors) {
    if (rule == ShiftRule::kFilterNormProduct) {
      B.push_back(B.back() * f.l1());
    } else {
      partial = convolve_seq(FilterSeq(partial), f).coeffs();
      double n = 0;
      for (double v : partial) n += std::abs(v);
      B.push_back(n * B0);
    }
  }
  for (double b : B)
    if (!std::isfinite(b)) throw NumericalError("block shift constant overflows binary64");
  return B;
}

}  // namespace

Block build_block(const std::vector<FilterSeq>& factors, int s, int K, const Vec& C_shift, double B0,
                  const Vec& beta, const BlockOptions& opt) {
  if (s < 2) throw ValidationError("filter length s must be at least 2");
  if (K < 1) throw ValidationError("block input width must be positive");
  if (!(B0 >= 0)) throw ValidationError("B0 must be nonnegative");
  if (factors.empty()) throw ValidationError("block needs at least one factor");
  Vec C(K, 0.0);
  if (C_shift.size() == 1)
    std::fill(C.begin(), C.end(), C_shift[0]);
  else if (C_shift.size() == static_cast<std::size_t>(K))
    C = C_shift;
  else if (!C_shift.empty())
    throw ValidationError("C_shift must be empty, a scalar, or of width K");

  std::vector<FilterSeq> f;
  for (const auto& w : factors) f.push_back(pad_taps(w, s));
  const int J = static_cast<int>(f.size());

  Block blk;
  blk.in_dim = K;
  blk.B = shift_sequence(f, B0, opt.rule);
  int width = K;
  for (int j = 0; j + 1 < J; ++j) {
    ConvLayer L;
    L.filter = f[j];
    Vec b;
    if (j == 0) {
      b = apply_conv(f[j], C);
      for (double& v : b) v -= blk.B[1];
    } else {
      b = apply_conv(f[j], Vec(width, 1.0));
      for (double& v : b) v = blk.B[j] * v - blk.B[j + 1];
    }
    L.bias = std::move(b);
    L.shape = identical_in_middle(L.bias, s) ? BiasShape::kMid : BiasShape::kFree;
    blk.layers.push_back(std::move(L));
    width += s;
  }

  ConvLayer last;
  last.filter = f[J - 1];
  last.downsample = opt.last_downsample;
  const int out = layer_out_width(width, s, opt.last_downsample);
  if (beta.size() != static_cast<std::size_t>(out))
    throw ValidationError("last bias has length " + std::to_string(beta.size()) + ", block output width is " +
                          std::to_string(out));
  last.bias.assign(out, 0.0);
  Vec constant(out);
  if (opt.calibrate) {
    LVec h(C.begin(), C.end());
    for (const auto& L : blk.layers) h = apply_layer(L, h);
    const LVec pre = conv_stage(last, h);
    for (int i = 0; i < out; ++i) constant[i] = static_cast<double>(pre[i]);
  } else {
    Vec full = J == 1 ? apply_conv(f[0], C) : apply_conv(f[J - 1], Vec(width, 1.0));
    if (J > 1)
      for (double& v : full) v *= blk.B[J - 1];
    constant = opt.last_downsample ? downsample(full, *opt.last_downsample) : full;
  }
  for (int i = 0; i < out; ++i) last.bias[i] = constant[i] + beta[i];
  blk.layers.push_back(std::move(last));
  blk.out_dim = out;
  return blk;
}

Block build_block(const FilterSeq& W, int s, int K, const Vec& C_shift, double B0, const Vec& beta,
                  const BlockOptions& opt) {
  int deg = W.degree();
  while (deg > 0 && W[deg] == 0.0) --deg;
  const int J = std::max(1, factor_count_bound(deg, s));
  const auto fr = factor_sequence(W, s, J);
  return build_block(fr.filters, s, K, C_shift, B0, beta, opt);
}

LVec block_preactivation(const Block& block, const LVec& input) {
  LVec h = input;
  for (std::size_t j = 0; j + 1 < block.layers.size(); ++j) h = apply_layer(block.layers[j], h);
  return conv_stage(block.layers.back(), h);
}

LVec block_output(const Block& block, const LVec& input) {
  LVec h = input;
  for (const auto& L : block.layers) h = apply_layer(L, h);
  return h;
}

// ---- linear features ----

FilterSeq linear_feature_sequence(const Vec& xi) {
  const std::size_t d = xi.size();
  if (d < 1) throw ValidationError("xi must be non-empty");
  // top-down: e_d, 0, e_{d-1}, 0, ..., e_2, 0, e_1, xi
  Vec top;
  top.reserve(2 * d * d);
  for (std::size_t k = d; k >= 2; --k) {
    for (std::size_t i = 1; i <= d; ++i) top.push_back(i == k ? 1.0 : 0.0);
    top.insert(top.end(), d, 0.0);
  }
  for (std::size_t i = 1; i <= d; ++i) top.push_back(i == 1 ? 1.0 : 0.0);
  top.insert(top.end(), xi.begin(), xi.end());
  std::reverse(top.begin(), top.end());
  return FilterSeq(std::move(top));
}

int linear_block_depth(int d, int s) {
  if (s < 2) throw ValidationError("filter length s must be at least 2");
  return (2 * d * d - 1 + s - 2) / (s - 1);
}

long long linear_block_free_params(int d, int s) {
  return static_cast<long long>(linear_block_depth(d, s)) * (s + 2) + 1;
}

Block linear_feature_block(const Vec& xi, int s, double B0, ShiftRule rule) {
  const int d = static_cast<int>(xi.size());
  if (s < 2 || s > d) throw ValidationError("linear feature block needs 2 <= s <= d");
  const int J1 = linear_block_depth(d, s);
  const auto fr = factor_sequence(linear_feature_sequence(xi), s, J1);
  Vec B = shift_sequence(fr.filters, B0, rule);
  const int out = (d + J1 * s) / d;
  BlockOptions opt;
  opt.rule = rule;
  opt.last_downsample = d;
  return build_block(fr.filters, s, d, Vec(d, 0.0), B0, Vec(out, -B.back()), opt);
}

// ---- teacher embedding ----

EmbeddedTeacher embed_teacher(const Dcnn& teacher, const Block& linear_block, int s) {
  const int S = teacher.filter_len();
  if (s != 2 * S) throw ValidationError("embedding needs s = 2 * teacher filter_len");
  if (teacher.depth() < 1) throw ValidationError("teacher must have at least one layer");
  const int d = teacher.input_dim();
  if (linear_block.out_dim < 2 * d) throw ValidationError("linear block narrower than 2d");
  for (int j = 0; j < teacher.depth(); ++j) {
    const auto& L = teacher.layers()[j];
    if (L.downsample) throw ValidationError("teacher layer " + std::to_string(j + 1) + " downsamples");
    if (L.filter[0] == 0.0) throw ValidationError("zero leading filter tap");
  }

  EmbeddedTeacher et;
  et.teacher_width = teacher.output_width();
  const double B_lin = linear_block.bound_B();
  double B_prev = B_lin;
  double hb = linear_block.B.front();
  et.h_bound.push_back(hb);
  int width = linear_block.out_dim;
  et.block.in_dim = width;
  et.block.B.push_back(B_lin);
  for (int i = 1; i <= teacher.depth(); ++i) {
    const auto& tl = teacher.layers()[i - 1];
    const FilterSeq& tw = tl.filter;
    Vec w(s + 1, 0.0);
    for (int m = 0; m <= S; ++m) w[2 * m] = tw[m];
    ConvLayer L;
    L.filter = FilterSeq(w);
    const double w1 = tw.l1();
    const double Bj = w1 * B_prev;
    const int out = width + s;
    Vec base = i == 1 ? apply_conv(L.filter, Vec(width, 1.0)) : Vec(out, 0.0);
    const int D = static_cast<int>(tl.bias.size());
    L.bias.assign(out, 0.0);
    for (int r = 0; r < out; ++r) {
      const double shifted = i == 1 ? B_lin * base[r] : 0.0;
      if (r == 0)
        L.bias[r] = tw[0] * B_prev - Bj;
      else if (r % 2 == 1 && (r + 1) / 2 <= D)
        L.bias[r] = shifted + tl.bias[(r + 1) / 2 - 1];
      else
        L.bias[r] = shifted + w1 * hb + 2.0 * Bj;
    }
    L.shape = identical_in_middle(L.bias, s) ? BiasShape::kMid : BiasShape::kFree;
    double bmax = 0;
    for (double v : tl.bias) bmax = std::max(bmax, std::abs(v));
    hb = w1 * hb + bmax;
    et.h_bound.push_back(hb);
    et.wstar *= tw[0];
    B_prev = Bj;
    et.block.B.push_back(Bj);
    et.block.layers.push_back(std::move(L));
    width = out;
  }
  et.block.out_dim = width;
  return et;
}

// ---- replication ----

int replication_block_depth(int in_width, int N, int s) {
  if (s < 2) throw ValidationError("filter length s must be at least 2");
  const long long v = static_cast<long long>(N - 1) * in_width;
  return static_cast<int>(std::max(1LL, (v + s - 2) / (s - 1)));
}

Block replication_block(int in_width, int N, int s, const InterpolationPlan& plan, double B0, double first_shift,
                        int teacher_width, ShiftRule rule) {
  const int n = static_cast<int>(plan.u.size());
  if (N < 1 || N % 2 == 0) throw ValidationError("replication needs odd N");
  if (s % 2 != 0) throw ValidationError("replication needs even s");
  if (N < 3 * n) throw ValidationError("replication needs N >= 3n");
  if (static_cast<int>(plan.t_grid.size()) != 3 * n) throw ValidationError("plan t-grid must have 3n entries");
  const int J3 = replication_block_depth(in_width, N, s);
  const int out = in_width + J3 * s;
  std::set<long long> ramps;
  for (int k = 0; k < 3 * n; ++k) ramps.insert(static_cast<long long>(k) * in_width);
  for (int k = 1; k <= teacher_width; ++k) {
    const long long pos = 2LL * k - 1;
    if (pos >= in_width || ramps.count(pos))
      throw ValidationError("ramp and teacher index families collide at position " + std::to_string(pos + 1));
  }

  const auto fr = factor_replication(in_width, N, s, J3);
  const Vec B = shift_sequence(fr.filters, B0, rule);
  const double Bf = B.back();
  Vec beta(out, Bf);
  for (int k = 1; k <= teacher_width; ++k) beta[2 * k - 1] = -Bf;
  for (int k = 0; k < 3 * n; ++k) beta[static_cast<std::size_t>(k) * in_width] = plan.wstar_abs * plan.t_grid[k];
  Vec C(in_width, 0.0);
  C[0] = first_shift;
  BlockOptions opt;
  opt.rule = rule;
  return build_block(fr.filters, s, in_width, C, B0, beta, opt);
}

// ---- interpolation ----

double hat(double u, double eps) {
  auto relu = [](double v) { return v > 0 ? v : 0.0; };
  return (relu(u + eps) - 2.0 * relu(u) + relu(u - eps)) / eps;
}

namespace {

double dot(const Vec& a, const Vec& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

double min_distance(const Vec& u, double v) {
  auto it = std::lower_bound(u.begin(), u.end(), v);
  double best = INFINITY;
  if (it != u.end()) best = std::min(best, *it - v);
  if (it != u.begin()) best = std::min(best, v - *std::prev(it));
  return best;
}

// last-layer pre-activation, long double throughout
LVec last_preact(const Dcnn& net, const Vec& x) {
  LVec h(x.begin(), x.end());
  const auto& layers = net.layers();
  for (std::size_t j = 0; j + 1 < layers.size(); ++j) h = apply_layer(layers[j], h);
  LVec z = conv_stage(layers.back(), h);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] -= layers.back().bias[i];
  return z;
}

// det of the 3x3 matrix with columns a, b, c
long double det3(const std::array<long double, 3>& a, const std::array<long double, 3>& b,
                 const std::array<long double, 3>& c) {
  return a[0] * (b[1] * c[2] - b[2] * c[1]) - b[0] * (a[1] * c[2] - a[2] * c[1]) + c[0] * (a[1] * b[2] - a[2] * b[1]);
}

}  // namespace

bool in_slab(const InterpolationPlan& plan, const Vec& x) {
  Vec su = plan.u;
  std::sort(su.begin(), su.end());
  return min_distance(su, plan.sign_wstar * dot(plan.xi, x)) < plan.eps;
}

double slab_mass(const InterpolationPlan& plan, const std::vector<Vec>& xs, double eps) {
  if (xs.empty()) return 0;
  Vec su = plan.u;
  std::sort(su.begin(), su.end());
  std::size_t hits = 0;
  for (const auto& x : xs)
    if (min_distance(su, plan.sign_wstar * dot(plan.xi, x)) < eps) ++hits;
  return static_cast<double>(hits) / static_cast<double>(xs.size());
}

Interpolant interpolate(const Dcnn& teacher, const Dataset& data, int s, std::uint64_t seed,
                        const InterpolateOptions& opt) {
  validate_dataset(data, true);
  const int d = data.dim();
  const int n = static_cast<int>(data.size());
  if (teacher.input_dim() != d) throw ValidationError("teacher input_dim does not match the data");
  if (s % 2 != 0 || s < 2) throw ValidationError("student filter length s must be even");
  if (teacher.filter_len() * 2 != s) throw ValidationError("teacher filter length must be s/2");
  if (s > d) throw ValidationError("student filter length must not exceed d");
  if (!(opt.eps_frac > 0 && opt.eps_frac < 1)) throw ValidationError("eps_frac must lie in (0, 1)");

  Interpolant res;
  double xmax = 0;
  for (const auto& x : data.xs)
    for (double v : x) xmax = std::max(xmax, std::abs(v));
  res.B0 = opt.B0 ? *opt.B0 : 1.25 * xmax;
  if (!(res.B0 > 0)) res.B0 = 1.0;
  if (res.B0 < xmax) throw ValidationError("B0 is smaller than max |x|");

  // direction with well separated projections
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec xi(d);
  bool ok = false;
  for (int attempt = 0; attempt < opt.xi_retries && !ok; ++attempt) {
    double nrm = 0;
    for (double& v : xi) {
      v = normal(rng);
      nrm += v * v;
    }
    nrm = std::sqrt(nrm);
    if (nrm == 0) continue;
    for (double& v : xi) v /= nrm;
    Vec p(n);
    double scale = 0;
    for (int l = 0; l < n; ++l) {
      p[l] = dot(xi, data.xs[l]);
      scale = std::max(scale, std::abs(p[l]));
    }
    std::sort(p.begin(), p.end());
    const double tol = 1e-9 * std::max(scale, 1e-300);
    ok = true;
    for (int l = 1; l < n; ++l)
      if (p[l] - p[l - 1] <= tol) ok = false;
  }
  if (!ok) throw NumericalError("could not find a direction separating the data projections");

  Block lin = linear_feature_block(xi, s, res.B0, opt.rule);
  EmbeddedTeacher emb = embed_teacher(teacher, lin, s);
  res.J1 = lin.depth();
  res.J2 = emb.block.depth();

  InterpolationPlan& plan = res.plan;
  plan.xi = xi;
  plan.sign_wstar = emb.wstar > 0 ? 1 : -1;
  plan.wstar_abs = std::abs(emb.wstar);
  plan.u.resize(n);
  for (int l = 0; l < n; ++l) plan.u[l] = plan.sign_wstar * dot(xi, data.xs[l]);
  Vec su = plan.u;
  std::sort(su.begin(), su.end());
  plan.eps_star = INFINITY;
  for (int l = 1; l < n; ++l) plan.eps_star = std::min(plan.eps_star, 0.5 * (su[l] - su[l - 1]));
  if (n == 1) plan.eps_star = std::max(1.0, std::abs(su[0]));
  plan.eps = opt.eps_frac * plan.eps_star;

  struct Knot {
    double t;
    int l;
    double weight;
  };
  std::vector<Knot> knots;
  for (int l = 0; l < n; ++l) {
    knots.push_back({plan.u[l] - plan.eps, l, 1.0});
    knots.push_back({plan.u[l], l, -2.0});
    knots.push_back({plan.u[l] + plan.eps, l, 1.0});
  }
  std::sort(knots.begin(), knots.end(), [](const Knot& a, const Knot& b) { return a.t < b.t; });
  for (std::size_t k = 1; k < knots.size(); ++k)
    if (!(knots[k].t > knots[k - 1].t)) throw NumericalError("threshold grid has coincident knots");
  for (const auto& k : knots) plan.t_grid.push_back(k.t);

  plan.corrections.resize(n);
  for (int l = 0; l < n; ++l) plan.corrections[l] = data.ys[l] - predict(teacher, data.xs[l], false);

  res.N = opt.N ? *opt.N : (3 * n % 2 == 1 ? 3 * n : 3 * n + 1);
  const double B_emb = emb.block.bound_B();
  res.rep_B0 = std::max(B_emb, emb.h_bound.back());
  const int K = emb.block.out_dim;
  Block rep = replication_block(K, res.N, s, plan, res.rep_B0, B_emb, emb.teacher_width, opt.rule);
  res.J3 = rep.depth();

  std::vector<ConvLayer> layers = lin.layers;
  layers.insert(layers.end(), emb.block.layers.begin(), emb.block.layers.end());
  layers.insert(layers.end(), rep.layers.begin(), rep.layers.end());

  const double Bf = rep.bound_B();
  Vec c(rep.out_dim, 0.0);
  double a = teacher.out_offset();
  for (int k = 1; k <= emb.teacher_width; ++k) {
    c[2 * k - 1] = teacher.out_coeffs()[k - 1];
    a -= teacher.out_coeffs()[k - 1] * Bf;
  }
  const double scale = 1.0 / (plan.eps * plan.wstar_abs);
  for (std::size_t k = 0; k < knots.size(); ++k)
    c[k * K] = knots[k].weight * plan.corrections[knots[k].l] * scale;

  if (opt.calibrate_head) {
    // Stored taps and biases are doubles, so each ramp row realizes g_k u + b_k
    // with g_k, b_k off by ~1e-12, which the 1/eps head weights amplify. Fit
    // the realized rows and solve each hat's three weights against them.
    const Dcnn probe(d, s, layers, c, a, teacher.truncation());
    std::vector<Vec> pts = data.xs;
    for (double tau : {-0.5, 0.0, 0.5}) {
      Vec x(d);
      for (int i = 0; i < d; ++i) x[i] = tau * res.B0 * xi[i];
      pts.push_back(std::move(x));
    }
    std::vector<long double> pu(pts.size());
    std::vector<LVec> pre(pts.size());
    for (std::size_t p = 0; p < pts.size(); ++p) {
      pu[p] = plan.sign_wstar * static_cast<long double>(dot(xi, pts[p]));
      pre[p] = last_preact(probe, pts[p]);
    }
    const long double m = static_cast<long double>(pts.size());
    long double su = 0, suu = 0;
    for (long double u : pu) {
      su += u;
      suu += u * u;
    }
    const std::size_t T = knots.size();
    std::vector<long double> gain(T), off(T);
    for (std::size_t k = 0; k < T; ++k) {
      long double sr = 0, sur = 0;
      for (std::size_t p = 0; p < pts.size(); ++p) {
        sr += pre[p][k * K];
        sur += pu[p] * pre[p][k * K];
      }
      gain[k] = (m * sur - su * sr) / (m * suu - su * su);
      off[k] = (sr - gain[k] * su) / m;
    }
    std::vector<std::array<std::size_t, 3>> group(n);
    std::vector<int> filled(n, 0);
    for (std::size_t k = 0; k < T; ++k) group[knots[k].l][filled[knots[k].l]++] = k;
    for (int l = 0; l < n; ++l) {
      // right of the hat: zero slope and intercept; at x_l: the correction
      const LVec at = last_preact(probe, data.xs[l]);
      std::array<std::array<long double, 3>, 3> col;
      for (int i = 0; i < 3; ++i) {
        const std::size_t k = group[l][i];
        col[i] = {gain[k], off[k], std::max(at[k * K], 0.0L)};
      }
      const std::array<long double, 3> rhs{0.0L, 0.0L, static_cast<long double>(plan.corrections[l])};
      const long double D = det3(col[0], col[1], col[2]);
      if (!std::isfinite(static_cast<double>(D)) || D == 0) continue;  // keep the closed form
      c[group[l][0] * K] = static_cast<double>(det3(rhs, col[1], col[2]) / D);
      c[group[l][1] * K] = static_cast<double>(det3(col[0], rhs, col[2]) / D);
      c[group[l][2] * K] = static_cast<double>(det3(col[0], col[1], rhs) / D);
    }
  }

  res.student = Dcnn(d, s, std::move(layers), std::move(c), a, teacher.truncation());
  res.added = AddedParams{res.student.output_width(), res.J1, s};
  for (int l = 0; l < n; ++l)
    res.max_residual = std::max(res.max_residual, std::abs(predict(res.student, data.xs[l], false) - data.ys[l]));
  // the head weights scale like 1/(eps |w*|), so rounding can outgrow the tolerance
  if (opt.tol_interp && !(res.max_residual <= *opt.tol_interp))
    throw NumericalError("interpolation residual " + std::to_string(res.max_residual) + " exceeds tol_interp " +
                         std::to_string(*opt.tol_interp) + " (head weights up to 1/(eps |w*|) = " +
                         std::to_string(1.0 / (plan.eps * plan.wstar_abs)) + ")");
  return res;
}

}  // namespace dc
