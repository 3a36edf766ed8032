#include "deepconv/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "deepconv/errors.hpp"

namespace dc {

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be nonnegative");
  if (!(step_size >= 0)) throw ValidationError("step size must be nonnegative");
  if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1)) throw ValidationError("Adam betas must lie in (0, 1)");
  if (!(eps_adam > 0)) throw ValidationError("Adam epsilon must be positive");
  if (batch < 0) throw ValidationError("batch must be nonnegative");
  if (!(init_scale > 0)) throw ValidationError("init_scale must be positive");
}

std::size_t ParamLayout::bias_slot(int j, int i) const {
  if (!tied[j]) return i;
  const int w = widths[j + 1];
  if (i < s - 1) return i;
  if (i <= w - s) return s - 1;
  return s + (i - (w - s + 1));
}

ParamLayout param_layout(const Dcnn& net) {
  ParamLayout p;
  p.J = net.depth();
  p.s = net.filter_len();
  p.widths = net.widths();
  std::size_t off = 0;
  for (int j = 0; j < p.J; ++j) {
    const int w = p.widths[j + 1];
    const bool tied = j + 1 < p.J && net.layers()[j].shape == BiasShape::kMid && w >= 2 * p.s - 1;
    p.tied.push_back(tied);
    p.filter_off.push_back(off);
    off += p.s + 1;
    p.bias_off.push_back(off);
    p.bias_slots.push_back(tied ? 2 * p.s - 1 : w);
    off += p.bias_slots.back();
  }
  p.c_off = off;
  off += p.widths.back();
  p.a_off = off++;
  p.total = off;
  return p;
}

Vec flatten_params(const Dcnn& net) {
  const ParamLayout p = param_layout(net);
  Vec th(p.total, 0.0);
  for (int j = 0; j < p.J; ++j) {
    const auto& L = net.layers()[j];
    for (int k = 0; k <= p.s; ++k) th[p.filter_off[j] + k] = L.filter[k];
    for (int i = 0; i < p.widths[j + 1]; ++i) th[p.bias_off[j] + p.bias_slot(j, i)] = L.bias[i];
  }
  for (int i = 0; i < p.widths.back(); ++i) th[p.c_off + i] = net.out_coeffs()[i];
  th[p.a_off] = net.out_offset();
  return th;
}

namespace {

std::vector<Vec> expand_biases(const ParamLayout& p, const Vec& th) {
  std::vector<Vec> b(p.J);
  for (int j = 0; j < p.J; ++j) {
    b[j].resize(p.widths[j + 1]);
    for (int i = 0; i < p.widths[j + 1]; ++i) b[j][i] = th[p.bias_off[j] + p.bias_slot(j, i)];
  }
  return b;
}

}  // namespace

Dcnn with_params(const Dcnn& net, const Vec& theta) {
  const ParamLayout p = param_layout(net);
  if (theta.size() != p.total) throw ValidationError("parameter vector has the wrong length");
  const auto b = expand_biases(p, theta);
  std::vector<ConvLayer> layers = net.layers();
  for (int j = 0; j < p.J; ++j) {
    layers[j].filter = FilterSeq(Vec(theta.begin() + p.filter_off[j], theta.begin() + p.filter_off[j] + p.s + 1));
    layers[j].bias = b[j];
    layers[j].shape = p.tied[j] ? BiasShape::kMid : BiasShape::kFree;
  }
  Vec c(theta.begin() + p.c_off, theta.begin() + p.c_off + p.widths.back());
  return Dcnn(net.input_dim(), net.filter_len(), std::move(layers), std::move(c), theta[p.a_off],
              net.truncation());
}

Dcnn init_net(int d, int s, int J, bool tied, double init_scale, std::uint64_t seed,
              std::optional<double> truncation) {
  if (d < 1 || s < 1 || J < 1) throw ValidationError("init_net needs positive d, s, J");
  if (!(init_scale > 0)) throw ValidationError("init_scale must be positive");
  std::mt19937_64 rng(seed);
  const double a = init_scale / std::sqrt(static_cast<double>(s + 1));
  std::uniform_real_distribution<double> U(-a, a);
  std::vector<ConvLayer> layers;
  int w = d;
  for (int j = 0; j < J; ++j) {
    ConvLayer L;
    Vec f(s + 1);
    for (double& v : f) v = U(rng);
    L.filter = FilterSeq(f);
    w += s;
    L.bias.resize(w);
    const bool tie = tied && j + 1 < J && w >= 2 * s - 1;
    if (tie) {
      const double mid = U(rng);
      for (int i = 0; i < w; ++i) L.bias[i] = (i >= s - 1 && i <= w - s) ? mid : U(rng);
      L.shape = BiasShape::kMid;
    } else {
      for (double& v : L.bias) v = U(rng);
    }
    layers.push_back(std::move(L));
  }
  return Dcnn(d, s, std::move(layers), Vec(w, 0.0), 0.0, truncation);
}

namespace {

struct Model {
  const ParamLayout& p;
  const Vec& th;
  std::vector<Vec> bias;
  std::vector<std::optional<int>> ds;
};

struct Trace {
  std::vector<Vec> h;     // h_0..h_J
  std::vector<Vec> full;  // T h_{j-1} before downsampling
};

double run_forward(const Model& m, const Vec& x, Trace& tr) {
  const ParamLayout& p = m.p;
  tr.h.resize(p.J + 1);
  tr.full.resize(p.J);
  tr.h[0] = x;
  for (int j = 0; j < p.J; ++j) {
    const Vec& hin = tr.h[j];
    Vec& full = tr.full[j];
    full.resize(hin.size() + p.s);
    apply_conv_raw(m.th.data() + p.filter_off[j], p.s + 1, hin.data(), hin.size(), full.data());
    Vec& out = tr.h[j + 1];
    const int w = p.widths[j + 1];
    out.resize(w);
    const int mm = m.ds[j] ? *m.ds[j] : 1;
    for (int i = 0; i < w; ++i) {
      const double v = full[(i + 1) * mm - 1] - m.bias[j][i];
      out[i] = v > 0 ? v : 0.0;
    }
  }
  double y = m.th[p.a_off];
  for (int i = 0; i < p.widths.back(); ++i) y += m.th[p.c_off + i] * tr.h[p.J][i];
  return y;
}

void run_backward(const Model& m, const Trace& tr, double df, Vec& g) {
  const ParamLayout& p = m.p;
  Vec dh(p.widths.back());
  for (int i = 0; i < p.widths.back(); ++i) {
    g[p.c_off + i] += df * tr.h[p.J][i];
    dh[i] = df * m.th[p.c_off + i];
  }
  g[p.a_off] += df;
  for (int j = p.J - 1; j >= 0; --j) {
    const int w = p.widths[j + 1];
    const int mm = m.ds[j] ? *m.ds[j] : 1;
    Vec dfull(tr.full[j].size(), 0.0);
    for (int i = 0; i < w; ++i) {
      if (tr.h[j + 1][i] <= 0) continue;  // relu'(0) = 0
      g[p.bias_off[j] + p.bias_slot(j, i)] -= dh[i];
      dfull[(i + 1) * mm - 1] = dh[i];
    }
    const Vec& hin = tr.h[j];
    const double* wf = m.th.data() + p.filter_off[j];
    for (int k = 0; k <= p.s; ++k) {
      double acc = 0;
      for (std::size_t c = 0; c < hin.size(); ++c) acc += dfull[c + k] * hin[c];
      g[p.filter_off[j] + k] += acc;
    }
    if (j == 0) break;
    Vec prev(hin.size(), 0.0);
    for (std::size_t c = 0; c < hin.size(); ++c) {
      double acc = 0;
      for (int k = 0; k <= p.s; ++k) acc += wf[k] * dfull[c + k];
      prev[c] = acc;
    }
    dh.swap(prev);
  }
}

Model make_model(const Dcnn& net, const ParamLayout& p, const Vec& th) {
  Model m{p, th, expand_biases(p, th), {}};
  for (const auto& L : net.layers()) m.ds.push_back(L.downsample);
  return m;
}

// mean squared error over idx; accumulates its gradient into g when given
double loss_grad(const Dcnn& net, const ParamLayout& p, const Vec& th, const Dataset& data,
                 const std::vector<std::size_t>& idx, Vec* g) {
  const Model m = make_model(net, p, th);
  Trace tr;
  double sse = 0;
  const double scale = 2.0 / static_cast<double>(idx.size());
  if (g) g->assign(p.total, 0.0);
  for (std::size_t i : idx) {
    const double r = run_forward(m, data.xs[i], tr) - data.ys[i];
    sse += r * r;
    if (g) run_backward(m, tr, scale * r, *g);
  }
  return sse / static_cast<double>(idx.size());
}

std::vector<std::size_t> all_rows(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void check_data(const Dcnn& net, const Dataset& data) {
  if (data.xs.empty()) throw ValidationError("dataset is empty");
  if (data.xs.size() != data.ys.size()) throw ValidationError("dataset: xs and ys differ in length");
  for (const auto& x : data.xs)
    if (static_cast<int>(x.size()) != net.input_dim()) throw ValidationError("dataset dimension != input_dim");
}

}  // namespace

double loss(const Dcnn& net, const Dataset& data) {
  check_data(net, data);
  const ParamLayout p = param_layout(net);
  return loss_grad(net, p, flatten_params(net), data, all_rows(data), nullptr);
}

Vec grad(const Dcnn& net, const Dataset& data) {
  check_data(net, data);
  const ParamLayout p = param_layout(net);
  Vec g;
  loss_grad(net, p, flatten_params(net), data, all_rows(data), &g);
  return g;
}

double test_rmse(const Dcnn& net, const Dataset& data) {
  check_data(net, data);
  double sse = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = truncate(predict(net, data.xs[i], false), data.M) - data.ys[i];
    sse += r * r;
  }
  return std::sqrt(sse / static_cast<double>(data.size()));
}

FitResult fit(const Dcnn& net, const Dataset& data, const Dataset& test, const TrainConfig& cfg) {
  cfg.validate();
  check_data(net, data);
  check_data(net, test);
  const auto t0 = std::chrono::steady_clock::now();
  const ParamLayout p = param_layout(net);
  Vec th = flatten_params(net);
  Vec mom(p.total, 0.0), vel(p.total, 0.0), g;
  std::vector<bool> frozen(p.total, false);
  if (!cfg.train_conv)
    for (std::size_t i = 0; i < p.c_off; ++i) frozen[i] = true;

  const std::size_t n = data.size();
  const std::size_t batch = cfg.batch > 0 ? static_cast<std::size_t>(cfg.batch) : (n <= 1000 ? n : 128);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order = all_rows(data);
  TrainReport rep;
  long long t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + std::min(n, start + batch));
      loss_grad(net, p, th, data, idx, &g);
      ++t;
      for (std::size_t i = 0; i < p.total; ++i) {
        if (frozen[i]) continue;
        if (cfg.optimizer == Optimizer::kSgd) {
          th[i] -= cfg.step_size * g[i];
        } else {
          mom[i] = cfg.beta1 * mom[i] + (1 - cfg.beta1) * g[i];
          vel[i] = cfg.beta2 * vel[i] + (1 - cfg.beta2) * g[i] * g[i];
          const double mh = mom[i] / (1 - std::pow(cfg.beta1, static_cast<double>(t)));
          const double vh = vel[i] / (1 - std::pow(cfg.beta2, static_cast<double>(t)));
          th[i] -= cfg.step_size * mh / (std::sqrt(vh) + cfg.eps_adam);
        }
      }
    }
    const double mse = loss_grad(net, p, th, data, all_rows(data), nullptr);
    if (!std::isfinite(mse))
      throw NumericalError("training diverged at epoch " + std::to_string(epoch + 1) +
                           " (last finite epoch " + std::to_string(epoch) + ")");
    rep.train_mse.push_back(mse);
  }
  Dcnn out = with_params(net, th);
  rep.test_rmse = test_rmse(out, test);
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(out), std::move(rep)};
}

}  // namespace dc
