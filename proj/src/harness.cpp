#include "deepconv/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "deepconv/capacity.hpp"
#include "deepconv/errors.hpp"
#include "json.hpp"

namespace dc {

double regression_fn(const Vec& x) {
  double r2 = 0;
  for (double v : x) r2 += v * v;
  const double r4 = r2 * r2;
  return std::sin(r4) + std::cos(r4);
}

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ULL);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::pair<Dataset, Dataset> simulate(const SimSpec& spec) {
  if (spec.d < 1 || spec.n < 1 || spec.test_n < 1) throw ValidationError("simulate: sizes must be positive");
  if (!(spec.noise_sd >= 0)) throw ValidationError("simulate: noise_sd must be nonnegative");
  if (!(spec.domain_halfwidth > 0)) throw ValidationError("simulate: domain half-width must be positive");
  std::mt19937_64 train_rng(split_seed(spec.seed, 1));
  std::mt19937_64 test_rng(split_seed(spec.seed, 2));
  std::uniform_real_distribution<double> U(-spec.domain_halfwidth, spec.domain_halfwidth);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto draw = [&](std::mt19937_64& rng, int count, bool noisy) {
    Dataset ds;
    ds.M = kSimM;
    for (int i = 0; i < count; ++i) {
      Vec x(spec.d);
      for (double& v : x) v = U(rng);
      double y = regression_fn(x);
      if (noisy) y = std::clamp(y + spec.noise_sd * noise(rng), -kSimM, kSimM);
      ds.xs.push_back(std::move(x));
      ds.ys.push_back(y);
    }
    return ds;
  };
  Dataset train = draw(train_rng, spec.n, true);
  Dataset test = draw(test_rng, spec.test_n, false);
  return {std::move(train), std::move(test)};
}

int depth_for(int n, double alpha) {
  if (n < 1) throw ValidationError("depth_for: n must be positive");
  if (!(alpha > 0)) throw ValidationError("depth_for: alpha must be positive");
  const double target = std::log(static_cast<double>(n)) * alpha;
  int J = 1;
  // J^(1/alpha) >= n, compared in logs with a guard for exact powers
  while (std::log(static_cast<double>(J)) < target - 1e-12) ++J;
  return J;
}

TrainConfig ExperimentSpec::default_experiment_train() {
  TrainConfig c;
  c.epochs = 300;
  c.tied_bias = false;
  return c;
}

TrainConfig PipelineSpec::default_teacher_train() {
  TrainConfig c;
  c.epochs = 300;
  c.tied_bias = true;
  return c;
}

std::vector<int> full_n_grid() { return {100, 300, 500, 700, 1000, 1500, 2000, 3000, 4000, 5000, 6000}; }

std::vector<ExperimentRow> run_experiment(const ExperimentSpec& spec) {
  if (spec.n_grid.empty() || spec.seeds.empty()) throw ValidationError("experiment grid is empty");
  spec.train.validate();
  std::vector<ExperimentRow> rows;
  std::vector<ExperimentRow> summary;
  for (int n : spec.n_grid) {
    if (n < 1) throw ValidationError("experiment: n must be positive");
    const int J = depth_for(n, 1.0 / 3.0);
    Vec ok_values;
    for (std::uint64_t seed : spec.seeds) {
      ExperimentRow r{"run", spec.d, n, J, seed, 0.0, std::nullopt, "ok"};
      try {
        SimSpec sim{spec.d, n, spec.test_n, spec.noise_sd, spec.domain_halfwidth, split_seed(seed, n)};
        auto [train, test] = simulate(sim);
        TrainConfig cfg = spec.train;
        cfg.seed = split_seed(seed, static_cast<std::uint64_t>(n) + (1ULL << 32));
        Dcnn net = init_net(spec.d, spec.S, J, cfg.tied_bias, cfg.init_scale, cfg.seed, kSimM);
        r.test_rmse = fit(net, train, test, cfg).report.test_rmse;
        ok_values.push_back(r.test_rmse);
      } catch (const NumericalError& e) {
        r.status = "diverged";
        r.test_rmse = NAN;
      }
      rows.push_back(r);
    }
    double mean = 0, sd = 0;
    for (double v : ok_values) mean += v;
    mean = ok_values.empty() ? NAN : mean / ok_values.size();
    for (double v : ok_values) sd += (v - mean) * (v - mean);
    sd = ok_values.size() > 1 ? std::sqrt(sd / (ok_values.size() - 1)) : 0.0;
    const std::string st = ok_values.size() == spec.seeds.size() ? "ok" : "partial";
    summary.push_back({"summary", spec.d, n, J, std::nullopt, mean, sd, st});
  }
  rows.insert(rows.end(), summary.begin(), summary.end());
  return rows;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string experiment_csv(const std::vector<ExperimentRow>& rows) {
  std::ostringstream os;
  os << "# dcnn-experiment-csv v1\n";
  os << "kind,d,n,J,seed,test_rmse,test_rmse_sd,status\n";
  for (const auto& r : rows)
    os << r.kind << ',' << r.d << ',' << r.n << ',' << r.J << ',' << (r.seed ? std::to_string(*r.seed) : "")
       << ',' << num(r.test_rmse) << ',' << (r.rmse_sd ? num(*r.rmse_sd) : "") << ',' << r.status << '\n';
  return os.str();
}

PipelineReport run_pipeline(const PipelineSpec& spec) {
  if (!(spec.alpha > 0 && spec.alpha < 0.5)) throw ValidationError("pipeline needs 0 < alpha < 1/2");
  if (spec.s % 2 != 0 || spec.s < 4 || spec.s > spec.d) throw ValidationError("pipeline needs even s with 4 <= s <= d");
  const auto t0 = std::chrono::steady_clock::now();
  PipelineReport r;
  r.d = spec.d;
  r.n = spec.n;
  r.s = spec.s;
  r.S = spec.s / 2;
  r.alpha = spec.alpha;
  r.J2 = depth_for(spec.n, spec.alpha);

  SimSpec sim{spec.d, spec.n, spec.test_n, spec.noise_sd, spec.domain_halfwidth, split_seed(spec.seed, 11)};
  auto [train, test] = simulate(sim);
  TrainConfig cfg = spec.teacher_train;
  cfg.seed = split_seed(spec.seed, 12);
  Dcnn teacher = init_net(spec.d, r.S, r.J2, cfg.tied_bias, cfg.init_scale, cfg.seed, kSimM);
  teacher = fit(teacher, train, test, cfg).net;
  // the embedding needs nonzero leading taps
  Vec th = flatten_params(teacher);
  const ParamLayout lay = param_layout(teacher);
  for (int j = 0; j < lay.J; ++j)
    if (th[lay.filter_off[j]] == 0.0) th[lay.filter_off[j]] = 1e-6;
  teacher = with_params(teacher, th);
  r.teacher_rmse = test_rmse(teacher, test);
  r.teacher_params = cfg.tied_bias ? count_free_params(teacher) : static_cast<long long>(lay.total);

  InterpolateOptions opt;
  opt.N = spec.N ? *spec.N : 4 * spec.n + 1;
  opt.tol_interp.reset();  // reported, not enforced
  const Interpolant ip = interpolate(teacher, train, spec.s, split_seed(spec.seed, 13), opt);
  r.J1 = ip.J1;
  r.J3 = ip.J3;
  r.N = ip.N;
  r.student_depth = ip.student.depth();
  r.student_width = ip.student.output_width();
  r.added_params = ip.added.total();
  r.student_params = r.teacher_params + r.added_params;
  r.eps = ip.plan.eps;
  r.max_interp_residual = ip.max_residual;
  r.student_rmse = test_rmse(ip.student, test);
  r.slab_mass = slab_mass(ip.plan, test.xs, ip.plan.eps);

  if (r.J2 >= 2) {
    const auto pd = pdim_dcnn(r.J2, r.S, spec.d);
    r.pdim_explicit = pd.explicit_bound;
    r.pdim_c0 = pd.c0_form;
  } else {
    r.pdim_explicit = r.pdim_c0 = NAN;
  }
  r.rate_bound = spec.n >= 3 && r.J2 >= 2 && spec.d >= 2
                     ? rate_bound_theorem2(spec.n, spec.d, r.J2, spec.delta)
                     : NAN;
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string pipeline_json(const PipelineReport& r) {
  nlohmann::ordered_json j;
  auto put = [&](const char* k, double v) { j[k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nullptr; };
  j["d"] = r.d;
  j["n"] = r.n;
  j["alpha"] = r.alpha;
  j["s"] = r.s;
  j["S"] = r.S;
  j["J1"] = r.J1;
  j["J2"] = r.J2;
  j["J3"] = r.J3;
  j["N"] = r.N;
  j["student_depth"] = r.student_depth;
  j["student_width"] = r.student_width;
  j["teacher_params"] = r.teacher_params;
  j["added_params"] = r.added_params;
  j["student_params"] = r.student_params;
  put("teacher_rmse", r.teacher_rmse);
  put("student_rmse", r.student_rmse);
  put("max_interp_residual", r.max_interp_residual);
  put("eps", r.eps);
  put("slab_mass", r.slab_mass);
  put("pdim_explicit", r.pdim_explicit);
  put("pdim_c0_form", r.pdim_c0);
  put("rate_bound", r.rate_bound);
  put("wall_time", r.wall_time);
  return j.dump(1);
}

std::string dataset_csv(const Dataset& data) {
  std::ostringstream os;
  const int d = data.dim();
  for (int k = 1; k <= d; ++k) os << 'x' << k << ',';
  os << "y\n";
  char buf[40];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.xs[i]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", data.ys[i]);
    os << buf << '\n';
  }
  return os.str();
}

Dataset parse_dataset_csv(const std::string& text, double M) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("data CSV is empty");
  std::size_t cols = 1;
  for (char ch : line) cols += ch == ',';
  if (cols < 2) throw ValidationError("data CSV needs at least one feature column and a label");
  Dataset ds;
  ds.M = M;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    Vec row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ValidationError("data CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != cols)
      throw ValidationError("data CSV line " + std::to_string(lineno) + ": expected " + std::to_string(cols) +
                            " columns");
    ds.ys.push_back(row.back());
    row.pop_back();
    ds.xs.push_back(std::move(row));
  }
  validate_dataset(ds, false);
  return ds;
}

}  // namespace dc
