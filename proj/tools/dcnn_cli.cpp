// dcnn: simulate, train, deepen, bounds, experiment, pipeline.
// Exit codes: 0 ok, 2 validation error, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "deepconv/capacity.hpp"
#include "deepconv/dcnn.hpp"
#include "deepconv/deepen.hpp"
#include "deepconv/errors.hpp"
#include "deepconv/harness.hpp"
#include "deepconv/trainer.hpp"

using namespace dc;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const auto dot = path.rfind('.');
  if (dot == std::string::npos || path.find('/', dot) != std::string::npos) return path + suffix;
  return path.substr(0, dot) + suffix + path.substr(dot);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-padded 1-D deep convolutional networks: construction, deepening, training"};
  app.require_subcommand(1);

  // simulate
  SimSpec sim;
  std::string sim_out = "-";
  auto* c_sim = app.add_subcommand("simulate", "draw the sin+cos simulation data");
  c_sim->add_option("--d", sim.d, "input dimension");
  c_sim->add_option("--n", sim.n, "training size");
  c_sim->add_option("--test-n", sim.test_n, "test size");
  c_sim->add_option("--noise-sd", sim.noise_sd, "label noise standard deviation");
  c_sim->add_option("--halfwidth", sim.domain_halfwidth, "x ~ U[-h, h]^d");
  c_sim->add_option("--seed", sim.seed);
  c_sim->add_option("--out", sim_out, "training CSV; test CSV goes to <out>.test.<ext>");

  // train
  std::string tr_data, tr_test, tr_net_out, tr_report_out = "-";
  int tr_depth = 3, tr_s = 2;
  double tr_M = kSimM;
  bool tr_untied = false;
  TrainConfig tcfg;
  auto* c_train = app.add_subcommand("train", "fit a DCNN by Adam on squared loss");
  c_train->add_option("--data", tr_data)->required();
  c_train->add_option("--test", tr_test)->required();
  c_train->add_option("--depth", tr_depth);
  c_train->add_option("--filter-len", tr_s);
  c_train->add_option("--epochs", tcfg.epochs);
  c_train->add_option("--lr", tcfg.step_size);
  c_train->add_option("--batch", tcfg.batch, "0 = full batch up to n=1000, else 128");
  c_train->add_option("--seed", tcfg.seed);
  c_train->add_option("--M", tr_M, "label bound / truncation level");
  c_train->add_flag("--untied", tr_untied, "train every bias entry separately");
  c_train->add_option("--out-net", tr_net_out);
  c_train->add_option("--out-report", tr_report_out, "CSV epoch,train_mse");
  c_train->add_option("--out", tr_report_out, "alias of --out-report");

  // deepen
  std::string dp_teacher, dp_data, dp_out = "-";
  int dp_s = 4;
  double dp_eps_frac = 0.5, dp_M = kSimM;
  int dp_N = 0;
  std::uint64_t dp_seed = 0;
  auto* c_deep = app.add_subcommand("deepen", "deepen a teacher into an interpolating student");
  c_deep->add_option("--teacher", dp_teacher)->required();
  c_deep->add_option("--data", dp_data)->required();
  c_deep->add_option("--filter-len", dp_s, "student filter length s (even, teacher uses s/2)");
  c_deep->add_option("--eps-frac", dp_eps_frac, "eps as a fraction of eps*");
  c_deep->add_option("--n-rep", dp_N, "replication count N (odd, >= 3n); 0 = smallest valid");
  c_deep->add_option("--M", dp_M);
  c_deep->add_option("--seed", dp_seed);
  c_deep->add_option("--out", dp_out);

  // bounds
  int b_J = 3, b_S = 2, b_d = 10;
  double b_n = 1000, b_delta = 0.05, b_c0 = 1.0, b_C = 1.0;
  std::string b_out = "-";
  std::uint64_t b_seed = 0;
  auto* c_bounds = app.add_subcommand("bounds", "evaluate the capacity and rate formulas");
  c_bounds->add_option("--j", b_J);
  c_bounds->add_option("--s", b_S);
  c_bounds->add_option("--d", b_d);
  c_bounds->add_option("--n", b_n);
  c_bounds->add_option("--delta", b_delta);
  c_bounds->add_option("--c0", b_c0, "unspecified absolute constant, default 1");
  c_bounds->add_option("--C", b_C, "unspecified absolute constant, default 1");
  c_bounds->add_option("--seed", b_seed, "unused; accepted for uniformity");
  c_bounds->add_option("--out", b_out);

  // experiment
  ExperimentSpec ex;
  bool ex_full = false;
  int ex_seeds = 5;
  std::uint64_t ex_seed0 = 0;
  std::string ex_out = "-";
  auto* c_exp = app.add_subcommand("experiment", "RMSE sweep over n with J = ceil(n^(1/3))");
  c_exp->add_option("--d", ex.d);
  c_exp->add_option("--n-grid", ex.n_grid)->delimiter(',');
  c_exp->add_flag("--full-grid", ex_full, "use the full n grid up to 6000");
  c_exp->add_option("--seeds", ex_seeds, "repetitions per n");
  c_exp->add_option("--seed", ex_seed0, "first seed");
  c_exp->add_option("--epochs", ex.train.epochs);
  c_exp->add_option("--test-n", ex.test_n);
  c_exp->add_option("--out", ex_out);

  // pipeline
  PipelineSpec pl;
  int pl_N = 0;
  std::string pl_out = "-";
  auto* c_pipe = app.add_subcommand("pipeline", "train a teacher, deepen it, compare both");
  c_pipe->add_option("--d", pl.d);
  c_pipe->add_option("--n", pl.n);
  c_pipe->add_option("--alpha", pl.alpha);
  c_pipe->add_option("--s", pl.s);
  c_pipe->add_option("--n-rep", pl_N, "0 = 4n+1");
  c_pipe->add_option("--epochs", pl.teacher_train.epochs);
  c_pipe->add_option("--test-n", pl.test_n);
  c_pipe->add_option("--delta", pl.delta);
  c_pipe->add_option("--seed", pl.seed);
  c_pipe->add_option("--out", pl_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*c_sim) {
      auto [train, test] = simulate(sim);
      write_out(sim_out, dataset_csv(train));
      if (sim_out != "-") write_out(with_suffix(sim_out, ".test"), dataset_csv(test));
    } else if (*c_train) {
      const Dataset train = parse_dataset_csv(read_file(tr_data), tr_M);
      const Dataset test = parse_dataset_csv(read_file(tr_test), tr_M);
      tcfg.tied_bias = !tr_untied;
      Dcnn net = init_net(train.dim(), tr_s, tr_depth, tcfg.tied_bias, tcfg.init_scale, tcfg.seed, tr_M);
      auto res = fit(net, train, test, tcfg);
      if (!tr_net_out.empty()) write_out(tr_net_out, serialize(res.net));
      std::ostringstream os;
      os << "# test_rmse=" << res.report.test_rmse << "\nepoch,train_mse\n";
      for (std::size_t e = 0; e < res.report.train_mse.size(); ++e)
        os << e + 1 << ',' << res.report.train_mse[e] << '\n';
      write_out(tr_report_out, os.str());
    } else if (*c_deep) {
      const Dcnn teacher = deserialize(read_file(dp_teacher));
      const Dataset data = parse_dataset_csv(read_file(dp_data), dp_M);
      InterpolateOptions opt;
      opt.eps_frac = dp_eps_frac;
      if (dp_N > 0) opt.N = dp_N;
      const Interpolant ip = interpolate(teacher, data, dp_s, dp_seed, opt);
      const double resid = ip.max_residual;
      std::fprintf(stderr, "depth %d = %d + %d + %d, width %d, N %d, eps %.6g, max residual %.3g\n",
                   ip.student.depth(), ip.J1, ip.J2, ip.J3, ip.student.output_width(), ip.N, ip.plan.eps, resid);
      write_out(dp_out, serialize(ip.student));
    } else if (*c_bounds) {
      const auto arch = ArchSpec::dcnn(b_J, b_S, b_d);
      const double pg = pdim_general(arch);
      const auto pd = pdim_dcnn(b_J, b_S, b_d, b_c0);
      std::ostringstream os;
      os << "quantity,value\n";
      os << "R," << pdim_R(arch) << '\n';
      os << "pdim_general," << pg << '\n';
      os << "pdim_dcnn_explicit," << pd.explicit_bound << '\n';
      os << "pdim_dcnn_c0_form," << pd.c0_form << '\n';
      for (double frac : {1.0, 0.1, 0.01}) os << "covering_log(eps=" << frac << "M)," << covering_log_bound(pg, 1.0, frac) << '\n';
      os << "rate_bound," << rate_bound_theorem2(b_n, b_d, b_J, b_delta, b_C) << '\n';
      write_out(b_out, os.str());
      std::fprintf(stderr, "note: c0 and C are unspecified absolute constants\n");
    } else if (*c_exp) {
      if (ex_full) ex.n_grid = full_n_grid();
      if (ex_seeds < 1) throw ValidationError("--seeds must be positive");
      ex.seeds.clear();
      for (int k = 0; k < ex_seeds; ++k) ex.seeds.push_back(ex_seed0 + k);
      write_out(ex_out, experiment_csv(run_experiment(ex)));
    } else if (*c_pipe) {
      if (pl_N > 0) pl.N = pl_N;
      const PipelineReport rep = run_pipeline(pl);
      if (!(rep.max_interp_residual <= 1e-6))
        std::fprintf(stderr, "warning: interpolation residual %.3g exceeds 1e-6\n", rep.max_interp_residual);
      write_out(pl_out, pipeline_json(rep));
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
  return 0;
}
