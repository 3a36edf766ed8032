#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deepconv/deepen.hpp"
#include "deepconv/trainer.hpp"

namespace dc {

struct SimSpec {
  int d = 10;
  int n = 500;
  int test_n = 2000;
  double noise_sd = 0.1;
  double domain_halfwidth = 10;
  std::uint64_t seed = 0;
};

inline constexpr double kSimM = 2.0;

// sin(||x||^4) + cos(||x||^4)
double regression_fn(const Vec& x);

// x uniform on [-h, h]^d. Train labels carry N(0, noise_sd^2) noise and are
// clipped to [-2, 2] (the clip is never active at noise_sd = 0.1 in practice);
// test labels are noiseless. Both datasets have M = 2.
std::pair<Dataset, Dataset> simulate(const SimSpec& spec);

// splitmix64 of seed ^ (stream * golden gamma); derives independent RNG streams.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream);

// smallest integer J with J >= n^alpha (exact for alpha = 1/3)
int depth_for(int n, double alpha);

struct ExperimentSpec {
  int d = 10;
  std::vector<int> n_grid{100, 300, 500, 1000};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  int test_n = 2000;
  double noise_sd = 0.1;
  double domain_halfwidth = 10;
  int S = 2;
  TrainConfig train = default_experiment_train();

  static TrainConfig default_experiment_train();
};

// The full n grid of the original simulation study.
std::vector<int> full_n_grid();

struct ExperimentRow {
  std::string kind;  // run or summary
  int d = 0;
  int n = 0;
  int J = 0;
  std::optional<std::uint64_t> seed;
  double test_rmse = 0;  // summary rows: mean over the finished runs
  std::optional<double> rmse_sd;  // summary rows: sample standard deviation
  std::string status = "ok";
};

// One row per (n, seed) in grid order, then one summary row (mean, sd) per n.
// Data for (seed, n) comes from split_seed(seed, n); training from split_seed(seed, n + 2^32).
std::vector<ExperimentRow> run_experiment(const ExperimentSpec& spec);
std::string experiment_csv(const std::vector<ExperimentRow>& rows);

struct PipelineSpec {
  int d = 4;
  int n = 20;
  double alpha = 1.0 / 3.0;
  int s = 4;
  std::uint64_t seed = 0;
  int test_n = 2000;
  double noise_sd = 0.1;
  double domain_halfwidth = 10;
  double delta = 0.05;
  std::optional<int> N;  // default 4n + 1
  TrainConfig teacher_train = default_teacher_train();

  static TrainConfig default_teacher_train();
};

struct PipelineReport {
  int d = 0, n = 0, s = 0, S = 0;
  double alpha = 0;
  int J1 = 0, J2 = 0, J3 = 0, N = 0;
  int student_depth = 0, student_width = 0;
  long long teacher_params = 0, added_params = 0, student_params = 0;
  double teacher_rmse = 0, student_rmse = 0, max_interp_residual = 0;
  double eps = 0, slab_mass = 0;
  double pdim_explicit = 0, pdim_c0 = 0, rate_bound = 0;
  double wall_time = 0;
};

PipelineReport run_pipeline(const PipelineSpec& spec);
std::string pipeline_json(const PipelineReport& r);

// header row, then d feature columns and the label per row
std::string dataset_csv(const Dataset& data);
Dataset parse_dataset_csv(const std::string& text, double M);

}  // namespace dc
