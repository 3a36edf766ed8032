#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "deepconv/dcnn.hpp"
#include "deepconv/deepen.hpp"

namespace dc {

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  int epochs = 300;
  double step_size = 1e-3;
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  int batch = 0;  // 0: full batch for n <= 1000, else 128
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  bool tied_bias = true;
  bool train_conv = true;  // false: only c and a move

  void validate() const;
};

struct TrainReport {
  Vec train_mse;  // after each epoch
  double test_rmse = 0;
  double wall_time = 0;
};

// Free parameters in a fixed order: per layer the filter taps, then the bias
// slots (tied layers: s-1 head entries, one middle value, s-1 tail entries),
// then c, then a. Layers tagged mid (except the last) are tied.
struct ParamLayout {
  int J = 0;
  int s = 0;
  std::vector<int> widths;  // d_0..d_J
  std::vector<bool> tied;
  std::vector<std::size_t> filter_off, bias_off, bias_slots;
  std::size_t c_off = 0, a_off = 0, total = 0;

  // slot of bias entry i (0-based) in layer j (0-based), relative to bias_off[j]
  std::size_t bias_slot(int j, int i) const;
};

ParamLayout param_layout(const Dcnn& net);
Vec flatten_params(const Dcnn& net);
Dcnn with_params(const Dcnn& net, const Vec& theta);

// Random net of depth J, filter length s; c = 0, a = 0. Tied nets tag layers
// 1..J-1 mid.
Dcnn init_net(int d, int s, int J, bool tied, double init_scale, std::uint64_t seed,
              std::optional<double> truncation = std::nullopt);

// Mean squared error without truncation.
double loss(const Dcnn& net, const Dataset& data);
// d loss / d theta in param_layout order.
Vec grad(const Dcnn& net, const Dataset& data);

// RMSE of pi_M outputs (M = data.M) against the labels.
double test_rmse(const Dcnn& net, const Dataset& data);

struct FitResult {
  Dcnn net;
  TrainReport report;
};
FitResult fit(const Dcnn& net, const Dataset& data, const Dataset& test, const TrainConfig& cfg);

}  // namespace dc
