#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deepconv/seqconv.hpp"

namespace dc {

using LVec = std::vector<long double>;

enum class BiasShape { kFree, kMid };

// Middle block b_s..b_{d-s+1} (1-based) constant. Vacuous when d < 2s - 1.
bool identical_in_middle(const Vec& b, int s);

struct ConvLayer {
  FilterSeq filter;
  Vec bias;
  BiasShape shape = BiasShape::kFree;
  std::optional<int> downsample;  // scale m of D_m, applied before the bias

  bool operator==(const ConvLayer&) const = default;
};

// Zero-padded 1-D DCNN h_j = relu(D_m(T^{w_j} h_{j-1}) - b_j), y = c.h_J + a.
// Filters are stored with exactly s+1 taps. Evaluation accumulates in long
// double; parameters are binary64.
class Dcnn {
 public:
  // trivial 1-d net with no layers and y = 0
  Dcnn() : Dcnn(1, 1, {}, Vec{0.0}, 0.0) {}
  Dcnn(int input_dim, int filter_len, std::vector<ConvLayer> layers, Vec out_coeffs, double out_offset,
       std::optional<double> truncation = std::nullopt);

  int input_dim() const { return d_; }
  int filter_len() const { return s_; }
  int depth() const { return static_cast<int>(layers_.size()); }
  const std::vector<ConvLayer>& layers() const { return layers_; }
  const Vec& out_coeffs() const { return c_; }
  double out_offset() const { return a_; }
  std::optional<double> truncation() const { return M_; }
  // d_0 .. d_J
  const std::vector<int>& widths() const { return widths_; }
  int output_width() const { return widths_.back(); }

  bool operator==(const Dcnn&) const = default;

 private:
  int d_;
  int s_;
  std::vector<ConvLayer> layers_;
  Vec c_;
  double a_;
  std::optional<double> M_;
  std::vector<int> widths_;
};

// Width after one layer.
int layer_out_width(int in_width, int s, std::optional<int> downsample);

// D_m(T^w h) for one layer, before the bias.
LVec conv_stage(const ConvLayer& layer, const LVec& h);
// relu(conv_stage - b)
LVec apply_layer(const ConvLayer& layer, const LVec& h);

struct ForwardResult {
  std::vector<Vec> layer_outputs;  // h^(0) .. h^(J)
  double y = 0;
};

ForwardResult forward(const Dcnn& net, const Vec& x, bool truncate_output = true);
// y only; skips storing hidden layers.
double predict(const Dcnn& net, const Vec& x, bool truncate_output = true);
// Last hidden layer, kept in extended precision.
LVec hidden(const Dcnn& net, const Vec& x);

double truncate(double y, double M);

// 3s(J-1) + s + 2 + 2 d_J; needs kMid tags on layers 1..J-1 and no downsampling.
long long count_free_params(const Dcnn& net);
// The same formula from the shape alone.
long long free_param_formula(int J, int s, int d_J);

std::string serialize(const Dcnn& net);
Dcnn deserialize(const std::string& text);

}  // namespace dc
