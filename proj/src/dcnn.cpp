#include "deepconv/dcnn.hpp"

#include <algorithm>
#include <cmath>

#include "deepconv/errors.hpp"
#include "json.hpp"

namespace dc {

bool identical_in_middle(const Vec& b, int s) {
  const int d = static_cast<int>(b.size());
  // 1-based s..d-s+1 -> 0-based s-1..d-s
  for (int i = s; i <= d - s; ++i)
    if (b[i] != b[s - 1]) return false;
  return true;
}

int layer_out_width(int in_width, int s, std::optional<int> downsample) {
  const int full = in_width + s;
  return downsample ? full / *downsample : full;
}

Dcnn::Dcnn(int input_dim, int filter_len, std::vector<ConvLayer> layers, Vec out_coeffs, double out_offset,
           std::optional<double> truncation)
    : d_(input_dim), s_(filter_len), layers_(std::move(layers)), c_(std::move(out_coeffs)), a_(out_offset),
      M_(truncation) {
  if (d_ < 1) throw ValidationError("input_dim must be positive");
  if (s_ < 1) throw ValidationError("filter_len must be positive");
  if (M_ && !(*M_ > 0)) throw ValidationError("truncation level must be positive");
  widths_.push_back(d_);
  for (std::size_t j = 0; j < layers_.size(); ++j) {
    auto& L = layers_[j];
    const std::string name = "layer " + std::to_string(j + 1);
    if (L.filter.degree() > s_) throw ValidationError(name + ": filter longer than filter_len+1");
    if (L.filter.degree() < s_) {
      Vec f = L.filter.coeffs();
      f.resize(s_ + 1, 0.0);
      L.filter = FilterSeq(std::move(f));
    }
    if (L.downsample) {
      if (*L.downsample < 1) throw ValidationError(name + ": downsample scale must be positive");
      if (*L.downsample > widths_.back() + s_) throw ValidationError(name + ": empty downsample");
    }
    const int w = layer_out_width(widths_.back(), s_, L.downsample);
    if (static_cast<int>(L.bias.size()) != w)
      throw ValidationError(name + ": bias length " + std::to_string(L.bias.size()) + " != width " +
                            std::to_string(w));
    if (L.shape == BiasShape::kMid && !identical_in_middle(L.bias, s_))
      throw ValidationError(name + ": bias tagged mid is not identical in the middle");
    widths_.push_back(w);
  }
  if (static_cast<int>(c_.size()) != widths_.back())
    throw ValidationError("out_coeffs length " + std::to_string(c_.size()) + " != output width " +
                          std::to_string(widths_.back()));
}

LVec conv_stage(const ConvLayer& layer, const LVec& h) {
  const auto& w = layer.filter.coeffs();
  LVec full(h.size() + w.size() - 1);
  apply_conv_raw(w.data(), w.size(), h.data(), h.size(), full.data());
  if (!layer.downsample || *layer.downsample == 1) return full;
  const std::size_t m = *layer.downsample;
  LVec out(full.size() / m);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = full[(i + 1) * m - 1];
  return out;
}

LVec apply_layer(const ConvLayer& layer, const LVec& h) {
  LVec z = conv_stage(layer, h);
  if (z.size() != layer.bias.size()) throw ValidationError("apply_layer: width mismatch");
  for (std::size_t i = 0; i < z.size(); ++i) {
    const long double v = z[i] - layer.bias[i];
    z[i] = v > 0 ? v : 0.0L;
  }
  return z;
}

namespace {

LVec to_lvec(const Vec& x) { return LVec(x.begin(), x.end()); }
Vec to_vec(const LVec& x) { return Vec(x.begin(), x.end()); }

void check_input(const Dcnn& net, const Vec& x) {
  if (static_cast<int>(x.size()) != net.input_dim())
    throw ValidationError("input length " + std::to_string(x.size()) + " != input_dim " +
                          std::to_string(net.input_dim()));
}

double head(const Dcnn& net, const LVec& h, bool truncate_output) {
  long double y = net.out_offset();
  for (std::size_t i = 0; i < h.size(); ++i) y += net.out_coeffs()[i] * h[i];
  double out = static_cast<double>(y);
  if (truncate_output && net.truncation()) out = truncate(out, *net.truncation());
  return out;
}

}  // namespace

ForwardResult forward(const Dcnn& net, const Vec& x, bool truncate_output) {
  check_input(net, x);
  ForwardResult r;
  LVec h = to_lvec(x);
  r.layer_outputs.push_back(x);
  for (const auto& L : net.layers()) {
    h = apply_layer(L, h);
    r.layer_outputs.push_back(to_vec(h));
  }
  r.y = head(net, h, truncate_output);
  return r;
}

LVec hidden(const Dcnn& net, const Vec& x) {
  check_input(net, x);
  LVec h = to_lvec(x);
  for (const auto& L : net.layers()) h = apply_layer(L, h);
  return h;
}

double predict(const Dcnn& net, const Vec& x, bool truncate_output) {
  return head(net, hidden(net, x), truncate_output);
}

double truncate(double y, double M) {
  if (!(M > 0)) throw ValidationError("truncation level must be positive");
  return std::clamp(y, -M, M);
}

long long free_param_formula(int J, int s, int d_J) {
  return 3LL * s * (J - 1) + s + 2 + 2LL * d_J;
}

long long count_free_params(const Dcnn& net) {
  const auto& L = net.layers();
  if (L.empty()) throw ValidationError("count_free_params: net has no layers");
  for (std::size_t j = 0; j < L.size(); ++j) {
    if (L[j].downsample) throw ValidationError("count_free_params: layer " + std::to_string(j + 1) + " downsamples");
    if (j + 1 < L.size() && L[j].shape != BiasShape::kMid)
      throw ValidationError("count_free_params: layer " + std::to_string(j + 1) +
                            " bias is not identical-in-middle");
  }
  return free_param_formula(net.depth(), net.filter_len(), net.output_width());
}

// ---- JSON ----

namespace {

using ojson = nlohmann::ordered_json;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ValidationError(std::string("cannot serialize non-finite ") + what);
}

ojson vec_json(const Vec& v, const char* what) {
  ojson a = ojson::array();
  for (double x : v) {
    require_finite(x, what);
    a.push_back(x);
  }
  return a;
}

const ojson& field(const ojson& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError("missing field " + std::string(key) + where);
  return *it;
}

void reject_unknown(const ojson& obj, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ValidationError("unknown field " + it.key() + where);
  }
}

Vec json_vec(const ojson& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array");
  Vec out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ValidationError(what + " must contain numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

int json_int(const ojson& j, const std::string& what) {
  if (!j.is_number_integer()) throw ValidationError(what + " must be an integer");
  return j.get<int>();
}

}  // namespace

std::string serialize(const Dcnn& net) {
  ojson j;
  j["input_dim"] = net.input_dim();
  j["filter_len"] = net.filter_len();
  ojson layers = ojson::array();
  for (const auto& L : net.layers()) {
    ojson l;
    l["filter"] = vec_json(L.filter.coeffs(), "filter");
    l["bias"] = vec_json(L.bias, "bias");
    l["bias_shape"] = L.shape == BiasShape::kMid ? "mid" : "free";
    l["downsample"] = L.downsample ? ojson(*L.downsample) : ojson(nullptr);
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  j["out_coeffs"] = vec_json(net.out_coeffs(), "out_coeffs");
  require_finite(net.out_offset(), "out_offset");
  j["out_offset"] = net.out_offset();
  j["truncation"] = net.truncation() ? ojson(*net.truncation()) : ojson(nullptr);
  return j.dump(1);
}

Dcnn deserialize(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError("network JSON must be an object");
  reject_unknown(j, {"input_dim", "filter_len", "layers", "out_coeffs", "out_offset", "truncation"}, "");
  const int d = json_int(field(j, "input_dim", ""), "input_dim");
  const int s = json_int(field(j, "filter_len", ""), "filter_len");
  const auto& jl = field(j, "layers", "");
  if (!jl.is_array()) throw ValidationError("layers must be an array");
  std::vector<ConvLayer> layers;
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const auto& l = jl[i];
    const std::string where = " in layer " + std::to_string(i + 1);
    if (!l.is_object()) throw ValidationError("layer entries must be objects" + where);
    reject_unknown(l, {"filter", "bias", "bias_shape", "downsample"}, where);
    ConvLayer L;
    L.filter = FilterSeq(json_vec(field(l, "filter", where), "filter" + where));
    L.bias = json_vec(field(l, "bias", where), "bias" + where);
    const auto& shape = field(l, "bias_shape", where);
    if (shape == "mid")
      L.shape = BiasShape::kMid;
    else if (shape == "free")
      L.shape = BiasShape::kFree;
    else
      throw ValidationError("bias_shape must be \"free\" or \"mid\"" + where);
    const auto& ds = field(l, "downsample", where);
    if (!ds.is_null()) L.downsample = json_int(ds, "downsample" + where);
    layers.push_back(std::move(L));
  }
  Vec c = json_vec(field(j, "out_coeffs", ""), "out_coeffs");
  const auto& a = field(j, "out_offset", "");
  if (!a.is_number()) throw ValidationError("out_offset must be a number");
  const auto& m = field(j, "truncation", "");
  std::optional<double> M;
  if (!m.is_null()) {
    if (!m.is_number()) throw ValidationError("truncation must be a number or null");
    M = m.get<double>();
  }
  return Dcnn(d, s, std::move(layers), std::move(c), a.get<double>(), M);
}

}  // namespace dc
