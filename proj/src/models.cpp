#include "steinrul/models.hpp"

#include <algorithm>
#include <cmath>

#include "steinrul/error.hpp"

namespace steinrul {

std::string to_string(ModelKind kind) {
  return kind == ModelKind::kDense3 ? "d3" : "c2p2";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "d3" || s == "dense3" || s == "D3") return ModelKind::kDense3;
  if (s == "c2p2" || s == "conv2pool2" || s == "C2P2") return ModelKind::kConv2Pool2;
  throw ConfigError("unknown model '" + s + "' (expected d3 or c2p2)");
}

Conv2Pool2Geometry conv2pool2_geometry(std::size_t window, std::size_t features) {
  auto fail = [&](const char* stage) {
    throw ConfigError(std::string("conv2pool2: stage ") + stage +
                      " has no output rows/cols for T=" + std::to_string(window) +
                      ", F=" + std::to_string(features));
  };
  if (features < kConv1KernelCols) fail("conv1 (width)");
  if (window < kConv1KernelRows) fail("conv1");
  Conv2Pool2Geometry g{};
  g.cols = features - kConv1KernelCols + 1;
  g.conv1_rows = window - kConv1KernelRows + 1;
  g.pool1_rows = g.conv1_rows / kPoolRows;
  if (g.pool1_rows < 1) fail("pool1");
  if (g.pool1_rows < kConv2KernelRows) fail("conv2");
  g.conv2_rows = g.pool1_rows - kConv2KernelRows + 1;
  g.pool2_rows = g.conv2_rows / kPoolRows;
  if (g.pool2_rows < 1) fail("pool2");
  g.flattened = g.pool2_rows * g.cols * kConv2Channels;
  return g;
}

ParamLayout build_dense3(std::size_t window, std::size_t features) {
  if (window < 1 || features < 1) throw ConfigError("dense3: T and F must be positive");
  ParamLayout layout;
  std::size_t in = window * features;
  for (int layer = 1; layer <= 3; ++layer) {
    const std::string prefix = "dense" + std::to_string(layer);
    layout.add(prefix + ".weight", {in, kDenseHidden});
    layout.add(prefix + ".bias", {kDenseHidden});
    in = kDenseHidden;
  }
  layout.add("out.weight", {kDenseHidden, 1});
  layout.add("out.bias", {1});
  return layout;
}

ParamLayout build_conv2pool2(std::size_t window, std::size_t features) {
  const auto g = conv2pool2_geometry(window, features);
  ParamLayout layout;
  layout.add("conv1.weight", {kConv1Channels, 1, kConv1KernelRows, kConv1KernelCols});
  layout.add("conv1.bias", {kConv1Channels});
  layout.add("conv2.weight", {kConv2Channels, kConv1Channels, kConv2KernelRows, 1});
  layout.add("conv2.bias", {kConv2Channels});
  layout.add("out.weight", {g.flattened, 1});
  layout.add("out.bias", {1});
  return layout;
}

ParamLayout build_layout(const ModelSpec& spec) {
  return spec.kind == ModelKind::kDense3 ? build_dense3(spec.window, spec.features)
                                         : build_conv2pool2(spec.window, spec.features);
}

namespace {

Var param(Var flat, const ParamLayout& layout, const std::string& name) {
  const auto& e = layout.entry(name);
  return slice(flat, e.offset, e.shape);
}

Var maybe_dropout(Var x, double prob, Rng* stream) {
  if (!stream || prob <= 0.0) return x;
  Tensor mask(x.shape());
  std::bernoulli_distribution keep(1.0 - prob);
  const double scale = 1.0 / (1.0 - prob);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(*stream) ? scale : 0.0;
  return x * x.graph->constant(std::move(mask));
}

}  // namespace

Var build_forward(const ModelSpec& spec, const ParamLayout& layout, Var params, Var input,
                  Rng* dropout_stream) {
  const Shape& in = input.shape();
  if (in.size() != 3 || in[1] != spec.window || in[2] != spec.features) {
    throw ShapeError("model input must be [B," + std::to_string(spec.window) + "," +
                     std::to_string(spec.features) + "], got " + shape_string(in));
  }
  if (params.shape() != Shape{layout.dimension()}) {
    throw ShapeError("model params must be [" + std::to_string(layout.dimension()) + "], got " +
                     shape_string(params.shape()));
  }
  const std::size_t batch = in[0];
  const double p = spec.dropout;

  if (spec.kind == ModelKind::kDense3) {
    Var h = reshape(input, {batch, spec.window * spec.features});
    for (int layer = 1; layer <= 3; ++layer) {
      const std::string prefix = "dense" + std::to_string(layer);
      h = sigmoid(bias_add(matmul(h, param(params, layout, prefix + ".weight")),
                           param(params, layout, prefix + ".bias")));
      h = maybe_dropout(h, p, dropout_stream);
    }
    Var out = bias_add(matmul(h, param(params, layout, "out.weight")),
                       param(params, layout, "out.bias"));
    return reshape(out, {batch});
  }

  Var x = reshape(input, {batch, 1, spec.window, spec.features});
  Var h = sigmoid(conv2d(x, param(params, layout, "conv1.weight"),
                         param(params, layout, "conv1.bias")));
  h = maybe_dropout(h, p, dropout_stream);
  h = avg_pool_rows(h, kPoolRows);
  h = sigmoid(conv2d(h, param(params, layout, "conv2.weight"),
                     param(params, layout, "conv2.bias")));
  h = maybe_dropout(h, p, dropout_stream);
  h = avg_pool_rows(h, kPoolRows);
  const std::size_t flat = shape_size(h.shape()) / batch;
  h = reshape(h, {batch, flat});
  Var out = bias_add(matmul(h, param(params, layout, "out.weight")),
                     param(params, layout, "out.bias"));
  return reshape(out, {batch});
}

ParamVector kaiming_uniform_init(const ParamLayout& layout, Rng& rng) {
  ParamVector p;
  p.values.assign(layout.dimension(), 0.0);
  for (const auto& e : layout.entries()) {
    if (e.shape.size() < 2) continue;  // bias
    // Dense weights are [in,out]; conv weights are [out,in,kh,kw].
    const std::size_t fan_in =
        e.shape.size() == 2 ? e.shape[0] : e.shape[1] * e.shape[2] * e.shape[3];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < e.size(); ++i) p.values[e.offset + i] = dist(rng);
  }
  return p;
}

ModelInstance::ModelInstance(ModelSpec spec, ParamVector params)
    : spec_(spec), layout_(build_layout(spec)) {
  set_params(std::move(params));
}

ModelInstance::ModelInstance(ModelSpec spec) : spec_(spec), layout_(build_layout(spec)) {
  params_.values.assign(layout_.dimension(), 0.0);
}

void ModelInstance::set_params(ParamVector params) {
  if (params.values.size() != layout_.dimension()) {
    throw ConfigError("parameter vector has length " + std::to_string(params.values.size()) +
                      ", model needs " + std::to_string(layout_.dimension()));
  }
  params_ = std::move(params);
}

Tensor predict(const ModelInstance& model, const Tensor& batch, bool dropout_active,
               Rng* dropout_stream) {
  if (dropout_active && !dropout_stream) throw UsageError("dropout requires an rng stream");
  Graph g;
  Var w = g.constant(Tensor({model.layout().dimension()}, model.params().values));
  Var x = g.constant(batch);
  Var y = build_forward(model.spec(), model.layout(), w, x,
                        dropout_active ? dropout_stream : nullptr);
  return g.forward(y);
}

std::vector<double> predict_values(const ModelSpec& spec, const ParamLayout& layout,
                                   const ParamVector& params, const Tensor& samples,
                                   std::size_t chunk) {
  if (samples.rank() != 3) throw ShapeError("samples must be [N,T,F]");
  const std::size_t n = samples.dim(0);
  const std::size_t stride = samples.dim(1) * samples.dim(2);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t b = std::min(chunk, n - start);
    Graph g;
    Var w = g.constant(Tensor({layout.dimension()}, params.values));
    Var x = g.constant(Tensor({b, samples.dim(1), samples.dim(2)},
                              std::vector<double>(samples.data() + start * stride,
                                                  samples.data() + (start + b) * stride)));
    const Tensor& y = g.forward(build_forward(spec, layout, w, x));
    out.insert(out.end(), y.values().begin(), y.values().end());
  }
  return out;
}

}  // namespace steinrul
