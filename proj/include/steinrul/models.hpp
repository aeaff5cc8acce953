#pragma once

// The two regression architectures, expressed as graph builders over a flat
// parameter vector so every trainer (point estimate, reparameterized draw,
// SVGD particle) drives the same code.

#include <cstddef>
#include <optional>
#include <string>

#include "steinrul/autodiff.hpp"
#include "steinrul/params.hpp"
#include "steinrul/rng.hpp"

namespace steinrul {

enum class ModelKind { kDense3, kConv2Pool2 };

std::string to_string(ModelKind kind);
/// Accepts "d3"/"dense3" and "c2p2"/"conv2pool2". Throws ConfigError otherwise.
ModelKind parse_model_kind(const std::string& s);

struct ModelSpec {
  ModelKind kind = ModelKind::kDense3;
  std::size_t window = 30;    // T
  std::size_t features = 14;  // F
  double dropout = 0.2;       // only applied when a forward pass asks for it
};

inline constexpr std::size_t kDenseHidden = 100;
inline constexpr std::size_t kConv1Channels = 8;
inline constexpr std::size_t kConv1KernelRows = 5;
inline constexpr std::size_t kConv1KernelCols = 14;
inline constexpr std::size_t kConv2Channels = 14;
inline constexpr std::size_t kConv2KernelRows = 2;
inline constexpr std::size_t kPoolRows = 2;

/// Time extents after each Conv2Pool2 stage.
struct Conv2Pool2Geometry {
  std::size_t conv1_rows, pool1_rows, conv2_rows, pool2_rows;
  std::size_t cols;      // F - 13, unchanged by the 2x1 stages
  std::size_t flattened; // pool2_rows * cols * 14
};

/// Throws ConfigError naming the first stage whose extent drops below 1.
Conv2Pool2Geometry conv2pool2_geometry(std::size_t window, std::size_t features);

ParamLayout build_dense3(std::size_t window, std::size_t features);
ParamLayout build_conv2pool2(std::size_t window, std::size_t features);
ParamLayout build_layout(const ModelSpec& spec);

/// Records the network on params' graph. params: [D], input: [B,T,F].
/// Returns predictions of shape [B]. With a dropout stream, every hidden
/// activation is masked with inverted scaling.
Var build_forward(const ModelSpec& spec, const ParamLayout& layout, Var params, Var input,
                  Rng* dropout_stream = nullptr);

/// Kaiming (He) uniform weights, bound sqrt(6 / fan_in); zero biases.
ParamVector kaiming_uniform_init(const ParamLayout& layout, Rng& rng);

/// A network realization: architecture, layout and one weight vector.
class ModelInstance {
 public:
  ModelInstance(ModelSpec spec, ParamVector params);
  explicit ModelInstance(ModelSpec spec);  // zero weights

  const ModelSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  const ParamVector& params() const { return params_; }
  void set_params(ParamVector params);

 private:
  ModelSpec spec_;
  ParamLayout layout_;
  ParamVector params_;
};

/// One prediction per sample of batch [B,T,F]. dropout_stream is consulted
/// only when dropout_active is set.
Tensor predict(const ModelInstance& model, const Tensor& batch, bool dropout_active = false,
               Rng* dropout_stream = nullptr);

/// Evaluation-mode predictions for an arbitrary weight vector, chunked so
/// memory stays bounded for large sample counts.
std::vector<double> predict_values(const ModelSpec& spec, const ParamLayout& layout,
                                   const ParamVector& params, const Tensor& samples,
                                   std::size_t chunk = 1024);

}  // namespace steinrul
