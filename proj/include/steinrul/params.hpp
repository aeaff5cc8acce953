#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "steinrul/tensor.hpp"

namespace steinrul {

struct ParamEntry {
  std::string name;
  Shape shape;
  std::size_t offset = 0;

  std::size_t size() const { return shape_size(shape); }
  friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

/// Maps a flat weight vector onto named layer tensors.
class ParamLayout {
 public:
  ParamLayout() = default;

  /// Appends a tensor; its offset is the running total of previous sizes.
  void add(std::string name, Shape shape);

  const std::vector<ParamEntry>& entries() const { return entries_; }
  const ParamEntry& entry(const std::string& name) const;
  std::size_t dimension() const { return dimension_; }

  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;

 private:
  std::vector<ParamEntry> entries_;
  std::size_t dimension_ = 0;
};

using NamedTensors = std::map<std::string, Tensor>;

/// Flat length-D weights of one network realization.
struct ParamVector {
  std::vector<double> values;
  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

/// Throws ConfigError when a name is missing or a shape differs from the layout.
ParamVector flatten_params(const ParamLayout& layout, const NamedTensors& tensors);
/// Throws ConfigError when the vector length is not layout.dimension().
NamedTensors unflatten_params(const ParamLayout& layout, const ParamVector& params);

}  // namespace steinrul
