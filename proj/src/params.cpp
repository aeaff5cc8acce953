#include "steinrul/params.hpp"

#include <algorithm>

#include "steinrul/error.hpp"

namespace steinrul {

void ParamLayout::add(std::string name, Shape shape) {
  for (const auto& e : entries_) {
    if (e.name == name) throw ConfigError("duplicate parameter name: " + name);
  }
  ParamEntry e{std::move(name), std::move(shape), dimension_};
  dimension_ += e.size();
  entries_.push_back(std::move(e));
}

const ParamEntry& ParamLayout::entry(const std::string& name) const {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const ParamEntry& e) { return e.name == name; });
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return *it;
}

ParamVector flatten_params(const ParamLayout& layout, const NamedTensors& tensors) {
  ParamVector out;
  out.values.resize(layout.dimension());
  for (const auto& e : layout.entries()) {
    auto it = tensors.find(e.name);
    if (it == tensors.end()) throw ConfigError("flatten_params: missing tensor " + e.name);
    if (it->second.shape() != e.shape) {
      throw ConfigError("flatten_params: " + e.name + " has shape " +
                        shape_string(it->second.shape()) + ", layout expects " +
                        shape_string(e.shape));
    }
    std::copy(it->second.values().begin(), it->second.values().end(),
              out.values.begin() + static_cast<std::ptrdiff_t>(e.offset));
  }
  return out;
}

NamedTensors unflatten_params(const ParamLayout& layout, const ParamVector& params) {
  if (params.values.size() != layout.dimension()) {
    throw ConfigError("unflatten_params: vector length " + std::to_string(params.values.size()) +
                      " != D " + std::to_string(layout.dimension()));
  }
  NamedTensors out;
  for (const auto& e : layout.entries()) {
    auto first = params.values.begin() + static_cast<std::ptrdiff_t>(e.offset);
    out.emplace(e.name, Tensor(e.shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(e.size()))));
  }
  return out;
}

}  // namespace steinrul
