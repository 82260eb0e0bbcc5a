#include "mup/layer_spec.hpp"

#include "mup/error.hpp"

namespace mup {

void validate(const LayerSpec& spec) {
  if (spec.fan_in == 0 || spec.fan_out == 0) throw InvalidArgument("LayerSpec: zero dimension");
  if (spec.role == LayerRole::Input && spec.width_scaled_in)
    throw InvalidArgument("LayerSpec: input layer cannot have a width-scaled fan-in");
  if (spec.role == LayerRole::Output && spec.width_scaled_out)
    throw InvalidArgument("LayerSpec: output layer cannot have a width-scaled fan-out");
}

void validate_chain(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw InvalidArgument("layer chain is empty");
  for (std::size_t l = 0; l < specs.size(); ++l) {
    validate(specs[l]);
    if (l > 0 && specs[l - 1].fan_out != specs[l].fan_in) {
      throw InvalidArgument("layer " + std::to_string(l) + " fan_in " +
                            std::to_string(specs[l].fan_in) + " does not match previous fan_out " +
                            std::to_string(specs[l - 1].fan_out));
    }
  }
}

std::vector<LayerSpec> mlp_specs(std::size_t input_dim, std::size_t width, std::size_t output_dim,
                                 std::size_t depth) {
  if (depth < 2) throw InvalidArgument("mlp_specs: depth must be >= 2");
  std::vector<LayerSpec> specs;
  specs.reserve(depth);
  specs.push_back({input_dim, width, LayerRole::Input, false, true});
  for (std::size_t l = 0; l + 2 < depth; ++l) specs.push_back({width, width, LayerRole::Hidden, true, true});
  specs.push_back({width, output_dim, LayerRole::Output, true, false});
  validate_chain(specs);
  return specs;
}

std::string_view to_string(LayerRole role) {
  switch (role) {
    case LayerRole::Input: return "input";
    case LayerRole::Hidden: return "hidden";
    case LayerRole::Output: return "output";
  }
  return "?";
}

}  // namespace mup
