#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "mup/layer_spec.hpp"

namespace mup {

enum class OptimizerKind { AdamW, Adopt, Lamb, Sophia, Shampoo, Muon };
enum class ParamScheme { SP, MuP };

std::string_view to_string(OptimizerKind kind);
std::string_view to_string(ParamScheme scheme);
/// Case-insensitive; throws InvalidArgument on unknown names.
OptimizerKind parse_optimizer(std::string_view name);
ParamScheme parse_scheme(std::string_view name);

/// Per-layer multipliers. The sampled matrix is init_std * N(0,1) and the
/// effective weight is weight_mult times that.
struct ScalingRule {
  double init_std = 1.0;
  double weight_mult = 1.0;
  double lr_mult = 1.0;
  double eps_mult = 1.0;
  double wd_mult = 1.0;
};

/// Layer dimensions with non-width-scaled sides collapsed to 1.
struct EffectiveDims {
  std::size_t out = 1;
  std::size_t in = 1;
  friend bool operator==(const EffectiveDims&, const EffectiveDims&) = default;
};

EffectiveDims effective_dims(const LayerSpec& layer);

/// Exact rational number with positive denominator in lowest terms.
struct Rational {
  long num = 0;
  long den = 1;

  Rational() = default;
  Rational(long n, long d = 1);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// n_out^out_exp * n_in^in_exp over effective dimensions.
struct Monomial {
  Rational out_exp;
  Rational in_exp;

  double evaluate(EffectiveDims dims) const;
  /// Drops the exponent of whichever dimension the role pins to 1.
  Monomial restricted_to(LayerRole role) const;
  std::string to_string() const;
  friend bool operator==(const Monomial&, const Monomial&) = default;
};

/// Symbolic muP scaling laws for one (optimizer, role) cell.
struct ScalingLaws {
  Monomial init_std;
  Monomial weight_mult;
  /// Empty where the optimizer is not defined for the role (Muon off hidden layers).
  std::optional<Monomial> lr_mult;
  Monomial eps_mult;
  Monomial wd_mult;
};

/// `fan_out_at_least_fan_in` selects the branch of the min{1, sqrt(n_out/n_in)}
/// factor in the weight multiplier.
ScalingLaws mup_laws(OptimizerKind kind, LayerRole role, bool fan_out_at_least_fan_in);

/// Numeric rule for a layer. Under muP, Muon on a non-hidden layer returns
/// AdamW's rule because those layers are stepped by AdamW.
ScalingRule derive_rule(OptimizerKind kind, const LayerSpec& layer, ParamScheme scheme);

/// Tab-separated table with one row per layer per width, for the standard
/// MLP layout at the given depth.
std::string rule_table(OptimizerKind kind, std::span<const std::size_t> widths, std::size_t depth,
                       ParamScheme scheme = ParamScheme::MuP, std::size_t input_dim = 16,
                       std::size_t output_dim = 4);

}  // namespace mup
