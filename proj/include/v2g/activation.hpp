#pragma once

#include <string_view>

namespace v2g {

enum class Activation { softplus, relu, tanh, identity };

double activate(Activation a, double x);

/// Derivative with respect to the pre-activation. relu'(0) is taken as 0.
double activate_derivative(Activation a, double x);

/// True for activations allowed on a convex path (convex and nondecreasing).
constexpr bool is_convex_nondecreasing(Activation a) {
  return a != Activation::tanh;
}

std::string_view to_string(Activation a);

/// Throws ConfigError for unknown names.
Activation parse_activation(std::string_view name);

}  // namespace v2g
