#pragma once

#include <vector>

#include "cnmt/params.hpp"

namespace cnmt {

/// Running averages for Adadelta. Default decay and stabilizer are 0.95 and 1e-6.
struct AdadeltaState {
  double rho = 0.95;
  double eps = 1e-6;
  std::vector<std::vector<double>> sq_grad;
  std::vector<std::vector<double>> sq_update;

  AdadeltaState() = default;
  AdadeltaState(const ParamSet& params, double rho = 0.95, double eps = 1e-6);
};

/// One update:
///   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
///   delta   =  -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] <- rho E[dx^2] + (1 - rho) delta^2
///   x       <- x + delta
void adadelta_step(ParamSet& params, const Gradients& grads, AdadeltaState& state);

}  // namespace cnmt
