#include "cnmt/adadelta.hpp"

#include <cmath>
#include <stdexcept>

namespace cnmt {

AdadeltaState::AdadeltaState(const ParamSet& params, double rho_, double eps_)
    : rho(rho_), eps(eps_) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("adadelta: rho must lie in (0,1)");
  if (!(eps > 0.0)) throw std::invalid_argument("adadelta: eps must be positive");
  sq_grad.resize(params.size());
  sq_update.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    sq_grad[i].assign(params[i].size(), 0.0);
    sq_update[i].assign(params[i].size(), 0.0);
  }
}

void adadelta_step(ParamSet& params, const Gradients& grads, AdadeltaState& state) {
  if (grads.buffers.size() != params.size() || state.sq_grad.size() != params.size())
    throw ShapeError("adadelta: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.buffers.size()) + " gradients and " +
                     std::to_string(state.sq_grad.size()) + " accumulators");
  const double rho = state.rho, eps = state.eps;
  for (std::size_t p = 0; p < params.size(); ++p) {
    std::vector<double>& x = params[p].values;
    const std::vector<double>& g = grads.buffers[p];
    std::vector<double>& eg = state.sq_grad[p];
    std::vector<double>& ed = state.sq_update[p];
    if (g.size() != x.size() || eg.size() != x.size())
      throw ShapeError("adadelta: parameter '" + params.name(p) + "' " +
                       shape_string(params[p].shape) + " has gradient of " +
                       std::to_string(g.size()) + " values");
    for (std::size_t i = 0; i < x.size(); ++i) {
      eg[i] = rho * eg[i] + (1.0 - rho) * g[i] * g[i];
      const double delta = -std::sqrt(ed[i] + eps) / std::sqrt(eg[i] + eps) * g[i];
      ed[i] = rho * ed[i] + (1.0 - rho) * delta * delta;
      x[i] += delta;
    }
  }
}

}  // namespace cnmt
