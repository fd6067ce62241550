#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cnmt/rng.hpp"
#include "cnmt/tape.hpp"

namespace gradcheck {

// |a - n| / max(|a| + |n|, floor); the floor keeps exact zeros from dividing by 0.
inline double relative_error(double a, double n, double floor = 1e-6) {
  return std::abs(a - n) / std::max(std::abs(a) + std::abs(n), floor);
}

struct Result {
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
};

using Build = std::function<cnmt::Var(cnmt::Tape&, const std::vector<cnmt::Var>&)>;

inline double eval(const Build& build, const std::vector<cnmt::Tensor>& inputs,
                   const std::vector<double>& weights) {
  cnmt::Tape tape(false);
  std::vector<cnmt::Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.view(t));
  cnmt::Var y = build(tape, vars);
  double s = 0.0;
  const double* d = y.data();
  if (weights.empty()) return d[0];
  for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * d[i];
  return s;
}

/// Compares autodiff against central differences for every input entry.
/// Non-scalar outputs are reduced with random fixed weights so each output
/// entry contributes a distinct gradient.
inline Result check(const Build& build, std::vector<cnmt::Tensor> inputs, cnmt::Rng& rng,
                    double step = 1e-5) {
  std::vector<double> weights;
  std::vector<std::vector<double>> grads(inputs.size());
  {
    cnmt::Tape tape(true);
    std::vector<cnmt::Var> vars;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      grads[i].assign(inputs[i].size(), 0.0);
      vars.push_back(tape.leaf(inputs[i], grads[i].data()));
    }
    cnmt::Var y = build(tape, vars);
    cnmt::Var loss = y;
    if (y.size() != 1) {
      for (std::size_t i = 0; i < y.size(); ++i) weights.push_back(rng.uniform(-1.0, 1.0));
      cnmt::Tensor w({y.rows(), y.cols()}, weights);
      loss = cnmt::op::sum(cnmt::op::mul(y, tape.constant(w)));
    }
    tape.backward(loss);
  }
  Result r;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double keep = inputs[i].values[j];
      inputs[i].values[j] = keep + step;
      const double up = eval(build, inputs, weights);
      inputs[i].values[j] = keep - step;
      const double down = eval(build, inputs, weights);
      inputs[i].values[j] = keep;
      const double numeric = (up - down) / (2.0 * step);
      const double e = relative_error(grads[i][j], numeric);
      ++r.checked;
      if (e > r.worst) {
        r.worst = e;
        r.where = "input " + std::to_string(i) + " entry " + std::to_string(j) + ": autodiff " +
                  std::to_string(grads[i][j]) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return r;
}

inline cnmt::Tensor random_tensor(cnmt::Rng& rng, std::size_t rows, std::size_t cols,
                                  double lo = -1.0, double hi = 1.0) {
  cnmt::Tensor t = cnmt::Tensor::matrix(rows, cols);
  for (double& v : t.values) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace gradcheck
