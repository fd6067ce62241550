#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "cnmt/tensor.hpp"

namespace cnmt {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  bool valid() const { return tape != nullptr; }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return rows() * cols(); }
  const double* data() const;
  double item() const;
  Tensor value() const;
};

/// Reverse-mode tape. Operations append nodes in execution order, so the
/// node list is already topologically sorted; backward() replays it in
/// reverse. A tape built with record=false keeps values only.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor t);
  // References t without copying; t must outlive the tape.
  Var view(const Tensor& t);
  // Tracked leaf whose gradient accumulates into `grad` (value.size() doubles).
  Var leaf(const Tensor& value, double* grad);
  // Tracked leaf accumulating into t.grad; tracks t if needed.
  Var leaf(Tensor& t);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every tracked node.
  void backward(Var loss);

  // --- used by operation implementations ---
  using Backward = std::function<void(Tape&, std::uint32_t)>;
  Var emit(std::size_t rows, std::size_t cols, bool tracked);
  void on_backward(Var out, Backward fn);
  bool tracked(Var v) const { return nodes_[v.id].tracked; }
  std::size_t rows(std::uint32_t id) const { return nodes_[id].rows; }
  std::size_t cols(std::uint32_t id) const { return nodes_[id].cols; }
  const double* data(std::uint32_t id) const;
  double* mutable_data(std::uint32_t id);
  // Gradient buffer, allocated zeroed on first access.
  double* grad(std::uint32_t id);
  bool has_grad(std::uint32_t id) const;

 private:
  struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> own;
    const double* ext = nullptr;
    double* ext_grad = nullptr;
    std::vector<double> grad;
    bool tracked = false;
    Backward back;
  };
  bool record_;
  std::deque<Node> nodes_;
};

namespace op {

// Shapes are (rows, cols). Operations throw ShapeError on mismatch.

Var matmul(Var a, Var b);                 // (m,k) x (k,n)
Var linear(Var x, Var w, Var b = {});     // x (m,in) * w (in,out) + b (1,out)
Var add(Var a, Var b);                    // equal shapes, b a (1,n) row, or b (1,1)
Var mul(Var a, Var b);                    // elementwise; b may be (1,1)
Var affine(Var a, double scale, double shift);
Var tanh(Var a);
Var sigmoid(Var a);
Var softmax(Var a);                       // row-wise, max-subtracted
Var neg_log(Var a);
Var concat(std::span<const Var> parts);   // along columns
Var slice(Var a, std::size_t begin, std::size_t end);  // columns [begin, end)
Var row(Var a, std::size_t r);
Var stack(std::span<const Var> rows);     // rows of equal width
Var gather(Var table, std::span<const int> ids);  // negative id -> zero row
Var transpose(Var a);
Var pick(Var a, std::size_t index);       // flat index -> (1,1)
Var sum(Var a);
Var sum_all(std::span<const Var> scalars);
Var dropout(Var a, std::span<const double> mask);  // elementwise by fixed mask

/// GRU gating. xp and hp are (m, 3H) projections of input and previous state
/// laid out as [reset | update | candidate]; h is the (m, H) previous state.
///   r = sigmoid(xp_r + hp_r), z = sigmoid(xp_z + hp_z)
///   n = tanh(xp_n + r * hp_n),  h' = z * h + (1 - z) * n
Var gru_gate(Var xp, Var hp, Var h);

}  // namespace op

/// Row-wise softmax on plain values (max-subtracted).
void softmax_inplace(std::span<double> row);

}  // namespace cnmt
