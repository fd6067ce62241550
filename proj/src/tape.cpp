#include "cnmt/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cnmt {

namespace {

std::string dims(std::size_t r, std::size_t c) {
  return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

[[noreturn]] void mismatch(const char* what, Var a, Var b) {
  throw ShapeError(std::string(what) + ": shape " + dims(a.rows(), a.cols()) +
                   " does not conform with " + dims(b.rows(), b.cols()));
}

// Four independent partial sums; fixed association order.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* __restrict x, double* __restrict y,
                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("operation on an empty Var");
  return *a.tape;
}

void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("operands recorded on different tapes");
}

}  // namespace

// ---------------------------------------------------------------- Var

std::size_t Var::rows() const { return tape->rows(id); }
std::size_t Var::cols() const { return tape->cols(id); }
const double* Var::data() const { return tape->data(id); }

double Var::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar " + dims(rows(), cols()));
  return data()[0];
}

Tensor Var::value() const {
  const double* p = data();
  return Tensor({rows(), cols()}, std::vector<double>(p, p + size()));
}

// ---------------------------------------------------------------- Tape

Var Tape::constant(Tensor t) {
  Node& n = nodes_.emplace_back();
  n.rows = t.rows();
  n.cols = t.cols();
  n.own = std::move(t.values);
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::view(const Tensor& t) {
  Node& n = nodes_.emplace_back();
  n.rows = t.rows();
  n.cols = t.cols();
  n.ext = t.values.data();
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(const Tensor& value, double* grad) {
  Var v = view(value);
  Node& n = nodes_.back();
  n.tracked = record_ && grad != nullptr;
  n.ext_grad = grad;
  return v;
}

Var Tape::leaf(Tensor& t) {
  if (!t.tracked()) t.track();
  return leaf(t, t.grad.data());
}

Var Tape::emit(std::size_t rows, std::size_t cols, bool tracked) {
  Node& n = nodes_.emplace_back();
  n.rows = rows;
  n.cols = cols;
  n.own.assign(rows * cols, 0.0);
  n.tracked = record_ && tracked;
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::on_backward(Var out, Backward fn) {
  Node& n = nodes_[out.id];
  if (n.tracked) n.back = std::move(fn);
}

const double* Tape::data(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.ext ? n.ext : n.own.data();
}

double* Tape::mutable_data(std::uint32_t id) { return nodes_[id].own.data(); }

double* Tape::grad(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.ext_grad) return n.ext_grad;
  if (n.grad.empty()) n.grad.assign(n.rows * n.cols, 0.0);
  return n.grad.data();
}

bool Tape::has_grad(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.ext_grad != nullptr || !n.grad.empty();
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: loss is not on this tape");
  if (loss.size() != 1)
    throw ShapeError("backward: loss must be scalar, got " + dims(loss.rows(), loss.cols()));
  if (!nodes_[loss.id].tracked) return;
  grad(loss.id)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.tracked || !n.back || !has_grad(static_cast<std::uint32_t>(i))) continue;
    n.back(*this, static_cast<std::uint32_t>(i));
  }
}

void softmax_inplace(std::span<double> row) {
  if (row.empty()) return;
  const double mx = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : row) v /= total;
}

// ---------------------------------------------------------------- operations

namespace op {

Var matmul(Var a, Var b) {
  same_tape(a, b);
  Tape& t = tape_of(a);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) mismatch("matmul", a, b);
  Var out = t.emit(m, n, t.tracked(a) || t.tracked(b));
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = t.mutable_data(out.id);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) axpy(pa[i * k + j], pb + j * n, po + i * n, n);
  t.on_backward(out, [ia = a.id, ib = b.id, m, k, n](Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    if (tp.tracked({&tp, ia})) {
      double* ga = tp.grad(ia);
      const double* pb = tp.data(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) ga[i * k + j] += dot(g + i * n, pb + j * n, n);
    }
    if (tp.tracked({&tp, ib})) {
      double* gb = tp.grad(ib);
      const double* pa = tp.data(ia);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) axpy(pa[i * k + j], g + i * n, gb + j * n, n);
    }
  });
  return out;
}

Var linear(Var x, Var w, Var b) {
  Var y = matmul(x, w);
  if (!b.valid()) return y;
  if (b.rows() != 1 || b.cols() != y.cols()) mismatch("linear bias", y, b);
  return add(y, b);
}

Var add(Var a, Var b) {
  same_tape(a, b);
  Tape& t = tape_of(a);
  const std::size_t m = a.rows(), n = a.cols();
  enum class Mode { Same, Row, Scalar } mode;
  if (b.rows() == m && b.cols() == n) mode = Mode::Same;
  else if (b.rows() == 1 && b.cols() == n) mode = Mode::Row;
  else if (b.rows() == 1 && b.cols() == 1) mode = Mode::Scalar;
  else mismatch("add", a, b);
  Var out = t.emit(m, n, t.tracked(a) || t.tracked(b));
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = t.mutable_data(out.id);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double bv = mode == Mode::Same ? pb[i * n + j] : mode == Mode::Row ? pb[j] : pb[0];
      po[i * n + j] = pa[i * n + j] + bv;
    }
  t.on_backward(out, [ia = a.id, ib = b.id, m, n, mode](Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    if (tp.tracked({&tp, ia})) axpy(1.0, g, tp.grad(ia), m * n);
    if (tp.tracked({&tp, ib})) {
      double* gb = tp.grad(ib);
      if (mode == Mode::Same) {
        axpy(1.0, g, gb, m * n);
      } else if (mode == Mode::Row) {
        for (std::size_t i = 0; i < m; ++i) axpy(1.0, g + i * n, gb, n);
      } else {
        double s = 0.0;
        for (std::size_t i = 0; i < m * n; ++i) s += g[i];
        gb[0] += s;
      }
    }
  });
  return out;
}

Var mul(Var a, Var b) {
  same_tape(a, b);
  Tape& t = tape_of(a);
  const std::size_t m = a.rows(), n = a.cols();
  const bool scalar = !(b.rows() == m && b.cols() == n);
  if (scalar && !(b.rows() == 1 && b.cols() == 1)) mismatch("mul", a, b);
  Var out = t.emit(m, n, t.tracked(a) || t.tracked(b));
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = t.mutable_data(out.id);
  for (std::size_t i = 0; i < m * n; ++i) po[i] = pa[i] * (scalar ? pb[0] : pb[i]);
  t.on_backward(out, [ia = a.id, ib = b.id, m, n, scalar](Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    const double* pa = tp.data(ia);
    const double* pb = tp.data(ib);
    if (tp.tracked({&tp, ia})) {
      double* ga = tp.grad(ia);
      for (std::size_t i = 0; i < m * n; ++i) ga[i] += g[i] * (scalar ? pb[0] : pb[i]);
    }
    if (tp.tracked({&tp, ib})) {
      double* gb = tp.grad(ib);
      if (scalar) {
        double s = 0.0;
        for (std::size_t i = 0; i < m * n; ++i) s += g[i] * pa[i];
        gb[0] += s;
      } else {
        for (std::size_t i = 0; i < m * n; ++i) gb[i] += g[i] * pa[i];
      }
    }
  });
  return out;
}

Var affine(Var a, double scale, double shift) {
  Tape& t = tape_of(a);
  const std::size_t n = a.size();
  Var out = t.emit(a.rows(), a.cols(), t.tracked(a));
  const double* pa = a.data();
  double* po = t.mutable_data(out.id);
  for (std::size_t i = 0; i < n; ++i) po[i] = scale * pa[i] + shift;
  t.on_backward(out, [ia = a.id, n, scale](Tape& tp, std::uint32_t o) {
    axpy(scale, tp.grad(o), tp.grad(ia), n);
  });
  return out;
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  const std::size_t n = a.size();
  Var out = t.emit(a.rows(), a.cols(), t.tracked(a));
  const double* pa = a.data();
  double* po = t.mutable_data(out.id);
  for (std::size_t i = 0; i < n; ++i) po[i] = std::tanh(pa[i]);
  t.on_backward(out, [ia = a.id, n](Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    const double* y = tp.data(o);
    double* ga = tp.grad(ia);
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
  return out;
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  const std::size_t n = a.size();
  Var out = t.emit(a.rows(), a.cols(), t.tracked(a));
  const double* pa = a.data();
  double* po = t.mutable_data(out.id);
  for (std::size_t i = 0; i < n; ++i) po[i] = 1.0 / (1.0 + std::exp(-pa[i]));
  t.on_backward(out, [ia = a.id, n](Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    const double* y = tp.data(o);
    double* ga = tp.grad(ia);
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
  return out;
}

Var softmax(Var a) {
  Tape& t = tape_of(a);
  const std::size_t m = a.rows(), n = a.cols();
  Var out = t.emit(m, n, t.tracked(a));
  const double* pa = a.data();
  double* po = t.mutable_data(out.id);
  std::copy(pa, pa + m * n, po);
  for (std::size_t i = 0; i < m; ++i) softmax_inplace({po + i * n, n});
  t.on_backward(out, [ia = a.id, m, n](Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    const double* p = tp.data(o);
    double* ga = tp.grad(ia);
    for (std::size_t i = 0; i < m; ++i) {
      const double s = dot(g + i * n, p + i * n, n);
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += p[i * n + j] * (g[i * n + j] - s);
    }
  });
  return out;
}

Var neg_log(Var a) {
  Tape& t = tape_of(a);
  const std::size_t n = a.size();
  Var out = t.emit(a.rows(), a.cols(), t.tracked(a));
  const double* pa = a.data();
  double* po = t.mutable_data(out.id);
  for (std::size_t i = 0; i < n; ++i) po[i] = -std::log(pa[i]);
  t.on_backward(out, [ia = a.id, n](Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    const double* x = tp.data(ia);
    double* ga = tp.grad(ia);
    for (std::size_t i = 0; i < n; ++i) ga[i] -= g[i] / x[i];
  });
  return out;
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  Tape& t = tape_of(parts[0]);
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  bool tracked = false;
  for (Var p : parts) {
    same_tape(parts[0], p);
    if (p.rows() != m) mismatch("concat", parts[0], p);
    n += p.cols();
    tracked = tracked || t.tracked(p);
  }
  Var out = t.emit(m, n, tracked);
  double* po = t.mutable_data(out.id);
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> widths;
  std::size_t off = 0;
  for (Var p : parts) {
    const std::size_t w = p.cols();
    const double* pp = p.data();
    for (std::size_t i = 0; i < m; ++i) std::copy(pp + i * w, pp + (i + 1) * w, po + i * n + off);
    off += w;
    ids.push_back(p.id);
    widths.push_back(w);
  }
  t.on_backward(out, [ids = std::move(ids), widths = std::move(widths), m, n](
                         Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t w = widths[k];
      if (tp.tracked({&tp, ids[k]})) {
        double* gp = tp.grad(ids[k]);
        for (std::size_t i = 0; i < m; ++i) axpy(1.0, g + i * n + off, gp + i * w, w);
      }
      off += w;
    }
  });
  return out;
}

Var slice(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const std::size_t m = a.rows(), n = a.cols();
  if (begin > end || end > n)
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + dims(m, n));
  const std::size_t w = end - begin;
  Var out = t.emit(m, w, t.tracked(a));
  const double* pa = a.data();
  double* po = t.mutable_data(out.id);
  for (std::size_t i = 0; i < m; ++i) std::copy(pa + i * n + begin, pa + i * n + end, po + i * w);
  t.on_backward(out, [ia = a.id, m, n, w, begin](Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    double* ga = tp.grad(ia);
    for (std::size_t i = 0; i < m; ++i) axpy(1.0, g + i * w, ga + i * n + begin, w);
  });
  return out;
}

Var row(Var a, std::size_t r) {
  Tape& t = tape_of(a);
  const std::size_t n = a.cols();
  if (r >= a.rows())
    throw ShapeError("row " + std::to_string(r) + " out of range for " + dims(a.rows(), n));
  Var out = t.emit(1, n, t.tracked(a));
  const double* pa = a.data() + r * n;
  std::copy(pa, pa + n, t.mutable_data(out.id));
  t.on_backward(out, [ia = a.id, n, r](Tape& tp, std::uint32_t o) {
    axpy(1.0, tp.grad(o), tp.grad(ia) + r * n, n);
  });
  return out;
}

Var stack(std::span<const Var> rows) {
  if (rows.empty()) throw std::invalid_argument("stack: no operands");
  Tape& t = tape_of(rows[0]);
  const std::size_t n = rows[0].cols();
  std::size_t m = 0;
  bool tracked = false;
  for (Var r : rows) {
    same_tape(rows[0], r);
    if (r.cols() != n) mismatch("stack", rows[0], r);
    m += r.rows();
    tracked = tracked || t.tracked(r);
  }
  Var out = t.emit(m, n, tracked);
  double* po = t.mutable_data(out.id);
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> heights;
  for (Var r : rows) {
    const double* pr = r.data();
    po = std::copy(pr, pr + r.size(), po);
    ids.push_back(r.id);
    heights.push_back(r.rows());
  }
  t.on_backward(out, [ids = std::move(ids), heights = std::move(heights), n](
                         Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t len = heights[k] * n;
      if (tp.tracked({&tp, ids[k]})) axpy(1.0, g, tp.grad(ids[k]), len);
      g += len;
    }
  });
  return out;
}

Var gather(Var table, std::span<const int> ids) {
  Tape& t = tape_of(table);
  const std::size_t n = table.cols(), rows = table.rows();
  for (int id : ids)
    if (id >= 0 && static_cast<std::size_t>(id) >= rows)
      throw ShapeError("gather: id " + std::to_string(id) + " out of range for table " +
                       dims(rows, n));
  Var out = t.emit(ids.size(), n, t.tracked(table));
  const double* pt = table.data();
  double* po = t.mutable_data(out.id);
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] >= 0) std::copy(pt + ids[i] * n, pt + (ids[i] + 1) * n, po + i * n);
  t.on_backward(out, [it = table.id, idv = std::vector<int>(ids.begin(), ids.end()), n](
                         Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    double* gt = tp.grad(it);
    for (std::size_t i = 0; i < idv.size(); ++i)
      if (idv[i] >= 0) axpy(1.0, g + i * n, gt + idv[i] * n, n);
  });
  return out;
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const std::size_t m = a.rows(), n = a.cols();
  Var out = t.emit(n, m, t.tracked(a));
  const double* pa = a.data();
  double* po = t.mutable_data(out.id);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) po[j * m + i] = pa[i * n + j];
  t.on_backward(out, [ia = a.id, m, n](Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    double* ga = tp.grad(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
  return out;
}

Var pick(Var a, std::size_t index) {
  Tape& t = tape_of(a);
  if (index >= a.size())
    throw ShapeError("pick: index " + std::to_string(index) + " out of range for " +
                     dims(a.rows(), a.cols()));
  Var out = t.emit(1, 1, t.tracked(a));
  t.mutable_data(out.id)[0] = a.data()[index];
  t.on_backward(out, [ia = a.id, index](Tape& tp, std::uint32_t o) {
    tp.grad(ia)[index] += tp.grad(o)[0];
  });
  return out;
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const std::size_t n = a.size();
  Var out = t.emit(1, 1, t.tracked(a));
  const double* pa = a.data();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += pa[i];
  t.mutable_data(out.id)[0] = s;
  t.on_backward(out, [ia = a.id, n](Tape& tp, std::uint32_t o) {
    const double g = tp.grad(o)[0];
    double* ga = tp.grad(ia);
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  });
  return out;
}

Var sum_all(std::span<const Var> scalars) {
  if (scalars.empty()) throw std::invalid_argument("sum_all: no operands");
  Tape& t = tape_of(scalars[0]);
  bool tracked = false;
  double s = 0.0;
  std::vector<std::uint32_t> ids;
  for (Var v : scalars) {
    same_tape(scalars[0], v);
    if (v.size() != 1) throw ShapeError("sum_all: operand " + dims(v.rows(), v.cols()) + " is not scalar");
    s += v.data()[0];
    tracked = tracked || t.tracked(v);
    ids.push_back(v.id);
  }
  Var out = t.emit(1, 1, tracked);
  t.mutable_data(out.id)[0] = s;
  t.on_backward(out, [ids = std::move(ids)](Tape& tp, std::uint32_t o) {
    const double g = tp.grad(o)[0];
    for (std::uint32_t id : ids)
      if (tp.tracked({&tp, id})) tp.grad(id)[0] += g;
  });
  return out;
}

Var dropout(Var a, std::span<const double> mask) {
  Tape& t = tape_of(a);
  const std::size_t n = a.size();
  if (mask.size() != n)
    throw ShapeError("dropout: mask of " + std::to_string(mask.size()) + " values for " +
                     dims(a.rows(), a.cols()));
  Var out = t.emit(a.rows(), a.cols(), t.tracked(a));
  const double* pa = a.data();
  double* po = t.mutable_data(out.id);
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * mask[i];
  t.on_backward(out, [ia = a.id, m = std::vector<double>(mask.begin(), mask.end())](
                         Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    double* ga = tp.grad(ia);
    for (std::size_t i = 0; i < m.size(); ++i) ga[i] += g[i] * m[i];
  });
  return out;
}

Var gru_gate(Var xp, Var hp, Var h) {
  same_tape(xp, hp);
  same_tape(xp, h);
  Tape& t = tape_of(xp);
  const std::size_t m = h.rows(), H = h.cols();
  if (xp.rows() != m || xp.cols() != 3 * H) mismatch("gru_gate input projection", xp, h);
  if (hp.rows() != m || hp.cols() != 3 * H) mismatch("gru_gate state projection", hp, h);
  Var out = t.emit(m, H, t.tracked(xp) || t.tracked(hp) || t.tracked(h));
  const double* px = xp.data();
  const double* ph = hp.data();
  const double* pv = h.data();
  double* po = t.mutable_data(out.id);
  std::vector<double> gates(3 * m * H);  // r, z, n per row
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = px + i * 3 * H;
    const double* g = ph + i * 3 * H;
    double* s = gates.data() + i * 3 * H;
    for (std::size_t u = 0; u < H; ++u) {
      const double r = 1.0 / (1.0 + std::exp(-(x[u] + g[u])));
      const double z = 1.0 / (1.0 + std::exp(-(x[H + u] + g[H + u])));
      const double n = std::tanh(x[2 * H + u] + r * g[2 * H + u]);
      s[u] = r;
      s[H + u] = z;
      s[2 * H + u] = n;
      po[i * H + u] = z * pv[i * H + u] + (1.0 - z) * n;
    }
  }
  if (!t.tracked(out)) return out;
  t.on_backward(out, [ix = xp.id, ih = hp.id, iv = h.id, m, H, gates = std::move(gates)](
                         Tape& tp, std::uint32_t o) {
    const double* g = tp.grad(o);
    const double* ph = tp.data(ih);
    const double* pv = tp.data(iv);
    const bool tx = tp.tracked({&tp, ix}), th = tp.tracked({&tp, ih}), tv = tp.tracked({&tp, iv});
    double* gx = tx ? tp.grad(ix) : nullptr;
    double* gh = th ? tp.grad(ih) : nullptr;
    double* gv = tv ? tp.grad(iv) : nullptr;
    for (std::size_t i = 0; i < m; ++i) {
      const double* s = gates.data() + i * 3 * H;
      const double* hpi = ph + i * 3 * H;
      for (std::size_t u = 0; u < H; ++u) {
        const double r = s[u], z = s[H + u], n = s[2 * H + u];
        const double go = g[i * H + u];
        const double dn = go * (1.0 - z) * (1.0 - n * n);
        const double dz = go * (pv[i * H + u] - n) * z * (1.0 - z);
        const double dr = dn * hpi[2 * H + u] * r * (1.0 - r);
        if (gv) gv[i * H + u] += go * z;
        if (gx) {
          double* d = gx + i * 3 * H;
          d[u] += dr;
          d[H + u] += dz;
          d[2 * H + u] += dn;
        }
        if (gh) {
          double* d = gh + i * 3 * H;
          d[u] += dr;
          d[H + u] += dz;
          d[2 * H + u] += dn * r;
        }
      }
    }
  });
  return out;
}

}  // namespace op
}  // namespace cnmt
