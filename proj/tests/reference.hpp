#pragma once

// Plain-loop recomputation of the model from a parameter snapshot, plus a
// list-based cache. Shares no code with the library beyond ParamSet access,
// so it serves as an oracle for the tape-based implementation.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cnmt/params.hpp"

namespace reference {

using Vec = std::vector<double>;

inline const cnmt::Tensor& P(const cnmt::ParamSet& ps, const char* name) { return ps[name]; }

// x (1 x in) times W (in x out), plus optional bias.
inline Vec vecmat(const Vec& x, const cnmt::Tensor& W, const cnmt::Tensor* b = nullptr) {
  const std::size_t in = W.rows(), out = W.cols();
  Vec y(out, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    double s = 0.0;
    for (std::size_t i = 0; i < in; ++i) s += x[i] * W.values[i * out + o];
    y[o] = s + (b ? b->values[o] : 0.0);
  }
  return y;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec tanh(Vec v) {
  for (double& x : v) x = std::tanh(x);
  return v;
}

inline Vec add(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Vec cat(std::initializer_list<const Vec*> parts) {
  Vec out;
  for (const Vec* p : parts) out.insert(out.end(), p->begin(), p->end());
  return out;
}

inline Vec softmax(const Vec& e) {
  double m = e[0];
  for (double x : e) m = std::max(m, x);
  Vec p(e.size());
  double s = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) s += (p[i] = std::exp(e[i] - m));
  for (double& x : p) x /= s;
  return p;
}

inline Vec row(const cnmt::Tensor& t, int r) {
  if (r < 0) return Vec(t.cols(), 0.0);
  return Vec(t.values.begin() + r * t.cols(), t.values.begin() + (r + 1) * t.cols());
}

inline Vec gru(const cnmt::ParamSet& ps, const std::string& name, const Vec& x, const Vec& h) {
  const Vec xp = vecmat(x, ps[name + ".Wx"], &ps[name + ".b"]);
  const Vec hp = vecmat(h, ps[name + ".Wh"]);
  const std::size_t H = h.size();
  Vec out(H);
  for (std::size_t i = 0; i < H; ++i) {
    const double r = sigmoid(xp[i] + hp[i]);
    const double z = sigmoid(xp[H + i] + hp[H + i]);
    const double n = std::tanh(xp[2 * H + i] + r * hp[2 * H + i]);
    out[i] = z * h[i] + (1.0 - z) * n;
  }
  return out;
}

struct Enc {
  std::vector<Vec> ann;
  Vec s0;
};

inline Enc encode(const cnmt::ParamSet& ps, const std::vector<int>& src) {
  const std::size_t T = src.size(), H = ps["enc.fwd.Wh"].rows();
  std::vector<Vec> f(T), b(T);
  Vec h(H, 0.0);
  for (std::size_t j = 0; j < T; ++j) f[j] = h = gru(ps, "enc.fwd", row(ps["src.emb"], src[j]), h);
  h.assign(H, 0.0);
  for (std::size_t j = T; j-- > 0;) b[j] = h = gru(ps, "enc.bwd", row(ps["src.emb"], src[j]), h);
  Enc e;
  for (std::size_t j = 0; j < T; ++j) e.ann.push_back(cat({&f[j], &b[j]}));
  e.s0 = tanh(vecmat(b[0], ps["dec.init.W"], &ps["dec.init.b"]));
  return e;
}

struct Step {
  Vec alpha, s, c, emb, p_nmt, features;
};

inline Step step(const cnmt::ParamSet& ps, const Enc& enc, const Vec& s_prev, int prev) {
  Step st;
  st.emb = row(ps["tgt.emb"], prev);
  const Vec fb = gru(ps, "dec.feedback", st.emb, s_prev);
  const Vec q = vecmat(fb, ps["att.Wq"]);
  Vec e;
  for (const Vec& a : enc.ann) {
    const Vec hid = tanh(add(vecmat(a, ps["att.Wk"], &ps["att.b"]), q));
    e.push_back(vecmat(hid, ps["att.v"])[0]);
  }
  st.alpha = softmax(e);
  st.c.assign(enc.ann[0].size(), 0.0);
  for (std::size_t j = 0; j < enc.ann.size(); ++j)
    for (std::size_t i = 0; i < st.c.size(); ++i) st.c[i] += st.alpha[j] * enc.ann[j][i];
  st.s = gru(ps, "dec.context", st.c, fb);
  const Vec rin = cat({&st.emb, &st.s, &st.c});
  const Vec t = tanh(vecmat(rin, ps["out.hidden.W"], &ps["out.hidden.b"]));
  st.p_nmt = softmax(vecmat(t, ps["out.W"], &ps["out.b"]));
  st.features = cat({&st.s, &st.c, &st.emb});
  return st;
}

inline Vec cache_scores(const cnmt::ParamSet& ps, const Step& st, const std::vector<int>& members) {
  const Vec ctx = vecmat(st.features, ps["cache.score.Wctx"], &ps["cache.score.b1"]);
  Vec scores;
  for (int m : members) {
    const Vec h1 = tanh(add(vecmat(row(ps["tgt.emb"], m), ps["cache.score.Wword"]), ctx));
    const Vec h2 = tanh(vecmat(h1, ps["cache.score.W2"], &ps["cache.score.b2"]));
    scores.push_back(vecmat(h2, ps["cache.score.W3"], &ps["cache.score.b3"])[0]);
  }
  return scores;
}

inline double gate(const cnmt::ParamSet& ps, const Step& st) {
  const Vec h1 = tanh(vecmat(st.features, ps["cache.gate.W1"], &ps["cache.gate.b1"]));
  const Vec h2 = tanh(vecmat(h1, ps["cache.gate.W2"], &ps["cache.gate.b2"]));
  return sigmoid(vecmat(h2, ps["cache.gate.W3"], &ps["cache.gate.b3"])[0]);
}

/// List-based cache model: dynamic part as a plain list with linear scans.
struct ListCache {
  std::size_t capacity = 0;
  std::vector<bool> excluded;  // by id; ids >= excluded.size() are OOV
  std::vector<int> dynamic;
  std::vector<int> topic;

  void insert(int id) {
    if (id < 0 || static_cast<std::size_t>(id) >= excluded.size() || excluded[id]) return;
    if (capacity == 0) return;
    for (int d : dynamic)
      if (d == id) return;
    if (dynamic.size() == capacity) dynamic.erase(dynamic.begin());
    dynamic.push_back(id);
  }
  std::vector<int> members() const {
    std::vector<int> m = dynamic;
    for (int t : topic)
      if (std::find(m.begin(), m.end(), t) == m.end()) m.push_back(t);
    return m;
  }
};

/// Teacher-forced NLL. With `cache` null this is the baseline loss; with a
/// cache the step distribution is the gate-weighted mixture. fixed_gate < 0
/// selects the learned gate.
inline double nll(const cnmt::ParamSet& ps, const std::vector<int>& src,
                  const std::vector<int>& tgt, const ListCache* cache = nullptr,
                  double fixed_gate = -1.0) {
  const Enc enc = encode(ps, src);
  Vec s = enc.s0;
  ListCache c = cache ? *cache : ListCache{};
  double loss = 0.0;
  int prev = -1;
  for (std::size_t t = 0; t < tgt.size(); ++t) {
    if (cache && t > 0) c.insert(prev);
    const Step st = step(ps, enc, s, prev);
    const int y = tgt[t];
    double py = st.p_nmt[y];
    const std::vector<int> members = cache ? c.members() : std::vector<int>{};
    if (!members.empty()) {
      const double a = fixed_gate >= 0.0 ? fixed_gate : gate(ps, st);
      const Vec pc = softmax(cache_scores(ps, st, members));
      py *= a;
      for (std::size_t k = 0; k < members.size(); ++k)
        if (members[k] == y) py += (1.0 - a) * pc[k];
    }
    loss -= std::log(py);
    s = st.s;
    prev = y;
  }
  return loss;
}

}  // namespace reference
