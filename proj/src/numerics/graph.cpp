#include "mdat/numerics/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <type_traits>

namespace mdat::numerics {

namespace {

template <class Real>
void require_finite(const char* op, const Tensor<Real>& t) {
  if (!t.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
}

template <class Real>
void require_same_graph(Var<Real> a, Var<Real> b, const char* op) {
  if (a.graph == nullptr || a.graph != b.graph) {
    throw std::invalid_argument(std::string(op) + ": operands belong to different graphs");
  }
}

// Accumulator for reductions: 32-bit tensors sum in 64-bit.
template <class Real>
using Accum = std::conditional_t<std::is_same_v<Real, float>, double, Real>;

// out[m x n] = a[m x k] * b[k x n]
template <class Real>
Tensor<Real> mm(const Tensor<Real>& a, const Tensor<Real>& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor<Real> out({m, n});
  const Real* pa = a.data().data();
  const Real* pb = b.data().data();
  Real* po = out.data().data();
  std::vector<Accum<Real>> acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), Accum<Real>(0));
    for (std::size_t l = 0; l < k; ++l) {
      const Accum<Real> av = pa[i * k + l];
      const Real* brow = pb + l * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
    }
    for (std::size_t j = 0; j < n; ++j) po[i * n + j] = static_cast<Real>(acc[j]);
  }
  return out;
}

// out[m x n] = a[m x k] * b^T, with b stored n x k
template <class Real>
Tensor<Real> mm_nt(const Tensor<Real>& a, const Tensor<Real>& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor<Real> out({m, n});
  const Real* pa = a.data().data();
  const Real* pb = b.data().data();
  Real* po = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Accum<Real> s = 0;
      for (std::size_t l = 0; l < k; ++l) s += Accum<Real>(pa[i * k + l]) * pb[j * k + l];
      po[i * n + j] = static_cast<Real>(s);
    }
  }
  return out;
}

// out[k x n] = a^T * b, with a stored m x k and b stored m x n
template <class Real>
Tensor<Real> mm_tn(const Tensor<Real>& a, const Tensor<Real>& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<Accum<Real>> acc(k * n, Accum<Real>(0));
  const Real* pa = a.data().data();
  const Real* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const Real* brow = pb + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const Accum<Real> av = pa[i * k + l];
      Accum<Real>* orow = acc.data() + l * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  Tensor<Real> out({k, n});
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<Real>(acc[i]);
  return out;
}

template <class Real>
Tensor<Real> softmax_rows_impl(const Tensor<Real>& x) {
  Tensor<Real> y({x.rows(), x.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    const Real mx = *std::max_element(in.begin(), in.end());
    Accum<Real> sum = 0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - mx);
      sum += out[c];
    }
    for (auto& v : out) v = static_cast<Real>(v / sum);
  }
  return y;
}

template <class Real>
Tensor<Real> elementwise(const Tensor<Real>& x, auto fn) {
  Tensor<Real> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fn(x[i]);
  return y;
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph

template <class Real>
Var<Real> Graph<Real>::constant(Tensor<Real> value) {
  require_finite("constant", value);
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <class Real>
Var<Real> Graph<Real>::parameter(const ParamSet<Real>& params, const std::string& name) {
  const auto key = std::make_pair(static_cast<const void*>(&params), name);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return {this, it->second};
  Node n;
  n.op = "parameter";
  n.value = params.get(name);
  n.requires_grad = true;
  require_finite("parameter", n.value);
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(key, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

template <class Real>
Var<Real> Graph<Real>::record(const char* op, Tensor<Real> value, std::vector<std::size_t> inputs,
                              BackwardFn backward) {
  require_finite(op, value);
  Node n;
  n.op = op;
  n.value = std::move(value);
  for (auto in : inputs) {
    if (in >= nodes_.size()) {
      throw std::logic_error(std::string(op) + ": input node is not on the tape (cycle)");
    }
    n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  }
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <class Real>
Tensor<Real>& Graph<Real>::grad_buffer(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad = Tensor<Real>(n.value.shape());
  return n.grad;
}

template <class Real>
void Graph<Real>::accumulate(std::size_t id, const Tensor<Real>& g) {
  Node& n = nodes_.at(id);
  if (!n.requires_grad) return;
  if (g.size() != n.value.size()) {
    throw ShapeError(std::string("gradient shape ") + shape_str(g.shape()) + " does not match " +
                     n.op + " value " + shape_str(n.value.shape()));
  }
  Tensor<Real>& buf = grad_buffer(id);
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

template <class Real>
void Graph<Real>::backward(Var<Real> loss) {
  if (loss.graph != this || loss.id >= nodes_.size()) {
    throw std::invalid_argument("backward: loss is not a node of this graph");
  }
  if (nodes_[loss.id].value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " +
                     shape_str(nodes_[loss.id].value.shape()));
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (auto in : nodes_[i].inputs) {
      if (in >= i) throw std::logic_error("backward: graph is not in topological order (cycle)");
    }
    nodes_[i].grad = Tensor<Real>();
  }
  grad_buffer(loss.id)[0] = Real(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, n.value, n.grad);
  }
}

template <class Real>
ParamSet<Real> Graph<Real>::gradients(const ParamSet<Real>& params) const {
  ParamSet<Real> out;
  for (const auto& [name, value] : params) {
    auto it = param_nodes_.find(std::make_pair(static_cast<const void*>(&params), name));
    if (it == param_nodes_.end() || nodes_[it->second].grad.empty()) {
      out.add(name, Tensor<Real>(value.shape()));
    } else {
      out.add(name, nodes_[it->second].grad);
    }
  }
  return out;
}

template <class Real>
Tensor<Real> Graph<Real>::grad(Var<Real> v) const {
  const Node& n = nodes_.at(v.id);
  return n.grad.empty() ? Tensor<Real>(n.value.shape()) : n.grad;
}

template <class Real>
std::vector<bool> Graph<Real>::branch_pattern() const {
  std::vector<bool> out;
  for (const auto& node : nodes_) {
    const std::string_view op = node.op;
    if (op != "relu" && op != "leaky_relu") continue;
    const auto& x = nodes_[node.inputs.front()].value;
    for (std::size_t i = 0; i < x.size(); ++i) out.push_back(op == "relu" ? x[i] > 0 : x[i] >= 0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operations

template <class Real>
Var<Real> matmul(Var<Real> a, Var<Real> b) {
  require_same_graph(a, b, "matmul");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_str({av.rows(), av.cols()}) +
                     " and " + shape_str({bv.rows(), bv.cols()}));
  }
  const std::size_t ia = a.id, ib = b.id;
  return a.graph->record("matmul", mm(av, bv), {ia, ib},
                         [ia, ib](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dc) {
                           if (g.requires_grad(ia)) g.accumulate(ia, mm_nt(dc, g.value(ib)));
                           if (g.requires_grad(ib)) g.accumulate(ib, mm_tn(g.value(ia), dc));
                         });
}

template <class Real>
Var<Real> affine(Var<Real> x, Var<Real> w, Var<Real> b) {
  require_same_graph(x, w, "affine");
  require_same_graph(x, b, "affine");
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = b.value();
  if (xv.cols() != wv.rows() || bv.size() != wv.cols()) {
    throw ShapeError("affine: incompatible shapes x" + shape_str(xv.shape()) + " W" +
                     shape_str(wv.shape()) + " b" + shape_str(bv.shape()));
  }
  Tensor<Real> out = mm(xv, wv);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
  const std::size_t ix = x.id, iw = w.id, ib = b.id;
  return x.graph->record("affine", std::move(out), {ix, iw, ib},
                         [ix, iw, ib](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
                           if (g.requires_grad(ix)) g.accumulate(ix, mm_nt(dy, g.value(iw)));
                           if (g.requires_grad(iw)) g.accumulate(iw, mm_tn(g.value(ix), dy));
                           if (g.requires_grad(ib)) {
                             Tensor<Real> db(g.value(ib).shape());
                             for (std::size_t r = 0; r < dy.rows(); ++r) {
                               auto row = dy.row(r);
                               for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
                             }
                             g.accumulate(ib, db);
                           }
                         });
}

template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  require_same_graph(a, b, "add");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw ShapeError("add: shape mismatch " + shape_str(av.shape()) + " vs " +
                     shape_str(bv.shape()));
  }
  Tensor<Real> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.graph->record("add", std::move(out), {ia, ib},
                         [ia, ib](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
                           g.accumulate(ia, dy);
                           g.accumulate(ib, dy);
                         });
}

template <class Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
  require_same_graph(a, b, "mul");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw ShapeError("mul: shape mismatch " + shape_str(av.shape()) + " vs " +
                     shape_str(bv.shape()));
  }
  Tensor<Real> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.graph->record("mul", std::move(out), {ia, ib},
                         [ia, ib](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
                           if (g.requires_grad(ia)) {
                             Tensor<Real> d = dy;
                             const auto& o = g.value(ib);
                             for (std::size_t i = 0; i < d.size(); ++i) d[i] *= o[i];
                             g.accumulate(ia, d);
                           }
                           if (g.requires_grad(ib)) {
                             Tensor<Real> d = dy;
                             const auto& o = g.value(ia);
                             for (std::size_t i = 0; i < d.size(); ++i) d[i] *= o[i];
                             g.accumulate(ib, d);
                           }
                         });
}

template <class Real>
Var<Real> scale(Var<Real> x, Real factor) {
  Tensor<Real> out = elementwise(x.value(), [factor](Real v) { return v * factor; });
  const std::size_t ix = x.id;
  return x.graph->record("scale", std::move(out), {ix},
                         [ix, factor](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
                           g.accumulate(ix, elementwise(dy, [factor](Real v) { return v * factor; }));
                         });
}

namespace {
template <class Real>
Tensor<Real> transposed(const Tensor<Real>& x) {
  Tensor<Real> y({x.cols(), x.rows()});
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) y.at(c, r) = x.at(r, c);
  return y;
}
}  // namespace

template <class Real>
Var<Real> transpose(Var<Real> x) {
  const std::size_t ix = x.id;
  return x.graph->record("transpose", transposed(x.value()), {ix},
                         [ix](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
                           g.accumulate(ix, transposed(dy));
                         });
}

template <class Real>
Var<Real> softmax_rows(Var<Real> x) {
  const std::size_t ix = x.id;
  Tensor<Real> y = softmax_rows_impl(x.value());
  return x.graph->record("softmax_rows", std::move(y), {ix},
                                [ix](Graph<Real>& g, const Tensor<Real>& yv, const Tensor<Real>& dy) {
                                  Tensor<Real> dx(yv.shape());
                                  const std::size_t n = yv.cols();
                                  for (std::size_t r = 0; r < yv.rows(); ++r) {
                                    Accum<Real> dot = 0;
                                    for (std::size_t c = 0; c < n; ++c)
                                      dot += Accum<Real>(dy[r * n + c]) * yv[r * n + c];
                                    for (std::size_t c = 0; c < n; ++c)
                                      dx[r * n + c] = static_cast<Real>(
                                          yv[r * n + c] * (dy[r * n + c] - dot));
                                  }
                                  g.accumulate(ix, dx);
                                });
}

template <class Real>
Var<Real> leaky_relu(Var<Real> x, Real slope) {
  if (!(slope > Real(0) && slope <= Real(1))) {
    throw std::invalid_argument("leaky_relu: slope must lie in (0, 1]");
  }
  const std::size_t ix = x.id;
  Tensor<Real> y = elementwise(x.value(), [slope](Real v) { return v >= 0 ? v : slope * v; });
  return x.graph->record("leaky_relu", std::move(y), {ix},
                         [ix, slope](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
                           const auto& xv = g.value(ix);
                           Tensor<Real> dx = dy;
                           for (std::size_t i = 0; i < dx.size(); ++i)
                             if (xv[i] < 0) dx[i] *= slope;
                           g.accumulate(ix, dx);
                         });
}

template <class Real>
Var<Real> relu(Var<Real> x) {
  const std::size_t ix = x.id;
  Tensor<Real> y = elementwise(x.value(), [](Real v) { return v > 0 ? v : Real(0); });
  return x.graph->record("relu", std::move(y), {ix}, [ix](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
    const auto& xv = g.value(ix);
    Tensor<Real> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (!(xv[i] > 0)) dx[i] = 0;
    g.accumulate(ix, dx);
  });
}

template <class Real>
Var<Real> tanh(Var<Real> x) {
  const std::size_t ix = x.id;
  return x.graph->record(
      "tanh", elementwise(x.value(), [](Real v) { return std::tanh(v); }), {ix},
      [ix](Graph<Real>& g, const Tensor<Real>& yv, const Tensor<Real>& dy) {
        Tensor<Real> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= Real(1) - yv[i] * yv[i];
        g.accumulate(ix, dx);
      });
}

template <class Real>
Var<Real> sigmoid(Var<Real> x) {
  const std::size_t ix = x.id;
  return x.graph->record(
      "sigmoid",
      elementwise(x.value(),
                  [](Real v) {
                    if (v >= 0) return Real(1) / (Real(1) + std::exp(-v));
                    const Real e = std::exp(v);
                    return e / (Real(1) + e);
                  }),
      {ix}, [ix](Graph<Real>& g, const Tensor<Real>& yv, const Tensor<Real>& dy) {
        Tensor<Real> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= yv[i] * (Real(1) - yv[i]);
        g.accumulate(ix, dx);
      });
}

template <class Real>
Var<Real> layer_norm(Var<Real> x, Var<Real> gamma, Var<Real> beta, Real eps) {
  require_same_graph(x, gamma, "layer_norm");
  require_same_graph(x, beta, "layer_norm");
  const auto& xv = x.value();
  const std::size_t rows = xv.rows(), d = xv.cols();
  if (gamma.value().size() != d || beta.value().size() != d) {
    throw ShapeError("layer_norm: gain/shift width must equal " + std::to_string(d));
  }
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  Tensor<Real> xhat({rows, d});
  std::vector<Real> inv_sigma(rows);
  Tensor<Real> y({rows, d});
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = xv.row(r);
    Accum<Real> mean = 0;
    for (auto v : in) mean += v;
    mean /= Accum<Real>(d);
    Accum<Real> var = 0;
    for (auto v : in) var += (v - mean) * (v - mean);
    var /= Accum<Real>(d);
    const Accum<Real> inv = Accum<Real>(1) / std::sqrt(var + eps);
    inv_sigma[r] = static_cast<Real>(inv);
    for (std::size_t c = 0; c < d; ++c) {
      xhat.at(r, c) = static_cast<Real>((in[c] - mean) * inv);
      y.at(r, c) = xhat.at(r, c) * gv[c] + bv[c];
    }
  }
  const std::size_t ix = x.id, ig = gamma.id, ib = beta.id;
  return x.graph->record(
      "layer_norm", std::move(y), {ix, ig, ib},
      [ix, ig, ib, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](
          Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
        const std::size_t rows = xhat.rows(), d = xhat.cols();
        const auto& gv = g.value(ig);
        if (g.requires_grad(ix)) {
          Tensor<Real> dx({rows, d});
          std::vector<Real> dxhat(d);
          for (std::size_t r = 0; r < rows; ++r) {
            Accum<Real> m1 = 0, m2 = 0;
            for (std::size_t c = 0; c < d; ++c) {
              dxhat[c] = dy[r * d + c] * gv[c];
              m1 += dxhat[c];
              m2 += Accum<Real>(dxhat[c]) * xhat.at(r, c);
            }
            m1 /= Accum<Real>(d);
            m2 /= Accum<Real>(d);
            for (std::size_t c = 0; c < d; ++c)
              dx.at(r, c) = static_cast<Real>(inv_sigma[r] * (dxhat[c] - m1 - xhat.at(r, c) * m2));
          }
          g.accumulate(ix, dx);
        }
        if (g.requires_grad(ig) || g.requires_grad(ib)) {
          Tensor<Real> dg(g.value(ig).shape()), db(g.value(ib).shape());
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) {
              dg[c] += dy[r * d + c] * xhat.at(r, c);
              db[c] += dy[r * d + c];
            }
          g.accumulate(ig, dg);
          g.accumulate(ib, db);
        }
      });
}

template <class Real>
Var<Real> concat_rows(Var<Real> a, Var<Real> b) {
  require_same_graph(a, b, "concat_rows");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw ShapeError("concat_rows: column counts differ " + shape_str(av.shape()) + " vs " +
                     shape_str(bv.shape()));
  }
  std::vector<Real> data(av.values());
  data.insert(data.end(), bv.values().begin(), bv.values().end());
  const std::size_t ra = av.rows(), rb = bv.rows(), n = av.cols();
  const std::size_t ia = a.id, ib = b.id;
  return a.graph->record(
      "concat_rows", Tensor<Real>({ra + rb, n}, std::move(data)), {ia, ib},
      [ia, ib, ra, rb, n](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
        const auto* p = dy.data().data();
        if (g.requires_grad(ia))
          g.accumulate(ia, Tensor<Real>({ra, n}, std::vector<Real>(p, p + ra * n)));
        if (g.requires_grad(ib))
          g.accumulate(ib, Tensor<Real>({rb, n}, std::vector<Real>(p + ra * n, p + (ra + rb) * n)));
      });
}

template <class Real>
Var<Real> concat_cols(Var<Real> a, Var<Real> b) {
  require_same_graph(a, b, "concat_cols");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw ShapeError("concat_cols: row counts differ " + shape_str(av.shape()) + " vs " +
                     shape_str(bv.shape()));
  }
  const std::size_t rows = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor<Real> out({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(av.row(r).begin(), av.row(r).end(), out.row(r).begin());
    std::copy(bv.row(r).begin(), bv.row(r).end(), out.row(r).begin() + ca);
  }
  const std::size_t ia = a.id, ib = b.id;
  return a.graph->record("concat_cols", std::move(out), {ia, ib},
                         [ia, ib, rows, ca, cb](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
                           Tensor<Real> da({rows, ca}), db({rows, cb});
                           for (std::size_t r = 0; r < rows; ++r) {
                             auto src = dy.row(r);
                             std::copy(src.begin(), src.begin() + ca, da.row(r).begin());
                             std::copy(src.begin() + ca, src.end(), db.row(r).begin());
                           }
                           g.accumulate(ia, da);
                           g.accumulate(ib, db);
                         });
}

template <class Real>
Var<Real> slice_rows(Var<Real> x, std::size_t begin, std::size_t count) {
  const auto& xv = x.value();
  if (count == 0 || begin + count > xv.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " + shape_str(xv.shape()));
  }
  const std::size_t n = xv.cols();
  const auto* p = xv.data().data();
  Tensor<Real> out({count, n}, std::vector<Real>(p + begin * n, p + (begin + count) * n));
  const std::size_t ix = x.id;
  return x.graph->record("slice_rows", std::move(out), {ix},
                         [ix, begin, count, n](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
                           Tensor<Real>& buf = g.grad_buffer(ix);
                           for (std::size_t i = 0; i < count * n; ++i) buf[begin * n + i] += dy[i];
                         });
}

template <class Real>
Var<Real> slice_cols(Var<Real> x, std::size_t begin, std::size_t count) {
  const auto& xv = x.value();
  if (count == 0 || begin + count > xv.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " + shape_str(xv.shape()));
  }
  const std::size_t rows = xv.rows(), n = xv.cols();
  Tensor<Real> out({rows, count});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c) out.at(r, c) = xv[r * n + begin + c];
  const std::size_t ix = x.id;
  return x.graph->record("slice_cols", std::move(out), {ix},
                         [ix, begin, count, rows, n](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
                           Tensor<Real>& buf = g.grad_buffer(ix);
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t c = 0; c < count; ++c)
                               buf[r * n + begin + c] += dy[r * count + c];
                         });
}

template <class Real>
Var<Real> mean_rows(Var<Real> x) {
  const auto& xv = x.value();
  const std::size_t rows = xv.rows(), n = xv.cols();
  Tensor<Real> out({1, n});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < n; ++c) out[c] += xv[r * n + c];
  for (auto& v : out.data()) v /= Real(rows);
  const std::size_t ix = x.id;
  return x.graph->record("mean_rows", std::move(out), {ix},
                         [ix, rows, n](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
                           Tensor<Real>& buf = g.grad_buffer(ix);
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t c = 0; c < n; ++c)
                               buf[r * n + c] += dy[c] / Real(rows);
                         });
}

template <class Real>
Var<Real> sum_all(Var<Real> x) {
  Real s = 0;
  for (auto v : x.value().data()) s += v;
  const std::size_t ix = x.id;
  return x.graph->record("sum_all", Tensor<Real>({1}, {s}), {ix},
                         [ix](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
                           Tensor<Real>& buf = g.grad_buffer(ix);
                           for (auto& v : buf.data()) v += dy[0];
                         });
}

template <class Real>
Var<Real> dropout(Var<Real> x, Real p, bool train, std::mt19937_64* rng) {
  if (!(p >= Real(0) && p < Real(1))) throw std::invalid_argument("dropout: p must lie in [0, 1)");
  if (!train || p == Real(0)) return x;
  if (rng == nullptr) throw std::invalid_argument("dropout: training mode requires a generator");
  const auto& xv = x.value();
  Tensor<Real> mask(xv.shape());
  const Real keep_scale = Real(1) / (Real(1) - p);
  for (auto& m : mask.data()) {
    const double u = static_cast<double>((*rng)() >> 11) * 0x1.0p-53;
    m = u >= static_cast<double>(p) ? keep_scale : Real(0);
  }
  Tensor<Real> y = xv;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  const std::size_t ix = x.id;
  return x.graph->record("dropout", std::move(y), {ix},
                         [ix, mask = std::move(mask)](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
                           Tensor<Real> dx = dy;
                           for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask[i];
                           g.accumulate(ix, dx);
                         });
}

template <class Real>
Var<Real> cross_entropy(Var<Real> logits, std::size_t label) {
  const auto& z = logits.value();
  if (z.rows() != 1) throw ShapeError("cross_entropy: expects a single logit row");
  const std::size_t n = z.cols();
  if (label >= n) {
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(n) + ")");
  }
  const Real mx = *std::max_element(z.data().begin(), z.data().end());
  Real sum = 0;
  for (auto v : z.data()) sum += std::exp(v - mx);
  const Real lse = mx + std::log(sum);
  const std::size_t iz = logits.id;
  return logits.graph->record("cross_entropy", Tensor<Real>({1}, {lse - z[label]}), {iz},
                              [iz, label, lse](Graph<Real>& g, const Tensor<Real>&, const Tensor<Real>& dy) {
                                const auto& zv = g.value(iz);
                                Tensor<Real> dz(zv.shape());
                                for (std::size_t c = 0; c < zv.size(); ++c)
                                  dz[c] = dy[0] * (std::exp(zv[c] - lse) - (c == label ? 1 : 0));
                                g.accumulate(iz, dz);
                              });
}

template <class Real>
Tensor<Real> softmax_rows(const Tensor<Real>& x) {
  require_finite("softmax_rows", x);
  return softmax_rows_impl(x);
}

template <class Real>
Real cross_entropy_from_probs(const Tensor<Real>& probs, std::size_t label) {
  if (label >= probs.size()) {
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(probs.size()) + ")");
  }
  const Real p = probs[label];
  if (!(p > Real(0))) return std::numeric_limits<Real>::infinity();
  return -std::log(p);
}

#define MDAT_INSTANTIATE_OPS(R)                                                      \
  template class Graph<R>;                                                           \
  template Var<R> matmul(Var<R>, Var<R>);                                            \
  template Var<R> affine(Var<R>, Var<R>, Var<R>);                                    \
  template Var<R> add(Var<R>, Var<R>);                                               \
  template Var<R> mul(Var<R>, Var<R>);                                               \
  template Var<R> scale(Var<R>, R);                                                  \
  template Var<R> transpose(Var<R>);                                                 \
  template Var<R> softmax_rows(Var<R>);                                              \
  template Var<R> leaky_relu(Var<R>, R);                                             \
  template Var<R> relu(Var<R>);                                                      \
  template Var<R> tanh(Var<R>);                                                      \
  template Var<R> sigmoid(Var<R>);                                                   \
  template Var<R> layer_norm(Var<R>, Var<R>, Var<R>, R);                             \
  template Var<R> concat_rows(Var<R>, Var<R>);                                       \
  template Var<R> concat_cols(Var<R>, Var<R>);                                       \
  template Var<R> slice_rows(Var<R>, std::size_t, std::size_t);                      \
  template Var<R> slice_cols(Var<R>, std::size_t, std::size_t);                      \
  template Var<R> mean_rows(Var<R>);                                                 \
  template Var<R> sum_all(Var<R>);                                                   \
  template Var<R> dropout(Var<R>, R, bool, std::mt19937_64*);                        \
  template Var<R> cross_entropy(Var<R>, std::size_t);                                \
  template Tensor<R> softmax_rows(const Tensor<R>&);                                 \
  template R cross_entropy_from_probs(const Tensor<R>&, std::size_t);

MDAT_INSTANTIATE_OPS(float)
MDAT_INSTANTIATE_OPS(double)
MDAT_INSTANTIATE_OPS(long double)

#undef MDAT_INSTANTIATE_OPS

}  // namespace mdat::numerics
