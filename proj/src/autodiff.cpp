// SPDX-License-Identifier: Apache-2.0

#include "coral8/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace coral8 {

const Tensor& Var::value() const { return tape_->value(id_); }

namespace {

void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands live on different tapes");
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.dims() != b.dims())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.dims()) + " vs " +
                     to_string(b.dims()));
}

void require_rank2(const char* op, Var x) {
  if (x.value().rank() != 2)
    throw ShapeError(std::string(op) + ": expected rank 2, got " + to_string(x.dims()));
}

void require_nonempty(const char* op, Var x) {
  if (!x.valid() || x.value().empty()) throw ShapeError(std::string(op) + ": empty tensor");
}

}  // namespace

// ---- Tape ------------------------------------------------------------------

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant: non-finite value");
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
  if (!value.all_finite()) throw NumericError("parameter " + name + ": non-finite value");
  nodes_.push_back(Node{value, {}, {}, {}, true});
  params_.emplace(name, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> parents,
                 BackwardFn backward) {
  if (!value.all_finite())
    throw NumericError(std::string(op) + ": non-finite forward value " + to_string(value.dims()));
  bool needs = std::any_of(parents.begin(), parents.end(),
                           [&](std::size_t p) { return nodes_[p].requires_grad; });
  Node node{std::move(value), {}, {}, {}, needs};
  if (needs) {
    node.parents = std::move(parents);
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.dims(), 0.0);
  return n.grad;
}

Gradients Tape::backward(Var root) {
  if (!root.valid() || &root.tape() != this) throw std::invalid_argument("backward: root is not on this tape");
  if (nodes_.empty()) throw std::logic_error("backward: empty tape");
  if (backward_done_) throw std::logic_error("backward: tape already consumed; clear() it first");
  if (root.value().size() != 1)
    throw ShapeError("backward: root must be scalar, got " + to_string(root.dims()));
  backward_done_ = true;

  grad_slot(root.id())[0] = 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }

  Gradients out;
  for (const auto& [name, id] : params_) {
    const Node& n = nodes_[id];
    out.emplace(name, n.grad.empty() ? Tensor(n.value.dims(), 0.0) : n.grad);
  }
  return out;
}

void Tape::clear() {
  nodes_.clear();
  params_.clear();
  backward_done_ = false;
}

Var ParamBinder::operator()(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  if (trainable_) return tape_.parameter(name, it->second);
  auto c = constants_.find(name);
  if (c != constants_.end()) return c->second;
  Var v = tape_.constant(it->second);
  constants_.emplace(name, v);
  return v;
}

// ---- element-wise ----------------------------------------------------------

namespace {

// dydx(x, y) returns the local derivative given input and output values.
template <typename Fwd, typename Dydx>
Var unary(const char* op, Var x, Fwd fwd, Dydx dydx) {
  require_nonempty(op, x);
  const Tensor& xv = x.value();
  Tensor out(xv.dims());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  std::size_t xi = x.id();
  return x.tape().record(op, std::move(out), {xi}, [xi, dydx](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& xv = t.value(xi);
    const Tensor& yv = t.value(self);
    Tensor& gx = t.grad_slot(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dydx(xv[i], yv[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("add", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("add", std::move(out), {ai, bi}, [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    for (std::size_t p : {ai, bi}) {
      if (!t.requires_grad(p)) continue;
      Tensor& gp = t.grad_slot(p);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) { return add(a, neg(b)); }

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("mul", std::move(out), {ai, bi}, [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& av = t.value(ai);
    const Tensor& bv = t.value(bi);
    if (t.requires_grad(ai)) {
      Tensor& ga = t.grad_slot(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad_slot(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var div(Var a, Var b) { return mul(a, reciprocal(b)); }

Var add_row(Var x, Var row) {
  require_same_tape(x, row);
  require_rank2("add_row", x);
  const Tensor& rv = row.value();
  if (rv.size() != x.value().cols())
    throw ShapeError("add_row: shape mismatch " + to_string(x.dims()) + " vs " + to_string(rv.dims()));
  Tensor out = x.value();
  const std::size_t n = out.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += rv[i % n];
  std::size_t xi = x.id(), ri = row.id();
  return x.tape().record("add_row", std::move(out), {xi, ri}, [xi, ri, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    if (t.requires_grad(xi)) {
      Tensor& gx = t.grad_slot(xi);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(ri)) {
      Tensor& gr = t.grad_slot(ri);
      for (std::size_t i = 0; i < g.size(); ++i) gr[i % n] += g[i];
    }
  });
}

Var scale(Var s, Var x) {
  require_same_tape(s, x);
  if (s.value().size() != 1) throw ShapeError("scale: factor must be 1 x 1, got " + to_string(s.dims()));
  const double k = s.value()[0];
  Tensor out = x.value();
  for (double& v : out.storage()) v *= k;
  std::size_t si = s.id(), xi = x.id();
  return x.tape().record("scale", std::move(out), {si, xi}, [si, xi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& xv = t.value(xi);
    const double k = t.value(si)[0];
    if (t.requires_grad(si)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
      t.grad_slot(si)[0] += acc;
    }
    if (t.requires_grad(xi)) {
      Tensor& gx = t.grad_slot(xi);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * k;
    }
  });
}

Var mul_scalar(Var x, double k) {
  return unary("mul_scalar", x, [k](double v) { return v * k; },
               [k](double, double) { return k; });
}

Var add_scalar(Var x, double k) {
  return unary("add_scalar", x, [k](double v) { return v + k; },
               [](double, double) { return 1.0; });
}

Var neg(Var x) { return mul_scalar(x, -1.0); }

Var square(Var x) {
  return unary("square", x, [](double v) { return v * v; },
               [](double v, double) { return 2.0 * v; });
}

Var reciprocal(Var x) {
  return unary("reciprocal", x, [](double v) { return 1.0 / v; },
               [](double, double y) { return -y * y; });
}

Var clamp_min(Var x, double lo) {
  return unary("clamp_min", x, [lo](double v) { return v >= lo ? v : lo; },
               [lo](double v, double) { return v >= lo ? 1.0 : 0.0; });
}

Var log_floor(Var x, double floor) {
  return unary("log_floor", x, [floor](double v) { return std::log(v > floor ? v : floor); },
               [floor](double v, double) { return v > floor ? 1.0 / v : 0.0; });
}

Var sigmoid(Var x) {
  return unary("sigmoid", x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
               [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Var softmax_rows(Var x) {
  require_nonempty("softmax_rows", x);
  require_rank2("softmax_rows", x);
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(xv.dims());
  for (std::size_t r = 0; r < m; ++r) {
    double mx = xv.at(r, 0);
    for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, xv.at(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += (out.at(r, c) = std::exp(xv.at(r, c) - mx));
    for (std::size_t c = 0; c < n; ++c) out.at(r, c) /= z;
  }
  std::size_t xi = x.id();
  return x.tape().record("softmax_rows", std::move(out), {xi}, [xi, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_slot(xi);
    for (std::size_t r = 0; r < m; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += g.at(r, c) * y.at(r, c);
      for (std::size_t c = 0; c < n; ++c) gx.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
    }
  });
}

Var activation(Activation kind, Var x) {
  switch (kind) {
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return tanh(x);
    case Activation::softmax_rows: return softmax_rows(x);
  }
  throw std::invalid_argument("activation: unknown kind");
}

// ---- linear algebra and structure -----------------------------------------

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k)
    throw ShapeError("matmul: shape mismatch " + to_string(av.dims()) + " vs " + to_string(bv.dims()));
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv.values()[p * n];
      double* orow = &out.values()[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("matmul", std::move(out), {ai, bi}, [ai, bi, m, k, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& av = t.value(ai);
    const Tensor& bv = t.value(bi);
    if (t.requires_grad(ai)) {  // ga = g b^T
      Tensor& ga = t.grad_slot(ai);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (t.requires_grad(bi)) {  // gb = a^T g
      Tensor& gb = t.grad_slot(bi);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
    }
  });
}

Var linear(Var x, Var w) {
  require_same_tape(x, w);
  require_rank2("linear", x);
  require_rank2("linear", w);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const std::size_t m = xv.rows(), k = xv.cols(), n = wv.rows();
  if (wv.cols() != k)
    throw ShapeError("linear: shape mismatch " + to_string(xv.dims()) + " vs " + to_string(wv.dims()));
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* xr = &xv.values()[i * k];
    for (std::size_t j = 0; j < n; ++j) {
      const double* wr = &wv.values()[j * k];
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += xr[p] * wr[p];
      out[i * n + j] = acc;
    }
  }
  std::size_t xi = x.id(), wi = w.id();
  return x.tape().record("linear", std::move(out), {xi, wi}, [xi, wi, m, k, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& xv = t.value(xi);
    const Tensor& wv = t.value(wi);
    if (t.requires_grad(xi)) {  // gx = g w
      Tensor& gx = t.grad_slot(xi);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g[i * n + j];
          if (gij == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) gx[i * k + p] += gij * wv[j * k + p];
        }
    }
    if (t.requires_grad(wi)) {  // gw = g^T x
      Tensor& gw = t.grad_slot(wi);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g[i * n + j];
          if (gij == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) gw[j * k + p] += gij * xv[i * k + p];
        }
    }
  });
}

Var transpose(Var x) {
  require_rank2("transpose", x);
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  std::size_t xi = x.id();
  return x.tape().record("transpose", std::move(out), {xi}, [xi, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    Tensor& gx = t.grad_slot(xi);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[j * m + i];
  });
}

Var reshape(Var x, Shape dims) {
  Tensor out = x.value().reshaped(std::move(dims));
  std::size_t xi = x.id();
  return x.tape().record("reshape", std::move(out), {xi}, [xi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    Tensor& gx = t.grad_slot(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t m = parts[0].value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> ids, widths;
  for (const Var& p : parts) {
    require_rank2("concat_cols", p);
    require_same_tape(parts[0], p);
    if (p.value().rows() != m)
      throw ShapeError("concat_cols: row mismatch " + to_string(parts[0].dims()) + " vs " + to_string(p.dims()));
    ids.push_back(p.id());
    widths.push_back(p.value().cols());
    total += p.value().cols();
  }
  Tensor out({m, total});
  std::size_t off = 0;
  for (std::size_t q = 0; q < parts.size(); ++q) {
    const Tensor& v = parts[q].value();
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < widths[q]; ++c) out[r * total + off + c] = v[r * widths[q] + c];
    off += widths[q];
  }
  return parts[0].tape().record("concat_cols", std::move(out), ids,
                                [ids, widths, m, total](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    std::size_t off = 0;
    for (std::size_t q = 0; q < ids.size(); ++q) {
      if (t.requires_grad(ids[q])) {
        Tensor& gp = t.grad_slot(ids[q]);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < widths[q]; ++c) gp[r * widths[q] + c] += g[r * total + off + c];
      }
      off += widths[q];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  const std::size_t n = parts[0].value().cols();
  std::size_t total = 0;
  std::vector<std::size_t> ids, sizes;
  std::vector<double> data;
  for (const Var& p : parts) {
    require_rank2("concat_rows", p);
    require_same_tape(parts[0], p);
    if (p.value().cols() != n)
      throw ShapeError("concat_rows: column mismatch " + to_string(parts[0].dims()) + " vs " + to_string(p.dims()));
    ids.push_back(p.id());
    sizes.push_back(p.value().size());
    total += p.value().rows();
    data.insert(data.end(), p.value().values().begin(), p.value().values().end());
  }
  return parts[0].tape().record("concat_rows", Tensor({total, n}, std::move(data)), ids,
                                [ids, sizes](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    std::size_t off = 0;
    for (std::size_t q = 0; q < ids.size(); ++q) {
      if (t.requires_grad(ids[q])) {
        Tensor& gp = t.grad_slot(ids[q]);
        for (std::size_t i = 0; i < sizes[q]; ++i) gp[i] += g[off + i];
      }
      off += sizes[q];
    }
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  require_rank2("slice_cols", x);
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (begin >= end || end > n)
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + to_string(xv.dims()));
  const std::size_t w = end - begin;
  Tensor out({m, w});
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = xv[r * n + begin + c];
  std::size_t xi = x.id();
  return x.tape().record("slice_cols", std::move(out), {xi}, [xi, m, n, w, begin](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    Tensor& gx = t.grad_slot(xi);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < w; ++c) gx[r * n + begin + c] += g[r * w + c];
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  require_rank2("slice_rows", x);
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (begin >= end || end > m)
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + to_string(xv.dims()));
  std::vector<double> data(xv.values().begin() + begin * n, xv.values().begin() + end * n);
  std::size_t xi = x.id();
  return x.tape().record("slice_rows", Tensor({end - begin, n}, std::move(data)), {xi},
                         [xi, n, begin](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    Tensor& gx = t.grad_slot(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * n + i] += g[i];
  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  require_rank2("gather_rows", table);
  if (ids.empty()) throw ShapeError("gather_rows: no ids");
  const Tensor& tv = table.value();
  const std::size_t rows = tv.rows(), n = tv.cols();
  std::vector<double> data;
  data.reserve(ids.size() * n);
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= rows)
      throw std::out_of_range("gather_rows: id " + std::to_string(id) + " out of range for " +
                              std::to_string(rows) + " rows");
    auto row = tv.values().subspan(static_cast<std::size_t>(id) * n, n);
    data.insert(data.end(), row.begin(), row.end());
  }
  std::vector<int> idv(ids.begin(), ids.end());
  std::size_t ti = table.id();
  return table.tape().record("gather_rows", Tensor({ids.size(), n}, std::move(data)), {ti},
                             [ti, idv, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    Tensor& gt = t.grad_slot(ti);
    for (std::size_t r = 0; r < idv.size(); ++r)
      for (std::size_t c = 0; c < n; ++c) gt[static_cast<std::size_t>(idv[r]) * n + c] += g[r * n + c];
  });
}

Var pick(Var x, std::size_t flat_index) {
  const Tensor& xv = x.value();
  if (flat_index >= xv.size())
    throw std::out_of_range("pick: index " + std::to_string(flat_index) + " out of range for " +
                            to_string(xv.dims()));
  std::size_t xi = x.id();
  return x.tape().record("pick", Tensor::scalar(xv[flat_index]), {xi}, [xi, flat_index](Tape& t, std::size_t self) {
    t.grad_slot(xi)[flat_index] += t.grad_at(self)[0];
  });
}

// ---- reductions ------------------------------------------------------------

Var sum(Var x) {
  require_nonempty("sum", x);
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  std::size_t xi = x.id();
  return x.tape().record("sum", Tensor::scalar(acc), {xi}, [xi](Tape& t, std::size_t self) {
    const double g = t.grad_at(self)[0];
    for (double& v : t.grad_slot(xi).storage()) v += g;
  });
}

Var mean(Var x) {
  require_nonempty("mean", x);
  return mul_scalar(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

namespace {

// Row-wise reduction producing (m x 1); grad(row, xrow, y) fills dy/dx for one row.
template <typename Fwd, typename Grad>
Var reduce_rows(const char* op, Var x, Fwd fwd, Grad grad) {
  require_nonempty(op, x);
  require_rank2(op, x);
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out({m, 1});
  for (std::size_t r = 0; r < m; ++r) out[r] = fwd(xv.values().subspan(r * n, n));
  std::size_t xi = x.id();
  return x.tape().record(op, std::move(out), {xi}, [xi, m, n, grad](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& xv = t.value(xi);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_slot(xi);
    for (std::size_t r = 0; r < m; ++r)
      grad(xv.values().subspan(r * n, n), y[r], g[r], gx.values().subspan(r * n, n));
  });
}

double row_mean(std::span<const double> row) {
  double acc = 0.0;
  for (double v : row) acc += v;
  return acc / static_cast<double>(row.size());
}

}  // namespace

Var sum_rows(Var x) {
  return reduce_rows(
      "sum_rows", x,
      [](std::span<const double> row) {
        double acc = 0.0;
        for (double v : row) acc += v;
        return acc;
      },
      [](std::span<const double>, double, double g, std::span<double> gx) {
        for (double& v : gx) v += g;
      });
}

Var mean_rows(Var x) {
  return reduce_rows(
      "mean_rows", x, row_mean,
      [](std::span<const double> row, double, double g, std::span<double> gx) {
        const double share = g / static_cast<double>(row.size());
        for (double& v : gx) v += share;
      });
}

Var max_rows(Var x) {
  auto first_max = [](std::span<const double> row) {
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  };
  return reduce_rows(
      "max_rows", x, [first_max](std::span<const double> row) { return row[first_max(row)]; },
      [first_max](std::span<const double> row, double, double g, std::span<double> gx) {
        gx[first_max(row)] += g;
      });
}

Var std_rows(Var x) {
  return reduce_rows(
      "std_rows", x,
      [](std::span<const double> row) {
        const double mu = row_mean(row);
        double var = 0.0;
        for (double v : row) var += (v - mu) * (v - mu);
        return std::sqrt(var / static_cast<double>(row.size()) + kStdEpsilon);
      },
      [](std::span<const double> row, double s, double g, std::span<double> gx) {
        const double mu = row_mean(row);
        const double k = g / (static_cast<double>(row.size()) * s);
        for (std::size_t i = 0; i < row.size(); ++i) gx[i] += k * (row[i] - mu);
      });
}

// ---- verification ----------------------------------------------------------

GradCheckResult grad_check(const ScalarGraph& f, const ParamSet& params, double h) {
  auto evaluate = [&](const ParamSet& ps) {
    Tape tape;
    ParamBinder bind(tape, ps, false);
    double v = f(bind).value().item();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite objective");
    return v;
  };

  Tape tape;
  ParamBinder bind(tape, params, true);
  Var root = f(bind);
  Gradients analytic = tape.backward(root);

  GradCheckResult result;
  ParamSet probe = params;
  for (const auto& [name, value] : params) {
    auto it = analytic.find(name);
    Tensor& slot = probe.at(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double orig = value[i];
      slot[i] = orig + h;
      const double up = evaluate(probe);
      slot[i] = orig - h;
      const double down = evaluate(probe);
      slot[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = it == analytic.end() ? 0.0 : it->second[i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      if (err > result.max_rel_error) result = {err, name, i};
    }
  }
  return result;
}

}  // namespace coral8
