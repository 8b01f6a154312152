#include "hrtfnp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "binary_io.hpp"
#include "hrtfnp/errors.hpp"

namespace hrtfnp::ag {

namespace {

thread_local bool g_record = true;

using NodePtr = std::shared_ptr<Node>;
using MapC = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MapM = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

const Node& need(const Tensor& t, const char* op) {
  if (!t.defined()) throw ArgumentError(std::string(op) + ": undefined tensor");
  return *t.node();
}

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

// Size of the broadcast period of b inside a: 0 when incompatible.
std::size_t broadcast_period(const Shape& a, const Shape& b) {
  const std::size_t nb = numel(b);
  if (nb == 1) return 1;
  if (b.size() > a.size()) return 0;
  if (!std::equal(b.begin(), b.end(), a.end() - static_cast<std::ptrdiff_t>(b.size()))) return 0;
  return nb;
}

template <class Fwd, class Da, class Db>
Tensor binary(const Tensor& ta, const Tensor& tb, const char* name, Fwd fwd, Da da, Db db) {
  const Node& a = need(ta, name);
  const Node& b = need(tb, name);
  const std::size_t period = broadcast_period(a.shape, b.shape);
  if (period == 0)
    throw ShapeError(std::string(name) + ": cannot broadcast " + shape_str(b.shape) + " onto " + shape_str(a.shape));
  const std::size_t n = a.value.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a.value[i], b.value[i % period]);
  return make_op({ta, tb}, a.shape, std::move(out), [period, da, db](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const std::size_t n = self.value.size();
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * da(pa.value[i], pb.value[i % period], self.value[i]);
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        g[i % period] += self.grad[i] * db(pa.value[i], pb.value[i % period], self.value[i]);
    }
  });
}

template <class Fwd, class D>
Tensor unary(const Tensor& ta, const char* name, Fwd fwd, D d) {
  const Node& a = need(ta, name);
  std::vector<double> out(a.value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.value[i]);
  return make_op({ta}, a.shape, std::move(out), [d](Node& self) {
    Node& pa = *self.parents[0];
    auto& g = pa.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * d(pa.value[i], self.value[i]);
  });
}

}  // namespace

std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ')';
  return os.str();
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) { return full(shape, 0.0, requires_grad); }

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  return from(shape, std::vector<double>(ag::numel(shape), value), requires_grad);
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != ag::numel(shape))
    throw ShapeError("tensor of shape " + shape_str(shape) + " given " + std::to_string(values.size()) + " values");
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

const Shape& Tensor::shape() const { return need(*this, "shape").shape; }
std::size_t Tensor::numel() const { return need(*this, "numel").value.size(); }
const std::vector<double>& Tensor::values() const { return need(*this, "values").value; }
std::vector<double>& Tensor::mutable_values() {
  need(*this, "mutable_values");
  return node_->value;
}
double Tensor::item() const {
  const Node& n = need(*this, "item");
  if (n.value.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(n.shape));
  return n.value[0];
}
bool Tensor::requires_grad() const { return need(*this, "requires_grad").requires_grad; }
bool Tensor::is_leaf() const { return need(*this, "is_leaf").leaf; }
const std::vector<double>& Tensor::grad() const {
  need(*this, "grad");
  return node_->ensure_grad();
}
void Tensor::zero_grad() {
  need(*this, "zero_grad");
  node_->grad.assign(node_->value.size(), 0.0);
}

NoGradGuard::NoGradGuard() : previous_(g_record) { g_record = false; }
NoGradGuard::~NoGradGuard() { g_record = previous_; }
bool grad_enabled() { return g_record; }

Tensor make_op(const std::vector<Tensor>& inputs, Shape shape, std::vector<double> value,
               std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->leaf = false;
  bool any = false;
  for (const auto& t : inputs) any = any || (t.defined() && t.node()->requires_grad);
  if (g_record && any) {
    n->requires_grad = true;
    for (const auto& t : inputs) n->parents.push_back(t.node());
    n->backward = std::move(bw);
  }
  return Tensor(n);
}

void backward(const Tensor& loss) {
  const Node& root = need(loss, "backward");
  if (root.value.size() != 1) throw ArgumentError("backward needs a scalar loss, got shape " + shape_str(root.shape));
  if (!root.requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !p->leaf && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->grad.assign(n->value.size(), 0.0);
  loss.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

Tensor detach(const Tensor& a) { return Tensor::from(need(a, "detach").shape, a.values(), false); }

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double z) { return -z / y; });
}

Tensor safe_div(const Tensor& a, const Tensor& b) {
  if (need(a, "safe_div").shape != need(b, "safe_div").shape)
    throw ShapeError("safe_div: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  return binary(
      a, b, "safe_div", [](double x, double y) { return y == 0.0 ? 0.0 : x / y; },
      [](double, double y, double) { return y == 0.0 ? 0.0 : 1.0 / y; },
      [](double, double y, double z) { return y == 0.0 ? 0.0 : -z / y; });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, "softplus", [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
}

Tensor square(const Tensor& a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sum(const Tensor& a) {
  const Node& n = need(a, "sum");
  double s = 0.0;
  for (double v : n.value) s += v;
  return make_op({a}, {}, {s}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  const std::size_t n = need(a, "mean").value.size();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Tensor sum_axis(const Tensor& a, std::size_t axis) {
  const Node& n = need(a, "sum_axis");
  if (axis >= n.shape.size()) throw ShapeError("sum_axis: axis out of range for " + shape_str(n.shape));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= n.shape[i];
  for (std::size_t i = axis + 1; i < n.shape.size(); ++i) inner *= n.shape[i];
  const std::size_t len = n.shape[axis];
  Shape out_shape = n.shape;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < len; ++k)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += n.value[(o * len + k) * inner + i];
  return make_op({a}, out_shape, std::move(out), [outer, inner, len](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t k = 0; k < len; ++k)
        for (std::size_t i = 0; i < inner; ++i) g[(o * len + k) * inner + i] += self.grad[o * inner + i];
  });
}

Tensor matmul(const Tensor& ta, const Tensor& tb) {
  const Node& a = need(ta, "matmul");
  const Node& b = need(tb, "matmul");
  if (a.shape.empty() || b.shape.size() != 2 || a.shape.back() != b.shape[0])
    throw ShapeError("matmul: " + shape_str(a.shape) + " x " + shape_str(b.shape));
  const std::size_t k = b.shape[0], ncol = b.shape[1], rows = a.value.size() / std::max<std::size_t>(k, 1);
  Shape out_shape = a.shape;
  out_shape.back() = ncol;
  std::vector<double> out(rows * ncol, 0.0);
  if (k > 0) MapM(out.data(), rows, ncol).noalias() = MapC(a.value.data(), rows, k) * MapC(b.value.data(), k, ncol);
  return make_op({ta, tb}, out_shape, std::move(out), [rows, k, ncol](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    MapC g(self.grad.data(), rows, ncol);
    if (pa.requires_grad)
      MapM(pa.ensure_grad().data(), rows, k).noalias() += g * MapC(pb.value.data(), k, ncol).transpose();
    if (pb.requires_grad)
      MapM(pb.ensure_grad().data(), k, ncol).noalias() += MapC(pa.value.data(), rows, k).transpose() * g;
  });
}

Tensor linear_map(std::shared_ptr<const Eigen::MatrixXd> m, const Tensor& ta) {
  const Node& a = need(ta, "linear_map");
  if (!m || a.shape.empty() || static_cast<std::size_t>(m->cols()) != a.shape[0])
    throw ShapeError("linear_map: matrix does not match axis 0 of " + shape_str(a.shape));
  const std::size_t s = a.shape[0], r = static_cast<std::size_t>(m->rows());
  const std::size_t inner = s == 0 ? 0 : a.value.size() / s;
  Shape out_shape = a.shape;
  out_shape[0] = r;
  std::vector<double> out(r * inner, 0.0);
  if (s > 0 && inner > 0) MapM(out.data(), r, inner).noalias() = (*m) * MapC(a.value.data(), s, inner);
  return make_op({ta}, out_shape, std::move(out), [m, s, r, inner](Node& self) {
    if (s == 0 || inner == 0) return;
    MapM(self.parents[0]->ensure_grad().data(), s, inner).noalias() +=
        m->transpose() * MapC(self.grad.data(), r, inner);
  });
}

Tensor reshape(const Tensor& ta, const Shape& shape) {
  const Node& a = need(ta, "reshape");
  if (numel(shape) != a.value.size())
    throw ShapeError("reshape: " + shape_str(a.shape) + " to " + shape_str(shape));
  return make_op({ta}, shape, a.value, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& ta, const std::vector<std::size_t>& perm) {
  const Node& a = need(ta, "permute");
  const std::size_t r = a.shape.size();
  std::vector<std::size_t> check = perm;
  std::sort(check.begin(), check.end());
  if (perm.size() != r || std::adjacent_find(check.begin(), check.end()) != check.end() ||
      (r > 0 && check.back() != r - 1))
    throw ShapeError("permute: invalid permutation for " + shape_str(a.shape));
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = a.shape[perm[i]];
  const auto in_st = strides_of(a.shape);
  // src[j] = input flat index of output element j.
  auto src = std::make_shared<std::vector<std::size_t>>(a.value.size());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t j = 0; j < src->size(); ++j) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < r; ++i) off += idx[i] * in_st[perm[i]];
    (*src)[j] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<double> out(src->size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = a.value[(*src)[j]];
  return make_op({ta}, out_shape, std::move(out), [src](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t j = 0; j < src->size(); ++j) g[(*src)[j]] += self.grad[j];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ArgumentError("concat of no tensors");
  const Shape& s0 = need(parts[0], "concat").shape;
  if (axis >= s0.size()) throw ShapeError("concat: axis out of range for " + shape_str(s0));
  std::size_t outer = 1, inner = 1, total = 0;
  for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
  for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    const Shape& s = need(p, "concat").shape;
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == s0[i];
    if (!ok) throw ShapeError("concat: " + shape_str(s) + " does not match " + shape_str(s0));
    lens.push_back(s[axis]);
    total += s[axis];
  }
  Shape out_shape = s0;
  out_shape[axis] = total;
  std::vector<double> out(outer * total * inner);
  std::size_t start = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& v = parts[p].values();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * lens[p] * inner), lens[p] * inner,
                  out.begin() + static_cast<std::ptrdiff_t>((o * total + start) * inner));
    start += lens[p];
  }
  return make_op(parts, out_shape, std::move(out), [outer, inner, total, lens](Node& self) {
    std::size_t start = 0;
    for (std::size_t p = 0; p < lens.size(); ++p) {
      Node& pn = *self.parents[p];
      if (pn.requires_grad) {
        auto& g = pn.ensure_grad();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < lens[p] * inner; ++i)
            g[o * lens[p] * inner + i] += self.grad[(o * total + start) * inner + i];
      }
      start += lens[p];
    }
  });
}

Tensor slice(const Tensor& ta, std::size_t axis, std::size_t start, std::size_t length) {
  const Node& a = need(ta, "slice");
  if (axis >= a.shape.size() || start + length > a.shape[axis])
    throw ShapeError("slice [" + std::to_string(start) + ", +" + std::to_string(length) + ") on axis " +
                     std::to_string(axis) + " of " + shape_str(a.shape));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a.shape[i];
  for (std::size_t i = axis + 1; i < a.shape.size(); ++i) inner *= a.shape[i];
  const std::size_t len = a.shape[axis];
  Shape out_shape = a.shape;
  out_shape[axis] = length;
  std::vector<double> out(outer * length * inner);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(a.value.begin() + static_cast<std::ptrdiff_t>((o * len + start) * inner), length * inner,
                out.begin() + static_cast<std::ptrdiff_t>(o * length * inner));
  return make_op({ta}, out_shape, std::move(out), [outer, inner, len, start, length](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < length * inner; ++i)
        g[(o * len + start) * inner + i] += self.grad[o * length * inner + i];
  });
}

Tensor conv1d(const Tensor& tx, const Tensor& tw, std::shared_ptr<const std::vector<std::size_t>> which) {
  const Node& x = need(tx, "conv1d");
  const Node& w = need(tw, "conv1d");
  if (x.shape.size() != 3 || w.shape.size() != 4 || w.shape[2] != x.shape[2] || w.shape[1] % 2 == 0)
    throw ShapeError("conv1d: input " + shape_str(x.shape) + ", weights " + shape_str(w.shape));
  const std::size_t nb = x.shape[0], nf = x.shape[1], ci = x.shape[2];
  const std::size_t nd = w.shape[0], nk = w.shape[1], co = w.shape[3];
  if (!which || which->size() != nb) throw ShapeError("conv1d: weight index map does not cover the batch");
  for (std::size_t d : *which)
    if (d >= nd) throw ShapeError("conv1d: weight index out of range");
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(nk / 2);
  std::vector<double> out(nb * nf * co, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    const double* wb = w.value.data() + (*which)[b] * nk * ci * co;
    for (std::size_t f = 0; f < nf; ++f) {
      MapM o(out.data() + (b * nf + f) * co, 1, co);
      for (std::size_t k = 0; k < nk; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(f + k) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(nf)) continue;
        o.noalias() += MapC(x.value.data() + (b * nf + static_cast<std::size_t>(src)) * ci, 1, ci) *
                       MapC(wb + k * ci * co, ci, co);
      }
    }
  }
  return make_op({tx, tw}, Shape{nb, nf, co}, std::move(out),
                 [which, nb, nf, ci, nk, co, half](Node& self) {
                   Node& px = *self.parents[0];
                   Node& pw = *self.parents[1];
                   double* gx = px.requires_grad ? px.ensure_grad().data() : nullptr;
                   double* gw = pw.requires_grad ? pw.ensure_grad().data() : nullptr;
                   for (std::size_t b = 0; b < nb; ++b) {
                     const std::size_t wo = (*which)[b] * nk * ci * co;
                     for (std::size_t f = 0; f < nf; ++f) {
                       MapC g(self.grad.data() + (b * nf + f) * co, 1, co);
                       for (std::size_t k = 0; k < nk; ++k) {
                         const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(f + k) - half;
                         if (src < 0 || src >= static_cast<std::ptrdiff_t>(nf)) continue;
                         const std::size_t xo = (b * nf + static_cast<std::size_t>(src)) * ci;
                         if (gx)
                           MapM(gx + xo, 1, ci).noalias() += g * MapC(pw.value.data() + wo + k * ci * co, ci, co).transpose();
                         if (gw)
                           MapM(gw + wo + k * ci * co, ci, co).noalias() += MapC(px.value.data() + xo, 1, ci).transpose() * g;
                       }
                     }
                   }
                 });
}

std::vector<std::uint8_t> encode_archive(const NamedTensors& tensors, bool precise) {
  detail::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.values()) {
      if (precise)
        w.f64(v);
      else
        w.f32(static_cast<float>(v));
    }
  }
  return w.data();
}

NamedTensors decode_archive(std::span<const std::uint8_t> bytes, bool precise) {
  detail::ByteReader r(bytes.data(), bytes.size());
  const std::uint32_t count = r.u32("tensor count");
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str("tensor name");
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank > 8) throw FormatError("tensor rank " + std::to_string(rank) + " too large", r.offset() - 4);
    Shape shape(rank);
    for (auto& d : shape) d = r.u32("tensor dims");
    const std::size_t n = numel(shape);
    r.need(n * (precise ? 8 : 4), "tensor data");
    std::vector<double> v(n);
    for (auto& x : v) x = precise ? r.f64("tensor data") : static_cast<double>(r.f32("tensor data"));
    out.emplace_back(std::move(name), Tensor::from(shape, std::move(v)));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after archive", r.offset());
  return out;
}

void save_archive(const std::string& path, const NamedTensors& tensors, bool precise) {
  detail::write_file(path, encode_archive(tensors, precise));
}

NamedTensors load_archive(const std::string& path, bool precise) {
  const auto bytes = detail::read_file(path);
  return decode_archive(bytes, precise);
}

}  // namespace hrtfnp::ag
