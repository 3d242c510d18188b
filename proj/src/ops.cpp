#include "emocause/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "emocause/error.hpp"

namespace emocause {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapConst = Eigen::Map<const Matrix>;
using Map = Eigen::Map<Matrix>;

using Node = detail::Node;
using NodePtr = std::shared_ptr<Node>;

MapConst view(const std::vector<double>& v, std::size_t r, std::size_t c) {
  return MapConst(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

Map view(std::vector<double>& v, std::size_t r, std::size_t c) {
  return Map(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a rank-2 tensor, got " + shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

// Builds the output node. The backward closure is attached only when some
// input requires a gradient, so inference builds no graph.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  if (NoGradGuard::grad_enabled()) {
    for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const Tensor& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

bool wants(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }
std::vector<double>& pgrad(Node& self, std::size_t i) { return self.parents[i]->grad; }
const std::vector<double>& pvalue(const Node& self, std::size_t i) { return self.parents[i]->value; }

void check_finite(std::span<const double> values, const char* op) {
  for (double v : values) {
    if (std::isnan(v)) throw NumericError(std::string(op) + ": NaN input");
  }
}

struct AxisLayout {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisLayout axis_layout(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_to_string(shape));
  }
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  l.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) + " · " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  view(out, m, n).noalias() = view(a.node()->value, m, k) * view(b.node()->value, k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    auto g = view(self.grad, m, n);
    if (wants(self, 0)) view(pgrad(self, 0), m, k).noalias() += g * view(pvalue(self, 1), k, n).transpose();
    if (wants(self, 1)) view(pgrad(self, 1), k, n).noalias() += view(pvalue(self, 0), m, k).transpose() * g;
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dimensions differ, " + shape_to_string(a.shape()) + " · " +
                         shape_to_string(b.shape()) + "ᵀ");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out(m * n);
  view(out, m, n).noalias() = view(a.node()->value, m, k) * view(b.node()->value, n, k).transpose();
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    auto g = view(self.grad, m, n);
    if (wants(self, 0)) view(pgrad(self, 0), m, k).noalias() += g * view(pvalue(self, 1), n, k);
    if (wants(self, 1)) view(pgrad(self, 1), n, k).noalias() += g.transpose() * view(pvalue(self, 0), m, k);
  });
}

Tensor transpose(const Tensor& x) {
  require_rank2(x, "transpose");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  view(out, c, r) = view(x.node()->value, r, c).transpose();
  return make_result({c, r}, std::move(out), {x}, [r, c](Node& self) {
    view(pgrad(self, 0), r, c) += view(self.grad, c, r).transpose();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(self, p)) continue;
      auto& g = pgrad(self, p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (wants(self, 0)) {
      auto& g = pgrad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = pgrad(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(self, p)) continue;
      auto& g = pgrad(self, p);
      const auto& other = pvalue(self, 1 - p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * other[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v *= factor;
  return make_result(x.shape(), std::move(out), {x}, [factor](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor add_scalar(const Tensor& x, double value) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v += value;
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  require_rank2(x, "add_row");
  const std::size_t r = x.rows(), c = x.cols();
  if (row.size() != c) {
    throw DimensionError("add_row: row " + shape_to_string(row.shape()) + " does not broadcast over " +
                         shape_to_string(x.shape()));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto& rv = row.node()->value;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += rv[j];
  }
  return make_result(x.shape(), std::move(out), {x, row}, [r, c](Node& self) {
    if (wants(self, 0)) {
      auto& g = pgrad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = pgrad(self, 1);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({1}, {total}, {x}, [](Node& self) {
    auto& g = pgrad(self, 0);
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean_rows(const Tensor& x) {
  require_rank2(x, "mean_rows");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(c, 0.0);
  const auto& xv = x.node()->value;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j] += xv[i * c + j];
  }
  for (double& v : out) v /= static_cast<double>(r);
  return make_result({1, c}, std::move(out), {x}, [r, c](Node& self) {
    auto& g = pgrad(self, 0);
    const double inv = 1.0 / static_cast<double>(r);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j] * inv;
    }
  });
}

Tensor max_rows(const Tensor& x) {
  require_rank2(x, "max_rows");
  const std::size_t r = x.rows(), c = x.cols();
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.begin(), xv.begin() + static_cast<std::ptrdiff_t>(c));
  std::vector<std::size_t> argmax(c, 0);
  for (std::size_t i = 1; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (xv[i * c + j] > out[j]) {
        out[j] = xv[i * c + j];
        argmax[j] = i;
      }
    }
  }
  return make_result({1, c}, std::move(out), {x}, [c, argmax = std::move(argmax)](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t j = 0; j < c; ++j) g[argmax[j] * c + j] += self.grad[j];
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  check_finite(x.data(), "softmax");
  const AxisLayout l = axis_layout(x.shape(), axis);
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.n * l.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < l.n; ++k) mx = std::max(mx, xv[base + k * l.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < l.n; ++k) {
        const double e = std::exp(xv[base + k * l.inner] - mx);
        out[base + k * l.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < l.n; ++k) out[base + k * l.inner] /= z;
    }
  }
  std::vector<double> probs = out;
  return make_result(x.shape(), std::move(out), {x}, [l, probs = std::move(probs)](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.n * l.inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < l.n; ++k) dot += self.grad[base + k * l.inner] * probs[base + k * l.inner];
        for (std::size_t k = 0; k < l.n; ++k) {
          const std::size_t idx = base + k * l.inner;
          g[idx] += probs[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  check_finite(x.data(), "log_softmax");
  const AxisLayout l = axis_layout(x.shape(), axis);
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.n * l.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < l.n; ++k) mx = std::max(mx, xv[base + k * l.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < l.n; ++k) z += std::exp(xv[base + k * l.inner] - mx);
      const double log_z = mx + std::log(z);
      for (std::size_t k = 0; k < l.n; ++k) out[base + k * l.inner] = xv[base + k * l.inner] - log_z;
    }
  }
  std::vector<double> logp = out;
  return make_result(x.shape(), std::move(out), {x}, [l, logp = std::move(logp)](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.n * l.inner + in;
        double total = 0.0;
        for (std::size_t k = 0; k < l.n; ++k) total += self.grad[base + k * l.inner];
        for (std::size_t k = 0; k < l.n; ++k) {
          const std::size_t idx = base + k * l.inner;
          g[idx] += self.grad[idx] - std::exp(logp[idx]) * total;
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank2(x, "layer_norm");
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t r = x.rows(), c = x.cols();
  if (gain.size() != c || bias.size() != c) {
    throw DimensionError("layer_norm: gain/bias " + shape_to_string(gain.shape()) + "/" +
                         shape_to_string(bias.shape()) + " do not match " + shape_to_string(x.shape()));
  }
  const auto& xv = x.node()->value;
  const auto& gv = gain.node()->value;
  const auto& bv = bias.node()->value;
  std::vector<double> xhat(r * c), inv_std(r), out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += xv[i * c + j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xv[i * c + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (xv[i * c + j] - mean) * inv_std[i];
      out[i * c + j] = xhat[i * c + j] * gv[j] + bv[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gain, bias},
                     [r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                       const auto& gv = pvalue(self, 1);
                       const double cn = static_cast<double>(c);
                       if (wants(self, 0)) {
                         auto& gx = pgrad(self, 0);
                         for (std::size_t i = 0; i < r; ++i) {
                           double sum_d = 0.0, sum_dx = 0.0;
                           for (std::size_t j = 0; j < c; ++j) {
                             const double d = self.grad[i * c + j] * gv[j];
                             sum_d += d;
                             sum_dx += d * xhat[i * c + j];
                           }
                           for (std::size_t j = 0; j < c; ++j) {
                             const double d = self.grad[i * c + j] * gv[j];
                             gx[i * c + j] += inv_std[i] / cn * (cn * d - sum_d - xhat[i * c + j] * sum_dx);
                           }
                         }
                       }
                       if (wants(self, 1)) {
                         auto& gg = pgrad(self, 1);
                         for (std::size_t i = 0; i < r; ++i) {
                           for (std::size_t j = 0; j < c; ++j) gg[j] += self.grad[i * c + j] * xhat[i * c + j];
                         }
                       }
                       if (wants(self, 2)) {
                         auto& gb = pgrad(self, 2);
                         for (std::size_t i = 0; i < r; ++i) {
                           for (std::size_t j = 0; j < c; ++j) gb[j] += self.grad[i * c + j];
                         }
                       }
                     });
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng.bernoulli(p) ? 0.0 : keep_scale;
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto& xv = x.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * std::numbers::sqrt2 / 2));
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    auto& g = pgrad(self, 0);
    const auto& xv = pvalue(self, 0);
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(xv[i] * std::numbers::sqrt2 / 2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * xv[i] * xv[i]);
      g[i] += self.grad[i] * (cdf + xv[i] * pdf);
    }
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    auto& g = pgrad(self, 0);
    const auto& xv = pvalue(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank2(x, "slice_rows");
  const std::size_t c = x.cols();
  if (count == 0 || start + count > x.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + shape_to_string(x.shape()));
  }
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(start * c),
                          xv.begin() + static_cast<std::ptrdiff_t>((start + count) * c));
  return make_result({count, c}, std::move(out), {x}, [start, c](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[start * c + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank2(x, "slice_cols");
  const std::size_t r = x.rows(), c = x.cols();
  if (count == 0 || start + count > c) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + shape_to_string(x.shape()));
  }
  const auto& xv = x.node()->value;
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(i * c + start), count,
                out.begin() + static_cast<std::ptrdiff_t>(i * count));
  }
  return make_result({r, count}, std::move(out), {x}, [r, c, start, count](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < count; ++j) g[i * c + start + j] += self.grad[i * count + j];
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_rank2(x, "gather_rows");
  const std::size_t c = x.cols();
  if (rows.empty()) throw DimensionError("gather_rows: empty index list");
  const auto& xv = x.node()->value;
  std::vector<double> out(rows.size() * c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(rows[i]) + " out of range for " +
                           shape_to_string(x.shape()));
    }
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(rows[i] * c), c,
                out.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result({rows.size(), c}, std::move(out), {x}, [c, idx = std::move(idx)](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < c; ++j) g[idx[i] * c + j] += self.grad[i * c + j];
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != c) {
      throw DimensionError("concat_rows: column mismatch " + shape_to_string(parts[0].shape()) + " vs " +
                           shape_to_string(p.shape()));
    }
    total += p.rows();
  }
  std::vector<double> out;
  out.reserve(total * c);
  std::vector<std::size_t> offsets;
  for (const Tensor& p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return make_result({total, c}, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                     [offsets = std::move(offsets)](Node& self) {
                       for (std::size_t p = 0; p < offsets.size(); ++p) {
                         if (!wants(self, p)) continue;
                         auto& g = pgrad(self, p);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offsets[p] + i];
                       }
                     });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths, offsets;
  for (const Tensor& p : parts) {
    if (p.rows() != r) {
      throw DimensionError("concat_cols: row mismatch " + shape_to_string(parts[0].shape()) + " vs " +
                           shape_to_string(p.shape()));
    }
    offsets.push_back(total);
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(r * total);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& pv = parts[p].node()->value;
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(i * widths[p]), widths[p],
                  out.begin() + static_cast<std::ptrdiff_t>(i * total + offsets[p]));
    }
  }
  return make_result({r, total}, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                     [r, total, widths = std::move(widths), offsets = std::move(offsets)](Node& self) {
                       for (std::size_t p = 0; p < widths.size(); ++p) {
                         if (!wants(self, p)) continue;
                         auto& g = pgrad(self, p);
                         for (std::size_t i = 0; i < r; ++i) {
                           for (std::size_t j = 0; j < widths[p]; ++j) {
                             g[i * widths[p] + j] += self.grad[i * total + offsets[p] + j];
                           }
                         }
                       }
                     });
}

Tensor repeat_rows(const Tensor& row, std::size_t n) {
  require_rank2(row, "repeat_rows");
  if (row.rows() != 1) throw DimensionError("repeat_rows expects [1×c], got " + shape_to_string(row.shape()));
  if (n == 0) throw DimensionError("repeat_rows: zero repetitions");
  const std::size_t c = row.cols();
  std::vector<double> out;
  out.reserve(n * c);
  for (std::size_t i = 0; i < n; ++i) out.insert(out.end(), row.data().begin(), row.data().end());
  return make_result({n, c}, std::move(out), {row}, [n, c](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
    }
  });
}

Tensor pick(const Tensor& x, std::span<const std::pair<std::size_t, std::size_t>> entries) {
  require_rank2(x, "pick");
  if (entries.empty()) throw DimensionError("pick: empty entry list");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<std::size_t> flat;
  flat.reserve(entries.size());
  for (const auto& [i, j] : entries) {
    if (i >= r || j >= c) {
      throw DimensionError("pick: entry (" + std::to_string(i) + ", " + std::to_string(j) + ") outside " +
                           shape_to_string(x.shape()));
    }
    flat.push_back(i * c + j);
  }
  std::vector<double> out(flat.size());
  for (std::size_t k = 0; k < flat.size(); ++k) out[k] = x.data()[flat[k]];
  const std::size_t m = flat.size();
  return make_result({m, 1}, std::move(out), {x}, [flat = std::move(flat)](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t k = 0; k < flat.size(); ++k) g[flat[k]] += self.grad[k];
  });
}

Tensor self_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::span<const RowRange> sequences,
                      std::size_t n_heads, std::vector<std::vector<double>>* probabilities) {
  require_same_shape(q, k, "self_attention");
  require_same_shape(q, v, "self_attention");
  require_rank2(q, "self_attention");
  const std::size_t total = q.rows(), d = q.cols();
  if (n_heads == 0 || d % n_heads != 0) {
    throw ConfigError("self_attention: width " + std::to_string(d) + " not divisible by " +
                      std::to_string(n_heads) + " heads");
  }
  for (const RowRange& s : sequences) {
    if (s.length == 0 || s.start + s.length > total) throw DimensionError("self_attention: bad sequence range");
  }
  const std::size_t dh = d / n_heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto& qv = q.node()->value;
  const auto& kv = k.node()->value;
  const auto& vv = v.node()->value;

  std::vector<double> out(total * d, 0.0);
  std::vector<std::vector<double>> probs;
  probs.reserve(sequences.size() * n_heads);
  for (const RowRange& s : sequences) {
    const std::size_t len = s.length;
    for (std::size_t h = 0; h < n_heads; ++h) {
      std::vector<double> p(len * len);
      for (std::size_t i = 0; i < len; ++i) {
        const double* qi = &qv[(s.start + i) * d + h * dh];
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < len; ++j) {
          const double* kj = &kv[(s.start + j) * d + h * dh];
          double dot = 0.0;
          for (std::size_t t = 0; t < dh; ++t) dot += qi[t] * kj[t];
          p[i * len + j] = dot * scale_factor;
          mx = std::max(mx, p[i * len + j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          p[i * len + j] = std::exp(p[i * len + j] - mx);
          z += p[i * len + j];
        }
        double* oi = &out[(s.start + i) * d + h * dh];
        for (std::size_t j = 0; j < len; ++j) {
          p[i * len + j] /= z;
          const double* vj = &vv[(s.start + j) * d + h * dh];
          for (std::size_t t = 0; t < dh; ++t) oi[t] += p[i * len + j] * vj[t];
        }
      }
      probs.push_back(std::move(p));
    }
  }
  if (probabilities) *probabilities = probs;

  std::vector<RowRange> seqs(sequences.begin(), sequences.end());
  return make_result(
      q.shape(), std::move(out), {q, k, v},
      [seqs = std::move(seqs), probs = std::move(probs), n_heads, d, dh, scale_factor](Node& self) {
        const auto& qv = pvalue(self, 0);
        const auto& kv = pvalue(self, 1);
        const auto& vv = pvalue(self, 2);
        std::vector<double> dummy;
        auto& gq = wants(self, 0) ? pgrad(self, 0) : dummy;
        auto& gk = wants(self, 1) ? pgrad(self, 1) : dummy;
        auto& gv = wants(self, 2) ? pgrad(self, 2) : dummy;
        const bool need_q = wants(self, 0), need_k = wants(self, 1), need_v = wants(self, 2);
        std::size_t block = 0;
        for (const RowRange& s : seqs) {
          const std::size_t len = s.length;
          for (std::size_t h = 0; h < n_heads; ++h, ++block) {
            const std::vector<double>& p = probs[block];
            std::vector<double> ds(len * len);
            for (std::size_t i = 0; i < len; ++i) {
              const double* go = &self.grad[(s.start + i) * d + h * dh];
              double row_dot = 0.0;
              for (std::size_t j = 0; j < len; ++j) {
                const double* vj = &vv[(s.start + j) * d + h * dh];
                double dp = 0.0;
                for (std::size_t t = 0; t < dh; ++t) dp += go[t] * vj[t];
                ds[i * len + j] = dp;
                row_dot += dp * p[i * len + j];
                if (need_v) {
                  double* gvj = &gv[(s.start + j) * d + h * dh];
                  for (std::size_t t = 0; t < dh; ++t) gvj[t] += p[i * len + j] * go[t];
                }
              }
              for (std::size_t j = 0; j < len; ++j) {
                ds[i * len + j] = p[i * len + j] * (ds[i * len + j] - row_dot) * scale_factor;
              }
            }
            for (std::size_t i = 0; i < len; ++i) {
              for (std::size_t j = 0; j < len; ++j) {
                const double w = ds[i * len + j];
                if (need_q) {
                  double* gqi = &gq[(s.start + i) * d + h * dh];
                  const double* kj = &kv[(s.start + j) * d + h * dh];
                  for (std::size_t t = 0; t < dh; ++t) gqi[t] += w * kj[t];
                }
                if (need_k) {
                  double* gkj = &gk[(s.start + j) * d + h * dh];
                  const double* qi = &qv[(s.start + i) * d + h * dh];
                  for (std::size_t t = 0; t < dh; ++t) gkj[t] += w * qi[t];
                }
              }
            }
          }
        }
      });
}

}  // namespace emocause
