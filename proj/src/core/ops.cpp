#include "keyformer/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace core {

namespace {

using Rule = std::function<void(Node&)>;

void require_finite(std::string_view op, const Tensor& t) {
  if (!t.all_finite()) {
    throw NumericError("non-finite value produced by " + std::string(op) + " (shape " +
                       to_string(t.shape()) + ")");
  }
}

Var make_result(std::string_view op, Tensor value, std::vector<NodePtr> parents, Rule rule) {
  require_finite(op, value);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  const bool needs_grad = std::any_of(parents.begin(), parents.end(),
                                      [](const NodePtr& p) { return p->requires_grad; });
  if (needs_grad) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_rule = std::move(rule);
  }
  return Var(std::move(node));
}

/// Gradient buffer of parent `i`, or nullptr when it needs no gradient.
Tensor* grad_of(Node& self, std::size_t i) {
  Node& parent = *self.parents[i];
  return parent.requires_grad ? &parent.grad_buffer() : nullptr;
}

void require_same_shape(std::string_view op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                         " vs " + to_string(b.shape()));
  }
}

void require_rank(std::string_view op, const Var& a, std::size_t rank) {
  if (a.shape().size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + to_string(a.shape()));
  }
}

// C[m×n] += A[m×k] · B[k×n]
void gemm_nn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    Real* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = a[i * k + p];
      if (av == Real(0)) continue;
      const Real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m×k] += A[m×n] · B[k×n]ᵀ
void gemm_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t n,
             std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const Real* arow = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real* brow = b + p * n;
      Real acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// C[k×n] += A[m×k]ᵀ · B[m×n]
void gemm_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const Real* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = a[i * k + p];
      if (av == Real(0)) continue;
      Real* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_result("add", std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (Tensor* g = grad_of(self, p)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_result("sub", std::move(out), {a.node(), b.node()}, [](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_result("mul", std::move(out), {a.node(), b.node()}, [](Node& self) {
    const Tensor& av = self.parents[0]->data();
    const Tensor& bv = self.parents[1]->data();
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (Tensor* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, Real factor) {
  Tensor out = a.value();
  for (Real& v : out.data()) v *= factor;
  return make_result("scale", std::move(out), {a.node()}, [factor](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += factor * self.grad[i];
    }
  });
}

Var add_scalar(const Var& a, Real offset) {
  Tensor out = a.value();
  for (Real& v : out.data()) v += offset;
  return make_result("add_scalar", std::move(out), {a.node()}, [](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Var add_row(const Var& a, const Var& bias) {
  require_rank("add_row", a, 2);
  const std::size_t m = a.shape()[0];
  const std::size_t n = a.shape()[1];
  if (bias.value().size() != n) {
    throw DimensionError("add_row: bias " + to_string(bias.shape()) + " does not match " +
                         to_string(a.shape()));
  }
  Tensor out = a.value();
  const Tensor& bv = bias.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  return make_result("add_row", std::move(out), {a.node(), bias.node()}, [m, n](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*g)[j] += self.grad[i * n + j];
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.shape()[0];
  const std::size_t k = a.shape()[1];
  const std::size_t n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + to_string(a.shape()) + " · " +
                         to_string(b.shape()));
  }
  Tensor out({m, n});
  gemm_nn(a.value().raw(), b.value().raw(), out.raw(), m, k, n);
  return make_result("matmul", std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    const Tensor& av = self.parents[0]->data();
    const Tensor& bv = self.parents[1]->data();
    if (Tensor* g = grad_of(self, 0)) gemm_nt(self.grad.raw(), bv.raw(), g->raw(), m, n, k);
    if (Tensor* g = grad_of(self, 1)) gemm_tn(av.raw(), self.grad.raw(), g->raw(), m, k, n);
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  return add_row(matmul(x, weight), bias);
}

Var transpose(const Var& a) {
  require_rank("transpose", a, 2);
  const std::size_t m = a.shape()[0];
  const std::size_t n = a.shape()[1];
  const Tensor& av = a.value();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_result("transpose", std::move(out), {a.node()}, [m, n](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += self.grad[j * m + i];
    }
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (Real& v : out.data()) v = v > Real(0) ? v : Real(0);
  return make_result("relu", std::move(out), {a.node()}, [](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        if (self.value[i] > Real(0)) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var softplus(const Var& a) {
  Tensor out = a.value();
  for (Real& v : out.data()) v = std::log1p(std::exp(-std::abs(v))) + std::max(v, Real(0));
  return make_result("softplus", std::move(out), {a.node()}, [](Node& self) {
    const Tensor& x = self.parents[0]->data();
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        const Real sigmoid = Real(1) / (Real(1) + std::exp(-x[i]));
        (*g)[i] += self.grad[i] * sigmoid;
      }
    }
  });
}

Var dropout(const Var& a, Real p, bool training, Rng* rng) {
  if (!(p >= Real(0) && p < Real(1))) {
    throw ContractError("dropout rate must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == Real(0)) return a;
  if (rng == nullptr) throw ContractError("dropout in training mode needs an Rng");
  const Real keep_scale = Real(1) / (Real(1) - p);
  Tensor mask(a.shape());
  for (Real& m : mask.data()) m = rng->bernoulli(static_cast<double>(p)) ? Real(0) : keep_scale;
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_result("dropout", std::move(out), {a.node()},
                     [mask = std::move(mask)](Node& self) {
                       if (Tensor* g = grad_of(self, 0)) {
                         for (std::size_t i = 0; i < g->size(); ++i)
                           (*g)[i] += self.grad[i] * mask[i];
                       }
                     });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  if (axis > 1) throw DimensionError("concat supports axis 0 or 1");
  for (const Var& p : parts) require_rank("concat", p, 2);
  const std::size_t other = parts[0].shape()[1 - axis];
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.shape()[1 - axis] != other) {
      throw DimensionError("concat: shape mismatch " + to_string(parts[0].shape()) + " vs " +
                           to_string(p.shape()));
    }
    total += p.shape()[axis];
  }
  const std::size_t rows = axis == 0 ? total : other;
  const std::size_t cols = axis == 0 ? other : total;
  Tensor out({rows, cols});
  std::vector<NodePtr> parents;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    const std::size_t pr = p.shape()[0];
    const std::size_t pc = p.shape()[1];
    for (std::size_t i = 0; i < pr; ++i)
      for (std::size_t j = 0; j < pc; ++j) {
        if (axis == 0) out[(offset + i) * cols + j] = v[i * pc + j];
        else out[i * cols + offset + j] = v[i * pc + j];
      }
    parents.push_back(p.node());
    offsets.push_back(offset);
    offset += p.shape()[axis];
  }
  return make_result("concat", std::move(out), std::move(parents),
                     [axis, cols, offsets = std::move(offsets)](Node& self) {
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         Tensor* g = grad_of(self, k);
                         if (g == nullptr) continue;
                         const std::size_t pr = g->shape()[0];
                         const std::size_t pc = g->shape()[1];
                         for (std::size_t i = 0; i < pr; ++i)
                           for (std::size_t j = 0; j < pc; ++j) {
                             const std::size_t src = axis == 0
                                                         ? (offsets[k] + i) * cols + j
                                                         : i * cols + offsets[k] + j;
                             (*g)[i * pc + j] += self.grad[src];
                           }
                       }
                     });
}

Var slice_cols(const Var& a, std::size_t start, std::size_t width) {
  require_rank("slice_cols", a, 2);
  const std::size_t m = a.shape()[0];
  const std::size_t n = a.shape()[1];
  if (start + width > n) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " +
                         std::to_string(start + width) + ") out of " + to_string(a.shape()));
  }
  const Tensor& av = a.value();
  Tensor out({m, width});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < width; ++j) out[i * width + j] = av[i * n + start + j];
  return make_result("slice_cols", std::move(out), {a.node()}, [m, n, start, width](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < width; ++j)
          (*g)[i * n + start + j] += self.grad[i * width + j];
    }
  });
}

Var max_pool1d(const Var& x) {
  require_rank("max_pool1d", x, 2);
  const std::size_t c = x.shape()[0];
  const std::size_t len = x.shape()[1];
  if (len == 0) throw DimensionError("max_pool1d over an empty axis");
  const Tensor& xv = x.value();
  Tensor out({c, 1});
  std::vector<std::size_t> argmax(c);
  for (std::size_t i = 0; i < c; ++i) {
    const Real* row = xv.raw() + i * len;
    argmax[i] = static_cast<std::size_t>(std::max_element(row, row + len) - row);
    out[i] = row[argmax[i]];
  }
  return make_result("max_pool1d", std::move(out), {x.node()},
                     [len, argmax = std::move(argmax)](Node& self) {
                       if (Tensor* g = grad_of(self, 0)) {
                         for (std::size_t i = 0; i < argmax.size(); ++i)
                           (*g)[i * len + argmax[i]] += self.grad[i];
                       }
                     });
}

Var sum(const Var& a) {
  Real total = 0;
  for (Real v : a.value().data()) total += v;
  return make_result("sum", Tensor::scalar(total), {a.node()}, [](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (Real& v : g->data()) v += self.grad[0];
    }
  });
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(a), Real(1) / static_cast<Real>(n));
}

Var softmax(const Var& x) {
  if (x.shape().empty()) throw DimensionError("softmax of a rank-0 tensor");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.value().size() / n;
  Tensor out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    Real* row = out.raw() + r * n;
    const Real peak = *std::max_element(row, row + n);
    Real total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - peak);
      total += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= total;
  }
  return make_result("softmax", std::move(out), {x.node()}, [rows, n](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (g == nullptr) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const Real* y = self.value.raw() + r * n;
      const Real* dy = self.grad.raw() + r * n;
      Real dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
      Real* dx = g->raw() + r * n;
      for (std::size_t j = 0; j < n; ++j) dx[j] += y[j] * (dy[j] - dot);
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, Real eps) {
  if (x.shape().empty()) throw DimensionError("layer_norm of a rank-0 tensor");
  const std::size_t d = x.shape().back();
  if (gain.value().size() != d || bias.value().size() != d) {
    throw DimensionError("layer_norm: gain/bias " + to_string(gain.shape()) + "/" +
                         to_string(bias.shape()) + " do not match " + to_string(x.shape()));
  }
  const std::size_t rows = x.value().size() / d;
  const Tensor& xv = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor normalized(x.shape());
  std::vector<Real> inv_std(rows);
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = xv.raw() + r * d;
    Real mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<Real>(d);
    Real var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<Real>(d);
    inv_std[r] = Real(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const Real xhat = (row[j] - mu) * inv_std[r];
      normalized[r * d + j] = xhat;
      out[r * d + j] = gv[j] * xhat + bv[j];
    }
  }
  return make_result(
      "layer_norm", std::move(out), {x.node(), gain.node(), bias.node()},
      [rows, d, normalized = std::move(normalized), inv_std = std::move(inv_std)](Node& self) {
        const Tensor& gv = self.parents[1]->data();
        Tensor* gx = grad_of(self, 0);
        Tensor* gg = grad_of(self, 1);
        Tensor* gb = grad_of(self, 2);
        for (std::size_t r = 0; r < rows; ++r) {
          const Real* dy = self.grad.raw() + r * d;
          const Real* xhat = normalized.raw() + r * d;
          if (gg != nullptr)
            for (std::size_t j = 0; j < d; ++j) (*gg)[j] += dy[j] * xhat[j];
          if (gb != nullptr)
            for (std::size_t j = 0; j < d; ++j) (*gb)[j] += dy[j];
          if (gx != nullptr) {
            Real mean_dxhat = 0;
            Real mean_dxhat_xhat = 0;
            for (std::size_t j = 0; j < d; ++j) {
              const Real dxhat = dy[j] * gv[j];
              mean_dxhat += dxhat;
              mean_dxhat_xhat += dxhat * xhat[j];
            }
            mean_dxhat /= static_cast<Real>(d);
            mean_dxhat_xhat /= static_cast<Real>(d);
            Real* dx = gx->raw() + r * d;
            for (std::size_t j = 0; j < d; ++j) {
              const Real dxhat = dy[j] * gv[j];
              dx[j] += inv_std[r] * (dxhat - mean_dxhat - xhat[j] * mean_dxhat_xhat);
            }
          }
        }
      });
}

Var conv1d(const Var& x, const Var& kernels, const Var& bias) {
  require_rank("conv1d", x, 2);
  require_rank("conv1d", kernels, 3);
  const std::size_t c_in = x.shape()[0];
  const std::size_t len = x.shape()[1];
  const std::size_t c_out = kernels.shape()[0];
  const std::size_t k = kernels.shape()[2];
  if (kernels.shape()[1] != c_in) {
    throw DimensionError("conv1d: kernels " + to_string(kernels.shape()) +
                         " do not match input channels of " + to_string(x.shape()));
  }
  if (k == 0) throw DimensionError("conv1d: kernel size must be >= 1");
  if (bias.value().size() != c_out) {
    throw DimensionError("conv1d: bias " + to_string(bias.shape()) + " does not match " +
                         std::to_string(c_out) + " output channels");
  }
  const auto pad_left = static_cast<std::ptrdiff_t>((k - 1) / 2);
  const auto signed_len = static_cast<std::ptrdiff_t>(len);

  // Valid output range [t_begin, t_end) for tap j, where the input index is
  // t + j - pad_left.
  auto tap_range = [=](std::size_t j) {
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad_left;
    const std::ptrdiff_t t_begin = std::max<std::ptrdiff_t>(0, -shift);
    const std::ptrdiff_t t_end = std::min<std::ptrdiff_t>(signed_len, signed_len - shift);
    return std::tuple{shift, t_begin, t_end};
  };

  const Tensor& xv = x.value();
  const Tensor& wv = kernels.value();
  const Tensor& bv = bias.value();
  Tensor out({c_out, len});
  for (std::size_t o = 0; o < c_out; ++o) {
    Real* orow = out.raw() + o * len;
    for (std::size_t t = 0; t < len; ++t) orow[t] = bv[o];
    for (std::size_t i = 0; i < c_in; ++i) {
      const Real* xrow = xv.raw() + i * len;
      const Real* w = wv.raw() + (o * c_in + i) * k;
      for (std::size_t j = 0; j < k; ++j) {
        const auto [shift, t_begin, t_end] = tap_range(j);
        const Real wj = w[j];
        for (std::ptrdiff_t t = t_begin; t < t_end; ++t) orow[t] += wj * xrow[t + shift];
      }
    }
  }
  return make_result(
      "conv1d", std::move(out), {x.node(), kernels.node(), bias.node()},
      [c_in, c_out, len, k, tap_range](Node& self) {
        const Tensor& xv = self.parents[0]->data();
        const Tensor& wv = self.parents[1]->data();
        Tensor* gx = grad_of(self, 0);
        Tensor* gw = grad_of(self, 1);
        Tensor* gb = grad_of(self, 2);
        for (std::size_t o = 0; o < c_out; ++o) {
          const Real* dy = self.grad.raw() + o * len;
          if (gb != nullptr) {
            Real acc = 0;
            for (std::size_t t = 0; t < len; ++t) acc += dy[t];
            (*gb)[o] += acc;
          }
          for (std::size_t i = 0; i < c_in; ++i) {
            const Real* xrow = xv.raw() + i * len;
            const Real* w = wv.raw() + (o * c_in + i) * k;
            Real* dx = gx != nullptr ? gx->raw() + i * len : nullptr;
            Real* dw = gw != nullptr ? gw->raw() + (o * c_in + i) * k : nullptr;
            for (std::size_t j = 0; j < k; ++j) {
              const auto [shift, t_begin, t_end] = tap_range(j);
              if (t_begin >= t_end) continue;
              if (dx != nullptr) {
                const Real wj = w[j];
                for (std::ptrdiff_t t = t_begin; t < t_end; ++t) dx[t + shift] += wj * dy[t];
              }
              if (dw != nullptr) {
                Real acc = 0;
                for (std::ptrdiff_t t = t_begin; t < t_end; ++t) acc += dy[t] * xrow[t + shift];
                dw[j] += acc;
              }
            }
          }
        }
      });
}

Var euclidean_distance(const Var& a, const Var& b) {
  if (a.value().size() != b.value().size()) {
    throw DimensionError("euclidean_distance: size mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Real total = 0;
  for (std::size_t i = 0; i < av.size(); ++i) total += (av[i] - bv[i]) * (av[i] - bv[i]);
  const Real dist = std::sqrt(total);
  return make_result("euclidean_distance", Tensor::scalar(dist), {a.node(), b.node()},
                     [dist](Node& self) {
                       if (dist == Real(0)) return;  // subgradient 0 at coincident points
                       const Tensor& av = self.parents[0]->data();
                       const Tensor& bv = self.parents[1]->data();
                       const Real coeff = self.grad[0] / dist;
                       if (Tensor* g = grad_of(self, 0)) {
                         for (std::size_t i = 0; i < g->size(); ++i)
                           (*g)[i] += coeff * (av[i] - bv[i]);
                       }
                       if (Tensor* g = grad_of(self, 1)) {
                         for (std::size_t i = 0; i < g->size(); ++i)
                           (*g)[i] -= coeff * (av[i] - bv[i]);
                       }
                     });
}

Var gaussian_log_density(const Var& means, const Var& stds, std::size_t length) {
  const std::size_t ranges = means.value().size();
  if (stds.value().size() != ranges) {
    throw DimensionError("gaussian_log_density: means " + to_string(means.shape()) +
                         " vs stds " + to_string(stds.shape()));
  }
  if (length == 0) throw ContractError("gaussian_log_density: length must be >= 1");
  const Tensor& mu = means.value();
  const Tensor& sigma = stds.value();
  for (Real s : sigma.data()) {
    if (!(s > Real(0))) throw NumericError("gaussian_log_density: non-positive std");
  }
  Tensor out({length, ranges});
  for (std::size_t l = 0; l < length; ++l)
    for (std::size_t g = 0; g < ranges; ++g) {
      const Real diff = static_cast<Real>(l) - mu[g];
      out[l * ranges + g] = -diff * diff / (Real(2) * sigma[g] * sigma[g]) - std::log(sigma[g]);
    }
  return make_result("gaussian_log_density", std::move(out), {means.node(), stds.node()},
                     [length, ranges](Node& self) {
                       const Tensor& mu = self.parents[0]->data();
                       const Tensor& sigma = self.parents[1]->data();
                       Tensor* gm = grad_of(self, 0);
                       Tensor* gs = grad_of(self, 1);
                       for (std::size_t l = 0; l < length; ++l)
                         for (std::size_t g = 0; g < ranges; ++g) {
                           const Real dy = self.grad[l * ranges + g];
                           const Real diff = static_cast<Real>(l) - mu[g];
                           const Real s2 = sigma[g] * sigma[g];
                           if (gm != nullptr) (*gm)[g] += dy * diff / s2;
                           if (gs != nullptr)
                             (*gs)[g] += dy * (diff * diff / (s2 * sigma[g]) - Real(1) / sigma[g]);
                         }
                     });
}

}  // namespace core
KEYFORMER_END_NAMESPACE
