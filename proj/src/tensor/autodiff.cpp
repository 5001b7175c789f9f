#include "musg/autodiff.hpp"

#include <cmath>
#include <limits>
#include <unordered_set>

namespace musg::ad {
namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                                b.shape_string());
}

template <typename T>
T stable_log1p_exp_neg_abs(T x) {
  return std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

template <typename T>
Var<T> Var<T>::make(Tensor<T> value, std::vector<Var> parents, BackwardFn backward) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p.requires_grad();
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node_);
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

template <typename T>
void Var<T>::backward() const {
  if (value().rows() != 1 || value().cols() != 1)
    throw std::invalid_argument("backward() requires a 1x1 value, got " + value().shape_string());
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward) n->backward(*n);
  }
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight) {
  const auto& X = x.value();
  const auto& W = weight.value();
  if (X.cols() != W.cols())
    throw std::invalid_argument("linear: input " + X.shape_string() + " incompatible with weight " +
                                W.shape_string());
  const std::size_t n = X.rows(), in = X.cols(), out = W.rows();
  Tensor<T> Y(n, out);
  for (std::size_t i = 0; i < n; ++i) {
    const T* xr = &X(i, 0);
    for (std::size_t o = 0; o < out; ++o) {
      const T* wr = &W(o, 0);
      T acc = 0;
      for (std::size_t k = 0; k < in; ++k) acc += xr[k] * wr[k];
      Y(i, o) = acc;
    }
  }
  return Var<T>::make(std::move(Y), {x, weight}, [n, in, out](Node<T>& self) {
    const auto& G = self.grad;
    const auto& X = self.parents[0]->value;
    const auto& W = self.parents[1]->value;
    if (auto* dX = self.parent_grad(0)) {
      for (std::size_t i = 0; i < n; ++i) {
        T* dxr = &(*dX)(i, 0);
        for (std::size_t o = 0; o < out; ++o) {
          const T g = G(i, o);
          if (g == T(0)) continue;
          const T* wr = &W(o, 0);
          for (std::size_t k = 0; k < in; ++k) dxr[k] += g * wr[k];
        }
      }
    }
    if (auto* dW = self.parent_grad(1)) {
      for (std::size_t i = 0; i < n; ++i) {
        const T* xr = &X(i, 0);
        for (std::size_t o = 0; o < out; ++o) {
          const T g = G(i, o);
          if (g == T(0)) continue;
          T* dwr = &(*dW)(o, 0);
          for (std::size_t k = 0; k < in; ++k) dwr[k] += g * xr[k];
        }
      }
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const auto& B = bias.value();
  if (B.rows() != 1 || B.cols() != weight.value().rows())
    throw std::invalid_argument("linear: bias " + B.shape_string() + " incompatible with weight " +
                                weight.value().shape_string());
  Var<T> y = linear(x, weight);
  Tensor<T> Y = y.value();
  for (std::size_t i = 0; i < Y.rows(); ++i)
    for (std::size_t o = 0; o < Y.cols(); ++o) Y(i, o) += B[o];
  return Var<T>::make(std::move(Y), {y, bias}, [](Node<T>& self) {
    const auto& G = self.grad;
    if (auto* dY = self.parent_grad(0))
      for (std::size_t i = 0; i < G.size(); ++i) (*dY)[i] += G[i];
    if (auto* dB = self.parent_grad(1))
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t o = 0; o < G.cols(); ++o) (*dB)[o] += G(i, o);
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor<T> Y = a.value();
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] += b.value()[i];
  return Var<T>::make(std::move(Y), {a, b}, [](Node<T>& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (auto* d = self.parent_grad(p))
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*d)[i] += self.grad[i];
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor<T> Y = a.value();
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] -= b.value()[i];
  return Var<T>::make(std::move(Y), {a, b}, [](Node<T>& self) {
    if (auto* d = self.parent_grad(0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*d)[i] += self.grad[i];
    if (auto* d = self.parent_grad(1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*d)[i] -= self.grad[i];
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor<T> Y = a.value();
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] *= b.value()[i];
  return Var<T>::make(std::move(Y), {a, b}, [](Node<T>& self) {
    const auto& A = self.parents[0]->value;
    const auto& B = self.parents[1]->value;
    if (auto* d = self.parent_grad(0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*d)[i] += self.grad[i] * B[i];
    if (auto* d = self.parent_grad(1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*d)[i] += self.grad[i] * A[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, std::type_identity_t<T> factor) {
  Tensor<T> Y = a.value();
  for (auto& v : Y.data()) v *= factor;
  return Var<T>::make(std::move(Y), {a}, [factor](Node<T>& self) {
    if (auto* d = self.parent_grad(0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*d)[i] += self.grad[i] * factor;
  });
}

template <typename T>
Var<T> abs(const Var<T>& x) {
  Tensor<T> Y = x.value();
  for (auto& v : Y.data()) v = std::abs(v);
  return Var<T>::make(std::move(Y), {x}, [](Node<T>& self) {
    const auto& X = self.parents[0]->value;
    if (auto* d = self.parent_grad(0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const T s = X[i] > T(0) ? T(1) : (X[i] < T(0) ? T(-1) : T(0));
        (*d)[i] += self.grad[i] * s;
      }
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> Y = x.value();
  for (auto& v : Y.data()) v = v > T(0) ? v : T(0);
  return Var<T>::make(std::move(Y), {x}, [](Node<T>& self) {
    const auto& X = self.parents[0]->value;
    if (auto* d = self.parent_grad(0))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (X[i] > T(0)) (*d)[i] += self.grad[i];
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> Y = x.value();
  for (auto& v : Y.data()) {
    if (v >= T(0)) {
      v = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      v = e / (T(1) + e);
    }
  }
  return Var<T>::make(std::move(Y), {x}, [](Node<T>& self) {
    const auto& S = self.value;
    if (auto* d = self.parent_grad(0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*d)[i] += self.grad[i] * S[i] * (T(1) - S[i]);
  });
}

template <typename T>
Var<T> softmax(const Var<T>& x, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("softmax: axis must be 0 or 1");
  const auto& X = x.value();
  // Iterate over "lanes": rows for axis 1, columns for axis 0.
  const std::size_t lanes = axis == 1 ? X.rows() : X.cols();
  const std::size_t len = axis == 1 ? X.cols() : X.rows();
  const std::size_t lane_step = axis == 1 ? X.cols() : 1;
  const std::size_t elem_step = axis == 1 ? 1 : X.cols();
  Tensor<T> Y(X.rows(), X.cols());
  for (std::size_t l = 0; l < lanes; ++l) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, X[l * lane_step + k * elem_step]);
    T total = 0;
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t i = l * lane_step + k * elem_step;
      Y[i] = std::exp(X[i] - mx);
      total += Y[i];
    }
    for (std::size_t k = 0; k < len; ++k) Y[l * lane_step + k * elem_step] /= total;
  }
  return Var<T>::make(std::move(Y), {x}, [=](Node<T>& self) {
    auto* d = self.parent_grad(0);
    if (!d) return;
    const auto& S = self.value;
    for (std::size_t l = 0; l < lanes; ++l) {
      T dot = 0;
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = l * lane_step + k * elem_step;
        dot += self.grad[i] * S[i];
      }
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = l * lane_step + k * elem_step;
        (*d)[i] += S[i] * (self.grad[i] - dot);
      }
    }
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, std::type_identity_t<T> eps) {
  const auto& X = x.value();
  const std::size_t n = X.rows(), dim = X.cols();
  if (gain.value().rows() != 1 || gain.value().cols() != dim || !gain.value().same_shape(bias.value()))
    throw std::invalid_argument("layer_norm: gain/bias " + gain.value().shape_string() + " incompatible with " +
                                X.shape_string());
  Tensor<T> xhat(n, dim);
  std::vector<T> inv_std(n);
  Tensor<T> Y(n, dim);
  const auto& g = gain.value();
  const auto& b = bias.value();
  for (std::size_t i = 0; i < n; ++i) {
    T mean = 0;
    for (std::size_t k = 0; k < dim; ++k) mean += X(i, k);
    mean /= static_cast<T>(dim);
    T var = 0;
    for (std::size_t k = 0; k < dim; ++k) var += (X(i, k) - mean) * (X(i, k) - mean);
    var /= static_cast<T>(dim);
    inv_std[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t k = 0; k < dim; ++k) {
      xhat(i, k) = (X(i, k) - mean) * inv_std[i];
      Y(i, k) = xhat(i, k) * g[k] + b[k];
    }
  }
  return Var<T>::make(std::move(Y), {x, gain, bias},
                      [n, dim, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
    const auto& G = self.grad;
    const auto& g = self.parents[1]->value;
    if (auto* dX = self.parent_grad(0)) {
      std::vector<T> dxhat(dim);
      for (std::size_t i = 0; i < n; ++i) {
        T sum_d = 0, sum_dx = 0;
        for (std::size_t k = 0; k < dim; ++k) {
          dxhat[k] = G(i, k) * g[k];
          sum_d += dxhat[k];
          sum_dx += dxhat[k] * xhat(i, k);
        }
        const T scale = inv_std[i] / static_cast<T>(dim);
        for (std::size_t k = 0; k < dim; ++k)
          (*dX)(i, k) += scale * (static_cast<T>(dim) * dxhat[k] - sum_d - xhat(i, k) * sum_dx);
      }
    }
    if (auto* dg = self.parent_grad(1))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < dim; ++k) (*dg)[k] += G(i, k) * xhat(i, k);
    if (auto* db = self.parent_grad(2))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < dim; ++k) (*db)[k] += G(i, k);
  });
}

template <typename T>
Var<T> gather_rows(const Var<T>& x, std::span<const int> indices) {
  const auto& X = x.value();
  const std::size_t dim = X.cols();
  Tensor<T> Y(indices.size(), dim);
  for (std::size_t e = 0; e < indices.size(); ++e) {
    const int r = indices[e];
    if (r < 0 || static_cast<std::size_t>(r) >= X.rows())
      throw std::out_of_range("index " + std::to_string(r) + " out of range for " + std::to_string(X.rows()) +
                              " rows");
    std::copy_n(&X(r, 0), dim, &Y(e, 0));
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return Var<T>::make(std::move(Y), {x}, [idx = std::move(idx), dim](Node<T>& self) {
    if (auto* d = self.parent_grad(0))
      for (std::size_t e = 0; e < idx.size(); ++e)
        for (std::size_t k = 0; k < dim; ++k) (*d)(idx[e], k) += self.grad(e, k);
  });
}

template <typename T>
Var<T> embedding(const Var<T>& table, std::span<const int> indices) {
  for (int i : indices)
    if (i < 0 || static_cast<std::size_t>(i) >= table.value().rows())
      throw std::out_of_range("embedding: index " + std::to_string(i) + " outside vocabulary of " +
                              std::to_string(table.value().rows()));
  return gather_rows(table, indices);
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat: empty input list");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  std::vector<std::size_t> offsets;
  std::size_t rows = xs[0].rows(), cols = xs[0].cols();
  std::size_t total = 0;
  for (const auto& x : xs) {
    if (axis == 1 && x.rows() != rows)
      throw std::invalid_argument("concat: row mismatch " + xs[0].value().shape_string() + " vs " +
                                  x.value().shape_string());
    if (axis == 0 && x.cols() != cols)
      throw std::invalid_argument("concat: column mismatch " + xs[0].value().shape_string() + " vs " +
                                  x.value().shape_string());
    offsets.push_back(total);
    total += axis == 1 ? x.cols() : x.rows();
  }
  Tensor<T> Y = axis == 1 ? Tensor<T>(rows, total) : Tensor<T>(total, cols);
  for (std::size_t p = 0; p < xs.size(); ++p) {
    const auto& X = xs[p].value();
    for (std::size_t i = 0; i < X.rows(); ++i)
      for (std::size_t k = 0; k < X.cols(); ++k) {
        if (axis == 1)
          Y(i, offsets[p] + k) = X(i, k);
        else
          Y(offsets[p] + i, k) = X(i, k);
      }
  }
  return Var<T>::make(std::move(Y), xs, [offsets, axis](Node<T>& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      auto* d = self.parent_grad(p);
      if (!d) continue;
      for (std::size_t i = 0; i < d->rows(); ++i)
        for (std::size_t k = 0; k < d->cols(); ++k)
          (*d)(i, k) += axis == 1 ? self.grad(i, offsets[p] + k) : self.grad(offsets[p] + i, k);
    }
  });
}

template <typename T>
Var<T> scatter_sum(const Var<T>& messages, std::span<const int> dst, std::size_t n) {
  const auto& M = messages.value();
  if (M.rows() != dst.size())
    throw std::invalid_argument("scatter_sum: " + std::to_string(M.rows()) + " messages but " +
                                std::to_string(dst.size()) + " destinations");
  const std::size_t dim = M.cols();
  Tensor<T> Y(n, dim);
  for (std::size_t e = 0; e < dst.size(); ++e) {
    const int u = dst[e];
    if (u < 0 || static_cast<std::size_t>(u) >= n)
      throw std::out_of_range("scatter_sum: destination " + std::to_string(u) + " out of range");
    for (std::size_t k = 0; k < dim; ++k) Y(u, k) += M(e, k);
  }
  std::vector<int> idx(dst.begin(), dst.end());
  return Var<T>::make(std::move(Y), {messages}, [idx = std::move(idx), dim](Node<T>& self) {
    if (auto* d = self.parent_grad(0))
      for (std::size_t e = 0; e < idx.size(); ++e)
        for (std::size_t k = 0; k < dim; ++k) (*d)(e, k) += self.grad(idx[e], k);
  });
}

template <typename T>
Var<T> mean_over(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_over: empty input list");
  Tensor<T> Y = xs[0].value();
  for (std::size_t p = 1; p < xs.size(); ++p) {
    require_same_shape(Y, xs[p].value(), "mean_over");
    for (std::size_t i = 0; i < Y.size(); ++i) Y[i] += xs[p].value()[i];
  }
  const T inv = T(1) / static_cast<T>(xs.size());
  for (auto& v : Y.data()) v *= inv;
  return Var<T>::make(std::move(Y), xs, [inv](Node<T>& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p)
      if (auto* d = self.parent_grad(p))
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*d)[i] += self.grad[i] * inv;
  });
}

template <typename T>
Var<T> segment_mean(const Var<T>& x, std::span<const std::pair<int, int>> ranges) {
  const auto& X = x.value();
  const std::size_t dim = X.cols();
  Tensor<T> Y(ranges.size(), dim);
  for (std::size_t s = 0; s < ranges.size(); ++s) {
    auto [b, e] = ranges[s];
    if (b < 0 || e <= b || static_cast<std::size_t>(e) > X.rows())
      throw std::invalid_argument("segment_mean: empty or invalid range [" + std::to_string(b) + "," +
                                  std::to_string(e) + ")");
    for (int i = b; i < e; ++i)
      for (std::size_t k = 0; k < dim; ++k) Y(s, k) += X(i, k);
    const T inv = T(1) / static_cast<T>(e - b);
    for (std::size_t k = 0; k < dim; ++k) Y(s, k) *= inv;
  }
  std::vector<std::pair<int, int>> rs(ranges.begin(), ranges.end());
  return Var<T>::make(std::move(Y), {x}, [rs = std::move(rs), dim](Node<T>& self) {
    auto* d = self.parent_grad(0);
    if (!d) return;
    for (std::size_t s = 0; s < rs.size(); ++s) {
      auto [b, e] = rs[s];
      const T inv = T(1) / static_cast<T>(e - b);
      for (int i = b; i < e; ++i)
        for (std::size_t k = 0; k < dim; ++k) (*d)(i, k) += self.grad(s, k) * inv;
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T total = 0;
  for (T v : x.value().data()) total += v;
  return Var<T>::make(Tensor<T>(1, 1, total), {x}, [](Node<T>& self) {
    if (auto* d = self.parent_grad(0))
      for (auto& v : d->data()) v += self.grad[0];
  });
}

template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, std::type_identity_t<std::span<const T>> targets) {
  const auto& X = logits.value();
  if (X.size() == 0) throw std::invalid_argument("bce_with_logits: empty input");
  if (X.size() != targets.size())
    throw std::invalid_argument("bce_with_logits: " + std::to_string(X.size()) + " logits but " +
                                std::to_string(targets.size()) + " targets");
  T total = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const T x = X[i];
    total += std::max(x, T(0)) - x * targets[i] + stable_log1p_exp_neg_abs(x);
  }
  const T inv = T(1) / static_cast<T>(X.size());
  std::vector<T> t(targets.begin(), targets.end());
  return Var<T>::make(Tensor<T>(1, 1, total * inv), {logits}, [t = std::move(t), inv](Node<T>& self) {
    auto* d = self.parent_grad(0);
    if (!d) return;
    const auto& X = self.parents[0]->value;
    for (std::size_t i = 0; i < X.size(); ++i) {
      const T x = X[i];
      const T s = x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
      (*d)[i] += self.grad[0] * (s - t[i]) * inv;
    }
  });
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const int> class_ids) {
  const auto& X = logits.value();
  const std::size_t b = X.rows(), c = X.cols();
  if (b == 0 || c == 0) throw std::invalid_argument("cross_entropy: empty input");
  if (class_ids.size() != b)
    throw std::invalid_argument("cross_entropy: " + std::to_string(b) + " rows but " +
                                std::to_string(class_ids.size()) + " labels");
  Tensor<T> probs(b, c);
  T total = 0;
  for (std::size_t i = 0; i < b; ++i) {
    const int y = class_ids[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw std::out_of_range("cross_entropy: class id " + std::to_string(y) + " out of range");
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t k = 0; k < c; ++k) mx = std::max(mx, X(i, k));
    T z = 0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(X(i, k) - mx);
    const T lse = mx + std::log(z);
    total += lse - X(i, y);
    for (std::size_t k = 0; k < c; ++k) probs(i, k) = std::exp(X(i, k) - lse);
  }
  const T inv = T(1) / static_cast<T>(b);
  std::vector<int> ids(class_ids.begin(), class_ids.end());
  return Var<T>::make(Tensor<T>(1, 1, total * inv), {logits},
                      [probs = std::move(probs), ids = std::move(ids), inv](Node<T>& self) {
    auto* d = self.parent_grad(0);
    if (!d) return;
    const T g = self.grad[0] * inv;
    for (std::size_t i = 0; i < probs.rows(); ++i)
      for (std::size_t k = 0; k < probs.cols(); ++k)
        (*d)(i, k) += g * (probs(i, k) - (static_cast<int>(k) == ids[i] ? T(1) : T(0)));
  });
}

#define MUSG_INSTANTIATE_AD(T)                                                                    \
  template class Var<T>;                                                                          \
  template Var<T> linear(const Var<T>&, const Var<T>&);                                           \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                            \
  template Var<T> add(const Var<T>&, const Var<T>&);                                              \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                              \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                              \
  template Var<T> scale(const Var<T>&, std::type_identity_t<T>);                                  \
  template Var<T> abs(const Var<T>&);                                                             \
  template Var<T> relu(const Var<T>&);                                                            \
  template Var<T> sigmoid(const Var<T>&);                                                         \
  template Var<T> softmax(const Var<T>&, int);                                                    \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, std::type_identity_t<T>); \
  template Var<T> embedding(const Var<T>&, std::span<const int>);                                 \
  template Var<T> gather_rows(const Var<T>&, std::span<const int>);                               \
  template Var<T> concat(const std::vector<Var<T>>&, int);                                        \
  template Var<T> scatter_sum(const Var<T>&, std::span<const int>, std::size_t);                  \
  template Var<T> mean_over(const std::vector<Var<T>>&);                                          \
  template Var<T> segment_mean(const Var<T>&, std::span<const std::pair<int, int>>);              \
  template Var<T> sum(const Var<T>&);                                                             \
  template Var<T> bce_with_logits(const Var<T>&, std::type_identity_t<std::span<const T>>);       \
  template Var<T> cross_entropy(const Var<T>&, std::span<const int>);

MUSG_INSTANTIATE_AD(float)
MUSG_INSTANTIATE_AD(double)

}  // namespace musg::ad
