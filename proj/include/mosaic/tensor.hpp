#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace mosaic::ad {

// Reverse-mode tape over dense row-major tensors. Templated on the scalar:
// float for model math, double for oracles and gradient checks. Ops record
// the graph only while grad mode is on and some input requires grad; the
// tape is released at the end of each backward().

inline thread_local bool g_grad_enabled = true;

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
    ~NoGradGuard() { g_grad_enabled = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename T>
class TensorT {
public:
    struct Node {
        std::vector<int> shape;
        std::vector<T> value;
        std::vector<T> grad;  // allocated when requires_grad
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backprop;
    };

    TensorT() = default;
    explicit TensorT(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static TensorT zeros(std::vector<int> shape, bool requires_grad = false) {
        return from_data(std::move(shape), {}, requires_grad, true);
    }

    static TensorT from(std::vector<int> shape, std::vector<T> data, bool requires_grad = false) {
        return from_data(std::move(shape), std::move(data), requires_grad, false);
    }

    static TensorT scalar(T v) { return from({1}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->value.size(); }
    int dim(int i) const { return node_->shape[i]; }

    std::vector<T>& value() { return node_->value; }
    const std::vector<T>& value() const { return node_->value; }
    std::vector<T>& grad() {
        if (!node_->requires_grad) throw std::logic_error("tensor does not track gradients");
        return node_->grad;
    }
    const std::vector<T>& grad() const {
        if (!node_->requires_grad) throw std::logic_error("tensor does not track gradients");
        return node_->grad;
    }

    bool requires_grad() const { return node_->requires_grad; }

    void set_requires_grad(bool on) {
        node_->requires_grad = on;
        if (on) node_->grad.assign(node_->value.size(), T(0));
        else node_->grad.clear();
    }

    void zero_grad() {
        if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    std::shared_ptr<Node> node() const { return node_; }

private:
    static TensorT from_data(std::vector<int> shape, std::vector<T> data, bool requires_grad,
                             bool zero_fill) {
        std::size_t n = 1;
        for (int e : shape) {
            if (e <= 0) throw std::invalid_argument("tensor extents must be positive");
            n *= static_cast<std::size_t>(e);
        }
        auto node = std::make_shared<Node>();
        node->shape = std::move(shape);
        if (zero_fill) node->value.assign(n, T(0));
        else {
            if (data.size() != n) throw std::invalid_argument("tensor data length mismatch");
            node->value = std::move(data);
        }
        if (requires_grad) {
            node->requires_grad = true;
            node->grad.assign(n, T(0));
        }
        return TensorT(std::move(node));
    }

    std::shared_ptr<Node> node_;
};

namespace detail {

template <typename T>
bool track(std::initializer_list<const TensorT<T>*> inputs) {
    if (!g_grad_enabled) return false;
    for (const TensorT<T>* t : inputs)
        if (t->node()->requires_grad || t->node()->backprop) return true;
    return false;
}

// Builds an op result. `parents` are recorded and `backprop` installed only
// when the graph is being traced.
template <typename T, typename Backprop>
TensorT<T> make_op(std::vector<int> shape, std::vector<T> value, bool traced,
                   std::vector<TensorT<T>> parents, Backprop&& backprop) {
    TensorT<T> out = TensorT<T>::from(std::move(shape), std::move(value));
#ifndef NDEBUG
    for (T x : out.value())
        if (!std::isfinite(static_cast<double>(x)))
            throw std::logic_error("non-finite value out of tensor op");
#endif
    if (traced) {
        auto node = out.node();
        node->requires_grad = true;
        node->grad.assign(node->value.size(), T(0));
        node->parents.reserve(parents.size());
        for (auto& p : parents) node->parents.push_back(p.node());
        node->backprop = std::forward<Backprop>(backprop);
    }
    return out;
}

// Accumulates src into a parent's grad if that parent participates.
template <typename T>
void accumulate(const std::shared_ptr<typename TensorT<T>::Node>& parent,
                const std::vector<T>& src) {
    if (!parent->requires_grad) return;
    for (std::size_t i = 0; i < src.size(); ++i) parent->grad[i] += src[i];
}

}  // namespace detail

// ---- primitives ----------------------------------------------------------

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: need 2-D operands with matching inner extent");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<T> out(static_cast<std::size_t>(m) * n, T(0));
    const T* av = a.value().data();
    const T* bv = b.value().data();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            T aip = av[static_cast<std::size_t>(i) * k + p];
            if (aip == T(0)) continue;
            const T* brow = bv + static_cast<std::size_t>(p) * n;
            T* orow = out.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    bool traced = detail::track<T>({&a, &b});
    return detail::make_op<T>(
        {m, n}, std::move(out), traced, {a, b}, [m, k, n](typename TensorT<T>::Node& node) {
            auto& pa = node.parents[0];
            auto& pb = node.parents[1];
            const T* g = node.grad.data();
            if (pa->requires_grad) {
                // dA = dC B^T
                T* ga = pa->grad.data();
                const T* bv = pb->value.data();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        T gij = g[static_cast<std::size_t>(i) * n + j];
                        if (gij == T(0)) continue;
                        for (int p = 0; p < k; ++p)
                            ga[static_cast<std::size_t>(i) * k + p] +=
                                gij * bv[static_cast<std::size_t>(p) * n + j];
                    }
            }
            if (pb->requires_grad) {
                // dB = A^T dC
                T* gb = pb->grad.data();
                const T* av = pa->value.data();
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        T aip = av[static_cast<std::size_t>(i) * k + p];
                        if (aip == T(0)) continue;
                        const T* grow = g + static_cast<std::size_t>(i) * n;
                        T* brow = gb + static_cast<std::size_t>(p) * n;
                        for (int j = 0; j < n; ++j) brow[j] += aip * grow[j];
                    }
            }
        });
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape() != b.shape()) throw std::invalid_argument("add: shape mismatch");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
    bool traced = detail::track<T>({&a, &b});
    return detail::make_op<T>(a.shape(), std::move(out), traced, {a, b},
                              [](typename TensorT<T>::Node& node) {
                                  detail::accumulate<T>(node.parents[0], node.grad);
                                  detail::accumulate<T>(node.parents[1], node.grad);
                              });
}

// Adds a length-n vector to every row of an {m, n} matrix (bias broadcast).
template <typename T>
TensorT<T> add_rowvec(const TensorT<T>& a, const TensorT<T>& v) {
    if (a.shape().size() != 2 || v.shape().size() != 1 || a.dim(1) != v.dim(0))
        throw std::invalid_argument("add_rowvec: need {m,n} matrix and length-n vector");
    const int m = a.dim(0), n = a.dim(1);
    std::vector<T> out(a.numel());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(i) * n + j] =
                a.value()[static_cast<std::size_t>(i) * n + j] + v.value()[j];
    bool traced = detail::track<T>({&a, &v});
    return detail::make_op<T>(a.shape(), std::move(out), traced, {a, v},
                              [m, n](typename TensorT<T>::Node& node) {
                                  detail::accumulate<T>(node.parents[0], node.grad);
                                  auto& pv = node.parents[1];
                                  if (pv->requires_grad) {
                                      for (int i = 0; i < m; ++i)
                                          for (int j = 0; j < n; ++j)
                                              pv->grad[j] += node.grad[static_cast<std::size_t>(i) * n + j];
                                  }
                              });
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * s;
    bool traced = detail::track<T>({&a});
    return detail::make_op<T>(a.shape(), std::move(out), traced, {a},
                              [s](typename TensorT<T>::Node& node) {
                                  auto& p = node.parents[0];
                                  if (!p->requires_grad) return;
                                  for (std::size_t i = 0; i < node.grad.size(); ++i)
                                      p->grad[i] += node.grad[i] * s;
                              });
}

template <typename T>
TensorT<T> transpose(const TensorT<T>& a) {
    if (a.shape().size() != 2) throw std::invalid_argument("transpose: need 2-D operand");
    const int m = a.dim(0), n = a.dim(1);
    std::vector<T> out(a.numel());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j) * m + i] = a.value()[static_cast<std::size_t>(i) * n + j];
    bool traced = detail::track<T>({&a});
    return detail::make_op<T>({n, m}, std::move(out), traced, {a},
                              [m, n](typename TensorT<T>::Node& node) {
                                  auto& p = node.parents[0];
                                  if (!p->requires_grad) return;
                                  for (int i = 0; i < m; ++i)
                                      for (int j = 0; j < n; ++j)
                                          p->grad[static_cast<std::size_t>(i) * n + j] +=
                                              node.grad[static_cast<std::size_t>(j) * m + i];
                              });
}

template <typename T>
TensorT<T> reshape(const TensorT<T>& a, std::vector<int> shape) {
    std::size_t n = 1;
    for (int e : shape) n *= static_cast<std::size_t>(e);
    if (n != a.numel()) throw std::invalid_argument("reshape: element count mismatch");
    bool traced = detail::track<T>({&a});
    return detail::make_op<T>(std::move(shape), std::vector<T>(a.value()), traced, {a},
                              [](typename TensorT<T>::Node& node) {
                                  detail::accumulate<T>(node.parents[0], node.grad);
                              });
}

template <typename T>
TensorT<T> concat_rows(const std::vector<TensorT<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no operands");
    const int cols = parts[0].shape().size() == 2 ? parts[0].dim(1) : -1;
    if (cols < 0) throw std::invalid_argument("concat_rows: need 2-D operands");
    int rows = 0;
    for (const auto& p : parts) {
        if (p.shape().size() != 2 || p.dim(1) != cols)
            throw std::invalid_argument("concat_rows: column extents differ");
        rows += p.dim(0);
    }
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(rows) * cols);
    for (const auto& p : parts) out.insert(out.end(), p.value().begin(), p.value().end());
    bool traced = g_grad_enabled;
    if (traced) {
        traced = false;
        for (const auto& p : parts)
            if (p.node()->requires_grad || p.node()->backprop) traced = true;
    }
    return detail::make_op<T>({rows, cols}, std::move(out), traced, parts,
                              [](typename TensorT<T>::Node& node) {
                                  std::size_t off = 0;
                                  for (auto& p : node.parents) {
                                      if (p->requires_grad)
                                          for (std::size_t i = 0; i < p->value.size(); ++i)
                                              p->grad[i] += node.grad[off + i];
                                      off += p->value.size();
                                  }
                              });
}

// Softmax over the last axis of an {m, n} matrix.
template <typename T>
TensorT<T> softmax_rows(const TensorT<T>& a) {
    if (a.shape().size() != 2) throw std::invalid_argument("softmax_rows: need 2-D operand");
    const int m = a.dim(0), n = a.dim(1);
    std::vector<T> out(a.numel());
    for (int i = 0; i < m; ++i) {
        const T* row = a.value().data() + static_cast<std::size_t>(i) * n;
        T* orow = out.data() + static_cast<std::size_t>(i) * n;
        T mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (int j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (int j = 0; j < n; ++j) orow[j] /= sum;
    }
    bool traced = detail::track<T>({&a});
    return detail::make_op<T>(a.shape(), std::move(out), traced, {a},
                              [m, n](typename TensorT<T>::Node& node) {
                                  auto& p = node.parents[0];
                                  if (!p->requires_grad) return;
                                  for (int i = 0; i < m; ++i) {
                                      const T* y = node.value.data() + static_cast<std::size_t>(i) * n;
                                      const T* g = node.grad.data() + static_cast<std::size_t>(i) * n;
                                      T dot = T(0);
                                      for (int j = 0; j < n; ++j) dot += g[j] * y[j];
                                      T* px = p->grad.data() + static_cast<std::size_t>(i) * n;
                                      for (int j = 0; j < n; ++j) px[j] += y[j] * (g[j] - dot);
                                  }
                              });
}

// Layer norm over the last axis with learnable gain/bias.
template <typename T>
TensorT<T> layer_norm_rows(const TensorT<T>& a, const TensorT<T>& gain, const TensorT<T>& bias,
                           T eps = T(1e-5)) {
    if (a.shape().size() != 2 || gain.shape().size() != 1 || bias.shape().size() != 1 ||
        gain.dim(0) != a.dim(1) || bias.dim(0) != a.dim(1))
        throw std::invalid_argument("layer_norm_rows: shape mismatch");
    const int m = a.dim(0), n = a.dim(1);
    std::vector<T> out(a.numel());
    std::vector<T> xhat(a.numel());
    std::vector<T> inv_sd(m);
    for (int i = 0; i < m; ++i) {
        const T* row = a.value().data() + static_cast<std::size_t>(i) * n;
        T mu = T(0);
        for (int j = 0; j < n; ++j) mu += row[j];
        mu /= T(n);
        T var = T(0);
        for (int j = 0; j < n; ++j) {
            T d = row[j] - mu;
            var += d * d;
        }
        var /= T(n);
        T isd = T(1) / std::sqrt(var + eps);
        inv_sd[i] = isd;
        for (int j = 0; j < n; ++j) {
            T xh = (row[j] - mu) * isd;
            xhat[static_cast<std::size_t>(i) * n + j] = xh;
            out[static_cast<std::size_t>(i) * n + j] = xh * gain.value()[j] + bias.value()[j];
        }
    }
    bool traced = detail::track<T>({&a, &gain, &bias});
    return detail::make_op<T>(
        a.shape(), std::move(out), traced, {a, gain, bias},
        [m, n, xhat = std::move(xhat), inv_sd = std::move(inv_sd)](typename TensorT<T>::Node& node) {
            auto& pa = node.parents[0];
            auto& pg = node.parents[1];
            auto& pb = node.parents[2];
            for (int i = 0; i < m; ++i) {
                const T* g = node.grad.data() + static_cast<std::size_t>(i) * n;
                const T* xh = xhat.data() + static_cast<std::size_t>(i) * n;
                if (pg->requires_grad)
                    for (int j = 0; j < n; ++j) pg->grad[j] += g[j] * xh[j];
                if (pb->requires_grad)
                    for (int j = 0; j < n; ++j) pb->grad[j] += g[j];
                if (pa->requires_grad) {
                    // dL/dxhat = g * gain; then center twice and rescale.
                    T mean_d = T(0), mean_dx = T(0);
                    for (int j = 0; j < n; ++j) {
                        T dxh = g[j] * pg->value[j];
                        mean_d += dxh;
                        mean_dx += dxh * xh[j];
                    }
                    mean_d /= T(n);
                    mean_dx /= T(n);
                    T* px = pa->grad.data() + static_cast<std::size_t>(i) * n;
                    for (int j = 0; j < n; ++j) {
                        T dxh = g[j] * pg->value[j];
                        px[j] += inv_sd[i] * (dxh - mean_d - xh[j] * mean_dx);
                    }
                }
            }
        });
}

// GELU with the tanh approximation.
template <typename T>
TensorT<T> gelu(const TensorT<T>& a) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kA = 0.044715;
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double x = static_cast<double>(a.value()[i]);
        double u = kC * (x + kA * x * x * x);
        out[i] = static_cast<T>(0.5 * x * (1.0 + std::tanh(u)));
    }
    bool traced = detail::track<T>({&a});
    return detail::make_op<T>(a.shape(), std::move(out), traced, {a},
                              [](typename TensorT<T>::Node& node) {
                                  auto& p = node.parents[0];
                                  if (!p->requires_grad) return;
                                  for (std::size_t i = 0; i < node.grad.size(); ++i) {
                                      double x = static_cast<double>(p->value[i]);
                                      double u = kC * (x + kA * x * x * x);
                                      double t = std::tanh(u);
                                      double du = kC * (1.0 + 3.0 * kA * x * x);
                                      double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
                                      p->grad[i] += node.grad[i] * static_cast<T>(d);
                                  }
                              });
}

// x W + b for x {m, k}, W {k, n}, b {n}.
template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    return add_rowvec(matmul(x, w), b);
}

// Mean over all elements of (a - b)^2; result shape {1}.
template <typename T>
TensorT<T> mse_loss(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape() != b.shape()) throw std::invalid_argument("mse_loss: shape mismatch");
    const std::size_t n = a.numel();
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        T d = a.value()[i] - b.value()[i];
        acc += d * d;
    }
    acc /= T(n);
    bool traced = detail::track<T>({&a, &b});
    return detail::make_op<T>({1}, {acc}, traced, {a, b},
                              [n](typename TensorT<T>::Node& node) {
                                  auto& pa = node.parents[0];
                                  auto& pb = node.parents[1];
                                  T g = node.grad[0] * T(2) / T(n);
                                  for (std::size_t i = 0; i < n; ++i) {
                                      T d = pa->value[i] - pb->value[i];
                                      if (pa->requires_grad) pa->grad[i] += g * d;
                                      if (pb->requires_grad) pb->grad[i] -= g * d;
                                  }
                              });
}

// ---- backward -------------------------------------------------------------

// Accumulates dLoss/dParameter into every reachable parameter's grad, then
// releases the tape. Repeated forward/backward rounds accumulate additively
// until zero_grad().
template <typename T>
void backward(const TensorT<T>& loss) {
    if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    using Node = typename TensorT<T>::Node;
    std::vector<std::shared_ptr<Node>> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            auto child = node->parents[next++];
            if (seen.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // order is children-before-parents; walk from the loss down.
    if (loss.node()->requires_grad) loss.node()->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto& node = *it;
        if (node->backprop) node->backprop(*node);
    }
    for (auto& node : order) {
        if (node->backprop) {
            node->backprop = nullptr;
            node->parents.clear();
            // Interior activations are dead now; parameters keep their grads.
        }
    }
}

}  // namespace mosaic::ad
