#pragma once

// Small tape-free reverse-mode autograd. Nodes own their value and gradient;
// backward() walks the graph in reverse topological order. Everything is
// double precision — see the gradient checks in tests/test_neural.cpp.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "ecglab/common.hpp"
#include "ecglab/mask.hpp"

namespace ecglab {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> v;  // values
    std::vector<double> g;  // gradient, same layout
    bool requires_grad = false;
    std::vector<TensorPtr> parents;
    std::function<void(Tensor&)> backfn;  // adds into parents' g

    size_t numel() const {
        size_t n = 1;
        for (size_t s : shape) n *= s;
        return n;
    }
    size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    double& at(size_t i, size_t j) { return v[i * cols() + j]; }
    double at(size_t i, size_t j) const { return v[i * cols() + j]; }
};

inline TensorPtr make_tensor(std::vector<size_t> shape, bool requires_grad = false) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->v.assign(t->numel(), 0.0);
    t->g.assign(t->numel(), 0.0);
    t->requires_grad = requires_grad;
    return t;
}

inline TensorPtr make_param(std::vector<size_t> shape, Rng& rng, double scale) {
    auto t = make_tensor(std::move(shape), true);
    for (double& x : t->v) x = scale * rng.normal();
    return t;
}

inline TensorPtr make_const(std::vector<double> vals) {
    auto t = make_tensor({vals.size()});
    t->v = std::move(vals);
    t->g.assign(t->v.size(), 0.0);
    return t;
}

// ---------------------------------------------------------------------------
// backward

inline void backward(const TensorPtr& out) {
    if (out->numel() != 1) throw ValidationError("backward", "output must be scalar");
    // reverse topological order
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> seen;
    std::function<void(const TensorPtr&)> visit = [&](const TensorPtr& t) {
        if (seen.count(t.get())) return;
        seen.insert(t.get());
        for (const auto& p : t->parents) visit(p);
        order.push_back(t.get());
    };
    visit(out);
    for (Tensor* t : order) t->g.assign(t->numel(), 0.0);
    out->g[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backfn) (*it)->backfn(**it);
}

inline void zero_grad(const std::vector<TensorPtr>& params) {
    for (const auto& p : params) p->g.assign(p->numel(), 0.0);
}

namespace ops {

inline TensorPtr child(std::vector<size_t> shape, std::vector<TensorPtr> parents) {
    auto t = make_tensor(std::move(shape));
    t->parents = std::move(parents);
    return t;
}

inline TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) throw ValidationError("add", "shape mismatch");
    auto y = child(a->shape, {a, b});
    for (size_t i = 0; i < y->numel(); ++i) y->v[i] = a->v[i] + b->v[i];
    y->backfn = [a, b](Tensor& t) {
        for (size_t i = 0; i < t.numel(); ++i) {
            a->g[i] += t.g[i];
            b->g[i] += t.g[i];
        }
    };
    return y;
}

inline TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) throw ValidationError("sub", "shape mismatch");
    auto y = child(a->shape, {a, b});
    for (size_t i = 0; i < y->numel(); ++i) y->v[i] = a->v[i] - b->v[i];
    y->backfn = [a, b](Tensor& t) {
        for (size_t i = 0; i < t.numel(); ++i) {
            a->g[i] += t.g[i];
            b->g[i] -= t.g[i];
        }
    };
    return y;
}

inline TensorPtr scale(const TensorPtr& a, double c) {
    auto y = child(a->shape, {a});
    for (size_t i = 0; i < y->numel(); ++i) y->v[i] = c * a->v[i];
    y->backfn = [a, c](Tensor& t) {
        for (size_t i = 0; i < t.numel(); ++i) a->g[i] += c * t.g[i];
    };
    return y;
}

inline TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
        throw ValidationError("matmul", "shape mismatch");
    size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
    auto y = child({m, n}, {a, b});
    for (size_t i = 0; i < m; ++i)
        for (size_t p = 0; p < k; ++p) {
            double av = a->v[i * k + p];
            for (size_t j = 0; j < n; ++j) y->v[i * n + j] += av * b->v[p * n + j];
        }
    y->backfn = [a, b, m, k, n](Tensor& t) {
        // dA = dY Bᵀ, dB = Aᵀ dY
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j) {
                double gy = t.g[i * n + j];
                if (gy == 0) continue;
                for (size_t p = 0; p < k; ++p) {
                    a->g[i * k + p] += gy * b->v[p * n + j];
                    b->g[p * n + j] += gy * a->v[i * k + p];
                }
            }
    };
    return y;
}

inline TensorPtr transpose(const TensorPtr& a) {
    if (a->shape.size() != 2) throw ValidationError("transpose", "need 2-D");
    size_t m = a->shape[0], n = a->shape[1];
    auto y = child({n, m}, {a});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) y->v[j * m + i] = a->v[i * n + j];
    y->backfn = [a, m, n](Tensor& t) {
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j) a->g[i * n + j] += t.g[j * m + i];
    };
    return y;
}

inline TensorPtr reshape(const TensorPtr& a, std::vector<size_t> shape) {
    auto y = child(std::move(shape), {a});
    if (y->numel() != a->numel()) throw ValidationError("reshape", "element count mismatch");
    y->v = a->v;
    y->backfn = [a](Tensor& t) {
        for (size_t i = 0; i < t.numel(); ++i) a->g[i] += t.g[i];
    };
    return y;
}

// y = x W + 1 bᵀ for x: [n, d], W: [d, o], b: [o]
inline TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
    if (x->shape.size() != 2 || w->shape.size() != 2 || x->shape[1] != w->shape[0] ||
        b->numel() != w->shape[1])
        throw ValidationError("linear", "shape mismatch");
    size_t n = x->shape[0], d = x->shape[1], o = w->shape[1];
    auto y = child({n, o}, {x, w, b});
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < o; ++j) y->v[i * o + j] = b->v[j];
        for (size_t p = 0; p < d; ++p) {
            double xv = x->v[i * d + p];
            for (size_t j = 0; j < o; ++j) y->v[i * o + j] += xv * w->v[p * o + j];
        }
    }
    y->backfn = [x, w, b, n, d, o](Tensor& t) {
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < o; ++j) {
                double gy = t.g[i * o + j];
                if (gy == 0) continue;
                b->g[j] += gy;
                for (size_t p = 0; p < d; ++p) {
                    x->g[i * d + p] += gy * w->v[p * o + j];
                    w->g[p * o + j] += gy * x->v[i * d + p];
                }
            }
    };
    return y;
}

inline TensorPtr gelu(const TensorPtr& a) {
    auto y = child(a->shape, {a});
    constexpr double inv_sqrt2 = 0.7071067811865475;
    constexpr double inv_sqrt2pi = 0.3989422804014327;
    for (size_t i = 0; i < y->numel(); ++i) {
        double x = a->v[i];
        y->v[i] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
    }
    y->backfn = [a](Tensor& t) {
        for (size_t i = 0; i < t.numel(); ++i) {
            double x = a->v[i];
            double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            a->g[i] += t.g[i] * (cdf + x * pdf);
        }
    };
    return y;
}

// x: [C, L], w: [O, C, K], b: [O]; zero padding
inline TensorPtr conv1d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                        size_t stride, size_t pad) {
    if (x->shape.size() != 2 || w->shape.size() != 3 || w->shape[1] != x->shape[0] ||
        b->numel() != w->shape[0])
        throw ValidationError("conv1d", "shape mismatch");
    size_t C = x->shape[0], L = x->shape[1], O = w->shape[0], K = w->shape[2];
    if (L + 2 * pad < K) throw ValidationError("conv1d", "input shorter than kernel");
    size_t Lout = (L + 2 * pad - K) / stride + 1;
    auto y = child({O, Lout}, {x, w, b});
    for (size_t o = 0; o < O; ++o)
        for (size_t j = 0; j < Lout; ++j) {
            double acc = b->v[o];
            for (size_t c = 0; c < C; ++c)
                for (size_t k = 0; k < K; ++k) {
                    int64_t i = int64_t(j * stride + k) - int64_t(pad);
                    if (i < 0 || i >= int64_t(L)) continue;
                    acc += x->v[c * L + size_t(i)] * w->v[(o * C + c) * K + k];
                }
            y->v[o * Lout + j] = acc;
        }
    y->backfn = [x, w, b, stride, pad, C, L, O, K, Lout](Tensor& t) {
        for (size_t o = 0; o < O; ++o)
            for (size_t j = 0; j < Lout; ++j) {
                double gy = t.g[o * Lout + j];
                if (gy == 0) continue;
                b->g[o] += gy;
                for (size_t c = 0; c < C; ++c)
                    for (size_t k = 0; k < K; ++k) {
                        int64_t i = int64_t(j * stride + k) - int64_t(pad);
                        if (i < 0 || i >= int64_t(L)) continue;
                        x->g[c * L + size_t(i)] += gy * w->v[(o * C + c) * K + k];
                        w->g[(o * C + c) * K + k] += gy * x->v[c * L + size_t(i)];
                    }
            }
    };
    return y;
}

// x: [C, L], w: [C, O, K], b: [O]; Lout = (L-1)*stride - 2*pad + K + out_pad
inline TensorPtr conv_transpose1d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                                  size_t stride, size_t pad, size_t out_pad) {
    if (x->shape.size() != 2 || w->shape.size() != 3 || w->shape[0] != x->shape[0] ||
        b->numel() != w->shape[1])
        throw ValidationError("conv_transpose1d", "shape mismatch");
    size_t C = x->shape[0], L = x->shape[1], O = w->shape[1], K = w->shape[2];
    int64_t lout = int64_t(L - 1) * int64_t(stride) - 2 * int64_t(pad) + int64_t(K + out_pad);
    if (lout <= 0) throw ValidationError("conv_transpose1d", "non-positive output length");
    size_t Lout = size_t(lout);
    auto y = child({O, Lout}, {x, w, b});
    for (size_t o = 0; o < O; ++o)
        for (size_t j = 0; j < Lout; ++j) y->v[o * Lout + j] = b->v[o];
    for (size_t c = 0; c < C; ++c)
        for (size_t i = 0; i < L; ++i) {
            double xv = x->v[c * L + i];
            for (size_t o = 0; o < O; ++o)
                for (size_t k = 0; k < K; ++k) {
                    int64_t j = int64_t(i * stride + k) - int64_t(pad);
                    if (j < 0 || j >= int64_t(Lout)) continue;
                    y->v[o * Lout + size_t(j)] += xv * w->v[(c * O + o) * K + k];
                }
        }
    y->backfn = [x, w, b, stride, pad, C, L, O, K, Lout](Tensor& t) {
        for (size_t o = 0; o < O; ++o)
            for (size_t j = 0; j < Lout; ++j) b->g[o] += t.g[o * Lout + j];
        for (size_t c = 0; c < C; ++c)
            for (size_t i = 0; i < L; ++i)
                for (size_t o = 0; o < O; ++o)
                    for (size_t k = 0; k < K; ++k) {
                        int64_t j = int64_t(i * stride + k) - int64_t(pad);
                        if (j < 0 || j >= int64_t(Lout)) continue;
                        double gy = t.g[o * Lout + size_t(j)];
                        x->g[c * L + i] += gy * w->v[(c * O + o) * K + k];
                        w->g[(c * O + o) * K + k] += gy * x->v[c * L + i];
                    }
    };
    return y;
}

// row-wise layer norm; x: [n, d], gamma/beta: [d]
inline TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                            double eps = 1e-5) {
    if (x->shape.size() != 2 || gamma->numel() != x->shape[1] || beta->numel() != x->shape[1])
        throw ValidationError("layer_norm", "shape mismatch");
    size_t n = x->shape[0], d = x->shape[1];
    auto y = child({n, d}, {x, gamma, beta});
    auto xhat = std::make_shared<std::vector<double>>(n * d);
    auto inv_sigma = std::make_shared<std::vector<double>>(n);
    for (size_t i = 0; i < n; ++i) {
        double mu = 0;
        for (size_t j = 0; j < d; ++j) mu += x->v[i * d + j];
        mu /= double(d);
        double var = 0;
        for (size_t j = 0; j < d; ++j) {
            double c = x->v[i * d + j] - mu;
            var += c * c;
        }
        var /= double(d);
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)[i] = is;
        for (size_t j = 0; j < d; ++j) {
            double xh = (x->v[i * d + j] - mu) * is;
            (*xhat)[i * d + j] = xh;
            y->v[i * d + j] = gamma->v[j] * xh + beta->v[j];
        }
    }
    y->backfn = [x, gamma, beta, n, d, xhat, inv_sigma](Tensor& t) {
        for (size_t i = 0; i < n; ++i) {
            double sum_gdy = 0, sum_gdy_xh = 0;
            for (size_t j = 0; j < d; ++j) {
                double gdy = gamma->v[j] * t.g[i * d + j];
                sum_gdy += gdy;
                sum_gdy_xh += gdy * (*xhat)[i * d + j];
                gamma->g[j] += t.g[i * d + j] * (*xhat)[i * d + j];
                beta->g[j] += t.g[i * d + j];
            }
            double is = (*inv_sigma)[i];
            for (size_t j = 0; j < d; ++j) {
                double gdy = gamma->v[j] * t.g[i * d + j];
                x->g[i * d + j] +=
                    is * (gdy - sum_gdy / double(d) -
                          (*xhat)[i * d + j] * sum_gdy_xh / double(d));
            }
        }
    };
    return y;
}

// row-wise softmax over allowed columns; disallowed entries are exactly 0
inline TensorPtr masked_softmax(const TensorPtr& s, const AttentionMask& mask) {
    if (s->shape.size() != 2 || s->shape[0] != s->shape[1] || s->shape[0] != mask.n())
        throw ValidationError("masked_softmax", "shape mismatch");
    size_t n = s->shape[0];
    auto y = child({n, n}, {s});
    for (size_t i = 0; i < n; ++i) {
        double mx = -1e300;
        for (size_t j = 0; j < n; ++j)
            if (mask.get(i, j)) mx = std::max(mx, s->v[i * n + j]);
        double z = 0;
        for (size_t j = 0; j < n; ++j)
            if (mask.get(i, j)) z += std::exp(s->v[i * n + j] - mx);
        for (size_t j = 0; j < n; ++j)
            y->v[i * n + j] = mask.get(i, j) ? std::exp(s->v[i * n + j] - mx) / z : 0.0;
    }
    auto probs = std::make_shared<std::vector<double>>(y->v);
    y->backfn = [s, n, probs](Tensor& t) {
        for (size_t i = 0; i < n; ++i) {
            double dot = 0;
            for (size_t j = 0; j < n; ++j) dot += (*probs)[i * n + j] * t.g[i * n + j];
            for (size_t j = 0; j < n; ++j)
                if ((*probs)[i * n + j] > 0.0)
                    s->g[i * n + j] += (*probs)[i * n + j] * (t.g[i * n + j] - dot);
        }
    };
    return y;
}

// pick rows from a [V, h] table; gradients scatter back into the table
inline TensorPtr embed_rows(const TensorPtr& table, const std::vector<int>& ids) {
    size_t V = table->shape[0], h = table->shape[1];
    auto y = child({ids.size(), h}, {table});
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || size_t(ids[i]) >= V) throw ValidationError("embed_rows", "id out of range");
        for (size_t j = 0; j < h; ++j) y->v[i * h + j] = table->v[size_t(ids[i]) * h + j];
    }
    y->backfn = [table, ids, h](Tensor& t) {
        for (size_t i = 0; i < ids.size(); ++i)
            for (size_t j = 0; j < h; ++j) table->g[size_t(ids[i]) * h + j] += t.g[i * h + j];
    };
    return y;
}

// stack 1-D rows (each [h]) into an [n, h] matrix
inline TensorPtr stack_rows(const std::vector<TensorPtr>& rowv) {
    if (rowv.empty()) throw ValidationError("stack_rows", "empty");
    size_t h = rowv[0]->numel();
    auto y = child({rowv.size(), h}, rowv);
    for (size_t i = 0; i < rowv.size(); ++i) {
        if (rowv[i]->numel() != h) throw ValidationError("stack_rows", "ragged rows");
        for (size_t j = 0; j < h; ++j) y->v[i * h + j] = rowv[i]->v[j];
    }
    y->backfn = [rowv, h](Tensor& t) {
        for (size_t i = 0; i < rowv.size(); ++i)
            for (size_t j = 0; j < h; ++j) rowv[i]->g[j] += t.g[i * h + j];
    };
    return y;
}

inline TensorPtr mse(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) throw ValidationError("mse", "shape mismatch");
    auto y = child({1}, {a, b});
    size_t n = a->numel();
    double s = 0;
    for (size_t i = 0; i < n; ++i) s += (a->v[i] - b->v[i]) * (a->v[i] - b->v[i]);
    y->v[0] = s / double(n);
    y->backfn = [a, b, n](Tensor& t) {
        double c = 2.0 * t.g[0] / double(n);
        for (size_t i = 0; i < n; ++i) {
            double d = a->v[i] - b->v[i];
            a->g[i] += c * d;
            b->g[i] -= c * d;
        }
    };
    return y;
}

// mean of -log softmax(logits_i)[target_i] over positions with use[i] = true
inline TensorPtr cross_entropy_masked(const TensorPtr& logits, const std::vector<int>& targets,
                                      const std::vector<bool>& use) {
    size_t n = logits->shape[0], V = logits->shape[1];
    if (targets.size() != n || use.size() != n)
        throw ValidationError("cross_entropy", "length mismatch");
    size_t m = 0;
    for (bool b : use) m += b;
    if (m == 0) throw ValidationError("cross_entropy", "no loss positions");
    auto y = child({1}, {logits});
    auto probs = std::make_shared<std::vector<double>>(n * V, 0.0);
    double loss = 0;
    for (size_t i = 0; i < n; ++i) {
        if (!use[i]) continue;
        if (targets[i] < 0 || size_t(targets[i]) >= V)
            throw ValidationError("cross_entropy", "target out of range");
        double mx = logits->v[i * V];
        for (size_t j = 1; j < V; ++j) mx = std::max(mx, logits->v[i * V + j]);
        double z = 0;
        for (size_t j = 0; j < V; ++j) z += std::exp(logits->v[i * V + j] - mx);
        for (size_t j = 0; j < V; ++j)
            (*probs)[i * V + j] = std::exp(logits->v[i * V + j] - mx) / z;
        loss -= std::log((*probs)[i * V + size_t(targets[i])]);
    }
    y->v[0] = loss / double(m);
    y->backfn = [logits, targets, use, n, V, m, probs](Tensor& t) {
        double c = t.g[0] / double(m);
        for (size_t i = 0; i < n; ++i) {
            if (!use[i]) continue;
            for (size_t j = 0; j < V; ++j) {
                double p = (*probs)[i * V + j];
                logits->g[i * V + j] += c * (p - (size_t(targets[i]) == j ? 1.0 : 0.0));
            }
        }
    };
    return y;
}

inline TensorPtr mean_all(const TensorPtr& a) {
    auto y = child({1}, {a});
    double s = 0;
    for (double x : a->v) s += x;
    size_t n = a->numel();
    y->v[0] = s / double(n);
    y->backfn = [a, n](Tensor& t) {
        for (size_t i = 0; i < n; ++i) a->g[i] += t.g[0] / double(n);
    };
    return y;
}

}  // namespace ops

// ---------------------------------------------------------------------------
// Adam with global-norm clipping and linear warmup handled by the schedule.

struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double clip = 1.0;  // global gradient norm; <= 0 disables
    std::vector<TensorPtr> params;
    std::vector<std::vector<double>> m, u;
    int64_t step_count = 0;

    explicit Adam(std::vector<TensorPtr> p) : params(std::move(p)) {
        for (const auto& t : params) {
            m.emplace_back(t->numel(), 0.0);
            u.emplace_back(t->numel(), 0.0);
        }
    }

    void step(double lr) {
        if (clip > 0) {
            double norm2 = 0;
            for (const auto& t : params)
                for (double g : t->g) norm2 += g * g;
            double norm = std::sqrt(norm2);
            if (norm > clip) {
                double s = clip / norm;
                for (const auto& t : params)
                    for (double& g : t->g) g *= s;
            }
        }
        ++step_count;
        double bc1 = 1.0 - std::pow(beta1, double(step_count));
        double bc2 = 1.0 - std::pow(beta2, double(step_count));
        for (size_t p = 0; p < params.size(); ++p) {
            auto& t = *params[p];
            for (size_t i = 0; i < t.numel(); ++i) {
                m[p][i] = beta1 * m[p][i] + (1 - beta1) * t.g[i];
                u[p][i] = beta2 * u[p][i] + (1 - beta2) * t.g[i] * t.g[i];
                t.v[i] -= lr * (m[p][i] / bc1) / (std::sqrt(u[p][i] / bc2) + eps);
            }
        }
    }
};

// linear ramp from 0 to base_lr over warmup_steps, flat afterwards
inline double warmup_lr(double base_lr, int64_t step, int64_t warmup_steps) {
    if (warmup_steps <= 0 || step >= warmup_steps) return base_lr;
    return base_lr * double(step + 1) / double(warmup_steps);
}

}  // namespace ecglab
