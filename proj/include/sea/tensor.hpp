#pragma once

// Dense double tensors with reverse-mode automatic differentiation.
// A Tensor is a value-semantic handle to a graph node; backward() walks
// the recorded graph in reverse topological order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace sea {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

inline std::vector<std::size_t> row_major_strides(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
    return st;
}

// numpy-style broadcast of two shapes, aligned at trailing dims
inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t n = std::max(a.size(), b.size());
    Shape out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ea = i < n - a.size() ? 1 : a[i - (n - a.size())];
        const std::size_t eb = i < n - b.size() ? 1 : b[i - (n - b.size())];
        if (ea != eb && ea != 1 && eb != 1)
            throw std::invalid_argument("shape mismatch: " + shape_str(a) + " vs " + shape_str(b));
        out[i] = std::max(ea, eb);
    }
    return out;
}

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

struct TensorNode {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;     // empty unless requires_grad
    bool requires_grad = false;
    bool is_param = false;
    std::vector<NodePtr> parents;
    std::function<void()> backward_fn;

    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), 0.0);
    }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

    static Tensor constant(Shape shape, std::vector<double> values) {
        check_sized(shape, values);
        auto n = std::make_shared<TensorNode>();
        n->shape = std::move(shape);
        n->values = std::move(values);
        return Tensor(std::move(n));
    }

    static Tensor scalar(double v) { return constant({1}, {v}); }

    static Tensor param(Shape shape, std::vector<double> values) {
        check_sized(shape, values);
        auto n = std::make_shared<TensorNode>();
        n->shape = std::move(shape);
        n->values = std::move(values);
        n->requires_grad = true;
        n->is_param = true;
        n->ensure_grad();
        return Tensor(std::move(n));
    }

    static Tensor zeros(Shape shape) {
        std::size_t n = numel(shape);
        return constant(std::move(shape), std::vector<double>(n, 0.0));
    }

    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->values.size(); }
    const std::vector<double>& values() const { return node_->values; }
    std::vector<double>& mutable_values() { return node_->values; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool is_param() const { return node_->is_param; }
    bool requires_grad() const { return node_->requires_grad; }
    NodePtr node() const { return node_; }
    bool defined() const { return node_ != nullptr; }

    double item() const {
        if (node_->values.size() != 1)
            throw std::invalid_argument("item() on non-scalar tensor " + shape_str(node_->shape));
        return node_->values[0];
    }

    void zero_grad() {
        if (!node_->grad.empty())
            std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    }

private:
    static void check_sized(const Shape& shape, const std::vector<double>& values) {
        for (auto e : shape)
            if (e == 0) throw std::invalid_argument("zero extent in shape " + shape_str(shape));
        if (numel(shape) != values.size())
            throw std::invalid_argument("value buffer length " + std::to_string(values.size()) +
                                        " does not match shape " + shape_str(shape));
    }

    NodePtr node_;
};

namespace detail {

inline NodePtr make_result(Shape shape, std::vector<double> values,
                           std::vector<NodePtr> parents) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    for (auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) {
        n->ensure_grad();
        n->parents = std::move(parents);
    }
    return n;
}

// Accumulate an upstream gradient shaped `from` into a parent shaped `to`,
// summing over broadcast dimensions.
inline void reduce_into(const Shape& from, const std::vector<double>& g,
                        const Shape& to, std::vector<double>& acc) {
    if (from == to) {
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
        return;
    }
    const std::size_t nd = from.size();
    const std::size_t off = nd - to.size();
    auto fst = row_major_strides(from);
    auto tst = row_major_strides(to);
    std::vector<std::size_t> idx(nd, 0);
    for (std::size_t flat = 0; flat < g.size(); ++flat) {
        std::size_t ti = 0;
        for (std::size_t d = off; d < nd; ++d) {
            const std::size_t e = to[d - off];
            ti += (e == 1 ? 0 : idx[d]) * tst[d - off];
        }
        acc[ti] += g[flat];
        for (std::size_t d = nd; d-- > 0;) {
            if (++idx[d] < from[d]) break;
            idx[d] = 0;
        }
    }
}

// Map flat index in broadcast output shape to flat index in operand shape.
struct BroadcastIndexer {
    Shape out;
    std::vector<std::size_t> stride;  // per out-dim stride into the operand, 0 where broadcast

    BroadcastIndexer(const Shape& out_shape, const Shape& op_shape) : out(out_shape) {
        const std::size_t nd = out.size();
        const std::size_t off = nd - op_shape.size();
        auto ost = row_major_strides(op_shape);
        stride.assign(nd, 0);
        for (std::size_t d = off; d < nd; ++d)
            stride[d] = (op_shape[d - off] == 1) ? 0 : ost[d - off];
    }
};

}  // namespace detail

enum class EwBinary { Add, Sub, Mul };

inline Tensor ew_binary(EwBinary op, const Tensor& a, const Tensor& b) {
    const Shape out_shape = broadcast_shape(a.shape(), b.shape());
    const std::size_t n = numel(out_shape);
    std::vector<double> out(n);
    const auto& av = a.values();
    const auto& bv = b.values();

    auto apply = [op](double x, double y) {
        switch (op) {
            case EwBinary::Add: return x + y;
            case EwBinary::Sub: return x - y;
            case EwBinary::Mul: return x * y;
        }
        return 0.0;
    };

    if (a.shape() == b.shape()) {
        for (std::size_t i = 0; i < n; ++i) out[i] = apply(av[i], bv[i]);
    } else {
        detail::BroadcastIndexer ia(out_shape, a.shape()), ib(out_shape, b.shape());
        std::vector<std::size_t> idx(out_shape.size(), 0);
        for (std::size_t flat = 0; flat < n; ++flat) {
            std::size_t pa = 0, pb = 0;
            for (std::size_t d = 0; d < out_shape.size(); ++d) {
                pa += idx[d] * ia.stride[d];
                pb += idx[d] * ib.stride[d];
            }
            out[flat] = apply(av[pa], bv[pb]);
            for (std::size_t d = out_shape.size(); d-- > 0;) {
                if (++idx[d] < out_shape[d]) break;
                idx[d] = 0;
            }
        }
    }

    auto res = detail::make_result(out_shape, std::move(out), {a.node(), b.node()});
    if (res->requires_grad) {
        NodePtr an = a.node(), bn = b.node();
        TensorNode* rn = res.get();
        res->backward_fn = [op, an, bn, rn, out_shape]() {
            const auto& g = rn->grad;
            auto grad_for = [&](const NodePtr& p, bool is_b) {
                if (!p->requires_grad) return;
                p->ensure_grad();
                std::vector<double> local(g.size());
                for (std::size_t i = 0; i < g.size(); ++i) {
                    double w = 1.0;
                    if (op == EwBinary::Sub && is_b) w = -1.0;
                    local[i] = g[i] * w;
                }
                if (op == EwBinary::Mul) {
                    // multiply upstream by the other operand, broadcast
                    const NodePtr& other = is_b ? an : bn;
                    if (other->shape == out_shape) {
                        for (std::size_t i = 0; i < local.size(); ++i) local[i] *= other->values[i];
                    } else {
                        detail::BroadcastIndexer io(out_shape, other->shape);
                        std::vector<std::size_t> idx(out_shape.size(), 0);
                        for (std::size_t flat = 0; flat < local.size(); ++flat) {
                            std::size_t po = 0;
                            for (std::size_t d = 0; d < out_shape.size(); ++d)
                                po += idx[d] * io.stride[d];
                            local[flat] *= other->values[po];
                            for (std::size_t d = out_shape.size(); d-- > 0;) {
                                if (++idx[d] < out_shape[d]) break;
                                idx[d] = 0;
                            }
                        }
                    }
                }
                detail::reduce_into(out_shape, local, p->shape, p->grad);
            };
            grad_for(an, false);
            grad_for(bn, true);
        };
    }
    return Tensor(res);
}

inline Tensor add(const Tensor& a, const Tensor& b) { return ew_binary(EwBinary::Add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return ew_binary(EwBinary::Sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return ew_binary(EwBinary::Mul, a, b); }

enum class EwUnary { Relu, Exp, Log, Abs, Sigmoid, Tanh, Neg };

inline Tensor ew_unary(EwUnary op, const Tensor& a) {
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double x = av[i];
        switch (op) {
            case EwUnary::Relu: out[i] = x > 0 ? x : 0.0; break;
            case EwUnary::Exp: out[i] = std::exp(x); break;
            case EwUnary::Log:
                if (x <= 0.0)
                    throw std::domain_error("log of non-positive value " + std::to_string(x));
                out[i] = std::log(x);
                break;
            case EwUnary::Abs: out[i] = std::fabs(x); break;
            case EwUnary::Sigmoid: out[i] = 1.0 / (1.0 + std::exp(-x)); break;
            case EwUnary::Tanh: out[i] = std::tanh(x); break;
            case EwUnary::Neg: out[i] = -x; break;
        }
    }
    auto res = detail::make_result(a.shape(), std::move(out), {a.node()});
    if (res->requires_grad) {
        NodePtr an = a.node();
        TensorNode* rn = res.get();  // raw self-pointer avoids an ownership cycle
        res->backward_fn = [op, an, rn]() {
            an->ensure_grad();
            const auto& g = rn->grad;
            const auto& x = an->values;
            const auto& y = rn->values;
            for (std::size_t i = 0; i < g.size(); ++i) {
                double d = 0.0;
                switch (op) {
                    case EwUnary::Relu: d = x[i] > 0 ? 1.0 : 0.0; break;
                    case EwUnary::Exp: d = y[i]; break;
                    case EwUnary::Log: d = 1.0 / x[i]; break;
                    case EwUnary::Abs: d = x[i] > 0 ? 1.0 : (x[i] < 0 ? -1.0 : 0.0); break;
                    case EwUnary::Sigmoid: d = y[i] * (1.0 - y[i]); break;
                    case EwUnary::Tanh: d = 1.0 - y[i] * y[i]; break;
                    case EwUnary::Neg: d = -1.0; break;
                }
                an->grad[i] += g[i] * d;
            }
        };
    }
    return Tensor(res);
}

inline Tensor relu(const Tensor& a) { return ew_unary(EwUnary::Relu, a); }
inline Tensor exp(const Tensor& a) { return ew_unary(EwUnary::Exp, a); }
inline Tensor log(const Tensor& a) { return ew_unary(EwUnary::Log, a); }
inline Tensor abs(const Tensor& a) { return ew_unary(EwUnary::Abs, a); }
inline Tensor sigmoid(const Tensor& a) { return ew_unary(EwUnary::Sigmoid, a); }
inline Tensor tanh(const Tensor& a) { return ew_unary(EwUnary::Tanh, a); }
inline Tensor neg(const Tensor& a) { return ew_unary(EwUnary::Neg, a); }

inline Tensor scale(const Tensor& a, double c) {
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
    auto res = detail::make_result(a.shape(), std::move(out), {a.node()});
    if (res->requires_grad) {
        NodePtr an = a.node();
        TensorNode* rn = res.get();  // raw self-pointer avoids an ownership cycle
        res->backward_fn = [c, an, rn]() {
            an->ensure_grad();
            for (std::size_t i = 0; i < rn->grad.size(); ++i) an->grad[i] += c * rn->grad[i];
        };
    }
    return Tensor(res);
}

// Batched matmul: [..., m, k] x [..., k, n] -> [..., m, n], leading dims
// broadcast numpy-style.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.size() < 2 || bs.size() < 2)
        throw std::invalid_argument("matmul requires rank >= 2, got " + shape_str(as) + " and " +
                                    shape_str(bs));
    const std::size_t m = as[as.size() - 2], k = as[as.size() - 1];
    const std::size_t k2 = bs[bs.size() - 2], n = bs[bs.size() - 1];
    if (k != k2)
        throw std::invalid_argument("matmul inner-dimension mismatch: " + shape_str(as) + " vs " +
                                    shape_str(bs));
    Shape abatch(as.begin(), as.end() - 2), bbatch(bs.begin(), bs.end() - 2);
    Shape batch = broadcast_shape(abatch, bbatch);
    Shape out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(n);

    const std::size_t nbatch = numel(batch);
    const std::size_t a_mat = m * k, b_mat = k * n, o_mat = m * n;

    // per-batch-flat offset into a and b
    auto batch_offsets = [&](const Shape& opb, std::size_t mat) {
        std::vector<std::size_t> offs(nbatch, 0);
        if (batch.empty()) return offs;
        detail::BroadcastIndexer io(batch, opb);
        std::vector<std::size_t> idx(batch.size(), 0);
        for (std::size_t f = 0; f < nbatch; ++f) {
            std::size_t p = 0;
            for (std::size_t d = 0; d < batch.size(); ++d) p += idx[d] * io.stride[d];
            offs[f] = p * mat;
            for (std::size_t d = batch.size(); d-- > 0;) {
                if (++idx[d] < batch[d]) break;
                idx[d] = 0;
            }
        }
        return offs;
    };
    auto aoffs = batch_offsets(abatch, a_mat);
    auto boffs = batch_offsets(bbatch, b_mat);

    std::vector<double> out(nbatch * o_mat, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t f = 0; f < nbatch; ++f) {
        const double* A = av.data() + aoffs[f];
        const double* B = bv.data() + boffs[f];
        double* O = out.data() + f * o_mat;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double x = A[i * k + p];
                if (x == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) O[i * n + j] += x * B[p * n + j];
            }
    }

    auto res = detail::make_result(out_shape, std::move(out), {a.node(), b.node()});
    if (res->requires_grad) {
        NodePtr an = a.node(), bn = b.node();
        TensorNode* rn = res.get();
        res->backward_fn = [an, bn, rn, aoffs, boffs, nbatch, m, k, n, a_mat, b_mat, o_mat]() {
            const auto& g = rn->grad;
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t f = 0; f < nbatch; ++f) {
                    const double* G = g.data() + f * o_mat;
                    const double* B = bn->values.data() + boffs[f];
                    double* dA = an->grad.data() + aoffs[f];
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                            double acc = 0.0;
                            for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
                            dA[i * k + p] += acc;
                        }
                }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t f = 0; f < nbatch; ++f) {
                    const double* G = g.data() + f * o_mat;
                    const double* A = an->values.data() + aoffs[f];
                    double* dB = bn->grad.data() + boffs[f];
                    for (std::size_t p = 0; p < k; ++p)
                        for (std::size_t i = 0; i < m; ++i) {
                            const double x = A[i * k + p];
                            if (x == 0.0) continue;
                            for (std::size_t j = 0; j < n; ++j)
                                dB[p * n + j] += x * G[i * n + j];
                        }
                }
            }
        };
    }
    return Tensor(res);
}

inline Tensor transpose_last2(const Tensor& a) {
    const Shape& s = a.shape();
    if (s.size() < 2) throw std::invalid_argument("transpose_last2 requires rank >= 2");
    Shape out_shape = s;
    std::swap(out_shape[s.size() - 2], out_shape[s.size() - 1]);
    const std::size_t r = s[s.size() - 2], c = s[s.size() - 1];
    const std::size_t mat = r * c;
    const std::size_t nbatch = a.size() / mat;
    std::vector<double> out(a.size());
    const auto& av = a.values();
    for (std::size_t f = 0; f < nbatch; ++f)
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
                out[f * mat + j * r + i] = av[f * mat + i * c + j];
    auto res = detail::make_result(out_shape, std::move(out), {a.node()});
    if (res->requires_grad) {
        NodePtr an = a.node();
        TensorNode* rn = res.get();  // raw self-pointer avoids an ownership cycle
        res->backward_fn = [an, rn, nbatch, r, c, mat]() {
            an->ensure_grad();
            const auto& g = rn->grad;
            for (std::size_t f = 0; f < nbatch; ++f)
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        an->grad[f * mat + i * c + j] += g[f * mat + j * r + i];
        };
    }
    return Tensor(res);
}

inline Tensor reshape(const Tensor& a, Shape new_shape) {
    if (numel(new_shape) != a.size())
        throw std::invalid_argument("reshape element-count mismatch: " + shape_str(a.shape()) +
                                    " to " + shape_str(new_shape));
    auto res = detail::make_result(std::move(new_shape), a.values(), {a.node()});
    if (res->requires_grad) {
        NodePtr an = a.node();
        TensorNode* rn = res.get();  // raw self-pointer avoids an ownership cycle
        res->backward_fn = [an, rn]() {
            an->ensure_grad();
            for (std::size_t i = 0; i < rn->grad.size(); ++i) an->grad[i] += rn->grad[i];
        };
    }
    return Tensor(res);
}

// Drop `axis`, keeping index `index` along it.
inline Tensor select(const Tensor& a, std::size_t axis, std::size_t index) {
    const Shape& s = a.shape();
    if (axis >= s.size()) throw std::invalid_argument("select: axis out of range");
    if (index >= s[axis]) throw std::invalid_argument("select: index out of range");
    Shape out_shape;
    for (std::size_t d = 0; d < s.size(); ++d)
        if (d != axis) out_shape.push_back(s[d]);
    if (out_shape.empty()) out_shape.push_back(1);

    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
    for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
    const std::size_t extent = s[axis];

    std::vector<double> out(outer * inner);
    const auto& av = a.values();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i)
            out[o * inner + i] = av[(o * extent + index) * inner + i];

    auto res = detail::make_result(std::move(out_shape), std::move(out), {a.node()});
    if (res->requires_grad) {
        NodePtr an = a.node();
        TensorNode* rn = res.get();  // raw self-pointer avoids an ownership cycle
        res->backward_fn = [an, rn, outer, inner, extent, index]() {
            an->ensure_grad();
            const auto& g = rn->grad;
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t i = 0; i < inner; ++i)
                    an->grad[(o * extent + index) * inner + i] += g[o * inner + i];
        };
    }
    return Tensor(res);
}

// Stack equally-shaped tensors along a new axis inserted at `axis`.
inline Tensor stack(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("stack of zero tensors");
    const Shape& s = parts[0].shape();
    for (const auto& p : parts)
        if (p.shape() != s)
            throw std::invalid_argument("stack shape mismatch: " + shape_str(s) + " vs " +
                                        shape_str(p.shape()));
    if (axis > s.size()) throw std::invalid_argument("stack: axis out of range");
    Shape out_shape;
    for (std::size_t d = 0; d < axis; ++d) out_shape.push_back(s[d]);
    out_shape.push_back(parts.size());
    for (std::size_t d = axis; d < s.size(); ++d) out_shape.push_back(s[d]);

    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
    for (std::size_t d = axis; d < s.size(); ++d) inner *= s[d];
    const std::size_t np = parts.size();

    std::vector<double> out(outer * np * inner);
    for (std::size_t p = 0; p < np; ++p) {
        const auto& v = parts[p].values();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < inner; ++i)
                out[(o * np + p) * inner + i] = v[o * inner + i];
    }
    std::vector<NodePtr> ps;
    ps.reserve(np);
    for (const auto& p : parts) ps.push_back(p.node());
    auto res = detail::make_result(std::move(out_shape), std::move(out), ps);
    if (res->requires_grad) {
        TensorNode* rn = res.get();
        res->backward_fn = [rn, ps, outer, inner, np]() {
            const auto& g = rn->grad;
            for (std::size_t p = 0; p < np; ++p) {
                if (!ps[p]->requires_grad) continue;
                ps[p]->ensure_grad();
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < inner; ++i)
                        ps[p]->grad[o * inner + i] += g[(o * np + p) * inner + i];
            }
        };
    }
    return Tensor(res);
}

enum class Reduce { Sum, Mean, FrobeniusSq };

// Reduce over the given axes (empty = all axes). Reduced axes are dropped;
// a full reduction yields shape {1}.
inline Tensor reduce(Reduce op, const Tensor& a, std::vector<std::size_t> axes = {}) {
    const Shape& s = a.shape();
    if (axes.empty()) {
        axes.resize(s.size());
        std::iota(axes.begin(), axes.end(), 0u);
    }
    std::vector<bool> reduced(s.size(), false);
    std::size_t count = 1;
    for (auto ax : axes) {
        if (ax >= s.size())
            throw std::invalid_argument("reduce: axis " + std::to_string(ax) +
                                        " out of range for " + shape_str(s));
        if (!reduced[ax]) count *= s[ax];
        reduced[ax] = true;
    }
    Shape out_shape;
    for (std::size_t d = 0; d < s.size(); ++d)
        if (!reduced[d]) out_shape.push_back(s[d]);
    if (out_shape.empty()) out_shape.push_back(1);

    Shape kept_dims;
    for (std::size_t d = 0; d < s.size(); ++d)
        if (!reduced[d]) kept_dims.push_back(s[d]);

    const auto& av = a.values();
    std::vector<double> out(numel(out_shape), 0.0);
    // map each input flat index to output flat index
    std::vector<std::size_t> idx(s.size(), 0);
    auto kept_strides_out = row_major_strides(kept_dims.empty() ? Shape{1} : kept_dims);
    for (std::size_t flat = 0; flat < av.size(); ++flat) {
        std::size_t oi = 0, kd = 0;
        for (std::size_t d = 0; d < s.size(); ++d)
            if (!reduced[d]) oi += idx[d] * kept_strides_out[kd], ++kd;
        const double v = av[flat];
        out[oi] += (op == Reduce::FrobeniusSq) ? v * v : v;
        for (std::size_t d = s.size(); d-- > 0;) {
            if (++idx[d] < s[d]) break;
            idx[d] = 0;
        }
    }
    if (op == Reduce::Mean)
        for (auto& v : out) v /= static_cast<double>(count);

    auto res = detail::make_result(std::move(out_shape), std::move(out), {a.node()});
    if (res->requires_grad) {
        NodePtr an = a.node();
        TensorNode* rn = res.get();  // raw self-pointer avoids an ownership cycle
        auto red = reduced;
        res->backward_fn = [op, an, rn, red, count, kept_strides_out]() {
            an->ensure_grad();
            const auto& g = rn->grad;
            const Shape& s = an->shape;
            std::vector<std::size_t> idx(s.size(), 0);
            for (std::size_t flat = 0; flat < an->values.size(); ++flat) {
                std::size_t oi = 0, kd = 0;
                for (std::size_t d = 0; d < s.size(); ++d)
                    if (!red[d]) oi += idx[d] * kept_strides_out[kd], ++kd;
                double dv = g[oi];
                if (op == Reduce::Mean) dv /= static_cast<double>(count);
                if (op == Reduce::FrobeniusSq) dv *= 2.0 * an->values[flat];
                an->grad[flat] += dv;
                for (std::size_t d = s.size(); d-- > 0;) {
                    if (++idx[d] < s[d]) break;
                    idx[d] = 0;
                }
            }
        };
    }
    return Tensor(res);
}

inline Tensor sum(const Tensor& a, std::vector<std::size_t> axes = {}) {
    return reduce(Reduce::Sum, a, std::move(axes));
}
inline Tensor mean(const Tensor& a, std::vector<std::size_t> axes = {}) {
    return reduce(Reduce::Mean, a, std::move(axes));
}
inline Tensor frobenius_sq(const Tensor& a) { return reduce(Reduce::FrobeniusSq, a); }

// Stable softmax over the last dimension.
inline Tensor softmax_lastdim(const Tensor& a) {
    const Shape& s = a.shape();
    const std::size_t n = s.back();
    const std::size_t rows = a.size() / n;
    const auto& av = a.values();
    std::vector<double> out(a.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = av.data() + r * n;
        double* y = out.data() + r * n;
        double mx = x[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += (y[j] = std::exp(x[j] - mx));
        for (std::size_t j = 0; j < n; ++j) y[j] /= z;
    }
    auto res = detail::make_result(s, std::move(out), {a.node()});
    if (res->requires_grad) {
        NodePtr an = a.node();
        TensorNode* rn = res.get();  // raw self-pointer avoids an ownership cycle
        res->backward_fn = [an, rn, rows, n]() {
            an->ensure_grad();
            const auto& g = rn->grad;
            const auto& y = rn->values;
            for (std::size_t r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
                for (std::size_t j = 0; j < n; ++j)
                    an->grad[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
            }
        };
    }
    return Tensor(res);
}

// Stable log(sum(exp(x))) over the last dimension; that dim is dropped.
inline Tensor logsumexp_lastdim(const Tensor& a) {
    const Shape& s = a.shape();
    const std::size_t n = s.back();
    const std::size_t rows = a.size() / n;
    Shape out_shape(s.begin(), s.end() - 1);
    if (out_shape.empty()) out_shape.push_back(1);
    const auto& av = a.values();
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = av.data() + r * n;
        double mx = x[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(x[j] - mx);
        out[r] = mx + std::log(z);
    }
    auto res = detail::make_result(std::move(out_shape), std::move(out), {a.node()});
    if (res->requires_grad) {
        NodePtr an = a.node();
        TensorNode* rn = res.get();  // raw self-pointer avoids an ownership cycle
        res->backward_fn = [an, rn, rows, n]() {
            an->ensure_grad();
            const auto& g = rn->grad;
            const auto& x = an->values;
            const auto& lse = rn->values;
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < n; ++j)
                    an->grad[r * n + j] += g[r] * std::exp(x[r * n + j] - lse[r]);
        };
    }
    return Tensor(res);
}

// Detach: same values, no graph connection.
inline Tensor detach(const Tensor& a) { return Tensor::constant(a.shape(), a.values()); }

// Reverse sweep from a scalar root. Gradients accumulate into parameter
// tensors; call zero_grad on params between steps.
inline void backward(const Tensor& root) {
    if (root.size() != 1)
        throw std::invalid_argument("backward requires a scalar root, got " +
                                    shape_str(root.shape()));
    if (!root.requires_grad()) return;  // constant-only graph

    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> work;
    work.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!work.empty()) {
        auto& [node, child] = work.back();
        if (child < node->parents.size()) {
            TensorNode* p = node->parents[child++].get();
            if (p->requires_grad && visited.insert(p).second) work.emplace_back(p, 0);
        } else {
            order.push_back(node);
            work.pop_back();
        }
    }
    root.node()->ensure_grad();
    root.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn();
}

}  // namespace sea
