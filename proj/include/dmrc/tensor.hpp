// Dense 64-bit tensor with reverse-mode gradients on an explicit tape.
//
// Design constraints, enforced throughout:
//   - no broadcasting: binary elementwise ops require identical shapes
//   - all reductions/accumulations run in ascending index order, so repeated
//     runs on the same inputs are bit-identical
//   - a Tensor is either a plain value or attached to exactly one Tape; ops
//     on unattached tensors are pure numeric (the inference path)
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dmrc {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

inline int shape_count(const Shape& s) {
    long long n = 1;
    for (int e : s) {
        if (e <= 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(s));
        n *= e;
    }
    if (n > (1LL << 31)) throw std::invalid_argument("tensor too large: " + shape_str(s));
    return static_cast<int>(n);
}

class Tape;

class Tensor {
  public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
        : shape_(std::move(shape)), values_(std::move(values)), requires_grad_(requires_grad) {
        if (shape_count(shape_) != static_cast<int>(values_.size()))
            throw std::invalid_argument("value count " + std::to_string(values_.size()) +
                                        " does not match shape " + shape_str(shape_));
    }

    static Tensor zeros(Shape shape) {
        int n = shape_count(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0));
    }
    static Tensor full(Shape shape, double v) {
        int n = shape_count(shape);
        return Tensor(std::move(shape), std::vector<double>(n, v));
    }
    static Tensor scalar(double v) { return Tensor(Shape{1}, {v}); }
    static Tensor vec(std::vector<double> v) {
        int n = static_cast<int>(v.size());
        return Tensor(Shape{n}, std::move(v));
    }
    static Tensor matrix(int rows, int cols, std::vector<double> v) {
        return Tensor(Shape{rows, cols}, std::move(v));
    }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int size() const { return static_cast<int>(values_.size()); }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& mutable_values() { return values_; }

    bool is_scalar() const { return values_.size() == 1; }
    double value() const {
        if (!is_scalar()) throw std::invalid_argument("value() requires a scalar, got " + shape_str(shape_));
        return values_[0];
    }
    double at(int i) const { return values_.at(static_cast<std::size_t>(i)); }
    double at(int i, int j) const {
        if (rank() != 2) throw std::invalid_argument("at(i,j) requires rank 2, got " + shape_str(shape_));
        return values_.at(static_cast<std::size_t>(i) * shape_[1] + j);
    }

    bool requires_grad() const { return requires_grad_; }
    void set_requires_grad(bool b) { requires_grad_ = b; }

    Tape* tape() const { return tape_; }
    int node() const { return node_; }
    bool on_tape() const { return tape_ != nullptr; }

  private:
    friend class Tape;
    Shape shape_;
    std::vector<double> values_;
    bool requires_grad_ = false;
    Tape* tape_ = nullptr;
    int node_ = -1;
};

// Records one forward pass. Node ids are assigned in execution order, which
// is a topological order by construction; backward() walks them in reverse.
class Tape {
  public:
    using BackFn = std::function<void(const std::vector<double>& out_grad, Tape& tape)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers an input tensor. Named leaves are parameters: backward()
    // reports a gradient for every one of them, zero if the loss never
    // touched it. A name may be registered once per tape; reuse the returned
    // tensor instead of fetching a parameter twice.
    Tensor leaf(const Tensor& value, const std::string& name = {}) {
        if (!name.empty())
            for (const auto& [existing, node] : named_leaves_)
                if (existing == name)
                    throw std::invalid_argument("leaf named '" + name + "' already registered on this tape");
        Tensor t = value;
        t.tape_ = this;
        t.node_ = emit(t.shape_, t.size(), {}, nullptr);
        if (!name.empty()) named_leaves_.emplace_back(name, t.node_);
        return t;
    }

    Tensor emit_tensor(Shape shape, std::vector<double> values, std::vector<int> parents, BackFn back) {
        Tensor t(std::move(shape), std::move(values));
        t.requires_grad_ = true;
        t.tape_ = this;
        t.node_ = emit(t.shape_, t.size(), std::move(parents), std::move(back));
        return t;
    }

    // Reverse sweep from a scalar loss. Returns name -> gradient for every
    // named leaf on this tape.
    std::map<std::string, Tensor> backward(const Tensor& loss) {
        if (loss.tape_ != this || loss.node_ < 0)
            throw std::invalid_argument("backward: loss is not a node on this tape");
        if (!loss.is_scalar())
            throw std::invalid_argument("backward: loss must be a scalar, got " + shape_str(loss.shape_));
        grads_.assign(nodes_.size(), {});
        grad_buffer(loss.node_) = {1.0};
        for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
            if (grads_[id].empty() || !nodes_[id].back) continue;
            nodes_[id].back(grads_[id], *this);
        }
        std::map<std::string, Tensor> out;
        for (const auto& [name, node] : named_leaves_) {
            if (grads_[node].empty())
                out.emplace(name, Tensor::zeros(nodes_[node].shape));
            else
                out.emplace(name, Tensor(nodes_[node].shape, grads_[node]));
        }
        return out;
    }

    // Gradient of the most recent backward() w.r.t. any tensor on this tape.
    Tensor grad_of(const Tensor& t) const {
        if (t.tape_ != this || t.node_ < 0)
            throw std::invalid_argument("grad_of: tensor is not on this tape");
        if (grads_.empty()) throw std::logic_error("grad_of: backward() has not run");
        if (grads_[t.node_].empty()) return Tensor::zeros(t.shape_);
        return Tensor(t.shape_, grads_[t.node_]);
    }

    std::vector<double>& grad_buffer(int node) {
        auto& g = grads_.at(static_cast<std::size_t>(node));
        if (g.empty()) g.assign(static_cast<std::size_t>(nodes_[node].count), 0.0);
        return g;
    }

    int num_nodes() const { return static_cast<int>(nodes_.size()); }

  private:
    struct Node {
        Shape shape;
        int count;
        std::vector<int> parents;
        BackFn back;
    };

    int emit(Shape shape, int count, std::vector<int> parents, BackFn back) {
        nodes_.push_back(Node{std::move(shape), count, std::move(parents), std::move(back)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    std::vector<std::pair<std::string, int>> named_leaves_;
};

namespace detail {

inline Tape* common_tape(std::initializer_list<const Tensor*> ts) {
    Tape* tape = nullptr;
    for (const Tensor* t : ts) {
        if (!t->on_tape()) continue;
        if (tape && tape != t->tape())
            throw std::invalid_argument("operands belong to different tapes");
        tape = t->tape();
    }
    return tape;
}

inline int parent_of(const Tensor& t, Tape* tape) {
    return (tape && t.tape() == tape) ? t.node() : -1;
}

inline Tensor finish(Tape* tape, Shape shape, std::vector<double> values,
                     std::vector<int> parents, Tape::BackFn back) {
    if (!tape) return Tensor(std::move(shape), std::move(values));
    return tape->emit_tensor(std::move(shape), std::move(values), std::move(parents), std::move(back));
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shapes differ: " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

}  // namespace detail

// ---- matrix products ----

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument("matmul: expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()));
    if (a.shape()[1] != b.shape()[0])
        throw std::invalid_argument("matmul: inner dimensions differ: " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int t = 0; t < k; ++t) {
            const double aval = av[static_cast<std::size_t>(i) * k + t];
            for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] += aval * bv[static_cast<std::size_t>(t) * n + j];
        }
    Tape* tape = detail::common_tape({&a, &b});
    if (!tape) return Tensor(Shape{m, n}, std::move(out));
    int pa = detail::parent_of(a, tape), pb = detail::parent_of(b, tape);
    auto back = [pa, pb, m, k, n, av, bv](const std::vector<double>& g, Tape& t) {
        if (pa >= 0) {
            auto& ga = t.grad_buffer(pa);
            for (int i = 0; i < m; ++i)
                for (int c = 0; c < k; ++c) {
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += g[static_cast<std::size_t>(i) * n + j] * bv[static_cast<std::size_t>(c) * n + j];
                    ga[static_cast<std::size_t>(i) * k + c] += acc;
                }
        }
        if (pb >= 0) {
            auto& gb = t.grad_buffer(pb);
            for (int c = 0; c < k; ++c)
                for (int j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < m; ++i) acc += av[static_cast<std::size_t>(i) * k + c] * g[static_cast<std::size_t>(i) * n + j];
                    gb[static_cast<std::size_t>(c) * n + j] += acc;
                }
        }
    };
    return tape->emit_tensor(Shape{m, n}, std::move(out), {pa, pb}, std::move(back));
}

inline Tensor matvec(const Tensor& a, const Tensor& x) {
    if (a.rank() != 2 || x.rank() != 1)
        throw std::invalid_argument("matvec: expects matrix and vector, got " + shape_str(a.shape()) + " and " +
                                    shape_str(x.shape()));
    if (a.shape()[1] != x.shape()[0])
        throw std::invalid_argument("matvec: inner dimensions differ: " + shape_str(a.shape()) + " vs " +
                                    shape_str(x.shape()));
    const int m = a.shape()[0], k = a.shape()[1];
    const auto& av = a.values();
    const auto& xv = x.values();
    std::vector<double> out(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int t = 0; t < k; ++t) acc += av[static_cast<std::size_t>(i) * k + t] * xv[t];
        out[i] = acc;
    }
    Tape* tape = detail::common_tape({&a, &x});
    if (!tape) return Tensor(Shape{m}, std::move(out));
    int pa = detail::parent_of(a, tape), px = detail::parent_of(x, tape);
    auto back = [pa, px, m, k, av, xv](const std::vector<double>& g, Tape& t) {
        if (pa >= 0) {
            auto& ga = t.grad_buffer(pa);
            for (int i = 0; i < m; ++i)
                for (int c = 0; c < k; ++c) ga[static_cast<std::size_t>(i) * k + c] += g[i] * xv[c];
        }
        if (px >= 0) {
            auto& gx = t.grad_buffer(px);
            for (int c = 0; c < k; ++c) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i) acc += av[static_cast<std::size_t>(i) * k + c] * g[i];
                gx[c] += acc;
            }
        }
    };
    return tape->emit_tensor(Shape{m}, std::move(out), {pa, px}, std::move(back));
}

// ---- elementwise ----

enum class EwKind { Add, Mul, Sigmoid, Tanh, Relu };

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    const int n = a.size();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = a.values()[i] + b.values()[i];
    Tape* tape = detail::common_tape({&a, &b});
    if (!tape) return Tensor(a.shape(), std::move(out));
    int pa = detail::parent_of(a, tape), pb = detail::parent_of(b, tape);
    auto back = [pa, pb, n](const std::vector<double>& g, Tape& t) {
        if (pa >= 0) {
            auto& ga = t.grad_buffer(pa);
            for (int i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (pb >= 0) {
            auto& gb = t.grad_buffer(pb);
            for (int i = 0; i < n; ++i) gb[i] += g[i];
        }
    };
    return tape->emit_tensor(a.shape(), std::move(out), {pa, pb}, std::move(back));
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "mul");
    const int n = a.size();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = a.values()[i] * b.values()[i];
    Tape* tape = detail::common_tape({&a, &b});
    if (!tape) return Tensor(a.shape(), std::move(out));
    int pa = detail::parent_of(a, tape), pb = detail::parent_of(b, tape);
    auto back = [pa, pb, n, av = a.values(), bv = b.values()](const std::vector<double>& g, Tape& t) {
        if (pa >= 0) {
            auto& ga = t.grad_buffer(pa);
            for (int i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
        }
        if (pb >= 0) {
            auto& gb = t.grad_buffer(pb);
            for (int i = 0; i < n; ++i) gb[i] += g[i] * av[i];
        }
    };
    return tape->emit_tensor(a.shape(), std::move(out), {pa, pb}, std::move(back));
}

namespace detail {

template <typename Fwd, typename Back>
Tensor unary_op(const Tensor& x, Fwd fwd, Back dydx_from_xy) {
    const int n = x.size();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = fwd(x.values()[i]);
    Tape* tape = common_tape({&x});
    if (!tape) return Tensor(x.shape(), std::move(out));
    int px = parent_of(x, tape);
    auto back = [px, n, xv = x.values(), yv = out, dydx_from_xy](const std::vector<double>& g, Tape& t) {
        if (px < 0) return;
        auto& gx = t.grad_buffer(px);
        for (int i = 0; i < n; ++i) gx[i] += g[i] * dydx_from_xy(xv[i], yv[i]);
    };
    return tape->emit_tensor(x.shape(), std::move(out), {px}, std::move(back));
}

}  // namespace detail

inline Tensor sigmoid(const Tensor& x) {
    return detail::unary_op(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
    return detail::unary_op(
        x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& x) {
    return detail::unary_op(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor elementwise(EwKind kind, const Tensor& a) {
    switch (kind) {
        case EwKind::Sigmoid: return sigmoid(a);
        case EwKind::Tanh: return tanh(a);
        case EwKind::Relu: return relu(a);
        case EwKind::Add:
        case EwKind::Mul:
            throw std::invalid_argument("elementwise: binary kind requires two arguments");
    }
    throw std::invalid_argument("elementwise: unknown kind");
}

inline Tensor elementwise(EwKind kind, const Tensor& a, const Tensor& b) {
    switch (kind) {
        case EwKind::Add: return add(a, b);
        case EwKind::Mul: return mul(a, b);
        case EwKind::Sigmoid:
        case EwKind::Tanh:
        case EwKind::Relu:
            throw std::invalid_argument("elementwise: unary kind takes one argument");
    }
    throw std::invalid_argument("elementwise: unknown kind");
}

// scale by a plain constant (no gradient flows into the constant)
inline Tensor scale(const Tensor& x, double c) {
    const int n = x.size();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = x.values()[i] * c;
    Tape* tape = detail::common_tape({&x});
    if (!tape) return Tensor(x.shape(), std::move(out));
    int px = detail::parent_of(x, tape);
    auto back = [px, n, c](const std::vector<double>& g, Tape& t) {
        if (px < 0) return;
        auto& gx = t.grad_buffer(px);
        for (int i = 0; i < n; ++i) gx[i] += g[i] * c;
    };
    return tape->emit_tensor(x.shape(), std::move(out), {px}, std::move(back));
}

// ---- softmax ----

// Normalizes slices taken along `axis` (each slice sums to 1); rank 1 or 2.
// Max-subtraction keeps exp() in range for arbitrary logits.
inline Tensor softmax(const Tensor& x, int axis = 0) {
    if (x.rank() != 1 && x.rank() != 2)
        throw std::invalid_argument("softmax: expects rank 1 or 2, got " + shape_str(x.shape()));
    if (axis < 0 || axis >= x.rank())
        throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " out of range for " +
                                    shape_str(x.shape()));
    const int rows = x.rank() == 2 ? x.shape()[0] : 1;
    const int cols = x.rank() == 2 ? x.shape()[1] : x.shape()[0];
    const int eff_axis = x.rank() == 2 ? axis : 1;  // treat a vector as one row

    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    const int n_slices = eff_axis == 1 ? rows : cols;
    const int slice_len = eff_axis == 1 ? cols : rows;
    auto idx = [eff_axis, cols](int slice, int k) {
        return eff_axis == 1 ? static_cast<std::size_t>(slice) * cols + k
                             : static_cast<std::size_t>(k) * cols + slice;
    };
    for (int s = 0; s < n_slices; ++s) {
        double mx = xv[idx(s, 0)];
        for (int k = 1; k < slice_len; ++k) mx = std::max(mx, xv[idx(s, k)]);
        double denom = 0.0;
        for (int k = 0; k < slice_len; ++k) denom += std::exp(xv[idx(s, k)] - mx);
        for (int k = 0; k < slice_len; ++k) out[idx(s, k)] = std::exp(xv[idx(s, k)] - mx) / denom;
    }
    Tape* tape = detail::common_tape({&x});
    if (!tape) return Tensor(x.shape(), std::move(out));
    int px = detail::parent_of(x, tape);
    auto back = [px, n_slices, slice_len, idx, yv = out](const std::vector<double>& g, Tape& t) {
        if (px < 0) return;
        auto& gx = t.grad_buffer(px);
        for (int s = 0; s < n_slices; ++s) {
            double inner = 0.0;
            for (int k = 0; k < slice_len; ++k) inner += g[idx(s, k)] * yv[idx(s, k)];
            for (int k = 0; k < slice_len; ++k) gx[idx(s, k)] += yv[idx(s, k)] * (g[idx(s, k)] - inner);
        }
    };
    return tape->emit_tensor(x.shape(), std::move(out), {px}, std::move(back));
}

// ---- shape ops ----

inline Tensor concat(const Tensor& a, const Tensor& b, int axis) {
    if (a.rank() != b.rank())
        throw std::invalid_argument("concat: rank mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    if (a.rank() != 1 && a.rank() != 2)
        throw std::invalid_argument("concat: expects rank 1 or 2, got " + shape_str(a.shape()));
    if (axis < 0 || axis >= a.rank())
        throw std::invalid_argument("concat: axis " + std::to_string(axis) + " out of range");
    for (int d = 0; d < a.rank(); ++d)
        if (d != axis && a.shape()[d] != b.shape()[d])
            throw std::invalid_argument("concat: shapes incompatible off-axis: " + shape_str(a.shape()) + " vs " +
                                        shape_str(b.shape()));
    Shape out_shape = a.shape();
    out_shape[axis] += b.shape()[axis];

    std::vector<double> out;
    out.reserve(a.values().size() + b.values().size());
    int na = a.size();
    if (a.rank() == 1 || axis == 0) {
        out = a.values();
        out.insert(out.end(), b.values().begin(), b.values().end());
    } else {
        const int rows = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
        for (int i = 0; i < rows; ++i) {
            out.insert(out.end(), a.values().begin() + static_cast<std::ptrdiff_t>(i) * ca,
                       a.values().begin() + static_cast<std::ptrdiff_t>(i + 1) * ca);
            out.insert(out.end(), b.values().begin() + static_cast<std::ptrdiff_t>(i) * cb,
                       b.values().begin() + static_cast<std::ptrdiff_t>(i + 1) * cb);
        }
    }
    Tape* tape = detail::common_tape({&a, &b});
    if (!tape) return Tensor(std::move(out_shape), std::move(out));
    int pa = detail::parent_of(a, tape), pb = detail::parent_of(b, tape);
    bool rowwise = (a.rank() == 1 || axis == 0);
    int rows = a.rank() == 2 ? a.shape()[0] : 1;
    int ca = a.rank() == 2 ? a.shape()[1] : a.shape()[0];
    int cb = b.rank() == 2 ? b.shape()[1] : b.shape()[0];
    auto back = [pa, pb, rowwise, rows, ca, cb, na](const std::vector<double>& g, Tape& t) {
        if (rowwise) {
            if (pa >= 0) {
                auto& ga = t.grad_buffer(pa);
                for (int i = 0; i < na; ++i) ga[i] += g[i];
            }
            if (pb >= 0) {
                auto& gb = t.grad_buffer(pb);
                for (std::size_t i = na; i < g.size(); ++i) gb[i - na] += g[i];
            }
        } else {
            const int cols = ca + cb;
            if (pa >= 0) {
                auto& ga = t.grad_buffer(pa);
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < ca; ++j) ga[static_cast<std::size_t>(i) * ca + j] += g[static_cast<std::size_t>(i) * cols + j];
            }
            if (pb >= 0) {
                auto& gb = t.grad_buffer(pb);
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cb; ++j) gb[static_cast<std::size_t>(i) * cb + j] += g[static_cast<std::size_t>(i) * cols + ca + j];
            }
        }
    };
    return tape->emit_tensor(std::move(out_shape), std::move(out), {pa, pb}, std::move(back));
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw std::invalid_argument("transpose: expects rank 2, got " + shape_str(a.shape()));
    const int m = a.shape()[0], n = a.shape()[1];
    std::vector<double> out(a.values().size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j) * m + i] = a.values()[static_cast<std::size_t>(i) * n + j];
    Tape* tape = detail::common_tape({&a});
    if (!tape) return Tensor(Shape{n, m}, std::move(out));
    int pa = detail::parent_of(a, tape);
    auto back = [pa, m, n](const std::vector<double>& g, Tape& t) {
        if (pa < 0) return;
        auto& ga = t.grad_buffer(pa);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) ga[static_cast<std::size_t>(i) * n + j] += g[static_cast<std::size_t>(j) * m + i];
    };
    return tape->emit_tensor(Shape{n, m}, std::move(out), {pa}, std::move(back));
}

inline Tensor row(const Tensor& a, int i) {
    if (a.rank() != 2) throw std::invalid_argument("row: expects rank 2, got " + shape_str(a.shape()));
    if (i < 0 || i >= a.shape()[0])
        throw std::invalid_argument("row: index " + std::to_string(i) + " out of range for " + shape_str(a.shape()));
    const int cols = a.shape()[1];
    std::vector<double> out(a.values().begin() + static_cast<std::ptrdiff_t>(i) * cols,
                            a.values().begin() + static_cast<std::ptrdiff_t>(i + 1) * cols);
    Tape* tape = detail::common_tape({&a});
    if (!tape) return Tensor(Shape{cols}, std::move(out));
    int pa = detail::parent_of(a, tape);
    auto back = [pa, i, cols](const std::vector<double>& g, Tape& t) {
        if (pa < 0) return;
        auto& ga = t.grad_buffer(pa);
        for (int j = 0; j < cols; ++j) ga[static_cast<std::size_t>(i) * cols + j] += g[j];
    };
    return tape->emit_tensor(Shape{cols}, std::move(out), {pa}, std::move(back));
}

inline Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw std::invalid_argument("stack_rows: no rows given");
    const int cols = rows[0].shape().empty() ? 0 : rows[0].shape()[0];
    Tape* tape = nullptr;
    for (const auto& r : rows) {
        if (r.rank() != 1 || r.shape()[0] != cols)
            throw std::invalid_argument("stack_rows: all rows must be vectors of equal length");
        if (r.on_tape()) {
            if (tape && tape != r.tape()) throw std::invalid_argument("operands belong to different tapes");
            tape = r.tape();
        }
    }
    const int n = static_cast<int>(rows.size());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n) * cols);
    for (const auto& r : rows) out.insert(out.end(), r.values().begin(), r.values().end());
    if (!tape) return Tensor(Shape{n, cols}, std::move(out));
    std::vector<int> parents(rows.size());
    for (int i = 0; i < n; ++i) parents[i] = detail::parent_of(rows[i], tape);
    auto back = [parents, cols](const std::vector<double>& g, Tape& t) {
        for (std::size_t i = 0; i < parents.size(); ++i) {
            if (parents[i] < 0) continue;
            auto& gr = t.grad_buffer(parents[i]);
            for (int j = 0; j < cols; ++j) gr[j] += g[i * cols + j];
        }
    };
    return tape->emit_tensor(Shape{n, cols}, std::move(out), std::move(parents), std::move(back));
}

inline Tensor repeat_rows(const Tensor& x, int n) {
    if (x.rank() != 1) throw std::invalid_argument("repeat_rows: expects a vector, got " + shape_str(x.shape()));
    if (n <= 0) throw std::invalid_argument("repeat_rows: count must be positive");
    const int cols = x.shape()[0];
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n) * cols);
    for (int i = 0; i < n; ++i) out.insert(out.end(), x.values().begin(), x.values().end());
    Tape* tape = detail::common_tape({&x});
    if (!tape) return Tensor(Shape{n, cols}, std::move(out));
    int px = detail::parent_of(x, tape);
    auto back = [px, n, cols](const std::vector<double>& g, Tape& t) {
        if (px < 0) return;
        auto& gx = t.grad_buffer(px);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < cols; ++j) gx[j] += g[static_cast<std::size_t>(i) * cols + j];
    };
    return tape->emit_tensor(Shape{n, cols}, std::move(out), {px}, std::move(back));
}

// ---- reductions ----

inline Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    Tape* tape = detail::common_tape({&x});
    if (!tape) return Tensor::scalar(acc);
    int px = detail::parent_of(x, tape);
    int n = x.size();
    auto back = [px, n](const std::vector<double>& g, Tape& t) {
        if (px < 0) return;
        auto& gx = t.grad_buffer(px);
        for (int i = 0; i < n; ++i) gx[i] += g[0];
    };
    return tape->emit_tensor(Shape{1}, {acc}, {px}, std::move(back));
}

inline Tensor mean(const Tensor& x) {
    const int n = x.size();
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    acc /= n;
    Tape* tape = detail::common_tape({&x});
    if (!tape) return Tensor::scalar(acc);
    int px = detail::parent_of(x, tape);
    auto back = [px, n](const std::vector<double>& g, Tape& t) {
        if (px < 0) return;
        auto& gx = t.grad_buffer(px);
        for (int i = 0; i < n; ++i) gx[i] += g[0] / n;
    };
    return tape->emit_tensor(Shape{1}, {acc}, {px}, std::move(back));
}

inline Tensor dot(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || b.rank() != 1 || a.size() != b.size())
        throw std::invalid_argument("dot: expects equal-length vectors, got " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()));
    double acc = 0.0;
    for (int i = 0; i < a.size(); ++i) acc += a.values()[i] * b.values()[i];
    Tape* tape = detail::common_tape({&a, &b});
    if (!tape) return Tensor::scalar(acc);
    int pa = detail::parent_of(a, tape), pb = detail::parent_of(b, tape);
    auto back = [pa, pb, av = a.values(), bv = b.values()](const std::vector<double>& g, Tape& t) {
        if (pa >= 0) {
            auto& ga = t.grad_buffer(pa);
            for (std::size_t i = 0; i < bv.size(); ++i) ga[i] += g[0] * bv[i];
        }
        if (pb >= 0) {
            auto& gb = t.grad_buffer(pb);
            for (std::size_t i = 0; i < av.size(); ++i) gb[i] += g[0] * av[i];
        }
    };
    return tape->emit_tensor(Shape{1}, {acc}, {pa, pb}, std::move(back));
}

// Max of a vector plus its index; ties resolve to the smallest index.
// Gradient flows to the argmax coordinate only.
inline std::pair<Tensor, int> max_with_argmax(const Tensor& x) {
    if (x.rank() != 1) throw std::invalid_argument("max_with_argmax: expects a vector, got " + shape_str(x.shape()));
    int arg = 0;
    for (int i = 1; i < x.size(); ++i)
        if (x.values()[i] > x.values()[arg]) arg = i;
    double best = x.values()[arg];
    Tape* tape = detail::common_tape({&x});
    if (!tape) return {Tensor::scalar(best), arg};
    int px = detail::parent_of(x, tape);
    auto back = [px, arg](const std::vector<double>& g, Tape& t) {
        if (px < 0) return;
        t.grad_buffer(px)[arg] += g[0];
    };
    return {tape->emit_tensor(Shape{1}, {best}, {px}, std::move(back)), arg};
}

// -log softmax(logits)[index], computed as logsumexp(logits) - logits[index]
// so sharply peaked logits stay finite. Gradient is softmax(logits) - onehot.
inline Tensor cross_entropy_with_index(const Tensor& logits, int index) {
    if (logits.rank() != 1)
        throw std::invalid_argument("cross_entropy_with_index: expects a vector, got " + shape_str(logits.shape()));
    if (index < 0 || index >= logits.size())
        throw std::invalid_argument("cross_entropy_with_index: index " + std::to_string(index) +
                                    " out of range for " + shape_str(logits.shape()));
    const auto& xv = logits.values();
    double mx = xv[0];
    for (double v : xv) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : xv) denom += std::exp(v - mx);
    const double lse = mx + std::log(denom);
    const double loss = lse - xv[index];
    Tape* tape = detail::common_tape({&logits});
    if (!tape) return Tensor::scalar(loss);
    int px = detail::parent_of(logits, tape);
    std::vector<double> probs(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) probs[i] = std::exp(xv[i] - mx) / denom;
    auto back = [px, index, probs](const std::vector<double>& g, Tape& t) {
        if (px < 0) return;
        auto& gx = t.grad_buffer(px);
        for (std::size_t i = 0; i < probs.size(); ++i)
            gx[i] += g[0] * (probs[i] - (static_cast<int>(i) == index ? 1.0 : 0.0));
    };
    return tape->emit_tensor(Shape{1}, {loss}, {px}, std::move(back));
}

}  // namespace dmrc
