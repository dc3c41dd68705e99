#pragma once

// Dense tensor engine with reverse-mode automatic differentiation.
//
// Tensors are shape + shared flat buffer, optionally linked to a Tape
// node. Operations eagerly compute forward values; when an input is
// tracked on a tape they also record a backward closure. Tape::backward
// runs the closures in reverse creation order, restricted to nodes that
// can reach the loss, and accumulates gradients per node.
//
// The engine is templated on the scalar type: float for training and
// sampling, double for finite-difference oracle checks. Matrix products
// and convolution inner loops are routed through BLAS GEMM; BLAS runs
// single threaded so summation order is fixed and results are
// reproducible bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <vector>

#include "motionlab/errors.hpp"
#include "motionlab/rng.hpp"

extern "C" {
void openblas_set_num_threads(int);
void cblas_sgemm(int order, int trans_a, int trans_b, int m, int n, int k,
                 float alpha, const float* a, int lda, const float* b, int ldb,
                 float beta, float* c, int ldc);
void cblas_dgemm(int order, int trans_a, int trans_b, int m, int n, int k,
                 double alpha, const double* a, int lda, const double* b, int ldb,
                 double beta, double* c, int ldc);
}

namespace motionlab {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string r = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) r += ",";
        r += std::to_string(s[i]);
    }
    return r + "]";
}

inline void check_shape_dims(const Shape& s) {
    for (int64_t d : s)
        require(d > 0, ErrCat::shape, "non-positive dimension in shape " + shape_str(s));
}

namespace blas {

inline void use_single_thread() {
    static std::once_flag once;
    std::call_once(once, [] { openblas_set_num_threads(1); });
}

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
inline void gemm(bool ta, bool tb, int m, int n, int k, float alpha,
                 const float* a, int lda, const float* b, int ldb, float beta,
                 float* c, int ldc) {
    use_single_thread();
    cblas_sgemm(101, ta ? 112 : 111, tb ? 112 : 111, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

inline void gemm(bool ta, bool tb, int m, int n, int k, double alpha,
                 const double* a, int lda, const double* b, int ldb, double beta,
                 double* c, int ldc) {
    use_single_thread();
    cblas_dgemm(101, ta ? 112 : 111, tb ? 112 : 111, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace blas

template <class S>
class Tape;

template <class S>
class Tensor {
public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<S> data)
        : shape_(std::move(shape)), data_(std::make_shared<std::vector<S>>(std::move(data))) {
        check_shape_dims(shape_);
        require(int64_t(data_->size()) == shape_numel(shape_), ErrCat::shape,
                "data size " + std::to_string(data_->size()) + " does not match shape " + shape_str(shape_));
    }

    static Tensor zeros(const Shape& shape) {
        check_shape_dims(shape);
        return Tensor(shape, std::vector<S>(size_t(shape_numel(shape)), S(0)));
    }

    static Tensor full(const Shape& shape, S v) {
        check_shape_dims(shape);
        return Tensor(shape, std::vector<S>(size_t(shape_numel(shape)), v));
    }

    static Tensor scalar(S v) { return Tensor(Shape{}, std::vector<S>{v}); }

    const Shape& shape() const { return shape_; }
    int rank() const { return int(shape_.size()); }
    int64_t dim(int i) const { return shape_.at(size_t(i)); }
    int64_t numel() const { return shape_numel(shape_); }
    bool defined() const { return bool(data_); }

    const S* data() const { return data_->data(); }
    S* data() { return data_->data(); }
    const std::vector<S>& vec() const { return *data_; }

    S item() const {
        require(defined() && numel() == 1, ErrCat::contract, "item() requires a one-element tensor");
        return (*data_)[0];
    }

    // Deep copy with no tape link.
    Tensor clone() const {
        Tensor r;
        r.shape_ = shape_;
        r.data_ = std::make_shared<std::vector<S>>(*data_);
        return r;
    }

    // Same buffer, no tape link.
    Tensor detached() const {
        Tensor r = *this;
        r.tape_ = nullptr;
        r.node_ = -1;
        return r;
    }

    bool finite() const {
        for (S v : *data_)
            if (!std::isfinite(double(v))) return false;
        return true;
    }

    Tape<S>* tape() const { return tape_; }
    int node() const { return node_; }
    bool tracked() const { return tape_ != nullptr && node_ >= 0; }

private:
    Shape shape_;
    std::shared_ptr<std::vector<S>> data_;
    Tape<S>* tape_ = nullptr;
    int node_ = -1;

    friend class Tape<S>;
};

template <class S>
class Tape {
public:
    using BackFn = std::function<void(Tape&, int)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers a leaf. Watching the same tensor twice on one tape
    // returns the original node so gradients accumulate in one place.
    Tensor<S> watch(const Tensor<S>& t) {
        require(t.defined(), ErrCat::contract, "watch on undefined tensor");
        if (t.tape_ == this && t.node_ >= 0) return t;
        require(t.tape_ == nullptr, ErrCat::contract, "tensor already tracked on a different tape");
        Tensor<S> r = t;
        r.tape_ = this;
        r.node_ = add_node(t.shape(), {}, nullptr);
        return r;
    }

    // Records an op result. Only tracked parents are listed; the
    // backward closure reads node_grad(self) and accumulates into
    // grad_buffer(parent).
    Tensor<S> emit(Shape shape, std::vector<S> data, std::vector<int> parents, BackFn back) {
        Tensor<S> r(std::move(shape), std::move(data));
        r.tape_ = this;
        r.node_ = add_node(r.shape(), std::move(parents), std::move(back));
        return r;
    }

    // Reverse sweep from a scalar loss. Gradients land on every node
    // that reaches the loss; other nodes are left untouched.
    void backward(const Tensor<S>& loss) {
        require(loss.tape_ == this && loss.node_ >= 0, ErrCat::contract,
                "backward target is not tracked on this tape");
        require(loss.numel() == 1, ErrCat::contract,
                "backward target must be scalar, got " + shape_str(loss.shape()));
        std::vector<char> needed(nodes_.size(), 0);
        std::vector<int> stack{loss.node_};
        needed[size_t(loss.node_)] = 1;
        while (!stack.empty()) {
            int id = stack.back();
            stack.pop_back();
            for (int p : nodes_[size_t(id)].parents) {
                if (!needed[size_t(p)]) {
                    needed[size_t(p)] = 1;
                    stack.push_back(p);
                }
            }
        }
        grad_buffer(loss.node_, 1)[0] += S(1);
        for (int id = int(nodes_.size()) - 1; id >= 0; --id) {
            if (!needed[size_t(id)] || !nodes_[size_t(id)].back) continue;
            if (grads_[size_t(id)].empty()) continue;
            nodes_[size_t(id)].back(*this, id);
        }
    }

    bool has_grad(const Tensor<S>& t) const {
        return t.tape_ == this && t.node_ >= 0 && !grads_[size_t(t.node_)].empty();
    }

    const std::vector<S>& grad_vec(const Tensor<S>& t) const {
        require(t.tape_ == this && t.node_ >= 0, ErrCat::contract, "gradient of untracked tensor");
        require(!grads_[size_t(t.node_)].empty(), ErrCat::contract,
                "gradient not populated; node did not reach the loss");
        return grads_[size_t(t.node_)];
    }

    Tensor<S> grad(const Tensor<S>& t) const { return Tensor<S>(t.shape(), grad_vec(t)); }

    const std::vector<S>& node_grad(int id) const { return grads_.at(size_t(id)); }

    std::vector<S>& grad_buffer(int id, int64_t n) {
        auto& g = grads_.at(size_t(id));
        if (g.empty()) g.assign(size_t(n), S(0));
        return g;
    }

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Shape shape;
        std::vector<int> parents;
        BackFn back;
    };

    int add_node(Shape shape, std::vector<int> parents, BackFn back) {
        nodes_.push_back(Node{std::move(shape), std::move(parents), std::move(back)});
        grads_.emplace_back();
        return int(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
    std::vector<std::vector<S>> grads_;
};

// ---- broadcasting helpers -------------------------------------------------

// Trailing-dimension alignment: shapes align from the last axis; a
// dimension pairs with an equal one or with 1.
inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    const size_t ra = a.size(), rb = b.size(), r = std::max(ra, rb);
    Shape out(r);
    for (size_t i = 0; i < r; ++i) {
        int64_t da = i < ra ? a[ra - 1 - i] : 1;
        int64_t db = i < rb ? b[rb - 1 - i] : 1;
        if (da == db || db == 1)
            out[r - 1 - i] = da;
        else if (da == 1)
            out[r - 1 - i] = db;
        else
            fail(ErrCat::shape, "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    return out;
}

inline std::vector<int64_t> natural_strides(const Shape& s) {
    std::vector<int64_t> st(s.size());
    int64_t acc = 1;
    for (int i = int(s.size()) - 1; i >= 0; --i) {
        st[size_t(i)] = acc;
        acc *= s[size_t(i)];
    }
    return st;
}

// Strides of `s` aligned to broadcast output `out`; broadcast axes get
// stride zero so the same element is revisited.
inline std::vector<int64_t> aligned_strides(const Shape& s, const Shape& out) {
    auto nat = natural_strides(s);
    std::vector<int64_t> st(out.size(), 0);
    const size_t off = out.size() - s.size();
    for (size_t i = 0; i < s.size(); ++i)
        st[off + i] = (s[i] == 1 && out[off + i] != 1) ? 0 : nat[i];
    return st;
}

// Odometer walk over `out`, yielding (linear output index, offset into
// a, offset into b).
template <class F>
inline void bc_iterate(const Shape& out, const std::vector<int64_t>& sa,
                       const std::vector<int64_t>& sb, F&& fn) {
    const int r = int(out.size());
    const int64_t n = shape_numel(out);
    if (r == 0) {
        fn(int64_t(0), int64_t(0), int64_t(0));
        return;
    }
    std::vector<int64_t> idx(static_cast<size_t>(r), 0);
    int64_t oa = 0, ob = 0;
    for (int64_t lin = 0; lin < n; ++lin) {
        fn(lin, oa, ob);
        for (int d = r - 1; d >= 0; --d) {
            idx[size_t(d)]++;
            oa += sa[size_t(d)];
            ob += sb[size_t(d)];
            if (idx[size_t(d)] < out[size_t(d)]) break;
            idx[size_t(d)] = 0;
            oa -= sa[size_t(d)] * out[size_t(d)];
            ob -= sb[size_t(d)] * out[size_t(d)];
        }
    }
}

namespace detail {

template <class S>
inline Tape<S>* tape_of(std::initializer_list<const Tensor<S>*> ts) {
    Tape<S>* tp = nullptr;
    for (const Tensor<S>* t : ts) {
        if (!t->tracked()) continue;
        if (!tp)
            tp = t->tape();
        else
            require(tp == t->tape(), ErrCat::contract, "operands tracked on different tapes");
    }
    return tp;
}

template <class S>
inline void check_defined(std::initializer_list<const Tensor<S>*> ts, const char* op) {
    for (const Tensor<S>* t : ts)
        require(t->defined(), ErrCat::contract, std::string(op) + ": undefined operand");
}

}  // namespace detail

// ---- elementwise binary ops -----------------------------------------------

// df_a / df_b return the local partials given (a, b, out golden unused).
template <class S, class FwdF, class DaF, class DbF>
Tensor<S> binary_op(const char* name, const Tensor<S>& a, const Tensor<S>& b,
                    FwdF fwd, DaF dfa, DbF dfb) {
    detail::check_defined<S>({&a, &b}, name);
    const Shape out_shape = broadcast_shape(a.shape(), b.shape());
    const auto sa = aligned_strides(a.shape(), out_shape);
    const auto sb = aligned_strides(b.shape(), out_shape);
    const int64_t n = shape_numel(out_shape);
    std::vector<S> out(static_cast<size_t>(n));
    const S* pa = a.data();
    const S* pb = b.data();
    if (a.shape() == b.shape()) {
        for (int64_t i = 0; i < n; ++i) out[size_t(i)] = fwd(pa[i], pb[i]);
    } else {
        bc_iterate(out_shape, sa, sb,
                   [&](int64_t lin, int64_t oa, int64_t ob) { out[size_t(lin)] = fwd(pa[oa], pb[ob]); });
    }
    Tape<S>* tp = detail::tape_of<S>({&a, &b});
    if (!tp) return Tensor<S>(out_shape, std::move(out));

    const int na = a.tracked() ? a.node() : -1;
    const int nb = b.tracked() ? b.node() : -1;
    std::vector<int> parents;
    if (na >= 0) parents.push_back(na);
    if (nb >= 0) parents.push_back(nb);
    Tensor<S> ac = a.detached(), bc = b.detached();
    return tp->emit(out_shape, std::move(out), std::move(parents),
                    [=](Tape<S>& T, int self) {
                        const auto& go = T.node_grad(self);
                        const S* qa = ac.data();
                        const S* qb = bc.data();
                        S* ga = na >= 0 ? T.grad_buffer(na, ac.numel()).data() : nullptr;
                        S* gb = nb >= 0 ? T.grad_buffer(nb, bc.numel()).data() : nullptr;
                        bc_iterate(out_shape, sa, sb, [&](int64_t lin, int64_t oa, int64_t ob) {
                            const S g = go[size_t(lin)];
                            if (ga) ga[oa] += g * dfa(qa[oa], qb[ob]);
                            if (gb) gb[ob] += g * dfb(qa[oa], qb[ob]);
                        });
                    });
}

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_op<S>(
        "add", a, b, [](S x, S y) { return x + y; }, [](S, S) { return S(1); },
        [](S, S) { return S(1); });
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_op<S>(
        "sub", a, b, [](S x, S y) { return x - y; }, [](S, S) { return S(1); },
        [](S, S) { return S(-1); });
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_op<S>(
        "mul", a, b, [](S x, S y) { return x * y; }, [](S, S y) { return y; },
        [](S x, S) { return x; });
}

template <class S>
Tensor<S> div(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_op<S>(
        "div", a, b, [](S x, S y) { return x / y; }, [](S, S y) { return S(1) / y; },
        [](S x, S y) { return -x / (y * y); });
}

// ---- elementwise unary ops ------------------------------------------------

template <class S, class FwdF, class DF>
Tensor<S> unary_op(const char* name, const Tensor<S>& a, FwdF fwd, DF df) {
    detail::check_defined<S>({&a}, name);
    const int64_t n = a.numel();
    std::vector<S> out(static_cast<size_t>(n));
    const S* pa = a.data();
    for (int64_t i = 0; i < n; ++i) out[size_t(i)] = fwd(pa[i]);
    if (!a.tracked()) return Tensor<S>(a.shape(), std::move(out));
    Tape<S>* tp = a.tape();
    const int na = a.node();
    Tensor<S> ac = a.detached();
    return tp->emit(a.shape(), std::move(out), {na}, [=](Tape<S>& T, int self) {
        const auto& go = T.node_grad(self);
        S* ga = T.grad_buffer(na, ac.numel()).data();
        const S* qa = ac.data();
        const int64_t m = ac.numel();
        for (int64_t i = 0; i < m; ++i) ga[i] += go[size_t(i)] * df(qa[i]);
    });
}

template <class S>
Tensor<S> silu(const Tensor<S>& a) {
    auto sig = [](S x) { return S(1) / (S(1) + std::exp(-x)); };
    return unary_op<S>(
        "silu", a, [=](S x) { return x * sig(x); },
        [=](S x) {
            const S s = sig(x);
            return s * (S(1) + x * (S(1) - s));
        });
}

template <class S>
Tensor<S> exp(const Tensor<S>& a) {
    return unary_op<S>(
        "exp", a, [](S x) { return std::exp(x); }, [](S x) { return std::exp(x); });
}

template <class S>
Tensor<S> log(const Tensor<S>& a) {
    const S* p = a.data();
    for (int64_t i = 0; i < a.numel(); ++i)
        require(p[i] > S(0), ErrCat::domain, "log of non-positive value");
    return unary_op<S>(
        "log", a, [](S x) { return std::log(x); }, [](S x) { return S(1) / x; });
}

template <class S>
Tensor<S> sqrt(const Tensor<S>& a) {
    const S* p = a.data();
    for (int64_t i = 0; i < a.numel(); ++i)
        require(p[i] >= S(0), ErrCat::domain, "sqrt of negative value");
    return unary_op<S>(
        "sqrt", a, [](S x) { return std::sqrt(x); },
        [](S x) { return S(0.5) / std::sqrt(x); });
}

template <class S>
Tensor<S> square(const Tensor<S>& a) {
    return unary_op<S>(
        "square", a, [](S x) { return x * x; }, [](S x) { return S(2) * x; });
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S c) {
    return unary_op<S>(
        "scale", a, [=](S x) { return c * x; }, [=](S) { return c; });
}

template <class S>
Tensor<S> offset(const Tensor<S>& a, S c) {
    return unary_op<S>(
        "offset", a, [=](S x) { return x + c; }, [](S) { return S(1); });
}

// ---- matmul ---------------------------------------------------------------

// Batched matrix product over the last two axes; leading axes broadcast.
template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_defined<S>({&a, &b}, "matmul");
    require(a.rank() >= 2 && b.rank() >= 2, ErrCat::shape,
            "matmul requires rank >= 2, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const int64_t m = a.dim(a.rank() - 2);
    const int64_t k = a.dim(a.rank() - 1);
    const int64_t k2 = b.dim(b.rank() - 2);
    const int64_t n = b.dim(b.rank() - 1);
    require(k == k2, ErrCat::shape,
            "matmul inner dims differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const Shape ba(a.shape().begin(), a.shape().end() - 2);
    const Shape bb(b.shape().begin(), b.shape().end() - 2);
    const Shape batch = broadcast_shape(ba, bb);
    Shape out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(n);

    // Batch-slice offsets come from the leading strides of each operand
    // aligned to the broadcast batch shape.
    auto slice_strides = [&](const Tensor<S>& t) {
        auto nat = natural_strides(t.shape());
        nat.resize(t.shape().size() - 2);
        Shape lead(t.shape().begin(), t.shape().end() - 2);
        std::vector<int64_t> st(batch.size(), 0);
        const size_t off = batch.size() - lead.size();
        for (size_t i = 0; i < lead.size(); ++i)
            st[off + i] = (lead[i] == 1 && batch[off + i] != 1) ? 0 : nat[i];
        return st;
    };
    const auto sa = slice_strides(a);
    const auto sb = slice_strides(b);

    std::vector<S> out(static_cast<size_t>(shape_numel(out_shape)));
    const S* pa = a.data();
    const S* pb = b.data();
    const int64_t mn = m * n;
    bc_iterate(batch, sa, sb, [&](int64_t lin, int64_t oa, int64_t ob) {
        blas::gemm(false, false, int(m), int(n), int(k), S(1), pa + oa, int(k), pb + ob,
                   int(n), S(0), out.data() + size_t(lin * mn), int(n));
    });

    Tape<S>* tp = detail::tape_of<S>({&a, &b});
    if (!tp) return Tensor<S>(out_shape, std::move(out));
    const int na = a.tracked() ? a.node() : -1;
    const int nb = b.tracked() ? b.node() : -1;
    std::vector<int> parents;
    if (na >= 0) parents.push_back(na);
    if (nb >= 0) parents.push_back(nb);
    Tensor<S> ac = a.detached(), bc = b.detached();
    return tp->emit(out_shape, std::move(out), std::move(parents),
                    [=](Tape<S>& T, int self) {
                        const auto& go = T.node_grad(self);
                        const S* qa = ac.data();
                        const S* qb = bc.data();
                        S* ga = na >= 0 ? T.grad_buffer(na, ac.numel()).data() : nullptr;
                        S* gb = nb >= 0 ? T.grad_buffer(nb, bc.numel()).data() : nullptr;
                        bc_iterate(batch, sa, sb, [&](int64_t lin, int64_t oa, int64_t ob) {
                            const S* gc = go.data() + size_t(lin * mn);
                            if (ga)
                                blas::gemm(false, true, int(m), int(k), int(n), S(1), gc, int(n),
                                           qb + ob, int(n), S(1), ga + oa, int(k));
                            if (gb)
                                blas::gemm(true, false, int(k), int(n), int(m), S(1), qa + oa,
                                           int(k), gc, int(n), S(1), gb + ob, int(n));
                        });
                    });
}

// ---- shape ops ------------------------------------------------------------

template <class S>
Tensor<S> reshape(const Tensor<S>& a, const Shape& new_shape) {
    detail::check_defined<S>({&a}, "reshape");
    check_shape_dims(new_shape);
    require(shape_numel(new_shape) == a.numel(), ErrCat::shape,
            "reshape " + shape_str(a.shape()) + " -> " + shape_str(new_shape) + " changes element count");
    if (!a.tracked()) {
        Tensor<S> r = a.detached();
        // Share the buffer; only the shape changes.
        return Tensor<S>(new_shape, r.vec());
    }
    Tape<S>* tp = a.tape();
    const int na = a.node();
    const int64_t n = a.numel();
    return tp->emit(new_shape, a.vec(), {na}, [=](Tape<S>& T, int self) {
        const auto& go = T.node_grad(self);
        S* ga = T.grad_buffer(na, n).data();
        for (int64_t i = 0; i < n; ++i) ga[i] += go[size_t(i)];
    });
}

template <class S>
Tensor<S> permute(const Tensor<S>& a, const std::vector<int>& perm) {
    detail::check_defined<S>({&a}, "permute");
    const int r = a.rank();
    require(int(perm.size()) == r, ErrCat::shape, "permute order size mismatch");
    std::vector<char> seen(size_t(r), 0);
    for (int p : perm) {
        require(p >= 0 && p < r && !seen[size_t(p)], ErrCat::shape, "invalid permutation");
        seen[size_t(p)] = 1;
    }
    Shape out_shape(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) out_shape[size_t(i)] = a.dim(perm[size_t(i)]);
    const auto nat = natural_strides(a.shape());
    std::vector<int64_t> src_stride(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) src_stride[size_t(i)] = nat[size_t(perm[size_t(i)])];
    const std::vector<int64_t> zero(size_t(r), 0);

    std::vector<S> out(static_cast<size_t>(a.numel()));
    const S* pa = a.data();
    bc_iterate(out_shape, src_stride, zero,
               [&](int64_t lin, int64_t oa, int64_t) { out[size_t(lin)] = pa[oa]; });
    if (!a.tracked()) return Tensor<S>(out_shape, std::move(out));
    Tape<S>* tp = a.tape();
    const int na = a.node();
    const int64_t n = a.numel();
    return tp->emit(out_shape, std::move(out), {na}, [=](Tape<S>& T, int self) {
        const auto& go = T.node_grad(self);
        S* ga = T.grad_buffer(na, n).data();
        bc_iterate(out_shape, src_stride, zero,
                   [&](int64_t lin, int64_t oa, int64_t) { ga[oa] += go[size_t(lin)]; });
    });
}

template <class S>
Tensor<S> transpose_last2(const Tensor<S>& a) {
    require(a.rank() >= 2, ErrCat::shape, "transpose_last2 requires rank >= 2");
    std::vector<int> perm(static_cast<size_t>(a.rank()));
    std::iota(perm.begin(), perm.end(), 0);
    std::swap(perm[size_t(a.rank() - 1)], perm[size_t(a.rank() - 2)]);
    return permute(a, perm);
}

template <class S>
Tensor<S> slice(const Tensor<S>& a, int axis, int64_t start, int64_t len) {
    detail::check_defined<S>({&a}, "slice");
    require(axis >= 0 && axis < a.rank(), ErrCat::shape, "slice axis out of range");
    require(start >= 0 && len > 0 && start + len <= a.dim(axis), ErrCat::shape,
            "slice window [" + std::to_string(start) + "," + std::to_string(start + len) +
                ") outside axis of size " + std::to_string(a.dim(axis)));
    Shape out_shape = a.shape();
    out_shape[size_t(axis)] = len;
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= a.dim(i);
    for (int i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
    const int64_t axis_len = a.dim(axis);

    std::vector<S> out(static_cast<size_t>(outer * len * inner));
    const S* pa = a.data();
    for (int64_t o = 0; o < outer; ++o)
        std::memcpy(out.data() + size_t(o * len * inner),
                    pa + size_t((o * axis_len + start) * inner), size_t(len * inner) * sizeof(S));
    if (!a.tracked()) return Tensor<S>(out_shape, std::move(out));
    Tape<S>* tp = a.tape();
    const int na = a.node();
    const int64_t n = a.numel();
    return tp->emit(out_shape, std::move(out), {na}, [=](Tape<S>& T, int self) {
        const auto& go = T.node_grad(self);
        S* ga = T.grad_buffer(na, n).data();
        for (int64_t o = 0; o < outer; ++o) {
            S* dst = ga + size_t((o * axis_len + start) * inner);
            const S* src = go.data() + size_t(o * len * inner);
            for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
    });
}

template <class S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, int axis) {
    require(!parts.empty(), ErrCat::shape, "concat of zero tensors");
    const Tensor<S>& first = parts.front();
    require(axis >= 0 && axis < first.rank(), ErrCat::shape, "concat axis out of range");
    int64_t axis_total = 0;
    for (const auto& p : parts) {
        require(p.defined(), ErrCat::contract, "concat: undefined operand");
        require(p.rank() == first.rank(), ErrCat::shape, "concat rank mismatch");
        for (int i = 0; i < first.rank(); ++i)
            if (i != axis)
                require(p.dim(i) == first.dim(i), ErrCat::shape,
                        "concat shape mismatch at axis " + std::to_string(i));
        axis_total += p.dim(axis);
    }
    Shape out_shape = first.shape();
    out_shape[size_t(axis)] = axis_total;
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= first.dim(i);
    for (int i = axis + 1; i < first.rank(); ++i) inner *= first.dim(i);

    std::vector<S> out(static_cast<size_t>(shape_numel(out_shape)));
    int64_t cursor = 0;
    for (const auto& p : parts) {
        const int64_t len = p.dim(axis);
        for (int64_t o = 0; o < outer; ++o)
            std::memcpy(out.data() + size_t((o * axis_total + cursor) * inner),
                        p.data() + size_t(o * len * inner), size_t(len * inner) * sizeof(S));
        cursor += len;
    }

    std::vector<const Tensor<S>*> refs;
    for (const auto& p : parts) refs.push_back(&p);
    Tape<S>* tp = nullptr;
    for (const auto& p : parts)
        if (p.tracked()) {
            if (!tp)
                tp = p.tape();
            else
                require(tp == p.tape(), ErrCat::contract, "operands tracked on different tapes");
        }
    if (!tp) return Tensor<S>(out_shape, std::move(out));

    struct Piece {
        int node;
        int64_t len;
        int64_t numel;
    };
    std::vector<Piece> pieces;
    std::vector<int> parents;
    for (const auto& p : parts) {
        pieces.push_back({p.tracked() ? p.node() : -1, p.dim(axis), p.numel()});
        if (p.tracked()) parents.push_back(p.node());
    }
    return tp->emit(out_shape, std::move(out), std::move(parents),
                    [=](Tape<S>& T, int self) {
                        const auto& go = T.node_grad(self);
                        int64_t at = 0;
                        for (const Piece& pc : pieces) {
                            if (pc.node >= 0) {
                                S* gp = T.grad_buffer(pc.node, pc.numel).data();
                                for (int64_t o = 0; o < outer; ++o) {
                                    const S* src = go.data() + size_t((o * axis_total + at) * inner);
                                    S* dst = gp + size_t(o * pc.len * inner);
                                    for (int64_t i = 0; i < pc.len * inner; ++i) dst[i] += src[i];
                                }
                            }
                            at += pc.len;
                        }
                    });
}

// ---- softmax --------------------------------------------------------------

template <class S>
Tensor<S> softmax(const Tensor<S>& a, int axis) {
    detail::check_defined<S>({&a}, "softmax");
    if (axis < 0) axis += a.rank();
    require(axis >= 0 && axis < a.rank(), ErrCat::shape, "softmax axis out of range");
    const int64_t L = a.dim(axis);
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= a.dim(i);
    for (int i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);

    std::vector<S> out(static_cast<size_t>(a.numel()));
    const S* pa = a.data();
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * L * inner + in;
            S mx = pa[base];
            for (int64_t l = 1; l < L; ++l) mx = std::max(mx, pa[base + l * inner]);
            S sum = S(0);
            for (int64_t l = 0; l < L; ++l) {
                const S e = std::exp(pa[base + l * inner] - mx);
                out[size_t(base + l * inner)] = e;
                sum += e;
            }
            for (int64_t l = 0; l < L; ++l) out[size_t(base + l * inner)] /= sum;
        }
    }
    if (!a.tracked()) return Tensor<S>(a.shape(), std::move(out));
    Tape<S>* tp = a.tape();
    const int na = a.node();
    const int64_t n = a.numel();
    Tensor<S> y(a.shape(), out);  // saved output for backward
    return tp->emit(a.shape(), std::move(out), {na}, [=](Tape<S>& T, int self) {
        const auto& go = T.node_grad(self);
        S* ga = T.grad_buffer(na, n).data();
        const S* py = y.data();
        for (int64_t o = 0; o < outer; ++o) {
            for (int64_t in = 0; in < inner; ++in) {
                const int64_t base = o * L * inner + in;
                S dot = S(0);
                for (int64_t l = 0; l < L; ++l)
                    dot += go[size_t(base + l * inner)] * py[base + l * inner];
                for (int64_t l = 0; l < L; ++l) {
                    const int64_t at = base + l * inner;
                    ga[at] += py[at] * (go[size_t(at)] - dot);
                }
            }
        }
    });
}

// ---- reductions -----------------------------------------------------------

template <class S>
Tensor<S> sum(const Tensor<S>& a) {
    detail::check_defined<S>({&a}, "sum");
    const int64_t n = a.numel();
    const S* pa = a.data();
    S acc = S(0);
    for (int64_t i = 0; i < n; ++i) acc += pa[i];
    if (!a.tracked()) return Tensor<S>::scalar(acc);
    Tape<S>* tp = a.tape();
    const int na = a.node();
    return tp->emit(Shape{}, {acc}, {na}, [=](Tape<S>& T, int self) {
        const S g = T.node_grad(self)[0];
        S* ga = T.grad_buffer(na, n).data();
        for (int64_t i = 0; i < n; ++i) ga[i] += g;
    });
}

template <class S>
Tensor<S> mean(const Tensor<S>& a) {
    detail::check_defined<S>({&a}, "mean");
    const int64_t n = a.numel();
    const S* pa = a.data();
    S acc = S(0);
    for (int64_t i = 0; i < n; ++i) acc += pa[i];
    acc /= S(n);
    if (!a.tracked()) return Tensor<S>::scalar(acc);
    Tape<S>* tp = a.tape();
    const int na = a.node();
    return tp->emit(Shape{}, {acc}, {na}, [=](Tape<S>& T, int self) {
        const S g = T.node_grad(self)[0] / S(n);
        S* ga = T.grad_buffer(na, n).data();
        for (int64_t i = 0; i < n; ++i) ga[i] += g;
    });
}

// Mean squared error between same-shaped tensors; the standard
// denoising objective is mse(eps, eps_pred).
template <class S>
Tensor<S> mse(const Tensor<S>& a, const Tensor<S>& b) {
    require(a.shape() == b.shape(), ErrCat::shape,
            "mse shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    return mean(square(sub(a, b)));
}

// ---- group normalization --------------------------------------------------

// Normalizes over the last three axes split channelwise into groups.
// Channels sit in the last axis; a group covers H x W x (C/groups)
// elements. A zero-variance group maps to the bias alone through the
// epsilon guard.
template <class S>
Tensor<S> group_norm(const Tensor<S>& x, int groups, const Tensor<S>& gamma,
                     const Tensor<S>& beta, S eps = S(1e-5)) {
    detail::check_defined<S>({&x, &gamma, &beta}, "group_norm");
    require(x.rank() >= 3, ErrCat::shape, "group_norm input must have rank >= 3");
    const int64_t C = x.dim(x.rank() - 1);
    const int64_t W = x.dim(x.rank() - 2);
    const int64_t H = x.dim(x.rank() - 3);
    require(groups > 0 && C % groups == 0, ErrCat::shape,
            "channels " + std::to_string(C) + " not divisible by groups " + std::to_string(groups));
    require(gamma.shape() == Shape{C} && beta.shape() == Shape{C}, ErrCat::shape,
            "group_norm affine parameters must have shape [C]");
    require(eps > S(0), ErrCat::domain, "group_norm epsilon must be positive");
    int64_t lead = 1;
    for (int i = 0; i < x.rank() - 3; ++i) lead *= x.dim(i);
    const int64_t Cg = C / groups;
    const int64_t HW = H * W;
    const int64_t plane = HW * C;
    const int64_t gn = HW * Cg;

    std::vector<S> out(static_cast<size_t>(x.numel()));
    std::vector<S> mean_s(static_cast<size_t>(lead * groups)), inv_s(static_cast<size_t>(lead * groups));
    const S* px = x.data();
    const S* pg = gamma.data();
    const S* pb = beta.data();
    for (int64_t l = 0; l < lead; ++l) {
        for (int64_t g = 0; g < groups; ++g) {
            const int64_t c0 = g * Cg;
            S m = S(0);
            for (int64_t p = 0; p < HW; ++p) {
                const S* row = px + size_t(l * plane + p * C + c0);
                for (int64_t c = 0; c < Cg; ++c) m += row[c];
            }
            m /= S(gn);
            S var = S(0);
            for (int64_t p = 0; p < HW; ++p) {
                const S* row = px + size_t(l * plane + p * C + c0);
                for (int64_t c = 0; c < Cg; ++c) {
                    const S d = row[c] - m;
                    var += d * d;
                }
            }
            var /= S(gn);
            const S inv = S(1) / std::sqrt(var + eps);
            mean_s[size_t(l * groups + g)] = m;
            inv_s[size_t(l * groups + g)] = inv;
            for (int64_t p = 0; p < HW; ++p) {
                const S* row = px + size_t(l * plane + p * C + c0);
                S* orow = out.data() + size_t(l * plane + p * C + c0);
                for (int64_t c = 0; c < Cg; ++c)
                    orow[c] = pg[c0 + c] * ((row[c] - m) * inv) + pb[c0 + c];
            }
        }
    }

    Tape<S>* tp = detail::tape_of<S>({&x, &gamma, &beta});
    if (!tp) return Tensor<S>(x.shape(), std::move(out));
    const int nx = x.tracked() ? x.node() : -1;
    const int ng = gamma.tracked() ? gamma.node() : -1;
    const int nb = beta.tracked() ? beta.node() : -1;
    std::vector<int> parents;
    for (int id : {nx, ng, nb})
        if (id >= 0) parents.push_back(id);
    Tensor<S> xc = x.detached(), gc = gamma.detached();
    auto means = std::make_shared<std::vector<S>>(std::move(mean_s));
    auto invs = std::make_shared<std::vector<S>>(std::move(inv_s));
    return tp->emit(x.shape(), std::move(out), std::move(parents),
                    [=](Tape<S>& T, int self) {
                        const auto& go = T.node_grad(self);
                        const S* qx = xc.data();
                        const S* qg = gc.data();
                        S* gx = nx >= 0 ? T.grad_buffer(nx, xc.numel()).data() : nullptr;
                        S* gg = ng >= 0 ? T.grad_buffer(ng, C).data() : nullptr;
                        S* gb = nb >= 0 ? T.grad_buffer(nb, C).data() : nullptr;
                        for (int64_t l = 0; l < lead; ++l) {
                            for (int64_t g = 0; g < groups; ++g) {
                                const int64_t c0 = g * Cg;
                                const S m = (*means)[size_t(l * groups + g)];
                                const S inv = (*invs)[size_t(l * groups + g)];
                                S sum_dxh = S(0), sum_dxh_xh = S(0);
                                for (int64_t p = 0; p < HW; ++p) {
                                    const int64_t base = l * plane + p * C + c0;
                                    for (int64_t c = 0; c < Cg; ++c) {
                                        const S xh = (qx[base + c] - m) * inv;
                                        const S gout = go[size_t(base + c)];
                                        const S dxh = gout * qg[c0 + c];
                                        sum_dxh += dxh;
                                        sum_dxh_xh += dxh * xh;
                                        if (gg) gg[c0 + c] += gout * xh;
                                        if (gb) gb[c0 + c] += gout;
                                    }
                                }
                                if (gx) {
                                    const S mean_dxh = sum_dxh / S(gn);
                                    const S mean_dxh_xh = sum_dxh_xh / S(gn);
                                    for (int64_t p = 0; p < HW; ++p) {
                                        const int64_t base = l * plane + p * C + c0;
                                        for (int64_t c = 0; c < Cg; ++c) {
                                            const S xh = (qx[base + c] - m) * inv;
                                            const S dxh = go[size_t(base + c)] * qg[c0 + c];
                                            gx[base + c] += inv * (dxh - mean_dxh - xh * mean_dxh_xh);
                                        }
                                    }
                                }
                            }
                        }
                    });
}

// ---- convolution ----------------------------------------------------------

namespace detail {

struct ConvDims {
    int64_t B, H, W, Ci, kh, kw, Co, ph, pw, Ho, Wo;
    int stride;
};

template <class S>
ConvDims conv_dims(const Tensor<S>& x, const Tensor<S>& k, int stride, int pad) {
    require(x.rank() == 4, ErrCat::shape, "conv2d input must be [B,H,W,C], got " + shape_str(x.shape()));
    require(k.rank() == 4, ErrCat::shape, "conv2d kernel must be [kh,kw,Ci,Co]");
    require(stride == 1 || stride == 2, ErrCat::shape, "conv2d stride must be 1 or 2");
    ConvDims d;
    d.B = x.dim(0);
    d.H = x.dim(1);
    d.W = x.dim(2);
    d.Ci = x.dim(3);
    d.kh = k.dim(0);
    d.kw = k.dim(1);
    d.Co = k.dim(3);
    d.stride = stride;
    require(k.dim(2) == d.Ci, ErrCat::shape,
            "conv2d kernel expects " + std::to_string(k.dim(2)) + " input channels, input has " +
                std::to_string(d.Ci));
    require(d.kh % 2 == 1 && d.kw % 2 == 1, ErrCat::shape, "conv2d kernel dims must be odd");
    d.ph = pad >= 0 ? pad : (d.kh - 1) / 2;
    d.pw = pad >= 0 ? pad : (d.kw - 1) / 2;
    require(d.kh <= d.H + 2 * d.ph && d.kw <= d.W + 2 * d.pw, ErrCat::shape,
            "conv2d kernel larger than padded input");
    d.Ho = (d.H + 2 * d.ph - d.kh) / stride + 1;
    d.Wo = (d.W + 2 * d.pw - d.kw) / stride + 1;
    return d;
}

template <class S>
void im2col(const S* x, const ConvDims& d, S* col) {
    const int64_t patch = d.kh * d.kw * d.Ci;
    const int64_t row_ci = d.kw * d.Ci;
    for (int64_t b = 0; b < d.B; ++b) {
        for (int64_t oh = 0; oh < d.Ho; ++oh) {
            for (int64_t ow = 0; ow < d.Wo; ++ow) {
                S* dst = col + size_t(((b * d.Ho + oh) * d.Wo + ow) * patch);
                const int64_t ih0 = oh * d.stride - d.ph;
                const int64_t iw0 = ow * d.stride - d.pw;
                for (int64_t dh = 0; dh < d.kh; ++dh) {
                    const int64_t ih = ih0 + dh;
                    S* drow = dst + size_t(dh * row_ci);
                    if (ih < 0 || ih >= d.H) {
                        std::fill(drow, drow + row_ci, S(0));
                        continue;
                    }
                    if (iw0 >= 0 && iw0 + d.kw <= d.W) {
                        std::memcpy(drow, x + size_t(((b * d.H + ih) * d.W + iw0) * d.Ci),
                                    size_t(row_ci) * sizeof(S));
                        continue;
                    }
                    for (int64_t dw = 0; dw < d.kw; ++dw) {
                        const int64_t iw = iw0 + dw;
                        S* dcell = drow + size_t(dw * d.Ci);
                        if (iw < 0 || iw >= d.W) {
                            std::fill(dcell, dcell + d.Ci, S(0));
                        } else {
                            std::memcpy(dcell, x + size_t(((b * d.H + ih) * d.W + iw) * d.Ci),
                                        size_t(d.Ci) * sizeof(S));
                        }
                    }
                }
            }
        }
    }
}

template <class S>
void col2im_add(const S* dcol, const ConvDims& d, S* dx) {
    const int64_t patch = d.kh * d.kw * d.Ci;
    for (int64_t b = 0; b < d.B; ++b) {
        for (int64_t oh = 0; oh < d.Ho; ++oh) {
            for (int64_t ow = 0; ow < d.Wo; ++ow) {
                const S* src = dcol + size_t(((b * d.Ho + oh) * d.Wo + ow) * patch);
                const int64_t ih0 = oh * d.stride - d.ph;
                const int64_t iw0 = ow * d.stride - d.pw;
                for (int64_t dh = 0; dh < d.kh; ++dh) {
                    const int64_t ih = ih0 + dh;
                    if (ih < 0 || ih >= d.H) continue;
                    for (int64_t dw = 0; dw < d.kw; ++dw) {
                        const int64_t iw = iw0 + dw;
                        if (iw < 0 || iw >= d.W) continue;
                        const S* scell = src + size_t((dh * d.kw + dw) * d.Ci);
                        S* dcell = dx + size_t(((b * d.H + ih) * d.W + iw) * d.Ci);
                        for (int64_t c = 0; c < d.Ci; ++c) dcell[c] += scell[c];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// 2-D convolution over [B,H,W,Ci] with kernel [kh,kw,Ci,Co], channels
// last. pad < 0 selects same padding; stride 2 halves even spatial dims.
// Lowered to GEMM through im2col; the column matrix is kept for the
// backward pass.
template <class S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& k, int stride = 1, int pad = -1) {
    detail::check_defined<S>({&x, &k}, "conv2d");
    const detail::ConvDims d = detail::conv_dims(x, k, stride, pad);
    const int64_t rows = d.B * d.Ho * d.Wo;
    const int64_t patch = d.kh * d.kw * d.Ci;
    auto col = std::make_shared<std::vector<S>>(size_t(rows * patch));
    detail::im2col(x.data(), d, col->data());
    std::vector<S> out(static_cast<size_t>(rows * d.Co));
    blas::gemm(false, false, int(rows), int(d.Co), int(patch), S(1), col->data(), int(patch),
               k.data(), int(d.Co), S(0), out.data(), int(d.Co));
    const Shape out_shape{d.B, d.Ho, d.Wo, d.Co};

    Tape<S>* tp = detail::tape_of<S>({&x, &k});
    if (!tp) return Tensor<S>(out_shape, std::move(out));
    const int nx = x.tracked() ? x.node() : -1;
    const int nk = k.tracked() ? k.node() : -1;
    std::vector<int> parents;
    for (int id : {nx, nk})
        if (id >= 0) parents.push_back(id);
    Tensor<S> kc = k.detached();
    const int64_t xn = x.numel();
    return tp->emit(out_shape, std::move(out), std::move(parents),
                    [=](Tape<S>& T, int self) {
                        const auto& go = T.node_grad(self);
                        if (nk >= 0) {
                            S* gk = T.grad_buffer(nk, kc.numel()).data();
                            blas::gemm(true, false, int(patch), int(d.Co), int(rows), S(1),
                                       col->data(), int(patch), go.data(), int(d.Co), S(1), gk,
                                       int(d.Co));
                        }
                        if (nx >= 0) {
                            std::vector<S> dcol(static_cast<size_t>(rows * patch));
                            blas::gemm(false, true, int(rows), int(patch), int(d.Co), S(1),
                                       go.data(), int(d.Co), kc.data(), int(d.Co), S(0),
                                       dcol.data(), int(patch));
                            S* gx = T.grad_buffer(nx, xn).data();
                            detail::col2im_add(dcol.data(), d, gx);
                        }
                    });
}

// Nearest-neighbour 2x spatial upsampling of [B,H,W,C].
template <class S>
Tensor<S> upsample2x(const Tensor<S>& x) {
    detail::check_defined<S>({&x}, "upsample2x");
    require(x.rank() == 4, ErrCat::shape, "upsample2x input must be [B,H,W,C]");
    const int64_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    const Shape out_shape{B, 2 * H, 2 * W, C};
    std::vector<S> out(static_cast<size_t>(shape_numel(out_shape)));
    const S* px = x.data();
    for (int64_t b = 0; b < B; ++b)
        for (int64_t h = 0; h < 2 * H; ++h)
            for (int64_t w = 0; w < 2 * W; ++w)
                std::memcpy(out.data() + size_t(((b * 2 * H + h) * 2 * W + w) * C),
                            px + size_t(((b * H + h / 2) * W + w / 2) * C), size_t(C) * sizeof(S));
    if (!x.tracked()) return Tensor<S>(out_shape, std::move(out));
    Tape<S>* tp = x.tape();
    const int nx = x.node();
    const int64_t n = x.numel();
    return tp->emit(out_shape, std::move(out), {nx}, [=](Tape<S>& T, int self) {
        const auto& go = T.node_grad(self);
        S* gx = T.grad_buffer(nx, n).data();
        for (int64_t b = 0; b < B; ++b)
            for (int64_t h = 0; h < 2 * H; ++h)
                for (int64_t w = 0; w < 2 * W; ++w) {
                    const S* src = go.data() + size_t(((b * 2 * H + h) * 2 * W + w) * C);
                    S* dst = gx + size_t(((b * H + h / 2) * W + w / 2) * C);
                    for (int64_t c = 0; c < C; ++c) dst[c] += src[c];
                }
    });
}

// ---- lookup ops -----------------------------------------------------------

// Row gather from an embedding table [V,D]; backward scatter-adds.
template <class S>
Tensor<S> embedding_rows(const Tensor<S>& table, const std::vector<int32_t>& ids) {
    detail::check_defined<S>({&table}, "embedding_rows");
    require(table.rank() == 2, ErrCat::shape, "embedding table must be [V,D]");
    require(!ids.empty(), ErrCat::shape, "embedding_rows with empty id list");
    const int64_t V = table.dim(0), D = table.dim(1);
    for (int32_t id : ids)
        require(id >= 0 && int64_t(id) < V, ErrCat::input,
                "token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(V));
    const int64_t L = int64_t(ids.size());
    std::vector<S> out(static_cast<size_t>(L * D));
    for (int64_t i = 0; i < L; ++i)
        std::memcpy(out.data() + size_t(i * D), table.data() + size_t(int64_t(ids[size_t(i)]) * D),
                    size_t(D) * sizeof(S));
    const Shape out_shape{L, D};
    if (!table.tracked()) return Tensor<S>(out_shape, std::move(out));
    Tape<S>* tp = table.tape();
    const int nt = table.node();
    const int64_t n = table.numel();
    auto ids_copy = std::make_shared<std::vector<int32_t>>(ids);
    return tp->emit(out_shape, std::move(out), {nt}, [=](Tape<S>& T, int self) {
        const auto& go = T.node_grad(self);
        S* gt = T.grad_buffer(nt, n).data();
        for (int64_t i = 0; i < L; ++i) {
            S* dst = gt + size_t(int64_t((*ids_copy)[size_t(i)]) * D);
            const S* src = go.data() + size_t(i * D);
            for (int64_t dcol = 0; dcol < D; ++dcol) dst[dcol] += src[dcol];
        }
    });
}

// Expands a learned relative-position table [heads, 2F-1] into the
// additive attention bias [heads, F, F]; entry (i, j) reads offset
// i - j + F - 1.
template <class S>
Tensor<S> relpos_bias(const Tensor<S>& table, int64_t frames) {
    detail::check_defined<S>({&table}, "relpos_bias");
    require(table.rank() == 2, ErrCat::shape, "relative position table must be [heads, 2F-1]");
    require(frames >= 1, ErrCat::shape, "relpos_bias requires frames >= 1");
    const int64_t heads = table.dim(0), span = table.dim(1);
    require(span >= 2 * frames - 1, ErrCat::shape,
            "relative position table span " + std::to_string(span) + " too small for " +
                std::to_string(frames) + " frames");
    const Shape out_shape{heads, frames, frames};
    std::vector<S> out(static_cast<size_t>(heads * frames * frames));
    const S* pt = table.data();
    for (int64_t h = 0; h < heads; ++h)
        for (int64_t i = 0; i < frames; ++i)
            for (int64_t j = 0; j < frames; ++j)
                out[size_t((h * frames + i) * frames + j)] = pt[size_t(h * span + (i - j) + frames - 1)];
    if (!table.tracked()) return Tensor<S>(out_shape, std::move(out));
    Tape<S>* tp = table.tape();
    const int nt = table.node();
    const int64_t n = table.numel();
    return tp->emit(out_shape, std::move(out), {nt}, [=](Tape<S>& T, int self) {
        const auto& go = T.node_grad(self);
        S* gt = T.grad_buffer(nt, n).data();
        for (int64_t h = 0; h < heads; ++h)
            for (int64_t i = 0; i < frames; ++i)
                for (int64_t j = 0; j < frames; ++j)
                    gt[size_t(h * span + (i - j) + frames - 1)] +=
                        go[size_t((h * frames + i) * frames + j)];
    });
}

// ---- attention ------------------------------------------------------------

// Scaled dot-product attention. q: [..., Lq, D], k/v: [..., Lk, D];
// leading axes broadcast. The optional bias broadcasts against the
// logits [..., Lq, Lk]. Composite: differentiability comes from the
// underlying ops.
template <class S>
Tensor<S> attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                    const Tensor<S>* bias = nullptr) {
    detail::check_defined<S>({&q, &k, &v}, "attention");
    require(q.rank() >= 2 && k.rank() >= 2 && v.rank() >= 2, ErrCat::shape,
            "attention operands must have rank >= 2");
    const int64_t dq = q.dim(q.rank() - 1);
    require(dq == k.dim(k.rank() - 1), ErrCat::shape, "attention q/k feature dims differ");
    require(k.dim(k.rank() - 2) == v.dim(v.rank() - 2), ErrCat::shape,
            "attention k/v token counts differ");
    Tensor<S> logits = matmul(q, transpose_last2(k));
    logits = scale(logits, S(1.0 / std::sqrt(double(dq))));
    if (bias) logits = add(logits, *bias);
    Tensor<S> w = softmax(logits, -1);
    return matmul(w, v);
}

// ---- random tensors -------------------------------------------------------

template <class S>
Tensor<S> randn(const Shape& shape, Rng& rng, double stddev = 1.0) {
    Tensor<S> t = Tensor<S>::zeros(shape);
    rng.fill_normal(t.data(), t.numel(), stddev);
    return t;
}

// ---- optimizer ------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class S>
struct AdamState {
    int64_t step = 0;
    std::map<std::string, std::vector<double>> m, v;
};

// Bias-corrected Adam over a named parameter map. Only names present in
// `grads` are touched; everything else keeps its exact bits, which is
// how branch-restricted fine-tuning masks parameter subsets. Moment
// arithmetic runs in double for stable, type-independent updates.
template <class S>
void adam_step(std::map<std::string, Tensor<S>>& params,
               const std::map<std::string, std::vector<S>>& grads, AdamState<S>& st,
               const AdamConfig& cfg) {
    require(cfg.lr > 0 && cfg.beta1 >= 0 && cfg.beta1 < 1 && cfg.beta2 >= 0 && cfg.beta2 < 1 &&
                cfg.eps > 0,
            ErrCat::config, "invalid Adam hyperparameters");
    st.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(st.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(st.step));
    for (const auto& [name, g] : grads) {
        auto it = params.find(name);
        require(it != params.end(), ErrCat::contract, "gradient for unknown parameter " + name);
        Tensor<S>& p = it->second;
        require(int64_t(g.size()) == p.numel(), ErrCat::shape,
                "gradient size mismatch for parameter " + name);
        auto& m = st.m[name];
        auto& v = st.v[name];
        if (m.empty()) m.assign(g.size(), 0.0);
        if (v.empty()) v.assign(g.size(), 0.0);
        S* pw = p.data();
        for (size_t i = 0; i < g.size(); ++i) {
            const double gi = double(g[i]);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mh = m[i] / bc1;
            const double vh = v[i] / bc2;
            pw[i] = S(double(pw[i]) - cfg.lr * mh / (std::sqrt(vh) + cfg.eps));
        }
    }
}

}  // namespace motionlab
