#pragma once

#include <cblas.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "vortexlab/tensor.hpp"

namespace vortexlab {

namespace detail {

template <typename T>
void gemm(bool ta, bool tb, int m, int n, int k, T alpha, const T* a, int lda, const T* b,
          int ldb, T beta, T* c, int ldc);

template <>
inline void gemm<float>(bool ta, bool tb, int m, int n, int k, float alpha, const float* a,
                        int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
inline void gemm<double>(bool ta, bool tb, int m, int n, int k, double alpha, const double* a,
                         int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

} // namespace detail

/// Reverse-mode autodiff over a per-step recorded tape. Nodes are created in
/// topological order by construction; backward walks the records in exact
/// reverse order. Ops are tensor-granular (the matmuls go through BLAS).
template <typename T>
class Tape {
public:
    enum class Op {
        Leaf,
        Matmul,    // A[m,k] * B[k,n]
        MatmulNT,  // A[m,k] * B[n,k]^T
        MatmulTN,  // A[k,m]^T * B[k,n]
        Affine,    // x[m,k] * W[n,k]^T + b, optional fused relu
        Add,
        Sub,
        Mul,
        AddRowVec, // A[m,n] + b[1,n]
        Scale,
        AddConst,
        Relu,
        Tanh,
        Sigmoid,
        SegmentMax,
        MeanRows,
        SliceRows,
        SliceCols,
        ConcatRows,
        L2NormRows,
        RowLogSumExp,
        Gather,
        SumAll,
        MeanAll,
        DivByScalar, // A / (s + eps)
    };

    struct Node {
        Op op;
        std::vector<int> in;
        Tensor<T> value;
        bool requires_grad = false;
        std::vector<int> aux_i;
        std::vector<T> aux_t;
        T aux0 = T(0);
    };

    std::vector<Node> nodes;

    int size() const { return static_cast<int>(nodes.size()); }
    const Tensor<T>& val(int id) const { return at(id).value; }

    int leaf(Tensor<T> v, bool requires_grad = false) {
        Node n;
        n.op = Op::Leaf;
        n.value = std::move(v);
        n.requires_grad = requires_grad;
        return push(std::move(n));
    }

    int matmul(int a, int b) {
        const auto& A = val(a);
        const auto& B = val(b);
        require(A.cols() == B.rows(), "matmul: inner dims", a, b);
        Tensor<T> out = Tensor<T>::zeros({A.rows(), B.cols()});
        detail::gemm<T>(false, false, A.rows(), B.cols(), A.cols(), T(1), A.data.data(),
                        A.cols(), B.data.data(), B.cols(), T(0), out.data.data(), out.cols());
        return push(make(Op::Matmul, {a, b}, std::move(out)));
    }

    // A[m,k] * B[n,k]^T; the natural call for row-major weights stored [out,in]
    int matmul_nt(int a, int b) {
        const auto& A = val(a);
        const auto& B = val(b);
        require(A.cols() == B.cols(), "matmul_nt: inner dims", a, b);
        Tensor<T> out = Tensor<T>::zeros({A.rows(), B.rows()});
        detail::gemm<T>(false, true, A.rows(), B.rows(), A.cols(), T(1), A.data.data(),
                        A.cols(), B.data.data(), B.cols(), T(0), out.data.data(), out.cols());
        return push(make(Op::MatmulNT, {a, b}, std::move(out)));
    }

    // A[k,m]^T * B[k,n]
    int matmul_tn(int a, int b) {
        const auto& A = val(a);
        const auto& B = val(b);
        require(A.rows() == B.rows(), "matmul_tn: inner dims", a, b);
        Tensor<T> out = Tensor<T>::zeros({A.cols(), B.cols()});
        detail::gemm<T>(true, false, A.cols(), B.cols(), A.rows(), T(1), A.data.data(),
                        A.cols(), B.data.data(), B.cols(), T(0), out.data.data(), out.cols());
        return push(make(Op::MatmulTN, {a, b}, std::move(out)));
    }

    /// Fused x*W^T + b with optional relu; the workhorse of the per-point
    /// MLP, where separate bias/activation nodes would double memory traffic.
    int affine(int x, int w, int b, bool with_relu) {
        const auto& X = val(x);
        const auto& W = val(w);
        const auto& B = val(b);
        require(X.cols() == W.cols(), "affine: inner dims", x, w);
        require(B.rows() == 1 && B.cols() == W.rows(), "affine: bias shape", b, w);
        Tensor<T> out = Tensor<T>::zeros({X.rows(), W.rows()});
        detail::gemm<T>(false, true, X.rows(), W.rows(), X.cols(), T(1), X.data.data(), X.cols(),
                        W.data.data(), W.cols(), T(0), out.data.data(), out.cols());
        const int n = out.cols();
        for (int r = 0; r < out.rows(); ++r) {
            T* row = out.data.data() + static_cast<size_t>(r) * n;
            for (int c = 0; c < n; ++c) row[c] += B.data[c];
        }
        if (with_relu)
            for (auto& v : out.data) v = v > T(0) ? v : T(0);
        Node node = make(Op::Affine, {x, w, b}, std::move(out));
        node.aux_i = {with_relu ? 1 : 0};
        return push(std::move(node));
    }

    int add(int a, int b) { return ew(Op::Add, a, b); }
    int sub(int a, int b) { return ew(Op::Sub, a, b); }
    int mul(int a, int b) { return ew(Op::Mul, a, b); }

    int add_rowvec(int a, int b) {
        const auto& A = val(a);
        const auto& B = val(b);
        require(B.rows() == 1 && B.cols() == A.cols(), "add_rowvec: bias shape", a, b);
        Tensor<T> out = A;
        for (int r = 0; r < A.rows(); ++r)
            for (int c = 0; c < A.cols(); ++c) out.at(r, c) += B.data[c];
        return push(make(Op::AddRowVec, {a, b}, std::move(out)));
    }

    int scale(int a, T c) {
        Tensor<T> out = val(a);
        for (auto& v : out.data) v *= c;
        Node n = make(Op::Scale, {a}, std::move(out));
        n.aux0 = c;
        return push(std::move(n));
    }

    int add_const(int a, T c) {
        Tensor<T> out = val(a);
        for (auto& v : out.data) v += c;
        return push(make(Op::AddConst, {a}, std::move(out)));
    }

    int relu(int a) {
        Tensor<T> out = val(a);
        for (auto& v : out.data) v = v > T(0) ? v : T(0);
        return push(make(Op::Relu, {a}, std::move(out)));
    }

    int tanh_(int a) {
        Tensor<T> out = val(a);
        for (auto& v : out.data) v = std::tanh(v);
        return push(make(Op::Tanh, {a}, std::move(out)));
    }

    int sigmoid_(int a) {
        Tensor<T> out = val(a);
        for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
        return push(make(Op::Sigmoid, {a}, std::move(out)));
    }

    /// Max over each contiguous row segment; argmax ties go to the lowest row.
    /// seg_starts has one entry per segment; segments end at the next start.
    int segment_max(int a, const std::vector<int>& seg_starts) {
        const auto& A = val(a);
        const int S = static_cast<int>(seg_starts.size());
        const int C = A.cols();
        require(S > 0 && seg_starts[0] == 0, "segment_max: first segment must start at 0", a, a);
        Tensor<T> out = Tensor<T>::zeros({S, C});
        Node n = make(Op::SegmentMax, {a}, Tensor<T>{});
        n.aux_i.reserve(static_cast<size_t>(S) + 1 + static_cast<size_t>(S) * C);
        n.aux_i = seg_starts;
        n.aux_i.push_back(A.rows());
        for (int s = 0; s < S; ++s) {
            const int r0 = n.aux_i[s], r1 = n.aux_i[s + 1];
            require(r1 > r0, "segment_max: empty segment", a, a);
            for (int c = 0; c < C; ++c) {
                int arg = r0;
                T best = A.at(r0, c);
                for (int r = r0 + 1; r < r1; ++r) {
                    if (A.at(r, c) > best) {
                        best = A.at(r, c);
                        arg = r;
                    }
                }
                out.at(s, c) = best;
                n.aux_i.push_back(arg);
            }
        }
        n.value = std::move(out);
        return push(std::move(n));
    }

    int mean_rows(int a) {
        const auto& A = val(a);
        require(A.rows() > 0, "mean_rows: empty", a, a);
        Tensor<T> out = Tensor<T>::zeros({1, A.cols()});
        for (int r = 0; r < A.rows(); ++r)
            for (int c = 0; c < A.cols(); ++c) out.data[c] += A.at(r, c);
        for (auto& v : out.data) v /= static_cast<T>(A.rows());
        return push(make(Op::MeanRows, {a}, std::move(out)));
    }

    int slice_rows(int a, int r0, int r1) {
        const auto& A = val(a);
        require(0 <= r0 && r0 < r1 && r1 <= A.rows(), "slice_rows: bounds", a, a);
        Tensor<T> out = Tensor<T>::zeros({r1 - r0, A.cols()});
        std::copy(A.data.begin() + static_cast<size_t>(r0) * A.cols(),
                  A.data.begin() + static_cast<size_t>(r1) * A.cols(), out.data.begin());
        Node n = make(Op::SliceRows, {a}, std::move(out));
        n.aux_i = {r0, r1};
        return push(std::move(n));
    }

    int slice_cols(int a, int c0, int c1) {
        const auto& A = val(a);
        require(0 <= c0 && c0 < c1 && c1 <= A.cols(), "slice_cols: bounds", a, a);
        Tensor<T> out = Tensor<T>::zeros({A.rows(), c1 - c0});
        for (int r = 0; r < A.rows(); ++r)
            for (int c = c0; c < c1; ++c) out.at(r, c - c0) = A.at(r, c);
        Node n = make(Op::SliceCols, {a}, std::move(out));
        n.aux_i = {c0, c1};
        return push(std::move(n));
    }

    int concat_rows(const std::vector<int>& ids) {
        require(!ids.empty(), "concat_rows: empty input list", 0, 0);
        const int C = val(ids[0]).cols();
        int R = 0;
        for (int id : ids) {
            require(val(id).cols() == C, "concat_rows: column mismatch", id, ids[0]);
            R += val(id).rows();
        }
        Tensor<T> out = Tensor<T>::zeros({R, C});
        Node n = make(Op::ConcatRows, ids, Tensor<T>{});
        int r = 0;
        for (int id : ids) {
            const auto& A = val(id);
            n.aux_i.push_back(r);
            std::copy(A.data.begin(), A.data.end(),
                      out.data.begin() + static_cast<size_t>(r) * C);
            r += A.rows();
        }
        n.value = std::move(out);
        return push(std::move(n));
    }

    /// Row-wise x / (||x|| + eps).
    int l2norm_rows(int a, T eps) {
        const auto& A = val(a);
        Tensor<T> out = A;
        Node n = make(Op::L2NormRows, {a}, Tensor<T>{});
        n.aux0 = eps;
        n.aux_t.resize(A.rows());
        for (int r = 0; r < A.rows(); ++r) {
            T s2 = T(0);
            for (int c = 0; c < A.cols(); ++c) s2 += A.at(r, c) * A.at(r, c);
            const T nrm = std::sqrt(s2);
            n.aux_t[r] = nrm;
            const T inv = T(1) / (nrm + eps);
            for (int c = 0; c < A.cols(); ++c) out.at(r, c) *= inv;
        }
        n.value = std::move(out);
        return push(std::move(n));
    }

    int row_logsumexp(int a) {
        const auto& A = val(a);
        Tensor<T> out = Tensor<T>::zeros({A.rows(), 1});
        for (int r = 0; r < A.rows(); ++r) {
            T m = A.at(r, 0);
            for (int c = 1; c < A.cols(); ++c) m = std::max(m, A.at(r, c));
            T s = T(0);
            for (int c = 0; c < A.cols(); ++c) s += std::exp(A.at(r, c) - m);
            out.at(r, 0) = m + std::log(s);
        }
        return push(make(Op::RowLogSumExp, {a}, std::move(out)));
    }

    /// Pick flat element positions into a column vector.
    int gather(int a, const std::vector<int>& flat_idx) {
        const auto& A = val(a);
        Tensor<T> out = Tensor<T>::zeros({static_cast<int>(flat_idx.size()), 1});
        for (size_t i = 0; i < flat_idx.size(); ++i) {
            require(flat_idx[i] >= 0 && flat_idx[i] < A.numel(), "gather: index", a, a);
            out.data[i] = A.data[flat_idx[i]];
        }
        Node n = make(Op::Gather, {a}, std::move(out));
        n.aux_i = flat_idx;
        return push(std::move(n));
    }

    int sum_all(int a) {
        T s = T(0);
        for (T v : val(a).data) s += v;
        return push(make(Op::SumAll, {a}, Tensor<T>::scalar(s)));
    }

    int mean_all(int a) {
        T s = T(0);
        for (T v : val(a).data) s += v;
        return push(make(Op::MeanAll, {a}, Tensor<T>::scalar(s / static_cast<T>(val(a).numel()))));
    }

    /// A / (s + eps), s a scalar node.
    int div_by_scalar(int a, int s, T eps) {
        const auto& A = val(a);
        const auto& S = val(s);
        require(S.is_scalar(), "div_by_scalar: divisor must be scalar", s, s);
        const T d = S.data[0] + eps;
        Tensor<T> out = A;
        for (auto& v : out.data) v /= d;
        Node n = make(Op::DivByScalar, {a, s}, std::move(out));
        n.aux0 = eps;
        return push(std::move(n));
    }

    /// Gradients of a scalar loss w.r.t. every node; entries stay empty for
    /// nodes off the path. Gradients of leaves not reaching the loss are zero.
    std::vector<Tensor<T>> backward(int loss_id) {
        const Node& loss = at(loss_id);
        if (!loss.value.is_scalar()) throw std::invalid_argument("backward: loss must be scalar");
        std::vector<Tensor<T>> g(nodes.size());
        g[loss_id] = Tensor<T>::scalar(T(1));
        for (int i = loss_id; i >= 0; --i) {
            if (g[i].data.empty()) continue;
            const Node& n = nodes[i];
            if (!n.requires_grad) continue;
            step_back(n, g[i], g);
        }
        return g;
    }

    /// Gradient for one node; zeros if the node never received any.
    Tensor<T> grad_of(const std::vector<Tensor<T>>& g, int id) const {
        if (!g[id].data.empty()) return g[id];
        return Tensor<T>::zeros(val(id).shape);
    }

private:
    const Node& at(int id) const {
        if (id < 0 || id >= size()) throw std::out_of_range("tape: node id not on tape");
        return nodes[id];
    }

    Node make(Op op, std::vector<int> in, Tensor<T> v) {
        Node n;
        n.op = op;
        n.in = std::move(in);
        n.value = std::move(v);
        for (int i : n.in) n.requires_grad = n.requires_grad || at(i).requires_grad;
        return n;
    }

    int push(Node n) {
        nodes.push_back(std::move(n));
        return size() - 1;
    }

    int ew(Op op, int a, int b) {
        const auto& A = val(a);
        const auto& B = val(b);
        require(A.same_shape(B), "elementwise: shape mismatch", a, b);
        Tensor<T> out = A;
        switch (op) {
            case Op::Add:
                for (long i = 0; i < out.numel(); ++i) out.data[i] += B.data[i];
                break;
            case Op::Sub:
                for (long i = 0; i < out.numel(); ++i) out.data[i] -= B.data[i];
                break;
            case Op::Mul:
                for (long i = 0; i < out.numel(); ++i) out.data[i] *= B.data[i];
                break;
            default:
                throw std::logic_error("ew: bad op");
        }
        return push(make(op, {a, b}, std::move(out)));
    }

    void require(bool ok, const char* what, int a, int b) const {
        if (!ok)
            throw std::invalid_argument(std::string("tape: ") + what + " (nodes " +
                                        std::to_string(a) + ", " + std::to_string(b) + ")");
    }

    void acc(std::vector<Tensor<T>>& g, int id, const Tensor<T>& delta) const {
        if (!at(id).requires_grad) return;
        if (g[id].data.empty()) {
            g[id] = delta;
            return;
        }
        for (long i = 0; i < delta.numel(); ++i) g[id].data[i] += delta.data[i];
    }

    Tensor<T>& grad_buf(std::vector<Tensor<T>>& g, int id) const {
        if (g[id].data.empty()) g[id] = Tensor<T>::zeros(val(id).shape);
        return g[id];
    }

    void step_back(const Node& n, const Tensor<T>& go, std::vector<Tensor<T>>& g) {
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Matmul: {
                const auto& A = val(n.in[0]);
                const auto& B = val(n.in[1]);
                if (at(n.in[0]).requires_grad) {
                    auto& da = grad_buf(g, n.in[0]);
                    detail::gemm<T>(false, true, A.rows(), A.cols(), B.cols(), T(1),
                                    go.data.data(), go.cols(), B.data.data(), B.cols(), T(1),
                                    da.data.data(), da.cols());
                }
                if (at(n.in[1]).requires_grad) {
                    auto& db = grad_buf(g, n.in[1]);
                    detail::gemm<T>(true, false, B.rows(), B.cols(), A.rows(), T(1),
                                    A.data.data(), A.cols(), go.data.data(), go.cols(), T(1),
                                    db.data.data(), db.cols());
                }
                break;
            }
            case Op::MatmulNT: {
                const auto& A = val(n.in[0]);
                const auto& B = val(n.in[1]);
                if (at(n.in[0]).requires_grad) {
                    auto& da = grad_buf(g, n.in[0]);
                    detail::gemm<T>(false, false, A.rows(), A.cols(), B.rows(), T(1),
                                    go.data.data(), go.cols(), B.data.data(), B.cols(), T(1),
                                    da.data.data(), da.cols());
                }
                if (at(n.in[1]).requires_grad) {
                    auto& db = grad_buf(g, n.in[1]);
                    detail::gemm<T>(true, false, go.cols(), B.cols(), A.rows(), T(1),
                                    go.data.data(), go.cols(), A.data.data(), A.cols(), T(1),
                                    db.data.data(), db.cols());
                }
                break;
            }
            case Op::MatmulTN: {
                const auto& A = val(n.in[0]);
                const auto& B = val(n.in[1]);
                if (at(n.in[0]).requires_grad) {
                    auto& da = grad_buf(g, n.in[0]);
                    detail::gemm<T>(false, true, A.rows(), A.cols(), go.cols(), T(1),
                                    B.data.data(), B.cols(), go.data.data(), go.cols(), T(1),
                                    da.data.data(), da.cols());
                }
                if (at(n.in[1]).requires_grad) {
                    auto& db = grad_buf(g, n.in[1]);
                    detail::gemm<T>(false, false, A.rows(), B.cols(), A.cols(), T(1),
                                    A.data.data(), A.cols(), go.data.data(), go.cols(), T(1),
                                    db.data.data(), db.cols());
                }
                break;
            }
            case Op::Affine: {
                const auto& X = val(n.in[0]);
                const auto& W = val(n.in[1]);
                const bool with_relu = n.aux_i[0] != 0;
                Tensor<T> masked;
                const Tensor<T>* dpre = &go;
                if (with_relu) {
                    masked = go;
                    for (long i = 0; i < masked.numel(); ++i)
                        if (n.value.data[i] <= T(0)) masked.data[i] = T(0);
                    dpre = &masked;
                }
                if (at(n.in[0]).requires_grad) {
                    auto& dx = grad_buf(g, n.in[0]);
                    detail::gemm<T>(false, false, X.rows(), X.cols(), W.rows(), T(1),
                                    dpre->data.data(), dpre->cols(), W.data.data(), W.cols(),
                                    T(1), dx.data.data(), dx.cols());
                }
                if (at(n.in[1]).requires_grad) {
                    auto& dw = grad_buf(g, n.in[1]);
                    detail::gemm<T>(true, false, W.rows(), W.cols(), X.rows(), T(1),
                                    dpre->data.data(), dpre->cols(), X.data.data(), X.cols(),
                                    T(1), dw.data.data(), dw.cols());
                }
                if (at(n.in[2]).requires_grad) {
                    auto& db = grad_buf(g, n.in[2]);
                    for (int r = 0; r < dpre->rows(); ++r)
                        for (int c = 0; c < dpre->cols(); ++c) db.data[c] += dpre->at(r, c);
                }
                break;
            }
            case Op::Add:
                acc(g, n.in[0], go);
                acc(g, n.in[1], go);
                break;
            case Op::Sub: {
                acc(g, n.in[0], go);
                if (at(n.in[1]).requires_grad) {
                    auto& db = grad_buf(g, n.in[1]);
                    for (long i = 0; i < go.numel(); ++i) db.data[i] -= go.data[i];
                }
                break;
            }
            case Op::Mul: {
                const auto& A = val(n.in[0]);
                const auto& B = val(n.in[1]);
                if (at(n.in[0]).requires_grad) {
                    auto& da = grad_buf(g, n.in[0]);
                    for (long i = 0; i < go.numel(); ++i) da.data[i] += go.data[i] * B.data[i];
                }
                if (at(n.in[1]).requires_grad) {
                    auto& db = grad_buf(g, n.in[1]);
                    for (long i = 0; i < go.numel(); ++i) db.data[i] += go.data[i] * A.data[i];
                }
                break;
            }
            case Op::AddRowVec: {
                acc(g, n.in[0], go);
                if (at(n.in[1]).requires_grad) {
                    auto& db = grad_buf(g, n.in[1]);
                    for (int r = 0; r < go.rows(); ++r)
                        for (int c = 0; c < go.cols(); ++c) db.data[c] += go.at(r, c);
                }
                break;
            }
            case Op::Scale: {
                if (at(n.in[0]).requires_grad) {
                    auto& da = grad_buf(g, n.in[0]);
                    for (long i = 0; i < go.numel(); ++i) da.data[i] += n.aux0 * go.data[i];
                }
                break;
            }
            case Op::AddConst:
                acc(g, n.in[0], go);
                break;
            case Op::Relu: {
                if (at(n.in[0]).requires_grad) {
                    auto& da = grad_buf(g, n.in[0]);
                    for (long i = 0; i < go.numel(); ++i)
                        if (n.value.data[i] > T(0)) da.data[i] += go.data[i];
                }
                break;
            }
            case Op::Tanh: {
                if (at(n.in[0]).requires_grad) {
                    auto& da = grad_buf(g, n.in[0]);
                    for (long i = 0; i < go.numel(); ++i) {
                        const T y = n.value.data[i];
                        da.data[i] += go.data[i] * (T(1) - y * y);
                    }
                }
                break;
            }
            case Op::Sigmoid: {
                if (at(n.in[0]).requires_grad) {
                    auto& da = grad_buf(g, n.in[0]);
                    for (long i = 0; i < go.numel(); ++i) {
                        const T y = n.value.data[i];
                        da.data[i] += go.data[i] * y * (T(1) - y);
                    }
                }
                break;
            }
            case Op::SegmentMax: {
                if (!at(n.in[0]).requires_grad) break;
                auto& da = grad_buf(g, n.in[0]);
                const int S = n.value.rows();
                const int C = n.value.cols();
                const int* argmax = n.aux_i.data() + S + 1;
                for (int s = 0; s < S; ++s)
                    for (int c = 0; c < C; ++c)
                        da.at(argmax[static_cast<size_t>(s) * C + c], c) += go.at(s, c);
                break;
            }
            case Op::MeanRows: {
                if (!at(n.in[0]).requires_grad) break;
                auto& da = grad_buf(g, n.in[0]);
                const T inv = T(1) / static_cast<T>(da.rows());
                for (int r = 0; r < da.rows(); ++r)
                    for (int c = 0; c < da.cols(); ++c) da.at(r, c) += go.data[c] * inv;
                break;
            }
            case Op::SliceRows: {
                if (!at(n.in[0]).requires_grad) break;
                auto& da = grad_buf(g, n.in[0]);
                const int r0 = n.aux_i[0];
                for (int r = 0; r < go.rows(); ++r)
                    for (int c = 0; c < go.cols(); ++c) da.at(r0 + r, c) += go.at(r, c);
                break;
            }
            case Op::SliceCols: {
                if (!at(n.in[0]).requires_grad) break;
                auto& da = grad_buf(g, n.in[0]);
                const int c0 = n.aux_i[0];
                for (int r = 0; r < go.rows(); ++r)
                    for (int c = 0; c < go.cols(); ++c) da.at(r, c0 + c) += go.at(r, c);
                break;
            }
            case Op::ConcatRows: {
                for (size_t i = 0; i < n.in.size(); ++i) {
                    if (!at(n.in[i]).requires_grad) continue;
                    auto& da = grad_buf(g, n.in[i]);
                    const int r0 = n.aux_i[i];
                    for (int r = 0; r < da.rows(); ++r)
                        for (int c = 0; c < da.cols(); ++c) da.at(r, c) += go.at(r0 + r, c);
                }
                break;
            }
            case Op::L2NormRows: {
                if (!at(n.in[0]).requires_grad) break;
                auto& da = grad_buf(g, n.in[0]);
                const auto& X = val(n.in[0]);
                for (int r = 0; r < X.rows(); ++r) {
                    const T nrm = n.aux_t[r];
                    const T s = nrm + n.aux0;
                    T dot = T(0);
                    for (int c = 0; c < X.cols(); ++c) dot += go.at(r, c) * X.at(r, c);
                    const T coef = nrm > T(0) ? dot / (nrm * s * s) : T(0);
                    for (int c = 0; c < X.cols(); ++c)
                        da.at(r, c) += go.at(r, c) / s - X.at(r, c) * coef;
                }
                break;
            }
            case Op::RowLogSumExp: {
                if (!at(n.in[0]).requires_grad) break;
                auto& da = grad_buf(g, n.in[0]);
                const auto& X = val(n.in[0]);
                for (int r = 0; r < X.rows(); ++r) {
                    const T y = n.value.at(r, 0);
                    const T gr = go.at(r, 0);
                    for (int c = 0; c < X.cols(); ++c)
                        da.at(r, c) += gr * std::exp(X.at(r, c) - y);
                }
                break;
            }
            case Op::Gather: {
                if (!at(n.in[0]).requires_grad) break;
                auto& da = grad_buf(g, n.in[0]);
                for (size_t i = 0; i < n.aux_i.size(); ++i) da.data[n.aux_i[i]] += go.data[i];
                break;
            }
            case Op::SumAll: {
                if (!at(n.in[0]).requires_grad) break;
                auto& da = grad_buf(g, n.in[0]);
                for (auto& v : da.data) v += go.data[0];
                break;
            }
            case Op::MeanAll: {
                if (!at(n.in[0]).requires_grad) break;
                auto& da = grad_buf(g, n.in[0]);
                const T inv = go.data[0] / static_cast<T>(da.numel());
                for (auto& v : da.data) v += inv;
                break;
            }
            case Op::DivByScalar: {
                const T d = val(n.in[1]).data[0] + n.aux0;
                if (at(n.in[0]).requires_grad) {
                    auto& da = grad_buf(g, n.in[0]);
                    for (long i = 0; i < go.numel(); ++i) da.data[i] += go.data[i] / d;
                }
                if (at(n.in[1]).requires_grad) {
                    auto& ds = grad_buf(g, n.in[1]);
                    T s = T(0);
                    for (long i = 0; i < go.numel(); ++i) s += go.data[i] * n.value.data[i];
                    ds.data[0] -= s / d;
                }
                break;
            }
        }
    }
};

} // namespace vortexlab
