#ifndef AIFMAZE_TAPE_HPP
#define AIFMAZE_TAPE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aifmaze/simd.hpp"
#include "aifmaze/tensor.hpp"

namespace aifmaze {

// Reverse-mode autodiff over an explicitly built computation. Nodes carry
// whole vectors, so a graph stays small even for long unrolls. The node list
// is already a topological order; backward is a single reverse sweep.
//
// A tape can be re-run after its parameters changed (`recompute`), which the
// planner uses to avoid rebuilding the same graph a thousand times.
//
// With `local_grads`, parameter gradients accumulate into tape-private
// buffers instead of the store; several tapes can then run backward in
// parallel over shared parameters and be flushed afterwards in a fixed
// order, keeping reductions bit-deterministic.

enum class OpKind : std::uint8_t {
    Input,
    ParamVec,
    Affine,
    Tanh,
    SigmoidClamped,
    Softplus,
    Relu,
    Softmax,
    Add,
    Sub,
    Mul,
    Div,
    Scale,
    Concat,
    Slice,
    Sum,
    Dot,
    Log,
    Exp,
    Min2,
    GaussianSample,
    KlDiag,
    BernoulliCe,
};

class Tape {
public:
    struct Node {
        OpKind op;
        std::array<int, 4> arg{-1, -1, -1, -1};
        Param* W = nullptr;
        Param* b = nullptr;
        double k = 0.0; // scale factor / clamp bound / softplus floor
        int off = 0;
        int len = 0;
        bool frozen = false; // skip gradient accumulation into W/b/param
        Vec val;
        Vec grad;
    };

    explicit Tape(bool local_grads = false) : local_grads_(local_grads) {}

    // ---- leaves ----

    int input(Vec v) {
        Node n;
        n.op = OpKind::Input;
        n.val = std::move(v);
        return push(std::move(n));
    }

    int input_scalar(double v) { return input(Vec{v}); }

    int param(Param& p, bool frozen = false) {
        Node n;
        n.op = OpKind::ParamVec;
        n.W = &p;
        n.frozen = frozen;
        n.val = p.value;
        return push(std::move(n));
    }

    // ---- ops ----

    int affine(Param& W, Param& b, int x, bool frozen = false) {
        if (W.shape.size() != 2) throw std::invalid_argument("affine: " + W.name + " is not a matrix");
        if (W.cols() != len_of(x)) throw std::invalid_argument("affine: input length mismatch for " + W.name);
        if (b.size() != W.rows()) throw std::invalid_argument("affine: bias length mismatch for " + W.name);
        Node n;
        n.op = OpKind::Affine;
        n.arg[0] = x;
        n.W = &W;
        n.b = &b;
        n.frozen = frozen;
        n.val.resize(W.rows());
        simd::matvec(W.value.data(), nodes_[x].val.data(), b.value.data(), n.val.data(), W.rows(), W.cols());
        return push(std::move(n));
    }

    int tanh_(int x) { return unary(OpKind::Tanh, x); }
    int relu(int x) { return unary(OpKind::Relu, x); }
    int log_(int x) { return unary(OpKind::Log, x); }
    int exp_(int x) { return unary(OpKind::Exp, x); }
    int softmax(int x) { return unary(OpKind::Softmax, x); }

    // Logits are clamped to [-bound, bound] before the sigmoid, so outputs
    // stay strictly inside (0,1).
    int sigmoid(int x, double bound = 15.0) {
        Node n;
        n.op = OpKind::SigmoidClamped;
        n.arg[0] = x;
        n.k = bound;
        return finish_unary(std::move(n), x);
    }

    int softplus(int x, double floor = 0.0) {
        Node n;
        n.op = OpKind::Softplus;
        n.arg[0] = x;
        n.k = floor;
        return finish_unary(std::move(n), x);
    }

    int add(int a, int b) { return binary(OpKind::Add, a, b); }
    int sub(int a, int b) { return binary(OpKind::Sub, a, b); }
    int mul(int a, int b) { return binary(OpKind::Mul, a, b); }
    int div_(int a, int b) { return binary(OpKind::Div, a, b); }
    int min2(int a, int b) { return binary(OpKind::Min2, a, b); }

    int scale(int x, double k) {
        Node n;
        n.op = OpKind::Scale;
        n.arg[0] = x;
        n.k = k;
        return finish_unary(std::move(n), x);
    }

    int concat(int a, int b) {
        Node n;
        n.op = OpKind::Concat;
        n.arg[0] = a;
        n.arg[1] = b;
        n.val.resize(len_of(a) + len_of(b));
        compute(n);
        return push(std::move(n));
    }

    int slice(int x, int off, int len) {
        if (off < 0 || len <= 0 || off + len > len_of(x)) throw std::invalid_argument("slice: out of range");
        Node n;
        n.op = OpKind::Slice;
        n.arg[0] = x;
        n.off = off;
        n.len = len;
        n.val.resize(len);
        compute(n);
        return push(std::move(n));
    }

    int sum(int x) {
        Node n;
        n.op = OpKind::Sum;
        n.arg[0] = x;
        n.val.resize(1);
        compute(n);
        return push(std::move(n));
    }

    int dot(int a, int b) {
        check_same(a, b, "dot");
        Node n;
        n.op = OpKind::Dot;
        n.arg[0] = a;
        n.arg[1] = b;
        n.val.resize(1);
        compute(n);
        return push(std::move(n));
    }

    // mu + sigma .* eps; gradient flows to mu and sigma, never to eps.
    int gaussian_sample(int mu, int sigma, int eps) {
        check_same(mu, sigma, "gaussian_sample");
        check_same(mu, eps, "gaussian_sample");
        Node n;
        n.op = OpKind::GaussianSample;
        n.arg[0] = mu;
        n.arg[1] = sigma;
        n.arg[2] = eps;
        n.val.resize(len_of(mu));
        compute(n);
        return push(std::move(n));
    }

    // KL(N(muq, diag sigq^2) || N(mup, diag sigp^2)), closed form, scalar.
    int kl_diag(int muq, int sigq, int mup, int sigp) {
        check_same(muq, sigq, "kl_diag");
        check_same(muq, mup, "kl_diag");
        check_same(muq, sigp, "kl_diag");
        Node n;
        n.op = OpKind::KlDiag;
        n.arg = {muq, sigq, mup, sigp};
        n.val.resize(1);
        compute(n);
        return push(std::move(n));
    }

    // -sum[t ln p + (1-t) ln(1-p)], scalar. pred must be strictly inside
    // (0,1); no gradient flows to the target.
    int bernoulli_ce(int pred, int target) {
        check_same(pred, target, "bernoulli_ce");
        Node n;
        n.op = OpKind::BernoulliCe;
        n.arg[0] = pred;
        n.arg[1] = target;
        n.val.resize(1);
        compute(n);
        return push(std::move(n));
    }

    // ---- execution ----

    const Vec& val(int i) const { return nodes_[i].val; }
    const Vec& grad(int i) const { return nodes_[i].grad; }
    int len_of(int i) const { return static_cast<int>(nodes_[i].val.size()); }
    std::size_t size() const { return nodes_.size(); }

    void set_input(int i, const Vec& v) {
        if (nodes_[i].op != OpKind::Input) throw std::invalid_argument("set_input: node is not an input");
        if (v.size() != nodes_[i].val.size()) throw std::invalid_argument("set_input: length mismatch");
        nodes_[i].val = v;
    }

    // Re-run the whole forward pass; parameter leaves pick up current values.
    void recompute() {
        for (auto& n : nodes_) compute(n);
    }

    // Reverse sweep from `root` seeded with `seed`. Node adjoints are reset
    // here; parameter gradients accumulate into their stores and are the
    // caller's to zero.
    void backward(int root, double seed = 1.0) {
        if (len_of(root) != 1) throw std::invalid_argument("backward: root must be scalar");
        backward_seeded(root, Vec{seed});
    }

    void backward_seeded(int root, const Vec& seed) {
        if (static_cast<int>(seed.size()) != len_of(root)) throw std::invalid_argument("backward: seed length mismatch");
        for (auto& n : nodes_) {
            n.grad.assign(n.val.size(), 0.0);
        }
        nodes_[root].grad = seed;
        for (int i = root; i >= 0; --i) propagate(nodes_[i]);
    }

    // Adds the tape-private gradient buffers into their stores (in the order
    // the parameters were first touched) and clears them.
    void flush_param_grads() {
        for (auto& [p, buf] : local_list_) {
            for (std::size_t i = 0; i < buf->size(); ++i) p->grad[i] += (*buf)[i];
            std::fill(buf->begin(), buf->end(), 0.0);
        }
    }

private:
    std::vector<Node> nodes_;
    bool local_grads_ = false;
    std::vector<std::pair<Param*, std::unique_ptr<Vec>>> local_list_;
    std::unordered_map<const Param*, Vec*> local_index_;

    double* grad_dst(Param& p) {
        if (!local_grads_) return p.grad.data();
        auto it = local_index_.find(&p);
        if (it != local_index_.end()) return it->second->data();
        auto buf = std::make_unique<Vec>(p.value.size(), 0.0);
        Vec* raw = buf.get();
        local_index_.emplace(&p, raw);
        local_list_.emplace_back(&p, std::move(buf));
        return raw->data();
    }

    int push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    void check_same(int a, int b, const char* who) const {
        if (len_of(a) != len_of(b)) throw std::invalid_argument(std::string(who) + ": length mismatch");
    }

    int unary(OpKind op, int x) {
        Node n;
        n.op = op;
        n.arg[0] = x;
        return finish_unary(std::move(n), x);
    }

    int finish_unary(Node n, int x) {
        n.val.resize(len_of(x));
        compute(n);
        return push(std::move(n));
    }

    int binary(OpKind op, int a, int b) {
        check_same(a, b, "elementwise op");
        Node n;
        n.op = op;
        n.arg[0] = a;
        n.arg[1] = b;
        n.val.resize(len_of(a));
        compute(n);
        return push(std::move(n));
    }

    static double stable_softplus(double x) {
        return (x > 0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
    }

    void compute(Node& n) {
        const int len = static_cast<int>(n.val.size());
        switch (n.op) {
        case OpKind::Input:
            break;
        case OpKind::ParamVec:
            n.val = n.W->value;
            break;
        case OpKind::Affine:
            simd::matvec(n.W->value.data(), nodes_[n.arg[0]].val.data(), n.b->value.data(), n.val.data(),
                         n.W->rows(), n.W->cols());
            break;
        case OpKind::Tanh: {
            const Vec& x = nodes_[n.arg[0]].val;
            for (int i = 0; i < len; ++i) n.val[i] = std::tanh(x[i]);
            break;
        }
        case OpKind::SigmoidClamped: {
            const Vec& x = nodes_[n.arg[0]].val;
            for (int i = 0; i < len; ++i) {
                const double u = x[i] > n.k ? n.k : (x[i] < -n.k ? -n.k : x[i]);
                n.val[i] = 1.0 / (1.0 + std::exp(-u));
            }
            break;
        }
        case OpKind::Softplus: {
            const Vec& x = nodes_[n.arg[0]].val;
            for (int i = 0; i < len; ++i) n.val[i] = stable_softplus(x[i]) + n.k;
            break;
        }
        case OpKind::Relu: {
            const Vec& x = nodes_[n.arg[0]].val;
            for (int i = 0; i < len; ++i) n.val[i] = x[i] > 0 ? x[i] : 0.0;
            break;
        }
        case OpKind::Softmax: {
            const Vec& x = nodes_[n.arg[0]].val;
            double m = x[0];
            for (int i = 1; i < len; ++i) m = std::max(m, x[i]);
            double s = 0;
            for (int i = 0; i < len; ++i) {
                n.val[i] = std::exp(x[i] - m);
                s += n.val[i];
            }
            for (int i = 0; i < len; ++i) n.val[i] /= s;
            break;
        }
        case OpKind::Add: {
            const Vec& a = nodes_[n.arg[0]].val;
            const Vec& b = nodes_[n.arg[1]].val;
            for (int i = 0; i < len; ++i) n.val[i] = a[i] + b[i];
            break;
        }
        case OpKind::Sub: {
            const Vec& a = nodes_[n.arg[0]].val;
            const Vec& b = nodes_[n.arg[1]].val;
            for (int i = 0; i < len; ++i) n.val[i] = a[i] - b[i];
            break;
        }
        case OpKind::Mul: {
            const Vec& a = nodes_[n.arg[0]].val;
            const Vec& b = nodes_[n.arg[1]].val;
            for (int i = 0; i < len; ++i) n.val[i] = a[i] * b[i];
            break;
        }
        case OpKind::Div: {
            const Vec& a = nodes_[n.arg[0]].val;
            const Vec& b = nodes_[n.arg[1]].val;
            for (int i = 0; i < len; ++i) n.val[i] = a[i] / b[i];
            break;
        }
        case OpKind::Scale: {
            const Vec& x = nodes_[n.arg[0]].val;
            for (int i = 0; i < len; ++i) n.val[i] = n.k * x[i];
            break;
        }
        case OpKind::Concat: {
            const Vec& a = nodes_[n.arg[0]].val;
            const Vec& b = nodes_[n.arg[1]].val;
            std::copy(a.begin(), a.end(), n.val.begin());
            std::copy(b.begin(), b.end(), n.val.begin() + a.size());
            break;
        }
        case OpKind::Slice: {
            const Vec& x = nodes_[n.arg[0]].val;
            std::copy(x.begin() + n.off, x.begin() + n.off + n.len, n.val.begin());
            break;
        }
        case OpKind::Sum: {
            const Vec& x = nodes_[n.arg[0]].val;
            double s = 0;
            for (double v : x) s += v;
            n.val[0] = s;
            break;
        }
        case OpKind::Dot:
            n.val[0] = simd::dot(nodes_[n.arg[0]].val.data(), nodes_[n.arg[1]].val.data(),
                                 len_of(n.arg[0]));
            break;
        case OpKind::Log: {
            const Vec& x = nodes_[n.arg[0]].val;
            for (int i = 0; i < len; ++i) n.val[i] = std::log(x[i]);
            break;
        }
        case OpKind::Exp: {
            const Vec& x = nodes_[n.arg[0]].val;
            for (int i = 0; i < len; ++i) n.val[i] = std::exp(x[i]);
            break;
        }
        case OpKind::Min2: {
            const Vec& a = nodes_[n.arg[0]].val;
            const Vec& b = nodes_[n.arg[1]].val;
            for (int i = 0; i < len; ++i) n.val[i] = a[i] <= b[i] ? a[i] : b[i];
            break;
        }
        case OpKind::GaussianSample: {
            const Vec& mu = nodes_[n.arg[0]].val;
            const Vec& sig = nodes_[n.arg[1]].val;
            const Vec& eps = nodes_[n.arg[2]].val;
            for (int i = 0; i < len; ++i) n.val[i] = mu[i] + sig[i] * eps[i];
            break;
        }
        case OpKind::KlDiag: {
            const Vec& muq = nodes_[n.arg[0]].val;
            const Vec& sigq = nodes_[n.arg[1]].val;
            const Vec& mup = nodes_[n.arg[2]].val;
            const Vec& sigp = nodes_[n.arg[3]].val;
            double s = 0;
            for (std::size_t i = 0; i < muq.size(); ++i) {
                if (sigq[i] <= 0 || sigp[i] <= 0) throw std::domain_error("kl_diag: non-positive sigma");
                const double dm = muq[i] - mup[i];
                s += std::log(sigp[i] / sigq[i]) + (sigq[i] * sigq[i] + dm * dm) / (2.0 * sigp[i] * sigp[i]) - 0.5;
            }
            n.val[0] = s;
            break;
        }
        case OpKind::BernoulliCe: {
            const Vec& p = nodes_[n.arg[0]].val;
            const Vec& t = nodes_[n.arg[1]].val;
            double s = 0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (p[i] <= 0.0 || p[i] >= 1.0) throw std::domain_error("bernoulli_ce: pred outside (0,1)");
                if (t[i] < 0.0 || t[i] > 1.0) throw std::domain_error("bernoulli_ce: target outside [0,1]");
                s -= t[i] * std::log(p[i]) + (1.0 - t[i]) * std::log(1.0 - p[i]);
            }
            n.val[0] = s;
            break;
        }
        }
    }

    void propagate(Node& n) {
        const int len = static_cast<int>(n.val.size());
        const Vec& g = n.grad;
        switch (n.op) {
        case OpKind::Input:
            break;
        case OpKind::ParamVec:
            if (!n.frozen) {
                double* dst = grad_dst(*n.W);
                for (int i = 0; i < len; ++i) dst[i] += g[i];
            }
            break;
        case OpKind::Affine: {
            Node& x = nodes_[n.arg[0]];
            if (!n.frozen) {
                simd::outer_acc(grad_dst(*n.W), g.data(), x.val.data(), n.W->rows(), n.W->cols());
                double* gb = grad_dst(*n.b);
                for (int i = 0; i < len; ++i) gb[i] += g[i];
            }
            simd::matvec_t_acc(n.W->value.data(), g.data(), x.grad.data(), n.W->rows(), n.W->cols());
            break;
        }
        case OpKind::Tanh: {
            Node& x = nodes_[n.arg[0]];
            for (int i = 0; i < len; ++i) x.grad[i] += g[i] * (1.0 - n.val[i] * n.val[i]);
            break;
        }
        case OpKind::SigmoidClamped: {
            Node& x = nodes_[n.arg[0]];
            for (int i = 0; i < len; ++i) {
                if (x.val[i] >= -n.k && x.val[i] <= n.k)
                    x.grad[i] += g[i] * n.val[i] * (1.0 - n.val[i]);
            }
            break;
        }
        case OpKind::Softplus: {
            Node& x = nodes_[n.arg[0]];
            for (int i = 0; i < len; ++i) x.grad[i] += g[i] / (1.0 + std::exp(-x.val[i]));
            break;
        }
        case OpKind::Relu: {
            Node& x = nodes_[n.arg[0]];
            for (int i = 0; i < len; ++i) {
                if (x.val[i] > 0) x.grad[i] += g[i];
            }
            break;
        }
        case OpKind::Softmax: {
            Node& x = nodes_[n.arg[0]];
            double gy = 0;
            for (int i = 0; i < len; ++i) gy += g[i] * n.val[i];
            for (int i = 0; i < len; ++i) x.grad[i] += n.val[i] * (g[i] - gy);
            break;
        }
        case OpKind::Add: {
            Node& a = nodes_[n.arg[0]];
            Node& b = nodes_[n.arg[1]];
            for (int i = 0; i < len; ++i) {
                a.grad[i] += g[i];
                b.grad[i] += g[i];
            }
            break;
        }
        case OpKind::Sub: {
            Node& a = nodes_[n.arg[0]];
            Node& b = nodes_[n.arg[1]];
            for (int i = 0; i < len; ++i) {
                a.grad[i] += g[i];
                b.grad[i] -= g[i];
            }
            break;
        }
        case OpKind::Mul: {
            Node& a = nodes_[n.arg[0]];
            Node& b = nodes_[n.arg[1]];
            for (int i = 0; i < len; ++i) {
                a.grad[i] += g[i] * b.val[i];
                b.grad[i] += g[i] * a.val[i];
            }
            break;
        }
        case OpKind::Div: {
            Node& a = nodes_[n.arg[0]];
            Node& b = nodes_[n.arg[1]];
            for (int i = 0; i < len; ++i) {
                a.grad[i] += g[i] / b.val[i];
                b.grad[i] -= g[i] * n.val[i] / b.val[i];
            }
            break;
        }
        case OpKind::Scale: {
            Node& x = nodes_[n.arg[0]];
            for (int i = 0; i < len; ++i) x.grad[i] += g[i] * n.k;
            break;
        }
        case OpKind::Concat: {
            Node& a = nodes_[n.arg[0]];
            Node& b = nodes_[n.arg[1]];
            const int na = static_cast<int>(a.val.size());
            for (int i = 0; i < na; ++i) a.grad[i] += g[i];
            for (std::size_t i = 0; i < b.val.size(); ++i) b.grad[i] += g[na + i];
            break;
        }
        case OpKind::Slice: {
            Node& x = nodes_[n.arg[0]];
            for (int i = 0; i < n.len; ++i) x.grad[n.off + i] += g[i];
            break;
        }
        case OpKind::Sum: {
            Node& x = nodes_[n.arg[0]];
            for (auto& gx : x.grad) gx += g[0];
            break;
        }
        case OpKind::Dot: {
            Node& a = nodes_[n.arg[0]];
            Node& b = nodes_[n.arg[1]];
            simd::axpy(g[0], b.val.data(), a.grad.data(), static_cast<int>(a.val.size()));
            simd::axpy(g[0], a.val.data(), b.grad.data(), static_cast<int>(a.val.size()));
            break;
        }
        case OpKind::Log: {
            Node& x = nodes_[n.arg[0]];
            for (int i = 0; i < len; ++i) x.grad[i] += g[i] / x.val[i];
            break;
        }
        case OpKind::Exp: {
            Node& x = nodes_[n.arg[0]];
            for (int i = 0; i < len; ++i) x.grad[i] += g[i] * n.val[i];
            break;
        }
        case OpKind::Min2: {
            Node& a = nodes_[n.arg[0]];
            Node& b = nodes_[n.arg[1]];
            for (int i = 0; i < len; ++i) {
                if (a.val[i] <= b.val[i])
                    a.grad[i] += g[i];
                else
                    b.grad[i] += g[i];
            }
            break;
        }
        case OpKind::GaussianSample: {
            Node& mu = nodes_[n.arg[0]];
            Node& sig = nodes_[n.arg[1]];
            const Vec& eps = nodes_[n.arg[2]].val;
            for (int i = 0; i < len; ++i) {
                mu.grad[i] += g[i];
                sig.grad[i] += g[i] * eps[i];
            }
            break;
        }
        case OpKind::KlDiag: {
            Node& muq = nodes_[n.arg[0]];
            Node& sigq = nodes_[n.arg[1]];
            Node& mup = nodes_[n.arg[2]];
            Node& sigp = nodes_[n.arg[3]];
            const double g0 = g[0];
            for (std::size_t i = 0; i < muq.val.size(); ++i) {
                const double sq = sigq.val[i], sp = sigp.val[i];
                const double dm = muq.val[i] - mup.val[i];
                const double inv_sp2 = 1.0 / (sp * sp);
                muq.grad[i] += g0 * dm * inv_sp2;
                mup.grad[i] -= g0 * dm * inv_sp2;
                sigq.grad[i] += g0 * (-1.0 / sq + sq * inv_sp2);
                sigp.grad[i] += g0 * (1.0 / sp - (sq * sq + dm * dm) * inv_sp2 / sp);
            }
            break;
        }
        case OpKind::BernoulliCe: {
            Node& p = nodes_[n.arg[0]];
            const Vec& t = nodes_[n.arg[1]].val;
            const double g0 = g[0];
            for (std::size_t i = 0; i < p.val.size(); ++i) {
                p.grad[i] += g0 * (-t[i] / p.val[i] + (1.0 - t[i]) / (1.0 - p.val[i]));
            }
            break;
        }
        }
    }
};

} // namespace aifmaze

#endif
