#ifndef AIFMAZE_NN_HPP
#define AIFMAZE_NN_HPP

#include <cmath>
#include <string>
#include <vector>

#include "aifmaze/common.hpp"
#include "aifmaze/tape.hpp"

namespace aifmaze {

enum class Activation { Identity, Tanh, Sigmoid, Softplus, Relu, Softmax };

inline Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "softplus") return Activation::Softplus;
    if (s == "relu") return Activation::Relu;
    if (s == "softmax") return Activation::Softmax;
    throw ConfigError("unknown activation: " + s);
}

struct LayerSpec {
    int width;
    Activation act;
};

constexpr double kSigmaFloor = 1e-6;
constexpr double kLogitClamp = 15.0;

inline double sigmoid_clamped(double x) {
    const double u = x > kLogitClamp ? kLogitClamp : (x < -kLogitClamp ? -kLogitClamp : x);
    return 1.0 / (1.0 + std::exp(-u));
}

inline double softplus(double x) {
    return (x > 0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline void apply_activation_inplace(Activation act, Vec& v) {
    switch (act) {
    case Activation::Identity:
        break;
    case Activation::Tanh:
        for (auto& x : v) x = std::tanh(x);
        break;
    case Activation::Sigmoid:
        for (auto& x : v) x = sigmoid_clamped(x);
        break;
    case Activation::Softplus:
        for (auto& x : v) x = softplus(x);
        break;
    case Activation::Relu:
        for (auto& x : v) x = x > 0 ? x : 0.0;
        break;
    case Activation::Softmax: {
        double m = v[0];
        for (double x : v) m = std::max(m, x);
        double s = 0;
        for (auto& x : v) {
            x = std::exp(x - m);
            s += x;
        }
        for (auto& x : v) x /= s;
        break;
    }
    }
}

// Plain feedforward stack over named parameters prefix.W0/.b0, prefix.W1/...
// The tape builder and the direct-evaluation path share the same parameters
// and the same math; the direct path skips graph construction for rollouts.
class Mlp {
public:
    static void init(ParamStore& ps, const std::string& prefix, int in_dim,
                     const std::vector<LayerSpec>& layers, Rng& rng, double final_gain = 1.0) {
        int d = in_dim;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            Param& W = ps.add(layer_name(prefix, "W", l), {layers[l].width, d});
            ps.add(layer_name(prefix, "b", l), {layers[l].width});
            init_glorot(W, rng, l + 1 == layers.size() ? final_gain : 1.0);
            d = layers[l].width;
        }
    }

    static int build(Tape& tape, const ParamStore& ps, const std::string& prefix, int x,
                     const std::vector<LayerSpec>& layers, bool frozen = false) {
        int cur = x;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto& W = const_cast<Param&>(ps.get(layer_name(prefix, "W", l)));
            auto& b = const_cast<Param&>(ps.get(layer_name(prefix, "b", l)));
            cur = tape.affine(W, b, cur, frozen);
            switch (layers[l].act) {
            case Activation::Identity:
                break;
            case Activation::Tanh:
                cur = tape.tanh_(cur);
                break;
            case Activation::Sigmoid:
                cur = tape.sigmoid(cur, kLogitClamp);
                break;
            case Activation::Softplus:
                cur = tape.softplus(cur);
                break;
            case Activation::Relu:
                cur = tape.relu(cur);
                break;
            case Activation::Softmax:
                cur = tape.softmax(cur);
                break;
            }
        }
        return cur;
    }

    static Vec forward(const ParamStore& ps, const std::string& prefix, const Vec& x,
                       const std::vector<LayerSpec>& layers) {
        Vec cur = x;
        Vec next;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const Param& W = ps.get(layer_name(prefix, "W", l));
            const Param& b = ps.get(layer_name(prefix, "b", l));
            if (static_cast<int>(cur.size()) != W.cols())
                throw std::invalid_argument("Mlp::forward: input length mismatch for " + W.name);
            next.resize(W.rows());
            simd::matvec(W.value.data(), cur.data(), b.value.data(), next.data(), W.rows(), W.cols());
            apply_activation_inplace(layers[l].act, next);
            cur.swap(next);
        }
        return cur;
    }

    static std::string layer_name(const std::string& prefix, const char* kind, std::size_t l) {
        return prefix + "." + kind + std::to_string(l);
    }
};

// Recurrent memory: hidden and cell vectors.
struct RnnState {
    Vec h;
    Vec c;

    static RnnState zeros(int dim) { return {Vec(dim, 0.0), Vec(dim, 0.0)}; }
};

// LSTM cell with a single packed weight matrix [4H x (in+H)] over the
// concatenated (input, hidden); gate order i, f, g, o. Forget-gate bias
// starts at 1.
class Lstm {
public:
    static void init(ParamStore& ps, const std::string& prefix, int in_dim, int hidden, Rng& rng) {
        Param& W = ps.add(prefix + ".W", {4 * hidden, in_dim + hidden});
        Param& b = ps.add(prefix + ".b", {4 * hidden});
        const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
        init_uniform(W, -bound, bound, rng);
        for (int i = hidden; i < 2 * hidden; ++i) b.value[i] = 1.0;
    }

    struct Nodes {
        int h;
        int c;
    };

    static Nodes build(Tape& tape, const ParamStore& ps, const std::string& prefix, int input,
                       Nodes state, bool frozen = false) {
        auto& W = const_cast<Param&>(ps.get(prefix + ".W"));
        auto& b = const_cast<Param&>(ps.get(prefix + ".b"));
        const int hidden = W.rows() / 4;
        if (tape.len_of(input) + hidden != W.cols())
            throw std::invalid_argument("Lstm::build: input length mismatch for " + W.name);
        const int xh = tape.concat(input, state.h);
        const int gates = tape.affine(W, b, xh, frozen);
        const int gi = tape.sigmoid(tape.slice(gates, 0, hidden));
        const int gf = tape.sigmoid(tape.slice(gates, hidden, hidden));
        const int gg = tape.tanh_(tape.slice(gates, 2 * hidden, hidden));
        const int go = tape.sigmoid(tape.slice(gates, 3 * hidden, hidden));
        const int c_new = tape.add(tape.mul(gf, state.c), tape.mul(gi, gg));
        const int h_new = tape.mul(go, tape.tanh_(c_new));
        return {h_new, c_new};
    }

    static void forward(const ParamStore& ps, const std::string& prefix, const Vec& input,
                        RnnState& state) {
        const Param& W = ps.get(prefix + ".W");
        const Param& b = ps.get(prefix + ".b");
        const int hidden = W.rows() / 4;
        if (static_cast<int>(input.size()) + hidden != W.cols())
            throw std::invalid_argument("Lstm::forward: input length mismatch for " + W.name);
        Vec xh(W.cols());
        std::copy(input.begin(), input.end(), xh.begin());
        std::copy(state.h.begin(), state.h.end(), xh.begin() + input.size());
        Vec gates(4 * hidden);
        simd::matvec(W.value.data(), xh.data(), b.value.data(), gates.data(), W.rows(), W.cols());
        for (int i = 0; i < hidden; ++i) {
            const double gi = sigmoid_clamped(gates[i]);
            const double gf = sigmoid_clamped(gates[hidden + i]);
            const double gg = std::tanh(gates[2 * hidden + i]);
            const double go = sigmoid_clamped(gates[3 * hidden + i]);
            state.c[i] = gf * state.c[i] + gi * gg;
            state.h[i] = go * std::tanh(state.c[i]);
        }
    }
};

} // namespace aifmaze

#endif
