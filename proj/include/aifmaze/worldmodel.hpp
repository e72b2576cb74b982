#ifndef AIFMAZE_WORLDMODEL_HPP
#define AIFMAZE_WORLDMODEL_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "aifmaze/nn.hpp"
#include "aifmaze/parallel.hpp"
#include "aifmaze/replay.hpp"
#include "aifmaze/tape.hpp"

namespace aifmaze {

// Diagonal Gaussian over the internal states z.
struct LatentGaussian {
    Vec mu;
    Vec sigma;
};

struct ModelConfig {
    int obs_dim = 64;
    int z_dim = 8;
    int h_dim = 128;
    int hidden_width = 128;
    int hidden_layers = 2;
};

// Variational RNN: prior and posterior heads over the internal states z, a
// shared LSTM recurrence driven by z, and a Bernoulli observation decoder.
// Both prior-driven and posterior-driven updates go through the single
// "rnn.*" parameter set, so the z-to-memory pathway is shared by
// construction.
class WorldModel {
public:
    struct Latent {
        int mu;
        int sigma;
    };

    WorldModel(ModelConfig cfg, Rng& rng) : cfg_(cfg) {
        if (cfg.obs_dim <= 0 || cfg.z_dim <= 0 || cfg.h_dim <= 0 || cfg.hidden_width <= 0 || cfg.hidden_layers < 0)
            throw ConfigError("worldmodel: dimensions must be positive");
        gauss_head_ = make_layers(2 * cfg.z_dim);
        dec_layers_ = make_layers(cfg.obs_dim);
        Mlp::init(params_, "prior", cfg.h_dim, gauss_head_, rng);
        Mlp::init(params_, "post", cfg.obs_dim + cfg.h_dim, gauss_head_, rng);
        Mlp::init(params_, "dec", cfg.h_dim, dec_layers_, rng);
        Lstm::init(params_, "rnn", cfg.z_dim, cfg.h_dim, rng);
    }

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    RnnState zero_state() const { return RnnState::zeros(cfg_.h_dim); }

    // ---- direct evaluation (rollouts, targets) ----

    LatentGaussian prior(const RnnState& s) const { return split_gaussian(Mlp::forward(params_, "prior", s.h, gauss_head_)); }

    LatentGaussian posterior(const Vec& obs, const RnnState& s) const {
        Vec xh(obs.size() + s.h.size());
        std::copy(obs.begin(), obs.end(), xh.begin());
        std::copy(s.h.begin(), s.h.end(), xh.begin() + obs.size());
        return split_gaussian(Mlp::forward(params_, "post", xh, gauss_head_));
    }

    void rnn_step(const Vec& z, RnnState& state) const { Lstm::forward(params_, "rnn", z, state); }

    Vec decode(const RnnState& s) const {
        Vec logits = Mlp::forward(params_, "dec", s.h, dec_layers_);
        for (auto& v : logits) v = sigmoid_clamped(v);
        return logits;
    }

    // ---- graph builders ----

    Latent build_prior(Tape& tape, int h, bool frozen = false) const {
        return split_gaussian_nodes(tape, Mlp::build(tape, params_, "prior", h, gauss_head_, frozen));
    }

    Latent build_posterior(Tape& tape, int x, int h, bool frozen = false) const {
        const int xh = tape.concat(x, h);
        return split_gaussian_nodes(tape, Mlp::build(tape, params_, "post", xh, gauss_head_, frozen));
    }

    Lstm::Nodes build_rnn_step(Tape& tape, int z, Lstm::Nodes state, bool frozen = false) const {
        return Lstm::build(tape, params_, "rnn", z, state, frozen);
    }

    int build_decode(Tape& tape, int h, bool frozen = false) const {
        return tape.sigmoid(Mlp::build(tape, params_, "dec", h, dec_layers_, frozen), kLogitClamp);
    }

    // Unrolled posterior states over a window. Returns the per-step LSTM
    // nodes and latent samples; used by both the free-energy objective and
    // the RL losses so they see the same recurrence.
    struct Unroll {
        std::vector<Lstm::Nodes> states; // h_t for t = 1..T
        std::vector<int> z;              // sampled posterior z_t
        std::vector<Latent> q;           // posterior (mu, sigma) at each step
        std::vector<Latent> p;           // prior (mu, sigma) at each step
    };

    Unroll build_unroll(Tape& tape, const std::vector<Vec>& obs, const RnnState& init,
                        const std::vector<Vec>& eps) const {
        if (obs.empty()) throw std::invalid_argument("worldmodel: empty observation window");
        if (eps.size() != obs.size()) throw std::invalid_argument("worldmodel: need one noise vector per step");
        Unroll u;
        Lstm::Nodes state{tape.input(init.h), tape.input(init.c)};
        for (std::size_t t = 0; t < obs.size(); ++t) {
            const int x = tape.input(obs[t]);
            const Latent q = build_posterior(tape, x, state.h);
            const Latent p = build_prior(tape, state.h);
            const int z = tape.gaussian_sample(q.mu, q.sigma, tape.input(eps[t]));
            state = build_rnn_step(tape, z, state);
            u.states.push_back(state);
            u.z.push_back(z);
            u.q.push_back(q);
            u.p.push_back(p);
        }
        return u;
    }

    // Free energy of one window: sum over steps of KL(posterior || prior)
    // plus the reconstruction cross-entropy, where decode(h_{t-1}) predicts
    // the observation at step t (so the first observation only drives
    // inference). Masked steps contribute nothing.
    int build_free_energy(Tape& tape, const std::vector<Vec>& obs, const Vec& mask,
                          const RnnState& init, const std::vector<Vec>& eps) const {
        const Unroll u = build_unroll(tape, obs, init, eps);
        if (mask.size() != obs.size()) throw std::invalid_argument("worldmodel: mask length mismatch");
        int total = tape.input_scalar(0.0);
        for (std::size_t t = 0; t < obs.size(); ++t) {
            if (mask[t] == 0.0) continue;
            int term = tape.kl_diag(u.q[t].mu, u.q[t].sigma, u.p[t].mu, u.p[t].sigma);
            if (t >= 1) {
                const int probs = build_decode(tape, u.states[t - 1].h);
                term = tape.add(term, tape.bernoulli_ce(probs, tape.input(obs[t])));
            }
            total = tape.add(total, mask[t] == 1.0 ? term : tape.scale(term, mask[t]));
        }
        return total;
    }

    double free_energy(const std::vector<Vec>& obs, const Vec& mask, const RnnState& init,
                       const std::vector<Vec>& eps) const {
        Tape tape;
        return tape.val(build_free_energy(tape, obs, mask, init, eps))[0];
    }

    // Gradient of the mean window free energy, added onto whatever is
    // already in the store. Per-window noise is the caller's (one
    // unit-Gaussian vector per step). Window graphs may build in parallel;
    // gradients flush in window order.
    double accumulate_free_energy_grads(const std::vector<Window>& batch,
                                        const std::vector<std::vector<Vec>>& eps, int threads = 1) {
        if (batch.empty()) throw std::invalid_argument("worldmodel: empty batch");
        if (eps.size() != batch.size()) throw std::invalid_argument("worldmodel: need noise per window");
        const double inv = 1.0 / static_cast<double>(batch.size());
        std::vector<std::unique_ptr<Tape>> tapes(batch.size());
        std::vector<double> losses(batch.size(), 0.0);
        parallel_for(static_cast<int>(batch.size()), threads, [&](int w) {
            tapes[w] = std::make_unique<Tape>(/*local_grads=*/true);
            Tape& tape = *tapes[w];
            const int fe = build_free_energy(tape, batch[w].obs, batch[w].mask, batch[w].init_state, eps[w]);
            const int loss = tape.scale(fe, inv);
            losses[w] = tape.val(fe)[0];
            tape.backward(loss);
        });
        double mean_loss = 0;
        for (std::size_t w = 0; w < batch.size(); ++w) {
            tapes[w]->flush_param_grads();
            mean_loss += losses[w] * inv;
        }
        return mean_loss;
    }

    // One Adam step on the mean window free energy.
    double train_step(const std::vector<Window>& batch, const std::vector<std::vector<Vec>>& eps,
                      Adam& opt, int threads = 1) {
        params_.zero_grad();
        const double loss = accumulate_free_energy_grads(batch, eps, threads);
        opt.step(params_);
        return loss;
    }

    LatentGaussian split_gaussian(Vec raw) const {
        LatentGaussian g;
        g.mu.assign(raw.begin(), raw.begin() + cfg_.z_dim);
        g.sigma.resize(cfg_.z_dim);
        for (int i = 0; i < cfg_.z_dim; ++i) g.sigma[i] = softplus(raw[cfg_.z_dim + i]) + kSigmaFloor;
        return g;
    }

private:
    ModelConfig cfg_;
    ParamStore params_;
    std::vector<LayerSpec> gauss_head_;
    std::vector<LayerSpec> dec_layers_;

    std::vector<LayerSpec> make_layers(int out_dim) const {
        std::vector<LayerSpec> layers;
        for (int l = 0; l < cfg_.hidden_layers; ++l) layers.push_back({cfg_.hidden_width, Activation::Tanh});
        layers.push_back({out_dim, Activation::Identity});
        return layers;
    }

    Latent split_gaussian_nodes(Tape& tape, int raw) const {
        const int mu = tape.slice(raw, 0, cfg_.z_dim);
        const int sigma = tape.softplus(tape.slice(raw, cfg_.z_dim, cfg_.z_dim), kSigmaFloor);
        return {mu, sigma};
    }
};

} // namespace aifmaze

#endif
