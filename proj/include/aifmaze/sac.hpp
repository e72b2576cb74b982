#ifndef AIFMAZE_SAC_HPP
#define AIFMAZE_SAC_HPP

#include <cmath>
#include <memory>
#include <vector>

#include "aifmaze/worldmodel.hpp"

namespace aifmaze {

// Ornstein-Uhlenbeck exploration noise state; theta and sigma live in the
// agent config.
struct OUState {
    Vec noise;

    static OUState zeros(int dim) { return {Vec(dim, 0.0)}; }
};

struct SacConfig {
    int action_dim = 2;
    double action_max = 2.0;
    double gamma = 0.8;
    double tau_ema = 0.005;
    double ou_theta = 0.3;
    double ou_sigma = 0.3;
    int hidden_width = 128;
    int hidden_layers = 2;
    double target_entropy = -2.0; // -action_dim
};

// Soft actor-critic heads reading the RNN state: state value (with an EMA
// target copy), twin action values, a tanh-squashed Gaussian policy and a
// learned temperature. RL gradients run through the unrolled recurrence into
// the world model.
class SacAgent {
public:
    SacAgent(SacConfig cfg, int h_dim, Rng& rng) : cfg_(cfg), h_dim_(h_dim) {
        pi_layers_ = head_layers(2 * cfg.action_dim);
        q_layers_ = head_layers(1);
        v_layers_ = head_layers(1);
        Mlp::init(pi_, "pi", h_dim, pi_layers_, rng, /*final_gain=*/0.01);
        Mlp::init(q1_, "q1", h_dim + cfg.action_dim, q_layers_, rng);
        Mlp::init(q2_, "q2", h_dim + cfg.action_dim, q_layers_, rng);
        Mlp::init(v_, "v", h_dim, v_layers_, rng);
        Mlp::init(vt_, "vt", h_dim, v_layers_, rng);
        vt_.copy_values_from(v_);
        alpha_.add("alpha.log", {1});
    }

    const SacConfig& config() const { return cfg_; }
    double alpha() const { return std::exp(alpha_.get("alpha.log").value[0]); }

    ParamStore& pi_store() { return pi_; }
    ParamStore& q1_store() { return q1_; }
    ParamStore& q2_store() { return q2_; }
    ParamStore& v_store() { return v_; }
    ParamStore& vt_store() { return vt_; }
    ParamStore& alpha_store() { return alpha_; }

    // noise <- noise - theta*noise + sigma*eps
    void ou_step(OUState& ou, Rng& rng) const {
        for (auto& n : ou.noise) n = (1.0 - cfg_.ou_theta) * n + cfg_.ou_sigma * rng.normal();
    }

    // Explore: action_max * tanh(mu + sigma*eps + ou), then the OU state
    // advances. Mean: action_max * tanh(mu).
    Vec act(const Vec& h, bool explore, OUState* ou = nullptr, Rng* rng = nullptr) const {
        const auto g = policy_gaussian(h);
        Vec a(cfg_.action_dim);
        for (int i = 0; i < cfg_.action_dim; ++i) {
            double u = g.mu[i];
            if (explore) {
                u += g.sigma[i] * rng->normal();
                if (ou) u += ou->noise[i];
            }
            a[i] = cfg_.action_max * std::tanh(u);
        }
        if (explore && ou) ou_step(*ou, *rng);
        return a;
    }

    LatentGaussian policy_gaussian(const Vec& h) const {
        Vec raw = Mlp::forward(pi_, "pi", h, pi_layers_);
        LatentGaussian g;
        g.mu.assign(raw.begin(), raw.begin() + cfg_.action_dim);
        g.sigma.resize(cfg_.action_dim);
        for (int i = 0; i < cfg_.action_dim; ++i) g.sigma[i] = softplus(raw[cfg_.action_dim + i]) + kSigmaFloor;
        return g;
    }

    // log pi(a) of the squashed sample a = action_max*tanh(u), u = mu+sigma*eps,
    // by change of variables. log(1-tanh^2 u) is computed via softplus for
    // stability.
    double squashed_log_prob(const LatentGaussian& g, const Vec& u) const {
        double lp = 0;
        for (int i = 0; i < cfg_.action_dim; ++i) {
            const double d = (u[i] - g.mu[i]) / g.sigma[i];
            lp += -std::log(g.sigma[i]) - 0.5 * d * d - 0.5 * std::log(2.0 * 3.141592653589793);
            lp += -std::log(cfg_.action_max) - 2.0 * (std::log(2.0) - u[i] - softplus(-2.0 * u[i]));
        }
        return lp;
    }

    struct UpdateReport {
        double q_loss = 0;
        double v_loss = 0;
        double pi_loss = 0;
        double mean_log_pi = 0;
        double alpha = 0;
    };

    // Regression targets of one window, detached from the graph. Keeping
    // them explicit lets a finite-difference check rebuild the loss with the
    // targets pinned.
    struct WindowTargets {
        std::vector<double> q_target;
        std::vector<std::uint8_t> has_q;
        std::vector<double> v_target;
    };

    struct WindowLoss {
        int node = -1;
        double q_loss = 0, v_loss = 0, pi_loss = 0, sum_log_pi = 0;
        WindowTargets targets;
    };

    // Combined Q + V + policy loss of one window on the given tape. The
    // posterior-driven unroll is rebuilt under current model parameters, so
    // every loss backpropagates through time into the world model. When
    // `fixed_targets` is null the regression targets are computed here
    // (min-Q/V-target bootstrapping) and returned.
    WindowLoss build_window_loss(Tape& tape, const Window& w, const WorldModel& model,
                                 const std::vector<Vec>& eps_unroll, const std::vector<Vec>& eps_policy,
                                 double alpha_val, double n_steps, double n_q,
                                 const WindowTargets* fixed_targets = nullptr) const {
        const int L = static_cast<int>(w.obs.size());
        const auto u = model.build_unroll(tape, w.obs, w.init_state, eps_unroll);

        WindowLoss out;
        out.targets.q_target.assign(L, 0.0);
        out.targets.has_q.assign(L, 0);
        out.targets.v_target.assign(L, 0.0);

        int loss = tape.input_scalar(0.0);
        for (int t = 0; t < L; ++t) {
            if (w.mask[t] == 0.0) continue;
            const int h = u.states[t].h;

            // Policy sample and its log-probability.
            const int pi_raw = Mlp::build(tape, pi_, "pi", h, pi_layers_);
            const int mu = tape.slice(pi_raw, 0, cfg_.action_dim);
            const int sig = tape.softplus(tape.slice(pi_raw, cfg_.action_dim, cfg_.action_dim), kSigmaFloor);
            const int un = tape.gaussian_sample(mu, sig, tape.input(eps_policy[t]));
            const int a_pi = tape.scale(tape.tanh_(un), cfg_.action_max);
            const int diff = tape.div_(tape.sub(un, mu), sig);
            const int log_pi = tape.add(
                tape.add(tape.scale(tape.sum(tape.log_(sig)), -1.0),
                         tape.scale(tape.dot(diff, diff), -0.5)),
                tape.add(tape.scale(tape.sum(tape.add(un, tape.softplus(tape.scale(un, -2.0)))), 2.0),
                         tape.input_scalar(log_pi_const())));

            // Q on the fresh sample with frozen critic weights: the policy
            // loss differentiates through (h, a) only.
            const int ha_pi = tape.concat(h, a_pi);
            const int q1f = Mlp::build(tape, q1_, "q1", ha_pi, q_layers_, /*frozen=*/true);
            const int q2f = Mlp::build(tape, q2_, "q2", ha_pi, q_layers_, /*frozen=*/true);
            const int min_qf = tape.min2(q1f, q2f);

            const int pi_term = tape.add(tape.scale(log_pi, alpha_val), tape.scale(min_qf, -1.0));
            loss = tape.add(loss, tape.scale(pi_term, 1.0 / n_steps));
            out.pi_loss += tape.val(pi_term)[0];
            out.sum_log_pi += tape.val(log_pi)[0];

            // V regression toward min Q - alpha log pi (detached).
            const double v_target =
                fixed_targets ? fixed_targets->v_target[t]
                              : std::min(tape.val(q1f)[0], tape.val(q2f)[0]) - alpha_val * tape.val(log_pi)[0];
            out.targets.v_target[t] = v_target;
            const int v = Mlp::build(tape, v_, "v", h, v_layers_);
            const int dv = tape.sub(v, tape.input_scalar(v_target));
            const int v_term = tape.dot(dv, dv);
            loss = tape.add(loss, tape.scale(v_term, 1.0 / n_steps));
            out.v_loss += tape.val(v_term)[0];

            // Twin Q regression toward r + gamma*(1-done)*V_target(h').
            const bool bootstrap = !w.done[t] && t + 1 < L && w.mask[t + 1] != 0.0;
            if (w.done[t] || bootstrap) {
                double y;
                if (fixed_targets) {
                    y = fixed_targets->q_target[t];
                } else {
                    y = w.reward[t];
                    if (bootstrap) {
                        y += cfg_.gamma * Mlp::forward(vt_, "vt", tape.val(u.states[t + 1].h), v_layers_)[0];
                    }
                }
                out.targets.q_target[t] = y;
                out.targets.has_q[t] = 1;
                const int ha = tape.concat(h, tape.input(w.act[t]));
                const int q1n = Mlp::build(tape, q1_, "q1", ha, q_layers_);
                const int q2n = Mlp::build(tape, q2_, "q2", ha, q_layers_);
                const int d1 = tape.sub(q1n, tape.input_scalar(y));
                const int d2 = tape.sub(q2n, tape.input_scalar(y));
                const int q_term = tape.add(tape.dot(d1, d1), tape.dot(d2, d2));
                loss = tape.add(loss, tape.scale(q_term, 1.0 / n_q));
                out.q_loss += tape.val(q_term)[0];
            }
        }
        out.node = loss;
        return out;
    }

    // Fixed per-batch normalizers (valid steps, Q-loss steps).
    static std::pair<double, double> batch_normalizers(const std::vector<Window>& batch) {
        const int L = static_cast<int>(batch.front().obs.size());
        double n_steps = 0, n_q = 0;
        for (const auto& w : batch) {
            for (int t = 0; t < L; ++t) {
                if (w.mask[t] == 0.0) continue;
                n_steps += 1;
                if (w.done[t] || (t + 1 < L && w.mask[t + 1] != 0.0)) n_q += 1;
            }
        }
        return {n_steps, n_q};
    }

    // One SAC update on a batch of replay windows. The recurrence is re-run
    // (posterior-driven) under the current model parameters; Q, V and policy
    // losses backpropagate through it into the world model. Separate Adam
    // steps per head; the model step uses the summed RL gradient.
    UpdateReport update(const std::vector<Window>& batch, WorldModel& model,
                        const std::vector<std::vector<Vec>>& eps_unroll,
                        const std::vector<std::vector<Vec>>& eps_policy, Adam& opt_model,
                        Adam& opt_pi, Adam& opt_q1, Adam& opt_q2, Adam& opt_v, Adam& opt_alpha,
                        int threads = 1, bool accumulate_model_grads = false) {
        const auto [n_steps, n_q] = batch_normalizers(batch);
        if (n_steps == 0) throw std::invalid_argument("sac: batch has no valid steps");
        const double alpha_val = alpha();

        std::vector<WindowLoss> outs(batch.size());
        std::vector<std::unique_ptr<Tape>> tapes(batch.size());
        parallel_for(static_cast<int>(batch.size()), threads, [&](int wi) {
            tapes[wi] = std::make_unique<Tape>(/*local_grads=*/true);
            outs[wi] = build_window_loss(*tapes[wi], batch[wi], model, eps_unroll[wi], eps_policy[wi],
                                         alpha_val, n_steps, n_q);
            tapes[wi]->backward(outs[wi].node);
        });

        if (!accumulate_model_grads) model.params().zero_grad();
        pi_.zero_grad();
        q1_.zero_grad();
        q2_.zero_grad();
        v_.zero_grad();
        alpha_.zero_grad();

        UpdateReport rep;
        double sum_log_pi = 0;
        for (std::size_t wi = 0; wi < batch.size(); ++wi) {
            tapes[wi]->flush_param_grads();
            rep.q_loss += outs[wi].q_loss / (n_q > 0 ? n_q : 1.0);
            rep.v_loss += outs[wi].v_loss / n_steps;
            rep.pi_loss += outs[wi].pi_loss / n_steps;
            sum_log_pi += outs[wi].sum_log_pi;
        }
        rep.mean_log_pi = sum_log_pi / n_steps;

        // Temperature: minimize alpha * (-log pi - target entropy), log pi
        // detached.
        Tape atape;
        const int a_node = atape.exp_(atape.param(alpha_.get("alpha.log")));
        const int a_loss = atape.mul(a_node, atape.input_scalar(-(rep.mean_log_pi + cfg_.target_entropy)));
        atape.backward(a_loss);

        if (!accumulate_model_grads) opt_model.step(model.params());
        opt_pi.step(pi_);
        opt_q1.step(q1_);
        opt_q2.step(q2_);
        opt_v.step(v_);
        opt_alpha.step(alpha_);
        rep.alpha = alpha();

        // EMA target update.
        for (std::size_t i = 0; i < v_.size(); ++i) {
            Param& online = v_.at(i);
            Param& target = vt_.at(i);
            for (std::size_t k = 0; k < online.value.size(); ++k)
                target.value[k] = (1.0 - cfg_.tau_ema) * target.value[k] + cfg_.tau_ema * online.value[k];
        }
        return rep;
    }

private:
    SacConfig cfg_;
    int h_dim_;
    ParamStore pi_, q1_, q2_, v_, vt_, alpha_;
    std::vector<LayerSpec> pi_layers_, q_layers_, v_layers_;

    std::vector<LayerSpec> head_layers(int out_dim) const {
        std::vector<LayerSpec> layers;
        for (int l = 0; l < cfg_.hidden_layers; ++l) layers.push_back({cfg_.hidden_width, Activation::Relu});
        layers.push_back({out_dim, Activation::Identity});
        return layers;
    }

    double log_pi_const() const {
        return cfg_.action_dim * (-0.5 * std::log(2.0 * 3.141592653589793) - std::log(cfg_.action_max) -
                                  2.0 * std::log(2.0));
    }
};

} // namespace aifmaze

#endif
