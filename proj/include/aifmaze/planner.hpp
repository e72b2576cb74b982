#ifndef AIFMAZE_PLANNER_HPP
#define AIFMAZE_PLANNER_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "aifmaze/sac.hpp"
#include "aifmaze/worldmodel.hpp"

namespace aifmaze {

struct PlanConfig {
    int horizon = 8; // N future steps
    int batch = 16;  // independently initialized members
    int steps = 1000;
    double lr = 0.005;
    double decay = 0.9;
    double init_std = 0.1;
    bool warm_start = false;
    int threads = 1;
};

// Trainable plan: A_mu/A_sigma for tau = -1..N-1 and A_c for tau = 0..N-1.
// The plan's internal states are z_tau = tanh(A_mu_tau); sigma_tau =
// softplus(A_sigma_tau); c = softmax(A_c).
struct PlanVariables {
    ParamStore store;
};

// Carried history for planning at the current step. When has_post is set,
// h_base is the state from two steps back and the objective re-fits the
// previous step's internal state against the current observation
// (postdiction). At the start of an episode there is no previous step;
// h_base is then the zero state advanced by the posterior of the first
// observation and used directly.
struct PlanContext {
    RnnState h_base;
    bool has_post = false;
    Vec x_now;
    Vec x_goal;
};

struct PlanResult {
    double free_energy = 0;
    double initial_free_energy = 0;
    Vec c;
    double expected_steps = 0; // l = sum c_tau * (tau+1)
    Vec z_now;
    Vec z_prev;
    std::vector<Vec> predicted_obs;
    int member = 0;
};

// Goal-directed planning by error regression: gradient descent on the plan
// variables against the free energy for a goal observation, with all model
// weights fixed.
class Planner {
public:
    Planner(const WorldModel& model, PlanConfig cfg) : model_(&model), cfg_(cfg) {
        if (cfg.horizon <= 0 || cfg.batch <= 0 || cfg.steps < 0) throw ConfigError("planner: bad config");
    }

    const PlanConfig& config() const { return cfg_; }

    std::vector<PlanVariables> init_members(Rng& rng) const {
        std::vector<PlanVariables> members(cfg_.batch);
        for (auto& m : members) {
            const int z = model_->config().z_dim;
            auto gauss_init = [&](Param& p) {
                for (auto& v : p.value) v = rng.normal(0.0, cfg_.init_std);
            };
            gauss_init(m.store.add("A_mu_prev", {z}));
            gauss_init(m.store.add("A_sig_prev", {z}));
            for (int tau = 0; tau < cfg_.horizon; ++tau) {
                gauss_init(m.store.add(mu_name(tau), {z}));
                gauss_init(m.store.add(sig_name(tau), {z}));
            }
            m.store.add("A_c", {cfg_.horizon}); // zeros: c starts uniform
        }
        return members;
    }

    struct Graph {
        int loss = -1;
        int c = -1;
        int z_now = -1;
        int z_prev = -1;
        std::vector<int> z_all;
        std::vector<int> sigma_all;
        std::vector<int> decoded;
    };

    // The planning objective: postdiction KL and reconstruction of the
    // current observation through z_{t-1}, then for each future offset the
    // KL against the prior plus c_tau-weighted goal reconstruction. Future
    // KL terms carry no c weight. Model parameters enter frozen.
    Graph build_objective(Tape& tape, PlanVariables& vars, const PlanContext& ctx) const {
        Graph g;
        Lstm::Nodes state{tape.input(ctx.h_base.h), tape.input(ctx.h_base.c)};
        int loss = tape.input_scalar(0.0);
        if (ctx.has_post) {
            const auto prior_prev = model_->build_prior(tape, state.h, /*frozen=*/true);
            g.z_prev = tape.tanh_(tape.param(vars.store.get("A_mu_prev")));
            const int sig_prev = tape.softplus(tape.param(vars.store.get("A_sig_prev")), kSigmaFloor);
            loss = tape.add(loss, tape.kl_diag(g.z_prev, sig_prev, prior_prev.mu, prior_prev.sigma));
            state = model_->build_rnn_step(tape, g.z_prev, state, /*frozen=*/true);
            const int probs = model_->build_decode(tape, state.h, /*frozen=*/true);
            loss = tape.add(loss, tape.bernoulli_ce(probs, tape.input(ctx.x_now)));
        }
        g.c = tape.softmax(tape.param(vars.store.get("A_c")));
        const int goal = tape.input(ctx.x_goal);
        for (int tau = 0; tau < cfg_.horizon; ++tau) {
            const auto prior_tau = model_->build_prior(tape, state.h, /*frozen=*/true);
            const int z_tau = tape.tanh_(tape.param(vars.store.get(mu_name(tau))));
            const int sig_tau = tape.softplus(tape.param(vars.store.get(sig_name(tau))), kSigmaFloor);
            loss = tape.add(loss, tape.kl_diag(z_tau, sig_tau, prior_tau.mu, prior_tau.sigma));
            state = model_->build_rnn_step(tape, z_tau, state, /*frozen=*/true);
            const int probs = model_->build_decode(tape, state.h, /*frozen=*/true);
            loss = tape.add(loss, tape.mul(tape.slice(g.c, tau, 1), tape.bernoulli_ce(probs, goal)));
            g.decoded.push_back(probs);
            g.z_all.push_back(z_tau);
            g.sigma_all.push_back(sig_tau);
            if (tau == 0) g.z_now = z_tau;
        }
        g.loss = loss;
        return g;
    }

    double objective_value(PlanVariables& vars, const PlanContext& ctx) const {
        Tape tape;
        return tape.val(build_objective(tape, vars, ctx).loss)[0];
    }

    // RMSProp descent, each member independent; the tape is built once per
    // member and re-run in place.
    std::vector<PlanResult> regress(std::vector<PlanVariables>& members, const PlanContext& ctx) const {
        std::vector<PlanResult> results(members.size());
        parallel_for(static_cast<int>(members.size()), cfg_.threads, [&](int mi) {
            Tape tape;
            Graph g = build_objective(tape, members[mi], ctx);
            const double f0 = tape.val(g.loss)[0];
            RmsProp opt{cfg_.lr, cfg_.decay};
            for (int it = 0; it < cfg_.steps; ++it) {
                members[mi].store.zero_grad();
                tape.backward(g.loss);
                opt.step(members[mi].store);
                tape.recompute();
                check_invariants(tape, g);
            }
            results[mi] = extract(tape, g, ctx, mi);
            results[mi].initial_free_energy = f0;
        });
        return results;
    }

    // Drops the ceil(n/2) members with the highest free energy, then picks
    // the smallest expected arrival; ties fall to lower free energy, then
    // lower member index.
    static std::size_t select_plan(const std::vector<PlanResult>& results) {
        if (results.size() < 2) throw std::invalid_argument("select_plan: need at least two members");
        std::vector<std::size_t> order(results.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return results[a].free_energy < results[b].free_energy;
        });
        const std::size_t keep = results.size() - (results.size() + 1) / 2;
        std::size_t best = order[0];
        for (std::size_t i = 1; i < keep; ++i) {
            const PlanResult& cand = results[order[i]];
            const PlanResult& cur = results[best];
            if (cand.expected_steps < cur.expected_steps ||
                (cand.expected_steps == cur.expected_steps &&
                 (cand.free_energy < cur.free_energy ||
                  (cand.free_energy == cur.free_energy && results[order[i]].member < cur.member)))) {
                best = order[i];
            }
        }
        return best;
    }

private:
    const WorldModel* model_;
    PlanConfig cfg_;

    static std::string mu_name(int tau) { return "A_mu_" + std::to_string(tau); }
    static std::string sig_name(int tau) { return "A_sig_" + std::to_string(tau); }

    void check_invariants(const Tape& tape, const Graph& g) const {
        const Vec& c = tape.val(g.c);
        double s = 0;
        for (double v : c) {
            if (v < 0) throw std::logic_error("planner: c component negative");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-12) throw std::logic_error("planner: c left the simplex");
        for (int zi : g.z_all) {
            for (double v : tape.val(zi)) {
                if (!(v > -1.0 && v < 1.0)) throw std::logic_error("planner: z outside (-1,1)");
            }
        }
        for (int si : g.sigma_all) {
            for (double v : tape.val(si)) {
                if (!(v > 0.0)) throw std::logic_error("planner: sigma not positive");
            }
        }
    }

    PlanResult extract(const Tape& tape, const Graph& g, const PlanContext& ctx, int member) const {
        PlanResult r;
        r.member = member;
        r.free_energy = tape.val(g.loss)[0];
        r.c = tape.val(g.c);
        r.expected_steps = 0;
        for (int tau = 0; tau < cfg_.horizon; ++tau) r.expected_steps += r.c[tau] * (tau + 1);
        r.z_now = tape.val(g.z_now);
        if (ctx.has_post) r.z_prev = tape.val(g.z_prev);
        for (int d : g.decoded) r.predicted_obs.push_back(tape.val(d));
        return r;
    }
};

// Drives one goal-directed episode: replans at every actual time step,
// executes the mean policy action from the selected plan's current internal
// state, and carries the history forward with that plan's postdiction state.
class GoalDirectedController {
public:
    GoalDirectedController(const WorldModel& model, const SacAgent& agent, PlanConfig cfg)
        : model_(&model), agent_(&agent), planner_(model, cfg) {}

    const Planner& planner() const { return planner_; }

    void begin_episode(const Vec& x0, const Vec& x_goal) {
        RnnState s = model_->zero_state();
        const LatentGaussian q = model_->posterior(x0, s);
        model_->rnn_step(q.mu, s);
        ctx_ = PlanContext{std::move(s), /*has_post=*/false, x0, x_goal};
        members_.clear();
    }

    // Full plan-act cycle at the current observation. Optionally reports the
    // selected member and the whole batch.
    Vec act(const Vec& x_now, Rng& rng, PlanResult* selected_out = nullptr,
            std::vector<PlanResult>* batch_out = nullptr) {
        ctx_.x_now = x_now;
        if (!planner_.config().warm_start || members_.empty()) {
            members_ = planner_.init_members(rng);
        } else {
            shift_members(rng);
        }
        auto results = planner_.regress(members_, ctx_);
        const std::size_t sel = Planner::select_plan(results);

        RnnState h_prev = ctx_.h_base;
        if (ctx_.has_post) model_->rnn_step(results[sel].z_prev, h_prev);
        RnnState h_now = h_prev;
        model_->rnn_step(results[sel].z_now, h_now);
        Vec action = agent_->act(h_now.h, /*explore=*/false);

        // Advance history: the postdiction-updated state becomes the next
        // step's two-back state; after the first step postdiction turns on.
        if (ctx_.has_post) {
            ctx_.h_base = std::move(h_prev);
        } else {
            ctx_.has_post = true;
        }
        if (selected_out) *selected_out = results[sel];
        if (batch_out) *batch_out = std::move(results);
        return action;
    }

private:
    const WorldModel* model_;
    const SacAgent* agent_;
    Planner planner_;
    PlanContext ctx_;
    std::vector<PlanVariables> members_;

    // Warm start: slide the plan one step into the future, refresh the tail
    // and the arrival weights.
    void shift_members(Rng& rng) {
        const int N = planner_.config().horizon;
        for (auto& m : members_) {
            m.store.get("A_mu_prev").value = m.store.get("A_mu_0").value;
            m.store.get("A_sig_prev").value = m.store.get("A_sig_0").value;
            for (int tau = 0; tau + 1 < N; ++tau) {
                m.store.get("A_mu_" + std::to_string(tau)).value =
                    m.store.get("A_mu_" + std::to_string(tau + 1)).value;
                m.store.get("A_sig_" + std::to_string(tau)).value =
                    m.store.get("A_sig_" + std::to_string(tau + 1)).value;
            }
            for (auto& v : m.store.get("A_mu_" + std::to_string(N - 1)).value)
                v = rng.normal(0.0, planner_.config().init_std);
            for (auto& v : m.store.get("A_sig_" + std::to_string(N - 1)).value)
                v = rng.normal(0.0, planner_.config().init_std);
            auto& ac = m.store.get("A_c").value;
            std::fill(ac.begin(), ac.end(), 0.0);
            for (std::size_t i = 0; i < m.store.size(); ++i) {
                Param& p = m.store.at(i);
                std::fill(p.slot_m.begin(), p.slot_m.end(), 0.0);
                std::fill(p.slot_v.begin(), p.slot_v.end(), 0.0);
            }
        }
    }
};

} // namespace aifmaze

#endif
