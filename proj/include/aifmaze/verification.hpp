#ifndef AIFMAZE_VERIFICATION_HPP
#define AIFMAZE_VERIFICATION_HPP

#include <string>
#include <vector>

#include "aifmaze/gradcheck.hpp"
#include "aifmaze/planner.hpp"
#include "aifmaze/sac.hpp"
#include "aifmaze/worldmodel.hpp"

namespace aifmaze {

struct VerificationResult {
    std::string name;
    double max_rel_err = 0;
    double tolerance = 0;
    bool pass = false;
};

// Finite-difference verification of every differentiable operation and of
// the two full objectives (window free energy; planning free energy), on
// small randomized instances in 64-bit.
inline std::vector<VerificationResult> run_gradient_suite(std::uint64_t seed = 0) {
    std::vector<VerificationResult> results;
    Rng rng(seed);
    auto record = [&](const std::string& name, double err, double tol) {
        results.push_back({name, err, tol, err < tol});
    };

    const int z_dim = 4, h_dim = 8, obs_dim = 6, T = 4;

    // Elementary stochastic/divergence/likelihood ops through a random
    // linear readout.
    {
        ParamStore ps;
        Param& mu = ps.add("mu", {z_dim});
        Param& rawsig = ps.add("rawsig", {z_dim});
        init_uniform(mu, -1, 1, rng);
        init_uniform(rawsig, -1, 1, rng);
        Vec eps(z_dim), probe(z_dim);
        for (auto& v : eps) v = rng.normal();
        for (auto& v : probe) v = rng.uniform(-1, 1);
        auto loss = [&]() {
            Tape t;
            const int sig = t.softplus(t.param(ps.get("rawsig")), kSigmaFloor);
            const int s = t.gaussian_sample(t.param(ps.get("mu")), sig, t.input(eps));
            return t.val(t.dot(s, t.input(probe)))[0];
        };
        ps.zero_grad();
        {
            Tape t;
            const int sig = t.softplus(t.param(ps.get("rawsig")), kSigmaFloor);
            const int s = t.gaussian_sample(t.param(ps.get("mu")), sig, t.input(eps));
            t.backward(t.dot(s, t.input(probe)));
        }
        record("gaussian_sample", grad_check(loss, {&ps}).max_rel_err, 1e-5);
    }
    {
        ParamStore ps;
        for (const char* n : {"muq", "rsq", "mup", "rsp"}) init_uniform(ps.add(n, {z_dim}), -1, 1, rng);
        auto build = [&](Tape& t) {
            const int sq = t.softplus(t.param(ps.get("rsq")), kSigmaFloor);
            const int sp = t.softplus(t.param(ps.get("rsp")), kSigmaFloor);
            return t.kl_diag(t.param(ps.get("muq")), sq, t.param(ps.get("mup")), sp);
        };
        auto loss = [&]() {
            Tape t;
            return t.val(build(t))[0];
        };
        ps.zero_grad();
        {
            Tape t;
            t.backward(build(t));
        }
        record("kl_diag_gaussian", grad_check(loss, {&ps}).max_rel_err, 1e-5);
    }
    {
        ParamStore ps;
        init_uniform(ps.add("logits", {obs_dim}), -2, 2, rng);
        Vec target(obs_dim);
        for (auto& v : target) v = rng.uniform();
        auto build = [&](Tape& t) {
            return t.bernoulli_ce(t.sigmoid(t.param(ps.get("logits")), kLogitClamp), t.input(target));
        };
        auto loss = [&]() {
            Tape t;
            return t.val(build(t))[0];
        };
        ps.zero_grad();
        {
            Tape t;
            t.backward(build(t));
        }
        record("bernoulli_ce", grad_check(loss, {&ps}).max_rel_err, 1e-5);
    }

    // Full LSTM Jacobian on a 4-unit cell, every output against every
    // parameter and input.
    {
        const int in_dim = 3, hid = 4;
        ParamStore ps;
        Lstm::init(ps, "cell", in_dim, hid, rng);
        Param& x = ps.add("x", {in_dim});
        Param& h0 = ps.add("h0", {hid});
        Param& c0 = ps.add("c0", {hid});
        for (Param* p : {&x, &h0, &c0}) init_uniform(*p, -1, 1, rng);
        double worst = 0;
        for (int out_part = 0; out_part < 2; ++out_part) {
            for (int k = 0; k < hid; ++k) {
                auto build = [&](Tape& t) {
                    Lstm::Nodes st{t.param(ps.get("h0")), t.param(ps.get("c0"))};
                    const auto nxt = Lstm::build(t, ps, "cell", t.param(ps.get("x")), st);
                    return t.slice(out_part == 0 ? nxt.h : nxt.c, k, 1);
                };
                auto loss = [&]() {
                    Tape t;
                    return t.val(build(t))[0];
                };
                ps.zero_grad();
                {
                    Tape t;
                    t.backward(build(t));
                }
                worst = std::max(worst, grad_check(loss, {&ps}).max_rel_err);
            }
        }
        record("lstm_step jacobian", worst, 1e-6);
    }

    // Feedforward stack covering every supported activation.
    {
        ParamStore ps;
        const std::vector<LayerSpec> layers{{5, Activation::Tanh},
                                            {5, Activation::Relu},
                                            {5, Activation::Softplus},
                                            {5, Activation::Sigmoid},
                                            {5, Activation::Softmax}};
        Mlp::init(ps, "mlp", 4, layers, rng);
        Param& x = ps.add("x", {4});
        init_uniform(x, -1, 1, rng);
        Vec probe(5);
        for (auto& v : probe) v = rng.uniform(-1, 1);
        auto build = [&](Tape& t) {
            return t.dot(Mlp::build(t, ps, "mlp", t.param(ps.get("x")), layers), t.input(probe));
        };
        auto loss = [&]() {
            Tape t;
            return t.val(build(t))[0];
        };
        ps.zero_grad();
        {
            Tape t;
            t.backward(build(t));
        }
        record("mlp_forward", grad_check(loss, {&ps}).max_rel_err, 1e-5);
    }

    // Full window free energy (length 4, fixed noise).
    {
        Rng mrng(seed + 1);
        WorldModel model({obs_dim, z_dim, h_dim, 8, 2}, mrng);
        std::vector<Vec> obs(T, Vec(obs_dim));
        std::vector<Vec> eps(T, Vec(z_dim));
        for (auto& o : obs)
            for (auto& v : o) v = rng.uniform();
        for (auto& e : eps)
            for (auto& v : e) v = rng.normal();
        const Vec mask(T, 1.0);
        const RnnState init = model.zero_state();
        auto loss = [&]() { return model.free_energy(obs, mask, init, eps); };
        model.params().zero_grad();
        {
            Tape t;
            t.backward(model.build_free_energy(t, obs, mask, init, eps));
        }
        record("free_energy window", grad_check(loss, {&model.params()}).max_rel_err, 1e-5);
    }

    // Full planning objective, gradients with respect to every plan
    // variable (model weights frozen).
    {
        Rng mrng(seed + 2);
        WorldModel model({obs_dim, z_dim, h_dim, 8, 2}, mrng);
        PlanConfig pc;
        pc.horizon = 8;
        pc.batch = 1;
        Planner planner(model, pc);
        auto members = planner.init_members(rng);
        PlanContext ctx;
        ctx.h_base = model.zero_state();
        for (auto& v : ctx.h_base.h) v = rng.uniform(-0.5, 0.5);
        for (auto& v : ctx.h_base.c) v = rng.uniform(-0.5, 0.5);
        ctx.has_post = true;
        ctx.x_now.assign(obs_dim, 0.0);
        ctx.x_goal.assign(obs_dim, 0.0);
        for (auto& v : ctx.x_now) v = rng.uniform();
        for (auto& v : ctx.x_goal) v = rng.uniform();
        auto loss = [&]() { return planner.objective_value(members[0], ctx); };
        members[0].store.zero_grad();
        {
            Tape t;
            t.backward(planner.build_objective(t, members[0], ctx).loss);
        }
        record("planning free energy", grad_check(loss, {&members[0].store}).max_rel_err, 1e-5);
    }

    // Combined SAC losses on a 4-step toy window, through the unroll into
    // the model parameters (targets pinned).
    {
        Rng mrng(seed + 3);
        WorldModel model({obs_dim, z_dim, h_dim, 8, 2}, mrng);
        SacConfig sc;
        sc.hidden_width = 8;
        sc.hidden_layers = 2;
        SacAgent agent(sc, h_dim, mrng);
        Window w;
        w.obs.assign(T, Vec(obs_dim));
        w.act.assign(T, Vec(2));
        w.reward.assign(T, 0.0);
        w.done.assign(T, 0);
        w.mask.assign(T, 1.0);
        w.valid = T;
        w.init_state = model.zero_state();
        for (auto& o : w.obs)
            for (auto& v : o) v = rng.uniform();
        for (auto& a : w.act)
            for (auto& v : a) v = rng.uniform(-2, 2);
        w.reward[1] = -2.5;
        w.done[T - 1] = 1;
        w.reward[T - 1] = 100.0;
        std::vector<Vec> eps_u(T, Vec(z_dim)), eps_p(T, Vec(2));
        for (auto& e : eps_u)
            for (auto& v : e) v = rng.normal();
        for (auto& e : eps_p)
            for (auto& v : e) v = rng.normal();

        SacAgent::WindowTargets targets;
        {
            Tape t;
            targets = agent.build_window_loss(t, w, model, eps_u, eps_p, agent.alpha(), T, T).targets;
        }
        auto build = [&](Tape& t) {
            return agent.build_window_loss(t, w, model, eps_u, eps_p, agent.alpha(), T, T, &targets).node;
        };
        auto loss = [&]() {
            Tape t;
            return t.val(build(t))[0];
        };
        std::vector<ParamStore*> stores{&model.params(), &agent.pi_store(), &agent.q1_store(),
                                        &agent.q2_store(), &agent.v_store()};
        for (auto* s : stores) s->zero_grad();
        {
            Tape t;
            t.backward(build(t));
        }
        record("sac losses", grad_check(loss, stores).max_rel_err, 1e-4);
    }

    return results;
}

} // namespace aifmaze

#endif
