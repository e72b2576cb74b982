#include <gtest/gtest.h>

#include <cmath>

#include "aifmaze/gradcheck.hpp"
#include "aifmaze/nn.hpp"
#include "aifmaze/tape.hpp"

using namespace aifmaze;

TEST(GaussianSample, IdentityCase) {
    Tape t;
    const int s = t.gaussian_sample(t.input({0.0}), t.input({1.0}), t.input({0.0}));
    EXPECT_DOUBLE_EQ(t.val(s)[0], 0.0);
}

TEST(GaussianSample, Arithmetic) {
    Tape t;
    const int s = t.gaussian_sample(t.input({1.0, 2.0}), t.input({0.5, 0.5}), t.input({2.0, -2.0}));
    EXPECT_DOUBLE_EQ(t.val(s)[0], 2.0);
    EXPECT_DOUBLE_EQ(t.val(s)[1], 1.0);
}

TEST(GaussianSample, DimensionMismatchThrows) {
    Tape t;
    EXPECT_THROW(t.gaussian_sample(t.input({0.0, 0.0}), t.input({1.0}), t.input({0.0, 0.0})),
                 std::invalid_argument);
}

// Jacobian w.r.t. mu is the identity, w.r.t. sigma is diag(eps); verified by
// central finite differences at h = 1e-6.
TEST(GaussianSample, JacobianMatchesFiniteDifferences) {
    Rng rng(7);
    const int n = 3;
    ParamStore ps;
    Param& mu = ps.add("mu", {n});
    Param& sigma = ps.add("sigma", {n});
    init_uniform(mu, -1, 1, rng);
    init_uniform(sigma, 0.2, 1.5, rng);
    Vec eps{0.7, -1.3, 0.4};

    for (int k = 0; k < n; ++k) {
        auto build = [&](Tape& t) {
            return t.slice(t.gaussian_sample(t.param(ps.get("mu")), t.param(ps.get("sigma")), t.input(eps)), k, 1);
        };
        ps.zero_grad();
        {
            Tape t;
            t.backward(build(t));
        }
        for (int j = 0; j < n; ++j) {
            EXPECT_NEAR(mu.grad[j], k == j ? 1.0 : 0.0, 1e-9);
            EXPECT_NEAR(sigma.grad[j], k == j ? eps[k] : 0.0, 1e-9);
        }
        auto loss = [&]() {
            Tape t;
            return t.val(build(t))[0];
        };
        EXPECT_LT(grad_check(loss, {&ps}).max_rel_err, 1e-6);
    }
}

TEST(KlDiagGaussian, IdenticalDistributionsGiveZero) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_int(6));
        Vec mu(n), sigma(n);
        for (auto& v : mu) v = rng.uniform(-3, 3);
        for (auto& v : sigma) v = rng.uniform(0.01, 4.0);
        Tape t;
        const int kl = t.kl_diag(t.input(mu), t.input(sigma), t.input(mu), t.input(sigma));
        EXPECT_DOUBLE_EQ(t.val(kl)[0], 0.0);
    }
}

// KL(N(1,1) || N(0,1)) = 0.5 in closed form.
TEST(KlDiagGaussian, UnitShiftClosedForm) {
    Tape t;
    const int kl = t.kl_diag(t.input({1.0}), t.input({1.0}), t.input({0.0}), t.input({1.0}));
    EXPECT_NEAR(t.val(kl)[0], 0.5, 1e-12);
}

TEST(KlDiagGaussian, NonNegativeOverRandomDraws) {
    Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        Vec muq(4), sq(4), mup(4), sp(4);
        for (auto& v : muq) v = rng.uniform(-5, 5);
        for (auto& v : mup) v = rng.uniform(-5, 5);
        for (auto& v : sq) v = rng.uniform(1e-3, 5.0);
        for (auto& v : sp) v = rng.uniform(1e-3, 5.0);
        Tape t;
        const int kl = t.kl_diag(t.input(muq), t.input(sq), t.input(mup), t.input(sp));
        EXPECT_GE(t.val(kl)[0], -1e-12);
    }
}

TEST(KlDiagGaussian, NonPositiveSigmaThrows) {
    Tape t;
    EXPECT_THROW(t.kl_diag(t.input({0.0}), t.input({0.0}), t.input({0.0}), t.input({1.0})), std::domain_error);
    EXPECT_THROW(t.kl_diag(t.input({0.0}), t.input({1.0}), t.input({0.0}), t.input({-1.0})), std::domain_error);
}

TEST(BernoulliCe, ClosedFormCases) {
    Tape t;
    EXPECT_NEAR(t.val(t.bernoulli_ce(t.input({0.5}), t.input({0.5})))[0], std::log(2.0), 1e-12);
    EXPECT_NEAR(t.val(t.bernoulli_ce(t.input({0.9}), t.input({1.0})))[0], -std::log(0.9), 1e-12);
}

TEST(BernoulliCe, DomainErrors) {
    Tape t;
    EXPECT_THROW(t.bernoulli_ce(t.input({0.0}), t.input({0.5})), std::domain_error);
    EXPECT_THROW(t.bernoulli_ce(t.input({1.0}), t.input({0.5})), std::domain_error);
    EXPECT_THROW(t.bernoulli_ce(t.input({0.5}), t.input({1.5})), std::domain_error);
}

TEST(BernoulliCe, NonNegative) {
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        Tape t;
        const int ce = t.bernoulli_ce(t.input({rng.uniform(1e-6, 1.0 - 1e-6)}), t.input({rng.uniform()}));
        EXPECT_GE(t.val(ce)[0], 0.0);
    }
}

// For a fixed target, the cross entropy over a pred grid is minimized at
// pred = target.
TEST(BernoulliCe, GridSearchMinimumAtTarget) {
    for (double target : {0.13, 0.5, 0.82}) {
        double best_pred = -1, best_ce = 1e300;
        for (int i = 1; i <= 99; ++i) {
            const double pred = i / 100.0;
            Tape t;
            const double ce = t.val(t.bernoulli_ce(t.input({pred}), t.input({target})))[0];
            if (ce < best_ce) {
                best_ce = ce;
                best_pred = pred;
            }
        }
        EXPECT_NEAR(best_pred, target, 0.005 + 1e-12);
    }
}

TEST(LstmStep, ZeroWeightsZeroStateGiveZeroHidden) {
    ParamStore ps;
    ps.add("cell.W", {16, 7});
    ps.add("cell.b", {16});
    RnnState s = RnnState::zeros(4);
    Lstm::forward(ps, "cell", Vec{0, 0, 0}, s);
    for (double v : s.h) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(LstmStep, HiddenValuesBounded) {
    Rng rng(17);
    ParamStore ps;
    Lstm::init(ps, "cell", 3, 8, rng);
    for (auto& v : ps.get("cell.W").value) v = rng.uniform(-3, 3);
    RnnState s = RnnState::zeros(8);
    for (int step = 0; step < 200; ++step) {
        Vec in{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        Lstm::forward(ps, "cell", in, s);
        for (double v : s.h) {
            EXPECT_GT(v, -1.0);
            EXPECT_LT(v, 1.0);
        }
    }
}

TEST(LstmStep, TapeAndPlainForwardAgree) {
    Rng rng(19);
    ParamStore ps;
    Lstm::init(ps, "cell", 3, 5, rng);
    Vec in{0.3, -0.8, 1.2};
    RnnState s{{0.1, -0.2, 0.3, 0.0, -0.5}, {0.4, 0.0, -0.1, 0.2, 0.9}};

    Tape t;
    const auto nodes = Lstm::build(t, ps, "cell", t.input(in), {t.input(s.h), t.input(s.c)});
    RnnState plain = s;
    Lstm::forward(ps, "cell", in, plain);
    for (int i = 0; i < 5; ++i) {
        EXPECT_DOUBLE_EQ(t.val(nodes.h)[i], plain.h[i]);
        EXPECT_DOUBLE_EQ(t.val(nodes.c)[i], plain.c[i]);
    }
}

TEST(MlpForward, IdentityNetworkIsIdentity) {
    Rng rng(13);
    ParamStore ps;
    const std::vector<LayerSpec> layers{{3, Activation::Identity}, {3, Activation::Identity}};
    Mlp::init(ps, "m", 3, layers, rng);
    for (int l = 0; l < 2; ++l) {
        Param& W = ps.get("m.W" + std::to_string(l));
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) W.value[r * 3 + c] = r == c ? 1.0 : 0.0;
    }
    const Vec x{0.4, -1.7, 2.5};
    const Vec y = Mlp::forward(ps, "m", x, layers);
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(y[i], x[i]);
}

TEST(MlpForward, SoftplusClosedForm) {
    EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-12);
    Tape t;
    const int y = t.softplus(t.input({0.0}));
    t.backward(t.sum(y));
    EXPECT_NEAR(t.grad(0)[0], 0.5, 1e-12);
}

TEST(MlpForward, SoftmaxOfZerosIsUniform) {
    Tape t;
    const int y = t.softmax(t.input(Vec(8, 0.0)));
    for (double v : t.val(y)) EXPECT_DOUBLE_EQ(v, 0.125);
}

TEST(MlpForward, UnknownActivationNameIsConfigError) {
    EXPECT_THROW(activation_from_string("swish"), ConfigError);
    EXPECT_EQ(activation_from_string("tanh"), Activation::Tanh);
}

// L = sum(w) has gradient exactly 1 everywhere; finite differences agree up
// to rounding.
TEST(GradCheck, LinearLossNearZeroError) {
    Rng rng(23);
    ParamStore ps;
    Param& w = ps.add("w", {16});
    init_uniform(w, -1, 1, rng);
    auto loss = [&]() {
        Tape t;
        return t.val(t.sum(t.param(ps.get("w"))))[0];
    };
    ps.zero_grad();
    {
        Tape t;
        t.backward(t.sum(t.param(ps.get("w"))));
    }
    EXPECT_LT(grad_check(loss, {&ps}).max_rel_err, 1e-8);
}

// Sample mean over 1e5 reparameterized draws approximates mu within
// 4*sigma/sqrt(1e5) per dimension.
TEST(GaussianSample, SampleMeanApproximatesMu) {
    Rng rng(29);
    const Vec mu{0.3, -1.2};
    const Vec sigma{0.7, 1.9};
    const int n = 100000;
    Vec mean(2, 0.0);
    for (int i = 0; i < n; ++i) {
        Tape t;
        const int s = t.gaussian_sample(t.input(mu), t.input(sigma), t.input({rng.normal(), rng.normal()}));
        mean[0] += t.val(s)[0];
        mean[1] += t.val(s)[1];
    }
    for (int d = 0; d < 2; ++d) {
        mean[d] /= n;
        EXPECT_NEAR(mean[d], mu[d], 4.0 * sigma[d] / std::sqrt(static_cast<double>(n)));
    }
}

TEST(Tape, ForwardDeterministicGivenInputs) {
    Rng rng(31);
    ParamStore ps;
    Lstm::init(ps, "cell", 2, 6, rng);
    Vec in{0.5, -0.25};
    RnnState s = RnnState::zeros(6);

    auto run = [&]() {
        Tape t;
        auto nodes = Lstm::build(t, ps, "cell", t.input(in), {t.input(s.h), t.input(s.c)});
        return t.val(nodes.h);
    };
    EXPECT_EQ(run(), run());
}

TEST(Optimizers, RmsPropMatchesStatedFormula) {
    ParamStore ps;
    Param& w = ps.add("w", {1});
    w.value[0] = 1.0;
    w.grad[0] = 2.0;
    RmsProp opt{0.005, 0.9};
    opt.step(ps);
    const double acc = 0.1 * 4.0;
    EXPECT_NEAR(w.value[0], 1.0 - 0.005 * 2.0 / (std::sqrt(acc) + 1e-8), 1e-15);
}

TEST(Optimizers, AdamMatchesStatedFormula) {
    ParamStore ps;
    Param& w = ps.add("w", {1});
    w.value[0] = 1.0;
    w.grad[0] = 2.0;
    Adam opt;
    opt.lr = 0.1;
    opt.step(ps);
    const double m_hat = (0.1 * 2.0) / (1 - 0.9);
    const double v_hat = (0.001 * 4.0) / (1 - 0.999);
    EXPECT_NEAR(w.value[0], 1.0 - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
}

TEST(ParamStore, DuplicateNameThrows) {
    ParamStore ps;
    ps.add("w", {2});
    EXPECT_THROW(ps.add("w", {3}), std::invalid_argument);
}
