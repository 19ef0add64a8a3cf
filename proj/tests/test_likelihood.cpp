#include "bgi/bellman_gradient.hpp"
#include "bgi/environments.hpp"
#include "bgi/irl_solver.hpp"
#include "bgi/likelihood.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bgi;

namespace {

std::vector<Trajectory> all_pairs(std::size_t n_states, std::size_t n_actions) {
    std::vector<Trajectory> out(1);
    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t a = 0; a < n_actions; ++a) out[0].steps.push_back({s, a});
    return out;
}

RowMatrix random_q(std::mt19937_64& rng, Eigen::Index s, Eigen::Index a) {
    RowMatrix q(s, a);
    std::uniform_real_distribution<double> u(-3, 3);
    for (auto& x : q.reshaped()) x = u(rng);
    return q;
}

}  // namespace

TEST(ActionProbabilities, UniformOnConstantRows) {
    const RowMatrix q = RowMatrix::Constant(3, 4, 2.0);
    const RowMatrix p = action_probabilities(q, {5.0});
    for (double x : p.reshaped()) EXPECT_NEAR(x, 0.25, 1e-15);
}

TEST(ActionProbabilities, Logistic) {
    RowMatrix q(1, 2);
    q << 1.0, 2.0;
    const RowMatrix p = action_probabilities(q, {1.0});
    EXPECT_NEAR(p(0, 0), 0.2689414213699951, 1e-12);
    EXPECT_NEAR(p(0, 1), 0.7310585786300049, 1e-12);
}

TEST(ActionProbabilities, ShiftInvariantAndNormalised) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const RowMatrix q = random_q(rng, 5, 3);
        const double b = 0.1 + trial;
        const RowMatrix p = action_probabilities(q, {b});
        const RowMatrix shifted = action_probabilities((q.array() + 123.4).matrix(), {b});
        EXPECT_LT((p - shifted).cwiseAbs().maxCoeff(), 1e-12);
        for (Eigen::Index s = 0; s < 5; ++s) EXPECT_NEAR(p.row(s).sum(), 1.0, 1e-12);
    }
}

TEST(ActionProbabilities, HugeValuesStayFinite) {
    RowMatrix q(1, 3);
    q << 1e6, 1e6 - 1, -1e6;
    EXPECT_TRUE(action_probabilities(q, {100.0}).allFinite());
}

TEST(LogLikelihood, SingleActionIsZero) {
    std::mt19937_64 rng(4);
    const RowMatrix q = random_q(rng, 6, 1);
    const auto data = all_pairs(6, 1);
    EXPECT_EQ(log_likelihood(data, q, {3.0}), 0.0);
    const RowMatrix dq = RowMatrix::Random(6, 2);
    EXPECT_TRUE(log_likelihood_grad(data, q, dq, {3.0}).isZero(0.0));
}

TEST(LogLikelihood, UniformIsMinusLogN) {
    const RowMatrix q = RowMatrix::Zero(2, 4);
    const std::vector<Trajectory> data{Trajectory{{{1, 3}}}};
    EXPECT_NEAR(log_likelihood(data, q, {1.0}), -std::log(4.0), 1e-15);
}

TEST(LogLikelihood, ExponentiatesToPairProbabilities) {
    std::mt19937_64 rng(6);
    const RowMatrix q = random_q(rng, 4, 3);
    const RowMatrix p = action_probabilities(q, {2.0});
    for (std::size_t s = 0; s < 4; ++s)
        for (std::size_t a = 0; a < 3; ++a) {
            const std::vector<Trajectory> one{Trajectory{{{s, a}}}};
            EXPECT_NEAR(std::exp(log_likelihood(one, q, {2.0})),
                        p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)), 1e-12);
        }
}

TEST(LogLikelihood, NeverPositive) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 100; ++trial) {
        const RowMatrix q = random_q(rng, 5, 4) * (1 + trial);
        EXPECT_LE(log_likelihood(all_pairs(5, 4), q, {0.5 * trial}), 0.0);
    }
}

TEST(LogLikelihood, AdditiveOverTrajectories) {
    std::mt19937_64 rng(12);
    const RowMatrix q = random_q(rng, 3, 2);
    const Trajectory a{{{0, 1}, {2, 0}}}, b{{{1, 1}}};
    EXPECT_NEAR(log_likelihood({a, b}, q, {1.5}),
                log_likelihood({a}, q, {1.5}) + log_likelihood({b}, q, {1.5}), 1e-12);
    EXPECT_EQ(log_likelihood({a, b}, q, {1.5}), log_likelihood({b, a}, q, {1.5}));
}

TEST(LogLikelihood, Errors) {
    const RowMatrix q = RowMatrix::Zero(2, 2);
    EXPECT_THROW(log_likelihood({}, q, {1.0}), std::invalid_argument);
    EXPECT_THROW(log_likelihood({Trajectory{{{2, 0}}}}, q, {1.0}), std::invalid_argument);
    EXPECT_THROW(log_likelihood({Trajectory{{{0, 0}}}}, q, {-1.0}), std::invalid_argument);
    RowMatrix bad = q;
    bad(0, 0) = std::nan("");
    EXPECT_THROW(log_likelihood({Trajectory{{{0, 0}}}}, bad, {1.0}), std::invalid_argument);
}

TEST(LogLikelihoodGrad, MatchesDirectQDerivative) {
    // Treat Q itself as the parameter: dQ = identity.
    std::mt19937_64 rng(14);
    const RowMatrix q = random_q(rng, 3, 3);
    const std::vector<Trajectory> data{Trajectory{{{0, 1}, {1, 2}, {0, 0}, {2, 2}}}};
    const RowMatrix dq = RowMatrix::Identity(9, 9);
    const Vector g = log_likelihood_grad(data, q, dq, {1.7});
    const auto f = [&](const std::vector<double>& x) {
        RowMatrix qq = Eigen::Map<const RowMatrix>(x.data(), 3, 3);
        return log_likelihood(data, qq, {1.7});
    };
    const std::vector<double> x(q.data(), q.data() + 9);
    for (std::size_t i = 0; i < 9; ++i)
        EXPECT_NEAR(g(static_cast<Eigen::Index>(i)), oracle::central_difference(f, x, i, 1e-6), 1e-7);
}

TEST(LogLikelihoodGrad, EndToEndAgainstFiniteDifferences) {
    const EnvBundle env = make_gridworld({4, 0.3, 0.9});
    const auto data = sample_trajectories(env, 20, 6, 1);
    const SmoothingConfig cfg{SmoothingMethod::GSoft, 10, 1e-12, 1000000, 0.0};
    const MotionModelConfig motion{1.0};
    std::mt19937_64 rng(16);
    const Vector theta = oracle::random_vector(rng, env.features.dim(), -1, 1);
    const PipelineResult at = evaluate_pipeline(env.mdp, env.features, theta, data, cfg, motion,
                                                {1e-12, 1000000}, true);
    const auto f = [&](const std::vector<double>& x) {
        const Vector t = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
        return log_likelihood_at(env.mdp, env.features, RewardParams(t), data, cfg, motion);
    };
    const std::vector<double> x(theta.data(), theta.data() + theta.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double fd = oracle::central_difference(f, x, j, 1e-5);
        EXPECT_LT(std::abs(fd - at.gradient(static_cast<Eigen::Index>(j))), 1e-3 * std::max(1.0, std::abs(fd)));
    }
}

TEST(LogLikelihoodGrad, StationaryWhenDataMatchesModel) {
    // Counts proportional to the model probabilities make every coefficient vanish.
    RowMatrix q(1, 2);
    q << 0.0, std::log(3.0);
    const std::vector<Trajectory> data{Trajectory{{{0, 0}, {0, 1}, {0, 1}, {0, 1}}}};
    const Vector g = log_likelihood_grad(data, q, RowMatrix::Identity(2, 2), {1.0});
    EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-12);
}
