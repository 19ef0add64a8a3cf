#include "bgi/bellman_gradient.hpp"
#include "bgi/environments.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bgi;

namespace {

SmoothingConfig tight(SmoothingMethod m, double k) { return {m, k, 1e-12, 1000000, 0.0}; }

constexpr GradientControls kTight{1e-12, 1000000};

double worst_relative(const RowMatrix& a, const RowMatrix& b, double floor = 1e-6) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double x = a.data()[i], y = b.data()[i];
        const double scale = std::max(std::abs(x), std::abs(y));
        if (scale > floor) worst = std::max(worst, std::abs(x - y) / scale);
    }
    return worst;
}

}  // namespace

TEST(GradientIteration, ZeroFeatureColumnGivesZeroGradient) {
    const EnvBundle env = make_gridworld({4, 0.3, 0.9});
    Matrix phi = env.features.matrix();
    phi.col(2).setZero();
    const FeatureMap features(phi);
    Vector theta = Vector::LinSpaced(phi.cols(), -1, 1);
    const auto cfg = tight(SmoothingMethod::GSoft, 5);
    const SolveResult sol = approx_value_iteration(env.mdp, phi * theta, cfg);
    const GradientResult g = gradient_iteration(env.mdp, features, sol, cfg, kTight);
    EXPECT_TRUE(g.dv.col(2).isZero(0.0));
    EXPECT_TRUE(g.dq.col(2).isZero(0.0));
}

TEST(GradientIteration, SelfLoopGeometricSeries) {
    RowMatrix p(1, 1);
    p << 1.0;
    const Mdp mdp(1, 1, p, 0.9);
    const FeatureMap phi(Matrix::Ones(1, 1));
    for (const auto m : {SmoothingMethod::GSoft, SmoothingMethod::PNorm}) {
        const auto cfg = tight(m, 3);
        const SolveResult sol = approx_value_iteration(mdp, Vector::Constant(1, 2.0), cfg);
        const GradientResult g = gradient_iteration(mdp, phi, sol, cfg, kTight);
        ASSERT_TRUE(g.converged);
        EXPECT_NEAR(g.dv(0, 0), 10.0, 1e-9);
        EXPECT_NEAR(g.dq(0, 0), 10.0, 1e-9);
    }
}

TEST(GradientIteration, SingleActionMatchesClosedForm) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const Mdp mdp = oracle::random_mdp(rng, 8, 1, 0.85);
        Matrix phi(8, 3);
        for (auto& x : phi.reshaped()) x = std::uniform_real_distribution<double>(0, 1)(rng);
        const Vector theta = oracle::random_vector(rng, 3, 0, 1);
        const auto [dv, dq] = oracle::single_action_gradient(mdp, phi);
        for (const auto m : {SmoothingMethod::GSoft, SmoothingMethod::PNorm}) {
            const auto cfg = tight(m, 4);
            const SolveResult sol = approx_value_iteration(mdp, phi * theta, cfg);
            const GradientResult g = gradient_iteration(mdp, FeatureMap(phi), sol, cfg, kTight);
            EXPECT_LT((Matrix(g.dv) - dv).cwiseAbs().maxCoeff(), 1e-9);
            EXPECT_LT((Matrix(g.dq) - dq).cwiseAbs().maxCoeff(), 1e-9);
        }
    }
}

TEST(GradientIteration, MatchesFiniteDifferencesOnGridworld) {
    const EnvBundle env = make_gridworld({5, 0.3, 0.9});
    std::mt19937_64 rng(8);
    for (int draw = 0; draw < 2; ++draw) {
        const Vector theta = oracle::random_vector(rng, env.features.dim(), 0, 1);
        for (const auto& cfg : {tight(SmoothingMethod::GSoft, 10), tight(SmoothingMethod::PNorm, 30)}) {
            const SolveResult sol = approx_value_iteration(env.mdp, env.features.matrix() * theta, cfg);
            const GradientResult g = gradient_iteration(env.mdp, env.features, sol, cfg, kTight);
            const GradientResult fd = finite_diff_gradient(env.mdp, env.features, RewardParams(theta), cfg, 1e-5);
            EXPECT_LT(worst_relative(g.dv, fd.dv), 1e-4);
            EXPECT_LT(worst_relative(g.dq, fd.dq), 1e-4);
        }
    }
}

TEST(GradientIteration, MatchesFiniteDifferencesOnRandomMdps) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t s = 3 + trial % 5, a = 2 + trial % 3;
        const Mdp mdp = oracle::random_mdp(rng, s, a, 0.8);
        Matrix phi(static_cast<Eigen::Index>(s), 2);
        for (auto& x : phi.reshaped()) x = std::uniform_real_distribution<double>(0, 1)(rng);
        const FeatureMap features(phi);
        const Vector theta = oracle::random_vector(rng, 2, 0.1, 1);
        for (const auto& cfg : {tight(SmoothingMethod::GSoft, 2), tight(SmoothingMethod::PNorm, 8)}) {
            const SolveResult sol = approx_value_iteration(mdp, phi * theta, cfg);
            const GradientResult g = gradient_iteration(mdp, features, sol, cfg, kTight);
            const GradientResult fd = finite_diff_gradient(mdp, features, RewardParams(theta), cfg, 1e-5);
            EXPECT_LT(worst_relative(g.dq, fd.dq), 1e-4) << "trial " << trial;
        }
    }
}

TEST(GradientIteration, LinearInRewardJacobian) {
    const EnvBundle env = make_gridworld({4, 0.2, 0.9});
    const auto cfg = tight(SmoothingMethod::GSoft, 10);
    const SolveResult sol = approx_value_iteration(env.mdp, env.true_reward, cfg);
    const Matrix j = env.features.matrix();
    const GradientResult base = gradient_iteration(env.mdp, j, sol, cfg, kTight);
    const GradientResult scaled = gradient_iteration(env.mdp, Matrix(-2.5 * j), sol, cfg, kTight);
    EXPECT_LT((scaled.dv + 2.5 * base.dv).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(GradientIteration, ConvergesWellBeforeCap) {
    const EnvBundle env = make_gridworld({5, 0.3, 0.9});
    const auto cfg = tight(SmoothingMethod::GSoft, 10);
    const SolveResult sol = approx_value_iteration(env.mdp, env.true_reward, cfg);
    const GradientResult g = gradient_iteration(env.mdp, env.features, sol, cfg);
    ASSERT_TRUE(g.converged);
    EXPECT_LT(g.iterations_used, GradientControls{}.max_iterations);
}

TEST(GradientIteration, DqConsistentWithDv) {
    ObjectworldSpec spec;
    spec.seed = 3;
    const EnvBundle env = make_objectworld(spec);
    const auto cfg = tight(SmoothingMethod::GSoft, 10);
    const SolveResult sol = approx_value_iteration(env.mdp, env.true_reward, cfg);
    const GradientResult g = gradient_iteration(env.mdp, env.features, sol, cfg, kTight);
    const RowMatrix& p = env.mdp.transition();
    const RowMatrix expected = p * (env.features.matrix() + env.mdp.discount() * Matrix(g.dv));
    EXPECT_LT((g.dq - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(GradientIteration, RejectsUnconvergedSolve) {
    const EnvBundle env = make_gridworld({5, 0.3, 0.9});
    SmoothingConfig cfg{SmoothingMethod::GSoft, 10, 1e-12, 3, 0.0};
    const SolveResult sol = approx_value_iteration(env.mdp, env.true_reward, cfg);
    ASSERT_FALSE(sol.converged);
    EXPECT_THROW(gradient_iteration(env.mdp, env.features, sol, cfg), ConvergenceError);
}

TEST(GradientIteration, ShapeMismatchThrows) {
    const EnvBundle env = make_gridworld({3, 0.3, 0.9});
    const auto cfg = tight(SmoothingMethod::GSoft, 1);
    const SolveResult sol = approx_value_iteration(env.mdp, env.true_reward, cfg);
    EXPECT_THROW(gradient_iteration(env.mdp, Matrix::Ones(4, 2), sol, cfg), std::invalid_argument);
}
