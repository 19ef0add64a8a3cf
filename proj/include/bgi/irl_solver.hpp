#pragma once

// Multi-start gradient-ascent maximum-likelihood estimation of linear reward
// weights from observed state-action pairs.

#include "bgi/bellman_gradient.hpp"
#include "bgi/likelihood.hpp"
#include "bgi/mdp.hpp"
#include "bgi/random.hpp"
#include "bgi/smooth_bellman.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace bgi {

struct LearnConfig {
    std::size_t n_restarts = 10;
    std::size_t epochs = 1000;
    double learning_rate = 0.001;
    SmoothingConfig smoothing;
    MotionModelConfig motion;
    GradientControls gradient;
    double init_scale = 1.0;
    std::uint64_t rng_seed = 0;
    /// Worker threads for restarts; 0 uses the hardware concurrency.
    unsigned n_threads = 0;

    void validate() const {
        if (n_restarts < 1) throw std::invalid_argument("LearnConfig: n_restarts must be >= 1");
        if (epochs < 1) throw std::invalid_argument("LearnConfig: epochs must be >= 1");
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("LearnConfig: learning_rate must be positive");
        if (!(init_scale > 0.0))
            throw std::invalid_argument("LearnConfig: init_scale must be positive");
        smoothing.validate();
        motion.validate();
    }
};

struct RestartResult {
    Vector theta;
    double log_likelihood = -std::numeric_limits<double>::infinity();
    std::vector<double> trace;  // log-likelihood at the start of each epoch
    bool failed = false;
    std::string failure;
};

struct LearnResult {
    RewardParams best_theta{Vector()};
    double best_log_likelihood = -std::numeric_limits<double>::infinity();
    std::size_t best_restart = 0;
    std::vector<RestartResult> per_restart;
};

/// One pipeline evaluation: reward, approximate solve and optionally gradients.
struct PipelineResult {
    double log_likelihood = 0.0;
    Vector gradient;
    SolveResult solve;
};

namespace detail {

// Effective solve settings at theta. In p-norm mode the rewards are shifted by
// c = max(0, -min r) so every backup stays non-negative; when c > 0 the shift
// depends on theta through the minimising state and dr/dtheta = Phi - 1 phi(s_min).
struct ShiftedReward {
    SmoothingConfig smoothing;
    std::optional<Eigen::Index> min_state;
};

inline ShiftedReward shift_for_pnorm(const Vector& r, const SmoothingConfig& base) {
    ShiftedReward out{base, std::nullopt};
    if (base.method != SmoothingMethod::PNorm) return out;
    Eigen::Index arg = 0;
    const double lowest = r.minCoeff(&arg);
    if (lowest < 0.0) {
        out.smoothing.reward_offset = base.reward_offset - lowest;
        out.min_state = arg;
    }
    return out;
}

}  // namespace detail

inline PipelineResult evaluate_pipeline(const Mdp& mdp, const FeatureMap& features,
                                        const Vector& theta,
                                        const std::vector<Trajectory>& trajectories,
                                        const SmoothingConfig& smoothing,
                                        const MotionModelConfig& motion,
                                        const GradientControls& controls, bool with_gradient) {
    const Vector r = reward_vector(features, RewardParams(theta));
    const detail::ShiftedReward shifted = detail::shift_for_pnorm(r, smoothing);

    PipelineResult out;
    out.solve = approx_value_iteration(mdp, r, shifted.smoothing);
    if (!out.solve.converged)
        throw ConvergenceError("approximate value iteration did not converge after " +
                               std::to_string(out.solve.iterations_used) + " sweeps");
    out.log_likelihood = log_likelihood(trajectories, out.solve.q, motion);
    if (!with_gradient) return out;

    Matrix jacobian = reward_jacobian(features);
    if (shifted.min_state)
        jacobian.rowwise() -= features.matrix().row(*shifted.min_state);
    const GradientResult grad =
        gradient_iteration(mdp, jacobian, out.solve, shifted.smoothing, controls);
    if (!grad.converged)
        throw ConvergenceError("Bellman gradient iteration did not converge after " +
                               std::to_string(grad.iterations_used) + " sweeps");
    out.gradient = log_likelihood_grad(trajectories, out.solve.q, grad.dq, motion);
    return out;
}

/// Log-likelihood of the dataset at fixed theta; throws ConvergenceError if the solve fails.
inline double log_likelihood_at(const Mdp& mdp, const FeatureMap& features,
                                const RewardParams& params,
                                const std::vector<Trajectory>& trajectories,
                                const SmoothingConfig& smoothing,
                                const MotionModelConfig& motion) {
    check_features(mdp, features);
    return evaluate_pipeline(mdp, features, params.theta(), trajectories, smoothing, motion, {},
                             false)
        .log_likelihood;
}

/// Gradient ascent from `theta` for `config.epochs` epochs.
inline RestartResult ascend(const Mdp& mdp, const FeatureMap& features, Vector theta,
                            const std::vector<Trajectory>& trajectories,
                            const LearnConfig& config) {
    RestartResult out;
    out.trace.reserve(config.epochs);
    try {
        for (std::size_t e = 0; e < config.epochs; ++e) {
            const PipelineResult step =
                evaluate_pipeline(mdp, features, theta, trajectories, config.smoothing,
                                  config.motion, config.gradient, true);
            out.trace.push_back(step.log_likelihood);
            theta += config.learning_rate * step.gradient;
            if (!theta.allFinite()) throw ConvergenceError("theta became non-finite");
        }
        out.log_likelihood =
            evaluate_pipeline(mdp, features, theta, trajectories, config.smoothing, config.motion,
                              config.gradient, false)
                .log_likelihood;
    } catch (const ConvergenceError& e) {
        out.failed = true;
        out.failure = e.what();
    } catch (const PNormDomainError& e) {
        out.failed = true;
        out.failure = e.what();
    }
    out.theta = std::move(theta);
    return out;
}

/// Initial theta of restart `index`: uniform(-init_scale, init_scale)^d.
inline Vector initial_theta(const LearnConfig& config, std::size_t dim, std::size_t index) {
    RandomStream rng(config.rng_seed, index);
    Vector theta(static_cast<Eigen::Index>(dim));
    for (auto& x : theta) x = rng.uniform(-config.init_scale, config.init_scale);
    return theta;
}

/**
Runs `n_restarts` independent ascents and keeps the one with the highest final
log-likelihood. Failed restarts are excluded; throws ConvergenceError if every
restart fails. Results do not depend on the thread count.
*/
inline LearnResult learn_reward(const Mdp& mdp, const FeatureMap& features,
                                const std::vector<Trajectory>& trajectories,
                                const LearnConfig& config) {
    config.validate();
    check_features(mdp, features);
    if (trajectories.empty()) throw std::invalid_argument("learn_reward: no trajectories");
    for (const auto& t : trajectories) check_trajectory(t, mdp.n_states(), mdp.n_actions());

    LearnResult result;
    result.per_restart.resize(config.n_restarts);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < config.n_restarts; i = next++) {
            result.per_restart[i] = ascend(mdp, features, initial_theta(config, features.dim(), i),
                                           trajectories, config);
        }
    };
    unsigned threads = config.n_threads ? config.n_threads : std::thread::hardware_concurrency();
    threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(config.n_restarts));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    bool any = false;
    for (std::size_t i = 0; i < result.per_restart.size(); ++i) {
        const auto& restart = result.per_restart[i];
        if (restart.failed) continue;
        if (!any || restart.log_likelihood > result.best_log_likelihood) {
            result.best_log_likelihood = restart.log_likelihood;
            result.best_restart = i;
            any = true;
        }
    }
    if (!any) {
        std::string reasons;
        for (const auto& r : result.per_restart) reasons += "\n  " + r.failure;
        throw ConvergenceError("learn_reward: all restarts failed:" + reasons);
    }
    result.best_theta = RewardParams(result.per_restart[result.best_restart].theta);
    return result;
}

}  // namespace bgi
