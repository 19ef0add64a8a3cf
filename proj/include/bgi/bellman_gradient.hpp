#pragma once

// Bellman Gradient Iteration: the fixed point of
//   dV(s)    = sum_a w(s, a) sum_s' P[s][a][s'] (dr(s')/dtheta + gamma dV(s'))
//   dQ(s, a) = sum_s' P[s][a][s'] (dr(s')/dtheta + gamma dV(s'))
// where w(s, a) = d apprxMax / d Q(s, a) at the converged Q.

#include "bgi/mdp.hpp"
#include "bgi/smooth_bellman.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bgi {

struct GradientResult {
    RowMatrix dv;  // n_states x d
    RowMatrix dq;  // (n_states * n_actions) x d, row s * n_actions + a
    std::size_t iterations_used = 0;
    bool converged = false;

    auto dq_row(std::size_t state, std::size_t action, std::size_t n_actions) const {
        return dq.row(static_cast<Eigen::Index>(state * n_actions + action));
    }
};

struct GradientControls {
    double threshold = 1e-8;
    std::size_t max_iterations = 10000;
};

/// Smooth-max weights d apprxMax / d Q[s, a] of every Q row.
inline RowMatrix smooth_max_weight_table(const RowMatrix& q, const SmoothingConfig& config) {
    RowMatrix w(q.rows(), q.cols());
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        smooth_max_weights(row_span(q, static_cast<std::size_t>(s)), config,
                           std::span<double>(w.data() + s * q.cols(),
                                             static_cast<std::size_t>(q.cols())));
    }
    return w;
}

/**
Gradient iteration against an arbitrary reward Jacobian dr/dtheta (n_states x d).

The weights are frozen at `solve.q`, so each sweep is linear:
dV' = W P J + gamma W P dV with W P the weight-mixed transition matrix.
*/
inline GradientResult gradient_iteration(const Mdp& mdp, const Matrix& reward_jacobian,
                                         const SolveResult& solve, const SmoothingConfig& config,
                                         const GradientControls& controls = {}) {
    const auto n_states = static_cast<Eigen::Index>(mdp.n_states());
    const auto n_actions = static_cast<Eigen::Index>(mdp.n_actions());
    if (reward_jacobian.rows() != n_states || reward_jacobian.cols() < 1)
        throw std::invalid_argument("gradient_iteration: reward Jacobian shape mismatch");
    if (solve.v.size() != n_states || solve.q.rows() != n_states || solve.q.cols() != n_actions)
        throw std::invalid_argument("gradient_iteration: solve result shape mismatch");
    if (!solve.converged)
        throw ConvergenceError(
            "gradient_iteration: value solve did not converge; gradients are undefined");
    if (!(controls.threshold > 0.0) || controls.max_iterations < 1)
        throw std::invalid_argument("gradient_iteration: invalid convergence controls");
    config.validate();

    const RowMatrix weights = smooth_max_weight_table(solve.q, config);
    const RowMatrix& p = mdp.transition();

    RowMatrix mixed = RowMatrix::Zero(n_states, n_states);
    for (Eigen::Index s = 0; s < n_states; ++s)
        for (Eigen::Index a = 0; a < n_actions; ++a)
            mixed.row(s) += weights(s, a) * p.row(s * n_actions + a);

    const RowMatrix immediate = mixed * reward_jacobian;
    const double gamma = mdp.discount();
    const double bound = reward_jacobian.cwiseAbs().maxCoeff() *
                         std::pow(static_cast<double>(mdp.n_actions()), 1.0 / config.k) /
                         (1.0 - gamma) * 10.0;

    GradientResult result;
    result.dv = RowMatrix::Zero(n_states, reward_jacobian.cols());
    RowMatrix next(n_states, reward_jacobian.cols());
    for (std::size_t it = 0; it < controls.max_iterations; ++it) {
        next.noalias() = immediate;
        next.noalias() += gamma * (mixed * result.dv);
        const double diff = (next - result.dv).cwiseAbs().maxCoeff();
        result.dv.swap(next);
        result.iterations_used = it + 1;
        if (!std::isfinite(diff)) break;
        if (config.method == SmoothingMethod::PNorm && result.dv.cwiseAbs().maxCoeff() > bound)
            break;
        if (diff < controls.threshold) {
            result.converged = true;
            break;
        }
    }
    result.dq = p * reward_jacobian;
    result.dq.noalias() += gamma * (p * result.dv);
    return result;
}

/// Gradient iteration for the linear reward r = Phi theta.
inline GradientResult gradient_iteration(const Mdp& mdp, const FeatureMap& features,
                                         const SolveResult& solve, const SmoothingConfig& config,
                                         const GradientControls& controls = {}) {
    check_features(mdp, features);
    return gradient_iteration(mdp, reward_jacobian(features), solve, config, controls);
}

/**
Central finite differences of approx_value_iteration over theta.

Test oracle only: costs 2 d full solves. The solves use `config` unchanged,
including its reward offset.
*/
inline GradientResult finite_diff_gradient(const Mdp& mdp, const FeatureMap& features,
                                           const RewardParams& params,
                                           const SmoothingConfig& config, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("finite_diff_gradient: step must be positive");
    check_features(mdp, features);
    const auto d = static_cast<Eigen::Index>(features.dim());
    if (static_cast<Eigen::Index>(params.dim()) != d)
        throw std::invalid_argument("finite_diff_gradient: theta dimension mismatch");
    const auto n_states = static_cast<Eigen::Index>(mdp.n_states());
    const auto n_actions = static_cast<Eigen::Index>(mdp.n_actions());

    GradientResult result;
    result.dv.resize(n_states, d);
    result.dq.resize(n_states * n_actions, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        auto solve_at = [&](double delta) {
            Vector theta = params.theta();
            theta(j) += delta;
            SolveResult s = approx_value_iteration(mdp, features.matrix() * theta, config);
            if (!s.converged) {
                std::ostringstream msg;
                msg << "finite_diff_gradient: solve did not converge when perturbing component "
                    << j;
                throw ConvergenceError(msg.str());
            }
            result.iterations_used += s.iterations_used;
            return s;
        };
        const SolveResult plus = solve_at(step);
        const SolveResult minus = solve_at(-step);
        result.dv.col(j) = (plus.v - minus.v) / (2.0 * step);
        result.dq.col(j) =
            (plus.q.reshaped<Eigen::RowMajor>() - minus.q.reshaped<Eigen::RowMajor>()) /
            (2.0 * step);
    }
    result.converged = true;
    return result;
}

}  // namespace bgi
