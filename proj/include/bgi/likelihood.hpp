#pragma once

// Boltzmann motion model P(a|s) = exp(b Q(s,a)) / sum_a' exp(b Q(s,a')) and
// the dataset log-likelihood summed over every observed (s, a) pair.

#include "bgi/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace bgi {

struct MotionModelConfig {
    double b = 1.0;

    /// b = 0 gives the uniform model and is accepted for fixtures.
    void validate() const {
        if (!(b >= 0.0) || !std::isfinite(b))
            throw std::invalid_argument("MotionModelConfig: b must be a non-negative finite real");
    }
};

namespace detail {

inline void check_q(const RowMatrix& q) {
    if (!q.allFinite()) throw std::invalid_argument("Q table must be finite");
}

inline void check_dataset(const std::vector<Trajectory>& trajectories, const RowMatrix& q) {
    if (trajectories.empty()) throw std::invalid_argument("log-likelihood of an empty dataset");
    for (const auto& t : trajectories)
        check_trajectory(t, static_cast<std::size_t>(q.rows()), static_cast<std::size_t>(q.cols()));
}

}  // namespace detail

inline RowMatrix action_probabilities(const RowMatrix& q, const MotionModelConfig& config) {
    config.validate();
    detail::check_q(q);
    RowMatrix p(q.rows(), q.cols());
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        const double m = config.b * q.row(s).maxCoeff();
        double z = 0.0;
        for (Eigen::Index a = 0; a < q.cols(); ++a) {
            p(s, a) = std::exp(config.b * q(s, a) - m);
            z += p(s, a);
        }
        p.row(s) /= z;
    }
    return p;
}

/// L = sum over pairs of (b Q(s,a) - log sum_a' exp(b Q(s,a'))); always <= 0.
inline double log_likelihood(const std::vector<Trajectory>& trajectories, const RowMatrix& q,
                             const MotionModelConfig& config) {
    config.validate();
    detail::check_q(q);
    detail::check_dataset(trajectories, q);

    std::vector<double> log_partition(static_cast<std::size_t>(q.rows()));
    std::vector<double> shift(log_partition.size());
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        const double m = config.b * q.row(s).maxCoeff();
        double z = 0.0;
        for (Eigen::Index a = 0; a < q.cols(); ++a) z += std::exp(config.b * q(s, a) - m);
        shift[static_cast<std::size_t>(s)] = m;
        log_partition[static_cast<std::size_t>(s)] = std::log(z);
    }
    double total = 0.0;
    for (const auto& t : trajectories) {
        for (const auto& [s, a] : t.steps) {
            total += (config.b * q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) -
                      shift[s]) -
                     log_partition[s];
        }
    }
    return total;
}

/**
Gradient of log_likelihood given dQ/dtheta (rows s * n_actions + a):
  sum over pairs of b (dQ(s,a) - sum_a' P(a'|s) dQ(s,a')).
Pairs are aggregated into visit counts first; each state contributes
b sum_a (N(s,a) - N(s) P(a|s)) dQ(s,a).
*/
inline Vector log_likelihood_grad(const std::vector<Trajectory>& trajectories, const RowMatrix& q,
                                  const RowMatrix& dq, const MotionModelConfig& config) {
    detail::check_dataset(trajectories, q);
    if (dq.rows() != q.rows() * q.cols() || dq.cols() < 1)
        throw std::invalid_argument("log_likelihood_grad: dQ shape mismatch");
    const RowMatrix prob = action_probabilities(q, config);
    const Eigen::Index n_actions = q.cols();

    RowMatrix counts = RowMatrix::Zero(q.rows(), n_actions);
    for (const auto& t : trajectories)
        for (const auto& [s, a] : t.steps)
            counts(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) += 1.0;

    Vector grad = Vector::Zero(dq.cols());
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        const double visits = counts.row(s).sum();
        if (visits == 0.0) continue;
        for (Eigen::Index a = 0; a < n_actions; ++a) {
            const double coeff = counts(s, a) - visits * prob(s, a);
            if (coeff != 0.0) grad += coeff * dq.row(s * n_actions + a).transpose();
        }
    }
    return config.b * grad;
}

}  // namespace bgi
