#pragma once

// Exact and smoothed Bellman optimality solvers.
//
// Both solvers run Jacobi sweeps from V = 0:
//   T[s, a] = sum_s' P[s][a][s'] (r[s'] + gamma V[s'])
//   V'[s]   = max_a T[s, a]            (exact)
//   V'[s]   = apprxMax_a(T[s, a], k)   (p-norm or g-soft)
// until the sup-norm change drops below the threshold, then a final backup
// from the converged V produces Q.

#include "bgi/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bgi {

enum class SmoothingMethod { PNorm, GSoft };

inline std::string_view to_string(SmoothingMethod method) {
    return method == SmoothingMethod::PNorm ? "pnorm" : "gsoft";
}

inline SmoothingMethod parse_smoothing_method(std::string_view name) {
    if (name == "pnorm") return SmoothingMethod::PNorm;
    if (name == "gsoft") return SmoothingMethod::GSoft;
    throw std::invalid_argument("unknown smoothing method '" + std::string(name) +
                                "' (expected pnorm or gsoft)");
}

struct SmoothingConfig {
    SmoothingMethod method = SmoothingMethod::GSoft;
    double k = 10.0;
    double threshold = 1e-6;
    std::size_t max_iterations = 10000;
    /// Constant c >= 0 added to every reward before a solve. The reported V and
    /// Q keep the induced shift.
    double reward_offset = 0.0;

    void validate() const {
        if (!(k > 0.0) || !std::isfinite(k))
            throw std::invalid_argument("SmoothingConfig: k must be a positive finite real");
        if (!(threshold > 0.0))
            throw std::invalid_argument("SmoothingConfig: threshold must be positive");
        if (max_iterations < 1)
            throw std::invalid_argument("SmoothingConfig: max_iterations must be >= 1");
        if (!(reward_offset >= 0.0) || !std::isfinite(reward_offset))
            throw std::invalid_argument("SmoothingConfig: reward_offset must be >= 0");
    }
};

/// Thrown when the p-norm approximation meets a negative value.
class PNormDomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Thrown when a fixed-point iteration fails to converge where convergence is required.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SolveResult {
    Vector v;
    RowMatrix q;  // n_states x n_actions
    std::size_t iterations_used = 0;
    bool converged = false;
    double reward_offset = 0.0;
};

namespace detail {

inline void check_values(std::span<const double> values, SmoothingMethod method) {
    if (values.empty()) throw std::invalid_argument("smooth_max: empty input");
    if (method == SmoothingMethod::PNorm) {
        for (double v : values) {
            if (v < 0.0) {
                std::ostringstream msg;
                msg << "p-norm approximation requires non-negative values, got " << v;
                throw PNormDomainError(msg.str());
            }
        }
    }
}

// (sum_i v_i^k)^(1/k) = vmax * s^(1/k) with s = sum_i (v_i / vmax)^k >= 1.
inline double pnorm_max(std::span<const double> values, double k) {
    const double vmax = *std::max_element(values.begin(), values.end());
    if (vmax == 0.0) return 0.0;
    const double log_vmax = std::log(vmax);
    double s = 0.0;
    for (double v : values)
        if (v > 0.0) s += std::exp(k * (std::log(v) - log_vmax));
    return vmax * std::exp(std::log(s) / k);
}

inline double gsoft_max(std::span<const double> values, double k) {
    const double vmax = *std::max_element(values.begin(), values.end());
    double s = 0.0;
    for (double v : values) s += std::exp(k * (v - vmax));
    return vmax + std::log(s) / k;
}

}  // namespace detail

/// Smoothed maximum; never smaller than max(values).
inline double smooth_max(std::span<const double> values, const SmoothingConfig& config) {
    detail::check_values(values, config.method);
    if (values.size() == 1) return values[0];
    return config.method == SmoothingMethod::PNorm ? detail::pnorm_max(values, config.k)
                                                   : detail::gsoft_max(values, config.k);
}

/**
Gradient of smooth_max with respect to each input.

p-norm: v_i^(k-1) (sum v^k)^((1-k)/k); at the all-zero point the equal-value
limit n^((1-k)/k) is returned. Zero entries with k < 1 have an unbounded
derivative and are rejected.
g-soft: softmax(k v), a probability vector.
*/
inline void smooth_max_weights(std::span<const double> values, const SmoothingConfig& config,
                               std::span<double> weights) {
    detail::check_values(values, config.method);
    if (weights.size() != values.size())
        throw std::invalid_argument("smooth_max_weights: output size mismatch");
    const std::size_t n = values.size();
    if (n == 1) {
        weights[0] = 1.0;
        return;
    }
    const double k = config.k;
    const double vmax = *std::max_element(values.begin(), values.end());
    if (config.method == SmoothingMethod::GSoft) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            weights[i] = std::exp(k * (values[i] - vmax));
            s += weights[i];
        }
        for (auto& w : weights) w /= s;
        return;
    }
    if (vmax == 0.0) {
        std::fill(weights.begin(), weights.end(),
                  std::pow(static_cast<double>(n), (1.0 - k) / k));
        return;
    }
    const double log_vmax = std::log(vmax);
    double s = 0.0;
    for (double v : values)
        if (v > 0.0) s += std::exp(k * (std::log(v) - log_vmax));
    const double log_s = std::log(s);
    for (std::size_t i = 0; i < n; ++i) {
        if (values[i] > 0.0) {
            weights[i] =
                std::exp((k - 1.0) * (std::log(values[i]) - log_vmax) - (k - 1.0) / k * log_s);
        } else if (k > 1.0) {
            weights[i] = 0.0;
        } else if (k == 1.0) {
            weights[i] = 1.0;
        } else {
            throw PNormDomainError("p-norm gradient is unbounded at a zero value for k < 1");
        }
    }
}

inline Vector smooth_max_weights(std::span<const double> values, const SmoothingConfig& config) {
    Vector w(static_cast<Eigen::Index>(values.size()));
    smooth_max_weights(values, config, std::span<double>(w.data(), values.size()));
    return w;
}

inline std::span<const double> row_span(const RowMatrix& m, std::size_t row) {
    return {m.data() + row * static_cast<std::size_t>(m.cols()),
            static_cast<std::size_t>(m.cols())};
}

/// Recomputes V(s) = apprxMax_a Q(s, a) row by row.
inline Vector smooth_value_from_q(const RowMatrix& q, const SmoothingConfig& config) {
    Vector v(q.rows());
    for (Eigen::Index s = 0; s < q.rows(); ++s)
        v(s) = smooth_max(row_span(q, static_cast<std::size_t>(s)), config);
    return v;
}

namespace detail {

inline void check_reward(const Mdp& mdp, const Vector& r) {
    if (static_cast<std::size_t>(r.size()) != mdp.n_states()) {
        std::ostringstream msg;
        msg << "reward has length " << r.size() << ", MDP has " << mdp.n_states() << " states";
        throw std::invalid_argument(msg.str());
    }
    if (!r.allFinite()) throw std::invalid_argument("reward must be finite");
}

// Runs Jacobi sweeps with `backup(state, T-row) -> new value`; `guard(V)`
// returns true when the iteration must abort as divergent.
template <class Backup, class Guard>
SolveResult iterate_values(const Mdp& mdp, const Vector& r, double threshold,
                           std::size_t max_iterations, Backup&& backup, Guard&& guard) {
    const auto n_states = static_cast<Eigen::Index>(mdp.n_states());
    const auto n_actions = static_cast<Eigen::Index>(mdp.n_actions());
    const double gamma = mdp.discount();
    const Vector expected_reward = mdp.transition() * r;

    SolveResult result;
    result.v = Vector::Zero(n_states);
    Vector next(n_states);
    Vector t(n_states * n_actions);
    for (std::size_t it = 0; it < max_iterations; ++it) {
        t.noalias() = expected_reward;
        t.noalias() += gamma * (mdp.transition() * result.v);
        for (Eigen::Index s = 0; s < n_states; ++s) {
            next(s) = backup(static_cast<std::size_t>(s),
                             std::span<const double>(t.data() + s * n_actions,
                                                     static_cast<std::size_t>(n_actions)));
        }
        const double diff = (next - result.v).lpNorm<Eigen::Infinity>();
        result.v.swap(next);
        result.iterations_used = it + 1;
        if (!std::isfinite(diff) || guard(result.v)) break;
        if (diff < threshold) {
            result.converged = true;
            break;
        }
    }
    Vector q_flat = expected_reward + gamma * (mdp.transition() * result.v);
    result.q = Eigen::Map<RowMatrix>(q_flat.data(), n_states, n_actions);
    return result;
}

}  // namespace detail

/// Exact Bellman optimality solve. Non-convergence is reported, not thrown.
inline SolveResult exact_value_iteration(const Mdp& mdp, const Vector& r, double threshold = 1e-6,
                                         std::size_t max_iterations = 10000) {
    detail::check_reward(mdp, r);
    if (!(threshold > 0.0)) throw std::invalid_argument("threshold must be positive");
    return detail::iterate_values(
        mdp, r, threshold, max_iterations,
        [](std::size_t, std::span<const double> row) {
            return *std::max_element(row.begin(), row.end());
        },
        [](const Vector&) { return false; });
}

/**
Approximate value iteration with the p-norm or g-soft smooth max.

With p-norm every backed-up value must be non-negative; otherwise a
PNormDomainError names the state and the offending value. The p-norm
operator can expand values by up to |A|^(1/k) per sweep, so the solve is
abandoned (converged = false) once sup|V| exceeds
(max|r| + offset) |A|^(1/k) / (1 - gamma) * 10.
*/
inline SolveResult approx_value_iteration(const Mdp& mdp, const Vector& r,
                                          const SmoothingConfig& config) {
    detail::check_reward(mdp, r);
    config.validate();
    const Vector shifted = (r.array() + config.reward_offset).matrix();

    const double bound = (r.cwiseAbs().maxCoeff() + config.reward_offset) *
                         std::pow(static_cast<double>(mdp.n_actions()), 1.0 / config.k) /
                         (1.0 - mdp.discount()) * 10.0;
    auto backup = [&config](std::size_t s, std::span<const double> row) {
        if (config.method == SmoothingMethod::PNorm) {
            for (std::size_t a = 0; a < row.size(); ++a) {
                if (row[a] < 0.0) {
                    std::ostringstream msg;
                    msg << "p-norm backup at state " << s << ", action " << a
                        << " is negative (" << row[a]
                        << "); supply a reward offset to make rewards non-negative";
                    throw PNormDomainError(msg.str());
                }
            }
        }
        return smooth_max(row, config);
    };
    auto guard = [&config, bound](const Vector& v) {
        return config.method == SmoothingMethod::PNorm && v.cwiseAbs().maxCoeff() > bound;
    };
    SolveResult result =
        detail::iterate_values(mdp, shifted, config.threshold, config.max_iterations, backup, guard);
    result.reward_offset = config.reward_offset;
    return result;
}

}  // namespace bgi
