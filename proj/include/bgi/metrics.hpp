#pragma once

// Evaluation quantities: reward correlation, optimal-action probability
// statistics, approximation-gap curves and phase timings.

#include "bgi/likelihood.hpp"
#include "bgi/mdp.hpp"
#include "bgi/smooth_bellman.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bgi {

/// Pearson product-moment correlation. Returns 0 when exactly one input is constant.
inline double pearson_corr(const Vector& x, const Vector& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("pearson_corr: length mismatch (" + std::to_string(x.size()) +
                                    " vs " + std::to_string(y.size()) + ")");
    if (x.size() < 2) throw std::invalid_argument("pearson_corr: need at least 2 samples");
    const Vector dx = x.array() - x.mean();
    const Vector dy = y.array() - y.mean();
    const double sxx = dx.squaredNorm();
    const double syy = dy.squaredNorm();
    if (sxx == 0.0 && syy == 0.0)
        throw std::domain_error("pearson_corr: both inputs are constant; correlation undefined");
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return std::clamp(dx.dot(dy) / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct ActionStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

/**
Probability mass the motion model (b, q_approx) puts on the optimal actions of
q_exact, per state; every action within `tie_tolerance` (relative) of the row
maximum counts as optimal. Returns min/max/mean across states.
*/
inline ActionStats optimal_action_stats(const RowMatrix& q_exact, const RowMatrix& q_approx,
                                        double b, double tie_tolerance = 1e-9) {
    if (q_exact.rows() != q_approx.rows() || q_exact.cols() != q_approx.cols())
        throw std::invalid_argument("optimal_action_stats: Q shape mismatch");
    if (q_exact.rows() == 0) throw std::invalid_argument("optimal_action_stats: empty Q");
    const RowMatrix prob = action_probabilities(q_approx, MotionModelConfig{b});
    ActionStats stats{1.0, 0.0, 0.0};
    for (Eigen::Index s = 0; s < q_exact.rows(); ++s) {
        const double best = q_exact.row(s).maxCoeff();
        const double slack = tie_tolerance * (1.0 + std::abs(best));
        double mass = 0.0;
        for (Eigen::Index a = 0; a < q_exact.cols(); ++a)
            if (q_exact(s, a) >= best - slack) mass += prob(s, a);
        mass = std::min(mass, 1.0);
        stats.min = std::min(stats.min, mass);
        stats.max = std::max(stats.max, mass);
        stats.mean += mass;
    }
    stats.mean /= static_cast<double>(q_exact.rows());
    stats.mean = std::clamp(stats.mean, stats.min, stats.max);
    return stats;
}

struct GapPoint {
    double k;
    double gap;
};

struct GapControls {
    double threshold = 1e-11;
    std::size_t max_iterations = 100000;
};

/// max_s (V_approx(k, s) - V_exact(s)) for each k of an ascending grid.
inline std::vector<GapPoint> approximation_gap(const Mdp& mdp, const Vector& r,
                                               SmoothingMethod method,
                                               const std::vector<double>& k_grid,
                                               const GapControls& controls = {}) {
    if (!std::is_sorted(k_grid.begin(), k_grid.end()))
        throw std::invalid_argument("approximation_gap: k grid must be sorted ascending");
    const SolveResult exact = exact_value_iteration(mdp, r, controls.threshold, controls.max_iterations);
    if (!exact.converged) throw ConvergenceError("approximation_gap: exact solve did not converge");
    std::vector<GapPoint> curve;
    curve.reserve(k_grid.size());
    for (double k : k_grid) {
        SmoothingConfig config{method, k, controls.threshold, controls.max_iterations, 0.0};
        const SolveResult approx = approx_value_iteration(mdp, r, config);
        if (!approx.converged)
            throw ConvergenceError("approximation_gap: " + std::string(to_string(method)) +
                                   " solve did not converge at k = " + std::to_string(k));
        curve.push_back({k, (approx.v - exact.v).maxCoeff()});
    }
    return curve;
}

/// Wall-clock seconds per labeled phase.
class PhaseTimer {
public:
    template <class F>
    decltype(auto) time(const std::string& phase, F&& f) {
        const auto start = std::chrono::steady_clock::now();
        struct Record {
            PhaseTimer* self;
            const std::string& phase;
            std::chrono::steady_clock::time_point start;
            ~Record() {
                self->seconds_[phase] +=
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            }
        } record{this, phase, start};
        return std::forward<F>(f)();
    }

    const std::map<std::string, double>& seconds() const { return seconds_; }

private:
    std::map<std::string, double> seconds_;
};

struct BSweepPoint {
    double b;
    ActionStats stats;
};

struct EvalReport {
    double pearson_corr = 0.0;
    double opt_action_prob_min = 0.0;
    double opt_action_prob_max = 0.0;
    double opt_action_prob_mean = 0.0;
    std::vector<GapPoint> gap_curve;
    std::vector<BSweepPoint> b_sweep;
    std::map<std::string, double> timing;
};

}  // namespace bgi
