#pragma once

// Independent reference computations for the test suites. Nothing here calls
// the iterative solvers under test.

#include "bgi/mdp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace bgi::oracle {

/// Transition matrix of a deterministic policy (n_states x n_states).
inline Matrix policy_transition(const Mdp& mdp, const std::vector<std::size_t>& policy) {
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    Matrix p(n, n);
    for (Eigen::Index s = 0; s < n; ++s) p.row(s) = mdp.successors(static_cast<std::size_t>(s), policy[s]);
    return p;
}

/// V^pi solving (I - gamma P_pi) V = P_pi r.
inline Vector policy_value(const Mdp& mdp, const Vector& r, const std::vector<std::size_t>& policy) {
    const Matrix p = policy_transition(mdp, policy);
    const auto n = p.rows();
    const Matrix a = Matrix::Identity(n, n) - mdp.discount() * p;
    return a.fullPivLu().solve(p * r);
}

/// Pointwise max of V^pi over all n_actions^n_states deterministic policies.
inline Vector brute_force_optimal_values(const Mdp& mdp, const Vector& r) {
    const std::size_t n = mdp.n_states();
    const std::size_t m = mdp.n_actions();
    std::vector<std::size_t> policy(n, 0);
    Vector best = Vector::Constant(static_cast<Eigen::Index>(n), -std::numeric_limits<double>::infinity());
    while (true) {
        best = best.cwiseMax(policy_value(mdp, r, policy));
        std::size_t i = 0;
        while (i < n && ++policy[i] == m) policy[i++] = 0;
        if (i == n) break;
    }
    return best;
}

/// Closed-form dV/dtheta and dQ/dtheta for single-action MDPs: dV = (I - gamma P)^-1 P Phi.
inline std::pair<Matrix, Matrix> single_action_gradient(const Mdp& mdp, const Matrix& phi) {
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    const Matrix p = mdp.transition();
    const Matrix dv = (Matrix::Identity(n, n) - mdp.discount() * p).fullPivLu().solve(p * phi);
    const Matrix dq = p * (phi + mdp.discount() * dv);
    return {dv, dq};
}

/// Direct (unshifted) log-sum-exp; valid for small inputs only.
inline double naive_gsoft(const std::vector<double>& v, double k) {
    double s = 0.0;
    for (double x : v) s += std::exp(k * x);
    return std::log(s) / k;
}

inline double naive_pnorm(const std::vector<double>& v, double k) {
    double s = 0.0;
    for (double x : v) s += std::pow(x, k);
    return std::pow(s, 1.0 / k);
}

/// Central difference of f along coordinate i.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t i, double h) {
    x[i] += h;
    const double plus = f(x);
    x[i] -= 2 * h;
    const double minus = f(x);
    return (plus - minus) / (2 * h);
}

/// Random row-stochastic MDP with some zero transitions.
inline Mdp random_mdp(std::mt19937_64& rng, std::size_t n_states, std::size_t n_actions, double discount) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RowMatrix p(static_cast<Eigen::Index>(n_states * n_actions), static_cast<Eigen::Index>(n_states));
    for (Eigen::Index row = 0; row < p.rows(); ++row) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            const double x = u(rng);
            p(row, j) = x < 0.3 ? 0.0 : x;
        }
        if (p.row(row).sum() == 0.0) p(row, row % p.cols()) = 1.0;
        p.row(row) /= p.row(row).sum();
    }
    return Mdp(n_states, n_actions, std::move(p), discount);
}

inline Vector random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = u(rng);
    return v;
}

/// Direct Pearson formula from raw sums.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace bgi::oracle
