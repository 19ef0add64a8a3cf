#pragma once

// Tabular MDP, linear reward representation and trajectory containers.
//
// Reward is indexed on the successor state: every backup uses r(s'), never r(s).

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bgi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Tolerance on the probability sum of each transition row.
inline constexpr double kProbabilitySumTolerance = 1e-9;

/**
Dense tabular MDP.

The transition tensor P[s][a][s'] is stored as a row-major matrix of shape
(n_states * n_actions) x n_states where row `s * n_actions + a` holds the
successor distribution of (s, a). Memory is O(n_states^2 * n_actions).
The constructor checks shapes only; use validate_mdp() for the probability
invariants.
*/
class Mdp {
public:
    Mdp(std::size_t n_states, std::size_t n_actions, RowMatrix transition, double discount)
        : n_states_(n_states), n_actions_(n_actions), transition_(std::move(transition)),
          discount_(discount) {
        if (n_states_ == 0 || n_actions_ == 0)
            throw std::invalid_argument("Mdp: n_states and n_actions must be positive");
        if (static_cast<std::size_t>(transition_.rows()) != n_states_ * n_actions_ ||
            static_cast<std::size_t>(transition_.cols()) != n_states_) {
            std::ostringstream msg;
            msg << "Mdp: transition must be " << n_states_ * n_actions_ << "x" << n_states_
                << ", got " << transition_.rows() << "x" << transition_.cols();
            throw std::invalid_argument(msg.str());
        }
    }

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    double discount() const { return discount_; }

    const RowMatrix& transition() const { return transition_; }

    std::size_t row_index(std::size_t s, std::size_t a) const { return s * n_actions_ + a; }

    double probability(std::size_t s, std::size_t a, std::size_t next) const {
        return transition_(static_cast<Eigen::Index>(row_index(s, a)),
                           static_cast<Eigen::Index>(next));
    }

    /// Successor distribution of (s, a).
    auto successors(std::size_t s, std::size_t a) const {
        return transition_.row(static_cast<Eigen::Index>(row_index(s, a)));
    }

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    RowMatrix transition_;
    double discount_;
};

struct Violation {
    enum class Kind { RowSum, ProbabilityRange, Discount, NonFinite };
    Kind kind;
    std::size_t state = 0;
    std::size_t action = 0;
    double value = 0.0;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }

    std::string summary() const {
        if (ok()) return "ok";
        std::ostringstream out;
        for (const auto& v : violations) out << v.message << '\n';
        return out.str();
    }
};

/// Checks row-stochasticity, entry range and discount range.
inline ValidationReport validate_mdp(const Mdp& mdp) {
    ValidationReport report;
    const double gamma = mdp.discount();
    if (!std::isfinite(gamma) || gamma < 0.0 || gamma >= 1.0) {
        std::ostringstream msg;
        msg << "discount " << gamma << " outside [0, 1)";
        report.violations.push_back({Violation::Kind::Discount, 0, 0, gamma, msg.str()});
    }
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const auto row = mdp.successors(s, a);
            bool finite = true;
            bool in_range = true;
            double bad = 0.0;
            for (Eigen::Index j = 0; j < row.size(); ++j) {
                const double p = row(j);
                if (!std::isfinite(p)) {
                    finite = false;
                    bad = p;
                } else if (p < 0.0 || p > 1.0) {
                    in_range = false;
                    bad = p;
                }
            }
            if (!finite) {
                std::ostringstream msg;
                msg << "(s=" << s << ", a=" << a << ") has non-finite probability";
                report.violations.push_back({Violation::Kind::NonFinite, s, a, bad, msg.str()});
                continue;
            }
            if (!in_range) {
                std::ostringstream msg;
                msg << "(s=" << s << ", a=" << a << ") has probability " << bad << " outside [0, 1]";
                report.violations.push_back(
                    {Violation::Kind::ProbabilityRange, s, a, bad, msg.str()});
            }
            const double sum = row.sum();
            if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
                std::ostringstream msg;
                msg << "(s=" << s << ", a=" << a << ") probabilities sum to " << sum;
                report.violations.push_back({Violation::Kind::RowSum, s, a, sum, msg.str()});
            }
        }
    }
    return report;
}

/// Per-state feature matrix Phi (n_states x d).
class FeatureMap {
public:
    explicit FeatureMap(Matrix features) : features_(std::move(features)) {
        if (features_.cols() < 1) throw std::invalid_argument("FeatureMap: d must be >= 1");
        if (!features_.allFinite())
            throw std::invalid_argument("FeatureMap: entries must be finite");
    }

    std::size_t n_states() const { return static_cast<std::size_t>(features_.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(features_.cols()); }
    const Matrix& matrix() const { return features_; }

private:
    Matrix features_;
};

/// Linear reward weights theta, r(s) = phi(s) . theta.
class RewardParams {
public:
    explicit RewardParams(Vector theta) : theta_(std::move(theta)) {
        if (!theta_.allFinite())
            throw std::invalid_argument("RewardParams: entries must be finite");
    }

    std::size_t dim() const { return static_cast<std::size_t>(theta_.size()); }
    const Vector& theta() const { return theta_; }

private:
    Vector theta_;
};

struct Step {
    std::size_t state;
    std::size_t action;

    friend bool operator==(const Step&, const Step&) = default;
};

/// Ordered state-action pairs of one demonstration.
struct Trajectory {
    std::vector<Step> steps;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Throws std::invalid_argument when a trajectory is empty or indexes outside the MDP.
inline void check_trajectory(const Trajectory& trajectory, std::size_t n_states,
                             std::size_t n_actions) {
    if (trajectory.steps.empty()) throw std::invalid_argument("trajectory is empty");
    for (const auto& step : trajectory.steps) {
        if (step.state >= n_states || step.action >= n_actions) {
            std::ostringstream msg;
            msg << "trajectory step (" << step.state << ", " << step.action
                << ") out of range for " << n_states << " states, " << n_actions << " actions";
            throw std::invalid_argument(msg.str());
        }
    }
}

inline void check_features(const Mdp& mdp, const FeatureMap& features) {
    if (features.n_states() != mdp.n_states()) {
        std::ostringstream msg;
        msg << "feature map has " << features.n_states() << " rows, MDP has " << mdp.n_states()
            << " states";
        throw std::invalid_argument(msg.str());
    }
}

/// r[s] = sum_j Phi[s][j] * theta[j].
inline Vector reward_vector(const FeatureMap& features, const RewardParams& params) {
    if (params.dim() != features.dim()) {
        std::ostringstream msg;
        msg << "reward_vector: expected theta of dimension " << features.dim() << ", got "
            << params.dim();
        throw std::invalid_argument(msg.str());
    }
    return features.matrix() * params.theta();
}

/// dr/dtheta for the linear reward; this is Phi itself.
inline const Matrix& reward_jacobian(const FeatureMap& features) { return features.matrix(); }

}  // namespace bgi
