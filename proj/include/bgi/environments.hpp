#pragma once

// Benchmark MDPs (gridworld, objectworld) and the noisy-optimal demonstration sampler.
//
// Grid layout: state = row * n + col, row 0 is the top row. Actions are
// up, down, left, right. With probability `noise` the intended action is
// replaced by a uniformly random one; moves off the grid leave the agent in place.

#include "bgi/mdp.hpp"
#include "bgi/random.hpp"
#include "bgi/smooth_bellman.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bgi {

enum Action : std::size_t { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr std::size_t kGridActions = 4;

struct GridworldSpec {
    std::size_t n = 5;
    double noise = 0.3;
    double discount = 0.9;

    void validate() const {
        if (n < 2) throw std::invalid_argument("gridworld: n must be >= 2");
        if (!(noise >= 0.0 && noise < 1.0))
            throw std::invalid_argument("gridworld: noise must be in [0, 1)");
        if (!(discount >= 0.0 && discount < 1.0))
            throw std::invalid_argument("gridworld: discount must be in [0, 1)");
    }
};

struct ObjectworldSpec {
    std::size_t n = 5;
    std::size_t n_colors = 2;
    std::size_t n_objects = 2;
    double noise = 0.3;
    double discount = 0.9;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 2) throw std::invalid_argument("objectworld: n must be >= 2");
        if (n_colors < 2) throw std::invalid_argument("objectworld: n_colors must be >= 2");
        if (n_objects > n * n)
            throw std::invalid_argument("objectworld: n_objects exceeds the number of cells");
        if (!(noise >= 0.0 && noise < 1.0))
            throw std::invalid_argument("objectworld: noise must be in [0, 1)");
        if (!(discount >= 0.0 && discount < 1.0))
            throw std::invalid_argument("objectworld: discount must be in [0, 1)");
    }
};

struct GridObject {
    std::size_t cell;
    std::size_t inner_color;
    std::size_t outer_color;
};

struct EnvBundle {
    Mdp mdp;
    FeatureMap features;
    std::optional<RewardParams> true_theta;
    Vector true_reward;
    std::size_t grid_size = 0;
    std::vector<GridObject> objects;  // objectworld only
};

inline std::size_t grid_state(std::size_t n, std::size_t row, std::size_t col) {
    return row * n + col;
}

/// Cell reached by moving from `state` in direction `action`; off-grid moves stay put.
inline std::size_t grid_move(std::size_t n, std::size_t state, std::size_t action) {
    const std::size_t row = state / n;
    const std::size_t col = state % n;
    switch (action) {
        case Up: return row > 0 ? state - n : state;
        case Down: return row + 1 < n ? state + n : state;
        case Left: return col > 0 ? state - 1 : state;
        case Right: return col + 1 < n ? state + 1 : state;
        default: throw std::invalid_argument("grid_move: unknown action");
    }
}

/// Transition tensor of the noisy n x n grid.
inline RowMatrix grid_transition(std::size_t n, double noise) {
    const std::size_t n_states = n * n;
    RowMatrix p = RowMatrix::Zero(static_cast<Eigen::Index>(n_states * kGridActions),
                                  static_cast<Eigen::Index>(n_states));
    const double slip = noise / static_cast<double>(kGridActions);
    for (std::size_t s = 0; s < n_states; ++s) {
        for (std::size_t a = 0; a < kGridActions; ++a) {
            const auto row = static_cast<Eigen::Index>(s * kGridActions + a);
            for (std::size_t taken = 0; taken < kGridActions; ++taken) {
                const double mass = (taken == a ? 1.0 - noise : 0.0) + slip;
                p(row, static_cast<Eigen::Index>(grid_move(n, s, taken))) += mass;
            }
            p.row(row) /= p.row(row).sum();
        }
    }
    return p;
}

/// The rewarded exit: upper-right corner.
inline std::size_t gridworld_exit(std::size_t n) { return grid_state(n, 0, n - 1); }

inline EnvBundle make_gridworld(const GridworldSpec& spec) {
    spec.validate();
    const std::size_t n_states = spec.n * spec.n;
    Mdp mdp(n_states, kGridActions, grid_transition(spec.n, spec.noise), spec.discount);
    FeatureMap features(Matrix::Identity(static_cast<Eigen::Index>(n_states),
                                         static_cast<Eigen::Index>(n_states)));
    Vector theta = Vector::Zero(static_cast<Eigen::Index>(n_states));
    theta(static_cast<Eigen::Index>(gridworld_exit(spec.n))) = 1.0;
    RewardParams params(theta);
    Vector reward = reward_vector(features, params);
    return EnvBundle{std::move(mdp), std::move(features), std::move(params), std::move(reward),
                     spec.n, {}};
}

inline double cell_distance(std::size_t n, std::size_t a, std::size_t b) {
    const double dr = static_cast<double>(a / n) - static_cast<double>(b / n);
    const double dc = static_cast<double>(a % n) - static_cast<double>(b % n);
    return std::sqrt(dr * dr + dc * dc);
}

inline double grid_diameter(std::size_t n) {
    return std::sqrt(2.0) * static_cast<double>(n - 1);
}

/**
Objectworld: grid mechanics of the gridworld plus randomly placed objects
with an inner and an outer color.

Features (2 |C| columns): Euclidean distance to the nearest object of each
inner color, then of each outer color; the grid diameter when no object has
that color. True reward: +1 within 3 cells of outer color 0 and within 2 cells
of outer color 1, -1 within 3 cells of outer color 0 only, 0 otherwise.
*/
inline EnvBundle make_objectworld(const ObjectworldSpec& spec) {
    spec.validate();
    const std::size_t n = spec.n;
    const std::size_t n_states = n * n;
    const std::size_t n_colors = spec.n_colors;

    RandomStream rng(spec.seed);
    std::vector<bool> occupied(n_states, false);
    std::vector<GridObject> objects;
    objects.reserve(spec.n_objects);
    while (objects.size() < spec.n_objects) {
        const auto cell = static_cast<std::size_t>(rng.index(n_states));
        if (occupied[cell]) continue;
        occupied[cell] = true;
        const auto inner = static_cast<std::size_t>(rng.index(n_colors));
        const auto outer = static_cast<std::size_t>(rng.index(n_colors));
        objects.push_back({cell, inner, outer});
    }

    const double diameter = grid_diameter(n);
    Matrix phi = Matrix::Constant(static_cast<Eigen::Index>(n_states),
                                  static_cast<Eigen::Index>(2 * n_colors), diameter);
    for (std::size_t s = 0; s < n_states; ++s) {
        for (const auto& obj : objects) {
            const double d = cell_distance(n, s, obj.cell);
            auto& inner = phi(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(obj.inner_color));
            auto& outer = phi(static_cast<Eigen::Index>(s),
                              static_cast<Eigen::Index>(n_colors + obj.outer_color));
            inner = std::min(inner, d);
            outer = std::min(outer, d);
        }
    }

    Vector reward = Vector::Zero(static_cast<Eigen::Index>(n_states));
    for (std::size_t s = 0; s < n_states; ++s) {
        bool near_first = false;
        bool near_second = false;
        for (const auto& obj : objects) {
            const double d = cell_distance(n, s, obj.cell);
            if (obj.outer_color == 0 && d <= 3.0) near_first = true;
            if (obj.outer_color == 1 && d <= 2.0) near_second = true;
        }
        if (near_first) reward(static_cast<Eigen::Index>(s)) = near_second ? 1.0 : -1.0;
    }

    Mdp mdp(n_states, kGridActions, grid_transition(n, spec.noise), spec.discount);
    return EnvBundle{std::move(mdp), FeatureMap(std::move(phi)), std::nullopt, std::move(reward), n,
                     std::move(objects)};
}

/// Greedy policy of a Q table; ties go to the lowest action index.
inline std::vector<std::size_t> greedy_policy(const RowMatrix& q, double tie_tolerance = 1e-9) {
    std::vector<std::size_t> policy(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        const double best = q.row(s).maxCoeff();
        const double slack = tie_tolerance * (1.0 + std::abs(best));
        for (Eigen::Index a = 0; a < q.cols(); ++a) {
            if (q(s, a) >= best - slack) {
                policy[static_cast<std::size_t>(s)] = static_cast<std::size_t>(a);
                break;
            }
        }
    }
    return policy;
}

inline std::size_t sample_successor(const Mdp& mdp, std::size_t s, std::size_t a,
                                    RandomStream& rng) {
    const auto row = mdp.successors(s, a);
    const double u = rng.uniform();
    double acc = 0.0;
    Eigen::Index last = 0;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (row(j) <= 0.0) continue;
        acc += row(j);
        last = j;
        if (u < acc) return static_cast<std::size_t>(j);
    }
    return static_cast<std::size_t>(last);
}

/**
Demonstrations from the exact optimal policy of the true reward. Trajectory i
draws from substream i of `seed`: a uniform start state, then `length`
(state, optimal action) pairs with successors drawn from the transition tensor.
*/
inline std::vector<Trajectory> sample_trajectories(const EnvBundle& bundle, std::size_t count,
                                                   std::size_t length, std::uint64_t seed) {
    if (count == 0 || length == 0)
        throw std::invalid_argument("sample_trajectories: count and length must be positive");
    const SolveResult solve = exact_value_iteration(bundle.mdp, bundle.true_reward, 1e-10, 100000);
    if (!solve.converged) throw ConvergenceError("sample_trajectories: exact solve did not converge");
    const std::vector<std::size_t> policy = greedy_policy(solve.q);

    std::vector<Trajectory> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        RandomStream rng(seed, i);
        auto s = static_cast<std::size_t>(rng.index(bundle.mdp.n_states()));
        out[i].steps.reserve(length);
        for (std::size_t t = 0; t < length; ++t) {
            const std::size_t a = policy[s];
            out[i].steps.push_back({s, a});
            s = sample_successor(bundle.mdp, s, a, rng);
        }
    }
    return out;
}

}  // namespace bgi
