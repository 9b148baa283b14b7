#pragma once

#include <cstddef>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "londi/common.hpp"

namespace londi {

// ---------------------------------------------------------------------------
// Finite MDP representation and the exact dynamic-programming primitives the
// rest of the library uses as ground truth. Dense storage throughout: this is
// a desk-scale library (state counts up to ~10^4) where exactness and
// simplicity dominate.
// ---------------------------------------------------------------------------

struct ValueFunction {
    std::vector<double> values;

    double operator[](int s) const { return values[static_cast<std::size_t>(s)]; }
    double& operator[](int s) { return values[static_cast<std::size_t>(s)]; }
    int size() const { return static_cast<int>(values.size()); }
};

struct QFunction {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> values;  // row-major (state, action)

    QFunction() = default;
    QFunction(int ns, int na)
        : n_states(ns), n_actions(na),
          values(static_cast<std::size_t>(ns) * static_cast<std::size_t>(na), 0.0) {}

    double operator()(int s, int a) const {
        return values[static_cast<std::size_t>(s) * n_actions + a];
    }
    double& operator()(int s, int a) {
        return values[static_cast<std::size_t>(s) * n_actions + a];
    }
    double row_max(int s) const;
};

/// Row-stochastic policy table. Rows must sum to 1 within 1e-9.
struct StationaryPolicy {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> probabilities;  // row-major (state, action)

    StationaryPolicy() = default;
    StationaryPolicy(int ns, int na)
        : n_states(ns), n_actions(na),
          probabilities(static_cast<std::size_t>(ns) * static_cast<std::size_t>(na), 0.0) {}

    double operator()(int s, int a) const {
        return probabilities[static_cast<std::size_t>(s) * n_actions + a];
    }
    double& operator()(int s, int a) {
        return probabilities[static_cast<std::size_t>(s) * n_actions + a];
    }

    void validate() const;

    /// Samples an action from the row at s. Throws if the row is not a
    /// distribution.
    int sample(int s, std::mt19937_64& rng) const;
};

struct TabularMDP {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;  // (s, a, s') row-major
    std::vector<double> reward;      // (s, a) row-major
    double gamma = 0.0;
    std::set<int> terminal_states;

    TabularMDP() = default;
    TabularMDP(int ns, int na, double g);

    double p(int s, int a, int s2) const {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double& p(int s, int a, int s2) {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
    double& r(int s, int a) { return reward[static_cast<std::size_t>(s) * n_actions + a]; }

    bool is_terminal(int s) const { return terminal_states.count(s) > 0; }

    /// Marks s terminal and rewrites its rows as a zero-reward self-loop.
    void make_terminal(int s);

    /// Checks every structural invariant: row sums within 1e-9 of one,
    /// entries in [0,1], gamma in [0,1), finite rewards, terminal states
    /// absorbing with zero reward. Throws ValidationError.
    void validate() const;

    double max_abs_reward() const;

    /// Expected one-step reward of following `policy` from s.
    double expected_reward(const StationaryPolicy& policy, int s) const;
};

// --- Dynamic programming -----------------------------------------------

/// One synchronous application of the standard optimality operator
/// (Tv)(s) = max_a [ R(s,a) + gamma * sum_s' P(s'|s,a) v(s') ].
ValueFunction bellman_optimality_step(const TabularMDP& mdp, const ValueFunction& v);

/// Synchronous value iteration from v = 0, stopping once the sup-norm
/// residual ||Tv - v|| drops to tol. The returned v satisfies the residual
/// bound at tol. Throws SolverError if max_iter sweeps do not suffice.
ValueFunction value_iteration(const TabularMDP& mdp, double tol, int max_iter = 1000000);

/// Iterative evaluation of a fixed policy to the same residual contract as
/// value_iteration, i.e. ||T^pi v - v|| <= tol on the returned v.
ValueFunction policy_evaluation(const TabularMDP& mdp, const StationaryPolicy& policy,
                                double tol, int max_iter = 1000000);

/// One-step lookahead: Q(s,a) = R(s,a) + gamma * sum_s' P(s'|s,a) v(s').
QFunction q_from_values(const TabularMDP& mdp, const ValueFunction& v);

/// Deterministic greedy policy from a Q table; ties break to the lowest
/// action index.
StationaryPolicy greedy_policy(const QFunction& q);

StationaryPolicy uniform_policy(int n_states, int n_actions);

/// (1 - epsilon) * base + epsilon * uniform, rowwise.
StationaryPolicy mix_with_uniform(const StationaryPolicy& base, double epsilon);

// --- Text format -----------------------------------------------------------
//
//   # comments and blank lines are ignored
//   mdp <n_states> <n_actions>
//   gamma <g>
//   terminal <s>
//   reward <s> <a> <r>        (entries not listed are zero)
//   prob <s> <a> <s'> <p>     (entries not listed are zero)
//
// save_mdp writes entries in canonical sorted order with round-trip decimal
// formatting, so save(load(save(m))) is byte-identical to save(m).

std::string mdp_to_text(const TabularMDP& mdp);
TabularMDP mdp_from_text(const std::string& text);
void save_mdp(const TabularMDP& mdp, const std::string& path);
TabularMDP load_mdp(const std::string& path);

}  // namespace londi
