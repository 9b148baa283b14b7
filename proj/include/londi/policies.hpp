#pragma once

#include <string>
#include <utility>
#include <vector>

#include "londi/mdp.hpp"

namespace londi {

enum class Tier { quick, deep };

inline const char* tier_name(Tier t) { return t == Tier::quick ? "QUICK" : "DEEPTHINK"; }

/// A stochastic action policy with a fixed per-call compute cost. Immutable
/// after construction; act() takes the caller's rng so every call is
/// reproducible.
struct PolicyProvider {
    std::string name;
    Tier tier = Tier::quick;
    double call_cost = 1.0;
    StationaryPolicy policy;

    int act(int state, std::mt19937_64& rng) const { return policy.sample(state, rng); }
};

/// Probability of replacing the oracle action with a uniform random one.
struct SkillSpec {
    double epsilon = 0.0;

    explicit SkillSpec(double eps) : epsilon(eps) {
        if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("skill epsilon outside [0,1]");
    }
};

/// Cumulative compute cost plus the per-step series behind it.
struct CostLedger {
    double cumulative = 0.0;
    std::vector<std::pair<int, double>> series;  // (step, cost)
};

/// Oracle policy from value iteration, corrupted with epsilon-uniform noise:
/// (1 - eps) * greedy + eps * uniform.
PolicyProvider make_skilled_policy(const TabularMDP& mdp, SkillSpec skill, Tier tier,
                                   double call_cost, double tol = 1e-10);

/// Appends one call; steps must be nondecreasing.
void record_call(CostLedger& ledger, const PolicyProvider& provider, int step);

/// Finds eps_quick by bisection so that the QUICK policy's evaluation value
/// at eval_state is target_ratio times the DEEPTHINK policy's, to rel_tol
/// relative tolerance. Returns the epsilon (and the provider built from it
/// via make_skilled_policy). Requires the uniform policy's value to sit
/// below the target, i.e. noise alone must not already reach it.
double calibrate_quick_epsilon(const TabularMDP& mdp, int eval_state, double eps_deep,
                               double target_ratio = 0.5, double rel_tol = 0.05,
                               double tol = 1e-10);

}  // namespace londi
