#pragma once

#include <string>
#include <vector>

#include "londi/switching.hpp"

namespace londi {

// ---------------------------------------------------------------------------
// Budget-constrained switching: the state space is augmented with the
// remaining activation count, over-budget steps are penalised in the reward,
// and the resulting MDP is solved exactly. The augmented problem's action
// set is the binary switch decision itself, so its optimal policy is Markov
// in (base state, remaining budget).
// ---------------------------------------------------------------------------

struct BudgetSpec {
    int n = 0;            // activation budget per episode
    double penalty = 0.0; // per-step reward reduction while over budget
    SwitchCost cost;

    BudgetSpec(int budget, double over_penalty, SwitchCost activation_cost)
        : n(budget), penalty(over_penalty), cost(activation_cost) {
        if (n < 0) throw ValidationError("budget n must be >= 0");
        if (!(penalty >= 0.0)) throw ValidationError("budget penalty must be >= 0");
    }
};

/// Remaining budget is clamped at -1: every over-budget depth behaves
/// identically because the penalty applies uniformly once the budget is
/// exhausted, so one sink level keeps the space finite.
struct AugmentedState {
    int base = 0;
    int remaining = 0;
};

struct BudgetedMDP {
    TabularMDP mdp;       // over augmented indices; actions are {keep QUICK, activate}
    int n_base_states = 0;
    int budget = 0;       // remaining runs over {-1, 0, ..., budget}

    int levels() const { return budget + 2; }
    int index_of(AugmentedState x) const { return x.base * levels() + (x.remaining + 1); }
    AugmentedState state_of(int index) const {
        return AugmentedState{index / levels(), index % levels() - 1};
    }
};

/// Budget-accounting law: one consulted activation decrements the remaining
/// count, clamped at -1; g = 0 leaves it unchanged.
AugmentedState budget_step(AugmentedState x, int g);

/// Builds the augmented MDP. Action 1 (activate) earns the DEEPTHINK
/// expected reward minus c and transitions under the DEEPTHINK kernel;
/// action 0 earns the QUICK expected reward under the QUICK kernel. The
/// penalty is charged on the transition that drives the remaining count
/// below zero and on every step taken from an over-budget state. Terminal
/// base states absorb with zero reward at every level.
BudgetedMDP augment_with_budget(const TabularMDP& mdp, const StationaryPolicy& pi_quick,
                                const StationaryPolicy& pi_deep, const BudgetSpec& spec,
                                int state_cap = 200000);

/// Values and decisions over augmented states. q_star holds the two decision
/// branch values per augmented state; g_star is the argmax with ties to 0.
SwitchSolution solve_budgeted(const BudgetedMDP& bmdp, double tol, int max_iter = 1000000);

/// Table form (base state, remaining, g, v), one augmented state per line.
std::string budgeted_solution_to_text(const BudgetedMDP& bmdp, const SwitchSolution& sol,
                                      const BudgetSpec& spec);
void save_budgeted_solution(const BudgetedMDP& bmdp, const SwitchSolution& sol,
                            const BudgetSpec& spec, const std::string& path);

}  // namespace londi
