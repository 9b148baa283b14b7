#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "londi/mdp.hpp"

namespace londi {

// ---------------------------------------------------------------------------
// Switching controls: the intervention operator, the switching Bellman
// operator, the exact solution of the switcher's problem, and the
// activation-rule characterisation.
//
// Two operators live here on purpose. switch_bellman_step applies the
// operator exactly as the theory states it (no-switch branch maximises over
// all actions); it is the object the contraction certification runs on. The
// solver iterates the deployed composite operator, where the no-switch
// branch is what the system can actually do: let the QUICK policy act.
// ---------------------------------------------------------------------------

/// Nonnegative cost charged per consulted DEEPTHINK activation.
struct SwitchCost {
    double c = 0.0;

    explicit SwitchCost(double cost) : c(cost) {
        if (!(cost >= 0.0) || !std::isfinite(cost))
            throw ValidationError("switch cost must be finite and >= 0");
    }
};

/// Per-state binary activation decisions (1 = activate DEEPTHINK).
struct SwitchPolicy {
    std::vector<std::uint8_t> decisions;

    int size() const { return static_cast<int>(decisions.size()); }
    int operator[](int s) const { return decisions[static_cast<std::size_t>(s)]; }
};

struct SwitchSolution {
    ValueFunction v_star;
    /// Composite continuation values: q_star(s,a) = R(s,a) + gamma * P v_star.
    QFunction q_star;
    SwitchPolicy g_star;
};

/// Steps at which an activation regime begins, plus the companion list of
/// steps at which a regime ends (the first inactive step after a run of 1s).
struct SwitchingTimes {
    std::vector<int> activations;
    std::vector<int> deactivations;
};

/// M Q(s) = sum_a pi_deep(a|s) Q(s,a) - c: the value of deferring to the
/// DEEPTHINK policy at s, net of the switch cost.
double intervention_value(const QFunction& q, int s, const StationaryPolicy& pi_deep,
                          SwitchCost cost);

/// One synchronous application of the switching operator as stated by the
/// theory: T_S v = max{ M Q_v, max_a Q_v } with Q_v = q_from_values(mdp, v).
ValueFunction switch_bellman_step(const TabularMDP& mdp, const ValueFunction& v,
                                  const StationaryPolicy& pi_deep, SwitchCost cost);

/// One application of the deployed composite operator: at each state the
/// better of the QUICK continuation and the DEEPTHINK continuation net of c.
ValueFunction composite_bellman_step(const TabularMDP& mdp, const ValueFunction& v,
                                     const StationaryPolicy& pi_quick,
                                     const StationaryPolicy& pi_deep, SwitchCost cost);

/// Iterates the composite operator to sup-norm residual <= tol and extracts
/// the switch set by comparing the two branch values (strict; ties keep
/// QUICK). Throws SolverError with the last residual if the cap is hit.
SwitchSolution solve_switcher(const TabularMDP& mdp, const StationaryPolicy& pi_quick,
                              const StationaryPolicy& pi_deep, SwitchCost cost, double tol,
                              int max_iter = 1000000);

/// Activation rule in the literal theory form:
/// 1 iff M Q(s) - max_a Q(s,a) > 0. Ties resolve to 0. Note that for c > 0
/// the gap is at most -c, so this form never activates; it exists to state
/// the rule exactly as written.
int switch_rule(const QFunction& q, int s, const StationaryPolicy& pi_deep, SwitchCost cost);

/// Deployment form of the rule: the no-switch value is what the cheap actor
/// achieves, 1 iff M Q(s) - E_{pi_quick} Q(s,.) > 0. Applied statewise to
/// q_star this reproduces g_star exactly.
int switch_rule(const QFunction& q, int s, const StationaryPolicy& pi_deep,
                const StationaryPolicy& pi_quick, SwitchCost cost);

/// Activation times tau_k = inf{ t > tau_{k-1} | g(s_t) = 1 } from an
/// ordered (step, decision) trace, with regime-end boundaries alongside.
SwitchingTimes extract_switching_times(const std::vector<std::pair<int, int>>& decision_trace);

/// Exact discounted value of the deployed composite process with persistence:
/// while the regime flag is on, DEEPTHINK acts with probability p without the
/// switch policy being consulted; otherwise g decides. Evaluated by policy
/// evaluation on the extended chain over (state, regime flag); cost is
/// charged on consulted activations only. Returns values at regime-off
/// states.
ValueFunction composite_exact_evaluate(const TabularMDP& mdp, const StationaryPolicy& pi_quick,
                                       const StationaryPolicy& pi_deep, const SwitchPolicy& g,
                                       double persistence_p, SwitchCost cost,
                                       double tol = 1e-12);

// Text serialisation, one state per line: value, branch achieving it, and
// the binary decision. Deterministic output meant for diffing across runs.
std::string switch_solution_to_text(const SwitchSolution& sol, SwitchCost cost);
void save_switch_solution(const SwitchSolution& sol, SwitchCost cost, const std::string& path);

}  // namespace londi
