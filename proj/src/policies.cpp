#include "londi/policies.hpp"

#include <cmath>

namespace londi {

PolicyProvider make_skilled_policy(const TabularMDP& mdp, SkillSpec skill, Tier tier,
                                   double call_cost, double tol) {
    ValueFunction v = value_iteration(mdp, tol);
    StationaryPolicy greedy = greedy_policy(q_from_values(mdp, v));
    PolicyProvider out;
    out.name = std::string(tier_name(tier)) + "(eps=" + format_double(skill.epsilon) + ")";
    out.tier = tier;
    out.call_cost = call_cost;
    out.policy = mix_with_uniform(greedy, skill.epsilon);
    return out;
}

void record_call(CostLedger& ledger, const PolicyProvider& provider, int step) {
    if (!ledger.series.empty() && step < ledger.series.back().first)
        throw ValidationError("record_call: step index decreased");
    ledger.cumulative += provider.call_cost;
    ledger.series.emplace_back(step, provider.call_cost);
}

double calibrate_quick_epsilon(const TabularMDP& mdp, int eval_state, double eps_deep,
                               double target_ratio, double rel_tol, double tol) {
    if (eval_state < 0 || eval_state >= mdp.n_states)
        throw ValidationError("calibrate_quick_epsilon: bad eval state");
    ValueFunction v = value_iteration(mdp, tol);
    StationaryPolicy greedy = greedy_policy(q_from_values(mdp, v));

    auto value_at = [&](double eps) {
        StationaryPolicy pi = mix_with_uniform(greedy, eps);
        return policy_evaluation(mdp, pi, tol)[eval_state];
    };

    const double deep_value = value_at(eps_deep);
    const double target = target_ratio * deep_value;
    if (std::abs(target) < 1e-12)
        throw ValidationError("calibrate_quick_epsilon: degenerate target value");

    double lo = eps_deep, hi = 1.0;
    double v_lo = value_at(lo), v_hi = value_at(hi);
    // Value falls with noise on well-posed instances; check the target is
    // actually bracketed before bisecting.
    if (!((v_lo >= target && target >= v_hi)))
        throw ValidationError("calibrate_quick_epsilon: target ratio not reachable "
                              "(uniform value " + format_double(v_hi) + ", target " +
                              format_double(target) + ")");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double vm = value_at(mid);
        if (std::abs(vm - target) <= rel_tol * std::abs(target)) return mid;
        if (vm > target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace londi
