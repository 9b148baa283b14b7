#include "londi/budget.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace londi {

AugmentedState budget_step(AugmentedState x, int g) {
    if (g != 0 && g != 1) throw ValidationError("budget_step: g must be 0/1");
    if (g == 1) x.remaining = std::max(x.remaining - 1, -1);
    return x;
}

BudgetedMDP augment_with_budget(const TabularMDP& mdp, const StationaryPolicy& pi_quick,
                                const StationaryPolicy& pi_deep, const BudgetSpec& spec,
                                int state_cap) {
    mdp.validate();
    pi_quick.validate();
    pi_deep.validate();
    if (pi_quick.n_states != mdp.n_states || pi_deep.n_states != mdp.n_states)
        throw ValidationError("augment_with_budget: policy dimensions do not match mdp");

    const int levels = spec.n + 2;
    const long long total = static_cast<long long>(mdp.n_states) * levels;
    if (total > state_cap)
        throw ValidationError("augment_with_budget: augmented state count " +
                              std::to_string(total) + " exceeds cap " +
                              std::to_string(state_cap));

    BudgetedMDP out;
    out.n_base_states = mdp.n_states;
    out.budget = spec.n;
    out.mdp = TabularMDP(static_cast<int>(total), 2, mdp.gamma);

    auto policy_kernel = [&](const StationaryPolicy& pi, int s, int s2) {
        double k = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) k += pi(s, a) * mdp.p(s, a, s2);
        return k;
    };

    for (int s = 0; s < mdp.n_states; ++s) {
        for (int k = -1; k <= spec.n; ++k) {
            const int x = out.index_of(AugmentedState{s, k});
            if (mdp.is_terminal(s)) {
                out.mdp.make_terminal(x);
                continue;
            }
            // g = 0: QUICK acts, remaining unchanged.
            out.mdp.r(x, 0) = mdp.expected_reward(pi_quick, s) - (k < 0 ? spec.penalty : 0.0);
            for (int s2 = 0; s2 < mdp.n_states; ++s2) {
                double pk = policy_kernel(pi_quick, s, s2);
                if (pk != 0.0) out.mdp.p(x, 0, out.index_of(AugmentedState{s2, k})) = pk;
            }
            // g = 1: DEEPTHINK acts with cost; remaining decremented (clamped),
            // penalty whenever the post-step count is negative.
            const int k2 = budget_step(AugmentedState{s, k}, 1).remaining;
            out.mdp.r(x, 1) = mdp.expected_reward(pi_deep, s) - spec.cost.c -
                              (k2 < 0 ? spec.penalty : 0.0);
            for (int s2 = 0; s2 < mdp.n_states; ++s2) {
                double pk = policy_kernel(pi_deep, s, s2);
                if (pk != 0.0) out.mdp.p(x, 1, out.index_of(AugmentedState{s2, k2})) = pk;
            }
        }
    }
    out.mdp.validate();
    return out;
}

SwitchSolution solve_budgeted(const BudgetedMDP& bmdp, double tol, int max_iter) {
    if (!(tol > 0.0)) throw ValidationError("solve_budgeted: tol must be positive");
    SwitchSolution sol;
    sol.v_star = value_iteration(bmdp.mdp, tol, max_iter);
    sol.q_star = q_from_values(bmdp.mdp, sol.v_star);
    sol.g_star.decisions.resize(static_cast<std::size_t>(bmdp.mdp.n_states));
    for (int x = 0; x < bmdp.mdp.n_states; ++x)
        sol.g_star.decisions[static_cast<std::size_t>(x)] =
            static_cast<std::uint8_t>(sol.q_star(x, 1) > sol.q_star(x, 0) ? 1 : 0);
    return sol;
}

std::string budgeted_solution_to_text(const BudgetedMDP& bmdp, const SwitchSolution& sol,
                                      const BudgetSpec& spec) {
    std::ostringstream out;
    out << "solution budgeted " << bmdp.n_base_states << " " << bmdp.budget << "\n";
    out << "cost " << format_double(spec.cost.c) << "\n";
    out << "penalty " << format_double(spec.penalty) << "\n";
    out << "# base remaining g value\n";
    for (int x = 0; x < bmdp.mdp.n_states; ++x) {
        AugmentedState st = bmdp.state_of(x);
        out << "state " << st.base << " " << st.remaining << " "
            << static_cast<int>(sol.g_star[x]) << " " << format_double(sol.v_star[x]) << "\n";
    }
    return out.str();
}

void save_budgeted_solution(const BudgetedMDP& bmdp, const SwitchSolution& sol,
                            const BudgetSpec& spec, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << budgeted_solution_to_text(bmdp, sol, spec);
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace londi
