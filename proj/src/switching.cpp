#include "londi/switching.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace londi {

double intervention_value(const QFunction& q, int s, const StationaryPolicy& pi_deep,
                          SwitchCost cost) {
    if (s < 0 || s >= q.n_states) throw ValidationError("intervention_value: bad state id");
    if (pi_deep.n_states != q.n_states || pi_deep.n_actions != q.n_actions)
        throw ValidationError("intervention_value: policy/q dimension mismatch");
    double row_sum = 0.0;
    double out = 0.0;
    for (int a = 0; a < q.n_actions; ++a) {
        double p = pi_deep(s, a);
        if (!std::isfinite(p) || p < 0.0) throw ValidationError("intervention_value: bad row");
        row_sum += p;
        out += p * q(s, a);
    }
    if (std::abs(row_sum - 1.0) > 1e-9)
        throw ValidationError("intervention_value: pi_deep row at s is not a distribution");
    return out - cost.c;
}

ValueFunction switch_bellman_step(const TabularMDP& mdp, const ValueFunction& v,
                                  const StationaryPolicy& pi_deep, SwitchCost cost) {
    if (v.size() != mdp.n_states)
        throw ValidationError("switch_bellman_step: value dimension mismatch");
    QFunction q = q_from_values(mdp, v);
    ValueFunction out;
    out.values.resize(static_cast<std::size_t>(mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s) {
        double m = intervention_value(q, s, pi_deep, cost);
        out[s] = std::max(m, q.row_max(s));
    }
    return out;
}

ValueFunction composite_bellman_step(const TabularMDP& mdp, const ValueFunction& v,
                                     const StationaryPolicy& pi_quick,
                                     const StationaryPolicy& pi_deep, SwitchCost cost) {
    if (v.size() != mdp.n_states)
        throw ValidationError("composite_bellman_step: value dimension mismatch");
    QFunction q = q_from_values(mdp, v);
    ValueFunction out;
    out.values.resize(static_cast<std::size_t>(mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s) {
        double deep = intervention_value(q, s, pi_deep, cost);
        double quick = 0.0;
        for (int a = 0; a < q.n_actions; ++a) quick += pi_quick(s, a) * q(s, a);
        out[s] = std::max(deep, quick);
    }
    return out;
}

SwitchSolution solve_switcher(const TabularMDP& mdp, const StationaryPolicy& pi_quick,
                              const StationaryPolicy& pi_deep, SwitchCost cost, double tol,
                              int max_iter) {
    mdp.validate();
    pi_quick.validate();
    pi_deep.validate();
    if (pi_quick.n_states != mdp.n_states || pi_deep.n_states != mdp.n_states ||
        pi_quick.n_actions != mdp.n_actions || pi_deep.n_actions != mdp.n_actions)
        throw ValidationError("solve_switcher: policy dimensions do not match mdp");
    if (!(tol > 0.0)) throw ValidationError("solve_switcher: tol must be positive");

    ValueFunction v;
    v.values.assign(static_cast<std::size_t>(mdp.n_states), 0.0);
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
        ValueFunction next = composite_bellman_step(mdp, v, pi_quick, pi_deep, cost);
        residual = 0.0;
        for (int s = 0; s < mdp.n_states; ++s)
            residual = std::max(residual, std::abs(next[s] - v[s]));
        v = std::move(next);
        if (residual <= tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw SolverError("solve_switcher: no convergence within iteration cap", residual);

    SwitchSolution sol;
    sol.v_star = v;
    sol.q_star = q_from_values(mdp, v);
    sol.g_star.decisions.resize(static_cast<std::size_t>(mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s) {
        double deep = intervention_value(sol.q_star, s, pi_deep, cost);
        double quick = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) quick += pi_quick(s, a) * sol.q_star(s, a);
        sol.g_star.decisions[static_cast<std::size_t>(s)] =
            static_cast<std::uint8_t>(deep > quick ? 1 : 0);
    }
    return sol;
}

int switch_rule(const QFunction& q, int s, const StationaryPolicy& pi_deep, SwitchCost cost) {
    for (double x : q.values)
        if (!std::isfinite(x)) throw ValidationError("switch_rule: non-finite q");
    double gap = intervention_value(q, s, pi_deep, cost) - q.row_max(s);
    return gap > 0.0 ? 1 : 0;
}

int switch_rule(const QFunction& q, int s, const StationaryPolicy& pi_deep,
                const StationaryPolicy& pi_quick, SwitchCost cost) {
    for (double x : q.values)
        if (!std::isfinite(x)) throw ValidationError("switch_rule: non-finite q");
    double quick = 0.0;
    for (int a = 0; a < q.n_actions; ++a) quick += pi_quick(s, a) * q(s, a);
    double gap = intervention_value(q, s, pi_deep, cost) - quick;
    return gap > 0.0 ? 1 : 0;
}

SwitchingTimes extract_switching_times(const std::vector<std::pair<int, int>>& decision_trace) {
    SwitchingTimes times;
    int prev_step = std::numeric_limits<int>::min();
    int prev_decision = 0;
    for (const auto& [step, decision] : decision_trace) {
        if (step <= prev_step)
            throw ValidationError("extract_switching_times: trace steps must be increasing");
        if (decision != 0 && decision != 1)
            throw ValidationError("extract_switching_times: decisions must be 0/1");
        if (decision == 1 && prev_decision == 0) times.activations.push_back(step);
        if (decision == 0 && prev_decision == 1) times.deactivations.push_back(step);
        prev_step = step;
        prev_decision = decision;
    }
    return times;
}

ValueFunction composite_exact_evaluate(const TabularMDP& mdp, const StationaryPolicy& pi_quick,
                                       const StationaryPolicy& pi_deep, const SwitchPolicy& g,
                                       double persistence_p, SwitchCost cost, double tol) {
    mdp.validate();
    pi_quick.validate();
    pi_deep.validate();
    if (g.size() != mdp.n_states)
        throw ValidationError("composite_exact_evaluate: switch policy size mismatch");
    if (!(persistence_p >= 0.0 && persistence_p <= 1.0))
        throw ValidationError("composite_exact_evaluate: persistence_p outside [0,1]");

    // Extended chain over (state, regime flag m). Index m * |S| + s. With the
    // behaviour fixed there is a single meta-action; policy evaluation on the
    // chain is exact up to tol.
    const int n = mdp.n_states;
    const double p = persistence_p;
    TabularMDP chain(2 * n, 1, mdp.gamma);

    auto policy_kernel = [&](const StationaryPolicy& pi, int s, int s2) {
        double out = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) out += pi(s, a) * mdp.p(s, a, s2);
        return out;
    };

    for (int s = 0; s < n; ++s) {
        if (mdp.is_terminal(s)) {
            chain.make_terminal(s);
            chain.make_terminal(n + s);
            continue;
        }
        double r_quick = mdp.expected_reward(pi_quick, s);
        double r_deep = mdp.expected_reward(pi_deep, s);
        // m = 0: the switch policy is consulted.
        if (g[s] == 1) {
            chain.r(s, 0) = r_deep - cost.c;
            for (int s2 = 0; s2 < n; ++s2) chain.p(s, 0, n + s2) = policy_kernel(pi_deep, s, s2);
        } else {
            chain.r(s, 0) = r_quick;
            for (int s2 = 0; s2 < n; ++s2) chain.p(s, 0, s2) = policy_kernel(pi_quick, s, s2);
        }
        // m = 1: with prob p DEEPTHINK acts unconsulted; otherwise consult g.
        double r_consult = (g[s] == 1) ? (r_deep - cost.c) : r_quick;
        chain.r(n + s, 0) = p * r_deep + (1.0 - p) * r_consult;
        for (int s2 = 0; s2 < n; ++s2) {
            double deep_k = policy_kernel(pi_deep, s, s2);
            chain.p(n + s, 0, n + s2) += p * deep_k;
            if (g[s] == 1)
                chain.p(n + s, 0, n + s2) += (1.0 - p) * deep_k;
            else
                chain.p(n + s, 0, s2) += (1.0 - p) * policy_kernel(pi_quick, s, s2);
        }
    }

    StationaryPolicy only(2 * n, 1);
    for (int x = 0; x < 2 * n; ++x) only(x, 0) = 1.0;
    ValueFunction extended = policy_evaluation(chain, only, tol);

    ValueFunction out;
    out.values.assign(static_cast<std::size_t>(n), 0.0);
    for (int s = 0; s < n; ++s) out[s] = extended[s];
    return out;
}

std::string switch_solution_to_text(const SwitchSolution& sol, SwitchCost cost) {
    std::ostringstream out;
    out << "solution switch " << sol.q_star.n_states << " " << sol.q_star.n_actions << "\n";
    out << "cost " << format_double(cost.c) << "\n";
    out << "# state value branch g\n";
    for (int s = 0; s < sol.v_star.size(); ++s) {
        const char* branch = sol.g_star[s] == 1 ? "deep" : "quick";
        out << "state " << s << " " << format_double(sol.v_star[s]) << " " << branch << " "
            << static_cast<int>(sol.g_star[s]) << "\n";
    }
    return out.str();
}

void save_switch_solution(const SwitchSolution& sol, SwitchCost cost, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << switch_solution_to_text(sol, cost);
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace londi
