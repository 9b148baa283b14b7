#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "londi/budget.hpp"
#include "londi/envs.hpp"
#include "oracles.hpp"

using namespace londi;

namespace {

TabularMDP four_state_chain(double gamma = 0.9) {
    TabularMDP mdp(4, 2, gamma);
    for (int s = 0; s < 3; ++s) {
        mdp.p(s, 0, s + 1) = 1.0;  // advance
        mdp.p(s, 1, s) = 1.0;      // stall
    }
    mdp.r(2, 0) = 1.0;
    mdp.make_terminal(3);
    return mdp;
}

StationaryPolicy optimal_policy(const TabularMDP& mdp) {
    return greedy_policy(q_from_values(mdp, value_iteration(mdp, 1e-12)));
}

// Greedy rollout of a budgeted oracle policy on the base MDP; returns
// consulted activations and the base states where they happened.
struct OracleRollout {
    int consulted = 0;
    std::vector<int> activation_states;
};

OracleRollout rollout_budgeted_oracle(const TabularMDP& mdp, const BudgetedMDP& bmdp,
                                      const SwitchSolution& sol,
                                      const StationaryPolicy& pi_quick,
                                      const StationaryPolicy& pi_deep, int start, int horizon,
                                      std::mt19937_64& rng) {
    OracleRollout out;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int s = start;
    int k = bmdp.budget;
    for (int t = 0; t < horizon && !mdp.is_terminal(s); ++t) {
        int g = sol.g_star[bmdp.index_of(AugmentedState{s, k})];
        const StationaryPolicy& pi = g == 1 ? pi_deep : pi_quick;
        if (g == 1) {
            out.consulted += 1;
            out.activation_states.push_back(s);
            k = std::max(k - 1, -1);
        }
        int a = 0;
        double u = unif(rng), acc = 0.0;
        for (a = 0; a < mdp.n_actions; ++a) {
            acc += pi(s, a);
            if (u < acc) break;
        }
        if (a == mdp.n_actions) a = mdp.n_actions - 1;
        double u2 = unif(rng);
        acc = 0.0;
        int s2 = 0;
        for (s2 = 0; s2 < mdp.n_states; ++s2) {
            acc += mdp.p(s, a, s2);
            if (u2 < acc) break;
        }
        if (s2 == mdp.n_states) s2 = mdp.n_states - 1;
        s = s2;
    }
    return out;
}

}  // namespace

TEST_CASE("budget step decrements and clamps") {
    CHECK(budget_step(AugmentedState{2, 3}, 1).remaining == 2);
    CHECK(budget_step(AugmentedState{2, 0}, 1).remaining == -1);
    CHECK(budget_step(AugmentedState{2, -1}, 1).remaining == -1);
    CHECK(budget_step(AugmentedState{2, 3}, 0).remaining == 3);
    CHECK(budget_step(AugmentedState{2, 3}, 1).base == 2);
}

TEST_CASE("index mapping round-trips") {
    BudgetedMDP b;
    b.n_base_states = 4;
    b.budget = 3;
    for (int s = 0; s < 4; ++s)
        for (int k = -1; k <= 3; ++k) {
            AugmentedState x{s, k};
            AugmentedState back = b.state_of(b.index_of(x));
            CHECK(back.base == s);
            CHECK(back.remaining == k);
        }
}

TEST_CASE("zero budget with a dominating penalty never activates") {
    TabularMDP mdp = four_state_chain();
    StationaryPolicy quick = uniform_policy(4, 2);
    StationaryPolicy deep = optimal_policy(mdp);
    BudgetedMDP bmdp = augment_with_budget(mdp, quick, deep, BudgetSpec(0, 100.0, SwitchCost(0.05)));
    SwitchSolution sol = solve_budgeted(bmdp, 1e-12);
    for (int s = 0; s < 4; ++s)
        CHECK(sol.g_star[bmdp.index_of(AugmentedState{s, 0})] == 0);
}

TEST_CASE("zero penalty reduces to the unbudgeted solution at every level") {
    std::mt19937_64 rng(3);
    TabularMDP mdp = oracles::random_mdp(6, 3, 0.9, rng);
    StationaryPolicy quick = uniform_policy(6, 3);
    StationaryPolicy deep = mix_with_uniform(optimal_policy(mdp), 0.05);
    SwitchCost c(0.1);
    SwitchSolution unbudgeted = solve_switcher(mdp, quick, deep, c, 1e-12);
    for (int n : {0, 2, 5}) {
        BudgetedMDP bmdp = augment_with_budget(mdp, quick, deep, BudgetSpec(n, 0.0, c));
        SwitchSolution sol = solve_budgeted(bmdp, 1e-12);
        for (int s = 0; s < 6; ++s)
            for (int k = -1; k <= n; ++k)
                CHECK(std::abs(sol.v_star[bmdp.index_of(AugmentedState{s, k})] -
                               unbudgeted.v_star[s]) < 1e-7);
    }
}

TEST_CASE("single activation lands where brute-force placement is best") {
    TabularMDP mdp = four_state_chain();
    StationaryPolicy quick = uniform_policy(4, 2);
    StationaryPolicy deep = optimal_policy(mdp);
    BudgetSpec spec(1, 50.0, SwitchCost(0.05));
    BudgetedMDP bmdp = augment_with_budget(mdp, quick, deep, spec);
    SwitchSolution sol = solve_budgeted(bmdp, 1e-12);

    // Placement policies: activate only at base state s* while one
    // activation remains. Evaluated exactly on the augmented chain.
    double best_value = -1e300;
    int best_state = -1;
    for (int target = 0; target < 3; ++target) {
        StationaryPolicy placement(bmdp.mdp.n_states, 2);
        for (int x = 0; x < bmdp.mdp.n_states; ++x) {
            AugmentedState st = bmdp.state_of(x);
            int g = (st.base == target && st.remaining == 1) ? 1 : 0;
            placement(x, g) = 1.0;
        }
        double v = oracles::exact_policy_value(bmdp.mdp, placement)
            [static_cast<std::size_t>(bmdp.index_of(AugmentedState{0, 1}))];
        if (v > best_value) {
            best_value = v;
            best_state = target;
        }
    }
    CHECK(std::abs(sol.v_star[bmdp.index_of(AugmentedState{0, 1})] - best_value) < 1e-7);

    std::mt19937_64 rng(17);
    for (int ep = 0; ep < 200; ++ep) {
        OracleRollout roll =
            rollout_budgeted_oracle(mdp, bmdp, sol, quick, deep, 0, 200, rng);
        REQUIRE(roll.consulted == 1);
        CHECK(roll.activation_states[0] == best_state);
    }
}

TEST_CASE("value is nondecreasing in the remaining budget") {
    TabularMDP mdp = four_state_chain();
    StationaryPolicy quick = uniform_policy(4, 2);
    StationaryPolicy deep = optimal_policy(mdp);
    BudgetedMDP bmdp = augment_with_budget(mdp, quick, deep, BudgetSpec(6, 2.0, SwitchCost(0.05)));
    SwitchSolution sol = solve_budgeted(bmdp, 1e-12);
    for (int s = 0; s < 4; ++s)
        for (int k = 0; k < 6; ++k)
            CHECK(sol.v_star[bmdp.index_of(AugmentedState{s, k + 1})] >=
                  sol.v_star[bmdp.index_of(AugmentedState{s, k})] - 1e-9);
}

TEST_CASE("rooms oracle value never falls as the budget grows") {
    auto rooms = build_rooms_world(RoomsWorldConfig{});
    const TabularMDP& mdp = *rooms->exported_mdp();
    StationaryPolicy quick = uniform_policy(mdp.n_states, mdp.n_actions);
    StationaryPolicy deep = mix_with_uniform(optimal_policy(mdp), 0.05);
    SwitchCost c(0.05);
    std::vector<std::vector<double>> full_budget_values;
    for (int n = 0; n <= 6; ++n) {
        BudgetedMDP bmdp = augment_with_budget(mdp, quick, deep, BudgetSpec(n, 100.0, c));
        SwitchSolution sol = solve_budgeted(bmdp, 1e-12);
        std::vector<double> at_full(static_cast<std::size_t>(mdp.n_states));
        for (int s = 0; s < mdp.n_states; ++s)
            at_full[static_cast<std::size_t>(s)] =
                sol.v_star[bmdp.index_of(AugmentedState{s, n})];
        full_budget_values.push_back(std::move(at_full));
    }
    for (int n = 0; n < 6; ++n)
        for (int s = 0; s < mdp.n_states; ++s)
            CHECK(full_budget_values[static_cast<std::size_t>(n + 1)][static_cast<std::size_t>(s)] >=
                  full_budget_values[static_cast<std::size_t>(n)][static_cast<std::size_t>(s)] - 1e-9);
}

TEST_CASE("slack budget matches the unbudgeted solution") {
    TabularMDP mdp = four_state_chain();
    StationaryPolicy quick = uniform_policy(4, 2);
    StationaryPolicy deep = mix_with_uniform(optimal_policy(mdp), 0.1);
    SwitchCost c(0.1);
    SwitchSolution unbudgeted = solve_switcher(mdp, quick, deep, c, 1e-13);
    const int n = 200;  // effective-horizon surrogate: gamma^200 is ~7e-10
    BudgetedMDP bmdp = augment_with_budget(mdp, quick, deep, BudgetSpec(n, 2.0, c));
    SwitchSolution sol = solve_budgeted(bmdp, 1e-13);
    for (int s = 0; s < 4; ++s)
        CHECK(std::abs(sol.v_star[bmdp.index_of(AugmentedState{s, n})] - unbudgeted.v_star[s]) <
              1e-6);
}

TEST_CASE("budget preservation under a dominating penalty") {
    TabularMDP mdp = four_state_chain();
    StationaryPolicy quick = uniform_policy(4, 2);
    StationaryPolicy deep = optimal_policy(mdp);
    std::mt19937_64 rng(23);
    for (int n : {1, 2, 3}) {
        BudgetedMDP bmdp = augment_with_budget(mdp, quick, deep, BudgetSpec(n, 100.0, SwitchCost(0.02)));
        SwitchSolution sol = solve_budgeted(bmdp, 1e-12);
        int over = 0;
        for (int ep = 0; ep < 10000; ++ep) {
            OracleRollout roll =
                rollout_budgeted_oracle(mdp, bmdp, sol, quick, deep, 0, 300, rng);
            if (roll.consulted > n) ++over;
        }
        CHECK(over == 0);
    }
}

TEST_CASE("state-count overflow guard") {
    TabularMDP mdp = four_state_chain();
    StationaryPolicy quick = uniform_policy(4, 2);
    StationaryPolicy deep = optimal_policy(mdp);
    CHECK_THROWS_AS(
        augment_with_budget(mdp, quick, deep, BudgetSpec(10, 1.0, SwitchCost(0.1)), 40),
        ValidationError);
}

TEST_CASE("rooms world oracle spends a single activation at the hallway") {
    RoomsWorldConfig config;
    auto rooms = build_rooms_world(config);
    const TabularMDP& mdp = *rooms->exported_mdp();
    StationaryPolicy quick = uniform_policy(mdp.n_states, mdp.n_actions);
    StationaryPolicy deep = mix_with_uniform(optimal_policy(mdp), 0.05);
    BudgetSpec spec(1, 100.0, SwitchCost(0.02));
    BudgetedMDP bmdp = augment_with_budget(mdp, quick, deep, spec);
    SwitchSolution sol = solve_budgeted(bmdp, 1e-12);

    // Exhaustive placement oracle over base states.
    const int start = rooms->start_state();
    double best_value = -1e300;
    int best_state = -1;
    for (int target = 0; target < mdp.n_states; ++target) {
        if (mdp.is_terminal(target)) continue;
        StationaryPolicy placement(bmdp.mdp.n_states, 2);
        for (int x = 0; x < bmdp.mdp.n_states; ++x) {
            AugmentedState st = bmdp.state_of(x);
            int g = (st.base == target && st.remaining == 1) ? 1 : 0;
            placement(x, g) = 1.0;
        }
        double v = oracles::exact_policy_value(bmdp.mdp, placement)
            [static_cast<std::size_t>(bmdp.index_of(AugmentedState{start, 1}))];
        if (v > best_value) {
            best_value = v;
            best_state = target;
        }
    }
    CHECK(rooms->location_of(best_state) == rooms->hallway_location());
    CHECK(sol.g_star[bmdp.index_of(AugmentedState{best_state, 1})] == 1);
    CHECK(sol.v_star[bmdp.index_of(AugmentedState{start, 1})] >= best_value - 1e-7);

    std::mt19937_64 rng(31);
    for (int ep = 0; ep < 500; ++ep) {
        OracleRollout roll = rollout_budgeted_oracle(mdp, bmdp, sol, quick, deep, start,
                                                     rooms->horizon() * 5, rng);
        for (int s : roll.activation_states)
            CHECK(rooms->location_of(s) == rooms->hallway_location());
    }
}

TEST_CASE("budgeted solution table lists every augmented state") {
    TabularMDP mdp = four_state_chain();
    StationaryPolicy quick = uniform_policy(4, 2);
    StationaryPolicy deep = optimal_policy(mdp);
    BudgetSpec spec(2, 3.0, SwitchCost(0.1));
    BudgetedMDP bmdp = augment_with_budget(mdp, quick, deep, spec);
    SwitchSolution sol = solve_budgeted(bmdp, 1e-12);
    std::string text = budgeted_solution_to_text(bmdp, sol, spec);
    CHECK(text.find("solution budgeted 4 2") == 0);
    std::size_t lines = 0;
    for (char ch : text)
        if (ch == '\n') ++lines;
    CHECK(lines == 4 + 4u * 4u);  // header block + one line per augmented state
}
