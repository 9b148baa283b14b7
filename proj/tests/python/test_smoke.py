"""Smoke tests for the python bindings: builds tiny models, runs the exact
solvers and a short training loop, and checks the headline invariants."""

import math
import os
import sys
import tempfile

import londi


def chain_mdp():
    mdp = londi.TabularMDP(3, 2, 0.9)
    mdp.set_p(0, 0, 1, 1.0)
    mdp.set_p(0, 1, 0, 1.0)
    mdp.set_p(1, 0, 2, 1.0)
    mdp.set_p(1, 1, 1, 1.0)
    mdp.set_r(1, 0, 1.0)
    mdp.make_terminal(2)
    mdp.validate()
    return mdp


def test_value_iteration_closed_form():
    mdp = londi.TabularMDP(1, 1, 0.5)
    mdp.set_p(0, 0, 0, 1.0)
    mdp.set_r(0, 0, 1.0)
    v = londi.value_iteration(mdp, 1e-12)
    assert abs(v[0] - 2.0) < 1e-9


def test_mdp_text_round_trip():
    mdp = chain_mdp()
    text = londi.mdp_to_text(mdp)
    again = londi.mdp_from_text(text)
    assert londi.mdp_to_text(again) == text
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "chain.mdp")
        londi.save_mdp(mdp, path)
        assert londi.mdp_to_text(londi.load_mdp(path)) == text


def test_solver_matches_hand_computation():
    mdp = chain_mdp()
    quick = londi.uniform_policy(3, 2)
    deep = londi.greedy_policy(londi.q_from_values(mdp, londi.value_iteration(mdp, 1e-12)))
    sol = londi.solve_switcher(mdp, quick, deep, cost=0.05, tol=1e-12)
    assert abs(sol.v_star[1] - 0.95) < 1e-9
    assert abs(sol.v_star[0] - 0.805) < 1e-9
    assert list(sol.g_star.decisions) == [1, 1, 0]
    for s in range(3):
        assert londi.switch_rule_deployed(sol.q_star, s, deep, quick, 0.05) == sol.g_star[s]


def test_identical_policies_never_switch():
    mdp = chain_mdp()
    quick = londi.uniform_policy(3, 2)
    sol = londi.solve_switcher(mdp, quick, quick, cost=0.1, tol=1e-12)
    assert list(sol.g_star.decisions) == [0, 0, 0]


def test_budget_value_monotone():
    mdp = chain_mdp()
    quick = londi.uniform_policy(3, 2)
    deep = londi.greedy_policy(londi.q_from_values(mdp, londi.value_iteration(mdp, 1e-12)))
    bmdp = londi.augment_with_budget(mdp, quick, deep, n=3, penalty=5.0, cost=0.05)
    sol = londi.solve_budgeted(bmdp, tol=1e-12)
    for s in range(3):
        for k in range(3):
            lo = sol.v_star[bmdp.index_of(londi.AugmentedState(s, k))]
            hi = sol.v_star[bmdp.index_of(londi.AugmentedState(s, k + 1))]
            assert hi >= lo - 1e-9
    assert londi.budget_step(londi.AugmentedState(0, 0), 1).remaining == -1


def test_grid_task_and_switching_times():
    config = londi.GridTaskConfig()
    config.layout = ["#####", "#S.G#", "#####"]
    config.view_radius = 3
    config.decay = 0.0
    grid = londi.build_grid_task(config)
    assert grid.export_available()
    mdp = grid.exported_mdp()
    v = londi.value_iteration(mdp, 1e-10)
    assert abs(v[grid.start_state()] - mdp.gamma * 1.0) < 1e-8  # two moves to the goal

    times = londi.extract_switching_times([(0, 0), (1, 1), (2, 1), (3, 0), (5, 1)])
    assert times.activations == [1, 5]
    assert times.deactivations == [3]


def test_budgeted_solution_text():
    mdp = chain_mdp()
    quick = londi.uniform_policy(3, 2)
    deep = londi.greedy_policy(londi.q_from_values(mdp, londi.value_iteration(mdp, 1e-12)))
    bmdp = londi.augment_with_budget(mdp, quick, deep, n=1, penalty=5.0, cost=0.05)
    sol = londi.solve_budgeted(bmdp, tol=1e-12)
    text = londi.budgeted_solution_to_text(bmdp, sol, penalty=5.0, cost=0.05)
    assert text.startswith("solution budgeted 3 1")


def test_rooms_world_bottleneck_is_valuable():
    config = londi.RoomsWorldConfig()
    rooms = londi.build_rooms_world(config)
    mdp = rooms.exported_mdp()
    best = londi.value_iteration(mdp, 1e-10)
    uniform = londi.policy_evaluation(
        mdp, londi.uniform_policy(mdp.n_states, mdp.n_actions), 1e-10
    )
    assert best[rooms.start_state()] > uniform[rooms.start_state()]

    state = rooms.reset()
    out = rooms.step(rooms.action_to_hallway())
    assert rooms.location_of(out.next_state) == rooms.hallway_location()


def test_training_respects_budget():
    config = londi.RoomsWorldConfig()
    rooms = londi.build_rooms_world(config)
    mdp = rooms.exported_mdp()
    eps_q = londi.calibrate_quick_epsilon(mdp, rooms.start_state(), 0.05)
    quick = londi.make_skilled_policy(mdp, eps_q, londi.Tier.QUICK, 1.0)
    deep = londi.make_skilled_policy(mdp, 0.05, londi.Tier.DEEPTHINK, 5.0)

    train = londi.TrainConfig()
    train.episodes = 400
    train.cost_c = 0.05
    train.budget_n = 1
    train.penalty_np = 100.0
    train.seed = 3
    learner = londi.SwitcherLearner(rooms.n_states(), train.budget_n)
    log = londi.run_londi_b(rooms, quick, deep, learner, train)
    londi.validate_trace(log, train.cost_c, train.penalty_np)
    assert len(log.episodes) == train.episodes

    g = londi.greedy_switch_policy(learner, remaining=0)
    assert all(d == 0 for d in g.decisions)  # no budget left: never activate


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"ok {test.__name__}")
    print(f"{len(tests)} python smoke tests passed (londi {londi.__version__})")


if __name__ == "__main__":
    main()
