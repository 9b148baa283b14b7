#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "londi/budget.hpp"
#include "londi/envs.hpp"
#include "londi/policies.hpp"
#include "londi/reporting.hpp"

namespace py = pybind11;
using namespace londi;

namespace {

// Exceptions map onto ValueError/RuntimeError so python callers can branch
// on the same validation/solver split the CLI exit codes expose.
void register_exceptions(py::module_& m) {
    static py::exception<ValidationError> validation(m, "ValidationError", PyExc_ValueError);
    static py::exception<SolverError> solver(m, "SolverError", PyExc_RuntimeError);
    static py::exception<IoError> io(m, "IoError", PyExc_OSError);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Switching-control toolkit: exact solvers, budgeted variants, "
              "desk-scale environments and training loops";
    m.attr("__version__") = kVersion;
    register_exceptions(m);

    py::class_<ValueFunction>(m, "ValueFunction")
        .def(py::init<>())
        .def_readwrite("values", &ValueFunction::values)
        .def("__getitem__", [](const ValueFunction& v, int s) { return v[s]; })
        .def("__len__", &ValueFunction::size);

    py::class_<QFunction>(m, "QFunction")
        .def(py::init<int, int>(), py::arg("n_states"), py::arg("n_actions"))
        .def_readonly("n_states", &QFunction::n_states)
        .def_readonly("n_actions", &QFunction::n_actions)
        .def_readwrite("values", &QFunction::values)
        .def("__call__", [](const QFunction& q, int s, int a) { return q(s, a); })
        .def("set", [](QFunction& q, int s, int a, double v) { q(s, a) = v; })
        .def("row_max", &QFunction::row_max);

    py::class_<StationaryPolicy>(m, "StationaryPolicy")
        .def(py::init<int, int>(), py::arg("n_states"), py::arg("n_actions"))
        .def_readonly("n_states", &StationaryPolicy::n_states)
        .def_readonly("n_actions", &StationaryPolicy::n_actions)
        .def_readwrite("probabilities", &StationaryPolicy::probabilities)
        .def("__call__", [](const StationaryPolicy& p, int s, int a) { return p(s, a); })
        .def("set", [](StationaryPolicy& p, int s, int a, double v) { p(s, a) = v; })
        .def("validate", &StationaryPolicy::validate);

    py::class_<TabularMDP>(m, "TabularMDP")
        .def(py::init<int, int, double>(), py::arg("n_states"), py::arg("n_actions"),
             py::arg("gamma"))
        .def_readonly("n_states", &TabularMDP::n_states)
        .def_readonly("n_actions", &TabularMDP::n_actions)
        .def_readwrite("gamma", &TabularMDP::gamma)
        .def("p", [](const TabularMDP& mdp, int s, int a, int s2) { return mdp.p(s, a, s2); })
        .def("set_p", [](TabularMDP& mdp, int s, int a, int s2, double v) { mdp.p(s, a, s2) = v; })
        .def("r", [](const TabularMDP& mdp, int s, int a) { return mdp.r(s, a); })
        .def("set_r", [](TabularMDP& mdp, int s, int a, double v) { mdp.r(s, a) = v; })
        .def("make_terminal", &TabularMDP::make_terminal)
        .def("is_terminal", &TabularMDP::is_terminal)
        .def("validate", &TabularMDP::validate)
        .def("max_abs_reward", &TabularMDP::max_abs_reward);

    m.def("value_iteration", &value_iteration, py::arg("mdp"), py::arg("tol"),
          py::arg("max_iter") = 1000000);
    m.def("policy_evaluation", &policy_evaluation, py::arg("mdp"), py::arg("policy"),
          py::arg("tol"), py::arg("max_iter") = 1000000);
    m.def("q_from_values", &q_from_values);
    m.def("greedy_policy", &greedy_policy);
    m.def("uniform_policy", &uniform_policy);
    m.def("mix_with_uniform", &mix_with_uniform);
    m.def("mdp_to_text", &mdp_to_text);
    m.def("mdp_from_text", &mdp_from_text);
    m.def("save_mdp", &save_mdp);
    m.def("load_mdp", &load_mdp);

    py::class_<SwitchPolicy>(m, "SwitchPolicy")
        .def(py::init<>())
        .def_readwrite("decisions", &SwitchPolicy::decisions)
        .def("__getitem__", [](const SwitchPolicy& g, int s) { return g[s]; })
        .def("__len__", &SwitchPolicy::size);

    py::class_<SwitchSolution>(m, "SwitchSolution")
        .def_readonly("v_star", &SwitchSolution::v_star)
        .def_readonly("q_star", &SwitchSolution::q_star)
        .def_readonly("g_star", &SwitchSolution::g_star);

    m.def(
        "intervention_value",
        [](const QFunction& q, int s, const StationaryPolicy& pi_deep, double cost) {
            return intervention_value(q, s, pi_deep, SwitchCost(cost));
        },
        py::arg("q"), py::arg("state"), py::arg("pi_deep"), py::arg("cost"));
    m.def(
        "switch_bellman_step",
        [](const TabularMDP& mdp, const ValueFunction& v, const StationaryPolicy& pi_deep,
           double cost) { return switch_bellman_step(mdp, v, pi_deep, SwitchCost(cost)); },
        py::arg("mdp"), py::arg("v"), py::arg("pi_deep"), py::arg("cost"));
    m.def(
        "composite_bellman_step",
        [](const TabularMDP& mdp, const ValueFunction& v, const StationaryPolicy& pi_quick,
           const StationaryPolicy& pi_deep, double cost) {
            return composite_bellman_step(mdp, v, pi_quick, pi_deep, SwitchCost(cost));
        },
        py::arg("mdp"), py::arg("v"), py::arg("pi_quick"), py::arg("pi_deep"), py::arg("cost"));
    m.def(
        "solve_switcher",
        [](const TabularMDP& mdp, const StationaryPolicy& pi_quick,
           const StationaryPolicy& pi_deep, double cost, double tol, int max_iter) {
            return solve_switcher(mdp, pi_quick, pi_deep, SwitchCost(cost), tol, max_iter);
        },
        py::arg("mdp"), py::arg("pi_quick"), py::arg("pi_deep"), py::arg("cost"),
        py::arg("tol") = 1e-10, py::arg("max_iter") = 1000000);
    m.def(
        "switch_rule",
        [](const QFunction& q, int s, const StationaryPolicy& pi_deep, double cost) {
            return switch_rule(q, s, pi_deep, SwitchCost(cost));
        },
        py::arg("q"), py::arg("state"), py::arg("pi_deep"), py::arg("cost"));
    m.def(
        "switch_rule_deployed",
        [](const QFunction& q, int s, const StationaryPolicy& pi_deep,
           const StationaryPolicy& pi_quick, double cost) {
            return switch_rule(q, s, pi_deep, pi_quick, SwitchCost(cost));
        },
        py::arg("q"), py::arg("state"), py::arg("pi_deep"), py::arg("pi_quick"),
        py::arg("cost"));
    m.def("extract_switching_times", &extract_switching_times);
    py::class_<SwitchingTimes>(m, "SwitchingTimes")
        .def_readonly("activations", &SwitchingTimes::activations)
        .def_readonly("deactivations", &SwitchingTimes::deactivations);
    m.def(
        "composite_exact_evaluate",
        [](const TabularMDP& mdp, const StationaryPolicy& pi_quick,
           const StationaryPolicy& pi_deep, const SwitchPolicy& g, double persistence_p,
           double cost) {
            return composite_exact_evaluate(mdp, pi_quick, pi_deep, g, persistence_p,
                                            SwitchCost(cost));
        },
        py::arg("mdp"), py::arg("pi_quick"), py::arg("pi_deep"), py::arg("g"),
        py::arg("persistence_p"), py::arg("cost"));
    m.def(
        "switch_solution_to_text",
        [](const SwitchSolution& sol, double cost) {
            return switch_solution_to_text(sol, SwitchCost(cost));
        },
        py::arg("solution"), py::arg("cost"));

    py::class_<AugmentedState>(m, "AugmentedState")
        .def(py::init([](int base, int remaining) {
                 return AugmentedState{base, remaining};
             }),
             py::arg("base"), py::arg("remaining"))
        .def_readwrite("base", &AugmentedState::base)
        .def_readwrite("remaining", &AugmentedState::remaining);
    py::class_<BudgetedMDP>(m, "BudgetedMDP")
        .def_readonly("mdp", &BudgetedMDP::mdp)
        .def_readonly("n_base_states", &BudgetedMDP::n_base_states)
        .def_readonly("budget", &BudgetedMDP::budget)
        .def("index_of", &BudgetedMDP::index_of)
        .def("state_of", &BudgetedMDP::state_of);
    m.def("budget_step", &budget_step, py::arg("state"), py::arg("g"));
    m.def(
        "augment_with_budget",
        [](const TabularMDP& mdp, const StationaryPolicy& pi_quick,
           const StationaryPolicy& pi_deep, int n, double penalty, double cost,
           int state_cap) {
            return augment_with_budget(mdp, pi_quick, pi_deep,
                                       BudgetSpec(n, penalty, SwitchCost(cost)), state_cap);
        },
        py::arg("mdp"), py::arg("pi_quick"), py::arg("pi_deep"), py::arg("n"),
        py::arg("penalty"), py::arg("cost"), py::arg("state_cap") = 200000);
    m.def("solve_budgeted", &solve_budgeted, py::arg("bmdp"), py::arg("tol") = 1e-10,
          py::arg("max_iter") = 1000000);
    m.def(
        "budgeted_solution_to_text",
        [](const BudgetedMDP& bmdp, const SwitchSolution& sol, double penalty, double cost) {
            return budgeted_solution_to_text(bmdp, sol,
                                             BudgetSpec(bmdp.budget, penalty, SwitchCost(cost)));
        },
        py::arg("bmdp"), py::arg("solution"), py::arg("penalty"), py::arg("cost"));

    py::enum_<Tier>(m, "Tier").value("QUICK", Tier::quick).value("DEEPTHINK", Tier::deep);
    py::class_<PolicyProvider>(m, "PolicyProvider")
        .def_readonly("name", &PolicyProvider::name)
        .def_readonly("tier", &PolicyProvider::tier)
        .def_readonly("call_cost", &PolicyProvider::call_cost)
        .def_readonly("policy", &PolicyProvider::policy);
    m.def(
        "make_skilled_policy",
        [](const TabularMDP& mdp, double epsilon, Tier tier, double call_cost) {
            return make_skilled_policy(mdp, SkillSpec(epsilon), tier, call_cost);
        },
        py::arg("mdp"), py::arg("epsilon"), py::arg("tier"), py::arg("call_cost"));
    m.def("calibrate_quick_epsilon", &calibrate_quick_epsilon, py::arg("mdp"),
          py::arg("eval_state"), py::arg("eps_deep"), py::arg("target_ratio") = 0.5,
          py::arg("rel_tol") = 0.05, py::arg("tol") = 1e-10);

    py::class_<StepOutcome>(m, "StepOutcome")
        .def_readonly("next_state", &StepOutcome::next_state)
        .def_readonly("reward", &StepOutcome::reward)
        .def_readonly("done", &StepOutcome::done);

    py::class_<Environment>(m, "Environment")
        .def("reset", &Environment::reset)
        .def("step", &Environment::step)
        .def("n_states", &Environment::n_states)
        .def("n_actions", &Environment::n_actions)
        .def("horizon", &Environment::horizon)
        .def("gamma", &Environment::gamma)
        .def("start_state", &Environment::start_state)
        .def("location_of", &Environment::location_of)
        .def("n_locations", &Environment::n_locations)
        .def("goal_distance", &Environment::goal_distance)
        .def("exported_mdp", &Environment::exported_mdp,
             py::return_value_policy::reference_internal);

    py::class_<RoomsWorldConfig>(m, "RoomsWorldConfig")
        .def(py::init<>())
        .def_readwrite("n_rooms", &RoomsWorldConfig::n_rooms)
        .def_readwrite("goal_room", &RoomsWorldConfig::goal_room)
        .def_readwrite("start_room", &RoomsWorldConfig::start_room)
        .def_readwrite("subgoal_rewards", &RoomsWorldConfig::subgoal_rewards)
        .def_readwrite("step_penalty", &RoomsWorldConfig::step_penalty)
        .def_readwrite("completion_reward", &RoomsWorldConfig::completion_reward)
        .def_readwrite("gamma", &RoomsWorldConfig::gamma)
        .def_readwrite("horizon", &RoomsWorldConfig::horizon);
    py::class_<RoomsWorld, Environment>(m, "RoomsWorld")
        .def("hallway_location", &RoomsWorld::hallway_location)
        .def("action_to_hallway", &RoomsWorld::action_to_hallway)
        .def("action_work", &RoomsWorld::action_work);
    m.def("build_rooms_world",
          [](const RoomsWorldConfig& c) { return build_rooms_world(c); });

    py::class_<GridTaskConfig>(m, "GridTaskConfig")
        .def(py::init<>())
        .def_readwrite("layout", &GridTaskConfig::layout)
        .def_readwrite("view_radius", &GridTaskConfig::view_radius)
        .def_readwrite("goal_reward", &GridTaskConfig::goal_reward)
        .def_readwrite("decay", &GridTaskConfig::decay)
        .def_readwrite("gamma", &GridTaskConfig::gamma)
        .def_readwrite("horizon", &GridTaskConfig::horizon)
        .def_readwrite("export_cap", &GridTaskConfig::export_cap);
    py::class_<GridTask, Environment>(m, "GridTask")
        .def("export_available", &GridTask::export_available)
        .def("export_failure", &GridTask::export_failure);
    m.def("build_grid_task", [](const GridTaskConfig& c) { return build_grid_task(c); });

    py::class_<MdpEnvironment, Environment>(m, "MdpEnvironment")
        .def(py::init<TabularMDP, int, int, std::uint64_t>(), py::arg("mdp"),
             py::arg("start_state"), py::arg("horizon"), py::arg("transition_seed") = 0x5eed);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("episodes", &TrainConfig::episodes)
        .def_readwrite("horizon", &TrainConfig::horizon)
        .def_readwrite("persistence_p", &TrainConfig::persistence_p)
        .def_readwrite("cost_c", &TrainConfig::cost_c)
        .def_readwrite("budget_n", &TrainConfig::budget_n)
        .def_readwrite("penalty_np", &TrainConfig::penalty_np)
        .def_readwrite("buffer_capacity", &TrainConfig::buffer_capacity)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("epochs_per_update", &TrainConfig::epochs_per_update)
        .def_readwrite("batches_per_epoch", &TrainConfig::batches_per_epoch)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("robbins_monro", &TrainConfig::robbins_monro)
        .def_readwrite("epsilon_start", &TrainConfig::epsilon_start)
        .def_readwrite("epsilon_end", &TrainConfig::epsilon_end)
        .def_readwrite("softmax_temperature", &TrainConfig::softmax_temperature)
        .def_readwrite("seed", &TrainConfig::seed);

    py::class_<SwitcherLearner>(m, "SwitcherLearner")
        .def(py::init<int, int>(), py::arg("n_states"), py::arg("budget_n"))
        .def("greedy", &SwitcherLearner::greedy)
        .def("q", &SwitcherLearner::q)
        .def("n_states", &SwitcherLearner::n_states)
        .def("budget_n", &SwitcherLearner::budget_n);
    m.def("greedy_switch_policy", &greedy_switch_policy, py::arg("learner"),
          py::arg("remaining") = 0);

    py::class_<EpisodeSummary>(m, "EpisodeSummary")
        .def_readonly("episode", &EpisodeSummary::episode)
        .def_readonly("steps", &EpisodeSummary::steps)
        .def_readonly("env_return", &EpisodeSummary::env_return)
        .def_readonly("consulted_activations", &EpisodeSummary::consulted_activations)
        .def_readonly("deep_steps", &EpisodeSummary::deep_steps)
        .def_readonly("success", &EpisodeSummary::success);
    py::class_<TrainLog>(m, "TrainLog")
        .def_readonly("episodes", &TrainLog::episodes)
        .def("to_text", &TrainLog::to_text)
        .def("save", &TrainLog::save);

    m.def("run_londi", &run_londi, py::arg("env"), py::arg("quick"), py::arg("deep"),
          py::arg("learner"), py::arg("config"));
    m.def("run_londi_b", &run_londi_b, py::arg("env"), py::arg("quick"), py::arg("deep"),
          py::arg("learner"), py::arg("config"));
    m.def(
        "validate_trace",
        [](const TrainLog& log, double cost, double penalty) {
            validate_trace(log, cost, penalty);
        },
        py::arg("log"), py::arg("cost"), py::arg("penalty"));
}
