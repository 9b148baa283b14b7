// Command-line front end: solve / train / evaluate / sweep workflows with a
// JSON config file, full flag override (flags win), deterministic seeding,
// and a metadata sidecar per artifact directory sufficient to re-run the
// exact command.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "londi/budget.hpp"
#include "londi/envs.hpp"
#include "londi/policies.hpp"
#include "londi/reporting.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace londi;

namespace {

json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open for reading: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("json parse error in " + path + ": " + e.what());
    }
    return j;
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& what) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (allowed.find(it.key()) == allowed.end())
            throw ValidationError(what + ": unknown key '" + it.key() + "'");
}

// --- Environment spec --------------------------------------------------

struct EnvRig {
    std::unique_ptr<Environment> env;
    PolicyProvider quick;
    PolicyProvider deep;
    json resolved;  // spec with defaults and the calibrated epsilon filled in
};

EnvRig build_env(const std::string& spec_path, double tol) {
    json spec = load_json_file(spec_path);
    if (!spec.contains("type")) throw ValidationError("env spec: missing 'type'");
    const std::string type = spec.at("type").get<std::string>();
    const fs::path base = fs::path(spec_path).parent_path();

    EnvRig rig;
    if (type == "rooms") {
        reject_unknown_keys(spec, {"type", "n_rooms", "goal_room", "start_room",
                                   "subgoal_rewards", "step_penalty", "completion_reward",
                                   "gamma", "horizon", "eps_quick", "eps_deep", "quick_cost",
                                   "deep_cost"},
                            "env spec (rooms)");
        RoomsWorldConfig c;
        c.n_rooms = spec.value("n_rooms", c.n_rooms);
        c.goal_room = spec.value("goal_room", c.goal_room);
        c.start_room = spec.value("start_room", c.start_room);
        c.step_penalty = spec.value("step_penalty", c.step_penalty);
        c.completion_reward = spec.value("completion_reward", c.completion_reward);
        c.gamma = spec.value("gamma", c.gamma);
        c.horizon = spec.value("horizon", c.horizon);
        if (spec.contains("subgoal_rewards"))
            for (const auto& pair : spec.at("subgoal_rewards"))
                c.subgoal_rewards.emplace_back(pair.at(0).get<int>(), pair.at(1).get<double>());
        rig.env = build_rooms_world(c);
    } else if (type == "grid") {
        reject_unknown_keys(spec, {"type", "layout", "layout_path", "view_radius",
                                   "goal_reward", "decay", "gamma", "horizon", "export_cap",
                                   "eps_quick", "eps_deep", "quick_cost", "deep_cost"},
                            "env spec (grid)");
        GridTaskConfig c;
        if (spec.contains("layout_path")) {
            std::ifstream lf(base / spec.at("layout_path").get<std::string>());
            if (!lf)
                throw IoError("cannot open layout: " +
                              spec.at("layout_path").get<std::string>());
            std::string row;
            while (std::getline(lf, row))
                if (!row.empty()) c.layout.push_back(row);
        } else if (spec.contains("layout")) {
            for (const auto& row : spec.at("layout")) c.layout.push_back(row.get<std::string>());
        } else {
            throw ValidationError("env spec (grid): need 'layout' or 'layout_path'");
        }
        c.view_radius = spec.value("view_radius", c.view_radius);
        c.goal_reward = spec.value("goal_reward", c.goal_reward);
        c.decay = spec.value("decay", c.decay);
        c.gamma = spec.value("gamma", c.gamma);
        c.horizon = spec.value("horizon", c.horizon);
        c.export_cap = spec.value("export_cap", c.export_cap);
        auto grid = build_grid_task(c);
        if (!grid->export_available())
            throw ValidationError("env spec (grid): exact export unavailable (" +
                                  grid->export_failure() + "); oracle workflows need it");
        rig.env = std::move(grid);
    } else if (type == "mdp") {
        reject_unknown_keys(spec, {"type", "path", "start_state", "horizon", "eps_quick",
                                   "eps_deep", "quick_cost", "deep_cost"},
                            "env spec (mdp)");
        if (!spec.contains("path")) throw ValidationError("env spec (mdp): missing 'path'");
        TabularMDP mdp = load_mdp((base / spec.at("path").get<std::string>()).string());
        rig.env = std::make_unique<MdpEnvironment>(std::move(mdp), spec.value("start_state", 0),
                                                   spec.value("horizon", 50));
    } else {
        throw ValidationError("env spec: unknown type '" + type + "'");
    }

    const TabularMDP& mdp = *rig.env->exported_mdp();
    const double eps_deep = spec.value("eps_deep", 0.05);
    double eps_quick = spec.value("eps_quick", -1.0);
    if (eps_quick < 0.0)
        eps_quick = calibrate_quick_epsilon(mdp, rig.env->start_state(), eps_deep, 0.5, 0.05,
                                            tol);
    rig.quick = make_skilled_policy(mdp, SkillSpec(eps_quick), Tier::quick,
                                    spec.value("quick_cost", 1.0), tol);
    rig.deep = make_skilled_policy(mdp, SkillSpec(eps_deep), Tier::deep,
                                   spec.value("deep_cost", 5.0), tol);
    rig.resolved = spec;
    rig.resolved["eps_quick"] = eps_quick;
    rig.resolved["eps_deep"] = eps_deep;
    return rig;
}

// --- Run configuration ---------------------------------------------------

struct RunOptions {
    std::string env_path;
    std::string out_dir = "out";
    double cost = 0.1;
    int budget = 2;
    double penalty = 100.0;
    double persistence = 0.0;
    int episodes = 3000;
    int eval_episodes = 500;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    double tol = 1e-9;
    int workers = 1;
    std::vector<double> cost_grid = {0.02, 0.05, 0.1, 0.3, 2.0};
    std::vector<int> budget_grid = {0, 1, 2, 3, 4};
    std::string log_path;  // heatmap input

    json to_json() const {
        json j;
        j["env"] = env_path;
        j["out"] = out_dir;
        j["cost"] = cost;
        j["budget"] = budget;
        j["penalty"] = penalty;
        j["persistence"] = persistence;
        j["episodes"] = episodes;
        j["eval_episodes"] = eval_episodes;
        j["seeds"] = seeds;
        j["tol"] = tol;
        j["workers"] = workers;
        j["cost_grid"] = cost_grid;
        j["budget_grid"] = budget_grid;
        j["log"] = log_path;
        return j;
    }
};

void apply_config_file(RunOptions& opt, const std::string& path) {
    json j = load_json_file(path);
    reject_unknown_keys(j,
                        {"env", "out", "cost", "budget", "penalty", "persistence", "episodes",
                         "eval_episodes", "seeds", "root_seed", "n_seeds", "tol", "workers",
                         "cost_grid", "budget_grid", "log"},
                        "run config");
    opt.env_path = j.value("env", opt.env_path);
    opt.out_dir = j.value("out", opt.out_dir);
    opt.cost = j.value("cost", opt.cost);
    opt.budget = j.value("budget", opt.budget);
    opt.penalty = j.value("penalty", opt.penalty);
    opt.persistence = j.value("persistence", opt.persistence);
    opt.episodes = j.value("episodes", opt.episodes);
    opt.eval_episodes = j.value("eval_episodes", opt.eval_episodes);
    opt.tol = j.value("tol", opt.tol);
    opt.workers = j.value("workers", opt.workers);
    if (j.contains("seeds")) opt.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("root_seed")) {
        // Counter-based derivation: seed i depends only on (root, i), so
        // growing n_seeds never changes the seeds already in use.
        const auto root = j.at("root_seed").get<std::uint64_t>();
        const int n = j.value("n_seeds", 5);
        opt.seeds.clear();
        for (int i = 0; i < n; ++i)
            opt.seeds.push_back(derive_stream(root, static_cast<std::uint64_t>(i)));
    }
    if (j.contains("cost_grid")) opt.cost_grid = j.at("cost_grid").get<std::vector<double>>();
    if (j.contains("budget_grid"))
        opt.budget_grid = j.at("budget_grid").get<std::vector<int>>();
    opt.log_path = j.value("log", opt.log_path);
}

TrainConfig train_config_from(const RunOptions& opt, bool budgeted) {
    TrainConfig c;
    c.episodes = opt.episodes;
    c.persistence_p = opt.persistence;
    c.cost_c = opt.cost;
    c.budget_n = budgeted ? opt.budget : -1;
    c.penalty_np = budgeted ? opt.penalty : 0.0;
    return c;
}

// --- Artifact layout -------------------------------------------------------

struct ArtifactDir {
    fs::path root;
    fs::path tables;
    fs::path logs;
    fs::path solutions;
};

ArtifactDir prepare_artifacts(const RunOptions& opt, const std::string& subcommand,
                              const json& resolved_env, int argc, char** argv) {
    json resolved = opt.to_json();
    resolved["subcommand"] = subcommand;
    resolved["env_resolved"] = resolved_env;
    const std::string dump = resolved.dump(2);
    const std::string hash = hex64(fnv1a(dump));

    ArtifactDir dir;
    dir.root = fs::path(opt.out_dir) / subcommand / hash;
    dir.tables = dir.root / "tables";
    dir.logs = dir.root / "logs";
    dir.solutions = dir.root / "solutions";
    std::error_code ec;
    fs::create_directories(dir.tables, ec);
    fs::create_directories(dir.logs, ec);
    fs::create_directories(dir.solutions, ec);
    if (ec) throw IoError("cannot create artifact directory: " + dir.root.string());

    std::ostringstream cmd;
    for (int i = 0; i < argc; ++i) cmd << (i ? " " : "") << argv[i];
    json meta;
    meta["command"] = cmd.str();
    meta["subcommand"] = subcommand;
    meta["config"] = resolved;
    meta["config_hash"] = hash;
    meta["seeds"] = opt.seeds;
    meta["code_version"] = kVersion;
    std::ofstream mf(dir.root / "metadata.json", std::ios::binary);
    if (!mf) throw IoError("cannot write metadata");
    mf << meta.dump(2) << "\n";
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << content;
    if (!f) throw IoError("write failed: " + path.string());
}

std::string trained_policy_text(const SwitcherLearner& learner) {
    std::ostringstream out;
    out << "trained switch " << learner.n_states() << " " << learner.budget_n() << "\n";
    out << "# state remaining g q_quick q_deep\n";
    const int lo = learner.budgeted() ? -1 : 0;
    const int hi = learner.budgeted() ? learner.budget_n() : 0;
    for (int s = 0; s < learner.n_states(); ++s)
        for (int k = lo; k <= hi; ++k)
            out << "state " << s << " " << (learner.budgeted() ? std::to_string(k) : "NA")
                << " " << learner.greedy(s, k) << " " << format_double(learner.q(s, k, 0))
                << " " << format_double(learner.q(s, k, 1)) << "\n";
    return out.str();
}

// --- Subcommand bodies ---------------------------------------------------

void cmd_solve(const RunOptions& opt, const ArtifactDir& dir, const EnvRig& rig) {
    const TabularMDP& mdp = *rig.env->exported_mdp();
    SwitchSolution sol =
        solve_switcher(mdp, rig.quick.policy, rig.deep.policy, SwitchCost(opt.cost), opt.tol);
    save_switch_solution(sol, SwitchCost(opt.cost), (dir.solutions / "switch.sol").string());
}

void cmd_solve_budgeted(const RunOptions& opt, const ArtifactDir& dir, const EnvRig& rig) {
    const TabularMDP& mdp = *rig.env->exported_mdp();
    BudgetSpec spec(opt.budget, opt.penalty, SwitchCost(opt.cost));
    BudgetedMDP bmdp = augment_with_budget(mdp, rig.quick.policy, rig.deep.policy, spec);
    SwitchSolution sol = solve_budgeted(bmdp, opt.tol);
    save_budgeted_solution(bmdp, sol, spec, (dir.solutions / "budgeted.bsol").string());
}

void cmd_train(const RunOptions& opt, const ArtifactDir& dir, const EnvRig& rig,
               bool budgeted) {
    TrainConfig base = train_config_from(opt, budgeted);
    std::vector<std::string> logs(opt.seeds.size());
    std::vector<std::string> policies(opt.seeds.size());
    parallel_for(static_cast<int>(opt.seeds.size()), opt.workers, [&](int i) {
        TrainConfig cfg = base;
        cfg.seed = opt.seeds[static_cast<std::size_t>(i)];
        std::unique_ptr<Environment> env = rig.env->clone();
        SwitcherLearner learner(env->n_states(), cfg.budget_n);
        TrainLog log = budgeted ? run_londi_b(*env, rig.quick, rig.deep, learner, cfg)
                                : run_londi(*env, rig.quick, rig.deep, learner, cfg);
        validate_trace(log, cfg.cost_c, cfg.penalty_np);
        logs[static_cast<std::size_t>(i)] = log.to_text();
        policies[static_cast<std::size_t>(i)] = trained_policy_text(learner);
    });
    for (std::size_t i = 0; i < opt.seeds.size(); ++i) {
        const std::string tag = "seed" + std::to_string(opt.seeds[i]);
        write_file(dir.logs / ("train_" + tag + ".log"), logs[i]);
        write_file(dir.solutions / ("policy_" + tag + ".txt"), policies[i]);
    }
}

void cmd_eval(const RunOptions& opt, const ArtifactDir& dir, const EnvRig& rig) {
    TrainConfig base = train_config_from(opt, opt.budget >= 0);
    EvalResult res = evaluate(
        *rig.env, rig.quick, rig.deep,
        [&](std::uint64_t seed) {
            TrainConfig cfg = base;
            cfg.seed = seed;
            return train_londi_bundle(*rig.env, rig.quick, rig.deep, cfg, "londi");
        },
        opt.eval_episodes, opt.seeds);
    SweepTable table;
    table.grid_name = "budget";
    SweepRow row;
    row.label = opt.budget >= 0 ? "londi_b" : "londi";
    row.grid_value = opt.budget >= 0 ? opt.budget : std::numeric_limits<double>::quiet_NaN();
    row.metrics = res.metrics;
    table.rows.push_back(std::move(row));
    write_file(dir.tables / "eval.csv", sweep_table_to_csv(table));
    for (std::size_t i = 0; i < opt.seeds.size(); ++i)
        write_file(dir.logs / ("eval_seed" + std::to_string(opt.seeds[i]) + ".log"),
                   res.seed_logs[i].to_text());
}

void cmd_sweep_cost(const RunOptions& opt, const ArtifactDir& dir, const EnvRig& rig) {
    TrainConfig base = train_config_from(opt, false);
    SweepTable table = sweep_cost(*rig.env, rig.quick, rig.deep, opt.cost_grid, base,
                                  opt.eval_episodes, opt.seeds, opt.workers);
    write_file(dir.tables / "sweep_cost.csv", sweep_table_to_csv(table));
}

void cmd_sweep_budget(const RunOptions& opt, const ArtifactDir& dir, const EnvRig& rig) {
    TrainConfig base = train_config_from(opt, true);
    SweepTable table = sweep_budget(*rig.env, rig.quick, rig.deep, opt.budget_grid, base,
                                    opt.eval_episodes, opt.seeds, opt.workers);
    write_file(dir.tables / "sweep_budget.csv", sweep_table_to_csv(table));
    for (const SweepRow& row : table.rows)
        if (!std::isnan(row.grid_value))
            write_file(dir.tables / ("heatmap_budget" +
                                     std::to_string(static_cast<int>(row.grid_value)) + ".csv"),
                       heatmap_to_csv(row.heatmap));
}

void cmd_heatmap(const RunOptions& opt, const ArtifactDir& dir, const EnvRig& rig) {
    if (opt.log_path.empty()) throw ValidationError("heatmap: --log is required");
    TrainLog log = load_train_log(opt.log_path);
    HeatmapTable map = heatmap_from_log(log, *rig.env);
    write_file(dir.tables / "heatmap.csv", heatmap_to_csv(map));
}

void cmd_compare(const RunOptions& opt, const ArtifactDir& dir, const EnvRig& rig) {
    TrainConfig base = train_config_from(opt, true);
    EpisodeParams matched;
    matched.budget_n = opt.budget;
    matched.penalty_np = opt.penalty;
    matched.cost_c = opt.cost;
    matched.persistence_p = opt.persistence;

    std::vector<BundleFactory> bundles;
    bundles.push_back(BundleFactory{"londi_b", [&rig, base](std::uint64_t seed) {
                                        TrainConfig cfg = base;
                                        cfg.seed = seed;
                                        return train_londi_bundle(*rig.env, rig.quick, rig.deep,
                                                                  cfg, "londi_b");
                                    }});
    bundles.push_back(BundleFactory{"probabilistic_0.5", [matched](std::uint64_t) {
                                        return baseline_bundle("probabilistic_0.5",
                                                               BaselineKind::probabilistic, 0.5,
                                                               matched, true);
                                    }});
    bundles.push_back(BundleFactory{"cascade", [matched](std::uint64_t) {
                                        return baseline_bundle("cascade", BaselineKind::cascade,
                                                               -0.15, matched, true);
                                    }});
    bundles.push_back(BundleFactory{"always_quick", [](std::uint64_t) {
                                        return baseline_bundle("always_quick",
                                                               BaselineKind::always_quick, 0.0,
                                                               EpisodeParams{});
                                    }});
    bundles.push_back(BundleFactory{"always_deep", [](std::uint64_t) {
                                        return baseline_bundle("always_deep",
                                                               BaselineKind::always_deep, 0.0,
                                                               EpisodeParams{});
                                    }});
    std::vector<CompareRow> rows = compare_baselines(*rig.env, rig.quick, rig.deep, bundles,
                                                     opt.eval_episodes, opt.seeds, opt.workers);
    write_file(dir.tables / "compare.csv", compare_table_to_csv(rows));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LONDI switching-control workflows"};
    app.require_subcommand(1);

    RunOptions opt;
    std::string config_path;

    std::vector<CLI::App*> subs;
    for (const char* name : {"solve", "solve-budgeted", "train", "train-b", "eval",
                             "sweep-cost", "sweep-budget", "heatmap", "compare"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON run config; flags override it");
        sub->add_option("--env", opt.env_path, "environment spec (JSON)");
        sub->add_option("--out", opt.out_dir, "artifact output directory");
        sub->add_option("--cost", opt.cost, "switch cost c");
        sub->add_option("--budget", opt.budget, "activation budget n");
        sub->add_option("--penalty", opt.penalty, "over-budget penalty n_p");
        sub->add_option("--persistence", opt.persistence, "persistence probability p");
        sub->add_option("--episodes", opt.episodes, "training episodes");
        sub->add_option("--eval-episodes", opt.eval_episodes, "evaluation episodes per seed");
        sub->add_option("--seeds", opt.seeds, "seed list");
        sub->add_option("--tol", opt.tol, "solver tolerance");
        sub->add_option("--workers", opt.workers, "worker pool size");
        sub->add_option("--cost-grid", opt.cost_grid, "cost sweep grid");
        sub->add_option("--budget-grid", opt.budget_grid, "budget sweep grid");
        sub->add_option("--log", opt.log_path, "input train/eval log (heatmap)");
        subs.push_back(sub);
    }

    try {
        // Two-phase parse so explicit flags override config-file values.
        app.parse(argc, argv);
        CLI::App* active = app.get_subcommands().front();
        if (!config_path.empty()) {
            RunOptions from_file;
            apply_config_file(from_file, config_path);
            auto keep = [&](const char* flag) { return active->count(flag) > 0; };
            RunOptions merged = from_file;
            if (keep("--env")) merged.env_path = opt.env_path;
            if (keep("--out")) merged.out_dir = opt.out_dir;
            if (keep("--cost")) merged.cost = opt.cost;
            if (keep("--budget")) merged.budget = opt.budget;
            if (keep("--penalty")) merged.penalty = opt.penalty;
            if (keep("--persistence")) merged.persistence = opt.persistence;
            if (keep("--episodes")) merged.episodes = opt.episodes;
            if (keep("--eval-episodes")) merged.eval_episodes = opt.eval_episodes;
            if (keep("--seeds")) merged.seeds = opt.seeds;
            if (keep("--tol")) merged.tol = opt.tol;
            if (keep("--workers")) merged.workers = opt.workers;
            if (keep("--cost-grid")) merged.cost_grid = opt.cost_grid;
            if (keep("--budget-grid")) merged.budget_grid = opt.budget_grid;
            if (keep("--log")) merged.log_path = opt.log_path;
            opt = merged;
        }
        const std::string sub = active->get_name();
        if (opt.env_path.empty()) throw ValidationError("--env (or config 'env') is required");

        EnvRig rig = build_env(opt.env_path, opt.tol);
        ArtifactDir dir = prepare_artifacts(opt, sub, rig.resolved, argc, argv);
        save_mdp(*rig.env->exported_mdp(), (dir.solutions / "model.mdp").string());
        write_file(dir.tables / "providers.csv",
                   providers_to_csv({&rig.quick, &rig.deep}));

        if (sub == "solve") cmd_solve(opt, dir, rig);
        else if (sub == "solve-budgeted") cmd_solve_budgeted(opt, dir, rig);
        else if (sub == "train") cmd_train(opt, dir, rig, false);
        else if (sub == "train-b") cmd_train(opt, dir, rig, true);
        else if (sub == "eval") cmd_eval(opt, dir, rig);
        else if (sub == "sweep-cost") cmd_sweep_cost(opt, dir, rig);
        else if (sub == "sweep-budget") cmd_sweep_budget(opt, dir, rig);
        else if (sub == "heatmap") cmd_heatmap(opt, dir, rig);
        else if (sub == "compare") cmd_compare(opt, dir, rig);
        std::cout << dir.root.string() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ValidationError& e) {
        std::cerr << "error kind=validation msg=\"" << e.what() << "\"\n";
        return 2;
    } catch (const SolverError& e) {
        std::cerr << "error kind=solver msg=\"" << e.what() << "\" residual="
                  << format_double(e.last_residual()) << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error kind=io msg=\"" << e.what() << "\"\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error kind=internal msg=\"" << e.what() << "\"\n";
        return 1;
    }
}
