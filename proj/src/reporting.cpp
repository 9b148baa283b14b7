#include "londi/reporting.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace londi {

void parallel_for(int n_jobs, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, n_jobs));
    if (workers == 1) {
        for (int i = 0; i < n_jobs; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n_jobs) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

double pooled_std(double std_a, double std_b) {
    return std::sqrt(0.5 * (std_a * std_a + std_b * std_b));
}

EvalBundle baseline_bundle(const std::string& label, BaselineKind kind, double param,
                           const EpisodeParams& params, bool budget_gated) {
    EvalBundle b;
    b.label = label;
    b.decider = make_baseline_switcher(kind, param, budget_gated);
    b.params = params;
    return b;
}

EvalBundle train_londi_bundle(const Environment& env, const PolicyProvider& quick,
                              const PolicyProvider& deep, const TrainConfig& config,
                              const std::string& label) {
    auto learner =
        std::make_shared<SwitcherLearner>(env.n_states(), config.budget_n, config.q_init);
    std::unique_ptr<Environment> own = env.clone();
    if (config.budget_n >= 0)
        run_londi_b(*own, quick, deep, *learner, config);
    else
        run_londi(*own, quick, deep, *learner, config);

    EvalBundle b;
    b.label = label;
    b.learner = learner;
    b.decider = make_learner_decider(*learner);
    b.params.persistence_p = config.persistence_p;
    b.params.cost_c = config.cost_c;
    b.params.budget_n = config.budget_n;
    b.params.penalty_np = config.penalty_np;
    b.params.horizon = config.horizon;
    return b;
}

EvalResult evaluate(const Environment& env, const PolicyProvider& quick,
                    const PolicyProvider& deep,
                    const std::function<EvalBundle(std::uint64_t)>& bundle_for_seed,
                    int episodes, const std::vector<std::uint64_t>& seeds) {
    if (episodes < 1) throw ValidationError("evaluate: episodes must be >= 1");
    if (seeds.empty()) throw ValidationError("evaluate: seeds must be nonempty");

    EvalResult result;
    result.seed_logs.resize(seeds.size());
    result.metrics.per_seed.resize(seeds.size());

    long pooled_steps = 0, pooled_deep = 0;
    double pooled_cost = 0.0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const std::uint64_t seed = seeds[i];
        EvalBundle bundle = bundle_for_seed(seed);
        std::unique_ptr<Environment> own = env.clone();
        TrainLog& log = result.seed_logs[i];
        double reward_sum = 0.0;
        long consulted = 0, deep_steps = 0, steps = 0, successes = 0;
        double cost_sum = 0.0;
        for (int ep = 0; ep < episodes; ++ep) {
            const std::uint64_t stream = derive_stream(seed, 0xEA71, ep);
            EpisodeSummary s = run_episode(*own, quick, deep, *bundle.decider, bundle.params,
                                           ep, stream, &log, nullptr, nullptr);
            reward_sum += s.env_return;
            consulted += s.consulted_activations;
            deep_steps += s.deep_steps;
            steps += s.steps;
            successes += s.success ? 1 : 0;
            cost_sum += s.cost_total;
        }
        SeedMetrics& m = result.metrics.per_seed[i];
        m.seed = seed;
        m.mean_reward = reward_sum / episodes;
        m.consulted_per_episode = static_cast<double>(consulted) / episodes;
        m.deep_steps_per_episode = static_cast<double>(deep_steps) / episodes;
        m.total_steps = steps;
        m.deep_steps_total = deep_steps;
        m.cost_total = cost_sum;
        m.success_rate = static_cast<double>(successes) / episodes;
        pooled_steps += steps;
        pooled_deep += deep_steps;
        pooled_cost += cost_sum;
    }

    EvalMetrics& agg = result.metrics;
    const double n = static_cast<double>(seeds.size());
    double mean = 0.0;
    for (const SeedMetrics& m : agg.per_seed) mean += m.mean_reward;
    mean /= n;
    double var = 0.0;
    for (const SeedMetrics& m : agg.per_seed)
        var += (m.mean_reward - mean) * (m.mean_reward - mean);
    agg.mean_reward = mean;
    agg.std_reward = seeds.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    for (const SeedMetrics& m : agg.per_seed) {
        agg.consulted_per_episode += m.consulted_per_episode / n;
        agg.deep_steps_per_episode += m.deep_steps_per_episode / n;
        agg.success_rate += m.success_rate / n;
    }
    agg.relative_deep_calls =
        pooled_steps > 0 ? static_cast<double>(pooled_deep) / pooled_steps : 0.0;
    agg.cost_total = pooled_cost;
    agg.cost_auc = pooled_steps > 0 ? pooled_cost / pooled_steps * env.horizon() : 0.0;
    return result;
}

// --- Heatmaps ---------------------------------------------------------------

HeatmapTable heatmap_from_log(const TrainLog& log, const Environment& env) {
    HeatmapTable map;
    map.counts.assign(static_cast<std::size_t>(env.n_locations()), 0);
    for (const StepRecord& r : log.steps) {
        if (!(r.consulted && r.g == 1)) continue;
        if (r.location < 0 || r.location >= env.n_locations())
            throw ValidationError("heatmap: log step lacks location information");
        map.counts[static_cast<std::size_t>(r.location)] += 1;
        map.total += 1;
    }
    map.shares.assign(map.counts.size(), 0.0);
    if (map.total > 0)
        for (std::size_t i = 0; i < map.counts.size(); ++i)
            map.shares[i] = static_cast<double>(map.counts[i]) / map.total;
    return map;
}

HeatmapTable merge_heatmaps(const std::vector<HeatmapTable>& maps) {
    HeatmapTable out;
    if (maps.empty()) return out;
    out.counts.assign(maps.front().counts.size(), 0);
    for (const HeatmapTable& m : maps) {
        if (m.counts.size() != out.counts.size())
            throw ValidationError("merge_heatmaps: location count mismatch");
        for (std::size_t i = 0; i < m.counts.size(); ++i) out.counts[i] += m.counts[i];
        out.total += m.total;
    }
    out.shares.assign(out.counts.size(), 0.0);
    if (out.total > 0)
        for (std::size_t i = 0; i < out.counts.size(); ++i)
            out.shares[i] = static_cast<double>(out.counts[i]) / out.total;
    return out;
}

std::string heatmap_to_csv(const HeatmapTable& map) {
    std::ostringstream out;
    out << "location,activations,share,shares_defined\n";
    for (std::size_t i = 0; i < map.counts.size(); ++i) {
        out << i << "," << map.counts[i] << "," << format_double(map.shares[i]) << ","
            << (map.any_activations() ? 1 : 0) << "\n";
    }
    return out.str();
}

// --- Sweeps -----------------------------------------------------------------

namespace {

struct RowJob {
    std::string label;
    double grid_value;
    std::function<EvalBundle(std::uint64_t)> bundle_for_seed;
};

SweepRow run_row(const Environment& env, const PolicyProvider& quick,
                 const PolicyProvider& deep, const RowJob& job, int eval_episodes,
                 const std::vector<std::uint64_t>& seeds) {
    SweepRow row;
    row.label = job.label;
    row.grid_value = job.grid_value;
    EvalResult res = evaluate(env, quick, deep, job.bundle_for_seed, eval_episodes, seeds);
    row.metrics = std::move(res.metrics);
    std::vector<HeatmapTable> maps;
    maps.reserve(res.seed_logs.size());
    for (const TrainLog& log : res.seed_logs) maps.push_back(heatmap_from_log(log, env));
    row.heatmap = merge_heatmaps(maps);
    return row;
}

std::vector<SweepRow> run_rows(const Environment& env, const PolicyProvider& quick,
                               const PolicyProvider& deep, const std::vector<RowJob>& jobs,
                               int eval_episodes, const std::vector<std::uint64_t>& seeds,
                               int workers) {
    std::vector<SweepRow> rows(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), workers, [&](int i) {
        rows[static_cast<std::size_t>(i)] =
            run_row(env, quick, deep, jobs[static_cast<std::size_t>(i)], eval_episodes, seeds);
    });
    return rows;
}

EpisodeParams plain_params(const TrainConfig& base) {
    EpisodeParams p;
    p.persistence_p = base.persistence_p;
    p.cost_c = 0.0;  // anchors pay no switch cost
    p.budget_n = -1;
    p.penalty_np = 0.0;
    p.horizon = base.horizon;
    return p;
}

}  // namespace

SweepTable sweep_cost(const Environment& env, const PolicyProvider& quick,
                      const PolicyProvider& deep, const std::vector<double>& cost_grid,
                      const TrainConfig& base_config, int eval_episodes,
                      const std::vector<std::uint64_t>& seeds, int workers) {
    if (cost_grid.empty()) throw ValidationError("sweep_cost: grid must be nonempty");
    std::vector<RowJob> jobs;
    for (double c : cost_grid) {
        TrainConfig cfg = base_config;
        cfg.cost_c = c;
        cfg.budget_n = -1;
        jobs.push_back(RowJob{
            "londi(cost=" + format_double(c) + ")", c,
            [&env, &quick, &deep, cfg](std::uint64_t seed) {
                TrainConfig with_seed = cfg;
                with_seed.seed = seed;
                return train_londi_bundle(env, quick, deep, with_seed,
                                          "londi(cost=" + format_double(with_seed.cost_c) + ")");
            }});
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    EpisodeParams anchor = plain_params(base_config);
    jobs.push_back(RowJob{"quick_only", nan, [anchor](std::uint64_t) {
                              return baseline_bundle("quick_only", BaselineKind::always_quick,
                                                     0.0, anchor);
                          }});
    jobs.push_back(RowJob{"deep_only", nan, [anchor](std::uint64_t) {
                              return baseline_bundle("deep_only", BaselineKind::always_deep,
                                                     0.0, anchor);
                          }});
    SweepTable table;
    table.grid_name = "cost";
    table.rows = run_rows(env, quick, deep, jobs, eval_episodes, seeds, workers);
    return table;
}

SweepTable sweep_budget(const Environment& env, const PolicyProvider& quick,
                        const PolicyProvider& deep, const std::vector<int>& budget_grid,
                        const TrainConfig& base_config, int eval_episodes,
                        const std::vector<std::uint64_t>& seeds, int workers) {
    if (budget_grid.empty()) throw ValidationError("sweep_budget: grid must be nonempty");
    std::vector<RowJob> jobs;
    for (int n : budget_grid) {
        TrainConfig cfg = base_config;
        cfg.budget_n = n;
        jobs.push_back(RowJob{
            "londi_b(budget=" + std::to_string(n) + ")", static_cast<double>(n),
            [&env, &quick, &deep, cfg](std::uint64_t seed) {
                TrainConfig with_seed = cfg;
                with_seed.seed = seed;
                return train_londi_bundle(env, quick, deep, with_seed,
                                          "londi_b(budget=" +
                                              std::to_string(with_seed.budget_n) + ")");
            }});
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    EpisodeParams anchor = plain_params(base_config);
    jobs.push_back(RowJob{"quick_only", nan, [anchor](std::uint64_t) {
                              return baseline_bundle("quick_only", BaselineKind::always_quick,
                                                     0.0, anchor);
                          }});
    jobs.push_back(RowJob{"deep_only", nan, [anchor](std::uint64_t) {
                              return baseline_bundle("deep_only", BaselineKind::always_deep,
                                                     0.0, anchor);
                          }});
    SweepTable table;
    table.grid_name = "budget";
    table.rows = run_rows(env, quick, deep, jobs, eval_episodes, seeds, workers);
    return table;
}

std::string sweep_table_to_csv(const SweepTable& table) {
    std::ostringstream out;
    out << "label," << table.grid_name
        << ",mean_reward,std_reward,consulted_per_episode,deep_steps_per_episode,"
           "relative_deep_calls,success_rate,cost_auc,cost_total\n";
    for (const SweepRow& row : table.rows) {
        out << row.label << ",";
        if (std::isnan(row.grid_value))
            out << "-";
        else
            out << format_double(row.grid_value);
        const EvalMetrics& m = row.metrics;
        out << "," << format_double(m.mean_reward) << "," << format_double(m.std_reward) << ","
            << format_double(m.consulted_per_episode) << ","
            << format_double(m.deep_steps_per_episode) << ","
            << format_double(m.relative_deep_calls) << "," << format_double(m.success_rate)
            << "," << format_double(m.cost_auc) << "," << format_double(m.cost_total) << "\n";
    }
    return out.str();
}

// --- Baseline comparison ------------------------------------------------

std::vector<CompareRow> compare_baselines(const Environment& env, const PolicyProvider& quick,
                                          const PolicyProvider& deep,
                                          const std::vector<BundleFactory>& bundles,
                                          int eval_episodes,
                                          const std::vector<std::uint64_t>& seeds,
                                          int workers) {
    if (bundles.size() < 2)
        throw ValidationError("compare_baselines: need at least two bundles");
    std::vector<CompareRow> rows(bundles.size());
    parallel_for(static_cast<int>(bundles.size()), workers, [&](int i) {
        const BundleFactory& f = bundles[static_cast<std::size_t>(i)];
        EvalResult res = evaluate(env, quick, deep, f.make, eval_episodes, seeds);
        rows[static_cast<std::size_t>(i)].label = f.label;
        rows[static_cast<std::size_t>(i)].metrics = std::move(res.metrics);
    });
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].mean_diff_vs_first = rows[i].metrics.mean_reward - rows[0].metrics.mean_reward;
        rows[i].pooled_std_vs_first =
            pooled_std(rows[i].metrics.std_reward, rows[0].metrics.std_reward);
    }
    return rows;
}

std::string providers_to_csv(const std::vector<const PolicyProvider*>& providers) {
    std::ostringstream out;
    out << "name,tier,call_cost\n";
    for (const PolicyProvider* p : providers)
        out << p->name << "," << tier_name(p->tier) << "," << format_double(p->call_cost)
            << "\n";
    return out.str();
}

std::string compare_table_to_csv(const std::vector<CompareRow>& rows) {
    std::ostringstream out;
    out << "label,mean_reward,std_reward,consulted_per_episode,relative_deep_calls,"
           "success_rate,cost_auc,mean_diff_vs_first,pooled_std_vs_first\n";
    for (const CompareRow& row : rows) {
        const EvalMetrics& m = row.metrics;
        out << row.label << "," << format_double(m.mean_reward) << ","
            << format_double(m.std_reward) << "," << format_double(m.consulted_per_episode)
            << "," << format_double(m.relative_deep_calls) << ","
            << format_double(m.success_rate) << "," << format_double(m.cost_auc) << ","
            << format_double(row.mean_diff_vs_first) << ","
            << format_double(row.pooled_std_vs_first) << "\n";
    }
    return out.str();
}

}  // namespace londi
