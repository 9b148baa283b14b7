#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "londi/trainer.hpp"

namespace londi {

// ---------------------------------------------------------------------------
// Greedy evaluation, sweeps over cost/budget grids, activation heatmaps and
// CSV table emission. Aggregation is pure over logs; sweeps fan out
// independent (grid point, seed) jobs over a bounded worker pool and join in
// a fixed order, so emitted tables are deterministic given (config, seeds).
// ---------------------------------------------------------------------------

struct SeedMetrics {
    std::uint64_t seed = 0;
    double mean_reward = 0.0;  // undiscounted env return, mean over episodes
    double consulted_per_episode = 0.0;
    double deep_steps_per_episode = 0.0;
    long total_steps = 0;
    long deep_steps_total = 0;
    double cost_total = 0.0;
    double success_rate = 0.0;
};

struct EvalMetrics {
    double mean_reward = 0.0;  // mean of per-seed means
    double std_reward = 0.0;   // std across seeds
    double consulted_per_episode = 0.0;
    double deep_steps_per_episode = 0.0;
    double relative_deep_calls = 0.0;  // pooled deep-acted steps / pooled steps
    double cost_auc = 0.0;             // mean per-step cost x horizon
    double cost_total = 0.0;           // pooled ledger cumulative
    double success_rate = 0.0;
    std::vector<SeedMetrics> per_seed;
};

/// A composite policy under evaluation: decision source plus episode
/// mechanics. Owns the trained learner when there is one so the decider's
/// reference stays valid.
struct EvalBundle {
    std::string label;
    std::shared_ptr<SwitcherLearner> learner;  // null for baselines
    std::unique_ptr<SwitchDecider> decider;
    EpisodeParams params;
};

EvalBundle baseline_bundle(const std::string& label, BaselineKind kind, double param,
                           const EpisodeParams& params, bool budget_gated = false);

/// Trains a LONDI / LONDI-B learner (selected by config.budget_n) and wraps
/// it for greedy evaluation.
EvalBundle train_londi_bundle(const Environment& env, const PolicyProvider& quick,
                              const PolicyProvider& deep, const TrainConfig& config,
                              const std::string& label);

struct EvalResult {
    EvalMetrics metrics;
    std::vector<TrainLog> seed_logs;  // one per seed, greedy rollouts
};

/// Greedy (no-exploration) rollouts, `episodes` per seed, with per-episode
/// streams derived from the seed value only — two bundles evaluated under
/// the same seeds see identical environment randomness.
EvalResult evaluate(const Environment& env, const PolicyProvider& quick,
                    const PolicyProvider& deep,
                    const std::function<EvalBundle(std::uint64_t)>& bundle_for_seed,
                    int episodes, const std::vector<std::uint64_t>& seeds);

// --- Heatmaps ---------------------------------------------------------------

struct HeatmapTable {
    std::vector<long> counts;    // consulted activations per location id
    std::vector<double> shares;  // counts / total; all zero when total == 0
    long total = 0;

    bool any_activations() const { return total > 0; }
};

/// Consulted-activation counts per location. Throws when the log carries no
/// location information for activation steps.
HeatmapTable heatmap_from_log(const TrainLog& log, const Environment& env);
HeatmapTable merge_heatmaps(const std::vector<HeatmapTable>& maps);
std::string heatmap_to_csv(const HeatmapTable& map);

// --- Sweeps -----------------------------------------------------------------

struct SweepRow {
    std::string label;
    double grid_value = 0.0;  // cost or budget; NaN for anchor rows
    EvalMetrics metrics;
    HeatmapTable heatmap;
};

struct SweepTable {
    std::string grid_name;  // "cost" or "budget"
    std::vector<SweepRow> rows;
};

/// One trained-and-evaluated row per cost value plus QUICK-only and
/// DEEP-only anchor rows.
SweepTable sweep_cost(const Environment& env, const PolicyProvider& quick,
                      const PolicyProvider& deep, const std::vector<double>& cost_grid,
                      const TrainConfig& base_config, int eval_episodes,
                      const std::vector<std::uint64_t>& seeds, int workers = 1);

/// One row per budget value (LONDI-B) plus anchors; the consulted column is
/// the budget-usage measurement.
SweepTable sweep_budget(const Environment& env, const PolicyProvider& quick,
                        const PolicyProvider& deep, const std::vector<int>& budget_grid,
                        const TrainConfig& base_config, int eval_episodes,
                        const std::vector<std::uint64_t>& seeds, int workers = 1);

std::string sweep_table_to_csv(const SweepTable& table);

// --- Baseline comparison ------------------------------------------------

struct BundleFactory {
    std::string label;
    std::function<EvalBundle(std::uint64_t seed)> make;
};

struct CompareRow {
    std::string label;
    EvalMetrics metrics;
    double mean_diff_vs_first = 0.0;
    double pooled_std_vs_first = 0.0;
};

/// Evaluates each bundle at matched settings; the first bundle is the
/// reference for the pairwise columns. Requires at least two bundles.
std::vector<CompareRow> compare_baselines(const Environment& env, const PolicyProvider& quick,
                                          const PolicyProvider& deep,
                                          const std::vector<BundleFactory>& bundles,
                                          int eval_episodes,
                                          const std::vector<std::uint64_t>& seeds,
                                          int workers = 1);

std::string compare_table_to_csv(const std::vector<CompareRow>& rows);

/// Provider descriptors in the same CSV conventions as the metric tables.
std::string providers_to_csv(const std::vector<const PolicyProvider*>& providers);

double pooled_std(double std_a, double std_b);

/// Bounded worker pool running jobs 0..n-1; results are joined by index so
/// output order never depends on scheduling.
void parallel_for(int n_jobs, int workers, const std::function<void(int)>& fn);

}  // namespace londi
