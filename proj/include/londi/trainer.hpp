#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "londi/envs.hpp"
#include "londi/policies.hpp"
#include "londi/switching.hpp"

namespace londi {

// ---------------------------------------------------------------------------
// Model-free training of the switch policy, implemented branch-for-branch
// after the framework's control flow: the decision is sampled every step
// (and discarded on persistence steps), the regime flag m gates persistence,
// the activation cost lands in the stored reward only on consulted
// activations, and over-budget steps carry the penalty.
// ---------------------------------------------------------------------------

struct TrainConfig {
    int episodes = 2000;
    int horizon = 0;          // 0: use the environment's horizon
    double persistence_p = 0.0;
    double cost_c = 0.0;
    int budget_n = -1;        // -1: unbudgeted (LONDI); >= 0: LONDI-B
    double penalty_np = 0.0;
    int buffer_capacity = 20000;
    int batch_size = 64;
    int epochs_per_update = 1;
    int batches_per_epoch = 4;
    double learning_rate = 0.1;
    bool robbins_monro = false;    // alpha(s,g) = (1 + visits)^-0.7
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double epsilon_decay_fraction = 0.5;
    double softmax_temperature = 0.0;  // > 0: Boltzmann exploration instead of eps-greedy
    double q_init = 0.0;               // optimistic when set above the value bound
    /// Exploration draws pick the less-tried decision instead of a uniform
    /// one, so rarely-reached states still get both branches sampled.
    bool visit_balanced_exploration = false;
    std::uint64_t seed = 1;

    void validate() const;
};

/// One logged step. `remaining` is the post-step budget (the penalty applies
/// exactly when it is negative); INT32_MIN marks unbudgeted runs and prints
/// as NA.
struct StepRecord {
    int episode = 0;
    int step = 0;
    int state = 0;
    int m = 0;            // regime counter before the step
    int persist = -1;     // persistence draw; -1 when no draw happened
    bool consulted = false;
    int g = 0;            // sampled decision (kept even when unconsulted)
    Tier tier = Tier::quick;
    double reward = 0.0;  // stored reward, after cost/penalty adjustments
    double cost = 0.0;    // compute cost of the acted call
    int remaining = kNoBudget;
    int location = -1;
    double env_reward = 0.0;

    static constexpr int kNoBudget = INT32_MIN;
};

struct EpisodeSummary {
    int episode = 0;
    int steps = 0;
    double env_return = 0.0;       // undiscounted sum of environment rewards
    double adjusted_return = 0.0;  // stored-reward sum
    int consulted_activations = 0;
    int deep_steps = 0;
    double cost_total = 0.0;
    bool success = false;
};

struct TrainLog {
    std::vector<StepRecord> steps;
    std::vector<EpisodeSummary> episodes;

    std::string to_text() const;
    void save(const std::string& path) const;
};

/// Parses the documented line format back into step records (episode
/// summaries are not reconstructed). Rejects malformed lines.
TrainLog parse_train_log(const std::string& text);
TrainLog load_train_log(const std::string& path);

/// Checks the regime law on every logged step: DEEPTHINK acts iff the step
/// persisted (m > 0 and draw = 1) or the consulted decision was 1; and the
/// stored reward equals the environment reward minus the cost/penalty
/// adjustments implied by the flags. Throws ValidationError on violation.
void validate_trace(const TrainLog& log, double cost_c, double penalty_np);

/// Tabular Q over (state, budget level) x {0,1}. Level 0 serves unbudgeted
/// runs; budgeted runs use level = remaining + 1 with remaining clamped at
/// -1.
class SwitcherLearner {
public:
    /// q_init above the attainable value bound gives optimistic
    /// initialisation: untried decisions stay attractive until sampled, so
    /// every visited (state, level) pair gets both branches exercised.
    SwitcherLearner(int n_states, int budget_n, double q_init = 0.0);

    int greedy(int state, int remaining) const;  // ties resolve to 0
    double q(int state, int remaining, int g) const;
    double& q_ref(int state, int remaining, int g);

    /// Q(s,k,g) += alpha * (r + gamma * max_g' Q(s',k',g') - Q(s,k,g)).
    void td_update(int state, int remaining, int g, double reward, int next_state,
                   int next_remaining, double gamma, double alpha);

    /// Visit-count learning rate (1 + visits)^-0.7; counts are per entry.
    double robbins_monro_alpha(int state, int remaining, int g);

    int n_states() const { return n_states_; }
    int budget_n() const { return budget_n_; }
    bool budgeted() const { return budget_n_ >= 0; }

private:
    int level(int remaining) const;

    int n_states_ = 0;
    int budget_n_ = -1;
    int levels_ = 1;
    std::vector<double> q_;
    std::vector<long> visits_;
};

/// Greedy decisions per state at one budget level (remaining ignored for
/// unbudgeted learners).
SwitchPolicy greedy_switch_policy(const SwitcherLearner& learner, int remaining = 0);

struct ReplayTransition {
    int state = 0;
    int g = 0;
    double reward = 0.0;
    int next_state = 0;
    int remaining = 0;      // pre-step remaining budget; 0 for unbudgeted
    bool consulted = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity);

    void push(const ReplayTransition& t);
    const ReplayTransition& sample(std::mt19937_64& rng) const;
    int size() const { return static_cast<int>(data_.size()); }

private:
    int capacity_;
    std::size_t next_ = 0;
    std::vector<ReplayTransition> data_;
};

// --- Switch deciders -----------------------------------------------------

struct DecideContext {
    bool budgeted = false;
    const Environment* env = nullptr;
    const std::deque<double>* recent_env_rewards = nullptr;
};

class SwitchDecider {
public:
    virtual ~SwitchDecider() = default;
    virtual int decide(int state, int remaining, const DecideContext& ctx,
                       std::mt19937_64& rng) = 0;
    virtual std::unique_ptr<SwitchDecider> clone() const = 0;
};

enum class BaselineKind { probabilistic, cascade, always_quick, always_deep };

/// Baseline switch policies. `param` is the Bernoulli probability for
/// probabilistic and the score threshold for cascade. When budget_gated,
/// the decision is forced to 0 once the remaining budget is exhausted
/// (matched-budget comparisons).
std::unique_ptr<SwitchDecider> make_baseline_switcher(BaselineKind kind, double param = 0.5,
                                                      bool budget_gated = false);

/// Greedy decisions from a trained learner (no exploration, no rng use).
std::unique_ptr<SwitchDecider> make_learner_decider(const SwitcherLearner& learner);

// --- Rollouts -----------------------------------------------------------

struct EpisodeParams {
    double persistence_p = 0.0;
    double cost_c = 0.0;
    int budget_n = -1;  // -1: unbudgeted
    double penalty_np = 0.0;
    int horizon = 0;
};

/// Runs one episode under the composite control flow, appending to `log`
/// and, when given, to the replay buffer and cost ledger.
EpisodeSummary run_episode(Environment& env, const PolicyProvider& quick,
                           const PolicyProvider& deep, SwitchDecider& decider,
                           const EpisodeParams& params, int episode_index,
                           std::uint64_t episode_stream, TrainLog* log,
                           ReplayBuffer* buffer, CostLedger* ledger);

/// Unbudgeted training loop. The learner is trained in place; the log holds
/// every step of every episode.
TrainLog run_londi(Environment& env, const PolicyProvider& quick, const PolicyProvider& deep,
                   SwitcherLearner& learner, const TrainConfig& config);

/// Budget-constrained training loop; the learner conditions on
/// (state, remaining budget).
TrainLog run_londi_b(Environment& env, const PolicyProvider& quick, const PolicyProvider& deep,
                     SwitcherLearner& learner, const TrainConfig& config);

// --- Q-learning variant over base actions --------------------------------

struct BaseTransition {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
};

/// Single-entry update with the two-branch max target
///   Q(s,a) += alpha * ( r + gamma * max{ M Q(s',.), E_quick Q(s',.) } - Q(s,a) ),
/// whose fixed point is solve_switcher's q_star.
void switched_q_update(QFunction& q, const BaseTransition& t, const StationaryPolicy& pi_quick,
                       const StationaryPolicy& pi_deep, SwitchCost cost, double gamma,
                       double alpha);

}  // namespace londi
