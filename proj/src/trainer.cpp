#include "londi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace londi {

void TrainConfig::validate() const {
    if (episodes <= 0) throw ValidationError("train config: episodes must be positive");
    if (!(persistence_p >= 0.0 && persistence_p <= 1.0))
        throw ValidationError("train config: persistence_p outside [0,1]");
    if (cost_c < 0.0) throw ValidationError("train config: cost must be >= 0");
    if (penalty_np < 0.0) throw ValidationError("train config: penalty must be >= 0");
    if (buffer_capacity <= 0 || batch_size <= 0 || epochs_per_update <= 0 ||
        batches_per_epoch <= 0)
        throw ValidationError("train config: buffer/batch settings must be positive");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
        throw ValidationError("train config: learning rate outside (0,1]");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 &&
          epsilon_end <= 1.0))
        throw ValidationError("train config: epsilon bounds outside [0,1]");
    if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0))
        throw ValidationError("train config: epsilon decay fraction outside (0,1]");
    if (softmax_temperature < 0.0)
        throw ValidationError("train config: softmax temperature must be >= 0");
}

// --- TrainLog -------------------------------------------------------------

namespace {

std::string int_or_na(int v, int na_sentinel) {
    return v == na_sentinel ? std::string("NA") : std::to_string(v);
}

}  // namespace

std::string TrainLog::to_text() const {
    std::ostringstream out;
    out << "# londi-trainlog v1\n";
    out << "# episode step state m persist consulted g tier reward cost remaining"
           " location env_reward\n";
    for (const StepRecord& r : steps) {
        out << r.episode << " " << r.step << " " << r.state << " " << r.m << " "
            << int_or_na(r.persist, -1) << " " << (r.consulted ? 1 : 0) << " " << r.g << " "
            << (r.tier == Tier::quick ? "quick" : "deep") << " " << format_double(r.reward)
            << " " << format_double(r.cost) << " "
            << int_or_na(r.remaining, StepRecord::kNoBudget) << " " << r.location << " "
            << format_double(r.env_reward) << "\n";
    }
    return out.str();
}

void TrainLog::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << to_text();
    if (!f) throw IoError("write failed: " + path);
}

TrainLog parse_train_log(const std::string& text) {
    TrainLog log;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        StepRecord r;
        std::string persist, remaining, tier;
        int consulted = 0;
        if (!(ls >> r.episode >> r.step >> r.state >> r.m >> persist >> consulted >> r.g >>
              tier >> r.reward >> r.cost >> remaining >> r.location >> r.env_reward))
            throw ValidationError("train log line " + std::to_string(lineno) + ": malformed");
        r.persist = persist == "NA" ? -1 : std::stoi(persist);
        r.consulted = consulted != 0;
        if (tier == "quick")
            r.tier = Tier::quick;
        else if (tier == "deep")
            r.tier = Tier::deep;
        else
            throw ValidationError("train log line " + std::to_string(lineno) + ": bad tier");
        r.remaining = remaining == "NA" ? StepRecord::kNoBudget : std::stoi(remaining);
        log.steps.push_back(r);
    }
    return log;
}

TrainLog load_train_log(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_train_log(ss.str());
}

void validate_trace(const TrainLog& log, double cost_c, double penalty_np) {
    for (const StepRecord& r : log.steps) {
        const bool persisted = (r.m > 0 && r.persist == 1);
        if (persisted == r.consulted)
            throw ValidationError("trace: consulted flag conflicts with persistence at episode " +
                                  std::to_string(r.episode) + " step " + std::to_string(r.step));
        const bool deep_expected = persisted || (r.consulted && r.g == 1);
        if ((r.tier == Tier::deep) != deep_expected)
            throw ValidationError("trace: regime law violated at episode " +
                                  std::to_string(r.episode) + " step " + std::to_string(r.step));
        double expected = r.env_reward;
        if (r.consulted && r.g == 1) expected -= cost_c;
        if (r.remaining != StepRecord::kNoBudget && r.remaining < 0) expected -= penalty_np;
        if (std::abs(expected - r.reward) > 1e-9)
            throw ValidationError("trace: stored reward does not match adjustments at episode " +
                                  std::to_string(r.episode) + " step " + std::to_string(r.step));
    }
}

// --- Learner --------------------------------------------------------------

SwitcherLearner::SwitcherLearner(int n_states, int budget_n, double q_init)
    : n_states_(n_states), budget_n_(budget_n), levels_(budget_n >= 0 ? budget_n + 2 : 1) {
    if (n_states <= 0) throw ValidationError("learner: n_states must be positive");
    q_.assign(static_cast<std::size_t>(n_states_) * levels_ * 2, q_init);
    visits_.assign(q_.size(), 0);
}

int SwitcherLearner::level(int remaining) const {
    if (!budgeted()) return 0;
    int k = std::clamp(remaining, -1, budget_n_);
    return k + 1;
}

double SwitcherLearner::q(int state, int remaining, int g) const {
    return q_[(static_cast<std::size_t>(state) * levels_ + level(remaining)) * 2 + g];
}

double& SwitcherLearner::q_ref(int state, int remaining, int g) {
    return q_[(static_cast<std::size_t>(state) * levels_ + level(remaining)) * 2 + g];
}

int SwitcherLearner::greedy(int state, int remaining) const {
    return q(state, remaining, 1) > q(state, remaining, 0) ? 1 : 0;
}

void SwitcherLearner::td_update(int state, int remaining, int g, double reward, int next_state,
                                int next_remaining, double gamma, double alpha) {
    double target = reward +
                    gamma * std::max(q(next_state, next_remaining, 0),
                                     q(next_state, next_remaining, 1));
    double& entry = q_ref(state, remaining, g);
    entry += alpha * (target - entry);
}

double SwitcherLearner::robbins_monro_alpha(int state, int remaining, int g) {
    long& n = visits_[(static_cast<std::size_t>(state) * levels_ + level(remaining)) * 2 + g];
    ++n;
    return std::pow(1.0 + static_cast<double>(n), -0.7);
}

SwitchPolicy greedy_switch_policy(const SwitcherLearner& learner, int remaining) {
    SwitchPolicy g;
    g.decisions.resize(static_cast<std::size_t>(learner.n_states()));
    for (int s = 0; s < learner.n_states(); ++s)
        g.decisions[static_cast<std::size_t>(s)] =
            static_cast<std::uint8_t>(learner.greedy(s, remaining));
    return g;
}

// --- Replay buffer ----------------------------------------------------------

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity <= 0) throw ValidationError("replay buffer: capacity must be positive");
    data_.reserve(static_cast<std::size_t>(capacity));
}

void ReplayBuffer::push(const ReplayTransition& t) {
    if (static_cast<int>(data_.size()) < capacity_) {
        data_.push_back(t);
    } else {
        data_[next_] = t;  // FIFO eviction
        next_ = (next_ + 1) % static_cast<std::size_t>(capacity_);
    }
}

const ReplayTransition& ReplayBuffer::sample(std::mt19937_64& rng) const {
    if (data_.empty()) throw ValidationError("replay buffer: sample from empty buffer");
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    return data_[pick(rng)];
}

// --- Deciders ---------------------------------------------------------------

namespace {

class AlwaysDecider final : public SwitchDecider {
public:
    explicit AlwaysDecider(int decision) : decision_(decision) {}
    int decide(int, int remaining, const DecideContext& ctx, std::mt19937_64&) override {
        if (decision_ == 1 && ctx.budgeted && remaining <= 0) return 0;
        return decision_;
    }
    std::unique_ptr<SwitchDecider> clone() const override {
        return std::make_unique<AlwaysDecider>(*this);
    }

private:
    int decision_;
};

class ProbabilisticDecider final : public SwitchDecider {
public:
    ProbabilisticDecider(double p, bool gated) : p_(p), gated_(gated) {
        if (!(p >= 0.0 && p <= 1.0))
            throw ValidationError("probabilistic baseline: p outside [0,1]");
    }
    int decide(int, int remaining, const DecideContext& ctx, std::mt19937_64& rng) override {
        if (gated_ && ctx.budgeted && remaining <= 0) return 0;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        return unif(rng) < p_ ? 1 : 0;
    }
    std::unique_ptr<SwitchDecider> clone() const override {
        return std::make_unique<ProbabilisticDecider>(*this);
    }

private:
    double p_;
    bool gated_;
};

class CascadeDecider final : public SwitchDecider {
public:
    CascadeDecider(double threshold, bool gated) : threshold_(threshold), gated_(gated) {
        if (!std::isfinite(threshold)) throw ValidationError("cascade: threshold must be finite");
    }
    int decide(int state, int remaining, const DecideContext& ctx, std::mt19937_64&) override {
        if (gated_ && ctx.budgeted && remaining <= 0) return 0;
        double score = 0.0;
        if (ctx.recent_env_rewards != nullptr && !ctx.recent_env_rewards->empty()) {
            double sum = std::accumulate(ctx.recent_env_rewards->begin(),
                                         ctx.recent_env_rewards->end(), 0.0);
            score += sum / static_cast<double>(ctx.recent_env_rewards->size());
        }
        if (ctx.env != nullptr) {
            int dist = ctx.env->goal_distance(state);
            if (dist >= 0) score += -kDistanceWeight * dist;
        }
        return score < threshold_ ? 1 : 0;
    }
    std::unique_ptr<SwitchDecider> clone() const override {
        return std::make_unique<CascadeDecider>(*this);
    }

    static constexpr double kDistanceWeight = 0.1;

private:
    double threshold_;
    bool gated_;
};

class LearnerGreedyDecider final : public SwitchDecider {
public:
    explicit LearnerGreedyDecider(const SwitcherLearner& learner) : learner_(&learner) {}
    int decide(int state, int remaining, const DecideContext&, std::mt19937_64&) override {
        return learner_->greedy(state, remaining);
    }
    std::unique_ptr<SwitchDecider> clone() const override {
        return std::make_unique<LearnerGreedyDecider>(*this);
    }

private:
    const SwitcherLearner* learner_;
};

// Exploration wrapper used by the training loops: eps-greedy by default,
// Boltzmann when a temperature is configured. Visit balancing makes the
// exploration branch sample whichever decision it has tried less at this
// (state, remaining) pair.
class ExploringDecider final : public SwitchDecider {
public:
    ExploringDecider(const SwitcherLearner& learner, double temperature, bool visit_balanced)
        : learner_(&learner), temperature_(temperature), visit_balanced_(visit_balanced) {
        if (visit_balanced_) {
            const int levels = learner.budgeted() ? learner.budget_n() + 2 : 1;
            tries_.assign(static_cast<std::size_t>(learner.n_states()) * levels * 2, 0);
        }
    }

    void set_epsilon(double eps) { epsilon_ = eps; }

    int decide(int state, int remaining, const DecideContext&, std::mt19937_64& rng) override {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        if (temperature_ > 0.0) {
            double q0 = learner_->q(state, remaining, 0) / temperature_;
            double q1 = learner_->q(state, remaining, 1) / temperature_;
            double hi = std::max(q0, q1);
            double w1 = std::exp(q1 - hi);
            double z = std::exp(q0 - hi) + w1;
            return unif(rng) < w1 / z ? 1 : 0;
        }
        double u = unif(rng);
        int g;
        if (u < epsilon_) {
            if (visit_balanced_) {
                long t0 = tries_[entry(state, remaining, 0)];
                long t1 = tries_[entry(state, remaining, 1)];
                g = t0 == t1 ? (unif(rng) < 0.5 ? 1 : 0) : (t1 < t0 ? 1 : 0);
            } else {
                g = unif(rng) < 0.5 ? 1 : 0;
            }
        } else {
            g = learner_->greedy(state, remaining);
        }
        if (visit_balanced_) tries_[entry(state, remaining, g)] += 1;
        return g;
    }
    std::unique_ptr<SwitchDecider> clone() const override {
        return std::make_unique<ExploringDecider>(*this);
    }

private:
    std::size_t entry(int state, int remaining, int g) const {
        int level = 0;
        if (learner_->budgeted())
            level = std::clamp(remaining, -1, learner_->budget_n()) + 1;
        const int levels = learner_->budgeted() ? learner_->budget_n() + 2 : 1;
        return (static_cast<std::size_t>(state) * levels + level) * 2 + g;
    }

    const SwitcherLearner* learner_;
    double temperature_;
    bool visit_balanced_;
    double epsilon_ = 0.0;
    std::vector<long> tries_;
};

}  // namespace

std::unique_ptr<SwitchDecider> make_baseline_switcher(BaselineKind kind, double param,
                                                      bool budget_gated) {
    switch (kind) {
        case BaselineKind::always_quick: return std::make_unique<AlwaysDecider>(0);
        case BaselineKind::always_deep: return std::make_unique<AlwaysDecider>(1);
        case BaselineKind::probabilistic:
            return std::make_unique<ProbabilisticDecider>(param, budget_gated);
        case BaselineKind::cascade:
            return std::make_unique<CascadeDecider>(param, budget_gated);
    }
    throw ValidationError("make_baseline_switcher: unknown kind");
}

std::unique_ptr<SwitchDecider> make_learner_decider(const SwitcherLearner& learner) {
    return std::make_unique<LearnerGreedyDecider>(learner);
}

// --- Episode rollout --------------------------------------------------------

EpisodeSummary run_episode(Environment& env, const PolicyProvider& quick,
                           const PolicyProvider& deep, SwitchDecider& decider,
                           const EpisodeParams& params, int episode_index,
                           std::uint64_t episode_stream, TrainLog* log,
                           ReplayBuffer* buffer, CostLedger* ledger) {
    const bool budgeted = params.budget_n >= 0;
    const int horizon = params.horizon > 0 ? params.horizon : env.horizon();

    std::mt19937_64 decision_rng(derive_stream(episode_stream, 1));
    std::mt19937_64 action_rng(derive_stream(episode_stream, 2));
    std::mt19937_64 persistence_rng(derive_stream(episode_stream, 3));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::deque<double> recent_rewards;
    DecideContext ctx{budgeted, &env, &recent_rewards};

    EpisodeSummary summary;
    summary.episode = episode_index;

    int state = env.reset();
    int m = 0;
    int remaining = budgeted ? params.budget_n : 0;

    for (int t = 0; t < horizon; ++t) {
        const int g = decider.decide(state, remaining, ctx, decision_rng);

        bool consulted;
        int persist = -1;
        Tier tier;
        const int m_pre = m;
        if (m > 0) {
            persist = unif(persistence_rng) < params.persistence_p ? 1 : 0;
            if (persist == 1) {
                consulted = false;
                tier = Tier::deep;
            } else {
                consulted = true;
                if (g == 1) {
                    tier = Tier::deep;
                } else {
                    tier = Tier::quick;
                    m = 0;
                }
            }
        } else {
            consulted = true;
            if (g == 1) {
                tier = Tier::deep;
                m += 1;
            } else {
                tier = Tier::quick;
            }
        }

        const PolicyProvider& provider = (tier == Tier::deep) ? deep : quick;
        const int action = provider.act(state, action_rng);
        StepOutcome outcome = env.step(action);

        const bool activation = consulted && g == 1;
        const int pre_remaining = remaining;
        double reward = outcome.reward;
        if (activation) {
            reward -= params.cost_c;
            if (budgeted) remaining = std::max(remaining - 1, -1);
        }
        if (budgeted && remaining < 0) reward -= params.penalty_np;

        if (ledger != nullptr) record_call(*ledger, provider, t);
        summary.cost_total += provider.call_cost;
        summary.env_return += outcome.reward;
        summary.adjusted_return += reward;
        summary.steps += 1;
        if (activation) summary.consulted_activations += 1;
        if (tier == Tier::deep) summary.deep_steps += 1;

        if (log != nullptr) {
            StepRecord rec;
            rec.episode = episode_index;
            rec.step = t;
            rec.state = state;
            rec.m = m_pre;
            rec.persist = persist;
            rec.consulted = consulted;
            rec.g = g;
            rec.tier = tier;
            rec.reward = reward;
            rec.cost = provider.call_cost;
            rec.remaining = budgeted ? remaining : StepRecord::kNoBudget;
            rec.location = env.location_of(state);
            rec.env_reward = outcome.reward;
            log->steps.push_back(rec);
        }
        if (buffer != nullptr) {
            ReplayTransition tr;
            tr.state = state;
            tr.g = g;
            tr.reward = reward;
            tr.next_state = outcome.next_state;
            tr.remaining = budgeted ? pre_remaining : 0;
            tr.consulted = consulted;
            buffer->push(tr);
        }

        recent_rewards.push_back(outcome.reward);
        if (recent_rewards.size() > 5) recent_rewards.pop_front();

        state = outcome.next_state;
        if (outcome.done) {
            summary.success = true;
            break;
        }
    }

    if (log != nullptr) log->episodes.push_back(summary);
    return summary;
}

// --- Training loops ---------------------------------------------------------

namespace {

TrainLog run_training(Environment& env, const PolicyProvider& quick, const PolicyProvider& deep,
                      SwitcherLearner& learner, const TrainConfig& config, bool budgeted) {
    config.validate();
    if (env.exported_mdp() == nullptr)
        throw ValidationError("training requires an environment with an exact export");
    if (learner.n_states() != env.n_states())
        throw ValidationError("training: learner state count does not match environment");
    if (quick.policy.n_states != env.n_states() || deep.policy.n_states != env.n_states())
        throw ValidationError("training: provider state count does not match environment");
    if (budgeted && learner.budget_n() != config.budget_n)
        throw ValidationError("training: learner budget does not match config");
    if (!budgeted && learner.budgeted())
        throw ValidationError("training: budgeted learner passed to unbudgeted run");

    const double gamma = env.gamma();
    EpisodeParams params;
    params.persistence_p = config.persistence_p;
    params.cost_c = config.cost_c;
    params.budget_n = budgeted ? config.budget_n : -1;
    params.penalty_np = config.penalty_np;
    params.horizon = config.horizon;

    ExploringDecider decider(learner, config.softmax_temperature,
                             config.visit_balanced_exploration);
    ReplayBuffer buffer(config.buffer_capacity);
    TrainLog log;

    const int decay_span =
        std::max(1, static_cast<int>(config.episodes * config.epsilon_decay_fraction));
    for (int ep = 0; ep < config.episodes; ++ep) {
        double frac = std::min(1.0, static_cast<double>(ep) / decay_span);
        decider.set_epsilon(config.epsilon_start +
                            frac * (config.epsilon_end - config.epsilon_start));

        const std::uint64_t ep_stream = derive_stream(config.seed, 0xE01D, ep);
        run_episode(env, quick, deep, decider, params, ep, ep_stream, &log, &buffer, nullptr);

        std::mt19937_64 update_rng(derive_stream(config.seed, 0x0DD5, ep));
        for (int epoch = 0; epoch < config.epochs_per_update; ++epoch) {
            for (int b = 0; b < config.batches_per_epoch; ++b) {
                for (int i = 0; i < config.batch_size; ++i) {
                    if (buffer.size() == 0) break;
                    const ReplayTransition& t = buffer.sample(update_rng);
                    int next_remaining = t.remaining;
                    if (budgeted && t.consulted && t.g == 1)
                        next_remaining = std::max(t.remaining - 1, -1);
                    double alpha = config.robbins_monro
                                       ? learner.robbins_monro_alpha(t.state, t.remaining, t.g)
                                       : config.learning_rate;
                    learner.td_update(t.state, t.remaining, t.g, t.reward, t.next_state,
                                      next_remaining, gamma, alpha);
                }
            }
        }
    }
    // Regime law holds on every run, not just in tests.
    validate_trace(log, config.cost_c, budgeted ? config.penalty_np : 0.0);
    return log;
}

}  // namespace

TrainLog run_londi(Environment& env, const PolicyProvider& quick, const PolicyProvider& deep,
                   SwitcherLearner& learner, const TrainConfig& config) {
    if (config.budget_n >= 0)
        throw ValidationError("run_londi: budget set; use run_londi_b");
    return run_training(env, quick, deep, learner, config, false);
}

TrainLog run_londi_b(Environment& env, const PolicyProvider& quick, const PolicyProvider& deep,
                     SwitcherLearner& learner, const TrainConfig& config) {
    if (config.budget_n < 0)
        throw ValidationError("run_londi_b: config.budget_n must be >= 0");
    return run_training(env, quick, deep, learner, config, true);
}

// --- Q-learning variant -------------------------------------------------

void switched_q_update(QFunction& q, const BaseTransition& t, const StationaryPolicy& pi_quick,
                       const StationaryPolicy& pi_deep, SwitchCost cost, double gamma,
                       double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw ValidationError("switched_q_update: alpha outside (0,1]");
    double deep_branch = intervention_value(q, t.next_state, pi_deep, cost);
    double quick_branch = 0.0;
    for (int a = 0; a < q.n_actions; ++a)
        quick_branch += pi_quick(t.next_state, a) * q(t.next_state, a);
    double target = t.reward + gamma * std::max(deep_branch, quick_branch);
    double& entry = q(t.state, t.action);
    entry += alpha * (target - entry);
}

}  // namespace londi
