#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "londi/mdp.hpp"

namespace londi {

// ---------------------------------------------------------------------------
// Desk-scale environments. Each exposes both a step/reset simulation
// interface and (size permitting) an exact TabularMDP export whose state ids
// coincide with the featurized observation ids, so the DP oracles and the
// simulated trajectories speak about the same states.
// ---------------------------------------------------------------------------

struct StepOutcome {
    int next_state = 0;
    double reward = 0.0;
    bool done = false;
};

class Environment {
public:
    virtual ~Environment() = default;

    virtual int reset() = 0;
    virtual StepOutcome step(int action) = 0;

    virtual int n_states() const = 0;
    virtual int n_actions() const = 0;
    virtual int horizon() const = 0;
    virtual double gamma() const = 0;
    virtual int start_state() const = 0;

    /// Location id used by heatmaps; -1 when the state carries none.
    virtual int location_of(int state) const = 0;
    virtual int n_locations() const = 0;

    /// Rough hops-to-goal signal for score-based baselines; -1 when the
    /// environment does not expose one.
    virtual int goal_distance(int state) const { (void)state; return -1; }

    /// Exact model when available, else nullptr (simulation still works).
    virtual const TabularMDP* exported_mdp() const = 0;

    virtual std::unique_ptr<Environment> clone() const = 0;
    virtual std::string name() const = 0;
};

/// Simulation wrapper around an explicit TabularMDP: locations are the state
/// ids themselves. Lets the trainer and CLI run on hand-written models.
class MdpEnvironment final : public Environment {
public:
    MdpEnvironment(TabularMDP mdp, int start_state, int horizon,
                   std::uint64_t transition_seed = 0x5eed);

    int reset() override;
    StepOutcome step(int action) override;

    int n_states() const override { return mdp_.n_states; }
    int n_actions() const override { return mdp_.n_actions; }
    int horizon() const override { return horizon_; }
    double gamma() const override { return mdp_.gamma; }
    int start_state() const override { return start_; }
    int location_of(int state) const override { return state; }
    int n_locations() const override { return mdp_.n_states; }
    const TabularMDP* exported_mdp() const override { return &mdp_; }
    std::unique_ptr<Environment> clone() const override {
        return std::make_unique<MdpEnvironment>(*this);
    }
    std::string name() const override { return "mdp"; }

private:
    TabularMDP mdp_;
    int start_ = 0;
    int horizon_ = 0;
    int current_ = 0;
    bool done_ = false;
    std::uint64_t transition_seed_;
    std::mt19937_64 rng_;
    long episodes_started_ = 0;
};

// --- RoomsWorld ---------------------------------------------------------
//
// Rooms connected through a single hallway. The agent starts in a room,
// must reach the hallway, pick the correct room, and work through an
// ordered sequence of subgoals (the milestone structure of lab-style
// tasks): the next subgoal pays out on entering its location, progress is
// a stage counter folded into the state, and the completing `work` action
// only fires in the goal room once every stage is done. Actions:
// enter_room_k (hallway only), to_hallway (rooms only), work (goal room
// only); anything invalid is a stay-in-place step.

struct RoomsWorldConfig {
    int n_rooms = 6;
    int goal_room = 4;
    int start_room = 0;
    /// Ordered (location, reward) milestones. Empty means the default
    /// single subgoal at the goal room with reward 0.5.
    std::vector<std::pair<int, double>> subgoal_rewards;
    double step_penalty = -0.05;
    double completion_reward = 1.0;
    double gamma = 0.95;
    int horizon = 40;
};

struct RoomsObservation {
    int location = 0;
    int stage = 0;  // subgoals collected so far
    bool done = false;
};

class RoomsFeaturizer {
public:
    RoomsFeaturizer(int n_locations, int n_subgoals)
        : n_locations_(n_locations), n_stages_(n_subgoals + 1) {}

    int encode(const RoomsObservation& obs) const;
    int id_count() const { return n_locations_ * n_stages_ + 1; }

private:
    int n_locations_;
    int n_stages_;
};

class RoomsWorld final : public Environment {
public:
    explicit RoomsWorld(const RoomsWorldConfig& config);

    int reset() override;
    StepOutcome step(int action) override;

    int n_states() const override { return featurizer_.id_count(); }
    int n_actions() const override { return config_.n_rooms + 2; }
    int horizon() const override { return config_.horizon; }
    double gamma() const override { return config_.gamma; }
    int start_state() const override { return start_state_; }
    int location_of(int state) const override;
    int n_locations() const override { return config_.n_rooms + 1; }
    int goal_distance(int state) const override;
    const TabularMDP* exported_mdp() const override { return &mdp_; }
    std::unique_ptr<Environment> clone() const override {
        return std::make_unique<RoomsWorld>(*this);
    }
    std::string name() const override { return "rooms"; }

    const RoomsWorldConfig& config() const { return config_; }
    const RoomsFeaturizer& featurizer() const { return featurizer_; }
    int hallway_location() const { return config_.n_rooms; }
    int action_to_hallway() const { return config_.n_rooms; }
    int action_work() const { return config_.n_rooms + 1; }

private:
    int state_id(int location, int stage) const;

    RoomsWorldConfig config_;
    RoomsFeaturizer featurizer_;
    TabularMDP mdp_;
    int start_state_ = 0;
    int current_ = 0;
    bool done_ = false;
};

std::unique_ptr<RoomsWorld> build_rooms_world(const RoomsWorldConfig& config);

// --- Grid task ------------------------------------------------------------
//
// BabyAI-style grid with keys, doors and a goal carrying a reward that
// diminishes with time (modelled as a per-step decay so returns stay Markov).
// Observations are the window of cells within the view radius plus the
// inventory; the featurizer interns window renders into dense ids. When the
// reachable state count fits the cap and no two states alias under the view
// radius, an exact TabularMDP export is built with ids matching the
// featurizer's.

struct GridTaskConfig {
    /// Rectangular ASCII map with a wall border: '#' wall, '.' floor,
    /// 'S' start, 'G' goal, 'a'/'b' keys, 'A'/'B' matching doors.
    std::vector<std::string> layout;
    int view_radius = 4;
    double goal_reward = 1.0;
    double decay = 0.01;
    double gamma = 0.98;
    int horizon = 100;
    int export_cap = 50000;
};

struct GridObservation {
    int view_radius = 0;
    std::string window;
    unsigned keys_mask = 0;
    bool done = false;
};

class GridFeaturizer {
public:
    explicit GridFeaturizer(int view_radius) : view_radius_(view_radius) {}

    /// Interns the observation, assigning the next dense id on first sight.
    int encode(const GridObservation& obs);
    int id_count() const { return next_id_; }

private:
    friend class GridTask;
    int view_radius_;
    int next_id_ = 0;
    std::map<std::string, int> ids_;
};

class GridTask final : public Environment {
public:
    explicit GridTask(const GridTaskConfig& config);

    int reset() override;
    StepOutcome step(int action) override;

    int n_states() const override;
    int n_actions() const override { return 6; }  // up down left right pickup toggle
    int horizon() const override { return config_.horizon; }
    double gamma() const override { return config_.gamma; }
    int start_state() const override { return 0; }
    int location_of(int state) const override;
    int n_locations() const override { return width_ * height_; }
    int goal_distance(int state) const override;
    const TabularMDP* exported_mdp() const override {
        return export_available_ ? &mdp_ : nullptr;
    }
    std::unique_ptr<Environment> clone() const override {
        return std::make_unique<GridTask>(*this);
    }
    std::string name() const override { return "grid"; }

    const GridTaskConfig& config() const { return config_; }
    bool export_available() const { return export_available_; }
    /// Human-readable reason when the export is unavailable.
    const std::string& export_failure() const { return export_failure_; }
    GridObservation observe() const;
    GridFeaturizer& featurizer() { return featurizer_; }

private:
    struct Cell {
        bool wall = false;
        int key = -1;   // key index on this cell
        int door = -1;  // door index on this cell
        bool goal = false;
    };
    struct GridState {
        int x = 0, y = 0;
        unsigned keys = 0, doors = 0;  // picked-up keys, opened doors
        bool operator<(const GridState& o) const;
    };

    GridState apply(const GridState& st, int action, double& reward, bool& done) const;
    GridObservation render(const GridState& st, bool done) const;
    void enumerate_and_export();

    GridTaskConfig config_;
    int width_ = 0, height_ = 0;
    std::vector<Cell> cells_;
    std::vector<std::pair<int, int>> key_pos_, door_pos_;
    int goal_x_ = 0, goal_y_ = 0;
    GridState start_;

    GridFeaturizer featurizer_;
    bool export_available_ = false;
    std::string export_failure_;
    TabularMDP mdp_;
    std::vector<GridState> id_to_state_;  // export enumeration order

    GridState current_;
    bool done_ = false;
    int current_id_ = 0;
};

std::unique_ptr<GridTask> build_grid_task(const GridTaskConfig& config);

/// Free-function forms of the featurizer contracts.
int encode_observation(const RoomsFeaturizer& featurizer, const RoomsObservation& obs);
int encode_observation(GridFeaturizer& featurizer, const GridObservation& obs);

}  // namespace londi
