#include "londi/envs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace londi {

// --- MdpEnvironment -------------------------------------------------------

MdpEnvironment::MdpEnvironment(TabularMDP mdp, int start_state, int horizon,
                               std::uint64_t transition_seed)
    : mdp_(std::move(mdp)), start_(start_state), horizon_(horizon),
      transition_seed_(transition_seed), rng_(transition_seed) {
    mdp_.validate();
    if (start_ < 0 || start_ >= mdp_.n_states)
        throw ValidationError("mdp env: start state out of range");
    if (horizon_ <= 0) throw ValidationError("mdp env: horizon must be positive");
    current_ = start_;
}

int MdpEnvironment::reset() {
    current_ = start_;
    done_ = false;
    // Per-episode transition stream so trajectories depend only on the
    // episode order, not on how long earlier episodes ran.
    rng_.seed(derive_stream(transition_seed_, static_cast<std::uint64_t>(episodes_started_++)));
    return current_;
}

StepOutcome MdpEnvironment::step(int action) {
    if (done_) throw ValidationError("mdp env: step after terminal state");
    if (action < 0 || action >= mdp_.n_actions)
        throw ValidationError("mdp env: bad action id");
    StepOutcome out;
    out.reward = mdp_.r(current_, action);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng_), acc = 0.0;
    int s2 = 0;
    for (s2 = 0; s2 < mdp_.n_states; ++s2) {
        acc += mdp_.p(current_, action, s2);
        if (u < acc) break;
    }
    if (s2 == mdp_.n_states) {
        for (s2 = mdp_.n_states - 1; s2 > 0; --s2)
            if (mdp_.p(current_, action, s2) > 0.0) break;
    }
    out.next_state = s2;
    out.done = mdp_.is_terminal(s2);
    current_ = s2;
    done_ = out.done;
    return out;
}

// --- RoomsWorld ---------------------------------------------------------

int RoomsFeaturizer::encode(const RoomsObservation& obs) const {
    if (obs.done) return n_locations_ * n_stages_;
    if (obs.location < 0 || obs.location >= n_locations_)
        throw ValidationError("rooms featurizer: location out of range");
    if (obs.stage < 0 || obs.stage >= n_stages_)
        throw ValidationError("rooms featurizer: stage out of range");
    return obs.stage * n_locations_ + obs.location;
}

namespace {

void validate_rooms_config(const RoomsWorldConfig& c) {
    if (c.n_rooms < 2) throw ValidationError("rooms: n_rooms must be >= 2");
    if (c.goal_room < 0 || c.goal_room >= c.n_rooms)
        throw ValidationError("rooms: goal_room out of range");
    if (c.start_room < 0 || c.start_room >= c.n_rooms)
        throw ValidationError("rooms: start_room out of range");
    if (c.start_room == c.goal_room)
        throw ValidationError("rooms: start_room must differ from goal_room");
    if (c.horizon < c.n_rooms + 2)
        throw ValidationError("rooms: horizon must be >= n_rooms + 2");
    if (!(c.gamma >= 0.0 && c.gamma < 1.0)) throw ValidationError("rooms: gamma outside [0,1)");
    if (c.subgoal_rewards.size() > 4)
        throw ValidationError("rooms: at most 4 subgoals supported");
    for (auto& [loc, reward] : c.subgoal_rewards) {
        if (loc < 0 || loc > c.n_rooms) throw ValidationError("rooms: subgoal location invalid");
        if (loc == c.start_room)
            throw ValidationError("rooms: subgoal at the start room is never collectable");
        (void)reward;
    }
}

}  // namespace

RoomsWorld::RoomsWorld(const RoomsWorldConfig& config)
    : config_(config), featurizer_(1, 1), mdp_() {
    if (config_.subgoal_rewards.empty())
        config_.subgoal_rewards = {{config_.goal_room, 0.5}};
    validate_rooms_config(config_);

    const int L = config_.n_rooms + 1;  // rooms + hallway
    const int K = static_cast<int>(config_.subgoal_rewards.size());
    featurizer_ = RoomsFeaturizer(L, K);

    const int n_states = featurizer_.id_count();
    const int n_acts = config_.n_rooms + 2;
    const int terminal = n_states - 1;
    mdp_ = TabularMDP(n_states, n_acts, config_.gamma);

    const int hallway = config_.n_rooms;
    for (int stage = 0; stage <= K; ++stage) {
        for (int loc = 0; loc < L; ++loc) {
            const int s = state_id(loc, stage);
            for (int a = 0; a < n_acts; ++a) {
                int next_loc = loc;
                double reward = config_.step_penalty;
                bool to_terminal = false;
                if (a < config_.n_rooms && loc == hallway) {
                    next_loc = a;  // enter room a
                } else if (a == action_to_hallway() && loc != hallway) {
                    next_loc = hallway;
                } else if (a == action_work() && loc == config_.goal_room && stage == K) {
                    // Completing the task needs every milestone done first.
                    reward += config_.completion_reward;
                    to_terminal = true;
                }
                int next_stage = stage;
                if (!to_terminal && next_loc != loc && stage < K &&
                    next_loc == config_.subgoal_rewards[static_cast<std::size_t>(stage)].first) {
                    next_stage = stage + 1;
                    reward += config_.subgoal_rewards[static_cast<std::size_t>(stage)].second;
                }
                const int s2 = to_terminal ? terminal : state_id(next_loc, next_stage);
                mdp_.p(s, a, s2) = 1.0;
                mdp_.r(s, a) = reward;
            }
        }
    }
    mdp_.make_terminal(terminal);
    mdp_.validate();

    start_state_ = state_id(config_.start_room, 0);
    current_ = start_state_;
}

int RoomsWorld::state_id(int location, int stage) const {
    return stage * (config_.n_rooms + 1) + location;
}

int RoomsWorld::reset() {
    current_ = start_state_;
    done_ = false;
    return current_;
}

StepOutcome RoomsWorld::step(int action) {
    if (done_) throw ValidationError("rooms: step after terminal state");
    if (action < 0 || action >= n_actions()) throw ValidationError("rooms: bad action id");
    StepOutcome out;
    out.reward = mdp_.r(current_, action);
    for (int s2 = 0; s2 < mdp_.n_states; ++s2) {
        if (mdp_.p(current_, action, s2) == 1.0) {
            out.next_state = s2;
            break;
        }
    }
    out.done = mdp_.is_terminal(out.next_state);
    current_ = out.next_state;
    done_ = out.done;
    return out;
}

int RoomsWorld::location_of(int state) const {
    if (state == mdp_.n_states - 1) return -1;  // terminal carries no location
    return state % (config_.n_rooms + 1);
}

int RoomsWorld::goal_distance(int state) const {
    if (state == mdp_.n_states - 1) return 0;
    int loc = location_of(state);
    if (loc == config_.goal_room) return 1;   // work
    if (loc == hallway_location()) return 2;  // enter + work
    return 3;                                 // to hallway + enter + work
}

std::unique_ptr<RoomsWorld> build_rooms_world(const RoomsWorldConfig& config) {
    return std::make_unique<RoomsWorld>(config);
}

// --- Grid task ------------------------------------------------------------

bool GridTask::GridState::operator<(const GridState& o) const {
    if (x != o.x) return x < o.x;
    if (y != o.y) return y < o.y;
    if (keys != o.keys) return keys < o.keys;
    return doors < o.doors;
}

int GridFeaturizer::encode(const GridObservation& obs) {
    if (obs.view_radius != view_radius_)
        throw ValidationError("grid featurizer: view radius mismatch");
    const std::size_t side = 2 * static_cast<std::size_t>(view_radius_) + 1;
    if (!obs.done && obs.window.size() != side * side)
        throw ValidationError("grid featurizer: window size does not match radius");
    std::string tag = obs.done ? std::string("<done>")
                               : obs.window + "|" + std::to_string(obs.keys_mask);
    auto [it, inserted] = ids_.emplace(tag, next_id_);
    if (inserted) ++next_id_;
    return it->second;
}

GridTask::GridTask(const GridTaskConfig& config) : config_(config), featurizer_(config.view_radius) {
    if (config_.layout.size() < 3) throw ValidationError("grid: layout too small");
    if (config_.view_radius < 1) throw ValidationError("grid: view radius must be >= 1");
    if (!(config_.gamma >= 0.0 && config_.gamma < 1.0))
        throw ValidationError("grid: gamma outside [0,1)");
    height_ = static_cast<int>(config_.layout.size());
    width_ = static_cast<int>(config_.layout[0].size());
    cells_.assign(static_cast<std::size_t>(width_) * height_, Cell{});
    key_pos_.clear();
    door_pos_.clear();
    bool have_start = false, have_goal = false;
    unsigned keys_present = 0, doors_present = 0;
    for (int y = 0; y < height_; ++y) {
        const std::string& row = config_.layout[static_cast<std::size_t>(y)];
        if (static_cast<int>(row.size()) != width_)
            throw ValidationError("grid: layout is not rectangular");
        for (int x = 0; x < width_; ++x) {
            Cell& cell = cells_[static_cast<std::size_t>(y) * width_ + x];
            char ch = row[static_cast<std::size_t>(x)];
            bool border = (x == 0 || y == 0 || x == width_ - 1 || y == height_ - 1);
            switch (ch) {
                case '#': cell.wall = true; break;
                case '.': break;
                case 'S':
                    start_.x = x;
                    start_.y = y;
                    have_start = true;
                    break;
                case 'G':
                    cell.goal = true;
                    goal_x_ = x;
                    goal_y_ = y;
                    have_goal = true;
                    break;
                case 'a':
                case 'b': {
                    int i = ch - 'a';
                    cell.key = i;
                    keys_present |= (1u << i);
                    key_pos_.emplace_back(x, y);
                    break;
                }
                case 'A':
                case 'B': {
                    int i = ch - 'A';
                    cell.door = i;
                    doors_present |= (1u << i);
                    door_pos_.emplace_back(x, y);
                    break;
                }
                default:
                    throw ValidationError(std::string("grid: unknown layout char '") + ch + "'");
            }
            if (border && !cell.wall)
                throw ValidationError("grid: layout border must be walls");
        }
    }
    if (!have_start || !have_goal) throw ValidationError("grid: layout needs 'S' and 'G'");
    if ((doors_present & ~keys_present) != 0)
        throw ValidationError("grid: door without a matching key");

    enumerate_and_export();
    current_ = start_;
    current_id_ = export_available_ ? 0 : featurizer_.encode(render(start_, false));
}

GridTask::GridState GridTask::apply(const GridState& st, int action, double& reward,
                                    bool& done) const {
    static const int dx[4] = {0, 0, -1, 1};
    static const int dy[4] = {-1, 1, 0, 0};
    GridState next = st;
    reward = -config_.decay;
    done = false;
    if (action >= 0 && action < 4) {
        int nx = st.x + dx[action], ny = st.y + dy[action];
        const Cell& cell = cells_[static_cast<std::size_t>(ny) * width_ + nx];
        bool blocked = cell.wall || (cell.door >= 0 && !(st.doors & (1u << cell.door)));
        if (!blocked) {
            next.x = nx;
            next.y = ny;
            if (cell.goal) {
                reward += config_.goal_reward;
                done = true;
            }
        }
    } else if (action == 4) {  // pickup
        const Cell& cell = cells_[static_cast<std::size_t>(st.y) * width_ + st.x];
        if (cell.key >= 0) next.keys |= (1u << cell.key);
    } else if (action == 5) {  // toggle an adjacent closed door with its key
        for (int d = 0; d < 4; ++d) {
            int nx = st.x + dx[d], ny = st.y + dy[d];
            const Cell& cell = cells_[static_cast<std::size_t>(ny) * width_ + nx];
            if (cell.door >= 0 && !(st.doors & (1u << cell.door)) &&
                (st.keys & (1u << cell.door))) {
                next.doors |= (1u << cell.door);
                break;
            }
        }
    } else {
        throw ValidationError("grid: bad action id");
    }
    return next;
}

GridObservation GridTask::render(const GridState& st, bool done) const {
    GridObservation obs;
    obs.view_radius = config_.view_radius;
    obs.keys_mask = st.keys;
    obs.done = done;
    if (done) return obs;
    const int r = config_.view_radius;
    std::string window;
    window.reserve(static_cast<std::size_t>(2 * r + 1) * (2 * r + 1));
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            int x = st.x + dx, y = st.y + dy;
            if (x < 0 || y < 0 || x >= width_ || y >= height_) {
                window.push_back('#');
                continue;
            }
            const Cell& cell = cells_[static_cast<std::size_t>(y) * width_ + x];
            char ch = '.';
            if (cell.wall) ch = '#';
            else if (cell.goal) ch = 'G';
            else if (cell.key >= 0 && !(st.keys & (1u << cell.key)))
                ch = static_cast<char>('a' + cell.key);
            else if (cell.door >= 0)
                ch = (st.doors & (1u << cell.door)) ? '/' : static_cast<char>('A' + cell.door);
            window.push_back(ch);
        }
    }
    obs.window = std::move(window);
    return obs;
}

void GridTask::enumerate_and_export() {
    // BFS over reachable underlying states. The export carries ids in BFS
    // order and the featurizer interns each state's observation in the same
    // order, so simulation ids and export indices coincide. Aliasing between
    // two distinct states under the view radius makes the exact export
    // impossible; simulation still works with interned (aliased) ids.
    std::map<GridState, int> index;
    std::deque<GridState> queue;
    index.emplace(start_, 0);
    queue.push_back(start_);
    id_to_state_.clear();
    id_to_state_.push_back(start_);
    bool truncated = false;
    while (!queue.empty()) {
        GridState st = queue.front();
        queue.pop_front();
        for (int a = 0; a < 6; ++a) {
            double reward;
            bool done;
            GridState next = apply(st, a, reward, done);
            if (done) continue;  // terminal handled as one absorbing state
            if (index.emplace(next, static_cast<int>(id_to_state_.size())).second) {
                id_to_state_.push_back(next);
                queue.push_back(next);
                if (static_cast<int>(id_to_state_.size()) + 1 > config_.export_cap) {
                    truncated = true;
                    break;
                }
            }
        }
        if (truncated) break;
    }
    if (truncated) {
        export_available_ = false;
        export_failure_ = "reachable state count exceeds export cap " +
                          std::to_string(config_.export_cap);
        id_to_state_.clear();
        return;
    }

    // Intern observations in enumeration order; detect aliasing.
    for (std::size_t i = 0; i < id_to_state_.size(); ++i) {
        int id = featurizer_.encode(render(id_to_state_[i], false));
        if (id != static_cast<int>(i)) {
            export_available_ = false;
            export_failure_ = "two reachable states share one observation under view radius " +
                              std::to_string(config_.view_radius);
            id_to_state_.clear();
            return;
        }
    }
    const int terminal = static_cast<int>(id_to_state_.size());
    GridObservation done_obs;
    done_obs.view_radius = config_.view_radius;
    done_obs.done = true;
    featurizer_.encode(done_obs);

    mdp_ = TabularMDP(terminal + 1, 6, config_.gamma);
    for (int s = 0; s < terminal; ++s) {
        for (int a = 0; a < 6; ++a) {
            double reward;
            bool done;
            GridState next = apply(id_to_state_[static_cast<std::size_t>(s)], a, reward, done);
            int s2 = done ? terminal : index.at(next);
            mdp_.p(s, a, s2) = 1.0;
            mdp_.r(s, a) = reward;
        }
    }
    mdp_.make_terminal(terminal);
    mdp_.validate();
    export_available_ = true;
}

int GridTask::n_states() const {
    return export_available_ ? mdp_.n_states : featurizer_.id_count();
}

int GridTask::reset() {
    current_ = start_;
    done_ = false;
    current_id_ = export_available_ ? 0 : featurizer_.encode(render(start_, false));
    return current_id_;
}

StepOutcome GridTask::step(int action) {
    if (done_) throw ValidationError("grid: step after terminal state");
    StepOutcome out;
    double reward;
    bool done;
    GridState next = apply(current_, action, reward, done);
    out.reward = reward;
    out.done = done;
    current_ = next;
    done_ = done;
    GridObservation obs = render(next, done);
    if (export_available_) {
        if (done) {
            out.next_state = mdp_.n_states - 1;
        } else {
            // Enumeration covered every reachable state, so the intern lookup
            // is a pure read here.
            out.next_state = featurizer_.encode(obs);
        }
    } else {
        out.next_state = featurizer_.encode(obs);
    }
    current_id_ = out.next_state;
    return out;
}

int GridTask::location_of(int state) const {
    if (!export_available_) return -1;
    if (state < 0 || state >= static_cast<int>(id_to_state_.size())) return -1;
    const GridState& st = id_to_state_[static_cast<std::size_t>(state)];
    return st.y * width_ + st.x;
}

int GridTask::goal_distance(int state) const {
    if (!export_available_) return -1;
    if (state < 0 || state >= static_cast<int>(id_to_state_.size())) return 0;
    const GridState& st = id_to_state_[static_cast<std::size_t>(state)];
    return std::abs(st.x - goal_x_) + std::abs(st.y - goal_y_);
}

GridObservation GridTask::observe() const { return render(current_, done_); }

std::unique_ptr<GridTask> build_grid_task(const GridTaskConfig& config) {
    return std::make_unique<GridTask>(config);
}

int encode_observation(const RoomsFeaturizer& featurizer, const RoomsObservation& obs) {
    return featurizer.encode(obs);
}

int encode_observation(GridFeaturizer& featurizer, const GridObservation& obs) {
    return featurizer.encode(obs);
}

}  // namespace londi
