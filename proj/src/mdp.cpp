#include "londi/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace londi {

namespace {
constexpr double kRowSumTol = 1e-9;
constexpr double kEntryTol = 1e-12;
}  // namespace

double QFunction::row_max(int s) const {
    double best = (*this)(s, 0);
    for (int a = 1; a < n_actions; ++a) best = std::max(best, (*this)(s, a));
    return best;
}

void StationaryPolicy::validate() const {
    if (n_states <= 0 || n_actions <= 0)
        throw ValidationError("policy: empty state or action set");
    for (int s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            double p = (*this)(s, a);
            if (!std::isfinite(p) || p < -kEntryTol || p > 1.0 + kEntryTol)
                throw ValidationError("policy: probability out of [0,1] at state " +
                                      std::to_string(s));
            sum += p;
        }
        if (std::abs(sum - 1.0) > kRowSumTol)
            throw ValidationError("policy: row " + std::to_string(s) +
                                  " sums to " + format_double(sum));
    }
}

int StationaryPolicy::sample(int s, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    double acc = 0.0;
    for (int a = 0; a < n_actions; ++a) {
        acc += (*this)(s, a);
        if (u < acc) return a;
    }
    // Guard against accumulated rounding: fall back to the last positive entry.
    for (int a = n_actions - 1; a >= 0; --a)
        if ((*this)(s, a) > 0.0) return a;
    throw ValidationError("policy: row " + std::to_string(s) + " has no mass");
}

TabularMDP::TabularMDP(int ns, int na, double g)
    : n_states(ns), n_actions(na),
      transition(static_cast<std::size_t>(ns) * na * ns, 0.0),
      reward(static_cast<std::size_t>(ns) * na, 0.0), gamma(g) {}

void TabularMDP::make_terminal(int s) {
    terminal_states.insert(s);
    for (int a = 0; a < n_actions; ++a) {
        for (int s2 = 0; s2 < n_states; ++s2) p(s, a, s2) = 0.0;
        p(s, a, s) = 1.0;
        r(s, a) = 0.0;
    }
}

void TabularMDP::validate() const {
    if (n_states <= 0 || n_actions <= 0)
        throw ValidationError("mdp: empty state or action set");
    if (!(gamma >= 0.0) || !(gamma < 1.0))
        throw ValidationError("mdp: gamma must lie in [0,1), got " + format_double(gamma));
    if (transition.size() != static_cast<std::size_t>(n_states) * n_actions * n_states ||
        reward.size() != static_cast<std::size_t>(n_states) * n_actions)
        throw ValidationError("mdp: tensor dimensions do not match state/action counts");
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            if (!std::isfinite(r(s, a)))
                throw ValidationError("mdp: non-finite reward at (" + std::to_string(s) +
                                      "," + std::to_string(a) + ")");
            double sum = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                double v = p(s, a, s2);
                if (!std::isfinite(v) || v < -kEntryTol || v > 1.0 + kEntryTol)
                    throw ValidationError("mdp: transition entry out of [0,1] at (" +
                                          std::to_string(s) + "," + std::to_string(a) + "," +
                                          std::to_string(s2) + ")");
                sum += v;
            }
            if (std::abs(sum - 1.0) > kRowSumTol)
                throw ValidationError("mdp: transition row (" + std::to_string(s) + "," +
                                      std::to_string(a) + ") sums to " + format_double(sum));
        }
    }
    for (int s : terminal_states) {
        if (s < 0 || s >= n_states)
            throw ValidationError("mdp: terminal state id out of range");
        for (int a = 0; a < n_actions; ++a) {
            if (std::abs(p(s, a, s) - 1.0) > kRowSumTol || r(s, a) != 0.0)
                throw ValidationError("mdp: terminal state " + std::to_string(s) +
                                      " must self-loop with zero reward");
        }
    }
}

double TabularMDP::max_abs_reward() const {
    double m = 0.0;
    for (double v : reward) m = std::max(m, std::abs(v));
    return m;
}

double TabularMDP::expected_reward(const StationaryPolicy& policy, int s) const {
    double out = 0.0;
    for (int a = 0; a < n_actions; ++a) out += policy(s, a) * r(s, a);
    return out;
}

ValueFunction bellman_optimality_step(const TabularMDP& mdp, const ValueFunction& v) {
    if (v.size() != mdp.n_states)
        throw ValidationError("bellman step: value dimension mismatch");
    ValueFunction out;
    out.values.resize(static_cast<std::size_t>(mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < mdp.n_actions; ++a) {
            double q = mdp.r(s, a);
            for (int s2 = 0; s2 < mdp.n_states; ++s2)
                q += mdp.gamma * mdp.p(s, a, s2) * v[s2];
            best = std::max(best, q);
        }
        out[s] = best;
    }
    return out;
}

namespace {

double sup_dist(const ValueFunction& a, const ValueFunction& b) {
    double d = 0.0;
    for (int s = 0; s < a.size(); ++s) d = std::max(d, std::abs(a[s] - b[s]));
    return d;
}

}  // namespace

ValueFunction value_iteration(const TabularMDP& mdp, double tol, int max_iter) {
    mdp.validate();
    if (!(tol > 0.0)) throw ValidationError("value_iteration: tol must be positive");
    ValueFunction v;
    v.values.assign(static_cast<std::size_t>(mdp.n_states), 0.0);
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        ValueFunction next = bellman_optimality_step(mdp, v);
        residual = sup_dist(next, v);
        v = std::move(next);
        if (residual <= tol) return v;
    }
    throw SolverError("value_iteration: no convergence within iteration cap", residual);
}

ValueFunction policy_evaluation(const TabularMDP& mdp, const StationaryPolicy& policy,
                                double tol, int max_iter) {
    mdp.validate();
    policy.validate();
    if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
        throw ValidationError("policy_evaluation: policy dimensions do not match mdp");
    if (!(tol > 0.0)) throw ValidationError("policy_evaluation: tol must be positive");

    ValueFunction v;
    v.values.assign(static_cast<std::size_t>(mdp.n_states), 0.0);
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        ValueFunction next;
        next.values.resize(static_cast<std::size_t>(mdp.n_states));
        for (int s = 0; s < mdp.n_states; ++s) {
            double val = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                double pa = policy(s, a);
                if (pa == 0.0) continue;
                double q = mdp.r(s, a);
                for (int s2 = 0; s2 < mdp.n_states; ++s2)
                    q += mdp.gamma * mdp.p(s, a, s2) * v[s2];
                val += pa * q;
            }
            next[s] = val;
        }
        residual = sup_dist(next, v);
        v = std::move(next);
        if (residual <= tol) return v;
    }
    throw SolverError("policy_evaluation: no convergence within iteration cap", residual);
}

QFunction q_from_values(const TabularMDP& mdp, const ValueFunction& v) {
    if (v.size() != mdp.n_states)
        throw ValidationError("q_from_values: value dimension mismatch");
    for (double x : v.values)
        if (!std::isfinite(x)) throw ValidationError("q_from_values: non-finite value input");
    QFunction q(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            double val = mdp.r(s, a);
            for (int s2 = 0; s2 < mdp.n_states; ++s2)
                val += mdp.gamma * mdp.p(s, a, s2) * v[s2];
            q(s, a) = val;
        }
    return q;
}

StationaryPolicy greedy_policy(const QFunction& q) {
    StationaryPolicy pi(q.n_states, q.n_actions);
    for (int s = 0; s < q.n_states; ++s) {
        int best = 0;
        for (int a = 1; a < q.n_actions; ++a)
            if (q(s, a) > q(s, best)) best = a;
        pi(s, best) = 1.0;
    }
    return pi;
}

StationaryPolicy uniform_policy(int n_states, int n_actions) {
    StationaryPolicy pi(n_states, n_actions);
    double w = 1.0 / n_actions;
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) pi(s, a) = w;
    return pi;
}

StationaryPolicy mix_with_uniform(const StationaryPolicy& base, double epsilon) {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw ValidationError("mix_with_uniform: epsilon outside [0,1]");
    StationaryPolicy pi(base.n_states, base.n_actions);
    double u = epsilon / base.n_actions;
    for (int s = 0; s < base.n_states; ++s)
        for (int a = 0; a < base.n_actions; ++a)
            pi(s, a) = (1.0 - epsilon) * base(s, a) + u;
    return pi;
}

// --- Text format -------------------------------------------------------

std::string mdp_to_text(const TabularMDP& mdp) {
    std::ostringstream out;
    out << "mdp " << mdp.n_states << " " << mdp.n_actions << "\n";
    out << "gamma " << format_double(mdp.gamma) << "\n";
    for (int s : mdp.terminal_states) out << "terminal " << s << "\n";
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            if (mdp.r(s, a) != 0.0)
                out << "reward " << s << " " << a << " " << format_double(mdp.r(s, a)) << "\n";
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            for (int s2 = 0; s2 < mdp.n_states; ++s2)
                if (mdp.p(s, a, s2) != 0.0)
                    out << "prob " << s << " " << a << " " << s2 << " "
                        << format_double(mdp.p(s, a, s2)) << "\n";
    return out.str();
}

TabularMDP mdp_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    TabularMDP mdp;
    bool have_header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        auto fail = [&](const std::string& msg) {
            throw ValidationError("mdp text line " + std::to_string(lineno) + ": " + msg);
        };
        if (tag == "mdp") {
            int ns, na;
            if (!(ls >> ns >> na) || ns <= 0 || na <= 0) fail("bad header");
            mdp = TabularMDP(ns, na, 0.0);
            have_header = true;
        } else if (!have_header) {
            fail("expected 'mdp <n_states> <n_actions>' first");
        } else if (tag == "gamma") {
            if (!(ls >> mdp.gamma)) fail("bad gamma");
        } else if (tag == "terminal") {
            int s;
            if (!(ls >> s) || s < 0 || s >= mdp.n_states) fail("bad terminal id");
            mdp.terminal_states.insert(s);
        } else if (tag == "reward") {
            int s, a;
            double v;
            if (!(ls >> s >> a >> v) || s < 0 || s >= mdp.n_states || a < 0 ||
                a >= mdp.n_actions)
                fail("bad reward entry");
            mdp.r(s, a) = v;
        } else if (tag == "prob") {
            int s, a, s2;
            double v;
            if (!(ls >> s >> a >> s2 >> v) || s < 0 || s >= mdp.n_states || a < 0 ||
                a >= mdp.n_actions || s2 < 0 || s2 >= mdp.n_states)
                fail("bad prob entry");
            mdp.p(s, a, s2) = v;
        } else {
            fail("unknown tag '" + tag + "'");
        }
    }
    if (!have_header) throw ValidationError("mdp text: missing header");
    mdp.validate();
    return mdp;
}

void save_mdp(const TabularMDP& mdp, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << mdp_to_text(mdp);
    if (!f) throw IoError("write failed: " + path);
}

TabularMDP load_mdp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return mdp_from_text(ss.str());
}

}  // namespace londi
