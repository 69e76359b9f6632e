#pragma once

// Labelled synthetic scenes: springs, rigid "light bar" groups, free particles
// and a fixed-charge Coulomb pair. Every trajectory is recorded every
// `substeps` integrator steps of length `dt`.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groupnet/json_util.hpp"
#include "groupnet/rng.hpp"

namespace groupnet {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(Vec2 o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    friend bool operator==(Vec2, Vec2) = default;
};

struct SceneConfig {
    std::size_t n_agents = 6;
    std::size_t t_past = 10;
    std::size_t t_future = 10;
    double dt = 0.001;
    std::size_t substeps = 10;
    double spring_k = 1.0;
    double coulomb_c = 1.0;
    std::array<double, 2> charge_range{0.5, 5.0};
    double init_pos_box = 2.0;
    double init_vel_sigma = 0.5;
    double r_min = 0.05;
    // rigid-group geometry and spin
    double arm_length = 1.0;
    double angular_vel_sigma = 1.0;
    // interaction types drawn by the category3 recipe
    std::vector<std::string> category_types{"free", "spring", "lightbar"};

    std::size_t frames() const { return t_past + t_future; }
    double frame_dt() const { return dt * static_cast<double>(substeps); }

    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigError("scene_config: " + m); };
        if (n_agents < 1) fail("n_agents must be positive");
        if (t_past < 2) fail("t_past must be at least 2");
        if (t_future < 1) fail("t_future must be positive");
        if (substeps < 1) fail("substeps must be at least 1");
        if (!(dt > 0) || !(spring_k > 0) || !(coulomb_c > 0) || !(init_pos_box > 0) || !(init_vel_sigma > 0) ||
            !(r_min > 0) || !(arm_length > 0) || !(angular_vel_sigma >= 0))
            fail("dynamics constants must be positive");
        if (!(charge_range[0] > 0) || charge_range[1] < charge_range[0]) fail("charge_range must be positive and ordered");
        if (category_types.empty()) fail("category_types must not be empty");
        for (const auto& t : category_types)
            if (t != "free" && t != "spring" && t != "lightbar") fail("unknown interaction type '" + t + "'");
    }
};

inline Json to_json(const SceneConfig& c) {
    return Json{{"n_agents", c.n_agents},
                {"t_past", c.t_past},
                {"t_future", c.t_future},
                {"dt", c.dt},
                {"substeps", c.substeps},
                {"spring_k", c.spring_k},
                {"coulomb_c", c.coulomb_c},
                {"charge_range", c.charge_range},
                {"init_pos_box", c.init_pos_box},
                {"init_vel_sigma", c.init_vel_sigma},
                {"r_min", c.r_min},
                {"arm_length", c.arm_length},
                {"angular_vel_sigma", c.angular_vel_sigma},
                {"category_types", c.category_types}};
}

inline SceneConfig scene_config_from_json(const Json& j) {
    const std::string where = "scene_config";
    require_known_keys(j,
                       {"n_agents", "t_past", "t_future", "dt", "substeps", "spring_k", "coulomb_c", "charge_range",
                        "init_pos_box", "init_vel_sigma", "r_min", "arm_length", "angular_vel_sigma",
                        "category_types"},
                       where);
    SceneConfig c;
    read_opt(j, "n_agents", c.n_agents, where);
    read_opt(j, "t_past", c.t_past, where);
    read_opt(j, "t_future", c.t_future, where);
    read_opt(j, "dt", c.dt, where);
    read_opt(j, "substeps", c.substeps, where);
    read_opt(j, "spring_k", c.spring_k, where);
    read_opt(j, "coulomb_c", c.coulomb_c, where);
    read_opt(j, "charge_range", c.charge_range, where);
    read_opt(j, "init_pos_box", c.init_pos_box, where);
    read_opt(j, "init_vel_sigma", c.init_vel_sigma, where);
    read_opt(j, "r_min", c.r_min, where);
    read_opt(j, "arm_length", c.arm_length, where);
    read_opt(j, "angular_vel_sigma", c.angular_vel_sigma, where);
    read_opt(j, "category_types", c.category_types, where);
    c.validate();
    return c;
}

/// Positions and velocities of every particle in a scene.
struct ParticleState {
    std::vector<Vec2> pos;
    std::vector<Vec2> vel;

    explicit ParticleState(std::size_t n = 0) : pos(n), vel(n) {}
    std::size_t size() const { return pos.size(); }
};

/// frames[f][k] is the position of the k-th listed member at frame f.
using Segment = std::vector<std::vector<Vec2>>;

enum class Experiment { mixed6, category3, charged2 };

inline std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::mixed6: return "mixed6";
        case Experiment::category3: return "category3";
        case Experiment::charged2: return "charged2";
    }
    return "?";
}

inline Experiment experiment_from_string(const std::string& s) {
    if (s == "mixed6") return Experiment::mixed6;
    if (s == "category3") return Experiment::category3;
    if (s == "charged2") return Experiment::charged2;
    throw ConfigError("unknown experiment '" + s + "' (expected mixed6, category3 or charged2)");
}

struct LabelledSample {
    std::size_t sample_id = 0;
    // traj[agent][frame]
    std::vector<std::vector<Vec2>> traj;
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::string> types;
    std::optional<double> charge;
};

namespace detail {

inline void check_finite_state(const ParticleState& s, std::span<const std::size_t> members) {
    for (std::size_t m : members) {
        const Vec2 p = s.pos[m], v = s.vel[m];
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(v.x) || !std::isfinite(v.y))
            throw SimulationError("non-finite particle state");
    }
}

inline void check_members(const ParticleState& s, std::span<const std::size_t> members) {
    for (std::size_t m : members)
        if (m >= s.size()) throw ContractError("group member index out of range");
}

}  // namespace detail

/// All-pairs zero-rest-length springs (F_ij = -k (x_i - x_j)), unit masses,
/// kick-drift-kick leapfrog. Returns `n_frames` recorded frames, the first
/// being the initial state.
inline Segment simulate_springs(const SceneConfig& cfg, std::span<const std::size_t> members, ParticleState& state,
                                std::size_t n_frames) {
    if (members.size() < 2) throw ContractError("simulate_springs: a spring group needs at least two members");
    detail::check_members(state, members);
    detail::check_finite_state(state, members);
    const std::size_t k = members.size();
    auto accel = [&](std::vector<Vec2>& acc) {
        for (std::size_t a = 0; a < k; ++a) {
            acc[a] = {};
            for (std::size_t b = 0; b < k; ++b)
                if (a != b) acc[a] += (state.pos[members[a]] - state.pos[members[b]]) * (-cfg.spring_k);
        }
    };
    std::vector<Vec2> acc(k);
    accel(acc);
    Segment out;
    out.reserve(n_frames);
    auto record = [&] {
        std::vector<Vec2> frame(k);
        for (std::size_t a = 0; a < k; ++a) frame[a] = state.pos[members[a]];
        out.push_back(std::move(frame));
    };
    record();
    const double h = cfg.dt;
    for (std::size_t f = 1; f < n_frames; ++f) {
        for (std::size_t s = 0; s < cfg.substeps; ++s) {
            for (std::size_t a = 0; a < k; ++a) {
                state.vel[members[a]] += acc[a] * (0.5 * h);
                state.pos[members[a]] += state.vel[members[a]] * h;
            }
            accel(acc);
            for (std::size_t a = 0; a < k; ++a) state.vel[members[a]] += acc[a] * (0.5 * h);
        }
        detail::check_finite_state(state, members);
        record();
    }
    return out;
}

inline double spring_energy(const SceneConfig& cfg, std::span<const std::size_t> members, const ParticleState& s) {
    double e = 0.0;
    for (std::size_t a = 0; a < members.size(); ++a) {
        e += 0.5 * s.vel[members[a]].dot(s.vel[members[a]]);
        for (std::size_t b = a + 1; b < members.size(); ++b) {
            const Vec2 d = s.pos[members[a]] - s.pos[members[b]];
            e += 0.5 * cfg.spring_k * d.dot(d);
        }
    }
    return e;
}

/// Rigid body motion: the members keep their offsets from the centroid, which
/// moves with `linear_vel` while the body spins at `angular_vel` (rad per time unit).
struct RigidMotion {
    Vec2 linear_vel;
    double angular_vel = 0.0;
};

/// Symmetric star layout: K arms of equal length, evenly spaced (a Y for K = 3).
inline std::vector<Vec2> star_offsets(std::size_t k, double arm, double phase) {
    std::vector<Vec2> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double a = phase + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(k);
        out[i] = {arm * std::cos(a), arm * std::sin(a)};
    }
    return out;
}

/// Kinematic rigid group. Positions are evaluated in closed form, so pairwise
/// distances are preserved to rounding. Updates `state` to the final frame.
inline Segment simulate_rigid_group(const SceneConfig& cfg, std::span<const std::size_t> members, ParticleState& state,
                                    const RigidMotion& motion, std::size_t n_frames) {
    if (members.empty()) throw ContractError("simulate_rigid_group: empty group");
    detail::check_members(state, members);
    detail::check_finite_state(state, members);
    const std::size_t k = members.size();
    Vec2 centroid;
    for (std::size_t m : members) centroid += state.pos[m];
    centroid = centroid * (1.0 / static_cast<double>(k));
    std::vector<Vec2> offsets(k);
    for (std::size_t a = 0; a < k; ++a) offsets[a] = state.pos[members[a]] - centroid;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b)
            if ((offsets[a] - offsets[b]).norm() < 1e-9)
                throw ConfigError("simulate_rigid_group: coincident anchor points");

    Segment out;
    out.reserve(n_frames);
    const double fdt = cfg.frame_dt();
    for (std::size_t f = 0; f < n_frames; ++f) {
        const double t = fdt * static_cast<double>(f);
        const double c = std::cos(motion.angular_vel * t), s = std::sin(motion.angular_vel * t);
        const Vec2 ctr = centroid + motion.linear_vel * t;
        std::vector<Vec2> frame(k);
        for (std::size_t a = 0; a < k; ++a) {
            const Vec2 o = offsets[a];
            frame[a] = ctr + Vec2{c * o.x - s * o.y, s * o.x + c * o.y};
        }
        out.push_back(std::move(frame));
    }
    // leave the state at the last frame with the rigid-body velocity field
    const double t_end = fdt * static_cast<double>(n_frames == 0 ? 0 : n_frames - 1);
    const Vec2 ctr_end = centroid + motion.linear_vel * t_end;
    for (std::size_t a = 0; a < k && n_frames > 0; ++a) {
        const Vec2 p = out.back()[a];
        const Vec2 r = p - ctr_end;
        state.pos[members[a]] = p;
        state.vel[members[a]] = motion.linear_vel + Vec2{-motion.angular_vel * r.y, motion.angular_vel * r.x};
    }
    return out;
}

/// Constant-velocity motion, evaluated exactly: x(t) = x0 + v t.
inline Segment simulate_free(const SceneConfig& cfg, std::span<const std::size_t> members, ParticleState& state,
                             std::size_t n_frames) {
    detail::check_members(state, members);
    detail::check_finite_state(state, members);
    Segment out;
    out.reserve(n_frames);
    const double fdt = cfg.frame_dt();
    for (std::size_t f = 0; f < n_frames; ++f) {
        const double t = fdt * static_cast<double>(f);
        std::vector<Vec2> frame;
        for (std::size_t m : members) frame.push_back(state.pos[m] + state.vel[m] * t);
        out.push_back(std::move(frame));
    }
    if (n_frames > 0)
        for (std::size_t a = 0; a < members.size(); ++a) state.pos[members[a]] = out.back()[a];
    return out;
}

/// Mobile unit charge (index 1) repelled by a fixed charge `charge` (index 0):
/// a = C q (x1 - x0) / r^3 with r clipped below r_min.
inline Segment simulate_coulomb_pair(const SceneConfig& cfg, double charge, ParticleState& state, std::size_t n_frames) {
    if (state.size() != 2) throw ContractError("simulate_coulomb_pair: exactly two particles");
    const std::array<std::size_t, 2> both{0, 1};
    detail::check_finite_state(state, both);
    auto accel = [&] {
        const Vec2 d = state.pos[1] - state.pos[0];
        const double r = std::max(d.norm(), cfg.r_min);
        return d * (cfg.coulomb_c * charge / (r * r * r));
    };
    Segment out;
    out.reserve(n_frames);
    out.push_back({state.pos[0], state.pos[1]});
    Vec2 a = accel();
    const double h = cfg.dt;
    for (std::size_t f = 1; f < n_frames; ++f) {
        for (std::size_t s = 0; s < cfg.substeps; ++s) {
            state.vel[1] += a * (0.5 * h);
            state.pos[1] += state.vel[1] * h;
            a = accel();
            state.vel[1] += a * (0.5 * h);
        }
        detail::check_finite_state(state, both);
        out.push_back({state.pos[0], state.pos[1]});
    }
    return out;
}

inline double coulomb_energy(const SceneConfig& cfg, double charge, const ParticleState& s) {
    const double r = std::max((s.pos[1] - s.pos[0]).norm(), cfg.r_min);
    return 0.5 * s.vel[1].dot(s.vel[1]) + cfg.coulomb_c * charge / r;
}

namespace detail {

inline Vec2 uniform_in_box(Rng& rng, double half) { return {rng.uniform(-half, half), rng.uniform(-half, half)}; }
inline Vec2 gaussian_vec(Rng& rng, double sigma) { return {rng.normal(0.0, sigma), rng.normal(0.0, sigma)}; }

inline void write_segment(LabelledSample& out, std::span<const std::size_t> members, const Segment& seg) {
    for (std::size_t f = 0; f < seg.size(); ++f)
        for (std::size_t a = 0; a < members.size(); ++a) out.traj[members[a]][f] = seg[f][a];
}

/// Star layout around a random centroid.
inline void place_star(ParticleState& s, std::span<const std::size_t> members, const SceneConfig& cfg, Rng& rng) {
    const Vec2 centre = uniform_in_box(rng, cfg.init_pos_box);
    const auto offs = star_offsets(members.size(), cfg.arm_length, rng.uniform(0.0, 2.0 * std::numbers::pi));
    for (std::size_t a = 0; a < members.size(); ++a) s.pos[members[a]] = centre + offs[a];
}

/// Runs one interaction group of the given type on its members.
inline void run_group(const std::string& type, std::span<const std::size_t> members, const SceneConfig& cfg,
                      ParticleState& state, Rng& rng, LabelledSample& out) {
    const std::size_t n_frames = cfg.frames();
    if (type == "lightbar") {
        RigidMotion motion{gaussian_vec(rng, cfg.init_vel_sigma), rng.normal(0.0, cfg.angular_vel_sigma)};
        write_segment(out, members, simulate_rigid_group(cfg, members, state, motion, n_frames));
    } else if (type == "spring") {
        // shared centre-of-mass drift plus independent relative velocities
        const Vec2 drift = gaussian_vec(rng, cfg.init_vel_sigma);
        for (std::size_t m : members) state.vel[m] = drift + gaussian_vec(rng, cfg.init_vel_sigma);
        write_segment(out, members, simulate_springs(cfg, members, state, n_frames));
    } else if (type == "free") {
        for (std::size_t m : members) state.vel[m] = gaussian_vec(rng, cfg.init_vel_sigma);
        write_segment(out, members, simulate_free(cfg, members, state, n_frames));
    } else {
        throw ConfigError("unknown interaction type '" + type + "'");
    }
}

inline LabelledSample empty_sample(std::size_t id, std::size_t n_agents, std::size_t n_frames) {
    LabelledSample s;
    s.sample_id = id;
    s.traj.assign(n_agents, std::vector<Vec2>(n_frames));
    return s;
}

}  // namespace detail

/// Six particles: a Y-shaped light bar (3), a spring pair (2) and one free particle,
/// assigned to randomly permuted agent slots.
inline LabelledSample make_mixed6_sample(const SceneConfig& cfg, std::size_t id, Rng& rng) {
    if (cfg.n_agents != 6) throw ConfigError("mixed6 requires n_agents = 6");
    std::vector<std::size_t> slots{0, 1, 2, 3, 4, 5};
    std::shuffle(slots.begin(), slots.end(), rng.engine());
    std::vector<std::size_t> bar{slots[0], slots[1], slots[2]};
    std::vector<std::size_t> spring{slots[3], slots[4]};
    std::vector<std::size_t> free{slots[5]};
    std::sort(bar.begin(), bar.end());
    std::sort(spring.begin(), spring.end());

    LabelledSample out = detail::empty_sample(id, 6, cfg.frames());
    ParticleState state(6);
    detail::place_star(state, bar, cfg, rng);
    detail::place_star(state, spring, cfg, rng);
    state.pos[free[0]] = detail::uniform_in_box(rng, cfg.init_pos_box);
    detail::run_group("lightbar", bar, cfg, state, rng, out);
    detail::run_group("spring", spring, cfg, state, rng, out);
    detail::run_group("free", free, cfg, state, rng, out);
    out.groups = {bar, spring, free};
    out.types = {"lightbar", "spring", "free"};
    return out;
}

/// Three particles in a Y layout whose single group type is drawn uniformly
/// from `category_types`.
inline LabelledSample make_category3_sample(const SceneConfig& cfg, std::size_t id, Rng& rng) {
    if (cfg.n_agents != 3) throw ConfigError("category3 requires n_agents = 3");
    const std::string type = cfg.category_types[rng.index(cfg.category_types.size())];
    const std::vector<std::size_t> members{0, 1, 2};
    LabelledSample out = detail::empty_sample(id, 3, cfg.frames());
    ParticleState state(3);
    detail::place_star(state, members, cfg, rng);
    detail::run_group(type, members, cfg, state, rng, out);
    out.groups = {members};
    out.types = {type};
    return out;
}

/// Fixed charge at agent 0, mobile unit charge at agent 1 placed between
/// `arm_length` and `2 * arm_length` away, charge uniform in `charge_range`.
inline LabelledSample make_charged2_sample(const SceneConfig& cfg, std::size_t id, Rng& rng) {
    if (cfg.n_agents != 2) throw ConfigError("charged2 requires n_agents = 2");
    const double charge = rng.uniform(cfg.charge_range[0], cfg.charge_range[1]);
    ParticleState state(2);
    do {
        state.pos[0] = detail::uniform_in_box(rng, cfg.init_pos_box);
        const double r = rng.uniform(cfg.arm_length, 2.0 * cfg.arm_length);
        const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
        state.pos[1] = state.pos[0] + Vec2{r * std::cos(a), r * std::sin(a)};
    } while ((state.pos[1] - state.pos[0]).norm() < cfg.r_min);
    state.vel[1] = detail::gaussian_vec(rng, cfg.init_vel_sigma);
    LabelledSample out = detail::empty_sample(id, 2, cfg.frames());
    const std::array<std::size_t, 2> both{0, 1};
    detail::write_segment(out, both, simulate_coulomb_pair(cfg, charge, state, cfg.frames()));
    out.charge = charge;
    return out;
}

inline LabelledSample make_sample(Experiment e, const SceneConfig& cfg, std::size_t id, std::uint64_t seed) {
    Rng rng = Rng(seed).split(id);
    switch (e) {
        case Experiment::mixed6: return make_mixed6_sample(cfg, id, rng);
        case Experiment::category3: return make_category3_sample(cfg, id, rng);
        case Experiment::charged2: return make_charged2_sample(cfg, id, rng);
    }
    throw ConfigError("unknown experiment");
}

}  // namespace groupnet
