#ifndef AIFMAZE_MAZE_HPP
#define AIFMAZE_MAZE_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "aifmaze/common.hpp"
#include "aifmaze/rng.hpp"

namespace aifmaze {

struct Rect {
    double x0, y0, x1, y1;

    bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    bool contains_open(double x, double y) const { return x > x0 && x < x1 && y > y0 && y < y1; }
    Rect inflated(double r) const { return {x0 - r, y0 - r, x1 + r, y1 + r}; }
    double cx() const { return 0.5 * (x0 + x1); }
    double cy() const { return 0.5 * (y0 + y1); }
    bool valid() const { return x1 > x0 && y1 > y0; }
    bool inside(const Rect& outer) const {
        return x0 >= outer.x0 && x1 <= outer.x1 && y0 >= outer.y0 && y1 <= outer.y1;
    }
    bool overlaps(const Rect& o) const { return x0 < o.x1 && x1 > o.x0 && y0 < o.y1 && y1 > o.y0; }
};

enum class GoalId { SE, NW };

inline const char* goal_name(GoalId g) { return g == GoalId::SE ? "se" : "nw"; }

enum class StepEvent { None, GoalReached, Collision, Timeout };

inline const char* event_name(StepEvent e) {
    switch (e) {
    case StepEvent::None: return "none";
    case StepEvent::GoalReached: return "goal_reached";
    case StepEvent::Collision: return "collision";
    case StepEvent::Timeout: return "timeout";
    }
    return "none";
}

// Flat kinematic arena with axis-aligned obstacles, two corner goal areas
// and fixed depth cameras facing east, south, west and north. The robot is
// a disc; its action is a per-axis displacement clamped to action_max.
struct MazeConfig {
    Rect arena{0, 0, 20, 20};
    std::vector<Rect> obstacles{{6, 4, 9, 12}, {11, 8, 14, 16}};
    Rect goal_se{17, 0, 20, 3};
    Rect goal_nw{0, 17, 3, 20};
    Rect spawn_band{4, 9, 16, 11};
    double robot_radius = 0.5;
    double action_max = 2.0;
    double max_range = 20.0;
    int n_cameras = 4;
    int rays_per_camera = 16;
    int max_steps = 100;
    double goal_reward = 100.0;
    double collision_reward = -2.5;

    int obs_dim() const { return n_cameras * rays_per_camera; }

    void validate() const {
        if (!arena.valid()) throw ConfigError("maze: arena is degenerate");
        if (robot_radius <= 0) throw ConfigError("maze: robot_radius must be positive");
        if (action_max <= 0) throw ConfigError("maze: action_max must be positive");
        if (max_range <= 0) throw ConfigError("maze: max_range must be positive");
        if (n_cameras <= 0 || rays_per_camera <= 0) throw ConfigError("maze: camera counts must be positive");
        if (max_steps <= 0) throw ConfigError("maze: max_steps must be positive");
        for (const Rect* r : {&goal_se, &goal_nw, &spawn_band}) {
            if (!r->valid() || !r->inside(arena)) throw ConfigError("maze: region outside arena");
        }
        for (const Rect& o : obstacles) {
            if (!o.valid() || !o.inside(arena)) throw ConfigError("maze: obstacle outside arena");
            if (o.overlaps(goal_se) || o.overlaps(goal_nw)) throw ConfigError("maze: obstacle overlaps a goal area");
        }
    }
};

struct RobotState {
    double x = 0, y = 0;
    int steps_elapsed = 0;
    GoalId active_goal = GoalId::SE;
    bool done = false;
};

struct StepResult {
    Vec observation;
    double reward = 0;
    bool done = false;
    bool collided = false;
    StepEvent event = StepEvent::None;
};

class Maze {
public:
    explicit Maze(MazeConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    const MazeConfig& config() const { return cfg_; }
    const RobotState& state() const { return state_; }

    Vec reset(Rng& rng) {
        state_ = RobotState{};
        state_.active_goal = rng.coin() ? GoalId::SE : GoalId::NW;
        const Rect& band = cfg_.spawn_band;
        bool placed = false;
        for (int attempt = 0; attempt < 10000; ++attempt) {
            const double x = rng.uniform(band.x0, band.x1);
            const double y = rng.uniform(band.y0, band.y1);
            if (free_space(x, y)) {
                state_.x = x;
                state_.y = y;
                placed = true;
                break;
            }
        }
        if (!placed) throw ConfigError("maze: spawn band has no free space");
        return observe(state_.x, state_.y);
    }

    StepResult step(double ax, double ay) {
        if (state_.done) throw std::logic_error("Maze::step called on a finished episode");
        const double dx = std::clamp(ax, -cfg_.action_max, cfg_.action_max);
        const double dy = std::clamp(ay, -cfg_.action_max, cfg_.action_max);

        bool collided = false;
        // Axis-separated sliding: x first, then y, stopping at the first
        // contact along each axis.
        state_.x = slide_axis(state_.x, dx, state_.y, /*horizontal=*/true, collided);
        state_.y = slide_axis(state_.y, dy, state_.x, /*horizontal=*/false, collided);
        ++state_.steps_elapsed;

        StepResult res;
        res.collided = collided;
        res.reward = collided ? cfg_.collision_reward : 0.0;
        const Rect& goal = state_.active_goal == GoalId::SE ? cfg_.goal_se : cfg_.goal_nw;
        if (goal.contains(state_.x, state_.y)) {
            res.reward += cfg_.goal_reward;
            res.done = true;
            res.event = StepEvent::GoalReached;
        } else if (state_.steps_elapsed >= cfg_.max_steps) {
            res.done = true;
            res.event = StepEvent::Timeout;
        } else if (collided) {
            res.event = StepEvent::Collision;
        }
        state_.done = res.done;
        res.observation = observe(state_.x, state_.y);
        return res;
    }

    // Depth readings, pure in the position. Cameras face E, S, W, N in that
    // order; each spreads its rays over a 90-degree fan centered on the
    // camera direction, so the default four cameras tile the full circle.
    Vec observe(double x, double y) const {
        Vec out(cfg_.obs_dim());
        static constexpr double kPi = 3.141592653589793;
        const double cam_dirs[4] = {0.0, -kPi / 2, kPi, kPi / 2};
        const double fov = 2.0 * kPi / cfg_.n_cameras;
        int idx = 0;
        for (int c = 0; c < cfg_.n_cameras; ++c) {
            const double dir = cam_dirs[c % 4];
            for (int k = 0; k < cfg_.rays_per_camera; ++k) {
                const double ang = dir + fov * ((k + 0.5) / cfg_.rays_per_camera - 0.5);
                const double d = ray_distance(x, y, std::cos(ang), std::sin(ang));
                out[idx++] = std::min(d, cfg_.max_range) / cfg_.max_range;
            }
        }
        return out;
    }

    Vec goal_observation(GoalId g) const {
        const Rect& r = g == GoalId::SE ? cfg_.goal_se : cfg_.goal_nw;
        ++goal_observation_calls_;
        return observe(r.cx(), r.cy());
    }

    long goal_observation_calls() const { return goal_observation_calls_; }

    std::optional<GoalId> which_goal(double x, double y) const {
        if (cfg_.goal_se.contains(x, y)) return GoalId::SE;
        if (cfg_.goal_nw.contains(x, y)) return GoalId::NW;
        return std::nullopt;
    }

    bool free_space(double x, double y) const {
        const double r = cfg_.robot_radius;
        if (x < cfg_.arena.x0 + r || x > cfg_.arena.x1 - r || y < cfg_.arena.y0 + r || y > cfg_.arena.y1 - r)
            return false;
        for (const Rect& o : cfg_.obstacles) {
            if (o.inflated(r).contains_open(x, y)) return false;
        }
        return true;
    }

    // Distance from (x,y) along unit direction (dx,dy) to the first wall,
    // i.e. an obstacle face or the arena boundary.
    double ray_distance(double x, double y, double dx, double dy) const {
        double best = ray_exit_aabb(x, y, dx, dy, cfg_.arena);
        for (const Rect& o : cfg_.obstacles) {
            const double t = ray_enter_aabb(x, y, dx, dy, o);
            if (t >= 0 && t < best) best = t;
        }
        return best;
    }

private:
    MazeConfig cfg_;
    RobotState state_{.done = true};
    mutable long goal_observation_calls_ = 0;

    // Move one coordinate by delta, stopping at the first blocking face.
    // `other` is the fixed coordinate on the perpendicular axis.
    double slide_axis(double pos, double delta, double other, bool horizontal, bool& collided) const {
        if (delta == 0) return pos;
        const double r = cfg_.robot_radius;
        double target = pos + delta;

        const double lo = horizontal ? cfg_.arena.x0 + r : cfg_.arena.y0 + r;
        const double hi = horizontal ? cfg_.arena.x1 - r : cfg_.arena.y1 - r;
        if (target < lo) {
            target = lo;
            collided = true;
        }
        if (target > hi) {
            target = hi;
            collided = true;
        }

        for (const Rect& raw : cfg_.obstacles) {
            const Rect o = raw.inflated(r);
            const double span_lo = horizontal ? o.y0 : o.x0;
            const double span_hi = horizontal ? o.y1 : o.x1;
            if (other <= span_lo || other >= span_hi) continue; // passing alongside, no contact
            const double face_lo = horizontal ? o.x0 : o.y0;
            const double face_hi = horizontal ? o.x1 : o.y1;
            if (delta > 0 && pos <= face_lo && target > face_lo) {
                target = face_lo;
                collided = true;
            } else if (delta < 0 && pos >= face_hi && target < face_hi) {
                target = face_hi;
                collided = true;
            }
        }
        return target;
    }

    // Slab method. Entry distance into the box (>= 0), or -1 when missed.
    static double ray_enter_aabb(double x, double y, double dx, double dy, const Rect& b) {
        double tmin = -1e300, tmax = 1e300;
        if (dx != 0) {
            const double t1 = (b.x0 - x) / dx, t2 = (b.x1 - x) / dx;
            tmin = std::max(tmin, std::min(t1, t2));
            tmax = std::min(tmax, std::max(t1, t2));
        } else if (x < b.x0 || x > b.x1) {
            return -1;
        }
        if (dy != 0) {
            const double t1 = (b.y0 - y) / dy, t2 = (b.y1 - y) / dy;
            tmin = std::max(tmin, std::min(t1, t2));
            tmax = std::min(tmax, std::max(t1, t2));
        } else if (y < b.y0 || y > b.y1) {
            return -1;
        }
        if (tmax < tmin || tmax < 0) return -1;
        return tmin >= 0 ? tmin : 0.0;
    }

    // Exit distance out of a box the ray starts inside of.
    static double ray_exit_aabb(double x, double y, double dx, double dy, const Rect& b) {
        double tmax = 1e300;
        if (dx != 0) {
            const double t1 = (b.x0 - x) / dx, t2 = (b.x1 - x) / dx;
            tmax = std::min(tmax, std::max(t1, t2));
        }
        if (dy != 0) {
            const double t1 = (b.y0 - y) / dy, t2 = (b.y1 - y) / dy;
            tmax = std::min(tmax, std::max(t1, t2));
        }
        return std::max(tmax, 0.0);
    }
};

} // namespace aifmaze

#endif
