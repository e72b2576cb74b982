#ifndef AIFMAZE_CONFIG_HPP
#define AIFMAZE_CONFIG_HPP

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aifmaze/maze.hpp"
#include "aifmaze/planner.hpp"
#include "aifmaze/sac.hpp"
#include "aifmaze/worldmodel.hpp"

namespace aifmaze {

struct TrainConfig {
    double lr_model = 3e-4;
    double lr_rl = 3e-4;
    double gamma = 0.8;
    int buffer_episodes = 2500;
    int batch_sequences = 8;
    int seq_len = 16;
    int update_every = 3;
    double ou_theta = 0.3;
    double ou_sigma = 0.3;
    double tau_ema = 0.005;
    int explore_episodes = 200;
    int total_episodes = 3000;
    int rl_hidden_width = 128;
    int rl_hidden_layers = 2;
    std::string loss_mode = "separate"; // or "summed"
    int threads = 2;
    int checkpoint_every = 500;
};

// Dotted-key/value run configuration. Every default that the method
// prescribes a value for is that value; everything else is an ordinary
// tunable.
struct RunConfig {
    MazeConfig env;
    ModelConfig model; // obs_dim is derived from the env cameras
    TrainConfig train;
    PlanConfig plan;
    std::string plan_goal_source = "env"; // or "replay"
    int eval_max_steps = 0;               // 0: use env.max_steps
    std::uint64_t seed = 0;

    void finalize() {
        model.obs_dim = env.obs_dim();
        validate();
    }

    void validate() const {
        env.validate();
        if (train.gamma <= 0 || train.gamma >= 1) throw ConfigError("train.gamma must be in (0,1)");
        if (train.ou_theta <= 0 || train.ou_theta >= 1) throw ConfigError("train.ou_theta must be in (0,1)");
        if (train.lr_model <= 0 || train.lr_rl <= 0) throw ConfigError("learning rates must be positive");
        if (train.batch_sequences <= 0 || train.seq_len <= 0) throw ConfigError("batch shape must be positive");
        if (train.buffer_episodes <= 0) throw ConfigError("train.buffer_episodes must be positive");
        if (train.update_every <= 0) throw ConfigError("train.update_every must be positive");
        if (train.loss_mode != "separate" && train.loss_mode != "summed")
            throw ConfigError("train.loss_mode must be 'separate' or 'summed'");
        if (plan.horizon <= 0 || plan.batch <= 0 || plan.steps < 0 || plan.lr <= 0)
            throw ConfigError("plan.* must be positive");
        if (plan.decay <= 0 || plan.decay >= 1) throw ConfigError("plan.rmsprop_decay must be in (0,1)");
        if (plan_goal_source != "env" && plan_goal_source != "replay")
            throw ConfigError("plan.goal_source must be 'env' or 'replay'");
        if (model.z_dim <= 0 || model.h_dim <= 0) throw ConfigError("model dims must be positive");
    }
};

namespace detail {

inline double parse_number(const std::string& v, const std::string& key, int line) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        while (used < v.size() && std::isspace(static_cast<unsigned char>(v[used]))) ++used;
        if (used != v.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": expected number for " + key + ", got '" + v + "'");
    }
}

inline long long parse_integer(const std::string& v, const std::string& key, int line) {
    const double d = parse_number(v, key, line);
    const long long i = static_cast<long long>(d);
    if (static_cast<double>(i) != d)
        throw ConfigError("line " + std::to_string(line) + ": expected integer for " + key + ", got '" + v + "'");
    return i;
}

inline bool parse_bool(const std::string& v, const std::string& key, int line) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("line " + std::to_string(line) + ": expected true/false for " + key + ", got '" + v + "'");
}

inline Rect parse_rect(const std::string& v, const std::string& key, int line) {
    std::istringstream is(v);
    Rect r{};
    if (!(is >> r.x0 >> r.y0 >> r.x1 >> r.y1))
        throw ConfigError("line " + std::to_string(line) + ": expected 'x0 y0 x1 y1' for " + key);
    std::string rest;
    if (is >> rest)
        throw ConfigError("line " + std::to_string(line) + ": trailing characters for " + key);
    return r;
}

inline std::string format_double(double d) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", d);
    return buf;
}

inline std::string format_rect(const Rect& r) {
    return format_double(r.x0) + " " + format_double(r.y0) + " " + format_double(r.x1) + " " +
           format_double(r.y1);
}

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

} // namespace detail

// Parses "key = value" lines; '#' starts a comment; blank lines are
// ignored. Unknown keys and malformed values are reported with their line
// number. Omitted keys keep the defaults above.
inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    bool obstacles_cleared = false;

    using detail::parse_bool;
    using detail::parse_integer;
    using detail::parse_number;
    using detail::parse_rect;

    std::istringstream is(text);
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string stripped = detail::trim(raw);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string val = detail::trim(stripped.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");

        if (key.rfind("env.obstacle.", 0) == 0) {
            if (!obstacles_cleared) {
                cfg.env.obstacles.clear();
                obstacles_cleared = true;
            }
            cfg.env.obstacles.push_back(parse_rect(val, key, line));
        } else if (key == "env.arena") {
            cfg.env.arena = parse_rect(val, key, line);
        } else if (key == "env.goal_se") {
            cfg.env.goal_se = parse_rect(val, key, line);
        } else if (key == "env.goal_nw") {
            cfg.env.goal_nw = parse_rect(val, key, line);
        } else if (key == "env.spawn_band") {
            cfg.env.spawn_band = parse_rect(val, key, line);
        } else if (key == "env.robot_radius") {
            cfg.env.robot_radius = parse_number(val, key, line);
        } else if (key == "env.action_max") {
            cfg.env.action_max = parse_number(val, key, line);
        } else if (key == "env.max_range") {
            cfg.env.max_range = parse_number(val, key, line);
        } else if (key == "env.n_cameras") {
            cfg.env.n_cameras = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "env.rays_per_camera") {
            cfg.env.rays_per_camera = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "env.max_steps") {
            cfg.env.max_steps = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "env.goal_reward") {
            cfg.env.goal_reward = parse_number(val, key, line);
        } else if (key == "env.collision_reward") {
            cfg.env.collision_reward = parse_number(val, key, line);
        } else if (key == "model.z_dim") {
            cfg.model.z_dim = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "model.h_dim") {
            cfg.model.h_dim = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "model.hidden_width") {
            cfg.model.hidden_width = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "model.hidden_layers") {
            cfg.model.hidden_layers = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "train.lr_model") {
            cfg.train.lr_model = parse_number(val, key, line);
        } else if (key == "train.lr_rl") {
            cfg.train.lr_rl = parse_number(val, key, line);
        } else if (key == "train.gamma") {
            cfg.train.gamma = parse_number(val, key, line);
        } else if (key == "train.buffer_episodes") {
            cfg.train.buffer_episodes = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "train.batch_sequences") {
            cfg.train.batch_sequences = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "train.seq_len") {
            cfg.train.seq_len = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "train.update_every") {
            cfg.train.update_every = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "train.ou_theta") {
            cfg.train.ou_theta = parse_number(val, key, line);
        } else if (key == "train.ou_sigma") {
            cfg.train.ou_sigma = parse_number(val, key, line);
        } else if (key == "train.tau_ema") {
            cfg.train.tau_ema = parse_number(val, key, line);
        } else if (key == "train.explore_episodes") {
            cfg.train.explore_episodes = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "train.total_episodes") {
            cfg.train.total_episodes = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "train.rl_hidden_width") {
            cfg.train.rl_hidden_width = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "train.rl_hidden_layers") {
            cfg.train.rl_hidden_layers = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "train.loss_mode") {
            cfg.train.loss_mode = val;
        } else if (key == "train.threads") {
            cfg.train.threads = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "train.checkpoint_every") {
            cfg.train.checkpoint_every = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "plan.horizon") {
            cfg.plan.horizon = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "plan.batch") {
            cfg.plan.batch = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "plan.steps") {
            cfg.plan.steps = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "plan.lr") {
            cfg.plan.lr = parse_number(val, key, line);
        } else if (key == "plan.rmsprop_decay") {
            cfg.plan.decay = parse_number(val, key, line);
        } else if (key == "plan.init_std") {
            cfg.plan.init_std = parse_number(val, key, line);
        } else if (key == "plan.warm_start") {
            cfg.plan.warm_start = parse_bool(val, key, line);
        } else if (key == "plan.threads") {
            cfg.plan.threads = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "plan.goal_source") {
            cfg.plan_goal_source = val;
        } else if (key == "eval.max_steps") {
            cfg.eval_max_steps = static_cast<int>(parse_integer(val, key, line));
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(parse_integer(val, key, line));
        } else {
            throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'");
        }
    }
    cfg.finalize();
    return cfg;
}

// Canonical key/value dump; parse_config(serialize_config(c)) reproduces c.
inline std::map<std::string, std::string> config_key_map(const RunConfig& cfg) {
    using detail::format_double;
    using detail::format_rect;
    std::map<std::string, std::string> m;
    m["env.arena"] = format_rect(cfg.env.arena);
    for (std::size_t i = 0; i < cfg.env.obstacles.size(); ++i)
        m["env.obstacle." + std::to_string(i)] = format_rect(cfg.env.obstacles[i]);
    m["env.goal_se"] = format_rect(cfg.env.goal_se);
    m["env.goal_nw"] = format_rect(cfg.env.goal_nw);
    m["env.spawn_band"] = format_rect(cfg.env.spawn_band);
    m["env.robot_radius"] = format_double(cfg.env.robot_radius);
    m["env.action_max"] = format_double(cfg.env.action_max);
    m["env.max_range"] = format_double(cfg.env.max_range);
    m["env.n_cameras"] = std::to_string(cfg.env.n_cameras);
    m["env.rays_per_camera"] = std::to_string(cfg.env.rays_per_camera);
    m["env.max_steps"] = std::to_string(cfg.env.max_steps);
    m["env.goal_reward"] = format_double(cfg.env.goal_reward);
    m["env.collision_reward"] = format_double(cfg.env.collision_reward);
    m["model.z_dim"] = std::to_string(cfg.model.z_dim);
    m["model.h_dim"] = std::to_string(cfg.model.h_dim);
    m["model.hidden_width"] = std::to_string(cfg.model.hidden_width);
    m["model.hidden_layers"] = std::to_string(cfg.model.hidden_layers);
    m["train.lr_model"] = format_double(cfg.train.lr_model);
    m["train.lr_rl"] = format_double(cfg.train.lr_rl);
    m["train.gamma"] = format_double(cfg.train.gamma);
    m["train.buffer_episodes"] = std::to_string(cfg.train.buffer_episodes);
    m["train.batch_sequences"] = std::to_string(cfg.train.batch_sequences);
    m["train.seq_len"] = std::to_string(cfg.train.seq_len);
    m["train.update_every"] = std::to_string(cfg.train.update_every);
    m["train.ou_theta"] = format_double(cfg.train.ou_theta);
    m["train.ou_sigma"] = format_double(cfg.train.ou_sigma);
    m["train.tau_ema"] = format_double(cfg.train.tau_ema);
    m["train.explore_episodes"] = std::to_string(cfg.train.explore_episodes);
    m["train.total_episodes"] = std::to_string(cfg.train.total_episodes);
    m["train.rl_hidden_width"] = std::to_string(cfg.train.rl_hidden_width);
    m["train.rl_hidden_layers"] = std::to_string(cfg.train.rl_hidden_layers);
    m["train.loss_mode"] = cfg.train.loss_mode;
    m["train.threads"] = std::to_string(cfg.train.threads);
    m["train.checkpoint_every"] = std::to_string(cfg.train.checkpoint_every);
    m["plan.horizon"] = std::to_string(cfg.plan.horizon);
    m["plan.batch"] = std::to_string(cfg.plan.batch);
    m["plan.steps"] = std::to_string(cfg.plan.steps);
    m["plan.lr"] = format_double(cfg.plan.lr);
    m["plan.rmsprop_decay"] = format_double(cfg.plan.decay);
    m["plan.init_std"] = format_double(cfg.plan.init_std);
    m["plan.warm_start"] = cfg.plan.warm_start ? "true" : "false";
    m["plan.threads"] = std::to_string(cfg.plan.threads);
    m["plan.goal_source"] = cfg.plan_goal_source;
    m["eval.max_steps"] = std::to_string(cfg.eval_max_steps);
    m["seed"] = std::to_string(cfg.seed);
    return m;
}

inline std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : config_key_map(cfg)) {
        out += k;
        out += " = ";
        out += v;
        out += "\n";
    }
    return out;
}

} // namespace aifmaze

#endif
