#ifndef AIFMAZE_TRAINER_HPP
#define AIFMAZE_TRAINER_HPP

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aifmaze/checkpoint.hpp"
#include "aifmaze/config.hpp"
#include "aifmaze/maze.hpp"
#include "aifmaze/planner.hpp"
#include "aifmaze/replay.hpp"
#include "aifmaze/sac.hpp"
#include "aifmaze/worldmodel.hpp"

namespace aifmaze {

struct EpisodeMetrics {
    int episode = 0;
    double episode_return = 0;
    int steps = 0;
    int collisions = 0;
    GoalId goal = GoalId::SE;
    bool reached = false;
    std::string mode = "habitual";
};

inline nlohmann::json metrics_json(const EpisodeMetrics& m) {
    nlohmann::json j;
    j["episode"] = m.episode;
    j["return"] = m.episode_return;
    j["steps"] = m.steps;
    j["collisions"] = m.collisions;
    j["goal"] = goal_name(m.goal);
    j["reached"] = m.reached;
    j["mode"] = m.mode;
    return j;
}

inline EpisodeMetrics metrics_from_json(const nlohmann::json& j) {
    EpisodeMetrics m;
    m.episode = j.at("episode").get<int>();
    m.episode_return = j.at("return").get<double>();
    m.steps = j.at("steps").get<int>();
    m.collisions = j.at("collisions").get<int>();
    m.goal = j.at("goal").get<std::string>() == "se" ? GoalId::SE : GoalId::NW;
    m.reached = j.at("reached").get<bool>();
    m.mode = j.at("mode").get<std::string>();
    return m;
}

inline std::vector<EpisodeMetrics> read_metrics_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics file: " + path.string());
    std::vector<EpisodeMetrics> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(metrics_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

struct TrajectoryRow {
    int episode = 0;
    int t = 0;
    double x = 0, y = 0;
    double reward = 0;
    StepEvent event = StepEvent::None;
};

class TrajectoryWriter {
public:
    explicit TrajectoryWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot open trajectory file: " + path.string());
        out_ << "episode,t,x,y,reward,event\n";
    }

    void row(const TrajectoryRow& r) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%s", r.episode, r.t, r.x, r.y, r.reward,
                      event_name(r.event));
        out_ << buf << "\n";
    }

private:
    std::ofstream out_;
};

struct EvalSummary {
    std::string mode;
    int episodes = 0;
    int reached_assigned = 0;
    int assigned_first = 0;
    double assigned_first_rate = 0;
    double reach_rate = 0;
    double median_steps_to_assigned = 0;
    double mean_steps = 0;
    double collision_rate = 0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["mode"] = mode;
        j["episodes"] = episodes;
        j["reached_assigned"] = reached_assigned;
        j["assigned_first"] = assigned_first;
        j["assigned_first_rate"] = assigned_first_rate;
        j["reach_rate"] = reach_rate;
        j["median_steps_to_assigned"] = median_steps_to_assigned;
        j["mean_steps"] = mean_steps;
        j["collision_rate"] = collision_rate;
        return j;
    }
};

// Everything one run needs: environment, world model, SAC heads, replay and
// the optimizers, built from a RunConfig. The single RNG drives
// initialization, resets and noise, so a (seed, config) pair fixes the whole
// run.
class Engine {
public:
    explicit Engine(RunConfig cfg)
        : cfg_(std::move(cfg)),
          rng_(cfg_.seed),
          env_(cfg_.env),
          model_(cfg_.model, rng_),
          agent_(sac_config(cfg_), cfg_.model.h_dim, rng_),
          buffer_(cfg_.train.buffer_episodes) {
        opt_model_.lr = cfg_.train.lr_model;
        for (Adam* o : {&opt_pi_, &opt_q1_, &opt_q2_, &opt_v_, &opt_alpha_}) o->lr = cfg_.train.lr_rl;
    }

    static SacConfig sac_config(const RunConfig& cfg) {
        SacConfig sc;
        sc.action_dim = 2;
        sc.action_max = cfg.env.action_max;
        sc.gamma = cfg.train.gamma;
        sc.tau_ema = cfg.train.tau_ema;
        sc.ou_theta = cfg.train.ou_theta;
        sc.ou_sigma = cfg.train.ou_sigma;
        sc.hidden_width = cfg.train.rl_hidden_width;
        sc.hidden_layers = cfg.train.rl_hidden_layers;
        sc.target_entropy = -2.0;
        return sc;
    }

    static Engine from_checkpoint(const std::filesystem::path& path) {
        CheckpointManifest manifest = read_manifest(path);
        Engine engine(manifest.config);
        load_tensors(manifest, engine.named_stores());
        return engine;
    }

    const RunConfig& config() const { return cfg_; }
    Maze& env() { return env_; }
    WorldModel& model() { return model_; }
    SacAgent& agent() { return agent_; }
    ReplayBuffer& buffer() { return buffer_; }
    Rng& rng() { return rng_; }
    long updates_done() const { return updates_done_; }

    NamedStores named_stores() {
        return {{"model", &model_.params()}, {"pi", &agent_.pi_store()},   {"q1", &agent_.q1_store()},
                {"q2", &agent_.q2_store()},  {"v", &agent_.v_store()},     {"vt", &agent_.vt_store()},
                {"alpha", &agent_.alpha_store()}};
    }

    void save(const std::filesystem::path& path) {
        save_checkpoint(path, cfg_, named_stores(), rng_.state());
    }

    // One training rollout; pure OU-noise actions while exploring, policy
    // plus OU noise afterwards. Model and RL updates fire every
    // `update_every` environment steps of the learning phase.
    EpisodeMetrics run_training_episode(int episode_index, bool explore_phase) {
        Vec x = env_.reset(rng_);
        RnnState h = model_.zero_state();
        OUState ou = OUState::zeros(2);
        EpisodeRecord record;
        EpisodeMetrics m;
        m.episode = episode_index;
        m.goal = env_.state().active_goal;

        while (true) {
            const RnnState stored = h;
            const LatentGaussian q = model_.posterior(x, h);
            Vec z(q.mu.size());
            for (std::size_t i = 0; i < z.size(); ++i) z[i] = q.mu[i] + q.sigma[i] * rng_.normal();
            model_.rnn_step(z, h);

            Vec a;
            if (explore_phase) {
                a = {cfg_.env.action_max * std::tanh(ou.noise[0]), cfg_.env.action_max * std::tanh(ou.noise[1])};
                agent_.ou_step(ou, rng_);
            } else {
                a = agent_.act(h.h, /*explore=*/true, &ou, &rng_);
            }

            StepResult r = env_.step(a[0], a[1]);
            record.push_back({x, a, r.reward, r.done, stored});
            m.episode_return += r.reward;
            if (r.collided) ++m.collisions;
            ++m.steps;
            if (r.event == StepEvent::GoalReached) m.reached = true;
            x = std::move(r.observation);

            if (!explore_phase) {
                ++learn_steps_;
                if (learn_steps_ % cfg_.train.update_every == 0 && buffer_.size() > 0) run_updates();
            }
            if (r.done) break;
        }
        buffer_.push(std::move(record));
        return m;
    }

    void run_updates() {
        const auto batch = buffer_.sample_windows(cfg_.train.batch_sequences, cfg_.train.seq_len, rng_);
        const int threads = cfg_.train.threads;
        const auto eps_model = draw_eps(batch.size(), cfg_.train.seq_len, cfg_.model.z_dim);
        if (cfg_.train.loss_mode == "separate") {
            model_.train_step(batch, eps_model, opt_model_, threads);
            const auto eps_rl = draw_eps(batch.size(), cfg_.train.seq_len, cfg_.model.z_dim);
            const auto eps_pi = draw_eps(batch.size(), cfg_.train.seq_len, 2);
            agent_.update(batch, model_, eps_rl, eps_pi, opt_model_, opt_pi_, opt_q1_, opt_q2_, opt_v_,
                          opt_alpha_, threads);
        } else {
            // Summed mode: model gradient from the prediction loss is kept
            // and the RL gradients add onto it; one model step total.
            model_.params().zero_grad();
            model_.accumulate_free_energy_grads(batch, eps_model, threads);
            const auto eps_pi = draw_eps(batch.size(), cfg_.train.seq_len, 2);
            agent_.update(batch, model_, eps_model, eps_pi, opt_model_, opt_pi_, opt_q1_, opt_q2_, opt_v_,
                          opt_alpha_, threads, /*accumulate_model_grads=*/true);
            opt_model_.step(model_.params());
        }
        ++updates_done_;
    }

    void run_training(const std::filesystem::path& out_dir, std::ostream* log = nullptr) {
        std::filesystem::create_directories(out_dir);
        std::ofstream metrics(out_dir / "metrics.jsonl", std::ios::trunc);
        if (!metrics) throw std::runtime_error("cannot open metrics file for writing");
        for (int ep = 0; ep < cfg_.train.total_episodes; ++ep) {
            const bool explore = ep < cfg_.train.explore_episodes;
            const EpisodeMetrics m = run_training_episode(ep, explore);
            metrics << metrics_json(m).dump() << "\n";
            metrics.flush();
            if (log && (ep + 1) % 50 == 0) {
                (*log) << "episode " << (ep + 1) << "/" << cfg_.train.total_episodes << " return "
                       << m.episode_return << " steps " << m.steps << "\n";
                log->flush();
            }
            if (cfg_.train.checkpoint_every > 0 && (ep + 1) % cfg_.train.checkpoint_every == 0 &&
                ep + 1 < cfg_.train.total_episodes) {
                save(out_dir / ("ckpt_ep" + std::to_string(ep + 1) + ".json"));
            }
        }
        save(out_dir / "ckpt.json");
    }

    // Which goal areas an eval episode entered, and when.
    struct VisitTracker {
        std::optional<GoalId> first_goal;
        int steps_to_assigned = -1;

        void update(const Maze& env, GoalId assigned, int step) {
            const auto visited = env.which_goal(env.state().x, env.state().y);
            if (!visited) return;
            if (!first_goal) first_goal = *visited;
            if (steps_to_assigned < 0 && *visited == assigned) steps_to_assigned = step;
        }
    };

    // Habitual evaluation: the action comes from the prior-driven state (no
    // goal information anywhere); the carried state is corrected by the
    // posterior of each actual observation.
    EpisodeMetrics run_habitual_episode(int episode_index, Rng& eval_rng, TrajectoryWriter* traj,
                                        VisitTracker* visits) {
        Vec x = env_.reset(eval_rng);
        RnnState h = model_.zero_state();
        EpisodeMetrics m;
        m.episode = episode_index;
        m.goal = env_.state().active_goal;
        if (traj) traj->row({episode_index, 0, env_.state().x, env_.state().y, 0.0, StepEvent::None});

        const int cap = eval_cap();
        while (m.steps < cap) {
            const LatentGaussian p = model_.prior(h);
            RnnState act_state = h;
            model_.rnn_step(p.mu, act_state);
            const Vec a = agent_.act(act_state.h, /*explore=*/false);

            const LatentGaussian q = model_.posterior(x, h);
            model_.rnn_step(q.mu, h);

            StepResult r = env_.step(a[0], a[1]);
            ++m.steps;
            m.episode_return += r.reward;
            if (r.collided) ++m.collisions;
            if (r.event == StepEvent::GoalReached) m.reached = true;
            if (visits) visits->update(env_, m.goal, m.steps);
            if (traj) traj->row({episode_index, m.steps, env_.state().x, env_.state().y, r.reward, r.event});
            x = std::move(r.observation);
            if (r.done) break;
        }
        return m;
    }

    // Goal-directed evaluation: replans by error regression at every step
    // against the goal observation of the episode's assigned goal.
    EpisodeMetrics run_goal_episode(int episode_index, Rng& eval_rng, TrajectoryWriter* traj,
                                    VisitTracker* visits, std::ostream* trace = nullptr,
                                    std::ostream* pred_trace = nullptr) {
        Vec x = env_.reset(eval_rng);
        EpisodeMetrics m;
        m.episode = episode_index;
        m.mode = "goal-directed";
        m.goal = env_.state().active_goal;

        const Vec x_goal = cfg_.plan_goal_source == "env" ? env_.goal_observation(m.goal)
                                                          : experience_goal_observation(m.goal, eval_rng);
        GoalDirectedController ctrl(model_, agent_, cfg_.plan);
        ctrl.begin_episode(x, x_goal);
        if (traj) traj->row({episode_index, 0, env_.state().x, env_.state().y, 0.0, StepEvent::None});

        const int cap = eval_cap();
        std::vector<PlanResult> batch_results;
        while (m.steps < cap) {
            PlanResult selected;
            const Vec a = ctrl.act(x, eval_rng, &selected, trace ? &batch_results : nullptr);
            if (trace) {
                for (const auto& r : batch_results) {
                    char buf[64];
                    (*trace) << m.steps << "," << r.member;
                    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", r.free_energy, r.expected_steps);
                    (*trace) << buf;
                    for (double c : r.c) {
                        std::snprintf(buf, sizeof(buf), ",%.17g", c);
                        (*trace) << buf;
                    }
                    (*trace) << "\n";
                }
            }
            if (pred_trace) {
                for (std::size_t tau = 0; tau < selected.predicted_obs.size(); ++tau) {
                    (*pred_trace) << m.steps << "," << tau;
                    char buf[32];
                    for (double v : selected.predicted_obs[tau]) {
                        std::snprintf(buf, sizeof(buf), ",%.6g", v);
                        (*pred_trace) << buf;
                    }
                    (*pred_trace) << "\n";
                }
            }

            StepResult r = env_.step(a[0], a[1]);
            ++m.steps;
            m.episode_return += r.reward;
            if (r.collided) ++m.collisions;
            if (r.event == StepEvent::GoalReached) m.reached = true;
            if (visits) visits->update(env_, m.goal, m.steps);
            if (traj) traj->row({episode_index, m.steps, env_.state().x, env_.state().y, r.reward, r.event});
            x = std::move(r.observation);
            if (r.done) break;
        }
        return m;
    }

    EvalSummary run_eval(const std::string& mode, int episodes, const std::filesystem::path& out_dir,
                         std::uint64_t seed, std::ostream* log = nullptr) {
        std::filesystem::create_directories(out_dir);
        std::ofstream metrics(out_dir / "metrics.jsonl", std::ios::trunc);
        TrajectoryWriter traj(out_dir / "trajectories.csv");
        Rng eval_rng(seed);

        EvalSummary s;
        s.mode = mode;
        s.episodes = episodes;
        std::vector<double> steps_to_assigned;
        long total_steps = 0, total_collisions = 0;
        for (int ep = 0; ep < episodes; ++ep) {
            VisitTracker visits;
            const EpisodeMetrics m = mode == "habitual"
                                         ? run_habitual_episode(ep, eval_rng, &traj, &visits)
                                         : run_goal_episode(ep, eval_rng, &traj, &visits);
            metrics << metrics_json(m).dump() << "\n";
            if (m.reached) ++s.reached_assigned;
            if (visits.first_goal && *visits.first_goal == m.goal) ++s.assigned_first;
            steps_to_assigned.push_back(visits.steps_to_assigned > 0 ? visits.steps_to_assigned
                                                                     : eval_cap() + 1);
            total_steps += m.steps;
            total_collisions += m.collisions;
            if (log && (ep + 1) % 10 == 0) {
                (*log) << mode << " eval " << (ep + 1) << "/" << episodes << "\n";
                log->flush();
            }
        }
        s.assigned_first_rate = static_cast<double>(s.assigned_first) / episodes;
        s.reach_rate = static_cast<double>(s.reached_assigned) / episodes;
        std::sort(steps_to_assigned.begin(), steps_to_assigned.end());
        s.median_steps_to_assigned = steps_to_assigned[steps_to_assigned.size() / 2];
        s.mean_steps = static_cast<double>(total_steps) / episodes;
        s.collision_rate = total_steps > 0 ? static_cast<double>(total_collisions) / total_steps : 0.0;

        std::ofstream summary(out_dir / "summary.json", std::ios::trunc);
        summary << s.to_json().dump(2) << "\n";
        return s;
    }

private:
    RunConfig cfg_;
    Rng rng_;
    Maze env_;
    WorldModel model_;
    SacAgent agent_;
    ReplayBuffer buffer_;
    Adam opt_model_, opt_pi_, opt_q1_, opt_q2_, opt_v_, opt_alpha_;
    long learn_steps_ = 0;
    long updates_done_ = 0;

public:
    int eval_cap() const { return cfg_.eval_max_steps > 0 ? cfg_.eval_max_steps : cfg_.env.max_steps; }

private:

    std::vector<std::vector<Vec>> draw_eps(std::size_t windows, int steps, int dim) {
        std::vector<std::vector<Vec>> eps(windows);
        for (auto& w : eps) {
            w.assign(steps, Vec(dim));
            for (auto& v : w)
                for (auto& e : v) e = rng_.normal();
        }
        return eps;
    }

    // Goal observation taken from experience instead of the environment
    // query: random-walk episodes until the robot stands in the target area,
    // then use that step's observation.
    Vec experience_goal_observation(GoalId goal, Rng& rng) {
        for (int ep = 0; ep < 500; ++ep) {
            Maze probe(cfg_.env);
            Vec x = probe.reset(rng);
            OUState ou = OUState::zeros(2);
            while (true) {
                const auto here = probe.which_goal(probe.state().x, probe.state().y);
                if (here && *here == goal) return x;
                Vec a{cfg_.env.action_max * std::tanh(ou.noise[0]), cfg_.env.action_max * std::tanh(ou.noise[1])};
                agent_.ou_step(ou, rng);
                StepResult r = probe.step(a[0], a[1]);
                x = std::move(r.observation);
                if (r.done) break;
            }
        }
        throw std::runtime_error("experience goal sampling never reached the goal area");
    }
};

} // namespace aifmaze

#endif
