// Command-line driver: training, evaluation, plan tracing, trajectory
// rendering and the gradient verification suite.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "aifmaze/svg.hpp"
#include "aifmaze/trainer.hpp"
#include "aifmaze/verification.hpp"

namespace fs = std::filesystem;
using namespace aifmaze;

namespace {

RunConfig load_config_file(const std::string& path) {
    if (path.empty()) {
        RunConfig cfg;
        cfg.finalize();
        return cfg;
    }
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

void apply_seed_override(RunConfig& cfg) {
    if (const char* s = std::getenv("AIFMAZE_SEED")) {
        cfg.seed = std::strtoull(s, nullptr, 10);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variational-RNN maze agent: habitual RL and goal-directed planning"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "run", checkpoint_path, mode = "habitual";
    std::string goal = "se", traj_path, svg_path, trace_path, pred_path;
    int episodes = 100;
    std::uint64_t eval_seed = 1;

    auto* train = app.add_subcommand("train", "train world model and policy");
    train->add_option("--config", config_path, "run configuration file");
    train->add_option("--out", out_dir, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint manifest")->required();
    eval->add_option("--mode", mode, "habitual | goal")->check(CLI::IsMember({"habitual", "goal"}));
    eval->add_option("--episodes", episodes, "number of evaluation episodes");
    eval->add_option("--out", out_dir, "output directory");
    eval->add_option("--seed", eval_seed, "evaluation seed");
    eval->add_option("--config", config_path, "override run configuration (optional)");

    auto* plan_trace = app.add_subcommand("plan-trace", "dump per-step plan batches for one episode");
    plan_trace->add_option("--checkpoint", checkpoint_path, "checkpoint manifest")->required();
    plan_trace->add_option("--goal", goal, "se | nw")->check(CLI::IsMember({"se", "nw"}));
    plan_trace->add_option("--out", trace_path, "members CSV (step,member,F,l,c_0..)")->required();
    plan_trace->add_option("--pred-out", pred_path, "predicted observations CSV");
    plan_trace->add_option("--seed", eval_seed, "episode seed");

    auto* render = app.add_subcommand("render", "render trajectories to SVG");
    render->add_option("--trajectories", traj_path, "trajectory CSV")->required();
    render->add_option("--out", svg_path, "output SVG")->required();
    render->add_option("--config", config_path, "run configuration for the maze geometry");

    auto* gradcheck = app.add_subcommand("grad-check", "run the gradient verification suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            RunConfig cfg = load_config_file(config_path);
            apply_seed_override(cfg);
            fs::create_directories(out_dir);
            {
                std::ofstream used(fs::path(out_dir) / "config_used.cfg", std::ios::trunc);
                used << serialize_config(cfg);
            }
            Engine engine(cfg);
            engine.run_training(out_dir, &std::cout);
            std::cout << "checkpoint: " << (fs::path(out_dir) / "ckpt.json").string() << "\n";
        } else if (*eval) {
            Engine engine = config_path.empty()
                                ? Engine::from_checkpoint(checkpoint_path)
                                : [&] {
                                      CheckpointManifest m = read_manifest(checkpoint_path);
                                      RunConfig cfg = load_config_file(config_path);
                                      Engine e(cfg);
                                      load_tensors(m, e.named_stores());
                                      return e;
                                  }();
            if (const char* s = std::getenv("AIFMAZE_SEED")) eval_seed = std::strtoull(s, nullptr, 10);
            const std::string eval_mode = mode == "goal" ? "goal-directed" : "habitual";
            const EvalSummary s = engine.run_eval(eval_mode, episodes, out_dir, eval_seed, &std::cout);
            std::cout << s.to_json().dump(2) << "\n";
        } else if (*plan_trace) {
            Engine engine = Engine::from_checkpoint(checkpoint_path);
            if (const char* s = std::getenv("AIFMAZE_SEED")) eval_seed = std::strtoull(s, nullptr, 10);
            std::ofstream trace(trace_path, std::ios::trunc);
            if (!trace) throw std::runtime_error("cannot open " + trace_path);
            trace << "step,member,F,l";
            for (int i = 0; i < engine.config().plan.horizon; ++i) trace << ",c_" << i;
            trace << "\n";
            std::ofstream pred;
            if (!pred_path.empty()) {
                pred.open(pred_path, std::ios::trunc);
                pred << "step,tau,depths...\n";
            }
            // One goal-directed episode against the requested goal area:
            // scan seeds until the episode's random goal assignment matches.
            const GoalId want = goal == "se" ? GoalId::SE : GoalId::NW;
            std::uint64_t seed = eval_seed;
            for (;; ++seed) {
                Rng probe(seed);
                Maze maze(engine.config().env);
                maze.reset(probe);
                if (maze.state().active_goal == want) break;
            }
            Rng rng(seed);
            auto m = engine.run_goal_episode(0, rng, nullptr, nullptr, &trace,
                                             pred_path.empty() ? nullptr : &pred);
            std::cout << "episode steps " << m.steps << " return " << m.episode_return << " reached "
                      << (m.reached ? "yes" : "no") << "\n";
        } else if (*render) {
            RunConfig cfg = load_config_file(config_path);
            render_trajectories_svg(cfg.env, read_trajectory_csv(traj_path), svg_path);
            std::cout << "wrote " << svg_path << "\n";
        } else if (*gradcheck) {
            const auto results = run_gradient_suite(0);
            bool all_pass = true;
            for (const auto& r : results) {
                std::printf("%-24s max rel err %.3e  (tol %.0e)  %s\n", r.name.c_str(), r.max_rel_err,
                            r.tolerance, r.pass ? "PASS" : "FAIL");
                all_pass = all_pass && r.pass;
            }
            return all_pass ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
