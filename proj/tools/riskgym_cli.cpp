// Command line front end: pool generation, training, validation, the
// baseline environment, the CR audit, study orchestration, and episode
// traces.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "riskgym/harness.hpp"

namespace {

using namespace riskgym;

ScenarioPool load_pool_for(const std::string& path, const EnvConfig& cfg) {
  return ScenarioPool::load(path,
                            env_digest(cfg.model, cfg.cr_cfg, cfg.ranges));
}

ValidationSuite suite_from_file(const std::string& path, const EnvConfig& cfg) {
  const ScenarioPool pool = load_pool_for(path, cfg);
  ValidationSuite suite;
  suite.scenarios = pool.scenarios();
  return suite;
}

void save_suite(const ValidationSuite& suite, const EnvConfig& cfg,
                const std::string& path) {
  ScenarioPool as_pool(suite.scenarios,
                       env_digest(cfg.model, cfg.cr_cfg, cfg.ranges),
                       cfg.cr_cfg);
  as_pool.save(path);
}

int run(int argc, char** argv) {
  CLI::App app{"riskgym: collision-risk-driven obstacle avoidance training"};
  app.require_subcommand(1);

  std::string env_kind = "point-mass";
  app.add_option("--env", env_kind,
                 "environment kind: point-mass | robot | baseline-box")
      ->capture_default_str();

  // gen-pool
  auto* gen = app.add_subcommand("gen-pool", "generate a labeled scenario pool");
  long gen_count = 100000;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "pool.jsonl";
  gen->add_option("--count", gen_count)->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--out", gen_out)->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "train a TD3 agent on pool scenarios");
  std::string tr_pool, tr_dist = "preset:4", tr_ratio = "1,1,1";
  long tr_steps = 1000000, tr_eval = 20000;
  int tr_val_size = 500;
  std::uint64_t tr_seed = 1;
  std::string tr_out = "run_out";
  tr->add_option("--pool", tr_pool)->required();
  tr->add_option("--dist", tr_dist, "preset:K or interval:lo,hi")
      ->capture_default_str();
  tr->add_option("--ratio", tr_ratio, "p1,p2,p3")->capture_default_str();
  tr->add_option("--steps", tr_steps)->capture_default_str();
  tr->add_option("--eval-interval", tr_eval)->capture_default_str();
  tr->add_option("--validation-size", tr_val_size)->capture_default_str();
  tr->add_option("--seed", tr_seed)->capture_default_str();
  tr->add_option("--out", tr_out)->capture_default_str();

  // validate
  auto* val = app.add_subcommand("validate", "evaluate a checkpoint on a suite");
  std::string val_ckpt, val_suite, val_out;
  double val_sigma = 0.0;
  val->add_option("--checkpoint", val_ckpt)->required();
  val->add_option("--suite", val_suite, "suite file (pool format)")->required();
  val->add_option("--sigma-n", val_sigma)->capture_default_str();
  val->add_option("--out", val_out, "optional result CSV");

  // baseline-train
  auto* bt = app.add_subcommand("baseline-train",
                                "train the random-initialization baseline");
  std::string bt_pool, bt_out = "baseline_out";
  long bt_steps = 1000000, bt_eval = 20000;
  int bt_val_size = 500, bt_obstacles = 5;
  double bt_edge = 35.0;
  std::uint64_t bt_seed = 1;
  bt->add_option("--pool", bt_pool, "pool used to build the validation suite")
      ->required();
  bt->add_option("--steps", bt_steps)->capture_default_str();
  bt->add_option("--edge", bt_edge)->capture_default_str();
  bt->add_option("--obstacles", bt_obstacles)->capture_default_str();
  bt->add_option("--eval-interval", bt_eval)->capture_default_str();
  bt->add_option("--validation-size", bt_val_size)->capture_default_str();
  bt->add_option("--seed", bt_seed)->capture_default_str();
  bt->add_option("--out", bt_out)->capture_default_str();

  // audit-baseline
  auto* audit = app.add_subcommand(
      "audit-baseline", "CR distribution of random box initializations");
  long audit_samples = 64000;
  std::uint64_t audit_seed = 1;
  double audit_edge = 35.0;
  int audit_obstacles = 5;
  std::string audit_out;
  audit->add_option("--samples", audit_samples)->capture_default_str();
  audit->add_option("--seed", audit_seed)->capture_default_str();
  audit->add_option("--edge", audit_edge)->capture_default_str();
  audit->add_option("--obstacles", audit_obstacles)->capture_default_str();
  audit->add_option("--out", audit_out, "optional histogram CSV");

  // study
  auto* study = app.add_subcommand("study", "run a full experiment grid");
  std::string study_config;
  study->add_option("--config", study_config)->required();

  // trace
  auto* trace = app.add_subcommand("trace", "export one episode trace CSV");
  std::string trace_ckpt, trace_suite, trace_out = "episode.csv";
  long trace_id = 0;
  trace->add_option("--checkpoint", trace_ckpt)->required();
  trace->add_option("--suite", trace_suite, "suite or pool file")->required();
  trace->add_option("--scenario-id", trace_id)->capture_default_str();
  trace->add_option("--out", trace_out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*gen) {
    const EnvConfig cfg = env_config_for(env_kind);
    const ScenarioPool pool =
        generate_pool(gen_count, cfg.model, cfg.cr_cfg, cfg.ranges, gen_seed,
                      worker_count());
    pool.save(gen_out);
    std::cout << "wrote " << pool.size() << " scenarios to " << gen_out << '\n';
  } else if (*tr) {
    const EnvConfig cfg = env_config_for(env_kind);
    const ScenarioPool pool = load_pool_for(tr_pool, cfg);
    const CrDistribution dist = parse_dist_spec(tr_dist);
    const ObstacleRatio ratio = parse_ratio_spec(tr_ratio);
    const ValidationSuite suite =
        build_validation_suite(pool, tr_val_size, tr_seed);
    std::filesystem::create_directories(tr_out);
    save_suite(suite, cfg, tr_out + "/suite.jsonl");
    ScenarioEnv env(cfg, [&pool, &dist, &ratio](Rng& rng) -> const Scenario& {
      return pool.draw(dist, ratio, rng);
    });
    const EvalFn eval = [&](const Mlp& actor, long step) {
      const EvalStats st = evaluate(actor, suite, cfg);
      std::cout << "step " << step << " success " << st.success_ratio << '\n';
      return EvalPoint{step, st.success_ratio, st.collision_rate,
                       st.mean_episode_len};
    };
    const TrainResult res =
        train(env, Td3Config{}, {tr_steps, tr_eval}, tr_seed, eval);
    write_metrics_csv(tr_out + "/metrics.csv", suite.digest(), res.metrics);
    save_checkpoint(res.agent.actor(), res.agent.actor_opt_step(),
                    tr_out + "/actor.json");
    std::cout << "wrote " << tr_out << "/metrics.csv and actor.json\n";
  } else if (*val) {
    const EnvConfig cfg = env_config_for(env_kind);
    const ValidationSuite suite = suite_from_file(val_suite, cfg);
    const Checkpoint ckpt = load_checkpoint(val_ckpt);
    const EvalStats st =
        evaluate(ckpt.actor, suite, cfg, val_sigma, suite.digest());
    std::printf("success_ratio %.6f collision_rate %.6f mean_episode_len %.2f\n",
                st.success_ratio, st.collision_rate, st.mean_episode_len);
    if (!val_out.empty()) {
      write_metrics_csv(val_out, suite.digest(),
                        {{0, st.success_ratio, st.collision_rate,
                          st.mean_episode_len}});
    }
  } else if (*bt) {
    const EnvConfig cfg = env_config_for("baseline-box");
    const ScenarioPool pool = load_pool_for(bt_pool, cfg);
    const ValidationSuite suite =
        build_validation_suite(pool, bt_val_size, bt_seed);
    std::filesystem::create_directories(bt_out);
    save_suite(suite, cfg, bt_out + "/suite.jsonl");
    BoxEnv env(cfg, bt_edge, bt_obstacles);
    const EvalFn eval = [&](const Mlp& actor, long step) {
      const EvalStats st = evaluate(actor, suite, cfg);
      std::cout << "step " << step << " success " << st.success_ratio << '\n';
      return EvalPoint{step, st.success_ratio, st.collision_rate,
                       st.mean_episode_len};
    };
    const TrainResult res =
        train(env, Td3Config{}, {bt_steps, bt_eval}, bt_seed, eval);
    write_metrics_csv(bt_out + "/metrics.csv", suite.digest(), res.metrics);
    save_checkpoint(res.agent.actor(), res.agent.actor_opt_step(),
                    bt_out + "/actor.json");
    std::cout << "wrote " << bt_out << "/metrics.csv and actor.json\n";
  } else if (*audit) {
    const EnvConfig cfg = env_config_for(env_kind);
    const AuditResult res =
        audit_random_init(cfg, audit_samples, audit_seed, audit_edge,
                          audit_obstacles, worker_count());
    std::printf("samples %ld\nmass at CR=0: %.4f\nmass at CR=1: %.4f\n",
                res.samples, res.mass_zero, res.mass_one);
    if (!audit_out.empty()) {
      std::ofstream out(audit_out);
      out << "threats,bin_lo,bin_hi,mass\n";
      for (int row = 0; row < 3; ++row) {
        for (int b = 0; b < kCrBins; ++b) {
          out << row + 1 << ',' << b / 10.0 << ',' << (b + 1) / 10.0 << ','
              << res.histogram[row][b] << '\n';
        }
      }
    }
  } else if (*study) {
    const RunConfig cfg = parse_run_config(study_config);
    run_study(cfg);
    std::cout << "study written to " << cfg.out_dir << '\n';
  } else if (*trace) {
    const EnvConfig cfg = env_config_for(env_kind);
    const ValidationSuite suite = suite_from_file(trace_suite, cfg);
    if (trace_id < 0 ||
        trace_id >= static_cast<long>(suite.scenarios.size())) {
      throw std::invalid_argument("scenario id out of range");
    }
    const Checkpoint ckpt = load_checkpoint(trace_ckpt);
    run_traced_episode(ckpt.actor, suite.scenarios[trace_id], cfg, trace_out);
    std::cout << "wrote " << trace_out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const riskgym::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
