#include <benchmark/benchmark.h>

#include "riskgym/env.hpp"
#include "riskgym/risk.hpp"
#include "riskgym/scenario.hpp"
#include "riskgym/td3.hpp"

namespace {

using namespace riskgym;

Scenario make_scenario() {
  const EnvConfig cfg = EnvConfig::point_mass();
  ScenarioPool pool = generate_pool(1, cfg.model, cfg.cr_cfg, cfg.ranges, 7, 1);
  return pool.scenarios().front();
}

void bm_collision_risk(benchmark::State& state) {
  const EnvConfig cfg = EnvConfig::point_mass();
  const Scenario sc = make_scenario();
  AgentState agent;
  agent.vel.u = sc.u0;
  agent.vel.r = sc.r0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        collision_risk(agent, sc.obstacles, cfg.model, cfg.cr_cfg));
  }
}
BENCHMARK(bm_collision_risk);

void bm_env_step(benchmark::State& state) {
  const EnvConfig cfg = EnvConfig::point_mass();
  const Scenario sc = make_scenario();
  ScenarioEnv env(cfg, [&sc](Rng&) -> const Scenario& { return sc; });
  env.reset_to(sc);
  const Action a{0.1, 0.0};
  for (auto _ : state) {
    const StepResult res = env.step(a);
    benchmark::DoNotOptimize(res.reward);
    if (res.done) env.reset_to(sc);
  }
}
BENCHMARK(bm_env_step);

void bm_td3_learn(benchmark::State& state) {
  const EnvConfig cfg = EnvConfig::point_mass();
  Td3Config td3;
  Rng init_rng = derived_rng(7, 2);
  Td3Agent agent(cfg.obs_dim(), td3, init_rng);
  ReplayBuffer buf(td3.buffer_capacity, cfg.obs_dim());
  Rng rng = derived_rng(7, 3);
  std::vector<double> obs(cfg.obs_dim()), next(cfg.obs_dim());
  for (int i = 0; i < 1000; ++i) {
    for (auto& v : obs) v = uniform(rng, -1.0, 1.0);
    for (auto& v : next) v = uniform(rng, -1.0, 1.0);
    buf.add(obs, Action{uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)},
            uniform(rng, -1.0, 1.0), next, false);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(agent.learn(buf, rng));
  }
}
BENCHMARK(bm_td3_learn);

}  // namespace

BENCHMARK_MAIN();
