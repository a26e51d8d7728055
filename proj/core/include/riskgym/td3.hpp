#ifndef RISKGYM_TD3_HPP_
#define RISKGYM_TD3_HPP_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "riskgym/env.hpp"
#include "riskgym/rng.hpp"

namespace riskgym {

/// Dense feed-forward network: ReLU hidden layers, tanh or identity output.
class Mlp {
 public:
  enum class Output { Tanh, Identity };

  struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;  // out
  };

  /// Per-layer activations recorded during a forward pass, for backprop.
  struct Trace {
    std::vector<std::vector<double>> acts;  // acts[0] = input
  };

  struct Grad {
    std::vector<std::vector<double>> dw;
    std::vector<std::vector<double>> db;

    void init_like(const Mlp& net);
    void zero();
  };

  Mlp() = default;
  Mlp(std::vector<int> dims, Output output, Rng& rng);

  const std::vector<int>& dims() const { return dims_; }
  Output output() const { return output_; }
  int in_dim() const { return dims_.front(); }
  int out_dim() const { return dims_.back(); }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::vector<double> forward(std::span<const double> input) const;
  void forward(std::span<const double> input, Trace& trace) const;

  /// Exact reverse-mode gradients of the forward map. Accumulates into grad;
  /// optionally also returns dL/d(input).
  void backward(const Trace& trace, std::span<const double> upstream,
                Grad& grad, std::vector<double>* input_grad = nullptr) const;

 private:
  std::vector<int> dims_;
  Output output_ = Output::Identity;
  std::vector<Layer> layers_;
};

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m_w, v_w, m_b, v_b;

  void init_like(const Mlp& net);
  void apply(Mlp& net, const Mlp::Grad& grad);
};

struct Transition {
  std::vector<double> s;
  Action a;
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;
};

/// Ring buffer of transitions; the oldest record is overwritten first.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim);

  void add(std::span<const double> s, const Action& a, double r,
           std::span<const double> s_next, bool done);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  int obs_dim() const { return obs_dim_; }

  std::span<const double> state(std::size_t i) const;
  std::span<const double> next_state(std::size_t i) const;
  Action action(std::size_t i) const;
  double reward(std::size_t i) const { return r_[i]; }
  bool done(std::size_t i) const { return done_[i] != 0; }

 private:
  std::size_t capacity_;
  int obs_dim_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
  std::vector<double> s_, a_, s2_, r_;
  std::vector<char> done_;
};

struct Td3Config {
  double gamma = 0.99;
  int batch_size = 32;
  std::size_t buffer_capacity = 100000;
  double tau_soft = 0.001;
  double target_noise = 0.2;
  double noise_clip = 0.5;
  int policy_delay = 2;
  double lr_actor = 1e-4;
  double lr_critic = 1e-4;
  double explore_sigma = 0.1;
  long warmup_steps = 10000;
  int hidden = 128;
};

/// TD3 agent: actor, twin critics, their target copies, and Adam state.
class Td3Agent {
 public:
  Td3Agent(int obs_dim, const Td3Config& cfg, Rng& init_rng);

  const Td3Config& config() const { return cfg_; }
  const Mlp& actor() const { return actor_; }
  Mlp& actor() { return actor_; }
  const Mlp& critic1() const { return critic1_; }
  const Mlp& critic2() const { return critic2_; }
  const Mlp& target_actor() const { return target_actor_; }
  const Mlp& target_critic1() const { return target_critic1_; }
  const Mlp& target_critic2() const { return target_critic2_; }
  long learn_steps() const { return learn_steps_; }
  long actor_opt_step() const { return adam_actor_.step; }

  Action select_action(std::span<const double> s, double sigma, Rng& rng) const;

  /// Target-policy action: mu'(s') plus clipped smoothing noise, clamped to
  /// the action box.
  Action target_action(std::span<const double> s_next, Rng& rng) const;

  struct Batch {
    const ReplayBuffer* buffer = nullptr;
    std::vector<std::size_t> idx;
  };
  Batch sample_batch(const ReplayBuffer& buffer, Rng& rng) const;

  /// y_i = r_i + gamma (1 - done_i) min_j Q'_j(s', a~).
  std::vector<double> critic_targets(const Batch& batch, Rng& rng) const;

  /// One Adam step on each critic toward the shared targets; returns the
  /// mean squared error before the step.
  double update_critics(const Batch& batch, std::span<const double> targets);

  /// Delayed policy update plus Polyak target blending. step counts learning
  /// updates; the body runs only when step % policy_delay == 0.
  void update_actor_and_targets(const Batch& batch, long step);

  /// Full learning step: sample, critic update, delayed actor/target update.
  double learn(const ReplayBuffer& buffer, Rng& rng);

 private:
  Td3Config cfg_;
  Mlp actor_, critic1_, critic2_;
  Mlp target_actor_, target_critic1_, target_critic2_;
  AdamState adam_actor_, adam_critic1_, adam_critic2_;
  long learn_steps_ = 0;

  // Scratch reused across updates.
  mutable Mlp::Trace tr_a_, tr_c_;
  mutable Mlp::Grad g_c1_, g_c2_, g_actor_, g_scratch_;
  mutable std::vector<double> sa_;
};

struct EvalPoint {
  long step = 0;
  double success_ratio = 0.0;
  double collision_rate = 0.0;
  double mean_episode_len = 0.0;
};

struct TrainOptions {
  long budget_steps = 1000000;
  long eval_interval = 20000;
};

using EvalFn = std::function<EvalPoint(const Mlp& actor, long step)>;

struct TrainResult {
  Td3Agent agent;
  std::vector<EvalPoint> metrics;
};

/// Seed-deterministic training loop: one learning update per environment
/// step after warmup, evaluation every eval_interval steps.
TrainResult train(Environment& env, const Td3Config& cfg,
                  const TrainOptions& opts, std::uint64_t seed,
                  const EvalFn& eval = nullptr);

/// Actor checkpoint: layer dims, row-major weights and biases, Adam step.
void save_checkpoint(const Mlp& actor, long opt_step, const std::string& path);
struct Checkpoint {
  Mlp actor;
  long opt_step = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace riskgym

#endif  // RISKGYM_TD3_HPP_
