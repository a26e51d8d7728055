#include "riskgym/td3.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace riskgym {

namespace {

constexpr int kActDim = 2;

double clamp1(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

Mlp::Mlp(std::vector<int> dims, Output output, Rng& rng)
    : dims_(std::move(dims)), output_(output) {
  if (dims_.size() < 2) throw std::invalid_argument("Mlp needs >= 2 dims");
  layers_.resize(dims_.size() - 1);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Layer& layer = layers_[l];
    layer.in = dims_[l];
    layer.out = dims_[l + 1];
    layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
    layer.b.resize(layer.out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (double& v : layer.w) v = uniform(rng, -bound, bound);
    for (double& v : layer.b) v = uniform(rng, -bound, bound);
  }
}

void Mlp::forward(std::span<const double> input, Trace& trace) const {
  if (static_cast<int>(input.size()) != in_dim()) {
    throw std::invalid_argument("Mlp::forward: input size mismatch");
  }
  trace.acts.resize(layers_.size() + 1);
  trace.acts[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const std::vector<double>& x = trace.acts[l];
    std::vector<double>& y = trace.acts[l + 1];
    y.resize(layer.out);
    const bool last = (l + 1 == layers_.size());
    for (int o = 0; o < layer.out; ++o) {
      const double* wr = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      double z = layer.b[o];
      for (int i = 0; i < layer.in; ++i) z += wr[i] * x[i];
      if (last) {
        y[o] = (output_ == Output::Tanh) ? std::tanh(z) : z;
      } else {
        y[o] = z > 0.0 ? z : 0.0;
      }
    }
  }
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  Trace tr;
  forward(input, tr);
  return tr.acts.back();
}

void Mlp::Grad::init_like(const Mlp& net) {
  dw.resize(net.layers().size());
  db.resize(net.layers().size());
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    dw[l].assign(net.layers()[l].w.size(), 0.0);
    db[l].assign(net.layers()[l].b.size(), 0.0);
  }
}

void Mlp::Grad::zero() {
  for (auto& v : dw) std::fill(v.begin(), v.end(), 0.0);
  for (auto& v : db) std::fill(v.begin(), v.end(), 0.0);
}

void Mlp::backward(const Trace& trace, std::span<const double> upstream,
                   Grad& grad, std::vector<double>* input_grad) const {
  if (trace.acts.size() != layers_.size() + 1) {
    throw std::invalid_argument("Mlp::backward: trace does not match net");
  }
  if (static_cast<int>(upstream.size()) != out_dim()) {
    throw std::invalid_argument("Mlp::backward: upstream size mismatch");
  }
  std::vector<double> dz(upstream.begin(), upstream.end());
  if (output_ == Output::Tanh) {
    const std::vector<double>& y = trace.acts.back();
    for (std::size_t o = 0; o < dz.size(); ++o) dz[o] *= 1.0 - y[o] * y[o];
  }
  std::vector<double> da;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& layer = layers_[li];
    const std::vector<double>& x = trace.acts[li];
    double* dwl = grad.dw[li].data();
    for (int o = 0; o < layer.out; ++o) {
      const double g = dz[o];
      grad.db[li][o] += g;
      double* dwr = dwl + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) dwr[i] += g * x[i];
    }
    const bool need_down = (li > 0) || (input_grad != nullptr);
    if (!need_down) break;
    da.assign(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double g = dz[o];
      const double* wr = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) da[i] += g * wr[i];
    }
    if (li > 0) {
      dz.resize(layer.in);
      for (int i = 0; i < layer.in; ++i) dz[i] = x[i] > 0.0 ? da[i] : 0.0;
    } else {
      *input_grad = da;
    }
  }
}

void AdamState::init_like(const Mlp& net) {
  m_w.resize(net.layers().size());
  v_w.resize(net.layers().size());
  m_b.resize(net.layers().size());
  v_b.resize(net.layers().size());
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    m_w[l].assign(net.layers()[l].w.size(), 0.0);
    v_w[l].assign(net.layers()[l].w.size(), 0.0);
    m_b[l].assign(net.layers()[l].b.size(), 0.0);
    v_b[l].assign(net.layers()[l].b.size(), 0.0);
  }
}

void AdamState::apply(Mlp& net, const Mlp::Grad& grad) {
  ++step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                      std::vector<double>& m, std::vector<double>& v) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
      }
    };
    update(net.layers()[l].w, grad.dw[l], m_w[l], v_w[l]);
    update(net.layers()[l].b, grad.db[l], m_b[l], v_b[l]);
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim)
    : capacity_(capacity), obs_dim_(obs_dim) {
  s_.resize(capacity_ * obs_dim_);
  s2_.resize(capacity_ * obs_dim_);
  a_.resize(capacity_ * kActDim);
  r_.resize(capacity_);
  done_.resize(capacity_);
}

void ReplayBuffer::add(std::span<const double> s, const Action& a, double r,
                       std::span<const double> s_next, bool done) {
  if (static_cast<int>(s.size()) != obs_dim_ ||
      static_cast<int>(s_next.size()) != obs_dim_) {
    throw std::invalid_argument("ReplayBuffer::add: state size mismatch");
  }
  std::copy(s.begin(), s.end(), s_.begin() + cursor_ * obs_dim_);
  std::copy(s_next.begin(), s_next.end(), s2_.begin() + cursor_ * obs_dim_);
  a_[cursor_ * kActDim] = a.a_u;
  a_[cursor_ * kActDim + 1] = a.a_r;
  r_[cursor_] = r;
  done_[cursor_] = done ? 1 : 0;
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

std::span<const double> ReplayBuffer::state(std::size_t i) const {
  return {s_.data() + i * obs_dim_, static_cast<std::size_t>(obs_dim_)};
}
std::span<const double> ReplayBuffer::next_state(std::size_t i) const {
  return {s2_.data() + i * obs_dim_, static_cast<std::size_t>(obs_dim_)};
}
Action ReplayBuffer::action(std::size_t i) const {
  return {a_[i * kActDim], a_[i * kActDim + 1]};
}

Td3Agent::Td3Agent(int obs_dim, const Td3Config& cfg, Rng& init_rng)
    : cfg_(cfg),
      actor_({obs_dim, cfg.hidden, cfg.hidden, kActDim}, Mlp::Output::Tanh,
             init_rng),
      critic1_({obs_dim + kActDim, cfg.hidden, cfg.hidden, 1},
               Mlp::Output::Identity, init_rng),
      critic2_({obs_dim + kActDim, cfg.hidden, cfg.hidden, 1},
               Mlp::Output::Identity, init_rng),
      target_actor_(actor_),
      target_critic1_(critic1_),
      target_critic2_(critic2_) {
  adam_actor_.lr = cfg.lr_actor;
  adam_critic1_.lr = cfg.lr_critic;
  adam_critic2_.lr = cfg.lr_critic;
  adam_actor_.init_like(actor_);
  adam_critic1_.init_like(critic1_);
  adam_critic2_.init_like(critic2_);
  g_c1_.init_like(critic1_);
  g_c2_.init_like(critic2_);
  g_actor_.init_like(actor_);
  g_scratch_.init_like(critic1_);
}

Action Td3Agent::select_action(std::span<const double> s, double sigma,
                               Rng& rng) const {
  const std::vector<double> mu = actor_.forward(s);
  Action a{mu[0], mu[1]};
  if (sigma > 0.0) {
    a.a_u += gaussian(rng, 0.0, sigma);
    a.a_r += gaussian(rng, 0.0, sigma);
  }
  a.a_u = clamp1(a.a_u);
  a.a_r = clamp1(a.a_r);
  return a;
}

Action Td3Agent::target_action(std::span<const double> s_next, Rng& rng) const {
  const std::vector<double> mu = target_actor_.forward(s_next);
  const double c = cfg_.noise_clip;
  Action a{mu[0], mu[1]};
  if (cfg_.target_noise > 0.0 && c > 0.0) {
    a.a_u += std::clamp(gaussian(rng, 0.0, cfg_.target_noise), -c, c);
    a.a_r += std::clamp(gaussian(rng, 0.0, cfg_.target_noise), -c, c);
  }
  a.a_u = clamp1(a.a_u);
  a.a_r = clamp1(a.a_r);
  return a;
}

Td3Agent::Batch Td3Agent::sample_batch(const ReplayBuffer& buffer,
                                       Rng& rng) const {
  if (buffer.size() == 0) throw std::logic_error("sampling from empty buffer");
  Batch batch;
  batch.buffer = &buffer;
  batch.idx.resize(cfg_.batch_size);
  std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
  for (auto& i : batch.idx) i = pick(rng);
  return batch;
}

std::vector<double> Td3Agent::critic_targets(const Batch& batch,
                                             Rng& rng) const {
  const ReplayBuffer& buf = *batch.buffer;
  std::vector<double> y(batch.idx.size());
  const int n = buf.obs_dim();
  for (std::size_t k = 0; k < batch.idx.size(); ++k) {
    const std::size_t i = batch.idx[k];
    const auto s_next = buf.next_state(i);
    const Action a_t = target_action(s_next, rng);
    sa_.assign(s_next.begin(), s_next.end());
    sa_.resize(n + kActDim);
    sa_[n] = a_t.a_u;
    sa_[n + 1] = a_t.a_r;
    const double q1 = target_critic1_.forward(sa_)[0];
    const double q2 = target_critic2_.forward(sa_)[0];
    y[k] = buf.reward(i) +
           cfg_.gamma * (buf.done(i) ? 0.0 : 1.0) * std::min(q1, q2);
  }
  return y;
}

double Td3Agent::update_critics(const Batch& batch,
                                std::span<const double> targets) {
  const ReplayBuffer& buf = *batch.buffer;
  const int n = buf.obs_dim();
  const auto bsz = static_cast<double>(batch.idx.size());
  g_c1_.zero();
  g_c2_.zero();
  double loss = 0.0;
  double upstream[1];
  for (std::size_t k = 0; k < batch.idx.size(); ++k) {
    const std::size_t i = batch.idx[k];
    const auto s = buf.state(i);
    const Action a = buf.action(i);
    sa_.assign(s.begin(), s.end());
    sa_.resize(n + kActDim);
    sa_[n] = a.a_u;
    sa_[n + 1] = a.a_r;
    critic1_.forward(sa_, tr_c_);
    const double e1 = tr_c_.acts.back()[0] - targets[k];
    upstream[0] = 2.0 * e1 / bsz;
    critic1_.backward(tr_c_, upstream, g_c1_);
    critic2_.forward(sa_, tr_c_);
    const double e2 = tr_c_.acts.back()[0] - targets[k];
    upstream[0] = 2.0 * e2 / bsz;
    critic2_.backward(tr_c_, upstream, g_c2_);
    loss += (e1 * e1 + e2 * e2) / 2.0;
  }
  adam_critic1_.apply(critic1_, g_c1_);
  adam_critic2_.apply(critic2_, g_c2_);
  return loss / bsz;
}

namespace {

void polyak(Mlp& target, const Mlp& online, double tau) {
  for (std::size_t l = 0; l < target.layers().size(); ++l) {
    auto blend = [tau](std::vector<double>& t, const std::vector<double>& o) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = tau * o[i] + (1.0 - tau) * t[i];
      }
    };
    blend(target.layers()[l].w, online.layers()[l].w);
    blend(target.layers()[l].b, online.layers()[l].b);
  }
}

}  // namespace

void Td3Agent::update_actor_and_targets(const Batch& batch, long step) {
  if (step % cfg_.policy_delay != 0) return;
  const ReplayBuffer& buf = *batch.buffer;
  const int n = buf.obs_dim();
  const auto bsz = static_cast<double>(batch.idx.size());
  g_actor_.zero();
  std::vector<double> input_grad;
  double upstream[1];
  for (const std::size_t i : batch.idx) {
    const auto s = buf.state(i);
    actor_.forward(s, tr_a_);
    const std::vector<double>& mu = tr_a_.acts.back();
    sa_.assign(s.begin(), s.end());
    sa_.resize(n + kActDim);
    sa_[n] = mu[0];
    sa_[n + 1] = mu[1];
    critic1_.forward(sa_, tr_c_);
    // Ascend the critic: minimize -Q.
    upstream[0] = -1.0 / bsz;
    g_scratch_.zero();
    critic1_.backward(tr_c_, upstream, g_scratch_, &input_grad);
    const double dmu[kActDim] = {input_grad[n], input_grad[n + 1]};
    actor_.backward(tr_a_, dmu, g_actor_);
  }
  adam_actor_.apply(actor_, g_actor_);

  polyak(target_actor_, actor_, cfg_.tau_soft);
  polyak(target_critic1_, critic1_, cfg_.tau_soft);
  polyak(target_critic2_, critic2_, cfg_.tau_soft);
}

double Td3Agent::learn(const ReplayBuffer& buffer, Rng& rng) {
  ++learn_steps_;
  const Batch batch = sample_batch(buffer, rng);
  const std::vector<double> y = critic_targets(batch, rng);
  const double loss = update_critics(batch, y);
  update_actor_and_targets(batch, learn_steps_);
  return loss;
}

TrainResult train(Environment& env, const Td3Config& cfg,
                  const TrainOptions& opts, std::uint64_t seed,
                  const EvalFn& eval) {
  Rng init_rng = derived_rng(seed, 1);
  Rng rng = derived_rng(seed, 0);
  TrainResult result{Td3Agent(env.obs_dim(), cfg, init_rng), {}};
  Td3Agent& agent = result.agent;
  ReplayBuffer buffer(cfg.buffer_capacity, env.obs_dim());

  std::vector<double> s = env.reset(rng);
  for (long step = 1; step <= opts.budget_steps; ++step) {
    Action a;
    if (step <= cfg.warmup_steps) {
      a.a_u = uniform(rng, -1.0, 1.0);
      a.a_r = uniform(rng, -1.0, 1.0);
    } else {
      a = agent.select_action(s, cfg.explore_sigma, rng);
    }
    StepResult res = env.step(a);
    buffer.add(s, a, res.reward, res.state, res.done);
    s = res.done ? env.reset(rng) : std::move(res.state);
    if (step > cfg.warmup_steps) agent.learn(buffer, rng);
    if (eval && opts.eval_interval > 0 && step % opts.eval_interval == 0) {
      result.metrics.push_back(eval(agent.actor(), step));
    }
  }
  return result;
}

void save_checkpoint(const Mlp& actor, long opt_step, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  char buf[40];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  out << "{\"layer_dims\":[";
  for (std::size_t i = 0; i < actor.dims().size(); ++i) {
    if (i > 0) out << ',';
    out << actor.dims()[i];
  }
  out << "],\"layers\":[";
  for (std::size_t l = 0; l < actor.layers().size(); ++l) {
    const auto& layer = actor.layers()[l];
    if (l > 0) out << ',';
    out << "{\"w\":[";
    for (std::size_t i = 0; i < layer.w.size(); ++i) {
      if (i > 0) out << ',';
      put(layer.w[i]);
    }
    out << "],\"b\":[";
    for (std::size_t i = 0; i < layer.b.size(); ++i) {
      if (i > 0) out << ',';
      put(layer.b[i]);
    }
    out << "]}";
  }
  out << "],\"opt_step\":" << opt_step << "}\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptRecordError(std::string("malformed checkpoint: ") + e.what());
  }
  Checkpoint ck;
  const std::vector<int> dims = j.at("layer_dims");
  Rng dummy(0);
  ck.actor = Mlp(dims, Mlp::Output::Tanh, dummy);
  const auto& jlayers = j.at("layers");
  if (jlayers.size() != ck.actor.layers().size()) {
    throw CorruptRecordError("checkpoint layer count mismatch");
  }
  for (std::size_t l = 0; l < ck.actor.layers().size(); ++l) {
    auto& layer = ck.actor.layers()[l];
    const std::vector<double> w = jlayers[l].at("w");
    const std::vector<double> b = jlayers[l].at("b");
    if (w.size() != layer.w.size() || b.size() != layer.b.size()) {
      throw CorruptRecordError("checkpoint layer shape mismatch");
    }
    layer.w = w;
    layer.b = b;
  }
  ck.opt_step = j.at("opt_step");
  return ck;
}

}  // namespace riskgym
