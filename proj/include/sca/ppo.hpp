#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sca/dpl.hpp"
#include "sca/env.hpp"
#include "sca/nn.hpp"
#include "sca/pet.hpp"
#include "sca/policy.hpp"
#include "sca/rng.hpp"

namespace sca {

struct PpoConfig {
  std::int64_t total_steps = 30000;  // N_t, env decision steps
  int forward_steps = 30;            // S_u (rollout segment length)
  double clip = 0.2;
  double lr = 1e-4;
  double gamma = 0.95;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int buffer_cap = 960;              // L_max
  int minibatch = 64;                // S
  int update_epochs = 4;
  double target_update_rate = 0.01;  // parsed and logged; no referent in PPO-Clip
  std::uint64_t seed = 0;
  int checkpoint_every = 10;         // updates
};

// Environment interface for rollout collection: the policy input already
// carries the per-neighbor priors.
class RolloutEnv {
 public:
  virtual ~RolloutEnv() = default;
  virtual PolicyInput reset(std::uint64_t seed) = 0;
  virtual std::tuple<PolicyInput, RewardBreakdown, bool, StepInfo> step(Action a) = 0;
};

// Intersection environment with DPL priors recomputed from each HV's
// position history every decision step. dpl == nullptr disables priors.
class IntersectionRolloutEnv : public RolloutEnv {
 public:
  IntersectionRolloutEnv(const LayoutConfig& layout, const EnvConfig& env,
                         const SocialConfig& social, DplModel* dpl)
      : env_(layout, env, social), dpl_(dpl) {}

  PolicyInput reset(std::uint64_t seed) override {
    Observation obs = env_.reset(seed);
    return make_input(obs);
  }

  std::tuple<PolicyInput, RewardBreakdown, bool, StepInfo> step(Action a) override {
    auto [obs, rb, done, info] = env_.step(a);
    return {make_input(obs), rb, done, info};
  }

  IntersectionEnv& env() { return env_; }

 private:
  PolicyInput make_input(const Observation& obs) {
    PolicyInput in;
    in.obs = obs;
    if (!dpl_) return in;
    double arm = env_.layout().config().arm_length;
    for (int id : env_.neighbor_ids()) {
      const Vehicle& v = env_.vehicle_by_id(id);
      std::vector<Vec2> hist;
      hist.reserve(v.history.size());
      for (const auto& p : v.history) hist.push_back({p.x / arm, p.y / arm});
      in.priors.push_back(dpl_->infer_prior(hist));
    }
    return in;
  }

  IntersectionEnv env_;
  DplModel* dpl_;
};

// 1-D reach-target sanity environment: 20-step episodes, actions move the
// position by -0.1/0/+0.1, reward exp(-|pos - target|).
class ToyReachEnv : public RolloutEnv {
 public:
  explicit ToyReachEnv(int horizon = 20) : horizon_(horizon), rng_(0) {}

  PolicyInput reset(std::uint64_t seed) override {
    rng_ = Rng(seed);
    pos_ = rng_.uniform(-1.2, -0.8);
    t_ = 0;
    return make_input();
  }

  std::tuple<PolicyInput, RewardBreakdown, bool, StepInfo> step(Action a) override {
    static const double kMove[] = {-0.1, 0.0, 0.1};
    pos_ = std::clamp(pos_ + kMove[static_cast<int>(a)], -2.0, 2.0);
    ++t_;
    RewardBreakdown rb;
    rb.R_E = std::exp(-std::abs(pos_ - 1.0));
    rb.R_global = rb.R_E;
    StepInfo info;
    bool done = t_ >= horizon_;
    if (done) info.outcome = Outcome::Arrived;
    return {make_input(), rb, done, info};
  }

 private:
  PolicyInput make_input() const {
    PolicyInput in;
    in.obs.ego = {pos_, 1.0, 0.0, 0.0};
    return in;
  }

  int horizon_;
  Rng rng_;
  double pos_ = 0.0;
  int t_ = 0;
};

struct Transition {
  PolicyInput input;
  Action action = Action::Cruise;
  double logprob = 0.0;
  double value = 0.0;
  RewardBreakdown reward;
  bool done = false;
};

struct RolloutBuffer {
  std::vector<Transition> transitions;
  double bootstrap_value = 0.0;  // V of the state after the last transition
  // Episode aggregates completed during collection.
  int episodes_done = 0;
  int collisions = 0;
  int successes = 0;
  double return_E_sum = 0.0;
  double return_C_sum = 0.0;
  double return_global_sum = 0.0;
};

struct TrainStats {
  int update = 0;
  std::int64_t env_steps = 0;
  double mean_return_E = 0.0;
  double mean_return_C = 0.0;
  double mean_return_global = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_frac = 0.0;
  double collision_rate = 0.0;
  double success_rate = 0.0;
};

// Collects exactly cap transitions, resetting episodes as they end. The
// episode seed stream advances monotonically so runs are reproducible.
template <typename TPolicy>
RolloutBuffer collect_rollouts(RolloutEnv& env, TPolicy& policy, const PpoConfig& cfg,
                               std::uint64_t& episode_counter, PolicyInput& current,
                               bool& need_reset, Rng& action_rng,
                               double& ep_E, double& ep_C, double& ep_G) {
  RolloutBuffer buf;
  buf.transitions.reserve(cfg.buffer_cap);
  for (int i = 0; i < cfg.buffer_cap; ++i) {
    if (need_reset) {
      current = env.reset(Rng(cfg.seed).fork(100).next_u64() + episode_counter++);
      need_reset = false;
      ep_E = ep_C = ep_G = 0.0;
    }
    PolicyOutput out = policy.forward(current);
    auto [action, logprob] = act(out, ActMode::Sample, action_rng);
    auto [next, rb, done, info] = env.step(action);
    Transition tr;
    tr.input = current;
    tr.action = action;
    tr.logprob = logprob;
    tr.value = out.value;
    tr.reward = rb;
    tr.done = done;
    buf.transitions.push_back(std::move(tr));
    ep_E += rb.R_E;
    ep_C += rb.R_C;
    ep_G += rb.R_global;
    current = next;
    if (done) {
      ++buf.episodes_done;
      if (info.outcome == Outcome::Collided) ++buf.collisions;
      if (info.outcome == Outcome::Arrived) ++buf.successes;
      buf.return_E_sum += ep_E;
      buf.return_C_sum += ep_C;
      buf.return_global_sum += ep_G;
      need_reset = true;
    }
  }
  buf.bootstrap_value = buf.transitions.back().done ? 0.0 : policy.forward(current).value;
  return buf;
}

struct Advantages {
  std::vector<double> adv;      // normalized
  std::vector<double> returns;  // advantage + value (pre-normalization)
};

// GAE(gamma, lambda) with zero-mean / unit-variance normalization.
inline Advantages compute_advantages(const RolloutBuffer& buf, double gamma, double lambda,
                                     bool normalize = true) {
  std::size_t n = buf.transitions.size();
  Advantages out;
  out.adv.resize(n);
  out.returns.resize(n);
  double gae = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const Transition& t = buf.transitions[i];
    double next_value = t.done ? 0.0
                               : (i + 1 < n ? buf.transitions[i + 1].value : buf.bootstrap_value);
    double delta = t.reward.R_global + gamma * next_value - t.value;
    gae = delta + gamma * lambda * (t.done ? 0.0 : gae);
    out.adv[i] = gae;
    out.returns[i] = gae + t.value;
  }
  if (normalize && n > 1) {
    double mean = 0.0;
    for (double a : out.adv) mean += a;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double a : out.adv) var += (a - mean) * (a - mean);
    double std = std::sqrt(var / static_cast<double>(n));
    if (std < 1e-12) std = 1e-12;
    for (auto& a : out.adv) a = (a - mean) / std;
  }
  return out;
}

// One PPO-Clip update: update_epochs passes of seeded-shuffled minibatches.
template <typename T>
TrainStats ppo_update(PolicyNetT<T>& policy, const RolloutBuffer& buf, const Advantages& adv,
                      const PpoConfig& cfg, AdamT<T>& adam, Rng& shuffle_rng) {
  std::size_t n = buf.transitions.size();
  TrainStats stats;
  double loss_sum = 0.0, vloss_sum = 0.0, ent_sum = 0.0, clip_sum = 0.0;
  int batches = 0;

  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);
    for (std::size_t start = 0; start < n; start += cfg.minibatch) {
      std::size_t end = std::min(n, start + cfg.minibatch);
      TapeT<T> tape;
      typename TapeT<T>::Id policy_obj = -1, value_loss = -1, entropy = -1;
      double clip_count = 0.0;
      for (std::size_t s = start; s < end; ++s) {
        const Transition& t = buf.transitions[order[s]];
        auto [logits, value] = policy.forward_ids(tape, t.input);
        auto probs = tape.softmax_rows(logits);
        auto logp = tape.log_op(probs);
        int a = static_cast<int>(t.action);
        auto chosen = tape.slice_cols(logp, a, a + 1);
        auto ratio = tape.exp_op(tape.add_const(chosen, static_cast<T>(-t.logprob)));
        double A = adv.adv[order[s]];
        auto term = tape.minimum(
            tape.scale(ratio, static_cast<T>(A)),
            tape.scale(tape.clamp_op(ratio, static_cast<T>(1.0 - cfg.clip),
                                     static_cast<T>(1.0 + cfg.clip)),
                       static_cast<T>(A)));
        auto verr = tape.add_const(value, static_cast<T>(-adv.returns[order[s]]));
        auto vl = tape.mul(verr, verr);
        auto ent = tape.scale(tape.sum_all(tape.mul(probs, logp)), T(-1));
        policy_obj = policy_obj < 0 ? term : tape.add(policy_obj, term);
        value_loss = value_loss < 0 ? vl : tape.add(value_loss, vl);
        entropy = entropy < 0 ? ent : tape.add(entropy, ent);
        double r = static_cast<double>(tape.value(ratio).scalar());
        if (std::abs(r - 1.0) > cfg.clip) clip_count += 1.0;
      }
      T inv = static_cast<T>(1.0 / static_cast<double>(end - start));
      policy_obj = tape.scale(policy_obj, inv);
      value_loss = tape.scale(value_loss, inv);
      entropy = tape.scale(entropy, inv);
      auto total = tape.add(
          tape.add(tape.scale(policy_obj, T(-1)), tape.scale(value_loss, static_cast<T>(cfg.value_coef))),
          tape.scale(entropy, static_cast<T>(-cfg.entropy_coef)));
      double tv = static_cast<double>(tape.value(total).scalar());
      if (!std::isfinite(tv))
        throw std::runtime_error("ppo_update: non-finite loss in minibatch starting at " +
                                 std::to_string(start));
      policy.store().zero_grads();
      tape.backward(total);
      adam.step();
      loss_sum += -static_cast<double>(tape.value(policy_obj).scalar());
      vloss_sum += static_cast<double>(tape.value(value_loss).scalar());
      ent_sum += static_cast<double>(tape.value(entropy).scalar());
      clip_sum += clip_count / static_cast<double>(end - start);
      ++batches;
    }
  }
  stats.policy_loss = loss_sum / batches;
  stats.value_loss = vloss_sum / batches;
  stats.entropy = ent_sum / batches;
  stats.clip_frac = clip_sum / batches;
  return stats;
}

// Full training loop: alternate collect / update until total_steps env steps.
// Returns one stats row per update; optionally checkpoints along the way.
template <typename T>
std::vector<TrainStats> train_ppo(RolloutEnv& env, PolicyNetT<T>& policy, const PpoConfig& cfg,
                                  const std::string& checkpoint_dir = "") {
  AdamT<T> adam(policy.store(), {cfg.lr, 0.9, 0.999, 1e-8});
  Rng action_rng = Rng(cfg.seed).fork(41);
  Rng shuffle_rng = Rng(cfg.seed).fork(42);
  std::uint64_t episode_counter = 0;
  PolicyInput current;
  bool need_reset = true;
  double ep_E = 0.0, ep_C = 0.0, ep_G = 0.0;

  std::vector<TrainStats> rows;
  std::int64_t steps = 0;
  int update = 0;
  double last_mean_E = 0.0, last_mean_C = 0.0, last_mean_G = 0.0;
  double last_coll = 0.0, last_succ = 0.0;
  while (steps < cfg.total_steps) {
    RolloutBuffer buf = collect_rollouts(env, policy, cfg, episode_counter, current,
                                         need_reset, action_rng, ep_E, ep_C, ep_G);
    steps += static_cast<std::int64_t>(buf.transitions.size());
    Advantages adv = compute_advantages(buf, cfg.gamma, cfg.gae_lambda);
    TrainStats stats = ppo_update(policy, buf, adv, cfg, adam, shuffle_rng);
    ++update;
    stats.update = update;
    stats.env_steps = steps;
    if (buf.episodes_done > 0) {
      last_mean_E = buf.return_E_sum / buf.episodes_done;
      last_mean_C = buf.return_C_sum / buf.episodes_done;
      last_mean_G = buf.return_global_sum / buf.episodes_done;
      last_coll = static_cast<double>(buf.collisions) / buf.episodes_done;
      last_succ = static_cast<double>(buf.successes) / buf.episodes_done;
    }
    stats.mean_return_E = last_mean_E;
    stats.mean_return_C = last_mean_C;
    stats.mean_return_global = last_mean_G;
    stats.collision_rate = last_coll;
    stats.success_rate = last_succ;
    rows.push_back(stats);
    if (!checkpoint_dir.empty() && update % cfg.checkpoint_every == 0) {
      save_checkpoint(policy.store(),
                      (std::filesystem::path(checkpoint_dir) /
                       ("policy_update_" + std::to_string(update) + ".ckpt")).string());
    }
  }
  if (!checkpoint_dir.empty())
    save_checkpoint(policy.store(),
                    (std::filesystem::path(checkpoint_dir) / "policy_final.ckpt").string());
  return rows;
}

struct EvalReport {
  int episodes = 0;
  double mean_return_E = 0.0;
  double mean_return_C = 0.0;
  double mean_return_global = 0.0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_speed = 0.0;
  std::optional<double> mean_min_pet;  // over episodes where PET is defined
  std::vector<EpisodeResult> results;
};

// Greedy evaluation over `episodes` fresh episodes. The per-episode hook (if
// set) runs after each episode with access to the wrapped environment.
template <typename T>
EvalReport evaluate_policy(
    const LayoutConfig& layout, const EnvConfig& env_cfg, const SocialConfig& social,
    PolicyNetT<T>& policy, DplModel* dpl, int episodes, std::uint64_t seed,
    const std::function<void(int, IntersectionRolloutEnv&,
                             const std::vector<std::pair<PolicyInput, Action>>&)>& hook = {}) {
  EvalReport rep;
  rep.episodes = episodes;
  if (episodes == 0) return rep;
  double pet_sum = 0.0;
  int pet_count = 0;
  for (int e = 0; e < episodes; ++e) {
    IntersectionRolloutEnv env(layout, env_cfg, social, dpl);
    PolicyInput in = env.reset(Rng(seed).fork(50).next_u64() + static_cast<std::uint64_t>(e));
    Rng dummy(0);
    std::vector<std::pair<PolicyInput, Action>> decisions;
    bool done = false;
    while (!done) {
      PolicyOutput out = policy.forward(in);
      auto [action, logprob] = act(out, ActMode::Greedy, dummy);
      (void)logprob;
      decisions.emplace_back(in, action);
      auto [next, rb, d, info] = env.step(action);
      (void)rb;
      (void)info;
      in = next;
      done = d;
    }
    EpisodeResult res = env.env().result();
    res.min_pet = compute_pet(env.env().log(), layout);
    if (res.min_pet) { pet_sum += *res.min_pet; ++pet_count; }
    rep.mean_return_E += res.return_E;
    rep.mean_return_C += res.return_C;
    rep.mean_return_global += res.return_global;
    rep.mean_speed += res.avg_speed;
    if (res.outcome == Outcome::Arrived) rep.success_rate += 1.0;
    if (res.outcome == Outcome::Collided) rep.collision_rate += 1.0;
    if (res.outcome == Outcome::Timeout) rep.timeout_rate += 1.0;
    rep.results.push_back(res);
    if (hook) hook(e, env, decisions);
  }
  rep.mean_return_E /= episodes;
  rep.mean_return_C /= episodes;
  rep.mean_return_global /= episodes;
  rep.mean_speed /= episodes;
  rep.success_rate /= episodes;
  rep.collision_rate /= episodes;
  rep.timeout_rate /= episodes;
  if (pet_count > 0) rep.mean_min_pet = pet_sum / pet_count;
  return rep;
}

}  // namespace sca
