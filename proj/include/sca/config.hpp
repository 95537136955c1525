#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sca/dpl.hpp"
#include "sca/env.hpp"
#include "sca/policy.hpp"
#include "sca/ppo.hpp"

namespace sca {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  int dataset_episodes = 500;
  int dataset_max_decisions = 60;
  int eval_episodes = 20;
  std::vector<double> sweep_phis = {0.0, M_PI / 12.0, 5.0 * M_PI / 12.0};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
};

struct RunConfig {
  LayoutConfig layout;
  EnvConfig env;
  SocialConfig social;
  DplConfig dpl;
  PolicyConfig policy;
  PpoConfig ppo;
  ExperimentConfig experiment;
};

namespace detail {

// Field registry: every settable leaf has a typed setter and an optional
// range check, keyed by its dotted path.
struct FieldBinding {
  std::function<void(RunConfig&, const json&, const std::string&)> set;
};

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path + ": expected a number");
  return v.get<double>();
}

inline void check_range(double x, double lo, double hi, const std::string& path) {
  if (!(x >= lo && x <= hi)) {
    std::ostringstream os;
    os << path << ": value " << x << " out of range [" << lo << ", " << hi << "]";
    throw ConfigError(os.str());
  }
}

inline std::map<std::string, FieldBinding> field_registry() {
  std::map<std::string, FieldBinding> reg;
  auto num = [&](const std::string& path, auto member_ptr, double lo, double hi) {
    reg[path] = {[member_ptr, lo, hi](RunConfig& c, const json& v, const std::string& p) {
      double x = as_number(v, p);
      check_range(x, lo, hi, p);
      c.*member_ptr = x;
    }};
  };
  auto num_in = [&](const std::string& path, auto section_ptr, auto member_ptr, double lo,
                    double hi) {
    reg[path] = {[section_ptr, member_ptr, lo, hi](RunConfig& c, const json& v,
                                                   const std::string& p) {
      double x = as_number(v, p);
      check_range(x, lo, hi, p);
      (c.*section_ptr).*member_ptr = x;
    }};
  };
  auto int_in = [&](const std::string& path, auto section_ptr, auto member_ptr, double lo,
                    double hi) {
    reg[path] = {[section_ptr, member_ptr, lo, hi](RunConfig& c, const json& v,
                                                   const std::string& p) {
      double x = as_number(v, p);
      if (x != std::floor(x)) throw ConfigError(p + ": expected an integer");
      check_range(x, lo, hi, p);
      (c.*section_ptr).*member_ptr =
          static_cast<std::decay_t<decltype((c.*section_ptr).*member_ptr)>>(x);
    }};
  };
  auto bool_in = [&](const std::string& path, auto section_ptr, auto member_ptr) {
    reg[path] = {[section_ptr, member_ptr](RunConfig& c, const json& v, const std::string& p) {
      if (!v.is_boolean()) throw ConfigError(p + ": expected a boolean");
      (c.*section_ptr).*member_ptr = v.get<bool>();
    }};
  };
  (void)num;

  num_in("layout.arm_length", &RunConfig::layout, &LayoutConfig::arm_length, 10, 1000);
  num_in("layout.lane_width", &RunConfig::layout, &LayoutConfig::lane_width, 1, 20);
  num_in("layout.intersection_half", &RunConfig::layout, &LayoutConfig::intersection_half, 2, 50);
  num_in("layout.v_max", &RunConfig::layout, &LayoutConfig::v_max, 0.1, 100);
  num_in("layout.left_turn_radius", &RunConfig::layout, &LayoutConfig::left_turn_radius, 1, 50);
  num_in("layout.right_turn_radius", &RunConfig::layout, &LayoutConfig::right_turn_radius, 1, 50);

  num_in("env.decision_period", &RunConfig::env, &EnvConfig::decision_period, 0.05, 10);
  num_in("env.substep_dt", &RunConfig::env, &EnvConfig::substep_dt, 0.001, 1);
  int_in("env.max_decisions", &RunConfig::env, &EnvConfig::max_decisions, 1, 100000);
  int_in("env.n_max_neighbors", &RunConfig::env, &EnvConfig::n_max_neighbors, 0, 64);
  num_in("env.perception_radius", &RunConfig::env, &EnvConfig::perception_radius, 1, 1000);
  int_in("env.k_min", &RunConfig::env, &EnvConfig::k_min, 0, 64);
  int_in("env.k_max", &RunConfig::env, &EnvConfig::k_max, 0, 64);
  num_in("env.spawn_spacing", &RunConfig::env, &EnvConfig::spawn_spacing, 0, 100);
  num_in("env.speed_step", &RunConfig::env, &EnvConfig::speed_step, 0.01, 10);
  num_in("env.collision_reward", &RunConfig::env, &EnvConfig::collision_reward, -1000, 0);
  num_in("env.arrival_reward", &RunConfig::env, &EnvConfig::arrival_reward, 0, 1000);
  num_in("env.efficiency_coef", &RunConfig::env, &EnvConfig::efficiency_coef, 0, 100);
  num_in("env.lookahead", &RunConfig::env, &EnvConfig::lookahead, 0.5, 50);
  num_in("env.conflict_radius", &RunConfig::env, &EnvConfig::conflict_radius, 0.1, 50);
  num_in("env.av_initial_speed", &RunConfig::env, &EnvConfig::av_initial_speed, 0, 100);
  num_in("env.v0_aggressive", &RunConfig::env, &EnvConfig::v0_aggressive, 0.1, 100);
  num_in("env.v0_moderate", &RunConfig::env, &EnvConfig::v0_moderate, 0.1, 100);
  num_in("env.v0_conservative", &RunConfig::env, &EnvConfig::v0_conservative, 0.1, 100);
  num_in("env.delta_exp", &RunConfig::env, &EnvConfig::delta_exp, 0.1, 20);
  bool_in("env.spawn_av", &RunConfig::env, &EnvConfig::spawn_av);

  num_in("social.phi", &RunConfig::social, &SocialConfig::phi, 0, M_PI / 2);
  num_in("social.alpha", &RunConfig::social, &SocialConfig::alpha, 0, 10);
  num_in("social.lambda", &RunConfig::social, &SocialConfig::lambda, 0, 10);
  num_in("social.w_c", &RunConfig::social, &SocialConfig::w_c, 0, 100);
  num_in("social.w_e", &RunConfig::social, &SocialConfig::w_e, 0, 100);
  num_in("social.w_a", &RunConfig::social, &SocialConfig::w_a, 0, 100);
  num_in("social.ttc_threshold", &RunConfig::social, &SocialConfig::ttc_threshold, 0, 60);

  int_in("dpl.window", &RunConfig::dpl, &DplConfig::window, 2, 1000);
  int_in("dpl.stride", &RunConfig::dpl, &DplConfig::stride, 1, 1000);
  int_in("dpl.embed_dim", &RunConfig::dpl, &DplConfig::embed_dim, 1, 4096);
  int_in("dpl.gru_hidden", &RunConfig::dpl, &DplConfig::gru_hidden, 1, 4096);
  int_in("dpl.latent_dim", &RunConfig::dpl, &DplConfig::latent_dim, 1, 1024);
  num_in("dpl.lr", &RunConfig::dpl, &DplConfig::lr, 1e-8, 1);
  int_in("dpl.batch", &RunConfig::dpl, &DplConfig::batch, 1, 65536);
  int_in("dpl.epochs", &RunConfig::dpl, &DplConfig::epochs, 1, 100000);
  num_in("dpl.kl_beta", &RunConfig::dpl, &DplConfig::kl_beta, 0, 10);
  num_in("dpl.val_fraction", &RunConfig::dpl, &DplConfig::val_fraction, 0.01, 0.9);

  int_in("policy.encoder_hidden", &RunConfig::policy, &PolicyConfig::encoder_hidden, 1, 4096);
  int_in("policy.attention_dim", &RunConfig::policy, &PolicyConfig::attention_dim, 1, 4096);
  int_in("policy.heads", &RunConfig::policy, &PolicyConfig::heads, 1, 64);
  int_in("policy.decoder_hidden", &RunConfig::policy, &PolicyConfig::decoder_hidden, 1, 4096);
  int_in("policy.prior_dim", &RunConfig::policy, &PolicyConfig::prior_dim, 0, 1024);

  int_in("ppo.total_steps", &RunConfig::ppo, &PpoConfig::total_steps, 1, 1000000000);
  int_in("ppo.forward_steps", &RunConfig::ppo, &PpoConfig::forward_steps, 1, 100000);
  num_in("ppo.clip", &RunConfig::ppo, &PpoConfig::clip, 0.001, 10);
  num_in("ppo.lr", &RunConfig::ppo, &PpoConfig::lr, 1e-8, 1);
  num_in("ppo.gamma", &RunConfig::ppo, &PpoConfig::gamma, 0, 1);
  num_in("ppo.gae_lambda", &RunConfig::ppo, &PpoConfig::gae_lambda, 0, 1);
  num_in("ppo.value_coef", &RunConfig::ppo, &PpoConfig::value_coef, 0, 100);
  num_in("ppo.entropy_coef", &RunConfig::ppo, &PpoConfig::entropy_coef, 0, 100);
  int_in("ppo.buffer_cap", &RunConfig::ppo, &PpoConfig::buffer_cap, 1, 1000000);
  int_in("ppo.minibatch", &RunConfig::ppo, &PpoConfig::minibatch, 1, 1000000);
  int_in("ppo.update_epochs", &RunConfig::ppo, &PpoConfig::update_epochs, 1, 1000);
  num_in("ppo.target_update_rate", &RunConfig::ppo, &PpoConfig::target_update_rate, 0, 1);
  int_in("ppo.checkpoint_every", &RunConfig::ppo, &PpoConfig::checkpoint_every, 1, 100000);

  int_in("experiment.dataset_episodes", &RunConfig::experiment,
         &ExperimentConfig::dataset_episodes, 1, 1000000);
  int_in("experiment.dataset_max_decisions", &RunConfig::experiment,
         &ExperimentConfig::dataset_max_decisions, 1, 100000);
  int_in("experiment.eval_episodes", &RunConfig::experiment, &ExperimentConfig::eval_episodes,
         1, 100000);
  reg["experiment.sweep_phis"] = {[](RunConfig& c, const json& v, const std::string& p) {
    if (!v.is_array() || v.empty()) throw ConfigError(p + ": expected a non-empty array");
    c.experiment.sweep_phis.clear();
    for (const auto& e : v) {
      double x = as_number(e, p);
      check_range(x, 0, M_PI / 2, p);
      c.experiment.sweep_phis.push_back(x);
    }
  }};
  reg["experiment.seeds"] = {[](RunConfig& c, const json& v, const std::string& p) {
    if (!v.is_array() || v.empty()) throw ConfigError(p + ": expected a non-empty array");
    c.experiment.seeds.clear();
    for (const auto& e : v) {
      double x = as_number(e, p);
      if (x != std::floor(x) || x < 0) throw ConfigError(p + ": expected nonnegative integers");
      c.experiment.seeds.push_back(static_cast<std::uint64_t>(x));
    }
  }};
  return reg;
}

inline void validate_cross_fields(const RunConfig& c) {
  if (c.env.k_min > c.env.k_max) throw ConfigError("env.k_min: must be <= env.k_max");
  if (c.ppo.minibatch > c.ppo.buffer_cap)
    throw ConfigError("ppo.minibatch: must be <= ppo.buffer_cap");
  if (c.dpl.stride > c.dpl.window)
    throw ConfigError("dpl.stride: must be <= dpl.window");
  double ratio = c.env.decision_period / c.env.substep_dt;
  if (std::abs(ratio - std::llround(ratio)) > 1e-9)
    throw ConfigError("env.decision_period: must be an integer multiple of env.substep_dt");
}

}  // namespace detail

// Applies a JSON document onto defaults. Unknown keys are rejected with their
// full dotted path.
inline void apply_config_json(RunConfig& cfg, const json& doc, const std::string& prefix = "") {
  static const auto reg = detail::field_registry();
  if (!doc.is_object()) throw ConfigError(prefix.empty() ? "config root: expected an object"
                                                         : prefix + ": expected an object");
  for (const auto& [key, value] : doc.items()) {
    std::string path = prefix.empty() ? key : prefix + "." + key;
    auto it = reg.find(path);
    if (it != reg.end()) {
      it->second.set(cfg, value, path);
    } else if (value.is_object()) {
      apply_config_json(cfg, value, path);
    } else {
      throw ConfigError(path + ": unknown configuration key");
    }
  }
}

inline RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    json doc;
    try {
      f >> doc;
    } catch (const json::exception& e) {
      throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    apply_config_json(cfg, doc);
  }
  detail::validate_cross_fields(cfg);
  return cfg;
}

// Applies "section.key=value" overrides (values parsed as JSON scalars, with
// bare words treated as strings where booleans/numbers do not parse).
inline void apply_overrides(RunConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    std::size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got: " + s);
    std::string key = s.substr(0, eq);
    std::string raw = s.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;  // bare string
    }
    // Build a nested object so the usual path rules apply.
    json doc = value;
    std::vector<std::string> parts;
    std::istringstream is(key);
    std::string part;
    while (std::getline(is, part, '.')) parts.push_back(part);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
      json wrap;
      wrap[*it] = doc;
      doc = wrap;
    }
    apply_config_json(cfg, doc);
  }
  detail::validate_cross_fields(cfg);
}

// Serializes the resolved configuration (all sections, all fields).
inline json config_to_json(const RunConfig& c) {
  json j;
  j["layout"] = {{"arm_length", c.layout.arm_length}, {"lane_width", c.layout.lane_width},
                 {"intersection_half", c.layout.intersection_half}, {"v_max", c.layout.v_max},
                 {"left_turn_radius", c.layout.left_turn_radius},
                 {"right_turn_radius", c.layout.right_turn_radius}};
  j["env"] = {{"decision_period", c.env.decision_period}, {"substep_dt", c.env.substep_dt},
              {"max_decisions", c.env.max_decisions},
              {"n_max_neighbors", c.env.n_max_neighbors},
              {"perception_radius", c.env.perception_radius}, {"k_min", c.env.k_min},
              {"k_max", c.env.k_max}, {"spawn_spacing", c.env.spawn_spacing},
              {"speed_step", c.env.speed_step}, {"collision_reward", c.env.collision_reward},
              {"arrival_reward", c.env.arrival_reward},
              {"efficiency_coef", c.env.efficiency_coef}, {"lookahead", c.env.lookahead},
              {"conflict_radius", c.env.conflict_radius},
              {"av_initial_speed", c.env.av_initial_speed},
              {"v0_aggressive", c.env.v0_aggressive}, {"v0_moderate", c.env.v0_moderate},
              {"v0_conservative", c.env.v0_conservative}, {"delta_exp", c.env.delta_exp},
              {"spawn_av", c.env.spawn_av}};
  j["social"] = {{"phi", c.social.phi}, {"alpha", c.social.alpha},
                 {"lambda", c.social.lambda}, {"w_c", c.social.w_c}, {"w_e", c.social.w_e},
                 {"w_a", c.social.w_a}, {"ttc_threshold", c.social.ttc_threshold}};
  j["dpl"] = {{"window", c.dpl.window}, {"stride", c.dpl.stride},
              {"embed_dim", c.dpl.embed_dim}, {"gru_hidden", c.dpl.gru_hidden},
              {"latent_dim", c.dpl.latent_dim}, {"lr", c.dpl.lr}, {"batch", c.dpl.batch},
              {"epochs", c.dpl.epochs}, {"kl_beta", c.dpl.kl_beta},
              {"val_fraction", c.dpl.val_fraction}};
  j["policy"] = {{"encoder_hidden", c.policy.encoder_hidden},
                 {"attention_dim", c.policy.attention_dim}, {"heads", c.policy.heads},
                 {"decoder_hidden", c.policy.decoder_hidden},
                 {"prior_dim", c.policy.prior_dim}};
  j["ppo"] = {{"total_steps", c.ppo.total_steps}, {"forward_steps", c.ppo.forward_steps},
              {"clip", c.ppo.clip}, {"lr", c.ppo.lr}, {"gamma", c.ppo.gamma},
              {"gae_lambda", c.ppo.gae_lambda}, {"value_coef", c.ppo.value_coef},
              {"entropy_coef", c.ppo.entropy_coef}, {"buffer_cap", c.ppo.buffer_cap},
              {"minibatch", c.ppo.minibatch}, {"update_epochs", c.ppo.update_epochs},
              {"target_update_rate", c.ppo.target_update_rate},
              {"checkpoint_every", c.ppo.checkpoint_every}};
  j["experiment"] = {{"dataset_episodes", c.experiment.dataset_episodes},
                     {"dataset_max_decisions", c.experiment.dataset_max_decisions},
                     {"eval_episodes", c.experiment.eval_episodes},
                     {"sweep_phis", c.experiment.sweep_phis},
                     {"seeds", c.experiment.seeds}};
  return j;
}

}  // namespace sca
