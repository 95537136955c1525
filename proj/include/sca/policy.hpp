#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sca/env.hpp"
#include "sca/nn.hpp"
#include "sca/rng.hpp"
#include "sca/tensor.hpp"

namespace sca {

struct PolicyConfig {
  int encoder_hidden = 64;
  int attention_dim = 128;  // d_k, split across heads
  int heads = 2;
  int decoder_hidden = 64;
  int prior_dim = 16;       // m; 0 disables the prior channel
  int num_actions = 3;
};

struct PolicyOutput {
  std::array<double, 3> logits{};
  double value = 0.0;

  std::array<double, 3> probs() const {
    double mx = std::max({logits[0], logits[1], logits[2]});
    std::array<double, 3> p{};
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) { p[i] = std::exp(logits[i] - mx); sum += p[i]; }
    for (auto& x : p) x /= sum;
    return p;
  }
};

// One forward-pass input: the observation plus one prior vector per unmasked
// neighbor row (aligned with observation row order).
struct PolicyInput {
  Observation obs;
  std::vector<std::vector<double>> priors;  // size = number of unmasked rows
};

// Prior-attention actor-critic: row-wise state encoder, prior concatenation,
// ego-query multi-head attention, shared decoder trunk with separate logits
// and value heads.
template <typename T>
class PolicyNetT {
 public:
  using Id = typename TapeT<T>::Id;

  PolicyNetT(const PolicyConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    Rng rng = Rng(init_seed).fork(31);
    enc1_ = LinearT<T>(store_, "policy.enc1", 4, cfg.encoder_hidden, rng);
    enc2_ = LinearT<T>(store_, "policy.enc2", cfg.encoder_hidden, cfg.encoder_hidden, rng);
    attn_ = MultiHeadAttentionT<T>(store_, "policy.attn", cfg.encoder_hidden + cfg.prior_dim,
                                   cfg.attention_dim, cfg.heads, cfg.decoder_hidden, rng);
    dec1_ = LinearT<T>(store_, "policy.dec1", cfg.decoder_hidden, cfg.decoder_hidden, rng);
    dec2_ = LinearT<T>(store_, "policy.dec2", cfg.decoder_hidden, cfg.decoder_hidden, rng);
    logits_head_ = LinearT<T>(store_, "policy.logits", cfg.decoder_hidden, cfg.num_actions, rng);
    value_head_ = LinearT<T>(store_, "policy.value", cfg.decoder_hidden, 1, rng);
  }

  const PolicyConfig& config() const { return cfg_; }
  ParamStoreT<T>& store() { return store_; }
  const ParamStoreT<T>& store() const { return store_; }

  // Builds the forward graph; returns (logits 1x3, value 1x1). Neighbor rows
  // are canonicalized (sorted) internally so the output is bit-identical
  // under any permutation of (row, prior) pairs.
  std::pair<Id, Id> forward_ids(TapeT<T>& tape, const PolicyInput& in) {
    int n_unmasked = 0;
    for (bool m : in.obs.mask)
      if (m) ++n_unmasked;
    if (static_cast<int>(in.priors.size()) != n_unmasked && cfg_.prior_dim > 0)
      throw std::invalid_argument("policy forward: prior count mismatch");

    // Collect unmasked (row, prior) pairs and sort them canonically.
    struct Row {
      std::array<double, 4> feat;
      std::vector<double> prior;
    };
    std::vector<Row> rows;
    int pi = 0;
    for (std::size_t k = 0; k < in.obs.mask.size(); ++k) {
      if (!in.obs.mask[k]) continue;
      Row r;
      r.feat = in.obs.rows[k];
      if (cfg_.prior_dim > 0) r.prior = in.priors[pi];
      ++pi;
      rows.push_back(std::move(r));
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      if (a.feat != b.feat) return a.feat < b.feat;
      return a.prior < b.prior;
    });

    int n = static_cast<int>(rows.size());
    TensorT<T> feats(n + 1, 4, T(0));
    for (int j = 0; j < 4; ++j) feats.at(0, j) = static_cast<T>(in.obs.ego[j]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 4; ++j) feats.at(i + 1, j) = static_cast<T>(rows[i].feat[j]);

    Id x = tape.constant(std::move(feats));
    Id enc = tape.tanh_op(enc2_.apply(tape, store_,
                                      tape.tanh_op(enc1_.apply(tape, store_, x))));

    if (cfg_.prior_dim > 0) {
      TensorT<T> priors(n + 1, cfg_.prior_dim, T(0));  // ego row zero-padded
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].prior.size()) != cfg_.prior_dim)
          throw std::invalid_argument("policy forward: prior dim mismatch");
        for (int j = 0; j < cfg_.prior_dim; ++j)
          priors.at(i + 1, j) = static_cast<T>(rows[i].prior[j]);
      }
      enc = tape.concat_cols(enc, tape.constant(std::move(priors)));
    }

    TensorT<T> bias(1, n + 1, T(0));  // no padded rows survive canonicalization
    Id at = attn_.apply(tape, store_, enc, tape.constant(std::move(bias)));
    Id trunk = tape.tanh_op(dec2_.apply(tape, store_,
                                        tape.tanh_op(dec1_.apply(tape, store_, at))));
    return {logits_head_.apply(tape, store_, trunk), value_head_.apply(tape, store_, trunk)};
  }

  PolicyOutput forward(const PolicyInput& in) {
    TapeT<T> tape;
    auto [logits, value] = forward_ids(tape, in);
    PolicyOutput out;
    for (int i = 0; i < cfg_.num_actions; ++i)
      out.logits[i] = static_cast<double>(tape.value(logits).at(0, i));
    out.value = static_cast<double>(tape.value(value).scalar());
    return out;
  }

 private:
  PolicyConfig cfg_;
  ParamStoreT<T> store_;
  LinearT<T> enc1_, enc2_, dec1_, dec2_, logits_head_, value_head_;
  MultiHeadAttentionT<T> attn_;
};

enum class ActMode { Sample, Greedy };

// Draws an action (seeded) or takes the argmax with lowest-index tie-break.
inline std::pair<Action, double> act(const PolicyOutput& out, ActMode mode, Rng& rng) {
  auto p = out.probs();
  int choice = 0;
  if (mode == ActMode::Greedy) {
    for (int i = 1; i < 3; ++i)
      if (p[i] > p[choice]) choice = i;
  } else {
    double u = rng.uniform();
    double acc = 0.0;
    choice = 2;
    for (int i = 0; i < 3; ++i) {
      acc += p[i];
      if (u < acc) { choice = i; break; }
    }
  }
  return {static_cast<Action>(choice), std::log(p[choice])};
}

using PolicyNet = PolicyNetT<float>;

}  // namespace sca
