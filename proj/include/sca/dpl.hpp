#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "sca/geometry.hpp"
#include "sca/nn.hpp"
#include "sca/rng.hpp"
#include "sca/tensor.hpp"

namespace sca {

struct DplConfig {
  int window = 20;        // delta, decision steps per trajectory window
  int stride = 5;         // decision steps between window starts
  int embed_dim = 128;
  int gru_hidden = 256;
  int latent_dim = 16;    // m
  double lr = 5e-4;
  int batch = 1024;
  int epochs = 500;
  double kl_beta = 0.001; // 0 gives the plain L2 reconstruction objective
  double val_fraction = 0.1;
  double log_std_min = -6.0;
  double log_std_max = 2.0;
};

// Position window of one HV, normalized to the layout frame.
struct TrajectoryWindow {
  std::vector<Vec2> positions;  // length = window
  int style = 0;                // DriverStyle index, carried for probing
  int episode = 0;
};

// Map a window into the canonical quadrant of the layout frame. The
// intersection is 4-fold rotation and mirror symmetric, so a trajectory and
// its image under any of those isometries describe the same behavior; fixing
// a canonical representative removes the approach arm and turn handedness as
// spurious factors of variation. The point farthest from the junction center
// (the most reliable arm indicator) is rotated into the south quadrant by an
// exact multiple of pi/2, then the window is mirrored across the y-axis if
// its net displacement points east. Exact coordinate swaps keep the map
// bit-deterministic.
inline void canonicalize_window(std::vector<Vec2>& positions) {
  if (positions.empty()) return;
  const Vec2* ref = &positions[0];
  double best = ref->x * ref->x + ref->y * ref->y;
  for (const auto& p : positions) {
    double n = p.x * p.x + p.y * p.y;
    if (n > best) {
      best = n;
      ref = &p;
    }
  }
  // Quadrant of the reference point: south [-3pi/4, -pi/4), east [-pi/4,
  // pi/4), north [pi/4, 3pi/4), west elsewhere. Rotate that quadrant onto
  // south (k quarter-turns clockwise).
  int k = 0;
  double ax = std::fabs(ref->x), ay = std::fabs(ref->y);
  if (ay >= ax)
    k = ref->y < 0.0 ? 0 : 2;
  else
    k = ref->x > 0.0 ? 1 : 3;
  if (k != 0) {
    for (auto& p : positions) {
      for (int r = 0; r < k; ++r) {
        double nx = p.y, ny = -p.x;  // clockwise quarter turn
        p.x = nx;
        p.y = ny;
      }
    }
  }
  double net_dx = positions.back().x - positions.front().x;
  if (net_dx > 0.0)
    for (auto& p : positions) p.x = -p.x;
}

struct GaussianLatent {
  std::vector<double> mu;
  std::vector<double> sigma;
};

// GRU variational autoencoder over HV position windows. Encoder: embedding,
// two GRU layers, the layer-2 update-gate sequence through a shared dense
// layer, then mu / log-std heads. Decoder: z projected to one conditioning
// column per step, two GRU layers, per-step two-layer head back to positions.
template <typename T>
class DplModelT {
 public:
  using Id = typename TapeT<T>::Id;

  DplModelT(const DplConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    Rng rng = Rng(init_seed).fork(11);
    embed_ = LinearT<T>(store_, "dpl.embed", 2, cfg.embed_dim, rng);
    enc_gru1_ = GruCellT<T>(store_, "dpl.enc.gru1", cfg.embed_dim, cfg.gru_hidden, rng);
    enc_gru2_ = GruCellT<T>(store_, "dpl.enc.gru2", cfg.gru_hidden, cfg.gru_hidden, rng);
    enc_fc_ = LinearT<T>(store_, "dpl.enc.fc", cfg.window * cfg.gru_hidden, cfg.gru_hidden, rng);
    mu_head_ = LinearT<T>(store_, "dpl.enc.mu", cfg.gru_hidden, cfg.latent_dim, rng);
    logstd_head_ = LinearT<T>(store_, "dpl.enc.logstd", cfg.gru_hidden, cfg.latent_dim, rng);
    dec_proj_ = LinearT<T>(store_, "dpl.dec.proj", cfg.latent_dim,
                           cfg.latent_dim * cfg.window, rng);
    dec_gru1_ = GruCellT<T>(store_, "dpl.dec.gru1", cfg.latent_dim, cfg.gru_hidden, rng);
    dec_gru2_ = GruCellT<T>(store_, "dpl.dec.gru2", cfg.gru_hidden, cfg.gru_hidden, rng);
    dec_fc1_ = LinearT<T>(store_, "dpl.dec.fc1", cfg.gru_hidden, cfg.gru_hidden, rng);
    dec_fc2_ = LinearT<T>(store_, "dpl.dec.fc2", cfg.gru_hidden, 2, rng);
  }

  const DplConfig& config() const { return cfg_; }
  ParamStoreT<T>& store() { return store_; }
  const ParamStoreT<T>& store() const { return store_; }

  // Batch of windows as one leaf tensor per timestep (B x 2 each).
  static std::vector<TensorT<T>> batch_steps(const std::vector<TrajectoryWindow>& windows,
                                             const std::vector<int>& idx, int window_len) {
    std::vector<TensorT<T>> steps;
    steps.reserve(window_len);
    for (int t = 0; t < window_len; ++t) {
      TensorT<T> x(static_cast<int>(idx.size()), 2, T(0));
      for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto& w = windows[idx[b]];
        if (static_cast<int>(w.positions.size()) != window_len)
          throw std::invalid_argument("DplModel: window shorter than delta");
        x.at(static_cast<int>(b), 0) = static_cast<T>(w.positions[t].x);
        x.at(static_cast<int>(b), 1) = static_cast<T>(w.positions[t].y);
      }
      steps.push_back(std::move(x));
    }
    return steps;
  }

  // Returns (mu, log_std) ids, each B x latent_dim.
  std::pair<Id, Id> encode(TapeT<T>& tape, const std::vector<TensorT<T>>& steps) {
    if (static_cast<int>(steps.size()) != cfg_.window)
      throw std::invalid_argument("encode: expected " + std::to_string(cfg_.window) + " steps");
    int batch = steps[0].rows();
    Id h1 = tape.constant(TensorT<T>(batch, cfg_.gru_hidden, T(0)));
    Id h2 = tape.constant(TensorT<T>(batch, cfg_.gru_hidden, T(0)));
    Id gates = -1;
    for (int t = 0; t < cfg_.window; ++t) {
      Id x = tape.tanh_op(embed_.apply(tape, store_, tape.constant(steps[t])));
      auto [h1n, z1] = enc_gru1_.step(tape, store_, x, h1);
      (void)z1;
      auto [h2n, z2] = enc_gru2_.step(tape, store_, h1n, h2);
      h1 = h1n;
      h2 = h2n;
      gates = gates < 0 ? z2 : tape.concat_cols(gates, z2);
    }
    Id shared = tape.tanh_op(enc_fc_.apply(tape, store_, gates));
    Id mu = mu_head_.apply(tape, store_, shared);
    Id log_std = tape.clamp_op(logstd_head_.apply(tape, store_, shared),
                               static_cast<T>(cfg_.log_std_min), static_cast<T>(cfg_.log_std_max));
    return {mu, log_std};
  }

  // Reparameterized sample z = mu + eps o sigma.
  Id sample(TapeT<T>& tape, Id mu, Id log_std, const TensorT<T>& eps) {
    return tape.add(mu, tape.mul(tape.exp_op(log_std), tape.constant(eps)));
  }

  // z: B x latent_dim -> reconstruction B x (2*window), step-major [p0 p1 ...].
  Id decode(TapeT<T>& tape, Id z) {
    int batch = tape.value(z).rows();
    Id cond = dec_proj_.apply(tape, store_, z);  // B x (m*window)
    Id h1 = tape.constant(TensorT<T>(batch, cfg_.gru_hidden, T(0)));
    Id h2 = tape.constant(TensorT<T>(batch, cfg_.gru_hidden, T(0)));
    Id out = -1;
    for (int t = 0; t < cfg_.window; ++t) {
      Id zt = tape.slice_cols(cond, t * cfg_.latent_dim, (t + 1) * cfg_.latent_dim);
      auto [h1n, z1] = dec_gru1_.step(tape, store_, zt, h1);
      (void)z1;
      auto [h2n, z2] = dec_gru2_.step(tape, store_, h1n, h2);
      (void)z2;
      h1 = h1n;
      h2 = h2n;
      Id p = dec_fc2_.apply(tape, store_, tape.tanh_op(dec_fc1_.apply(tape, store_, h2n)));
      out = out < 0 ? p : tape.concat_cols(out, p);
    }
    return out;
  }

  // MSE over all window entries plus kl_beta * KL(N(mu, sigma^2) || N(0, I)),
  // KL summed over latent dims and averaged over the batch.
  Id loss(TapeT<T>& tape, Id recon, Id target, Id mu, Id log_std, double kl_beta) {
    Id l = tape.mse(recon, target);
    if (kl_beta != 0.0) {
      Id sigma2 = tape.exp_op(tape.scale(log_std, T(2)));
      Id mu2 = tape.mul(mu, mu);
      Id inner = tape.add_const(tape.sub(tape.add(sigma2, mu2), tape.scale(log_std, T(2))), T(-1));
      Id kl = tape.scale(tape.sum_all(inner), static_cast<T>(0.5 / tape.value(mu).rows()));
      l = tape.add(l, tape.scale(kl, static_cast<T>(kl_beta)));
    }
    return l;
  }

  // Deterministic latent mean for a position history (decision-step
  // resolution, layout-normalized). Histories shorter than the window are
  // left-padded with their first position; longer ones keep the last window.
  std::vector<double> infer_prior(const std::vector<Vec2>& history) {
    if (history.empty()) throw std::invalid_argument("infer_prior: empty history");
    TrajectoryWindow w;
    w.positions.reserve(cfg_.window);
    int n = static_cast<int>(history.size());
    for (int t = 0; t < cfg_.window; ++t) {
      int src = n - cfg_.window + t;
      w.positions.push_back(src < 0 ? history.front() : history[src]);
    }
    canonicalize_window(w.positions);
    TapeT<T> tape;
    auto steps = batch_steps({w}, {0}, cfg_.window);
    auto [mu, log_std] = encode(tape, steps);
    (void)log_std;
    std::vector<double> out(cfg_.latent_dim);
    for (int i = 0; i < cfg_.latent_dim; ++i)
      out[i] = static_cast<double>(tape.value(mu).at(0, i));
    return out;
  }

  GaussianLatent encode_window(const TrajectoryWindow& w) {
    TapeT<T> tape;
    auto steps = batch_steps({w}, {0}, cfg_.window);
    auto [mu, log_std] = encode(tape, steps);
    GaussianLatent g;
    for (int i = 0; i < cfg_.latent_dim; ++i) {
      g.mu.push_back(static_cast<double>(tape.value(mu).at(0, i)));
      g.sigma.push_back(std::exp(static_cast<double>(tape.value(log_std).at(0, i))));
    }
    return g;
  }

  static TensorT<T> target_tensor(const std::vector<TrajectoryWindow>& windows,
                                  const std::vector<int>& idx, int window_len) {
    TensorT<T> y(static_cast<int>(idx.size()), 2 * window_len, T(0));
    for (std::size_t b = 0; b < idx.size(); ++b)
      for (int t = 0; t < window_len; ++t) {
        y.at(static_cast<int>(b), 2 * t) = static_cast<T>(windows[idx[b]].positions[t].x);
        y.at(static_cast<int>(b), 2 * t + 1) = static_cast<T>(windows[idx[b]].positions[t].y);
      }
    return y;
  }

 private:
  DplConfig cfg_;
  ParamStoreT<T> store_;
  LinearT<T> embed_, enc_fc_, mu_head_, logstd_head_, dec_proj_, dec_fc1_, dec_fc2_;
  GruCellT<T> enc_gru1_, enc_gru2_, dec_gru1_, dec_gru2_;
};

struct DplEpochStats {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double kl = 0.0;
};

// Unsupervised training with a seeded shuffle; 90/10 train/val split by
// episode. Returns the per-epoch loss curve; the caller saves the checkpoint.
template <typename T>
std::vector<DplEpochStats> train_dpl(DplModelT<T>& model,
                                     const std::vector<TrajectoryWindow>& windows,
                                     std::uint64_t seed) {
  if (windows.empty()) throw std::invalid_argument("train_dpl: empty dataset");
  const DplConfig& cfg = model.config();

  int max_episode = 0;
  for (const auto& w : windows) max_episode = std::max(max_episode, w.episode);
  std::vector<int> train_idx, val_idx;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    // Deterministic split: last val_fraction of episode ids are validation.
    bool val = windows[i].episode >= static_cast<int>((1.0 - cfg.val_fraction) * (max_episode + 1));
    (val ? val_idx : train_idx).push_back(static_cast<int>(i));
  }
  if (train_idx.empty() || val_idx.empty()) {
    // Degenerate split (single episode): fall back to a tail split by index.
    train_idx.clear();
    val_idx.clear();
    std::size_t cut = std::max<std::size_t>(1, windows.size() - windows.size() / 10 - 1);
    for (std::size_t i = 0; i < windows.size(); ++i)
      (i < cut ? train_idx : val_idx).push_back(static_cast<int>(i));
  }

  Rng shuffle_rng = Rng(seed).fork(21);
  Rng eps_rng = Rng(seed).fork(22);
  AdamT<T> adam(model.store(), {cfg.lr, 0.9, 0.999, 1e-8});

  auto eval_mse = [&](const std::vector<int>& idx) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < idx.size(); start += cfg.batch) {
      std::vector<int> part(idx.begin() + start,
                            idx.begin() + std::min(idx.size(), start + cfg.batch));
      TapeT<T> tape;
      auto steps = DplModelT<T>::batch_steps(windows, part, cfg.window);
      auto [mu, log_std] = model.encode(tape, steps);
      (void)log_std;
      auto recon = model.decode(tape, mu);  // eps = 0 path
      auto target = tape.constant(DplModelT<T>::target_tensor(windows, part, cfg.window));
      total += static_cast<double>(tape.value(tape.mse(recon, target)).scalar()) * part.size();
      count += part.size();
    }
    return total / static_cast<double>(count);
  };

  std::vector<DplEpochStats> curve;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Fisher-Yates with the seeded generator.
    std::vector<int> order = train_idx;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);

    double train_loss = 0.0, kl_total = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      std::vector<int> part(order.begin() + start,
                            order.begin() + std::min(order.size(), start + cfg.batch));
      TapeT<T> tape;
      auto steps = DplModelT<T>::batch_steps(windows, part, cfg.window);
      auto [mu, log_std] = model.encode(tape, steps);
      TensorT<T> eps(static_cast<int>(part.size()), cfg.latent_dim, T(0));
      for (auto& e : eps.data) e = static_cast<T>(eps_rng.normal());
      auto z = model.sample(tape, mu, log_std, eps);
      auto recon = model.decode(tape, z);
      auto target = tape.constant(DplModelT<T>::target_tensor(windows, part, cfg.window));
      auto mse_id = tape.mse(recon, target);
      auto l = model.loss(tape, recon, target, mu, log_std, cfg.kl_beta);
      model.store().zero_grads();
      tape.backward(l);
      adam.step();
      double lv = static_cast<double>(tape.value(l).scalar());
      double mv = static_cast<double>(tape.value(mse_id).scalar());
      train_loss += mv * part.size();
      kl_total += (lv - mv) * part.size();
      count += part.size();
    }
    DplEpochStats st;
    st.epoch = epoch;
    st.train_mse = train_loss / static_cast<double>(count);
    st.kl = cfg.kl_beta != 0.0 ? kl_total / static_cast<double>(count) / cfg.kl_beta : 0.0;
    st.val_mse = eval_mse(val_idx);
    curve.push_back(st);
  }
  return curve;
}

using DplModel = DplModelT<float>;

}  // namespace sca
