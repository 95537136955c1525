#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nlohmann/json.hpp"
#include "sca/rng.hpp"
#include "sca/tensor.hpp"

namespace sca {

// Owning registry of named parameters; models hold indices into it so the
// store can be saved, loaded, and stepped as a unit.
template <typename T>
class ParamStoreT {
 public:
  int add(const std::string& name, TensorT<T> value) {
    if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
    index_[name] = static_cast<int>(params_.size());
    params_.emplace_back(name, std::move(value));
    return static_cast<int>(params_.size()) - 1;
  }

  ParamT<T>& operator[](int i) { return params_[i]; }
  const ParamT<T>& operator[](int i) const { return params_[i]; }
  ParamT<T>& by_name(const std::string& n) { return params_[index_.at(n)]; }
  std::size_t size() const { return params_.size(); }
  void zero_grads() {
    for (auto& p : params_) p.zero_grad();
  }

  std::vector<ParamT<T>>& all() { return params_; }
  const std::vector<ParamT<T>>& all() const { return params_; }

 private:
  std::vector<ParamT<T>> params_;
  std::map<std::string, int> index_;
};

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases.
template <typename T>
TensorT<T> init_weight(int rows, int cols, int fan_in, Rng& rng) {
  TensorT<T> w(rows, cols, T(0));
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& x : w.data) x = static_cast<T>(rng.uniform(-bound, bound));
  return w;
}

template <typename T>
struct LinearT {
  int w = -1, b = -1;

  LinearT() = default;
  LinearT(ParamStoreT<T>& store, const std::string& name, int in, int out, Rng& rng) {
    w = store.add(name + ".w", init_weight<T>(in, out, in, rng));
    b = store.add(name + ".b", TensorT<T>(1, out, T(0)));
  }

  typename TapeT<T>::Id apply(TapeT<T>& tape, ParamStoreT<T>& store,
                              typename TapeT<T>::Id x) const {
    return tape.add(tape.matmul(x, tape.param(store[w])), tape.param(store[b]));
  }
};

// Gated recurrent unit cell. step() returns (h', z) so callers can consume
// the update-gate sequence.
template <typename T>
struct GruCellT {
  int wz = -1, wr = -1, wh = -1, bz = -1, br = -1, bh = -1;
  int input_dim = 0, hidden_dim = 0;

  GruCellT() = default;
  GruCellT(ParamStoreT<T>& store, const std::string& name, int in, int hidden, Rng& rng)
      : input_dim(in), hidden_dim(hidden) {
    int fan = in + hidden;
    wz = store.add(name + ".wz", init_weight<T>(fan, hidden, fan, rng));
    wr = store.add(name + ".wr", init_weight<T>(fan, hidden, fan, rng));
    wh = store.add(name + ".wh", init_weight<T>(fan, hidden, fan, rng));
    bz = store.add(name + ".bz", TensorT<T>(1, hidden, T(0)));
    br = store.add(name + ".br", TensorT<T>(1, hidden, T(0)));
    bh = store.add(name + ".bh", TensorT<T>(1, hidden, T(0)));
  }

  std::pair<typename TapeT<T>::Id, typename TapeT<T>::Id> step(
      TapeT<T>& tape, ParamStoreT<T>& store, typename TapeT<T>::Id x,
      typename TapeT<T>::Id h) const {
    auto xh = tape.concat_cols(x, h);
    auto z = tape.sigmoid_op(tape.add(tape.matmul(xh, tape.param(store[wz])), tape.param(store[bz])));
    auto r = tape.sigmoid_op(tape.add(tape.matmul(xh, tape.param(store[wr])), tape.param(store[br])));
    auto xrh = tape.concat_cols(x, tape.mul(r, h));
    auto cand = tape.tanh_op(tape.add(tape.matmul(xrh, tape.param(store[wh])), tape.param(store[bh])));
    // h' = (1-z) o h + z o cand, written as h + z o (cand - h).
    auto hn = tape.add(h, tape.mul(z, tape.sub(cand, h)));
    return {hn, z};
  }
};

// Ego-query multi-head scaled dot-product attention. Head outputs are each
// linearly projected and summed.
template <typename T>
struct MultiHeadAttentionT {
  struct Head {
    int wq = -1, wk = -1, wv = -1, wo = -1;
  };
  std::vector<Head> heads;
  int head_dim = 0, out_dim = 0;

  MultiHeadAttentionT() = default;
  MultiHeadAttentionT(ParamStoreT<T>& store, const std::string& name, int in_dim,
                      int attn_dim, int num_heads, int out, Rng& rng)
      : head_dim(attn_dim / num_heads), out_dim(out) {
    if (attn_dim % num_heads != 0)
      throw std::invalid_argument("attention: attn_dim must divide by heads");
    for (int m = 0; m < num_heads; ++m) {
      Head h;
      std::string base = name + ".h" + std::to_string(m);
      h.wq = store.add(base + ".wq", init_weight<T>(in_dim, head_dim, in_dim, rng));
      h.wk = store.add(base + ".wk", init_weight<T>(in_dim, head_dim, in_dim, rng));
      h.wv = store.add(base + ".wv", init_weight<T>(in_dim, head_dim, in_dim, rng));
      h.wo = store.add(base + ".wo", init_weight<T>(head_dim, out, head_dim, rng));
      heads.push_back(h);
    }
  }

  // X: (n+1) x in_dim with the ego in row 0. mask_bias: 1 x (n+1) additive
  // pre-softmax bias (0 for valid rows, -1e9 for padded rows).
  typename TapeT<T>::Id apply(TapeT<T>& tape, ParamStoreT<T>& store,
                              typename TapeT<T>::Id X,
                              typename TapeT<T>::Id mask_bias) const {
    typename TapeT<T>::Id out = -1;
    auto ego = tape.slice_rows(X, 0, 1);
    T inv_sqrt = T(1) / std::sqrt(static_cast<T>(head_dim));
    for (const auto& h : heads) {
      auto q = tape.matmul(ego, tape.param(store[h.wq]));  // 1 x d
      auto k = tape.matmul(X, tape.param(store[h.wk]));    // n+1 x d
      auto v = tape.matmul(X, tape.param(store[h.wv]));    // n+1 x d
      auto scores = tape.add(tape.scale(tape.matmul(q, k, false, true), inv_sqrt), mask_bias);
      auto weights = tape.softmax_rows(scores);            // 1 x n+1
      auto head_out = tape.matmul(tape.matmul(weights, v), tape.param(store[h.wo]));
      out = out < 0 ? head_out : tape.add(out, head_out);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class AdamT {
 public:
  AdamT(ParamStoreT<T>& store, const AdamConfig& cfg) : store_(&store), cfg_(cfg) {
    for (auto& p : store.all()) {
      m_.emplace_back(p.value.rows(), p.value.cols(), T(0));
      v_.emplace_back(p.value.rows(), p.value.cols(), T(0));
    }
  }

  // Bias-corrected update; zeroes gradients afterwards.
  void step() {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < store_->size(); ++i) {
      auto& p = (*store_)[static_cast<int>(i)];
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        T g = p.grad.data[k];
        m_[i].data[k] = static_cast<T>(cfg_.beta1) * m_[i].data[k] + static_cast<T>(1.0 - cfg_.beta1) * g;
        v_[i].data[k] = static_cast<T>(cfg_.beta2) * v_[i].data[k] + static_cast<T>(1.0 - cfg_.beta2) * g * g;
        double mhat = m_[i].data[k] / bc1;
        double vhat = v_[i].data[k] / bc2;
        p.value.data[k] -= static_cast<T>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
      p.zero_grad();
    }
  }

  int step_count() const { return t_; }

 private:
  ParamStoreT<T>* store_;
  AdamConfig cfg_;
  std::vector<TensorT<T>> m_, v_;
  int t_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoint format: "NNCKPT1\n", u64 LE json index length, json index
// [{name, shape, offset}] (offset in bytes into the payload), then raw
// little-endian float32 payloads.
// ---------------------------------------------------------------------------

template <typename T>
void save_checkpoint(const ParamStoreT<T>& store, const std::string& path) {
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& p : store.all()) {
    index.push_back({{"name", p.name}, {"shape", p.value.shape}, {"offset", offset}});
    offset += p.value.size() * sizeof(float);
  }
  std::string idx = index.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f.write("NNCKPT1\n", 8);
  std::uint64_t len = idx.size();
  f.write(reinterpret_cast<const char*>(&len), 8);
  f.write(idx.data(), static_cast<std::streamsize>(idx.size()));
  for (const auto& p : store.all()) {
    for (T x : p.value.data) {
      float v = static_cast<float>(x);
      f.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

// Loads into an already-constructed store with matching names and shapes.
template <typename T>
void load_checkpoint(ParamStoreT<T>& store, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "NNCKPT1\n", 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), 8);
  std::string idx(len, '\0');
  f.read(idx.data(), static_cast<std::streamsize>(len));
  nlohmann::json index = nlohmann::json::parse(idx);
  std::vector<char> payload((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  for (const auto& entry : index) {
    std::string name = entry.at("name");
    std::vector<int> shape = entry.at("shape");
    std::uint64_t offset = entry.at("offset");
    ParamT<T>& p = store.by_name(name);
    if (p.value.shape != shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    if (offset + p.value.size() * 4 > payload.size())
      throw std::runtime_error("load_checkpoint: payload too short for " + name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      float v;
      std::memcpy(&v, payload.data() + offset + i * 4, 4);
      p.value.data[i] = static_cast<T>(v);
    }
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking
// ---------------------------------------------------------------------------

// Central finite differences per sampled parameter coordinate against the
// analytic gradient; returns the max relative error. `loss` must rebuild its
// tape from the store on every call and must not mutate state.
template <typename T>
double grad_check(ParamStoreT<T>& store, const std::function<double()>& loss_value,
                  const std::function<void()>& loss_backward, double h = 1e-3,
                  int max_coords_per_tensor = 50, std::uint64_t seed = 1234) {
  store.zero_grads();
  loss_backward();  // populates grads
  Rng rng(seed);
  double max_rel = 0.0;
  for (auto& p : store.all()) {
    std::size_t n = p.value.size();
    std::vector<std::size_t> coords;
    if (static_cast<int>(n) <= max_coords_per_tensor) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < max_coords_per_tensor; ++i)
        coords.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1)));
    }
    for (std::size_t c : coords) {
      T orig = p.value.data[c];
      p.value.data[c] = orig + static_cast<T>(h);
      double fp = loss_value();
      p.value.data[c] = orig - static_cast<T>(h);
      double fm = loss_value();
      p.value.data[c] = orig;
      double fd = (fp - fm) / (2.0 * h);
      double an = static_cast<double>(p.grad.data[c]);
      double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      double rel = std::abs(fd - an) / denom;
      if (rel > max_rel) max_rel = rel;
    }
  }
  store.zero_grads();
  return max_rel;
}

}  // namespace sca
