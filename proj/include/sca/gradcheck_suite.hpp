#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sca/dpl.hpp"
#include "sca/nn.hpp"
#include "sca/policy.hpp"
#include "sca/tensor.hpp"

namespace sca {

// Finite-difference verification of the reverse-mode gradients, in double
// precision. Every primitive op gets its own check; the composite checks
// cover the realistic computation graphs (GRU step, attention block, the
// full generative-model loss, the full actor-critic loss).

struct GradCheckEntry {
  std::string name;
  bool composite = false;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst_single = 0.0;
  double worst_composite = 0.0;
};

namespace gradsuite_detail {

using D = double;

inline TensorT<D> randt(int r, int c, Rng& rng, double scale = 0.7) {
  TensorT<D> t(r, c, 0.0);
  for (auto& x : t.data) x = rng.uniform(-scale, scale);
  return t;
}

// Runs grad_check over a loss builder that maps (tape, param ids...) to a
// scalar node. The builder closes over the store.
inline double check(ParamStoreT<D>& store, const std::function<double(bool)>& run) {
  return grad_check(
      store, [&] { return run(false); }, [&] { (void)run(true); }, 1e-5, 50, 7);
}

}  // namespace gradsuite_detail

// Helper so the suite body reads uniformly.
template <typename T>
ParamStoreT<T>& store_of(DplModelT<T>& m) { return m.store(); }

inline GradCheckReport run_gradcheck_suite() {
  using namespace gradsuite_detail;
  GradCheckReport rep;
  Rng rng(99);

  auto add_entry = [&](const std::string& name, bool composite, double err) {
    rep.entries.push_back({name, composite, err});
    if (composite)
      rep.worst_composite = std::max(rep.worst_composite, err);
    else
      rep.worst_single = std::max(rep.worst_single, err);
  };

  // --- single-op checks: loss = sum(op(params)) --------------------------
  auto single = [&](const std::string& name,
                    const std::function<typename TapeT<D>::Id(TapeT<D>&, ParamStoreT<D>&)>& body,
                    const std::function<void(ParamStoreT<D>&, Rng&)>& setup) {
    ParamStoreT<D> store;
    Rng local = rng.fork(static_cast<std::uint64_t>(rep.entries.size() + 1));
    setup(store, local);
    auto run = [&](bool do_backward) {
      TapeT<D> tape;
      auto loss = tape.sum_all(body(tape, store));
      if (do_backward) tape.backward(loss);
      return tape.value(loss).scalar();
    };
    add_entry(name, false, check(store, run));
  };

  auto two_params = [](ParamStoreT<D>& s, Rng& r) {
    s.add("a", randt(3, 4, r));
    s.add("b", randt(3, 4, r));
  };

  single("matmul", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.matmul(t.param(s.by_name("a")), t.param(s.by_name("b")));
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); s.add("b", randt(4, 5, r)); });
  single("matmul_ta", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.matmul(t.param(s.by_name("a")), t.param(s.by_name("b")), true, false);
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(4, 3, r)); s.add("b", randt(4, 5, r)); });
  single("matmul_tb", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.matmul(t.param(s.by_name("a")), t.param(s.by_name("b")), false, true);
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); s.add("b", randt(5, 4, r)); });
  single("add", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.add(t.param(s.by_name("a")), t.param(s.by_name("b")));
  }, two_params);
  single("add_broadcast_row", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.add(t.param(s.by_name("a")), t.param(s.by_name("b")));
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); s.add("b", randt(1, 4, r)); });
  single("sub", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.sub(t.param(s.by_name("a")), t.param(s.by_name("b")));
  }, two_params);
  single("mul", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.mul(t.param(s.by_name("a")), t.param(s.by_name("b")));
  }, two_params);
  single("scale", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.scale(t.param(s.by_name("a")), 1.7);
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); });
  single("add_const", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.add_const(t.param(s.by_name("a")), -0.3);
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); });
  single("tanh", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.tanh_op(t.param(s.by_name("a")));
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); });
  single("sigmoid", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.sigmoid_op(t.param(s.by_name("a")));
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); });
  single("relu", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.relu(t.param(s.by_name("a")));
  }, [](ParamStoreT<D>& s, Rng& r) {
    s.add("a", randt(3, 4, r));
    // keep values away from the kink so the FD quotient is valid
    for (auto& x : s.by_name("a").value.data)
      if (std::abs(x) < 0.05) x = x < 0 ? -0.1 : 0.1;
  });
  single("exp", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.exp_op(t.param(s.by_name("a")));
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); });
  single("log", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.log_op(t.param(s.by_name("a")));
  }, [](ParamStoreT<D>& s, Rng& r) {
    s.add("a", randt(3, 4, r));
    for (auto& x : s.by_name("a").value.data) x = std::abs(x) + 0.5;
  });
  single("softmax_rows", [](TapeT<D>& t, ParamStoreT<D>& s) {
    // weight by a fixed tensor so the (sum==1) degeneracy does not hide errors
    TensorT<D> w(3, 4, 0.0);
    for (int i = 0; i < 12; ++i) w.data[i] = 0.1 * (i + 1);
    return t.mul(t.softmax_rows(t.param(s.by_name("a"))), t.constant(std::move(w)));
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); });
  single("concat_cols", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.concat_cols(t.param(s.by_name("a")), t.param(s.by_name("b")));
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); s.add("b", randt(3, 2, r)); });
  single("concat_rows", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.concat_rows(t.param(s.by_name("a")), t.param(s.by_name("b")));
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); s.add("b", randt(2, 4, r)); });
  single("slice_rows", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.slice_rows(t.param(s.by_name("a")), 1, 3);
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(4, 3, r)); });
  single("slice_cols", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.slice_cols(t.param(s.by_name("a")), 1, 3);
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); });
  single("flatten_row", [](TapeT<D>& t, ParamStoreT<D>& s) {
    TensorT<D> w(1, 12, 0.0);
    for (int i = 0; i < 12; ++i) w.data[i] = 0.05 * (i + 1);
    return t.mul(t.flatten_row(t.param(s.by_name("a"))), t.constant(std::move(w)));
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); });
  single("mean_all", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.mean_all(t.param(s.by_name("a")));
  }, [](ParamStoreT<D>& s, Rng& r) { s.add("a", randt(3, 4, r)); });
  single("mse", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.mse(t.param(s.by_name("a")), t.param(s.by_name("b")));
  }, two_params);
  single("clamp", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.clamp_op(t.param(s.by_name("a")), -0.4, 0.4);
  }, [](ParamStoreT<D>& s, Rng& r) {
    s.add("a", randt(3, 4, r));
    for (auto& x : s.by_name("a").value.data)
      if (std::abs(std::abs(x) - 0.4) < 0.05) x *= 0.5;  // keep away from the kink
  });
  single("minimum", [](TapeT<D>& t, ParamStoreT<D>& s) {
    return t.minimum(t.param(s.by_name("a")), t.param(s.by_name("b")));
  }, [](ParamStoreT<D>& s, Rng& r) {
    s.add("a", randt(3, 4, r));
    s.add("b", randt(3, 4, r));
    auto& a = s.by_name("a").value.data;
    auto& b = s.by_name("b").value.data;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::abs(a[i] - b[i]) < 0.05) b[i] += 0.2;  // keep away from the tie
  });

  // --- composite chains ----------------------------------------------------
  {
    // GRU cell unrolled three steps.
    ParamStoreT<D> store;
    Rng local = rng.fork(101);
    GruCellT<D> cell(store, "gru", 3, 5, local);
    std::vector<TensorT<D>> xs;
    for (int i = 0; i < 3; ++i) xs.push_back(randt(2, 3, local));
    auto run = [&](bool bw) {
      TapeT<D> tape;
      auto h = tape.constant(TensorT<D>(2, 5, 0.0));
      for (int i = 0; i < 3; ++i) {
        auto [hn, z] = cell.step(tape, store, tape.constant(xs[i]), h);
        (void)z;
        h = hn;
      }
      auto loss = tape.sum_all(tape.tanh_op(h));
      if (bw) tape.backward(loss);
      return tape.value(loss).scalar();
    };
    add_entry("gru_chain", true, check(store, run));
  }
  {
    // Ego-query attention over encoded rows.
    ParamStoreT<D> store;
    Rng local = rng.fork(102);
    LinearT<D> enc(store, "enc", 4, 6, local);
    MultiHeadAttentionT<D> attn(store, "attn", 6, 8, 2, 5, local);
    TensorT<D> x = randt(4, 4, local);
    TensorT<D> bias(1, 4, 0.0);
    bias.at(0, 3) = -1e9;  // one masked row
    auto run = [&](bool bw) {
      TapeT<D> tape;
      auto e = tape.tanh_op(enc.apply(tape, store, tape.constant(x)));
      auto at = attn.apply(tape, store, e, tape.constant(bias));
      auto loss = tape.sum_all(tape.tanh_op(at));
      if (bw) tape.backward(loss);
      return tape.value(loss).scalar();
    };
    add_entry("attention_chain", true, check(store, run));
  }
  {
    // Full generative-model training loss on a tiny batch.
    DplConfig dc;
    dc.window = 6;
    dc.stride = 2;
    dc.embed_dim = 5;
    dc.gru_hidden = 7;
    dc.latent_dim = 3;
    DplModelT<D> model(dc, 17);
    Rng local = rng.fork(103);
    std::vector<TrajectoryWindow> wins;
    for (int i = 0; i < 3; ++i) {
      TrajectoryWindow w;
      for (int k = 0; k < dc.window; ++k)
        w.positions.push_back({local.uniform(-1, 1), local.uniform(-1, 1)});
      wins.push_back(w);
    }
    std::vector<int> all = {0, 1, 2};
    TensorT<D> eps = randt(3, dc.latent_dim, local, 0.3);
    auto run = [&](bool bw) {
      TapeT<D> tape;
      auto steps = DplModelT<D>::batch_steps(wins, all, dc.window);
      auto [mu, log_std] = model.encode(tape, steps);
      auto z = model.sample(tape, mu, log_std, eps);
      auto recon = model.decode(tape, z);
      auto target = tape.constant(DplModelT<D>::target_tensor(wins, all, dc.window));
      auto loss = model.loss(tape, recon, target, mu, log_std, dc.kl_beta);
      if (bw) tape.backward(loss);
      return tape.value(loss).scalar();
    };
    add_entry("dpl_loss_chain", true, check(store_of(model), run));
  }
  {
    // Full actor-critic objective: clipped surrogate + value + entropy.
    PolicyConfig pc;
    pc.encoder_hidden = 6;
    pc.attention_dim = 8;
    pc.heads = 2;
    pc.decoder_hidden = 6;
    pc.prior_dim = 3;
    PolicyNetT<D> policy(pc, 23);
    Rng local = rng.fork(104);
    PolicyInput in;
    in.obs.ego = {0.1, -0.2, 0.3, 0.05};
    in.obs.rows.resize(3);
    in.obs.mask = {true, true, false};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) in.obs.rows[i][j] = local.uniform(-0.5, 0.5);
    for (int i = 0; i < 2; ++i)
      in.priors.push_back({local.uniform(-1, 1), local.uniform(-1, 1), local.uniform(-1, 1)});
    double old_logprob = -1.1, advantage = 0.8, ret = 0.4;
    auto run = [&](bool bw) {
      TapeT<D> tape;
      auto [logits, value] = policy.forward_ids(tape, in);
      auto probs = tape.softmax_rows(logits);
      auto logp = tape.log_op(probs);
      auto chosen = tape.slice_cols(logp, 1, 2);
      auto ratio = tape.exp_op(tape.add_const(chosen, -old_logprob));
      auto term = tape.minimum(tape.scale(ratio, advantage),
                               tape.scale(tape.clamp_op(ratio, 0.8, 1.2), advantage));
      auto verr = tape.add_const(value, -ret);
      auto ent = tape.scale(tape.sum_all(tape.mul(probs, logp)), -1.0);
      auto loss = tape.add(tape.add(tape.scale(term, -1.0),
                                    tape.scale(tape.mul(verr, verr), 0.5)),
                           tape.scale(ent, -0.01));
      auto total = tape.sum_all(loss);
      if (bw) tape.backward(total);
      return tape.value(total).scalar();
    };
    add_entry("ppo_objective_chain", true, check(policy.store(), run));
  }

  return rep;
}

}  // namespace sca
