#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sca/gradcheck_suite.hpp"
#include "sca/nn.hpp"
#include "sca/rng.hpp"
#include "sca/tensor.hpp"

using namespace sca;

TEST_CASE("finite-difference gradient suite passes at its tolerances") {
  GradCheckReport rep = run_gradcheck_suite();
  for (const auto& e : rep.entries) {
    INFO(e.name);
    CHECK(e.max_rel_error <= (e.composite ? 1e-3 : 1e-4));
  }
  CHECK(rep.entries.size() >= 28);
}

TEST_CASE("softmax rows sum to one and dominate correctly") {
  TapeT<double> tape;
  TensorT<double> x(2, 4, 0.0);
  x.at(0, 0) = 1.0; x.at(0, 1) = 2.0; x.at(0, 2) = 3.0; x.at(0, 3) = 4.0;
  x.at(1, 0) = 100.0; x.at(1, 1) = -100.0; x.at(1, 2) = 0.0; x.at(1, 3) = 0.0;
  auto s = tape.softmax_rows(tape.constant(x));
  const auto& v = tape.value(s);
  for (int r = 0; r < 2; ++r) {
    double sum = 0.0;
    for (int c = 0; c < 4; ++c) sum += v.at(r, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(v.at(0, 3) > v.at(0, 2));
  CHECK(v.at(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("large negative additive bias gives exactly zero attention weight") {
  TapeT<float> tape;
  TensorT<float> x(1, 3, 0.0f);
  x.at(0, 0) = 0.5f;
  x.at(0, 1) = -1e9f;  // masked
  x.at(0, 2) = 1.5f;
  auto s = tape.softmax_rows(tape.constant(x));
  CHECK(tape.value(s).at(0, 1) == 0.0f);  // exp underflows to exact zero
  CHECK(tape.value(s).at(0, 0) + tape.value(s).at(0, 2) == doctest::Approx(1.0f));
}

TEST_CASE("gru cell exposes an update gate in (0,1) and interpolates") {
  ParamStoreT<double> store;
  Rng rng(3);
  GruCellT<double> cell(store, "g", 3, 4, rng);
  TapeT<double> tape;
  TensorT<double> x(2, 3, 0.3);
  TensorT<double> h0(2, 4, 0.1);
  auto [h1, z] = cell.step(tape, store, tape.constant(x), tape.constant(h0));
  const auto& zt = tape.value(z);
  const auto& ht = tape.value(h1);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) {
      CHECK(zt.at(r, c) > 0.0);
      CHECK(zt.at(r, c) < 1.0);
      // h' = h + z(candidate - h): z=0 keeps the state
      CHECK(std::isfinite(ht.at(r, c)));
    }
}

TEST_CASE("adam takes a step that reduces a quadratic") {
  ParamStoreT<double> store;
  TensorT<double> w(1, 3, 0.0);
  w.at(0, 0) = 1.0; w.at(0, 1) = -2.0; w.at(0, 2) = 0.5;
  store.add("w", w);
  AdamT<double> adam(store, {0.05, 0.9, 0.999, 1e-8});
  auto loss_val = [&]() {
    double l = 0.0;
    for (double v : store.by_name("w").value.data) l += v * v;
    return l;
  };
  double before = loss_val();
  for (int it = 0; it < 200; ++it) {
    auto& p = store.by_name("w");
    for (std::size_t i = 0; i < 3; ++i) p.grad.data[i] = 2.0 * p.value.data[i];
    adam.step();
  }
  CHECK(loss_val() < 0.01 * before);
  CHECK(adam.step_count() == 200);
}

TEST_CASE("adam zeroes gradients after stepping") {
  ParamStoreT<float> store;
  store.add("w", TensorT<float>(1, 2, 1.0f));
  AdamT<float> adam(store, {0.01, 0.9, 0.999, 1e-8});
  store.by_name("w").grad.data[0] = 1.0f;
  adam.step();
  CHECK(store.by_name("w").grad.data[0] == 0.0f);
}

TEST_CASE("checkpoint round-trip is bit exact") {
  ParamStoreT<float> store;
  Rng rng(77);
  store.add("layer.w", init_weight<float>(7, 5, 5, rng));
  store.add("layer.b", init_weight<float>(1, 5, 5, rng));
  store.add("head.w", init_weight<float>(5, 3, 5, rng));
  std::string path = (std::filesystem::temp_directory_path() / "ckpt_roundtrip.bin").string();
  save_checkpoint(store, path);

  ParamStoreT<float> loaded;
  loaded.add("layer.w", TensorT<float>(7, 5, 0.0f));
  loaded.add("layer.b", TensorT<float>(1, 5, 0.0f));
  loaded.add("head.w", TensorT<float>(5, 3, 0.0f));
  load_checkpoint(loaded, path);
  for (std::size_t p = 0; p < store.size(); ++p) {
    const auto& a = store[static_cast<int>(p)];
    const auto& b = loaded.by_name(a.name);
    REQUIRE(a.value.size() == b.value.size());
    for (std::size_t i = 0; i < a.value.size(); ++i) {
      // bitwise comparison, not epsilon
      CHECK(std::memcmp(&a.value.data[i], &b.value.data[i], sizeof(float)) == 0);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint header is the documented layout") {
  ParamStoreT<float> store;
  store.add("w", TensorT<float>(2, 2, 1.5f));
  std::string path = (std::filesystem::temp_directory_path() / "ckpt_header.bin").string();
  save_checkpoint(store, path);
  std::ifstream f(path, std::ios::binary);
  char magic[8];
  f.read(magic, 8);
  CHECK(std::string(magic, 8) == "NNCKPT1\n");
  std::uint64_t json_len = 0;
  f.read(reinterpret_cast<char*>(&json_len), 8);
  CHECK(json_len > 0);
  std::string idx(json_len, '\0');
  f.read(idx.data(), json_len);
  CHECK(idx.find("\"name\"") != std::string::npos);
  CHECK(idx.find("\"shape\"") != std::string::npos);
  CHECK(idx.find("\"offset\"") != std::string::npos);
  float payload[4];
  f.read(reinterpret_cast<char*>(payload), 16);
  CHECK(payload[0] == 1.5f);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects corruption") {
  ParamStoreT<float> store;
  store.add("w", TensorT<float>(2, 2, 1.0f));
  std::string path = (std::filesystem::temp_directory_path() / "ckpt_bad.bin").string();
  save_checkpoint(store, path);

  // bad magic
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXXXXXX", 8);
  }
  ParamStoreT<float> l1;
  l1.add("w", TensorT<float>(2, 2, 0.0f));
  CHECK_THROWS(load_checkpoint(l1, path));

  // shape mismatch
  save_checkpoint(store, path);
  ParamStoreT<float> l2;
  l2.add("w", TensorT<float>(3, 2, 0.0f));
  CHECK_THROWS(load_checkpoint(l2, path));
  std::filesystem::remove(path);
}

TEST_CASE("tensor shape errors are rejected") {
  CHECK_THROWS(TensorT<float>(0, 3));
  TapeT<float> tape;
  auto a = tape.constant(TensorT<float>(2, 3, 1.0f));
  auto b = tape.constant(TensorT<float>(3, 2, 1.0f));
  CHECK_THROWS(tape.add(a, b));
  CHECK_THROWS(tape.matmul(a, a));
  CHECK_THROWS(tape.backward(a));  // non-scalar root
}

TEST_CASE("attention output is a convex mix over unmasked rows") {
  // Single head, value projection = identity-ish: the ego attention output
  // must lie in the convex hull of the value rows, so bounded by their extrema.
  ParamStoreT<double> store;
  Rng rng(11);
  MultiHeadAttentionT<double> attn(store, "a", 4, 4, 1, 4, rng);
  TensorT<double> x(3, 4, 0.0);
  Rng fill(5);
  for (auto& v : x.data) v = fill.uniform(-1, 1);
  TensorT<double> bias(1, 3, 0.0);
  TapeT<double> tape;
  auto out = tape.value(attn.apply(tape, store, tape.constant(x), tape.constant(bias)));
  CHECK(out.rows() == 1);
  for (int c = 0; c < out.cols(); ++c) CHECK(std::isfinite(out.at(0, c)));
}
