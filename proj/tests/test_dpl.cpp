#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sca/dpl.hpp"
#include "sca/rng.hpp"

using namespace sca;

namespace {

DplConfig tiny() {
  DplConfig c;
  c.window = 6;
  c.stride = 2;
  c.embed_dim = 5;
  c.gru_hidden = 7;
  c.latent_dim = 3;
  c.epochs = 4;
  c.batch = 8;
  return c;
}

TrajectoryWindow random_window(Rng& rng, int len, int style = 0, int episode = 0) {
  TrajectoryWindow w;
  w.style = style;
  w.episode = episode;
  for (int i = 0; i < len; ++i) w.positions.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  return w;
}

}  // namespace

TEST_CASE("loss matches a hand-computed mse + kl oracle") {
  DplConfig c = tiny();
  DplModelT<double> model(c, 5);
  Rng rng(1);
  std::vector<TrajectoryWindow> wins = {random_window(rng, c.window),
                                        random_window(rng, c.window)};
  std::vector<int> idx = {0, 1};
  TapeT<double> tape;
  auto steps = DplModelT<double>::batch_steps(wins, idx, c.window);
  auto [mu, log_std] = model.encode(tape, steps);
  auto recon = model.decode(tape, mu);
  auto target = tape.constant(DplModelT<double>::target_tensor(wins, idx, c.window));
  double kl_beta = 0.01;
  auto l = model.loss(tape, recon, target, mu, log_std, kl_beta);

  // oracle from the node values
  const auto& R = tape.value(recon);
  const auto& Y = tape.value(target);
  const auto& M = tape.value(mu);
  const auto& S = tape.value(log_std);
  double mse = 0.0;
  for (std::size_t i = 0; i < R.size(); ++i) mse += (R.data[i] - Y.data[i]) * (R.data[i] - Y.data[i]);
  mse /= static_cast<double>(R.size());
  double kl = 0.0;
  for (std::size_t i = 0; i < M.size(); ++i) {
    double s2 = std::exp(2.0 * S.data[i]);
    kl += 0.5 * (s2 + M.data[i] * M.data[i] - 1.0 - 2.0 * S.data[i]);
  }
  kl /= M.rows();
  CHECK(tape.value(l).scalar() == doctest::Approx(mse + kl_beta * kl).epsilon(1e-12));
}

TEST_CASE("reparameterized sample is mu + sigma*eps exactly") {
  DplConfig c = tiny();
  DplModelT<double> model(c, 5);
  Rng rng(2);
  std::vector<TrajectoryWindow> wins = {random_window(rng, c.window)};
  TapeT<double> tape;
  auto steps = DplModelT<double>::batch_steps(wins, {0}, c.window);
  auto [mu, log_std] = model.encode(tape, steps);
  TensorT<double> eps(1, c.latent_dim, 0.0);
  for (auto& e : eps.data) e = rng.normal();
  auto z = model.sample(tape, mu, log_std, eps);
  for (int i = 0; i < c.latent_dim; ++i) {
    double want = tape.value(mu).at(0, i) +
                  std::exp(tape.value(log_std).at(0, i)) * eps.at(0, i);
    CHECK(tape.value(z).at(0, i) == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("log-std head is clamped to its configured range") {
  DplConfig c = tiny();
  DplModelT<double> model(c, 5);
  Rng rng(3);
  std::vector<TrajectoryWindow> wins = {random_window(rng, c.window)};
  TapeT<double> tape;
  auto [mu, log_std] = model.encode(tape, DplModelT<double>::batch_steps(wins, {0}, c.window));
  (void)mu;
  for (int i = 0; i < c.latent_dim; ++i) {
    CHECK(tape.value(log_std).at(0, i) >= c.log_std_min);
    CHECK(tape.value(log_std).at(0, i) <= c.log_std_max);
  }
}

TEST_CASE("short histories are left-padded with the first position") {
  DplConfig c = tiny();
  DplModelT<double> model(c, 5);
  std::vector<Vec2> short_hist = {{0.1, 0.2}, {0.15, 0.25}};
  std::vector<Vec2> padded;
  for (int i = 0; i < c.window - 2; ++i) padded.push_back(short_hist.front());
  padded.push_back(short_hist[0]);
  padded.push_back(short_hist[1]);
  auto a = model.infer_prior(short_hist);
  auto b = model.infer_prior(padded);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  CHECK_THROWS(model.infer_prior({}));
}

TEST_CASE("long histories keep only the trailing window") {
  DplConfig c = tiny();
  DplModelT<double> model(c, 5);
  Rng rng(4);
  std::vector<Vec2> hist;
  for (int i = 0; i < 20; ++i) hist.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  std::vector<Vec2> tail(hist.end() - c.window, hist.end());
  auto a = model.infer_prior(hist);
  auto b = model.infer_prior(tail);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("inference is deterministic") {
  DplConfig c = tiny();
  DplModelT<double> model(c, 5);
  Rng rng(6);
  std::vector<Vec2> hist;
  for (int i = 0; i < c.window; ++i) hist.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  CHECK(model.infer_prior(hist) == model.infer_prior(hist));
}

TEST_CASE("training reduces reconstruction error on a simple dataset") {
  DplConfig c = tiny();
  c.epochs = 30;
  c.lr = 3e-3;
  c.kl_beta = 0.0;
  DplModelT<double> model(c, 9);
  Rng rng(10);
  // three distinct linear motions, tiny noise
  std::vector<TrajectoryWindow> wins;
  for (int i = 0; i < 60; ++i) {
    TrajectoryWindow w;
    w.style = i % 3;
    w.episode = i / 6;
    double vx = 0.05 * (w.style + 1);
    double x0 = rng.uniform(-0.3, 0.3), y0 = rng.uniform(-0.3, 0.3);
    for (int t = 0; t < c.window; ++t)
      w.positions.push_back({x0 + vx * t + rng.uniform(-0.003, 0.003), y0});
    wins.push_back(w);
  }
  auto curve = train_dpl(model, wins, 10);
  REQUIRE(static_cast<int>(curve.size()) == c.epochs);
  CHECK(curve.back().val_mse < curve.front().val_mse);
  CHECK(curve.back().train_mse < 0.5 * curve.front().train_mse);
}

TEST_CASE("window batching rejects bad shapes") {
  DplConfig c = tiny();
  DplModelT<double> model(c, 5);
  Rng rng(8);
  std::vector<TrajectoryWindow> wins = {random_window(rng, c.window)};
  TapeT<double> tape;
  auto steps = DplModelT<double>::batch_steps(wins, {0}, c.window);
  steps.pop_back();
  CHECK_THROWS(model.encode(tape, steps));
  std::vector<TrajectoryWindow> short_wins = {random_window(rng, c.window - 1)};
  CHECK_THROWS(DplModelT<double>::batch_steps(short_wins, {0}, c.window));
}
