#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sca/dpl.hpp"
#include "sca/env.hpp"
#include "sca/pet.hpp"
#include "sca/ppo.hpp"

namespace sca {

using json = nlohmann::json;

inline std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// DPL dataset: HV-only episodes serialized one JSON object per line.
// Each vehicle carries its style, intention, and per-decision-step states.
// ---------------------------------------------------------------------------

struct DatasetVehicle {
  int id = 0;
  DriverStyle style = DriverStyle::Moderate;
  Arm arm = Arm::S;
  Movement movement = Movement::Left;
  std::vector<std::array<double, 5>> states;  // [t, x, y, vx, vy]
};

struct DatasetEpisode {
  int episode_id = 0;
  std::vector<DatasetVehicle> vehicles;
};

inline Movement movement_from_name(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "left") return Movement::Left;
  if (s == "straight") return Movement::Straight;
  if (s == "right") return Movement::Right;
  throw std::invalid_argument("unknown movement: " + s);
}

inline DriverStyle style_from_name(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "aggressive") return DriverStyle::Aggressive;
  if (s == "moderate") return DriverStyle::Moderate;
  if (s == "conservative") return DriverStyle::Conservative;
  throw std::invalid_argument("unknown style: " + s);
}

inline Arm arm_from_name(const std::string& s) {
  if (s == "S") return Arm::S;
  if (s == "E") return Arm::E;
  if (s == "N") return Arm::N;
  if (s == "W") return Arm::W;
  throw std::invalid_argument("unknown arm: " + s);
}

// Runs HV-only episodes and captures decision-boundary states per vehicle.
inline std::vector<DatasetEpisode> generate_dpl_episodes(const LayoutConfig& layout_cfg,
                                                         EnvConfig env_cfg, int episodes,
                                                         std::uint64_t seed,
                                                         int max_decisions = 60) {
  env_cfg.spawn_av = false;
  std::vector<DatasetEpisode> out;
  out.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    IntersectionEnv env(layout_cfg, env_cfg, SocialConfig{});
    env.reset(Rng(seed).fork(60).next_u64() + static_cast<std::uint64_t>(e));

    // Speeds are recovered from consecutive positions, so record the state
    // snapshots directly at each decision boundary.
    std::map<int, DatasetVehicle> tracks;
    auto snapshot = [&](double t) {
      for (const auto& v : env.vehicles()) {
        if (!v.active) continue;
        auto& dv = tracks[v.id];
        dv.id = v.id;
        dv.style = v.style;
        dv.arm = v.arm;
        dv.movement = v.movement;
        dv.states.push_back({t, v.state.x, v.state.y, v.state.vx(), v.state.vy()});
      }
    };
    snapshot(0.0);
    for (int d = 0; d < max_decisions; ++d) {
      env.step_hvs_only();
      snapshot(env.time());
      bool any_active = false;
      for (const auto& v : env.vehicles()) any_active = any_active || v.active;
      if (!any_active) break;
    }
    DatasetEpisode ep;
    ep.episode_id = e;
    for (auto& [id, dv] : tracks) ep.vehicles.push_back(std::move(dv));
    out.push_back(std::move(ep));
  }
  return out;
}

inline void write_dataset_jsonl(const std::vector<DatasetEpisode>& eps, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_dataset_jsonl: cannot open " + path);
  for (const auto& ep : eps) {
    json j;
    j["episode_id"] = ep.episode_id;
    j["vehicles"] = json::array();
    for (const auto& v : ep.vehicles) {
      json jv;
      jv["id"] = v.id;
      jv["style"] = style_name(v.style);
      jv["intention"] = movement_name(v.movement);
      jv["arm"] = arm_name(v.arm);
      jv["states"] = v.states;
      j["vehicles"].push_back(std::move(jv));
    }
    f << j.dump() << "\n";
  }
  if (!f) throw std::runtime_error("write_dataset_jsonl: write failed for " + path);
}

inline std::vector<DatasetEpisode> read_dataset_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_dataset_jsonl: cannot open " + path);
  std::vector<DatasetEpisode> eps;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line);
    DatasetEpisode ep;
    ep.episode_id = j.at("episode_id").get<int>();
    for (const auto& jv : j.at("vehicles")) {
      DatasetVehicle v;
      v.id = jv.at("id").get<int>();
      v.style = style_from_name(jv.at("style").get<std::string>());
      v.movement = movement_from_name(jv.at("intention").get<std::string>());
      v.arm = arm_from_name(jv.at("arm").get<std::string>());
      v.states = jv.at("states").get<std::vector<std::array<double, 5>>>();
      ep.vehicles.push_back(std::move(v));
    }
    eps.push_back(std::move(ep));
  }
  return eps;
}

// Sliding windows over each vehicle track: length `window`, stride `stride`,
// positions normalized by `scale`. A track of length L yields
// floor((L - window) / stride) + 1 windows when L >= window, else none.
inline std::vector<TrajectoryWindow> extract_windows(const std::vector<DatasetEpisode>& eps,
                                                     int window, int stride, double scale) {
  if (window <= 0 || stride <= 0) throw std::invalid_argument("extract_windows: bad sizes");
  std::vector<TrajectoryWindow> out;
  for (const auto& ep : eps) {
    for (const auto& v : ep.vehicles) {
      int len = static_cast<int>(v.states.size());
      for (int s = 0; s + window <= len; s += stride) {
        TrajectoryWindow w;
        w.episode = ep.episode_id;
        w.style = static_cast<int>(v.style);
        w.positions.reserve(window);
        for (int k = 0; k < window; ++k)
          w.positions.push_back({v.states[s + k][1] / scale, v.states[s + k][2] / scale});
        canonicalize_window(w.positions);
        out.push_back(std::move(w));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Style probe: nearest-centroid classifier on encoder means. Centroids are
// fit on windows from episodes outside the held-out tail. Distances use the
// Mahalanobis metric of the pooled within-class covariance estimated on the
// train split: raw latent coordinates are an arbitrary basis, so Euclidean
// distance would be dominated by high-variance nuisance directions (window
// phase, movement) rather than the class structure the probe measures.
// ---------------------------------------------------------------------------

inline double probe_style_accuracy(DplModel& model, const std::vector<TrajectoryWindow>& windows,
                                   double holdout_fraction = 0.2) {
  if (windows.empty()) throw std::invalid_argument("probe_style_accuracy: no windows");
  int max_ep = 0;
  for (const auto& w : windows) max_ep = std::max(max_ep, w.episode);
  int split_ep = static_cast<int>(std::floor((max_ep + 1) * (1.0 - holdout_fraction)));

  const int latent = model.config().latent_dim;
  std::vector<std::pair<std::vector<double>, int>> train_mu;
  std::vector<std::pair<std::vector<double>, int>> held;
  for (const auto& w : windows) {
    GaussianLatent g = model.encode_window(w);
    if (w.episode < split_ep)
      train_mu.emplace_back(g.mu, w.style);
    else
      held.emplace_back(g.mu, w.style);
  }
  if (train_mu.empty()) throw std::runtime_error("probe_style_accuracy: empty train split");
  if (held.empty()) throw std::runtime_error("probe_style_accuracy: empty holdout");

  std::array<std::vector<double>, 3> centroid;
  std::array<int, 3> counts{};
  for (auto& c : centroid) c.assign(latent, 0.0);
  for (const auto& [mu, style] : train_mu) {
    for (int i = 0; i < latent; ++i) centroid[style][i] += mu[i];
    ++counts[style];
  }
  for (int s = 0; s < 3; ++s) {
    if (counts[s] == 0) throw std::runtime_error("probe_style_accuracy: empty style class");
    for (auto& x : centroid[s]) x /= counts[s];
  }

  // Pooled within-class covariance of the train split, ridge-regularized so
  // the Cholesky factorization below cannot hit a singular matrix.
  std::vector<std::vector<double>> cov(latent, std::vector<double>(latent, 0.0));
  for (const auto& [mu, style] : train_mu)
    for (int a = 0; a < latent; ++a)
      for (int b = 0; b < latent; ++b)
        cov[a][b] += (mu[a] - centroid[style][a]) * (mu[b] - centroid[style][b]);
  for (int a = 0; a < latent; ++a)
    for (int b = 0; b < latent; ++b) cov[a][b] /= static_cast<double>(train_mu.size());
  double trace = 0.0;
  for (int a = 0; a < latent; ++a) trace += cov[a][a];
  double ridge = std::max(1e-12, 1e-6 * trace / latent);
  for (int a = 0; a < latent; ++a) cov[a][a] += ridge;

  // Cholesky cov = L L^T; Mahalanobis distance via forward substitution.
  std::vector<std::vector<double>> chol(latent, std::vector<double>(latent, 0.0));
  for (int i = 0; i < latent; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = cov[i][j];
      for (int k = 0; k < j; ++k) s -= chol[i][k] * chol[j][k];
      if (i == j)
        chol[i][i] = std::sqrt(std::max(s, 1e-300));
      else
        chol[i][j] = s / chol[j][j];
    }
  }
  auto sq_mahalanobis = [&](const std::vector<double>& mu, const std::vector<double>& c) {
    std::vector<double> y(latent);
    double d = 0.0;
    for (int i = 0; i < latent; ++i) {
      double s = mu[i] - c[i];
      for (int k = 0; k < i; ++k) s -= chol[i][k] * y[k];
      y[i] = s / chol[i][i];
      d += y[i] * y[i];
    }
    return d;
  };

  int correct = 0;
  for (const auto& [mu, style] : held) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 3; ++s) {
      double d = sq_mahalanobis(mu, centroid[s]);
      if (d < best_d) { best_d = d; best = s; }
    }
    if (best == style) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(held.size());
}

// ---------------------------------------------------------------------------
// Stats CSV
// ---------------------------------------------------------------------------

inline void write_train_stats_csv(const std::vector<TrainStats>& rows, double phi,
                                  std::uint64_t seed, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_train_stats_csv: cannot open " + path);
  f << "update,env_steps,mean_return_E,mean_return_C,mean_return_global,"
       "policy_loss,value_loss,entropy,clip_frac,collision_rate,success_rate,phi,seed\n";
  for (const auto& r : rows) {
    f << r.update << ',' << r.env_steps << ',' << fmt_g17(r.mean_return_E) << ','
      << fmt_g17(r.mean_return_C) << ',' << fmt_g17(r.mean_return_global) << ','
      << fmt_g17(r.policy_loss) << ',' << fmt_g17(r.value_loss) << ',' << fmt_g17(r.entropy)
      << ',' << fmt_g17(r.clip_frac) << ',' << fmt_g17(r.collision_rate) << ','
      << fmt_g17(r.success_rate) << ',' << fmt_g17(phi) << ',' << seed << "\n";
  }
  if (!f) throw std::runtime_error("write_train_stats_csv: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Experiment harnesses
// ---------------------------------------------------------------------------

struct TrainRunSpec {
  LayoutConfig layout;
  EnvConfig env;
  SocialConfig social;
  PolicyConfig policy;
  PpoConfig ppo;
  DplConfig dpl;              // used only when a model checkpoint is supplied
  std::string dpl_checkpoint; // empty = no priors (policy.prior_dim forced to 0)
};

struct TrainRunResult {
  std::vector<TrainStats> stats;
  EvalReport eval;
};

// Trains one policy (optionally prior-conditioned) and greedily evaluates it.
inline TrainRunResult run_training(const TrainRunSpec& spec, std::uint64_t seed,
                                   int eval_episodes, const std::string& checkpoint_dir = "") {
  TrainRunSpec s = spec;
  s.ppo.seed = seed;
  std::unique_ptr<DplModel> dpl;
  if (!s.dpl_checkpoint.empty()) {
    dpl = std::make_unique<DplModel>(s.dpl, 0);
    load_checkpoint(dpl->store(), s.dpl_checkpoint);
    s.policy.prior_dim = s.dpl.latent_dim;
  } else {
    s.policy.prior_dim = 0;
  }
  PolicyNet policy(s.policy, seed);
  IntersectionRolloutEnv env(s.layout, s.env, s.social, dpl.get());
  TrainRunResult res;
  res.stats = train_ppo(env, policy, s.ppo, checkpoint_dir);
  res.eval = evaluate_policy(s.layout, s.env, s.social, policy, dpl.get(), eval_episodes,
                             seed + 1);
  return res;
}

struct AblationResult {
  std::vector<std::uint64_t> seeds;
  std::vector<double> with_prior;   // final mean_return_global per seed
  std::vector<double> no_prior;
  double mean_with_prior = 0.0;
  double mean_no_prior = 0.0;
};

// Final-performance score for one run: mean_return_global averaged over the
// last quarter of updates (window >= 1).
inline double final_score(const std::vector<TrainStats>& rows) {
  if (rows.empty()) throw std::invalid_argument("final_score: no stats");
  std::size_t start = rows.size() - std::max<std::size_t>(1, rows.size() / 4);
  double sum = 0.0;
  for (std::size_t i = start; i < rows.size(); ++i) sum += rows[i].mean_return_global;
  return sum / static_cast<double>(rows.size() - start);
}

inline AblationResult run_prior_ablation(const TrainRunSpec& spec,
                                         const std::vector<std::uint64_t>& seeds,
                                         const std::string& out_dir = "") {
  if (spec.dpl_checkpoint.empty())
    throw std::invalid_argument("run_prior_ablation: prior arm needs a DPL checkpoint");
  AblationResult res;
  res.seeds = seeds;
  for (std::uint64_t seed : seeds) {
    TrainRunResult with = run_training(spec, seed, 20);
    TrainRunSpec noprior = spec;
    noprior.dpl_checkpoint.clear();
    TrainRunResult without = run_training(noprior, seed, 20);
    res.with_prior.push_back(final_score(with.stats));
    res.no_prior.push_back(final_score(without.stats));
    if (!out_dir.empty()) {
      write_train_stats_csv(with.stats, spec.social.phi, seed,
                            out_dir + "/prior_seed" + std::to_string(seed) + ".csv");
      write_train_stats_csv(without.stats, spec.social.phi, seed,
                            out_dir + "/noprior_seed" + std::to_string(seed) + ".csv");
    }
  }
  for (double v : res.with_prior) res.mean_with_prior += v;
  for (double v : res.no_prior) res.mean_no_prior += v;
  res.mean_with_prior /= res.with_prior.size();
  res.mean_no_prior /= res.no_prior.size();
  return res;
}

struct SweepPoint {
  double phi = 0.0;
  std::uint64_t seed = 0;
  double mean_speed = 0.0;
  double collision_rate = 0.0;
  double success_rate = 0.0;
  std::optional<double> mean_min_pet;
  double mean_return_E = 0.0;
  double mean_return_C = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;  // one per (phi, seed)

  double mean_over_seeds(double phi, double SweepPoint::*field) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& p : points)
      if (p.phi == phi) { sum += p.*field; ++n; }
    if (n == 0) throw std::invalid_argument("sweep: phi not found");
    return sum / n;
  }
};

inline SweepResult run_ct_sweep(const TrainRunSpec& spec, const std::vector<double>& phis,
                                const std::vector<std::uint64_t>& seeds, int eval_episodes,
                                const std::string& out_dir = "") {
  SweepResult res;
  for (double phi : phis) {
    for (std::uint64_t seed : seeds) {
      TrainRunSpec s = spec;
      s.social.phi = phi;
      TrainRunResult r = run_training(s, seed, eval_episodes);
      SweepPoint p;
      p.phi = phi;
      p.seed = seed;
      p.mean_speed = r.eval.mean_speed;
      p.collision_rate = r.eval.collision_rate;
      p.success_rate = r.eval.success_rate;
      p.mean_min_pet = r.eval.mean_min_pet;
      p.mean_return_E = r.eval.mean_return_E;
      p.mean_return_C = r.eval.mean_return_C;
      res.points.push_back(p);
      if (!out_dir.empty()) {
        std::ostringstream name;
        name << out_dir << "/sweep_phi" << fmt_g17(phi) << "_seed" << seed << ".csv";
        write_train_stats_csv(r.stats, phi, seed, name.str());
      }
    }
  }
  return res;
}

inline void write_sweep_csv(const SweepResult& res, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_sweep_csv: cannot open " + path);
  f << "phi,seed,mean_speed,collision_rate,success_rate,mean_min_pet,mean_return_E,"
       "mean_return_C\n";
  for (const auto& p : res.points) {
    f << fmt_g17(p.phi) << ',' << p.seed << ',' << fmt_g17(p.mean_speed) << ','
      << fmt_g17(p.collision_rate) << ',' << fmt_g17(p.success_rate) << ','
      << (p.mean_min_pet ? fmt_g17(*p.mean_min_pet) : std::string("")) << ','
      << fmt_g17(p.mean_return_E) << ',' << fmt_g17(p.mean_return_C) << "\n";
  }
}

// ---------------------------------------------------------------------------
// SVG report: one line chart per series. The polyline points are emitted in
// data space at full precision under a transform, so the numbers written can
// be parsed back exactly.
// ---------------------------------------------------------------------------

struct ReportSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

inline std::string render_svg_chart(const std::string& title,
                                    const std::vector<ReportSeries>& series, int width = 640,
                                    int height = 400) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("render_svg_chart: ragged series");
    for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
    for (double v : s.y) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
  }
  if (!(xmin <= xmax) || !(ymin <= ymax)) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  const double margin = 50.0;
  double sx = (width - 2 * margin) / (xmax - xmin);
  double sy = (height - 2 * margin) / (ymax - ymin);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << height << "\">\n";
  os << "<title>" << title << "</title>\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
     << title << "</text>\n";
  os << "<rect x=\"" << fmt_g17(margin) << "\" y=\"" << fmt_g17(margin) << "\" width=\""
     << fmt_g17(width - 2 * margin) << "\" height=\"" << fmt_g17(height - 2 * margin)
     << "\" fill=\"none\" stroke=\"#888\"/>\n";
  // Flip y and map data space into the plot area with a transform chain; the
  // point list itself stays in data coordinates.
  int ci = 0;
  for (const auto& s : series) {
    os << "<g transform=\"translate(" << fmt_g17(margin) << "," << fmt_g17(height - margin)
       << ") scale(" << fmt_g17(sx) << "," << fmt_g17(-sy) << ") translate(" << fmt_g17(-xmin)
       << "," << fmt_g17(-ymin) << ")\">\n";
    os << "<polyline data-name=\"" << s.name
       << "\" fill=\"none\" vector-effect=\"non-scaling-stroke\" stroke=\""
       << kColors[ci % 6] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) os << ' ';
      os << fmt_g17(s.x[i]) << ',' << fmt_g17(s.y[i]);
    }
    os << "\"/>\n</g>\n";
    os << "<text x=\"" << fmt_g17(margin + 8) << "\" y=\"" << fmt_g17(margin + 18 + 16 * ci)
       << "\" font-size=\"12\" fill=\"" << kColors[ci % 6] << "\">" << s.name << "</text>\n";
    ++ci;
  }
  os << "<text x=\"" << fmt_g17(margin) << "\" y=\"" << fmt_g17(height - margin + 20)
     << "\" font-size=\"11\">x: [" << fmt_g17(xmin) << ", " << fmt_g17(xmax)
     << "]  y: [" << fmt_g17(ymin) << ", " << fmt_g17(ymax) << "]</text>\n";
  os << "</svg>\n";
  return os.str();
}

// Parses back the data-space points of the named polyline from an SVG string.
inline std::vector<std::pair<double, double>> parse_svg_points(const std::string& svg,
                                                               const std::string& name) {
  std::string key = "data-name=\"" + name + "\"";
  std::size_t at = svg.find(key);
  if (at == std::string::npos) throw std::invalid_argument("parse_svg_points: series not found");
  std::size_t p0 = svg.find("points=\"", at);
  if (p0 == std::string::npos) throw std::invalid_argument("parse_svg_points: no points attr");
  p0 += 8;
  std::size_t p1 = svg.find('"', p0);
  std::istringstream is(svg.substr(p0, p1 - p0));
  std::vector<std::pair<double, double>> pts;
  std::string tok;
  while (is >> tok) {
    std::size_t comma = tok.find(',');
    pts.emplace_back(std::stod(tok.substr(0, comma)), std::stod(tok.substr(comma + 1)));
  }
  return pts;
}

// Reads a metrics CSV produced by write_train_stats_csv.
inline std::vector<TrainStats> read_train_stats_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_train_stats_csv: cannot open " + path);
  std::string line;
  std::getline(f, line);  // header
  std::vector<TrainStats> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (cells.size() < 13) throw std::runtime_error("read_train_stats_csv: short row");
    TrainStats r;
    r.update = std::stoi(cells[0]);
    r.env_steps = std::stoll(cells[1]);
    r.mean_return_E = std::stod(cells[2]);
    r.mean_return_C = std::stod(cells[3]);
    r.mean_return_global = std::stod(cells[4]);
    r.policy_loss = std::stod(cells[5]);
    r.value_loss = std::stod(cells[6]);
    r.entropy = std::stod(cells[7]);
    r.clip_frac = std::stod(cells[8]);
    r.collision_rate = std::stod(cells[9]);
    r.success_rate = std::stod(cells[10]);
    rows.push_back(r);
  }
  return rows;
}

// Renders the standard report charts for a run directory containing
// metrics.csv; returns the svg file paths written.
inline std::vector<std::string> emit_report(const std::string& run_dir) {
  namespace fs = std::filesystem;
  std::string metrics = (fs::path(run_dir) / "metrics.csv").string();
  auto rows = read_train_stats_csv(metrics);
  if (rows.empty()) throw std::runtime_error("emit_report: empty metrics in " + metrics);
  fs::create_directories(fs::path(run_dir) / "report");

  auto col = [&](double TrainStats::*field) {
    ReportSeries s;
    for (const auto& r : rows) {
      s.x.push_back(static_cast<double>(r.env_steps));
      s.y.push_back(r.*field);
    }
    return s;
  };
  std::vector<std::string> written;
  auto emit = [&](const std::string& file, const std::string& title,
                  std::vector<ReportSeries> series) {
    std::string path = (fs::path(run_dir) / "report" / file).string();
    std::ofstream f(path);
    f << render_svg_chart(title, series);
    if (!f) throw std::runtime_error("emit_report: write failed for " + path);
    written.push_back(path);
  };

  ReportSeries re = col(&TrainStats::mean_return_E); re.name = "mean_return_E";
  ReportSeries rc = col(&TrainStats::mean_return_C); rc.name = "mean_return_C";
  ReportSeries rg = col(&TrainStats::mean_return_global); rg.name = "mean_return_global";
  emit("returns.svg", "Episode returns", {re, rc, rg});

  ReportSeries pl = col(&TrainStats::policy_loss); pl.name = "policy_loss";
  ReportSeries vl = col(&TrainStats::value_loss); vl.name = "value_loss";
  ReportSeries en = col(&TrainStats::entropy); en.name = "entropy";
  emit("losses.svg", "Optimization", {pl, vl, en});

  ReportSeries cr = col(&TrainStats::collision_rate); cr.name = "collision_rate";
  ReportSeries sr = col(&TrainStats::success_rate); sr.name = "success_rate";
  ReportSeries cf = col(&TrainStats::clip_frac); cf.name = "clip_frac";
  emit("rates.svg", "Safety and clipping", {cr, sr, cf});
  return written;
}

}  // namespace sca
