// Command-line front end: data generation, representation training, policy
// training, evaluation, experiment sweeps, replay auditing, and reporting.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sca/config.hpp"
#include "sca/experiments.hpp"
#include "sca/gradcheck_suite.hpp"
#include "sca/replay.hpp"

namespace fs = std::filesystem;
using sca::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 1;
  std::string out = "run";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON configuration file");
  cmd->add_option("--set", o.sets, "Override, e.g. --set ppo.lr=3e-4")->take_all();
  cmd->add_option("--seed", o.seed, "Run seed");
  cmd->add_option("--out", o.out, "Output run directory");
}

sca::RunConfig resolve(const CommonOpts& o) {
  sca::RunConfig cfg = sca::load_config(o.config_path);
  sca::apply_overrides(cfg, o.sets);
  return cfg;
}

void write_run_dir(const std::string& dir, const sca::RunConfig& cfg, const json& manifest) {
  fs::create_directories(dir);
  {
    std::ofstream f(fs::path(dir) / "config.json");
    f << sca::config_to_json(cfg).dump(2) << "\n";
    if (!f) throw std::runtime_error("cannot write config.json in " + dir);
  }
  {
    std::ofstream f(fs::path(dir) / "manifest.json");
    f << manifest.dump(2) << "\n";
    if (!f) throw std::runtime_error("cannot write manifest.json in " + dir);
  }
}

std::unique_ptr<sca::DplModel> load_dpl(const sca::RunConfig& cfg, const std::string& path) {
  if (path.empty()) return nullptr;
  auto model = std::make_unique<sca::DplModel>(cfg.dpl, 0);
  sca::load_checkpoint(model->store(), path);
  return model;
}

json eval_to_json(const sca::EvalReport& rep) {
  json j = {{"episodes", rep.episodes},
            {"mean_return_E", rep.mean_return_E},
            {"mean_return_C", rep.mean_return_C},
            {"mean_return_global", rep.mean_return_global},
            {"success_rate", rep.success_rate},
            {"collision_rate", rep.collision_rate},
            {"timeout_rate", rep.timeout_rate},
            {"mean_speed", rep.mean_speed}};
  if (rep.mean_min_pet) j["mean_min_pet"] = *rep.mean_min_pet;
  return j;
}

int cmd_gen_data(const CommonOpts& o) {
  sca::RunConfig cfg = resolve(o);
  auto eps = sca::generate_dpl_episodes(cfg.layout, cfg.env, cfg.experiment.dataset_episodes,
                                        o.seed, cfg.experiment.dataset_max_decisions);
  fs::create_directories(o.out);
  std::string data = (fs::path(o.out) / "dataset.jsonl").string();
  sca::write_dataset_jsonl(eps, data);
  auto windows = sca::extract_windows(eps, cfg.dpl.window, cfg.dpl.stride,
                                      cfg.layout.arm_length);
  json manifest = {{"command", "gen-data"}, {"seed", o.seed},
                   {"episodes", static_cast<int>(eps.size())},
                   {"windows", static_cast<int>(windows.size())},
                   {"dataset", "dataset.jsonl"}};
  write_run_dir(o.out, cfg, manifest);
  std::cout << "wrote " << eps.size() << " episodes (" << windows.size() << " windows) to "
            << data << "\n";
  return 0;
}

int cmd_train_dpl(const CommonOpts& o, const std::string& data_path) {
  sca::RunConfig cfg = resolve(o);
  auto eps = sca::read_dataset_jsonl(data_path);
  auto windows = sca::extract_windows(eps, cfg.dpl.window, cfg.dpl.stride,
                                      cfg.layout.arm_length);
  if (windows.empty()) throw std::runtime_error("no training windows in " + data_path);
  sca::DplModel model(cfg.dpl, o.seed);
  auto curve = sca::train_dpl(model, windows, o.seed);

  fs::create_directories(fs::path(o.out) / "checkpoints");
  std::string ckpt = (fs::path(o.out) / "checkpoints" / "dpl.ckpt").string();
  sca::save_checkpoint(model.store(), ckpt);
  {
    std::ofstream f(fs::path(o.out) / "metrics.csv");
    f << "epoch,train_mse,val_mse,kl\n";
    for (const auto& st : curve)
      f << st.epoch << ',' << sca::fmt_g17(st.train_mse) << ',' << sca::fmt_g17(st.val_mse)
        << ',' << sca::fmt_g17(st.kl) << "\n";
  }
  json manifest = {{"command", "train-dpl"}, {"seed", o.seed}, {"data", data_path},
                   {"windows", static_cast<int>(windows.size())},
                   {"checkpoint", "checkpoints/dpl.ckpt"},
                   {"final_train_mse", curve.back().train_mse},
                   {"final_val_mse", curve.back().val_mse}};
  write_run_dir(o.out, cfg, manifest);
  std::cout << "final train mse " << curve.back().train_mse << ", val mse "
            << curve.back().val_mse << ", checkpoint " << ckpt << "\n";
  return 0;
}

int cmd_probe_latents(const CommonOpts& o, const std::string& data_path,
                      const std::string& ckpt) {
  sca::RunConfig cfg = resolve(o);
  auto eps = sca::read_dataset_jsonl(data_path);
  auto windows = sca::extract_windows(eps, cfg.dpl.window, cfg.dpl.stride,
                                      cfg.layout.arm_length);
  sca::DplModel model(cfg.dpl, 0);
  sca::load_checkpoint(model.store(), ckpt);
  double acc = sca::probe_style_accuracy(model, windows);
  json manifest = {{"command", "probe-latents"}, {"data", data_path}, {"checkpoint", ckpt},
                   {"windows", static_cast<int>(windows.size())},
                   {"style_probe_accuracy", acc}};
  write_run_dir(o.out, cfg, manifest);
  std::cout << "style probe accuracy " << acc << " over " << windows.size() << " windows\n";
  return 0;
}

int cmd_train_policy(const CommonOpts& o, const std::string& dpl_ckpt) {
  sca::RunConfig cfg = resolve(o);
  sca::TrainRunSpec spec{cfg.layout, cfg.env, cfg.social, cfg.policy, cfg.ppo, cfg.dpl,
                         dpl_ckpt};
  fs::create_directories(fs::path(o.out) / "checkpoints");
  sca::TrainRunResult res = sca::run_training(spec, o.seed, cfg.experiment.eval_episodes,
                                              (fs::path(o.out) / "checkpoints").string());
  sca::write_train_stats_csv(res.stats, cfg.social.phi, o.seed,
                             (fs::path(o.out) / "metrics.csv").string());
  json manifest = {{"command", "train-policy"}, {"seed", o.seed},
                   {"dpl_checkpoint", dpl_ckpt}, {"updates", static_cast<int>(res.stats.size())},
                   {"eval", eval_to_json(res.eval)}};
  write_run_dir(o.out, cfg, manifest);
  std::cout << "trained " << res.stats.size() << " updates; eval return "
            << res.eval.mean_return_global << ", success " << res.eval.success_rate
            << ", collisions " << res.eval.collision_rate << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& policy_ckpt, const std::string& dpl_ckpt,
             int episodes, const std::string& record_dir) {
  sca::RunConfig cfg = resolve(o);
  auto dpl = load_dpl(cfg, dpl_ckpt);
  sca::PolicyConfig pc = cfg.policy;
  pc.prior_dim = dpl ? cfg.dpl.latent_dim : 0;
  sca::PolicyNet policy(pc, 0);
  sca::load_checkpoint(policy.store(), policy_ckpt);

  if (episodes <= 0) episodes = cfg.experiment.eval_episodes;
  sca::EvalReport rep;
  if (record_dir.empty()) {
    rep = sca::evaluate_policy(cfg.layout, cfg.env, cfg.social, policy, dpl.get(), episodes,
                               o.seed);
  } else {
    rep.episodes = episodes;
    double pet_sum = 0.0;
    int pet_n = 0;
    for (int e = 0; e < episodes; ++e) {
      std::string dir = (fs::path(record_dir) / ("episode_" + std::to_string(e))).string();
      sca::EpisodeResult r = sca::record_episode(
          cfg.layout, cfg.env, cfg.social, policy, dpl.get(),
          sca::Rng(o.seed).fork(50).next_u64() + static_cast<std::uint64_t>(e), dir);
      rep.mean_return_E += r.return_E;
      rep.mean_return_C += r.return_C;
      rep.mean_return_global += r.return_global;
      rep.mean_speed += r.avg_speed;
      if (r.outcome == sca::Outcome::Arrived) rep.success_rate += 1;
      if (r.outcome == sca::Outcome::Collided) rep.collision_rate += 1;
      if (r.outcome == sca::Outcome::Timeout) rep.timeout_rate += 1;
      if (r.min_pet) { pet_sum += *r.min_pet; ++pet_n; }
      rep.results.push_back(r);
    }
    rep.mean_return_E /= episodes;
    rep.mean_return_C /= episodes;
    rep.mean_return_global /= episodes;
    rep.mean_speed /= episodes;
    rep.success_rate /= episodes;
    rep.collision_rate /= episodes;
    rep.timeout_rate /= episodes;
    if (pet_n) rep.mean_min_pet = pet_sum / pet_n;
  }
  json manifest = {{"command", "eval"}, {"seed", o.seed}, {"policy_checkpoint", policy_ckpt},
                   {"dpl_checkpoint", dpl_ckpt}, {"record_dir", record_dir},
                   {"eval", eval_to_json(rep)}};
  write_run_dir(o.out, cfg, manifest);
  std::cout << eval_to_json(rep).dump(2) << "\n";
  return 0;
}

int cmd_sweep_ct(const CommonOpts& o, const std::string& dpl_ckpt) {
  sca::RunConfig cfg = resolve(o);
  sca::TrainRunSpec spec{cfg.layout, cfg.env, cfg.social, cfg.policy, cfg.ppo, cfg.dpl,
                         dpl_ckpt};
  fs::create_directories(o.out);
  sca::SweepResult res = sca::run_ct_sweep(spec, cfg.experiment.sweep_phis,
                                           cfg.experiment.seeds,
                                           cfg.experiment.eval_episodes, o.out);
  sca::write_sweep_csv(res, (fs::path(o.out) / "sweep.csv").string());
  json manifest = {{"command", "sweep-ct"}, {"phis", cfg.experiment.sweep_phis},
                   {"seeds", cfg.experiment.seeds},
                   {"points", static_cast<int>(res.points.size())}};
  write_run_dir(o.out, cfg, manifest);
  for (double phi : cfg.experiment.sweep_phis)
    std::cout << "phi=" << phi << " mean_speed="
              << res.mean_over_seeds(phi, &sca::SweepPoint::mean_speed) << " collision_rate="
              << res.mean_over_seeds(phi, &sca::SweepPoint::collision_rate) << "\n";
  return 0;
}

int cmd_ablate_prior(const CommonOpts& o, const std::string& dpl_ckpt) {
  sca::RunConfig cfg = resolve(o);
  sca::TrainRunSpec spec{cfg.layout, cfg.env, cfg.social, cfg.policy, cfg.ppo, cfg.dpl,
                         dpl_ckpt};
  fs::create_directories(o.out);
  sca::AblationResult res = sca::run_prior_ablation(spec, cfg.experiment.seeds, o.out);
  json manifest = {{"command", "ablate-prior"}, {"seeds", cfg.experiment.seeds},
                   {"with_prior", res.with_prior}, {"no_prior", res.no_prior},
                   {"mean_with_prior", res.mean_with_prior},
                   {"mean_no_prior", res.mean_no_prior}};
  write_run_dir(o.out, cfg, manifest);
  std::cout << "mean final return with prior " << res.mean_with_prior << ", without "
            << res.mean_no_prior << "\n";
  return 0;
}

int cmd_replay(const std::string& dir, double tol) {
  sca::ReplayReport rep = sca::replay_episode(dir);
  std::cout << "replayed " << rep.decisions << " decisions, max reward deviation "
            << rep.max_abs_error << "\n";
  return rep.max_abs_error <= tol ? 0 : 1;
}

int cmd_grad_check() {
  sca::GradCheckReport rep = sca::run_gradcheck_suite();
  for (const auto& e : rep.entries)
    std::cout << (e.composite ? "[chain ] " : "[single] ") << e.name << " max_rel_error="
              << e.max_rel_error << "\n";
  std::cout << "worst single " << rep.worst_single << ", worst chain " << rep.worst_composite
            << "\n";
  return (rep.worst_single <= 1e-4 && rep.worst_composite <= 1e-3) ? 0 : 1;
}

int cmd_report(const std::string& run_dir) {
  auto written = sca::emit_report(run_dir);
  for (const auto& p : written) std::cout << "wrote " << p << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Socially aware intersection driving: simulation and training toolkit"};
  app.require_subcommand(1);

  CommonOpts gen_o, dpl_o, probe_o, train_o, eval_o, sweep_o, abl_o;
  std::string data_path, dpl_ckpt, policy_ckpt, replay_dir, report_dir, record_dir;
  int eval_episodes = 0;
  double replay_tol = 1e-9;

  auto* gen = app.add_subcommand("gen-data", "Generate a driver trajectory dataset");
  add_common(gen, gen_o);

  auto* tdpl = app.add_subcommand("train-dpl", "Train the trajectory representation model");
  add_common(tdpl, dpl_o);
  tdpl->add_option("--data", data_path, "dataset.jsonl path")->required();

  auto* probe = app.add_subcommand("probe-latents", "Classify driver styles from latents");
  add_common(probe, probe_o);
  probe->add_option("--data", data_path, "dataset.jsonl path")->required();
  probe->add_option("--checkpoint", dpl_ckpt, "representation checkpoint")->required();

  auto* tpol = app.add_subcommand("train-policy", "Train the intersection policy");
  add_common(tpol, train_o);
  tpol->add_option("--dpl-checkpoint", dpl_ckpt, "optional representation checkpoint");

  auto* ev = app.add_subcommand("eval", "Evaluate a trained policy");
  add_common(ev, eval_o);
  ev->add_option("--checkpoint", policy_ckpt, "policy checkpoint")->required();
  ev->add_option("--dpl-checkpoint", dpl_ckpt, "optional representation checkpoint");
  ev->add_option("--episodes", eval_episodes, "number of evaluation episodes");
  ev->add_option("--record", record_dir, "record episodes into this directory");

  auto* sweep = app.add_subcommand("sweep-ct", "Coordination-tendency sweep");
  add_common(sweep, sweep_o);
  sweep->add_option("--dpl-checkpoint", dpl_ckpt, "optional representation checkpoint");

  auto* abl = app.add_subcommand("ablate-prior", "Prior-conditioning ablation");
  add_common(abl, abl_o);
  abl->add_option("--dpl-checkpoint", dpl_ckpt, "representation checkpoint")->required();

  auto* rep = app.add_subcommand("replay", "Audit a recorded episode");
  rep->add_option("--dir", replay_dir, "episode record directory")->required();
  rep->add_option("--tol", replay_tol, "max allowed reward deviation");

  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient verification");

  auto* rpt = app.add_subcommand("report", "Render SVG charts for a run directory");
  rpt->add_option("--run", report_dir, "run directory containing metrics.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(gen_o);
    if (tdpl->parsed()) return cmd_train_dpl(dpl_o, data_path);
    if (probe->parsed()) return cmd_probe_latents(probe_o, data_path, dpl_ckpt);
    if (tpol->parsed()) return cmd_train_policy(train_o, dpl_ckpt);
    if (ev->parsed()) return cmd_eval(eval_o, policy_ckpt, dpl_ckpt, eval_episodes, record_dir);
    if (sweep->parsed()) return cmd_sweep_ct(sweep_o, dpl_ckpt);
    if (abl->parsed()) return cmd_ablate_prior(abl_o, dpl_ckpt);
    if (rep->parsed()) return cmd_replay(replay_dir, replay_tol);
    if (gc->parsed()) return cmd_grad_check();
    if (rpt->parsed()) return cmd_report(report_dir);
  } catch (const sca::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
