#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "gripsim/io/config_files.hpp"
#include "gripsim/io/manifest.hpp"
#include "gripsim/io/model_file.hpp"
#include "gripsim/learn/dataset.hpp"
#include "gripsim/learn/metrics.hpp"
#include "gripsim/learn/trainer.hpp"
#include "gripsim/sim/simulator.hpp"

namespace fs = std::filesystem;
using namespace gripsim;

namespace {

enum Exit { kOk = 0, kInputError = 2, kDiverged = 3, kTrainingDiverged = 4, kInternal = 5 };

std::string dataset_file(const std::string& dir) { return (fs::path(dir) / "dataset.bin").string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create directory " + dir);
}

void ensure_parent(const std::string& file) {
  const fs::path parent = fs::path(file).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
}

template <typename F>
void write_file(const std::string& path, F&& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path);
  body(os);
  if (!os) throw InputError("failed writing " + path);
}

std::string format_g(double v) {
  std::ostringstream s;
  s << std::setprecision(9) << std::showpoint << v;
  return s.str();
}

void print_metrics(const std::string& split, const MetricsRecord& m) {
  std::printf("%s: samples %d  MJE %.4f cm  MCE %.4f cm  SMCE %.4f cm  CP %.2f%%  PD %s cm  SD %.4f cm  SR %.2f%%",
              split.c_str(), m.samples, m.mje, m.mce, m.smce, m.cp, m.pd ? format_g(*m.pd).c_str() : "n/a", m.sd,
              m.sr);
  if (m.ae) std::printf("  AE %.4f mm", *m.ae);
  if (m.diverged) std::printf("  diverged %d", m.diverged);
  std::printf("\n");
}

// ---- simulate

struct SimulateArgs {
  std::string scene;
  std::optional<int> steps;
  std::optional<double> dt;
  std::string out = "trajectory.csv";
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
  ensure_parent(a.out);
  RunManifest manifest(a.out + ".manifest.json", "simulate", argv);
  manifest.add_input_file(a.scene);
  const SceneFile scene = parse_scene(read_text_file(a.scene), a.scene);
  SimParams params = scene.sim;
  if (a.steps) params.steps = *a.steps;
  if (a.dt) params.dt = *a.dt;
  params.validate();
  manifest.add_input_text("horizon", std::to_string(params.steps) + " " + format_g(params.dt));
  manifest.add_seed("scene", scene.seed);
  manifest.add_output(a.out);
  manifest.write_started();
  try {
    const Trajectory traj = simulate(scene.configuration(), params);
    write_file(a.out, [&](std::ostream& os) { write_trajectory_csv(os, traj); });
    std::cout << format_g(stability_loss(traj)) << "\n";
  } catch (const SimulationDiverged& e) {
    manifest.write_finished(false, e.what());
    throw;
  }
  manifest.write_finished(true);
  return kOk;
}

// ---- gen-data

struct GenDataArgs {
  int count = 200;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
};

int cmd_gen_data(const GenDataArgs& a, const std::vector<std::string>& argv) {
  DatasetConfig cfg;
  std::string config_text;
  if (!a.config.empty()) {
    config_text = read_text_file(a.config);
    cfg = parse_dataset_config(config_text, a.config);
  }
  cfg.count = a.count;
  if (a.seed) cfg.seed = *a.seed;
  if (cfg.count < 1) throw InputError("--count must be at least 1");
  cfg.validate();
  ensure_dir(a.out);
  RunManifest manifest((fs::path(a.out) / "manifest.json").string(), "gen-data", argv);
  manifest.add_input_text("config", config_text);
  manifest.add_input_text("count", std::to_string(cfg.count));
  manifest.add_seed("dataset", cfg.seed);
  const std::string path = dataset_file(a.out);
  manifest.add_output(path);
  manifest.write_started();
  const Dataset ds = generate_dataset(cfg);
  save_dataset(path, ds);
  if (ds.partial())
    std::cerr << "warning: only " << ds.stable << " of " << ds.requested << " stable scenes after " << ds.attempts
              << " attempts\n";
  std::printf("scenes %d (train %zu, test %zu)  attempts %d  stable fraction %.4f  diverged %d\n", ds.stable,
              ds.train.size(), ds.test.size(), ds.attempts, ds.stable_fraction(), ds.diverged);
  manifest.write_finished(true);
  return kOk;
}

// ---- train

struct TrainArgs {
  std::string data;
  std::string config;
  std::string mode = "deepsim-s";
  std::string out;
  bool resume = false;
  long checkpoint_every = 0;
  long stop_after = -1;
};

TrainConfig apply_mode(TrainConfig cfg, const std::string& mode) {
  if (mode == "baseline") {
    cfg.hp.stability = 0;
    cfg.surrogate = false;
    cfg.mode = TargetMode::S;
  } else if (mode == "deepsim-s") {
    cfg.mode = TargetMode::S;
  } else if (mode == "deepsim-t") {
    cfg.mode = TargetMode::T;
  } else if (mode == "deepsim-rt") {
    cfg.mode = TargetMode::RT;
  } else {
    throw InputError("unknown mode '" + mode + "' (baseline, deepsim-s, deepsim-t, deepsim-rt)");
  }
  return cfg;
}

EvalParams eval_params(const TrainConfig& cfg) {
  EvalParams p;
  p.sim = cfg.sim;
  p.metric_steps = cfg.metric_steps;
  p.success_threshold = cfg.hp.success_threshold;
  return p;
}

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  std::string config_text;
  TrainConfig cfg;
  if (!a.config.empty()) {
    config_text = read_text_file(a.config);
    cfg = parse_train_config(config_text, a.config);
  }
  cfg = apply_mode(cfg, a.mode);
  cfg.validate();
  const Dataset data = load_dataset(dataset_file(a.data));
  if (data.train.empty() || data.test.empty()) throw InputError("dataset needs train and test scenes");

  ensure_dir(a.out);
  const fs::path dir(a.out);
  const std::string state = (dir / "state.bin").string();
  const std::string model = (dir / "model.bin").string();
  const std::string report = (dir / "report.csv").string();
  const std::string evals = (dir / "eval.csv").string();

  RunManifest manifest((dir / "manifest.json").string(), "train", argv);
  manifest.add_input_file(dataset_file(a.data));
  manifest.add_input_text("config", config_text);
  manifest.add_input_text("mode", a.mode);
  manifest.add_seed("train", cfg.seed);
  manifest.add_seed("dataset", data.seed);
  for (const auto& p : {state, model, report, evals}) manifest.add_output(p);
  manifest.write_started();

  Trainer trainer(data, cfg);
  if (a.resume && fs::exists(state)) {
    trainer.load(state);
    std::printf("resumed at step %ld\n", trainer.step());
  }
  const auto save_state = [&](const Trainer& t) { t.save(state); };
  try {
    trainer.run(a.stop_after, a.checkpoint_every, save_state);
  } catch (const TrainingDiverged& e) {
    manifest.write_finished(false, e.what());
    throw;
  }
  trainer.save(state);
  write_file(report, [&](std::ostream& os) { write_report_csv(os, trainer.report()); });

  ModelFile m;
  m.label = a.mode;
  m.generator = trainer.generator();
  m.has_surrogate = cfg.surrogate;
  if (cfg.surrogate) m.surrogate = trainer.surrogate();
  save_model(model, m);

  TrainReport r = trainer.report();
  if (trainer.done()) {
    const MetricsRecord test =
        evaluate(data.test, trainer.generator(), eval_params(cfg), cfg.surrogate ? &trainer.surrogate() : nullptr);
    r.evals.push_back({trainer.step(), test});
    print_metrics("test", test);
    if (test.ae) std::printf("final AE %.6f mm\n", *test.ae);
  } else {
    std::printf("stopped at step %ld of %ld\n", trainer.step(), cfg.total_steps());
  }
  write_file(evals, [&](std::ostream& os) { write_eval_csv(os, r); });
  manifest.write_finished(true);
  return kOk;
}

// ---- eval

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string out = "metrics.csv";
  int metric_steps = 10;
  int loss_steps = 100;
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  ensure_parent(a.out);
  RunManifest manifest(a.out + ".manifest.json", "eval", argv);
  manifest.add_input_file(dataset_file(a.data));
  manifest.add_input_file(a.checkpoint);
  manifest.add_input_text("horizons", std::to_string(a.metric_steps) + " " + std::to_string(a.loss_steps));
  manifest.add_output(a.out);
  const Dataset data = load_dataset(dataset_file(a.data));
  const ModelFile m = load_model(a.checkpoint);
  const int observation = data.train.empty() ? data.test.front().observation.size()
                                             : data.train.front().observation.size();
  if (m.generator.mlp.input_size() != observation || m.generator.joints() != data.hand->joint_count())
    throw InputError("checkpoint generator does not match the dataset dimensions");
  if (m.has_surrogate && !data.train.empty() &&
      m.surrogate.input_size() != assemble_input(data.train.front().configuration()).size())
    throw InputError("checkpoint surrogate does not match the dataset dimensions");
  manifest.add_seed("dataset", data.seed);
  manifest.write_started();
  EvalParams p;
  p.sim.steps = a.loss_steps;
  p.metric_steps = a.metric_steps;
  p.sim.validate();
  const StabilityNet* net = m.has_surrogate ? &m.surrogate : nullptr;
  write_file(a.out, [&](std::ostream& os) {
    write_metrics_csv_header(os);
    for (const auto& [name, split] : {std::pair{"train", &data.train}, std::pair{"test", &data.test}}) {
      if (split->empty()) continue;
      const MetricsRecord r = evaluate(*split, m.generator, p, net);
      write_metrics_csv_row(os, name, r);
      print_metrics(name, r);
    }
  });
  manifest.write_finished(true);
  return kOk;
}

// ---- grad-compare

struct GradArgs {
  std::string scene;
  std::string data;
  std::vector<int> index{0};
  std::string split = "test";
  std::string checkpoint;
  std::vector<double> eps{1e-3, 1e-4, 1e-5, 1e-6};
  std::optional<int> steps;
  std::string out = "grad_probe.csv";
};

int cmd_grad_compare(const GradArgs& a, const std::vector<std::string>& argv) {
  ensure_parent(a.out);
  RunManifest manifest(a.out + ".manifest.json", "grad-compare", argv);
  manifest.add_input_file(a.checkpoint);
  std::ostringstream eps;
  for (double e : a.eps) eps << format_g(e) << ' ';
  manifest.add_input_text("eps", eps.str());
  const ModelFile m = load_model(a.checkpoint);
  if (!m.has_surrogate) throw InputError(a.checkpoint + " has no surrogate (baseline checkpoint)");

  std::vector<Configuration> configs;
  SimParams params;
  if (!a.scene.empty()) {
    manifest.add_input_file(a.scene);
    const SceneFile scene = parse_scene(read_text_file(a.scene), a.scene);
    configs.push_back(scene.configuration());
    params = scene.sim;
  } else {
    manifest.add_input_file(dataset_file(a.data));
    const Dataset data = load_dataset(dataset_file(a.data));
    const auto& split = a.split == "train" ? data.train : data.test;
    for (int i : a.index) {
      if (i < 0 || static_cast<std::size_t>(i) >= split.size())
        throw InputError("--index " + std::to_string(i) + " out of range for the " + a.split + " split");
      configs.push_back(split[i].configuration());
    }
  }
  if (a.steps) params.steps = *a.steps;
  params.validate();
  manifest.add_input_text("index", a.split + std::to_string(a.index.size()));
  manifest.add_output(a.out);
  manifest.write_started();
  std::vector<GradProbe> probes;
  for (const auto& c : configs) {
    if (assemble_input(c).size() != m.surrogate.input_size())
      throw InputError("checkpoint surrogate does not match the configuration size");
    probes.push_back(grad_compare(c, m.surrogate, params, a.eps));
  }
  write_file(a.out, [&](std::ostream& os) { write_probe_csv(os, probes); });
  for (std::size_t p = 0; p < probes.size(); ++p)
    for (std::size_t i = 0; i < probes[p].entries.size(); ++i)
      std::printf("probe %zu  eps %-8g  |fd| %-14s  |surrogate| %s\n", p, probes[p].entries[i].epsilon,
                  format_g(probes[p].fd_norm(i)).c_str(), format_g(probes[p].surrogate_norm()).c_str());
  manifest.write_finished(true);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grasp stability simulation, surrogate training and pose refinement"};
  app.require_subcommand(1);
  const std::vector<std::string> args(argv, argv + argc);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate a scene and print the stability loss");
  c_sim->add_option("--scene", sim.scene, "Scene file")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--steps", sim.steps, "Horizon in steps (overrides the scene)");
  c_sim->add_option("--dt", sim.dt, "Time step in seconds (overrides the scene)");
  c_sim->add_option("--out", sim.out, "Trajectory CSV")->capture_default_str();

  GenDataArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a synthetic grasp dataset");
  c_gen->add_option("--count", gen.count, "Stable scenes to generate")->capture_default_str();
  c_gen->add_option("--seed", gen.seed, "Dataset seed (overrides the config)");
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_option("--config", gen.config, "Dataset config file")->check(CLI::ExistingFile);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train the pose generator, optionally with the surrogate");
  c_train->add_option("--data", train.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_train->add_option("--config", train.config, "Training config file")->check(CLI::ExistingFile);
  c_train->add_option("--mode", train.mode, "baseline | deepsim-s | deepsim-t | deepsim-rt")
      ->capture_default_str()
      ->check(CLI::IsMember({"baseline", "deepsim-s", "deepsim-t", "deepsim-rt"}));
  c_train->add_option("--out", train.out, "Output directory")->required();
  c_train->add_flag("--resume", train.resume, "Continue from OUT/state.bin when present");
  c_train->add_option("--checkpoint-every", train.checkpoint_every, "Write OUT/state.bin every N steps");
  c_train->add_option("--stop-after", train.stop_after, "Stop once this global step is reached");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Metrics of a trained model on both splits");
  c_eval->add_option("--data", ev.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_eval->add_option("--checkpoint", ev.checkpoint, "model.bin written by train")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--out", ev.out, "Metrics CSV")->capture_default_str();
  c_eval->add_option("--metric-steps", ev.metric_steps, "Simulation horizon for SD/SR")->capture_default_str();
  c_eval->add_option("--loss-steps", ev.loss_steps, "Simulation horizon for AE labels")->capture_default_str();

  GradArgs grad;
  auto* c_grad = app.add_subcommand("grad-compare", "Finite-difference vs surrogate gradients of the stability loss");
  auto* o_scene = c_grad->add_option("--scene", grad.scene, "Scene file")->check(CLI::ExistingFile);
  auto* o_data = c_grad->add_option("--data", grad.data, "Dataset directory")->check(CLI::ExistingDirectory);
  o_scene->excludes(o_data);
  c_grad->add_option("--index", grad.index, "Scene indices within the split")->capture_default_str();
  c_grad->add_option("--split", grad.split, "train | test")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "test"}));
  c_grad->add_option("--checkpoint", grad.checkpoint, "model.bin with a surrogate")->required()->check(CLI::ExistingFile);
  c_grad->add_option("--eps", grad.eps, "Finite-difference steps")->capture_default_str();
  c_grad->add_option("--steps", grad.steps, "Simulation horizon (overrides the scene)");
  c_grad->add_option("--out", grad.out, "Probe CSV")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*c_sim) return cmd_simulate(sim, args);
    if (*c_gen) return cmd_gen_data(gen, args);
    if (*c_train) return cmd_train(train, args);
    if (*c_eval) return cmd_eval(ev, args);
    if (*c_grad) {
      if (grad.scene.empty() == grad.data.empty()) throw InputError("grad-compare needs exactly one of --scene, --data");
      return cmd_grad_compare(grad, args);
    }
  } catch (const SimulationDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTrainingDiverged;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kInputError;
}
