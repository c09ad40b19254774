// Copyright (c) 2026 The DFSMN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "CLI11.hpp"
#include "dfsmn/analysis.h"
#include "dfsmn/config.h"
#include "dfsmn/dataset.h"
#include "dfsmn/feature_io.h"
#include "dfsmn/grad_check.h"
#include "dfsmn/metrics.h"
#include "dfsmn/model_io.h"
#include "dfsmn/trainer.h"

namespace dfsmn::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

NetworkConfig config_from_flags(const std::string& preset, const std::string& config_path) {
  if (!preset.empty() && !config_path.empty()) {
    throw UsageError("give either --preset or --config, not both");
  }
  if (!config_path.empty()) {
    if (!fs::exists(config_path)) throw UsageError("config file not found: " + config_path);
    return load_config_file(config_path);
  }
  if (!preset.empty()) return preset_config(preset);
  throw UsageError("one of --preset or --config is required");
}

// A dataset root produced by synthdata holds train/ and valid/ splits; any
// other directory with a manifest is used as-is.
fs::path split_dir(const fs::path& root, const char* split) {
  if (fs::exists(root / kManifestName)) return root;
  if (fs::exists(root / split / kManifestName)) return root / split;
  throw UsageError("no dataset manifest under " + root.string());
}

// Evaluation data: the validation split, or the training split when the
// validation split is absent or empty.
Dataset read_eval_split(const fs::path& root) {
  if (!fs::exists(root / kManifestName) && fs::exists(root / "valid" / kManifestName)) {
    auto valid = read_dataset_dir(root / "valid");
    if (!valid.sequences.empty()) return valid;
  }
  return read_dataset_dir(split_dir(root, "train"));
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::vector<std::string> presets;
  std::string config;
  std::string format = "text";
  std::string out;
};

void cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  std::vector<CostReport> rows;
  if (!a.config.empty()) {
    if (!a.presets.empty()) throw UsageError("give either --preset or --config, not both");
    if (!fs::exists(a.config)) throw UsageError("config file not found: " + a.config);
    rows.push_back(cost_report(fs::path(a.config).stem().string(), load_config_file(a.config)));
  } else {
    rows = table_report(a.presets.empty() ? preset_names() : a.presets);
  }
  const std::string text = a.format == "json" ? format_records(rows) : format_table(rows);
  if (a.out.empty()) {
    out << text;
  } else {
    std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
    if (!f) throw UsageError("cannot write " + a.out);
    f << text;
  }
}

// -------------------------------------------------------------- gradcheck

struct GradCheckArgs {
  std::string config;
  std::string preset;
  std::size_t frames = 20;
  std::uint64_t seed = 0;
  double tol = 1e-4;
  double step = 1e-5;
  std::size_t samples = 20;
};

void cmd_gradcheck(const GradCheckArgs& a, std::ostream& out) {
  auto cfg = config_from_flags(a.preset, a.config);
  if (cfg.precision != Precision::kFloat64) {
    out << "note: gradient check runs in fp64 (config precision overridden)\n";
    cfg.precision = Precision::kFloat64;
  }
  GradCheckOptions opt;
  opt.frames = a.frames;
  opt.seed = a.seed;
  opt.tolerance = a.tol;
  opt.step = a.step;
  opt.samples_per_class = a.samples;
  const auto report = grad_check(cfg, opt);
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s %14s %8s %8s  %s\n", "class", "max_rel_err",
                "checked", "kinks", "worst");
  out << line;
  for (const auto& [name, c] : report.classes) {
    std::snprintf(line, sizeof(line), "%-8s %14.3e %8zu %8zu  %s\n", name.c_str(),
                  c.max_rel_err, c.checked, c.skipped_kinks, c.worst.c_str());
    out << line;
  }
  out << (report.pass ? "PASS" : "FAIL") << " (tolerance " << fmt(a.tol) << ")\n";
  if (!report.pass) {
    const auto& worst = report.classes.at(report.worst_class);
    throw CheckFailed("gradient check failed: class '" + report.worst_class +
                      "' max relative error " + fmt(worst.max_rel_err, "%.3e") + " at " +
                      worst.worst);
  }
}

// -------------------------------------------------------------- synthdata

struct SynthArgs {
  std::string task = "echo";
  int lag = 0;
  int sequences = 64;
  int valid = -1;
  int len = 64;
  int input_dim = -1;
  double noise = 0.0;
  std::string out;
  std::uint64_t seed = 0;
};

void cmd_synthdata(const SynthArgs& a, std::ostream& out) {
  SyntheticTaskSpec spec;
  if (a.task == "echo") {
    spec.kind = SyntheticTaskSpec::Kind::kEcho;
    spec.input_dim = a.input_dim > 0 ? a.input_dim : 1;
  } else if (a.task == "acoustic_toy") {
    spec.kind = SyntheticTaskSpec::Kind::kAcousticToy;
    spec.input_dim = a.input_dim > 0 ? a.input_dim : 8;
  } else {
    throw UsageError("unknown task '" + a.task + "' (expected echo or acoustic_toy)");
  }
  spec.lag = a.lag;
  spec.noise_std = a.noise;
  spec.num_sequences = a.sequences;
  spec.num_valid = a.valid >= 0 ? a.valid : std::max(1, a.sequences / 4);
  spec.seq_len = a.len;
  const auto [train_set, valid_set] = generate_task(spec, a.seed);
  const fs::path root(a.out);
  write_dataset_dir(root / "train", train_set);
  write_dataset_dir(root / "valid", valid_set);
  out << "wrote " << train_set.sequences.size() << " training and "
      << valid_set.sequences.size() << " validation sequences to " << root.string()
      << "\n";
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  std::string config;
  std::string preset;
  std::string data;
  std::string out;
  std::string history;
  double lr = TrainConfig{}.lr;
  int epochs = TrainConfig{}.max_epochs;
  std::size_t batch_frames = TrainConfig{}.batch_frames;
  double decay = TrainConfig{}.decay_factor;
  int patience = TrainConfig{}.patience;
  double min_improvement = TrainConfig{}.min_improvement;
  std::uint64_t seed = 0;
  bool quiet = false;
};

template <typename T>
TrainResult<T> run_training(const NetworkConfig& cfg, const Dataset& train_set,
                            const Dataset& valid_set, const TrainConfig& tc,
                            bool quiet, std::ostream& out) {
  auto params = build_network<T>(cfg, tc.seed);
  return train(cfg, std::move(params), train_set, valid_set, tc,
               [&](const EpochRecord& r) {
                 if (quiet) return;
                 out << "epoch " << r.epoch << " lr " << fmt(r.lr) << " train_mse "
                     << fmt(r.train_mse) << " valid_mse " << fmt(r.valid_mse) << "\n";
               });
}

void cmd_train(const TrainArgs& a, std::ostream& out) {
  const auto cfg = config_from_flags(a.preset, a.config);
  const fs::path root(a.data);
  if (!fs::exists(root)) throw UsageError("data directory not found: " + a.data);
  const auto train_set = read_dataset_dir(split_dir(root, "train"));
  Dataset valid_set;
  if (fs::exists(root / "valid" / kManifestName)) valid_set = read_dataset_dir(root / "valid");
  train_set.check_against(cfg);
  valid_set.check_against(cfg);

  TrainConfig tc;
  tc.lr = a.lr;
  tc.max_epochs = a.epochs;
  tc.batch_frames = a.batch_frames;
  tc.decay_factor = a.decay;
  tc.patience = a.patience;
  tc.min_improvement = a.min_improvement;
  tc.seed = a.seed;
  tc.validate();

  std::vector<EpochRecord> history;
  if (cfg.precision == Precision::kFloat64) {
    auto r = run_training<double>(cfg, train_set, valid_set, tc, a.quiet, out);
    save_model(fs::path(a.out), cfg, r.params);
    history = std::move(r.history);
  } else {
    auto r = run_training<float>(cfg, train_set, valid_set, tc, a.quiet, out);
    save_model(fs::path(a.out), cfg, r.params);
    history = std::move(r.history);
  }
  const std::string history_path = a.history.empty() ? a.out + ".history" : a.history;
  std::ofstream h(history_path, std::ios::trunc);
  if (!h) throw UsageError("cannot write " + history_path);
  for (const auto& r : history) {
    h << r.epoch << ' ' << fmt(r.lr, "%.9g") << ' ' << fmt(r.train_mse, "%.9g") << ' '
      << fmt(r.valid_mse, "%.9g") << '\n';
  }
  out << "final valid_mse " << (history.empty() ? std::string("n/a")
                                                 : fmt(history.back().valid_mse))
      << "\nmodel written to " << a.out << "\n";
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
  std::string model;
  std::string data;
  std::string ref;
  std::string hyp;
};

using Streams = std::map<std::string, Matrix<double>>;

// Frames of every sequence stacked per stream.
void append_rows(Streams& dst, const std::string& name, const Matrix<double>& m) {
  auto it = dst.find(name);
  if (it == dst.end()) {
    dst.emplace(name, m);
    return;
  }
  auto& cur = it->second;
  if (cur.cols() != m.cols()) {
    throw UsageError("stream '" + name + "' changes dim from " + std::to_string(cur.cols()) +
                     " to " + std::to_string(m.cols()));
  }
  std::vector<double> data(cur.values().begin(), cur.values().end());
  data.insert(data.end(), m.values().begin(), m.values().end());
  cur = Matrix<double>(cur.rows() + m.rows(), cur.cols(), std::move(data));
}

template <typename T>
Streams predict_all(const NetworkParams<T>& params, const NetworkConfig& cfg,
                    const Dataset& data) {
  Streams hyp;
  for (const auto& s : data.sequences) {
    for (const auto& [name, m] : predict(params, cfg, s.input))
      append_rows(hyp, name, m.template cast<double>());
  }
  return hyp;
}

void print_metrics(const Streams& ref, const Streams& hyp, std::ostream& out) {
  Streams ref_common, hyp_common;
  for (const auto& [name, h] : hyp) {
    const auto it = ref.find(name);
    if (it == ref.end()) {
      throw UsageError("reference data lacks stream '" + name + "' (dim " +
                       std::to_string(h.cols()) + ")");
    }
    if (!it->second.same_shape(h)) {
      throw UsageError("stream '" + name + "' dims differ: reference " +
                       it->second.shape() + " vs hypothesis " + h.shape());
    }
    ref_common.emplace(name, it->second);
    hyp_common.emplace(name, h);
  }
  auto has = [&](const char* s) { return hyp_common.count(s) > 0; };
  auto line = [&](const char* name, double v) { out << name << '\t' << fmt(v, "%.6f") << '\n'; };
  if (has("mcep")) {
    line("MCD_dB", mcd(ref_common.at("mcep"), hyp_common.at("mcep")));
  } else {
    out << "skipped MCD: no 'mcep' stream\n";
  }
  if (has("lf0") && has("uv")) {
    const auto& ref_lf0 = ref_common.at("lf0");
    Matrix<double> ref_hz(ref_lf0.rows(), 1);
    for (std::size_t t = 0; t < ref_lf0.rows(); ++t) ref_hz[t] = std::exp(ref_lf0(t, 0));
    try {
      line("F0_RMSE_Hz", f0_rmse(ref_hz, hyp_common.at("lf0"), ref_common.at("uv"),
                                 hyp_common.at("uv")));
    } catch (const MetricError& e) {
      out << "skipped F0 RMSE: " << e.what() << "\n";
    }
  } else {
    out << "skipped F0 RMSE: needs 'lf0' and 'uv' streams\n";
  }
  if (has("bap")) {
    line("BAPD", bapd(ref_common.at("bap"), hyp_common.at("bap")));
  } else {
    out << "skipped BAPD: no 'bap' stream\n";
  }
  if (has("uv")) {
    line("UV_error", uv_error(ref_common.at("uv"), hyp_common.at("uv")));
  } else {
    out << "skipped U/V error: no 'uv' stream\n";
  }
  line("MSE", total_mse(ref_common, hyp_common));
  for (const auto& [name, h] : hyp_common) {
    out << "MSE[" << name << "]\t"
        << fmt(total_mse(Streams{{name, ref_common.at(name)}}, Streams{{name, h}}), "%.6f")
        << '\n';
  }
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  Streams ref, hyp;
  if (!a.model.empty()) {
    if (a.data.empty()) throw UsageError("--model needs --data");
    if (!fs::exists(a.model)) throw UsageError("model file not found: " + a.model);
    const auto model = load_model(fs::path(a.model));
    const auto data = read_eval_split(a.data);
    data.check_against(model.config);
    for (const auto& s : data.sequences)
      for (const auto& [name, m] : s.targets) append_rows(ref, name, m);
    hyp = std::visit([&](const auto& p) { return predict_all(p, model.config, data); },
                     model.params);
  } else {
    if (a.ref.empty() || a.hyp.empty()) {
      throw UsageError("eval needs --model with --data, or --ref with --hyp");
    }
    const auto ref_data = read_eval_split(a.ref);
    const auto hyp_data = read_eval_split(a.hyp);
    for (const auto& s : ref_data.sequences)
      for (const auto& [name, m] : s.targets) append_rows(ref, name, m);
    for (const auto& s : hyp_data.sequences)
      for (const auto& [name, m] : s.targets) append_rows(hyp, name, m);
  }
  print_metrics(ref, hyp, out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DFSMN acoustic model toolkit", "dfsmn"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* sc_analyze = app.add_subcommand("analyze", "Receptive field, size and FLOPS report");
  sc_analyze->add_option("--preset", analyze.presets, "Preset name(s) A..I (default: all)");
  sc_analyze->add_option("--config", analyze.config, "Network config JSON file");
  sc_analyze->add_option("--format", analyze.format, "text or json")
      ->check(CLI::IsMember({"text", "json"}));
  sc_analyze->add_option("--out", analyze.out, "Write the report to a file");

  GradCheckArgs gc;
  auto* sc_grad = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  sc_grad->add_option("--config", gc.config, "Network config JSON file");
  sc_grad->add_option("--preset", gc.preset, "Preset name");
  sc_grad->add_option("--frames", gc.frames, "Sequence length")->check(CLI::PositiveNumber);
  sc_grad->add_option("--seed", gc.seed, "Random seed");
  sc_grad->add_option("--tol", gc.tol, "Max relative error");
  sc_grad->add_option("--step", gc.step, "Finite-difference step");
  sc_grad->add_option("--samples", gc.samples, "Scalars per parameter class")
      ->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* sc_synth = app.add_subcommand("synthdata", "Generate a synthetic dataset");
  sc_synth->add_option("--task", synth.task, "echo or acoustic_toy");
  sc_synth->add_option("--lag", synth.lag, "Echo lag in frames");
  sc_synth->add_option("--sequences", synth.sequences, "Training sequences");
  sc_synth->add_option("--valid", synth.valid, "Validation sequences (default N/4)");
  sc_synth->add_option("--len", synth.len, "Frames per sequence");
  sc_synth->add_option("--input-dim", synth.input_dim, "Input feature dim");
  sc_synth->add_option("--noise", synth.noise, "Target noise stddev");
  sc_synth->add_option("--out", synth.out, "Output directory")->required();
  sc_synth->add_option("--seed", synth.seed, "Random seed");

  TrainArgs tr;
  auto* sc_train = app.add_subcommand("train", "Train a network with SGD");
  sc_train->add_option("--config", tr.config, "Network config JSON file");
  sc_train->add_option("--preset", tr.preset, "Preset name");
  sc_train->add_option("--data", tr.data, "Dataset directory")->required();
  sc_train->add_option("--out", tr.out, "Model output path")->required();
  sc_train->add_option("--history", tr.history, "History file (default MODEL.history)");
  sc_train->add_option("--lr", tr.lr, "Initial learning rate");
  sc_train->add_option("--epochs", tr.epochs, "Number of epochs");
  sc_train->add_option("--batch-frames", tr.batch_frames, "Frames per minibatch");
  sc_train->add_option("--decay", tr.decay, "Learning-rate decay factor");
  sc_train->add_option("--patience", tr.patience, "Stale evaluations before decay");
  sc_train->add_option("--min-improvement", tr.min_improvement,
                       "Relative validation improvement that counts");
  sc_train->add_option("--seed", tr.seed, "Random seed");
  sc_train->add_flag("--quiet", tr.quiet, "No per-epoch output");

  EvalArgs ev;
  auto* sc_eval = app.add_subcommand("eval", "Objective measures");
  sc_eval->add_option("--model", ev.model, "Model file");
  sc_eval->add_option("--data", ev.data, "Reference dataset directory");
  sc_eval->add_option("--ref", ev.ref, "Reference dataset directory");
  sc_eval->add_option("--hyp", ev.hyp, "Hypothesis dataset directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (sc_analyze->parsed()) cmd_analyze(analyze, out);
    if (sc_grad->parsed()) cmd_gradcheck(gc, out);
    if (sc_synth->parsed()) cmd_synthdata(synth, out);
    if (sc_train->parsed()) cmd_train(tr, out);
    if (sc_eval->parsed()) cmd_eval(ev, out);
  } catch (const CheckFailed& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ModelFormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FeatureFormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

}  // namespace dfsmn::cli
