// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// sepkit: simulate, train, separate, evaluate, oracle, rf, gradcheck.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sepkit/error.h"
#include "sepkit/io/manifest.h"
#include "sepkit/io/wav.h"
#include "sepkit/pipeline/config.h"
#include "sepkit/pipeline/data.h"
#include "sepkit/pipeline/diagnostics.h"
#include "sepkit/pipeline/evaluate.h"
#include "sepkit/pipeline/model.h"
#include "sepkit/pipeline/parallel.h"
#include "sepkit/pipeline/train.h"
#include "sepkit/simulate/scene.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sepkit;

namespace {

constexpr int kExitUser = 1;
constexpr int kExitInternal = 2;

void ErrorLine(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << std::endl;
}

// numeric and dimension failures mean the library misbehaved; everything
// else traces back to what the user passed in.
int ExitCodeFor(const std::string& kind) {
  return (kind == "numeric" || kind == "dimension") ? kExitInternal : kExitUser;
}

simulate::SceneRules LoadRules(const std::string& spec) {
  if (spec == "wsj0") return simulate::SceneRules::Wsj0();
  if (spec == "librispeech" || spec == "ls") return simulate::SceneRules::Libri();
  std::ifstream in(spec);
  if (!in) throw InputError("cannot open rules file '" + spec + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("rules file '" + spec + "': " + e.what());
  }
  return simulate::SceneRules::FromJson(j);
}

simulate::Range ParseRange(const std::string& text, const std::string& flag) {
  simulate::Range r;
  char comma = 0;
  std::istringstream in(text);
  if (!(in >> r.lo)) throw UsageError(flag + ": expected LO,HI, got '" + text + "'");
  if (in >> comma) {
    if (comma != ',' || !(in >> r.hi)) throw UsageError(flag + ": expected LO,HI, got '" + text + "'");
  } else {
    r.hi = r.lo;
  }
  return r;
}

std::vector<pipeline::SceneData> LoadManifestScenes(const std::string& path, int channels, int threads) {
  return pipeline::LoadScenes(io::LoadManifest(path), channels, threads);
}

std::vector<std::string> ManifestLabels(const std::string& path) { return io::LoadManifest(path).bucket_labels; }

// Model and config restored from a checkpoint.
pipeline::Model RestoreModel(const std::string& path) {
  const pipeline::LoadedCheckpoint header = pipeline::ReadCheckpointHeader(path);
  pipeline::Model model(header.config, header.config.seed);
  pipeline::LoadCheckpoint(path, model);
  return model;
}

void EmitScores(const std::vector<pipeline::SceneScore>& scores, const std::vector<std::string>& labels,
                const std::string& title, const std::string& csv_path) {
  const pipeline::ScoreSummary summary = pipeline::Summarize(scores, labels);
  pipeline::PrintSummary(std::cout, summary, title);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw InputError("cannot write '" + csv_path + "'");
    pipeline::WriteScoresCsv(out, scores, summary);
  }
}

std::string Fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// ---- simulate ----

struct SimulateArgs {
  std::string rules = "wsj0";
  int count = 0;
  uint64_t seed = 0;
  std::string out;
  double duration = 4.0;
  std::string reference = "reverberant";
  std::string overlap = "1,1";
  int max_order = 10;
};

void RunSimulate(const SimulateArgs& a) {
  const simulate::SceneRules rules = LoadRules(a.rules);
  rules.Validate();
  if (a.count <= 0) throw UsageError("--count must be positive");
  pipeline::DatasetOptions opts;
  opts.duration_s = a.duration;
  opts.overlap = ParseRange(a.overlap, "--overlap");
  opts.mix.reference = simulate::ParseReferenceKind(a.reference);
  opts.mix.rir.max_order = a.max_order;
  const pipeline::DatasetSummary s =
      pipeline::WriteDataset(rules, a.count, a.seed, a.out, opts, pipeline::WorkerThreads());
  std::cout << "wrote " << a.count << " scenes to " << s.index_path << "\n";
  std::cout << "bucket_deg  count  share\n";
  for (size_t b = 0; b < s.bucket_labels.size(); ++b) {
    std::cout << std::left << std::setw(10) << s.bucket_labels[b] << "  " << std::right << std::setw(5)
              << s.bucket_counts[b] << "  " << Fixed(static_cast<double>(s.bucket_counts[b]) / a.count, 3)
              << "\n";
  }
}

// ---- train ----

struct TrainArgs {
  std::string config;
  std::string out;
  std::string resume;
  std::string train_manifest;
  std::string valid_manifest;
  int64_t max_steps = 0;
  std::optional<uint64_t> seed;
  int max_epochs = 0;
};

void RunTrain(const TrainArgs& a) {
  pipeline::ExperimentConfig cfg = pipeline::ExperimentConfig::Load(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.max_epochs > 0) cfg.max_epochs = a.max_epochs;
  if (!a.train_manifest.empty()) cfg.train_manifest = a.train_manifest;
  if (!a.valid_manifest.empty()) cfg.valid_manifest = a.valid_manifest;
  if (cfg.train_manifest.empty()) throw ConfigError("train_manifest: not set in config or via --train-manifest");

  const int threads = pipeline::WorkerThreads();
  const auto train = LoadManifestScenes(cfg.train_manifest, cfg.channels, threads);
  std::vector<pipeline::SceneData> valid;
  if (!cfg.valid_manifest.empty()) valid = LoadManifestScenes(cfg.valid_manifest, cfg.channels, threads);

  pipeline::Model model(cfg, cfg.seed);
  pipeline::TrainerState state = pipeline::InitialState(cfg);
  if (!a.resume.empty()) {
    state = pipeline::LoadCheckpoint(a.resume, model).state;
    std::cout << "resumed from " << a.resume << " at epoch " << state.epoch << ", step " << state.step << "\n";
  }

  fs::create_directories(a.out);
  {
    std::ofstream c(fs::path(a.out) / "config.json");
    c << cfg.ToJson().dump(2) << "\n";
  }
  std::ofstream history(fs::path(a.out) / "history.csv", a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (a.resume.empty()) history << "epoch,train_loss,valid_loss,lr,steps\n";

  pipeline::TrainOptions opts;
  opts.max_steps = a.max_steps;
  opts.checkpoint_dir = a.out;
  opts.threads = threads;
  opts.on_epoch = [&](const pipeline::EpochRecord& r) {
    char line[256];
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%lld\n", r.epoch, r.train_loss, r.valid_loss, r.lr,
                  static_cast<long long>(r.steps));
    history << line << std::flush;
    std::cout << "epoch " << r.epoch << "  train " << Fixed(r.train_loss, 4) << "  valid "
              << Fixed(r.valid_loss, 4) << "  lr " << r.lr << "  steps " << r.steps << std::endl;
  };
  const pipeline::TrainResult result = pipeline::Train(model, state, train, valid, opts);
  std::cout << "stopped: " << result.stop_reason << "; best valid " << Fixed(state.best_valid, 4) << " at epoch "
            << state.best_epoch << "\n";
}

// ---- separate ----

struct SeparateArgs {
  std::string checkpoint;
  std::string input;
  std::string out;
};

void RunSeparate(const SeparateArgs& a) {
  pipeline::Model model = RestoreModel(a.checkpoint);
  const pipeline::ExperimentConfig& cfg = model.config();
  const io::WavData wav = io::ReadWav(a.input);
  if (wav.sample_rate != cfg.codec.sample_rate) {
    throw InputError(a.input + ": sample rate " + std::to_string(wav.sample_rate) + " Hz, model expects " +
                     std::to_string(cfg.codec.sample_rate));
  }
  if (static_cast<int>(wav.channels.size()) < cfg.channels) {
    throw InputError(a.input + ": " + std::to_string(wav.channels.size()) + " channel(s), model needs " +
                     std::to_string(cfg.channels));
  }
  pipeline::SceneData scene;
  scene.mixture.assign(wav.channels.begin(), wav.channels.begin() + cfg.channels);
  const auto est = pipeline::Separate(model, pipeline::MixtureTensor(scene, cfg.channels));
  fs::create_directories(a.out);
  for (size_t s = 0; s < est.size(); ++s) {
    io::WavData o;
    o.sample_rate = wav.sample_rate;
    o.channels = {est[s]};
    const fs::path p = fs::path(a.out) / ("s" + std::to_string(s + 1) + ".wav");
    io::WriteWav(p.string(), o);
    std::cout << p.string() << "\n";
  }
}

// ---- evaluate / oracle ----

struct StftArgs {
  int64_t length = 512;
  int64_t hop = 160;
  codec::CodecConfig Config() const {
    codec::CodecConfig c = codec::CodecConfig::Spectrogram(length, hop);
    c.Validate();
    return c;
  }
};

struct EvaluateArgs {
  std::string manifest;
  std::string checkpoint;
  std::string oracle;
  std::string csv;
  StftArgs stft;
};

void RunEvaluate(const EvaluateArgs& a) {
  const int threads = pipeline::WorkerThreads();
  const auto labels = ManifestLabels(a.manifest);
  if (!a.oracle.empty()) {
    const objectives::MaskType type = objectives::ParseMaskType(a.oracle);
    const auto scenes = LoadManifestScenes(a.manifest, 1, threads);
    EmitScores(pipeline::EvaluateOracle(scenes, type, a.stft.Config(), threads), labels,
               std::string("oracle ") + objectives::MaskTypeName(type), a.csv);
    return;
  }
  pipeline::Model model = RestoreModel(a.checkpoint);
  const auto scenes = LoadManifestScenes(a.manifest, model.config().channels, threads);
  EmitScores(pipeline::EvaluateModel(model, scenes, threads), labels, a.checkpoint, a.csv);
}

struct OracleArgs {
  std::string manifest;
  std::string mask = "all";
  std::string csv;
  StftArgs stft;
};

// CSV: header mask,metric,<bucket labels>,AVG; one row per mask and metric
// (sisnr_db, sdr_db), so rows = masks x 2.
void RunOracle(const OracleArgs& a) {
  const int threads = pipeline::WorkerThreads();
  std::vector<objectives::MaskType> masks;
  if (a.mask == "all") {
    masks = {objectives::MaskType::kIam, objectives::MaskType::kIbm, objectives::MaskType::kIrm,
             objectives::MaskType::kIpsm};
  } else {
    masks = {objectives::ParseMaskType(a.mask)};
  }
  const auto labels = ManifestLabels(a.manifest);
  const auto scenes = LoadManifestScenes(a.manifest, 1, threads);
  const codec::CodecConfig stft = a.stft.Config();

  std::ostringstream csv;
  csv << "mask,metric";
  for (const auto& l : labels) csv << "," << l;
  csv << ",AVG\n";
  auto cell = [](double v) {
    if (std::isnan(v)) return std::string();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10f", v);
    return std::string(buf);
  };

  std::cout << std::left << std::setw(6) << "mask" << std::setw(8) << "metric";
  for (const auto& l : labels) std::cout << std::right << std::setw(9) << l;
  std::cout << std::right << std::setw(9) << "AVG" << "\n";
  for (auto m : masks) {
    const auto summary = pipeline::Summarize(pipeline::EvaluateOracle(scenes, m, stft, threads), labels);
    for (int r = 0; r < 2; ++r) {
      const auto& per = r == 0 ? summary.sisnr : summary.sdr;
      const double avg = r == 0 ? summary.avg_sisnr : summary.avg_sdr;
      csv << objectives::MaskTypeName(m) << "," << (r == 0 ? "sisnr_db" : "sdr_db");
      std::cout << std::left << std::setw(6) << objectives::MaskTypeName(m) << std::setw(8)
                << (r == 0 ? "Si-SNR" : "SDR");
      for (double v : per) {
        csv << "," << cell(v);
        std::cout << std::right << std::setw(9) << (std::isnan(v) ? std::string("-") : Fixed(v, 2));
      }
      csv << "," << cell(avg) << "\n";
      std::cout << std::right << std::setw(9) << Fixed(avg, 2) << "\n";
    }
  }
  if (!a.csv.empty()) {
    std::ofstream out(a.csv);
    if (!out) throw InputError("cannot write '" + a.csv + "'");
    out << csv.str();
  }
}

// ---- rf ----

struct RfArgs {
  std::string config;
  bool json_out = false;
};

void RunRf(const RfArgs& a) {
  const pipeline::ExperimentConfig cfg = pipeline::ExperimentConfig::Load(a.config);
  const auto rows = pipeline::RfTable(cfg);
  if (a.json_out) {
    json j = json::array();
    for (const auto& r : rows) {
      j.push_back({{"mode", separator::CausalityName(r.mode)},
                   {"rf_frames", r.table_frames},
                   {"rf_s", r.table_seconds},
                   {"rf_exact_frames", r.exact_frames},
                   {"rf_exact_s", r.exact_seconds},
                   {"lookahead_frames", r.lookahead_frames},
                   {"lookahead_s", r.lookahead_seconds}});
    }
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::cout << a.config << ": X=" << cfg.tcn.X << " R=" << cfg.tcn.R << " P=" << cfg.tcn.P
            << " hop=" << cfg.codec.hop << " fs=" << cfg.codec.sample_rate << "\n";
  std::cout << "rf = 2^(X+1) R frames; rf_exact = 1 + sum (P-1) d frames\n";
  std::cout << std::left << std::setw(12) << "mode" << std::right << std::setw(10) << "rf_frames" << std::setw(11)
            << "rf_s" << std::setw(12) << "exact_frm" << std::setw(11) << "exact_s" << std::setw(12)
            << "look_frm" << std::setw(11) << "look_s" << "\n";
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(12) << separator::CausalityName(r.mode) << std::right << std::setw(10)
              << r.table_frames << std::setw(11) << Fixed(r.table_seconds, 4) << std::setw(12) << r.exact_frames
              << std::setw(11) << Fixed(r.exact_seconds, 4) << std::setw(12) << r.lookahead_frames
              << std::setw(11) << Fixed(r.lookahead_seconds, 4) << "\n";
  }
}

// ---- gradcheck ----

struct GradcheckArgs {
  std::string config;
  double tol = 1e-3;
  double step = 1e-6;
  int64_t coords = 6;
  uint64_t seed = 0;
};

int RunGradcheck(const GradcheckArgs& a) {
  std::vector<pipeline::ExperimentConfig> configs;
  if (!a.config.empty()) {
    configs.push_back(pipeline::ExperimentConfig::Load(a.config));
  } else {
    using pipeline::LossKind;
    using pipeline::PipelineKind;
    for (int ch : {1, 6}) {
      for (auto p : {PipelineKind::kMagnitude, PipelineKind::kComplex, PipelineKind::kWaveform}) {
        for (auto l : {LossKind::kUpitMse, LossKind::kUpitSiSnr}) configs.push_back(pipeline::TinyConfig(p, l, ch));
      }
    }
  }
  pipeline::GradSuiteOptions opts;
  opts.step = a.step;
  opts.coords_per_tensor = a.coords;
  opts.seed = a.seed;
  const auto rows = pipeline::RunGradientSuite(configs, opts);
  double worst = 0.0;
  std::cout << std::left << std::setw(10) << "pipeline" << std::setw(11) << "loss" << std::setw(4) << "ch"
            << std::setw(16) << "group" << std::right << std::setw(8) << "coords" << std::setw(14) << "max_rel_err"
            << "\n";
  for (const auto& r : rows) {
    char err[32];
    std::snprintf(err, sizeof(err), "%.3e", r.max_rel_error);
    std::cout << std::left << std::setw(10) << r.pipeline << std::setw(11) << r.loss << std::setw(4) << r.channels
              << std::setw(16) << r.group << std::right << std::setw(8) << r.checked << std::setw(14) << err << "\n";
    worst = std::max(worst, r.max_rel_error);
  }
  const bool ok = worst < a.tol;
  std::cout << (ok ? "PASS" : "FAIL") << ": max relative error " << worst << " (tolerance " << a.tol << ")\n";
  if (!ok) {
    ErrorLine("gradcheck", "max relative error " + std::to_string(worst) + " exceeds " + std::to_string(a.tol),
              kExitInternal);
    return kExitInternal;
  }
  return 0;
}

void AddStftFlags(CLI::App* cmd, StftArgs& s) {
  cmd->add_option("--stft-L", s.length, "Oracle STFT window length in samples")->capture_default_str();
  cmd->add_option("--stft-hop", s.hop, "Oracle STFT hop in samples")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sepkit: mask-based speech separation experiments.\n"
               "Environment: SEPKIT_THREADS bounds worker threads.\n"
               "Exit codes: 0 success, 1 user error, 2 internal error; failures print one JSON line on stderr."};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate two-speaker reverberant scenes and write WAVs + manifests");
  c_sim->add_option("--rules", sim.rules, "Rules JSON file, or preset 'wsj0' / 'librispeech'")->capture_default_str();
  c_sim->add_option("--count", sim.count, "Number of scenes")->required();
  c_sim->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
  c_sim->add_option("--out", sim.out, "Output directory")->required();
  c_sim->add_option("--duration", sim.duration, "Dry source duration in seconds")->capture_default_str();
  c_sim->add_option("--reference", sim.reference, "Reference signal: reverberant, direct or dry")
      ->capture_default_str();
  c_sim->add_option("--overlap", sim.overlap, "Overlap fraction range LO,HI drawn per scene")->capture_default_str();
  c_sim->add_option("--max-order", sim.max_order, "Image-method reflection order cap")->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a separator from an experiment config");
  c_train->add_option("--config", tr.config, "Experiment config JSON")->required();
  c_train->add_option("--out", tr.out, "Run directory for checkpoints and history.csv")->required();
  c_train->add_option("--resume", tr.resume, "Resume from a last.ckpt training checkpoint");
  c_train->add_option("--train-manifest", tr.train_manifest, "Override the config's train_manifest");
  c_train->add_option("--valid-manifest", tr.valid_manifest, "Override the config's valid_manifest");
  c_train->add_option("--max-steps", tr.max_steps, "Stop after this many optimizer steps (0: no limit)")
      ->capture_default_str();
  c_train->add_option("--max-epochs", tr.max_epochs, "Override the config's max_epochs");
  c_train->add_option("--seed", tr.seed, "Override the config's seed");

  SeparateArgs sep;
  auto* c_sep = app.add_subcommand("separate", "Separate a mixture WAV with a trained checkpoint");
  c_sep->add_option("--checkpoint", sep.checkpoint, "best.ckpt or last.ckpt")->required();
  c_sep->add_option("--input", sep.input, "Mixture WAV (channel 1 is the reference microphone)")->required();
  c_sep->add_option("--out", sep.out, "Directory for s1.wav .. sS.wav")->required();

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Score a checkpoint or an oracle mask on a manifest");
  c_eval->add_option("--manifest", ev.manifest, "Dataset index.json")->required();
  auto* ev_ckpt = c_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint to evaluate");
  auto* ev_oracle = c_eval->add_option("--oracle", ev.oracle, "Evaluate an oracle mask instead: iam, ibm, irm, ipsm");
  ev_ckpt->excludes(ev_oracle);
  c_eval->add_option("--csv", ev.csv, "Write per-scene, per-bucket and average scores as CSV");
  AddStftFlags(c_eval, ev.stft);

  OracleArgs orc;
  auto* c_oracle = app.add_subcommand("oracle", "Ideal-mask scores per angle bucket");
  c_oracle->add_option("--manifest", orc.manifest, "Dataset index.json")->required();
  c_oracle->add_option("--mask", orc.mask, "iam, ibm, irm, ipsm or all")->capture_default_str();
  c_oracle->add_option("--csv", orc.csv, "Write mask x metric rows as CSV");
  AddStftFlags(c_oracle, orc.stft);

  RfArgs rf;
  auto* c_rf = app.add_subcommand("rf", "Receptive field and lookahead per causality mode");
  c_rf->add_option("--config", rf.config, "Experiment config JSON")->required();
  c_rf->add_flag("--json", rf.json_out, "Print JSON instead of a table");

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference gradient check of the end-to-end pipelines");
  c_gc->add_option("--config", gc.config, "Check this config instead of the built-in tiny suite");
  c_gc->add_option("--tol", gc.tol, "Pass threshold on max relative error")->capture_default_str();
  c_gc->add_option("--step", gc.step, "Central-difference step")->capture_default_str();
  c_gc->add_option("--coords", gc.coords, "Coordinates checked per tensor (0: all)")->capture_default_str();
  c_gc->add_option("--seed", gc.seed, "Seed for inputs, weights and coordinate choice")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    ErrorLine("usage", e.what(), kExitUser);
    return kExitUser;
  }

  try {
    if (*c_sim) RunSimulate(sim);
    if (*c_train) RunTrain(tr);
    if (*c_sep) RunSeparate(sep);
    if (*c_eval) {
      if (ev.checkpoint.empty() == ev.oracle.empty()) throw UsageError("evaluate: give exactly one of --checkpoint, --oracle");
      RunEvaluate(ev);
    }
    if (*c_oracle) RunOracle(orc);
    if (*c_rf) RunRf(rf);
    if (*c_gc) return RunGradcheck(gc);
  } catch (const Error& e) {
    const int code = ExitCodeFor(e.kind());
    ErrorLine(e.kind(), e.what(), code);
    return code;
  } catch (const fs::filesystem_error& e) {
    ErrorLine("input", e.what(), kExitUser);
    return kExitUser;
  } catch (const std::exception& e) {
    ErrorLine("internal", e.what(), kExitInternal);
    return kExitInternal;
  }
  return 0;
}
