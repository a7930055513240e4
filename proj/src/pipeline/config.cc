// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/pipeline/config.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "sepkit/error.h"

namespace sepkit::pipeline {
namespace {

using nlohmann::json;

void CheckKeys(const json& j, const std::set<std::string>& known, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError("config: '" + (prefix.empty() ? "<root>" : prefix) + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("config: unknown key '" + prefix + key + "'");
  }
}

template <typename T>
T Get(const json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: key '" + path + key + "' has the wrong type");
  }
}

template <typename T>
T Require(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError("config: missing key '" + path + key + "'");
  return Get<T>(j, key, path, T{});
}

spatial::PairSet ParsePairs(const json& j) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "wsj0") return spatial::Wsj0Pairs();
    if (name == "librispeech") return spatial::LibriPairs();
    throw ConfigError("config: key 'pairs' names unknown preset '" + name + "'");
  }
  if (!j.is_array()) throw ConfigError("config: key 'pairs' must be a preset name or a list of pairs");
  spatial::PairSet out;
  for (const json& p : j) {
    if (!p.is_array() || p.size() != 2) throw ConfigError("config: key 'pairs' entries must be [u1, u2]");
    out.push_back({p[0].get<int>(), p[1].get<int>()});
  }
  return out;
}

}  // namespace

const char* PipelineName(PipelineKind kind) {
  switch (kind) {
    case PipelineKind::kMagnitude: return "magnitude";
    case PipelineKind::kComplex: return "complex";
    case PipelineKind::kWaveform: return "waveform";
  }
  return "?";
}

const char* LossName(LossKind kind) { return kind == LossKind::kUpitMse ? "upit_mse" : "upit_sisnr"; }

int64_t ExperimentConfig::IpdBins() const { return IpdLength() / 2 + 1; }

int64_t ExperimentConfig::InputWidth() const {
  const int64_t primary = pipeline == PipelineKind::kComplex ? 2 * codec.filters : codec.filters;
  if (channels <= 1) return primary;
  return primary + 2 * static_cast<int64_t>(pairs.size()) * IpdBins();
}

int64_t ExperimentConfig::MaskRows() const {
  return pipeline == PipelineKind::kComplex ? 2 * codec.filters : codec.filters;
}

void ExperimentConfig::Finalize() {
  codec.domain = pipeline == PipelineKind::kWaveform ? codec::Domain::kWaveform : codec::Domain::kSpectrogram;
  if (codec.domain == codec::Domain::kSpectrogram) codec.filters = codec.length / 2 + 1;
  codec.Validate();
  if (channels != 1 && channels != 6) throw ConfigError("config: key 'channels' must be 1 or 6");
  if (channels > 1) {
    if (pairs.empty()) pairs = spatial::Wsj0Pairs();
    spatial::ValidatePairs(pairs, channels);
    if (IpdLength() % 2 != 0) throw ConfigError("config: key 'codec.ipd_L' must be even");
    if (IpdLength() < codec.length) throw ConfigError("config: key 'codec.ipd_L' must be at least codec.L");
    if (codec.length % 2 != 0) throw ConfigError("config: key 'codec.L' must be even for IPD features");
  } else {
    pairs.clear();
  }
  if (pipeline != PipelineKind::kWaveform && ipd_length != 0 && ipd_length != codec.length) {
    throw ConfigError("config: key 'codec.ipd_L' applies to the waveform pipeline only");
  }
  tcn.N = MaskRows();
  tcn.input_width = InputWidth();
  tcn.Validate();
  if (pipeline == PipelineKind::kMagnitude && tcn.mask_activation == separator::MaskActivation::kLinear) {
    throw ConfigError("config: key 'tcn.mask_activation' linear would yield negative magnitudes");
  }
  if (chunk_s <= 0.0) throw ConfigError("config: key 'chunk_s' must be positive");
  if (lr < 0.0) throw ConfigError("config: key 'lr' must be non-negative");
  if (max_epochs < 1) throw ConfigError("config: key 'max_epochs' must be positive");
  if (lr_patience < 1) throw ConfigError("config: key 'lr_patience' must be positive");
  if (early_stop_patience < 0) throw ConfigError("config: key 'early_stop_patience' must be non-negative");
}

ExperimentConfig ExperimentConfig::FromJson(const json& j, const std::string& base_dir) {
  CheckKeys(j, {"pipeline", "channels", "pairs", "codec", "tcn", "sources", "loss", "chunk_s", "lr",
                "max_epochs", "lr_patience", "early_stop_patience", "seed", "sample_rate",
                "train_manifest", "valid_manifest"},
            "");
  ExperimentConfig c;
  const std::string pipeline = Require<std::string>(j, "pipeline", "");
  if (pipeline == "magnitude") {
    c.pipeline = PipelineKind::kMagnitude;
  } else if (pipeline == "complex") {
    c.pipeline = PipelineKind::kComplex;
  } else if (pipeline == "waveform") {
    c.pipeline = PipelineKind::kWaveform;
  } else {
    throw ConfigError("config: key 'pipeline' must be magnitude, complex or waveform");
  }
  c.channels = Get<int>(j, "channels", "", 1);
  if (j.contains("pairs")) c.pairs = ParsePairs(j.at("pairs"));

  const json codec_j = j.contains("codec") ? j.at("codec") : json::object();
  CheckKeys(codec_j, {"L", "hop", "N", "window", "ipd_L"}, "codec.");
  c.ipd_length = Get<int64_t>(codec_j, "ipd_L", "codec.", 0);
  const int64_t length = Get<int64_t>(codec_j, "L", "codec.", c.pipeline == PipelineKind::kWaveform ? 40 : 512);
  if (c.pipeline == PipelineKind::kWaveform) {
    c.codec = codec::CodecConfig::Waveform(length, Get<int64_t>(codec_j, "N", "codec.", 256),
                                           Get<int64_t>(codec_j, "hop", "codec.", 0));
    if (codec_j.contains("window")) throw ConfigError("config: key 'codec.window' applies to spectrogram pipelines only");
  } else {
    const std::string window = Get<std::string>(codec_j, "window", "codec.", "fixed-hann");
    if (window != "fixed-hann" && window != "trainable") {
      throw ConfigError("config: key 'codec.window' must be fixed-hann or trainable");
    }
    c.codec = codec::CodecConfig::Spectrogram(
        length, Get<int64_t>(codec_j, "hop", "codec.", 160),
        window == "trainable" ? codec::WindowMode::kTrainable : codec::WindowMode::kFixedHann);
    if (codec_j.contains("N") && codec_j.at("N").get<int64_t>() != length / 2 + 1) {
      throw ConfigError("config: key 'codec.N' must equal L/2+1 for spectrogram pipelines");
    }
  }
  c.codec.sample_rate = Get<int>(j, "sample_rate", "", 16000);

  const json tcn_j = j.contains("tcn") ? j.at("tcn") : json::object();
  CheckKeys(tcn_j, {"B", "H", "P", "X", "R", "norm", "causality", "mask_activation"}, "tcn.");
  c.tcn.B = Get<int64_t>(tcn_j, "B", "tcn.", 256);
  c.tcn.H = Get<int64_t>(tcn_j, "H", "tcn.", 512);
  c.tcn.P = Get<int64_t>(tcn_j, "P", "tcn.", 3);
  c.tcn.X = Get<int64_t>(tcn_j, "X", "tcn.", 8);
  c.tcn.R = Get<int64_t>(tcn_j, "R", "tcn.", 4);
  try {
    c.tcn.norm = separator::ParseNorm(Get<std::string>(tcn_j, "norm", "tcn.", "gLN"));
    c.tcn.causality = separator::ParseCausality(Get<std::string>(tcn_j, "causality", "tcn.", "non_causal"));
    c.tcn.mask_activation =
        separator::ParseMaskActivation(Get<std::string>(tcn_j, "mask_activation", "tcn.", "relu"));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: key 'tcn': ") + e.what());
  }
  c.tcn.S = Get<int64_t>(j, "sources", "", 2);

  const std::string loss = Get<std::string>(j, "loss", "", "upit_sisnr");
  if (loss == "upit_mse") {
    c.loss = LossKind::kUpitMse;
  } else if (loss == "upit_sisnr") {
    c.loss = LossKind::kUpitSiSnr;
  } else {
    throw ConfigError("config: key 'loss' must be upit_mse or upit_sisnr");
  }
  c.chunk_s = Get<double>(j, "chunk_s", "", 4.0);
  c.lr = Get<double>(j, "lr", "", 1e-3);
  c.max_epochs = Get<int>(j, "max_epochs", "", 100);
  c.lr_patience = Get<int>(j, "lr_patience", "", 3);
  c.early_stop_patience = Get<int>(j, "early_stop_patience", "", 10);
  c.seed = Get<uint64_t>(j, "seed", "", 0);
  auto resolve = [&](const std::string& p) {
    if (p.empty() || base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
  };
  c.train_manifest = resolve(Get<std::string>(j, "train_manifest", "", ""));
  c.valid_manifest = resolve(Get<std::string>(j, "valid_manifest", "", ""));
  c.Finalize();
  return c;
}

ExperimentConfig ExperimentConfig::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return FromJson(j, std::filesystem::path(path).parent_path().string());
}

json ExperimentConfig::ToJson() const {
  json j;
  j["pipeline"] = PipelineName(pipeline);
  j["channels"] = channels;
  json pj = json::array();
  for (const auto& p : pairs) pj.push_back({p.first, p.second});
  j["pairs"] = pj;
  j["codec"] = {{"L", codec.length}, {"hop", codec.hop}};
  if (pipeline == PipelineKind::kWaveform) {
    j["codec"]["N"] = codec.filters;
    if (ipd_length > 0) j["codec"]["ipd_L"] = ipd_length;
  } else {
    j["codec"]["window"] = codec.window == codec::WindowMode::kTrainable ? "trainable" : "fixed-hann";
  }
  j["tcn"] = {{"B", tcn.B},
              {"H", tcn.H},
              {"P", tcn.P},
              {"X", tcn.X},
              {"R", tcn.R},
              {"norm", separator::NormName(tcn.norm)},
              {"causality", separator::CausalityName(tcn.causality)},
              {"mask_activation", separator::MaskActivationName(tcn.mask_activation)}};
  j["sources"] = tcn.S;
  j["sample_rate"] = codec.sample_rate;
  j["loss"] = LossName(loss);
  j["chunk_s"] = chunk_s;
  j["lr"] = lr;
  j["max_epochs"] = max_epochs;
  j["lr_patience"] = lr_patience;
  j["early_stop_patience"] = early_stop_patience;
  j["seed"] = seed;
  if (!train_manifest.empty()) j["train_manifest"] = train_manifest;
  if (!valid_manifest.empty()) j["valid_manifest"] = valid_manifest;
  return j;
}

uint64_t ExperimentConfig::ModelHash() const {
  json j = ToJson();
  const json model = {{"pipeline", j["pipeline"]}, {"channels", j["channels"]}, {"pairs", j["pairs"]},
                      {"codec", j["codec"]},       {"tcn", j["tcn"]},           {"sources", j["sources"]}};
  const std::string text = model.dump();
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace sepkit::pipeline
