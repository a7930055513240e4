// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/pipeline/train.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>

#include "sepkit/autodiff/optim.h"
#include "sepkit/error.h"
#include "sepkit/pipeline/parallel.h"
#include "sepkit/simulate/scene.h"

namespace sepkit::pipeline {
namespace {

using nlohmann::json;

std::string Hex(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json FiniteOrNull(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double FromJsonOrInf(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

json StateToJson(const TrainerState& s) {
  json hist = json::array();
  for (const auto& e : s.history) {
    hist.push_back({{"epoch", e.epoch},
                    {"train_loss", FiniteOrNull(e.train_loss)},
                    {"valid_loss", FiniteOrNull(e.valid_loss)},
                    {"lr", e.lr},
                    {"steps", e.steps}});
  }
  return {{"epoch", s.epoch},           {"step", s.step},
          {"lr", s.lr},                 {"best_valid", FiniteOrNull(s.best_valid)},
          {"best_epoch", s.best_epoch}, {"stagnant", s.stagnant},
          {"since_best", s.since_best}, {"history", hist}};
}

TrainerState StateFromJson(const json& j) {
  TrainerState s;
  s.epoch = j.at("epoch").get<int>();
  s.step = j.at("step").get<int64_t>();
  s.lr = j.at("lr").get<double>();
  s.best_valid = FromJsonOrInf(j.at("best_valid"));
  s.best_epoch = j.at("best_epoch").get<int>();
  s.stagnant = j.at("stagnant").get<int>();
  s.since_best = j.at("since_best").get<int>();
  for (const json& e : j.at("history")) {
    s.history.push_back({e.at("epoch").get<int>(), FromJsonOrInf(e.at("train_loss")),
                         FromJsonOrInf(e.at("valid_loss")), e.at("lr").get<double>(),
                         e.at("steps").get<int64_t>()});
  }
  return s;
}

void CheckGradients(Model& model, int epoch, const SceneData& scene, const Chunk& chunk, size_t index) {
  for (ad::Parameter* p : model.parameters()) {
    if (!p->value.has_grad()) continue;
    for (double g : p->value.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("train: non-finite gradient for " + p->name + " at epoch " + std::to_string(epoch) +
                           ", chunk " + std::to_string(index) + " (" + scene.id + " @" +
                           std::to_string(chunk.start) + ")");
      }
    }
  }
}

}  // namespace

TrainerState InitialState(const ExperimentConfig& config) {
  TrainerState s;
  s.lr = config.lr;
  return s;
}

double EvaluateLoss(Model& model, const std::vector<SceneData>& scenes, int threads) {
  if (scenes.empty()) throw UsageError("train: no scenes to evaluate");
  const int channels = model.config().channels;
  std::vector<double> losses(scenes.size());
  ParallelFor(scenes.size(), threads, [&](size_t i) {
    const ModelOutput out = model.Forward(MixtureTensor(scenes[i], channels), false);
    losses[i] = model.Loss(out, ReferenceTensors(scenes[i])).assignment.loss;
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

TrainResult Train(Model& model, TrainerState& state, const std::vector<SceneData>& train,
                  const std::vector<SceneData>& valid, const TrainOptions& options) {
  const ExperimentConfig& cfg = model.config();
  if (train.empty()) throw UsageError("train: empty training set");
  const auto chunk_samples = static_cast<int64_t>(std::llround(cfg.chunk_s * cfg.codec.sample_rate));
  const std::vector<Chunk> chunks = MakeChunks(train, chunk_samples);
  const std::vector<SceneData>& held_out = valid.empty() ? train : valid;
  std::vector<ad::Parameter*> params = model.parameters();
  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);
  const std::string best_path = (std::filesystem::path(options.checkpoint_dir) / "best.ckpt").string();
  const std::string last_path = (std::filesystem::path(options.checkpoint_dir) / "last.ckpt").string();

  TrainResult result;
  result.stop_reason = "max_epochs";
  while (state.epoch < cfg.max_epochs) {
    const int epoch = state.epoch + 1;
    std::vector<size_t> order(chunks.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 rng(simulate::SceneSeed(cfg.seed, static_cast<uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    size_t visited = 0;
    for (size_t k = 0; k < order.size(); ++k) {
      const Chunk& chunk = chunks[order[k]];
      const SceneData& scene = train[chunk.scene];
      const std::vector<Tensor> refs = ReferenceTensors(scene, chunk.start, chunk.length);
      // A source that is silent throughout the chunk has no defined Si-SNR.
      const bool silent = std::any_of(refs.begin(), refs.end(), [](const Tensor& r) {
        return std::all_of(r.data().begin(), r.data().end(), [](double v) { return v == 0.0; });
      });
      if (silent) continue;
      double loss_value = 0.0;
      try {
        ad::Tape tape;
        ad::Tape::Scope scope(tape);
        for (ad::Parameter* p : params) p->ZeroGrad();
        const ModelOutput out = model.Forward(MixtureTensor(scene, cfg.channels, chunk.start, chunk.length), true);
        const objectives::UpitResult r = model.Loss(out, refs);
        loss_value = r.loss.item();
        if (!std::isfinite(loss_value)) throw NumericError("non-finite loss");
        tape.Backward(r.loss);
      } catch (const NumericError& e) {
        throw NumericError("train: " + std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", chunk " +
                           std::to_string(k) + " (" + scene.id + " @" + std::to_string(chunk.start) + ")");
      }
      CheckGradients(model, epoch, scene, chunk, k);
      ad::AdamOptions adam;
      adam.lr = state.lr;
      ad::AdamStep(params, adam);
      ++state.step;
      loss_sum += loss_value;
      ++visited;
      bool keep_going = true;
      if (options.on_step) keep_going = options.on_step({epoch, state.step, k, loss_value});
      if (!keep_going || (options.max_steps > 0 && state.step >= options.max_steps)) {
        result.stop_reason = keep_going ? "max_steps" : "callback";
        return result;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(std::max<size_t>(visited, 1));
    rec.valid_loss = EvaluateLoss(model, held_out, options.threads);
    rec.lr = state.lr;
    rec.steps = state.step;
    state.history.push_back(rec);
    state.epoch = epoch;

    if (rec.valid_loss < state.best_valid) {
      state.best_valid = rec.valid_loss;
      state.best_epoch = epoch;
      state.stagnant = 0;
      state.since_best = 0;
      if (!options.checkpoint_dir.empty()) SaveCheckpoint(best_path, model, state, CheckpointKind::kWeights);
    } else {
      ++state.since_best;
      if (++state.stagnant >= cfg.lr_patience) {
        state.lr *= 0.5;
        state.stagnant = 0;
      }
    }
    if (!options.checkpoint_dir.empty()) SaveCheckpoint(last_path, model, state, CheckpointKind::kTraining);
    if (options.on_epoch) options.on_epoch(rec);
    if (cfg.early_stop_patience > 0 && state.since_best >= cfg.early_stop_patience) {
      result.stop_reason = "early_stop";
      return result;
    }
  }
  return result;
}

void SaveCheckpoint(const std::string& path, Model& model, const TrainerState& state, CheckpointKind kind) {
  separator::TensorArchive archive;
  model.ExportWeights(archive);
  json adam_steps = json::object();
  if (kind == CheckpointKind::kTraining) {
    for (ad::Parameter* p : model.parameters()) {
      adam_steps[p->name] = p->step;
      if (p->first_moment.empty()) continue;
      archive.Put(p->name + ".adam_m", p->value.shape(), p->first_moment);
      archive.Put(p->name + ".adam_v", p->value.shape(), p->second_moment);
    }
  }
  const json meta = {{"kind", kind == CheckpointKind::kTraining ? "training" : "weights"},
                     {"model_hash", Hex(model.config().ModelHash())},
                     {"config", model.config().ToJson()},
                     {"trainer", StateToJson(state)},
                     {"adam_steps", adam_steps}};
  archive.metadata = meta.dump();
  separator::SaveArchive(path, archive,
                         kind == CheckpointKind::kTraining ? separator::StoredType::kFloat64
                                                           : separator::StoredType::kFloat32);
}

namespace {

json ParseMeta(const separator::TensorArchive& archive, const std::string& path) {
  try {
    return json::parse(archive.metadata);
  } catch (const json::exception& e) {
    throw FormatError("checkpoint: bad metadata in " + path + ": " + e.what());
  }
}

LoadedCheckpoint Header(const json& meta, const std::string& path) {
  LoadedCheckpoint out;
  try {
    out.config = ExperimentConfig::FromJson(meta.at("config"));
    out.state = StateFromJson(meta.at("trainer"));
    out.has_optimizer = meta.at("kind").get<std::string>() == "training";
  } catch (const json::exception& e) {
    throw FormatError("checkpoint: incomplete metadata in " + path + ": " + e.what());
  }
  return out;
}

}  // namespace

LoadedCheckpoint ReadCheckpointHeader(const std::string& path) {
  const separator::TensorArchive archive = separator::LoadArchive(path);
  return Header(ParseMeta(archive, path), path);
}

LoadedCheckpoint LoadCheckpoint(const std::string& path, Model& model) {
  const separator::TensorArchive archive = separator::LoadArchive(path);
  const json meta = ParseMeta(archive, path);
  LoadedCheckpoint out = Header(meta, path);
  const std::string expected = Hex(model.config().ModelHash());
  if (meta.value("model_hash", std::string()) != expected) {
    throw ConfigError("checkpoint: " + path + " was written for a different model (hash " +
                      meta.value("model_hash", std::string("?")) + ", expected " + expected + ")");
  }
  model.ImportWeights(archive);
  if (out.has_optimizer) {
    const json& steps = meta.at("adam_steps");
    for (ad::Parameter* p : model.parameters()) {
      p->step = steps.value(p->name, int64_t{0});
      const separator::NamedTensor* m = archive.Find(p->name + ".adam_m");
      const separator::NamedTensor* v = archive.Find(p->name + ".adam_v");
      if (m == nullptr || v == nullptr) {
        std::fill(p->first_moment.begin(), p->first_moment.end(), 0.0);
        std::fill(p->second_moment.begin(), p->second_moment.end(), 0.0);
        continue;
      }
      p->first_moment = m->data;
      p->second_moment = v->data;
    }
  }
  return out;
}

}  // namespace sepkit::pipeline
