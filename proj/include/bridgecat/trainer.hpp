#pragma once

#include "bridgecat/bridge.hpp"
#include "bridgecat/denoiser.hpp"
#include "bridgecat/geometry.hpp"
#include "bridgecat/random.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bridgecat {

enum class LossType { kL1, kL2 };

LossType loss_type_from_string(const std::string& name);
std::string to_string(LossType loss);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double schedule_gamma = 0.999;
  double grad_clip_norm = 1.0; // <= 0 disables clipping
  LossType loss = LossType::kL1;
  std::uint64_t seed = 0;
  int sample_per_epoch = 5; // independent t-draws per structure per epoch
  int jobs = 1;

  void validate() const;
};

/// Drops pairs whose initial->relaxed DMAE falls outside
/// [min_dmae, max_dmae]: unmoved structures and runaway relaxations.
std::vector<StructurePair> clean_dataset(const std::vector<StructurePair>& pairs,
                                         double min_dmae = 1e-3, double max_dmae = 0.5);

/// Deterministic shuffled split; train gets ceil(ratio * n) pairs.
std::pair<std::vector<StructurePair>, std::vector<StructurePair>> split_dataset(
    const std::vector<StructurePair>& pairs, double ratio, std::uint64_t seed);

/// Anticipated split sizes (ceil rule) without touching data.
std::pair<std::size_t, std::size_t> split_sizes(std::size_t n, double ratio);

double lr_at_epoch(double base_lr, double gamma, int epoch);

/// Adam moments; weight decay is decoupled and set to zero.
struct AdamState {
  ParameterSet m;
  ParameterSet v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState like(const ParameterSet& params);
};

/// Applies one Adam update in place. Gradients may be pre-clipped by
/// clip_global_norm.
void adam_update(ParameterSet& params, const ParameterSet& grads, AdamState& state,
                 double lr);

/// Scales gradients so the global L2 norm is at most max_norm; returns the
/// pre-clip norm.
double clip_global_norm(ParameterSet& grads, double max_norm);

/// One optimization step over a batch: per pair draw t ~ U{1..T} and noise,
/// form the bridge target, evaluate the denoiser, average gradients, clip,
/// and update. Returns the mean batch loss. Throws "diverged" on non-finite
/// loss.
double train_step(const std::vector<const StructurePair*>& batch, ParameterSet& params,
                  const BridgeSchedule& schedule, AdamState& opt, Rng& rng,
                  const DenoiserConfig& model_config, const TrainConfig& config,
                  double lr);

struct TrainResult {
  ParameterSet params;
  AdamState opt;
  std::vector<double> epoch_loss;
  Rng rng{0};
  int epochs_done = 0;
};

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Full training loop; resumable by passing the state loaded from a
/// checkpoint (params/opt/rng/epochs_done).
TrainResult train(const std::vector<StructurePair>& pairs, const DenoiserConfig& model_config,
                  const BridgeSchedule& schedule, const TrainConfig& config,
                  const TrainResult* resume_from = nullptr,
                  const EpochCallback& callback = nullptr);

struct Checkpoint {
  int format_version = 1;
  std::string kind = "denoiser"; // or "classifier"
  DenoiserConfig config;
  int schedule_T = 100;
  ScheduleMode schedule_mode = ScheduleMode::kLinear;
  double schedule_s = 0.1;
  ParameterSet params;
  ParameterSet adam_m;
  ParameterSet adam_v;
  long opt_step = 0;
  int epoch = 0;
  std::string rng_state;
  std::vector<double> history;

  BridgeSchedule schedule() const { return make_schedule(schedule_T, schedule_mode, schedule_s); }
};

/// Single-file container: length-prefixed JSON manifest followed by
/// little-endian float64 payload blocks in manifest order. Round trips are
/// bit-exact.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace bridgecat
