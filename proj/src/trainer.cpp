#include "bridgecat/trainer.hpp"

#include "bridgecat/metrics.hpp"
#include "bridgecat/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace bridgecat {

using nlohmann::json;

LossType loss_type_from_string(const std::string& name) {
  if (name == "l1") return LossType::kL1;
  if (name == "l2") return LossType::kL2;
  throw std::invalid_argument("unknown loss type: " + name);
}

std::string to_string(LossType loss) { return loss == LossType::kL1 ? "l1" : "l2"; }

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
  if (schedule_gamma <= 0.0 || schedule_gamma > 1.0) {
    throw std::invalid_argument("schedule_gamma must be in (0, 1]");
  }
  if (epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
  if (sample_per_epoch < 1) throw std::invalid_argument("sample_per_epoch must be >= 1");
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
}

std::vector<StructurePair> clean_dataset(const std::vector<StructurePair>& pairs,
                                         double min_dmae, double max_dmae) {
  std::vector<StructurePair> kept;
  kept.reserve(pairs.size());
  for (const auto& pair : pairs) {
    double d = dmae(pair.initial, pair.relaxed);
    if (d >= min_dmae && d <= max_dmae) kept.push_back(pair);
  }
  if (kept.empty() && !pairs.empty()) {
    std::fprintf(stderr, "warning: dataset cleaning removed all %zu pairs\n", pairs.size());
  }
  return kept;
}

std::pair<std::size_t, std::size_t> split_sizes(std::size_t n, double ratio) {
  auto train = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(n) - 1e-12));
  return {train, n - train};
}

std::pair<std::vector<StructurePair>, std::vector<StructurePair>> split_dataset(
    const std::vector<StructurePair>& pairs, double ratio, std::uint64_t seed) {
  if (pairs.size() < 2) throw std::invalid_argument("split requires at least two pairs");
  if (ratio <= 0.0 || ratio >= 1.0) throw std::invalid_argument("ratio must be in (0, 1)");
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  auto [n_train, n_test] = split_sizes(pairs.size(), ratio);
  (void)n_test;
  std::pair<std::vector<StructurePair>, std::vector<StructurePair>> out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? out.first : out.second).push_back(pairs[order[k]]);
  }
  return out;
}

double lr_at_epoch(double base_lr, double gamma, int epoch) {
  return base_lr * std::pow(gamma, epoch);
}

AdamState AdamState::like(const ParameterSet& params) {
  AdamState state;
  for (const auto& [name, value] : params) {
    state.m[name] = Eigen::MatrixXd::Zero(value.rows(), value.cols());
    state.v[name] = Eigen::MatrixXd::Zero(value.rows(), value.cols());
  }
  return state;
}

double clip_global_norm(ParameterSet& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    (void)name;
    sq += g.squaredNorm();
  }
  double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (auto& [name, g] : grads) {
      (void)name;
      g *= scale;
    }
  }
  return norm;
}

void adam_update(ParameterSet& params, const ParameterSet& grads, AdamState& state,
                 double lr) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [name, value] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw std::invalid_argument("gradient missing for " + name);
    Eigen::MatrixXd& m = state.m.at(name);
    Eigen::MatrixXd& v = state.v.at(name);
    const Eigen::MatrixXd& g = git->second;
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    Eigen::ArrayXXd m_hat = m.array() / bc1;
    Eigen::ArrayXXd v_hat = v.array() / bc2;
    value.array() -= lr * m_hat / (v_hat.sqrt() + state.eps);
  }
}

namespace {

struct SampleDraw {
  const StructurePair* pair = nullptr;
  int t = 0;
  Positions x_t;
  Positions target;
};

SampleDraw draw_sample(const StructurePair& pair, const BridgeSchedule& schedule, Rng& rng) {
  SampleDraw draw;
  draw.pair = &pair;
  draw.t = static_cast<int>(rng.uniform_int(1, schedule.T));
  ForwardSample fwd = forward_sample(pair, draw.t, schedule, rng);
  draw.x_t = std::move(fwd.x_t);
  draw.target = training_target(pair, draw.t, fwd.noise, schedule);
  return draw;
}

} // namespace

double train_step(const std::vector<const StructurePair*>& batch, ParameterSet& params,
                  const BridgeSchedule& schedule, AdamState& opt, Rng& rng,
                  const DenoiserConfig& model_config, const TrainConfig& config,
                  double lr) {
  if (batch.empty()) throw std::invalid_argument("train_step on empty batch");

  // Draw all stochastic inputs up front so the RNG sequence is independent
  // of the number of worker threads.
  std::vector<SampleDraw> draws;
  draws.reserve(batch.size());
  for (const StructurePair* pair : batch) {
    draws.push_back(draw_sample(*pair, schedule, rng));
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  std::vector<double> losses(batch.size(), 0.0);
  std::vector<ParameterSet> grads(batch.size());
  parallel_for(static_cast<int>(batch.size()), config.jobs, [&](int k) {
    const SampleDraw& draw = draws[static_cast<std::size_t>(k)];
    ForwardContext ctx = ForwardContext::record_denoiser(
        draw.pair->initial, draw.x_t, draw.t, schedule, params, model_config);
    losses[static_cast<std::size_t>(k)] = (config.loss == LossType::kL1)
                                              ? ctx.l1_loss(draw.target)
                                              : ctx.l2_loss(draw.target);
    grads[static_cast<std::size_t>(k)] = ctx.gradient();
  });

  double loss = 0.0;
  ParameterSet total;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    loss += losses[k] * inv_batch;
    for (auto& [name, g] : grads[k]) {
      auto it = total.find(name);
      if (it == total.end()) {
        total[name] = g * inv_batch;
      } else {
        it->second += g * inv_batch;
      }
    }
  }
  if (!std::isfinite(loss)) throw std::runtime_error("diverged");

  clip_global_norm(total, config.grad_clip_norm);
  adam_update(params, total, opt, lr);
  return loss;
}

TrainResult train(const std::vector<StructurePair>& pairs, const DenoiserConfig& model_config,
                  const BridgeSchedule& schedule, const TrainConfig& config,
                  const TrainResult* resume_from, const EpochCallback& callback) {
  config.validate();
  model_config.validate();
  if (pairs.empty()) throw std::invalid_argument("training requires at least one pair");
  for (const auto& pair : pairs) pair.validate();

  TrainResult result;
  if (resume_from != nullptr) {
    result = *resume_from;
  } else {
    result.params = init_parameters(model_config, config.seed);
    result.opt = AdamState::like(result.params);
    result.rng = Rng(mix_seed(config.seed, 0x7261696e));
    result.epochs_done = 0;
  }

  for (int epoch = result.epochs_done; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config.learning_rate, config.schedule_gamma, epoch);
    std::vector<const StructurePair*> items;
    items.reserve(pairs.size() * static_cast<std::size_t>(config.sample_per_epoch));
    for (int k = 0; k < config.sample_per_epoch; ++k) {
      for (const auto& pair : pairs) items.push_back(&pair);
    }
    std::shuffle(items.begin(), items.end(), result.rng.engine());

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < items.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t stop = std::min(items.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const StructurePair*> batch(items.begin() + static_cast<std::ptrdiff_t>(start),
                                              items.begin() + static_cast<std::ptrdiff_t>(stop));
      epoch_loss += train_step(batch, result.params, schedule, result.opt, result.rng,
                               model_config, config, lr);
      ++batches;
    }
    epoch_loss /= static_cast<double>(std::max<std::size_t>(batches, 1));
    result.epoch_loss.push_back(epoch_loss);
    result.epochs_done = epoch + 1;
    if (callback) callback(epoch, epoch_loss);
  }
  return result;
}

namespace {

constexpr char kMagic[8] = {'B', 'C', 'A', 'T', 'C', 'K', 'P', 'T'};

json config_to_json(const DenoiserConfig& config) {
  return json{{"cutoff", config.cutoff},
              {"hidden", config.hidden},
              {"layers", config.layers},
              {"num_rbf", config.num_rbf},
              {"n_frequencies", config.n_frequencies},
              {"envelope_exponent", config.envelope_exponent},
              {"out_channels", config.out_channels},
              {"max_atomic_number", config.max_atomic_number},
              {"time_embed_dim", config.time_embed_dim},
              {"surface_pass", config.surface_pass}};
}

DenoiserConfig config_from_json(const json& j) {
  DenoiserConfig config;
  config.cutoff = j.at("cutoff").get<double>();
  config.hidden = j.at("hidden").get<int>();
  config.layers = j.at("layers").get<int>();
  config.num_rbf = j.at("num_rbf").get<int>();
  config.n_frequencies = j.at("n_frequencies").get<int>();
  config.envelope_exponent = j.at("envelope_exponent").get<int>();
  config.out_channels = j.at("out_channels").get<int>();
  config.max_atomic_number = j.at("max_atomic_number").get<int>();
  config.time_embed_dim = j.at("time_embed_dim").get<int>();
  config.surface_pass = j.at("surface_pass").get<bool>();
  return config;
}

void append_blocks(json& blocks, const ParameterSet& set, const std::string& group) {
  for (const auto& [name, value] : set) {
    blocks.push_back(json{{"name", name},
                          {"rows", value.rows()},
                          {"cols", value.cols()},
                          {"group", group}});
  }
}

void write_doubles(std::ofstream& os, const Eigen::MatrixXd& m) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint writer assumes a little-endian host");
  // Row-major write so the payload layout is independent of Eigen defaults.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double value = m(r, c);
      os.write(reinterpret_cast<const char*>(&value), sizeof(double));
    }
  }
}

Eigen::MatrixXd read_doubles(std::ifstream& is, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double value = 0.0;
      is.read(reinterpret_cast<char*>(&value), sizeof(double));
      if (!is) throw std::runtime_error("truncated checkpoint payload");
      m(r, c) = value;
    }
  }
  return m;
}

} // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  json manifest;
  manifest["format_version"] = checkpoint.format_version;
  manifest["kind"] = checkpoint.kind;
  manifest["denoiser_config"] = config_to_json(checkpoint.config);
  manifest["schedule"] = json{{"T", checkpoint.schedule_T},
                              {"mode", to_string(checkpoint.schedule_mode)},
                              {"s", checkpoint.schedule_s}};
  manifest["epoch"] = checkpoint.epoch;
  manifest["opt_step"] = checkpoint.opt_step;
  manifest["rng_state"] = checkpoint.rng_state;
  manifest["history"] = checkpoint.history;
  json blocks = json::array();
  append_blocks(blocks, checkpoint.params, "params");
  append_blocks(blocks, checkpoint.adam_m, "adam_m");
  append_blocks(blocks, checkpoint.adam_v, "adam_v");
  manifest["blocks"] = blocks;

  std::string text = manifest.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  auto length = static_cast<std::uint64_t>(text.size());
  os.write(reinterpret_cast<const char*>(&length), sizeof(length));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, value] : checkpoint.params) {
    (void)name;
    write_doubles(os, value);
  }
  for (const auto& [name, value] : checkpoint.adam_m) {
    (void)name;
    write_doubles(os, value);
  }
  for (const auto& [name, value] : checkpoint.adam_v) {
    (void)name;
    write_doubles(os, value);
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("corrupt checkpoint manifest: bad magic");
  }
  std::uint64_t length = 0;
  is.read(reinterpret_cast<char*>(&length), sizeof(length));
  if (!is) throw std::runtime_error("corrupt checkpoint manifest: missing length");
  std::string text(length, '\0');
  is.read(text.data(), static_cast<std::streamsize>(length));
  if (!is) throw std::runtime_error("corrupt checkpoint manifest: truncated JSON");

  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("corrupt checkpoint manifest: ") + e.what());
  }

  Checkpoint checkpoint;
  checkpoint.format_version = manifest.at("format_version").get<int>();
  if (checkpoint.format_version != 1) {
    throw std::runtime_error("unsupported checkpoint format_version " +
                             std::to_string(checkpoint.format_version));
  }
  checkpoint.kind = manifest.at("kind").get<std::string>();
  checkpoint.config = config_from_json(manifest.at("denoiser_config"));
  checkpoint.schedule_T = manifest.at("schedule").at("T").get<int>();
  checkpoint.schedule_mode =
      schedule_mode_from_string(manifest.at("schedule").at("mode").get<std::string>());
  checkpoint.schedule_s = manifest.at("schedule").at("s").get<double>();
  checkpoint.epoch = manifest.at("epoch").get<int>();
  checkpoint.opt_step = manifest.at("opt_step").get<long>();
  checkpoint.rng_state = manifest.at("rng_state").get<std::string>();
  checkpoint.history = manifest.at("history").get<std::vector<double>>();

  for (const auto& block : manifest.at("blocks")) {
    std::string name = block.at("name").get<std::string>();
    auto rows = block.at("rows").get<Eigen::Index>();
    auto cols = block.at("cols").get<Eigen::Index>();
    std::string group = block.at("group").get<std::string>();
    Eigen::MatrixXd value = read_doubles(is, rows, cols);
    if (group == "params") {
      checkpoint.params[name] = std::move(value);
    } else if (group == "adam_m") {
      checkpoint.adam_m[name] = std::move(value);
    } else if (group == "adam_v") {
      checkpoint.adam_v[name] = std::move(value);
    } else {
      throw std::runtime_error("corrupt checkpoint manifest: unknown block group " + group);
    }
  }
  char extra = 0;
  if (is.read(&extra, 1)) {
    throw std::runtime_error("corrupt checkpoint: trailing bytes after payload");
  }
  return checkpoint;
}

} // namespace bridgecat
