#include "bridgecat/outlier.hpp"

#include "bridgecat/elements.hpp"
#include "bridgecat/metrics.hpp"
#include "bridgecat/neighbors.hpp"
#include "bridgecat/parallel.hpp"
#include "bridgecat/random.hpp"
#include "bridgecat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace bridgecat {

std::string to_string(OutlierSource source) {
  switch (source) {
    case OutlierSource::kDmaeThreshold: return "dmae_threshold";
    case OutlierSource::kHeuristic: return "heuristic";
    case OutlierSource::kBoth: return "both";
  }
  throw std::logic_error("unreachable outlier source");
}

std::pair<bool, std::vector<OffendingPair>> check_collision(const Structure& structure,
                                                            double factor) {
  Eigen::MatrixXd dist = min_image_distance_matrix(structure);
  std::vector<OffendingPair> pairs;
  for (Eigen::Index i = 0; i < structure.size(); ++i) {
    for (Eigen::Index j = i + 1; j < structure.size(); ++j) {
      double threshold =
          factor * (covalent_radius(structure.atomic_numbers[static_cast<std::size_t>(i)]) +
                    covalent_radius(structure.atomic_numbers[static_cast<std::size_t>(j)]));
      if (dist(i, j) < threshold) {
        pairs.push_back(OffendingPair{static_cast<int>(i), static_cast<int>(j), dist(i, j),
                                      threshold});
      }
    }
  }
  return {!pairs.empty(), pairs};
}

namespace {

std::vector<int> adsorbate_indices(const Structure& structure) {
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < structure.size(); ++i) {
    if (structure.adsorbate[static_cast<std::size_t>(i)]) idx.push_back(static_cast<int>(i));
  }
  if (idx.empty()) throw std::invalid_argument("no adsorbate");
  return idx;
}

int count_fragments(const Structure& structure, const std::vector<int>& atoms,
                    double bond_factor) {
  std::vector<int> parent(atoms.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  };
  for (std::size_t p = 0; p < atoms.size(); ++p) {
    for (std::size_t q = p + 1; q < atoms.size(); ++q) {
      double d = structure.lattice.mic_distance(structure.positions.row(atoms[p]),
                                                structure.positions.row(atoms[q]));
      double bond =
          bond_factor * (covalent_radius(structure.atomic_numbers[static_cast<std::size_t>(atoms[p])]) +
                         covalent_radius(structure.atomic_numbers[static_cast<std::size_t>(atoms[q])]));
      if (d < bond) parent[find(static_cast<int>(p))] = find(static_cast<int>(q));
    }
  }
  int fragments = 0;
  for (std::size_t p = 0; p < atoms.size(); ++p) {
    if (find(static_cast<int>(p)) == static_cast<int>(p)) ++fragments;
  }
  return fragments;
}

} // namespace

bool check_dissociation(const Structure& structure, double bond_factor) {
  std::vector<int> ads = adsorbate_indices(structure);
  if (ads.size() == 1) return false;
  return count_fragments(structure, ads, bond_factor) > 1;
}

bool check_desorption(const Structure& structure, double bond_factor) {
  std::vector<int> ads = adsorbate_indices(structure);
  for (int a : ads) {
    for (Eigen::Index i = 0; i < structure.size(); ++i) {
      if (structure.adsorbate[static_cast<std::size_t>(i)]) continue;
      double d = structure.lattice.mic_distance(structure.positions.row(a),
                                                structure.positions.row(i));
      double bond =
          bond_factor * (covalent_radius(structure.atomic_numbers[static_cast<std::size_t>(a)]) +
                         covalent_radius(structure.atomic_numbers[static_cast<std::size_t>(i)]));
      if (d < bond) return false;
    }
  }
  return true;
}

bool check_reconstruction(const Structure& generated, const Structure& reference_initial,
                          double displacement_tol) {
  if (generated.size() != reference_initial.size()) {
    throw std::invalid_argument("reconstruction check requires matching structures");
  }
  for (Eigen::Index i = 0; i < generated.size(); ++i) {
    if (generated.adsorbate[static_cast<std::size_t>(i)] ||
        generated.fixed[static_cast<std::size_t>(i)]) {
      continue;
    }
    double d = generated.lattice.mic_distance(reference_initial.positions.row(i),
                                              generated.positions.row(i));
    if (d > displacement_tol) return true;
  }
  return false;
}

HeuristicReport run_heuristics(const Structure& generated, const Structure& reference_initial,
                               const HeuristicOptions& options) {
  HeuristicReport report;
  auto [collision, pairs] = check_collision(generated, options.collision_factor);
  report.collision = collision;
  report.collision_pairs = std::move(pairs);

  std::vector<int> ads = adsorbate_indices(generated);
  report.adsorbate_fragments =
      ads.size() == 1 ? 1 : count_fragments(generated, ads, options.bond_factor);
  report.dissociation = report.adsorbate_fragments > 1;
  report.desorption = check_desorption(generated, options.bond_factor);

  double min_ratio = std::numeric_limits<double>::infinity();
  for (int a : ads) {
    for (Eigen::Index i = 0; i < generated.size(); ++i) {
      if (generated.adsorbate[static_cast<std::size_t>(i)]) continue;
      double d = generated.lattice.mic_distance(generated.positions.row(a),
                                                generated.positions.row(i));
      double sum =
          covalent_radius(generated.atomic_numbers[static_cast<std::size_t>(a)]) +
          covalent_radius(generated.atomic_numbers[static_cast<std::size_t>(i)]);
      min_ratio = std::min(min_ratio, d / sum);
    }
  }
  report.min_surface_gap = min_ratio;

  double max_disp = 0.0;
  for (Eigen::Index i = 0; i < generated.size(); ++i) {
    if (generated.adsorbate[static_cast<std::size_t>(i)] ||
        generated.fixed[static_cast<std::size_t>(i)]) {
      continue;
    }
    max_disp = std::max(max_disp,
                        generated.lattice.mic_distance(reference_initial.positions.row(i),
                                                       generated.positions.row(i)));
  }
  report.max_slab_displacement = max_disp;
  report.reconstruction = max_disp > options.reconstruction_tol;
  return report;
}

std::vector<LabeledStructure> label_generations(
    const DenoiserFn& denoiser, const BridgeSchedule& schedule, const SamplerConfig& sampler,
    const std::vector<StructurePair>& pairs, const std::vector<double>& noise_coefficients,
    double dmae_threshold, const HeuristicOptions& heuristics, int jobs) {
  const std::size_t total = pairs.size() * noise_coefficients.size();
  std::vector<LabeledStructure> out(total);
  parallel_for(static_cast<int>(total), jobs, [&](int flat) {
    const std::size_t pair_idx = static_cast<std::size_t>(flat) / noise_coefficients.size();
    const std::size_t coeff_idx = static_cast<std::size_t>(flat) % noise_coefficients.size();
    const StructurePair& pair = pairs[pair_idx];
    const double coeff = noise_coefficients[coeff_idx];

    SamplerConfig cfg = sampler;
    cfg.eta = coeff;
    cfg.seed = mix_seed(sampler.seed, static_cast<std::uint64_t>(flat));
    Structure generated = generate(pair.initial, denoiser, schedule, cfg);

    LabeledStructure item;
    item.label.id = pair.initial.id + "@c" + std::to_string(coeff_idx);
    item.label.noise_coefficient = coeff;
    item.label.dmae = dmae(generated, pair.relaxed);
    item.label.report = run_heuristics(generated, pair.initial, heuristics);
    const bool by_dmae = *item.label.dmae > dmae_threshold;
    const bool by_heuristic = item.label.report.any();
    item.label.is_outlier = by_dmae || by_heuristic;
    if (by_dmae && by_heuristic) {
      item.label.source = OutlierSource::kBoth;
    } else if (by_heuristic) {
      item.label.source = OutlierSource::kHeuristic;
    } else {
      item.label.source = OutlierSource::kDmaeThreshold;
    }
    generated.id = item.label.id;
    item.structure = std::move(generated);
    out[static_cast<std::size_t>(flat)] = std::move(item);
  });
  return out;
}

std::pair<double, double> inverse_frequency_weights(std::size_t count_a, std::size_t count_b) {
  if (count_a == 0 || count_b == 0) {
    throw std::invalid_argument("class weights require both classes");
  }
  const double total = static_cast<double>(count_a + count_b);
  return {total / (2.0 * static_cast<double>(count_a)),
          total / (2.0 * static_cast<double>(count_b))};
}

ClassifierTrainResult train_classifier(const std::vector<LabeledStructure>& data,
                                       DenoiserConfig config,
                                       const ClassifierTrainConfig& train_config) {
  config.out_channels = 1;
  config.validate();
  std::size_t n_outlier = 0;
  for (const auto& item : data) n_outlier += item.label.is_outlier ? 1 : 0;
  if (n_outlier == 0 || n_outlier == data.size()) {
    throw std::invalid_argument("classifier training requires both classes");
  }

  // Deterministic shuffled split of indices.
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(train_config.seed, 0x636c7366));
  std::shuffle(order.begin(), order.end(), rng.engine());
  const auto n_train = static_cast<std::size_t>(
      std::ceil(train_config.split_ratio * static_cast<double>(data.size()) - 1e-12));
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  // Inverse-frequency class weights from the training split.
  std::size_t train_outlier = 0;
  for (std::size_t i : train_idx) train_outlier += data[i].label.is_outlier ? 1 : 0;
  if (train_outlier == 0 || train_outlier == train_idx.size()) {
    throw std::invalid_argument("classifier training split lost a class; adjust seed or data");
  }
  auto [w_outlier, w_normal] =
      inverse_frequency_weights(train_outlier, train_idx.size() - train_outlier);

  ClassifierTrainResult result;
  result.config = config;
  result.params = init_parameters(config, train_config.seed);
  AdamState opt = AdamState::like(result.params);

  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng.engine());
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(train_config.batch_size)) {
      std::size_t stop = std::min(train_idx.size(),
                                  start + static_cast<std::size_t>(train_config.batch_size));
      const auto batch_n = stop - start;
      std::vector<double> losses(batch_n, 0.0);
      std::vector<ParameterSet> grads(batch_n);
      parallel_for(static_cast<int>(batch_n), train_config.jobs, [&](int k) {
        const LabeledStructure& item = data[train_idx[start + static_cast<std::size_t>(k)]];
        const double label = item.label.is_outlier ? 0.0 : 1.0;
        const double weight = item.label.is_outlier ? w_outlier : w_normal;
        ForwardContext ctx =
            ForwardContext::record_classifier(item.structure, result.params, config);
        losses[static_cast<std::size_t>(k)] = ctx.bce_loss(label, weight);
        grads[static_cast<std::size_t>(k)] = ctx.gradient();
      });
      double loss = 0.0;
      ParameterSet total;
      const double inv = 1.0 / static_cast<double>(batch_n);
      for (std::size_t k = 0; k < batch_n; ++k) {
        loss += losses[k] * inv;
        for (auto& [name, g] : grads[k]) {
          auto it = total.find(name);
          if (it == total.end()) {
            total[name] = g * inv;
          } else {
            it->second += g * inv;
          }
        }
      }
      if (!std::isfinite(loss)) throw std::runtime_error("diverged");
      clip_global_norm(total, 1.0);
      adam_update(result.params, total, opt, train_config.learning_rate);
      epoch_loss += loss;
      ++batches;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1)));
  }

  auto accuracy = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i : idx) {
      double conf = classifier_forward(data[i].structure, result.params, config);
      bool predicted_normal = conf >= 0.5;
      if (predicted_normal == !data[i].label.is_outlier) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(idx.size());
  };
  result.train_accuracy = accuracy(train_idx);
  result.test_accuracy = accuracy(test_idx);

  if (!test_idx.empty()) {
    std::vector<double> scores;
    std::vector<int> labels;
    bool both = false;
    for (std::size_t i : test_idx) {
      scores.push_back(classifier_forward(data[i].structure, result.params, config));
      labels.push_back(data[i].label.is_outlier ? 0 : 1);
    }
    for (std::size_t k = 1; k < labels.size(); ++k) {
      if (labels[k] != labels[0]) both = true;
    }
    result.test_auc = both ? roc_auc(scores, labels) : 0.0;
  }
  return result;
}

DetectResult detect(const Structure& structure, const ParameterSet& classifier,
                    const DenoiserConfig& config, double confidence_threshold,
                    const Structure& reference_initial, const HeuristicOptions& options) {
  DetectResult result;
  result.confidence = classifier_forward(structure, classifier, config);
  result.report = run_heuristics(structure, reference_initial, options);
  result.is_outlier = result.confidence < confidence_threshold || result.report.any();
  return result;
}

} // namespace bridgecat
