#pragma once

#include "bridgecat/bridge.hpp"
#include "bridgecat/denoiser.hpp"
#include "bridgecat/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bridgecat {

struct HeuristicOptions {
  double collision_factor = 0.8;     // of the covalent-radius sum
  double bond_factor = 1.25;         // bond when d < factor * radius sum
  double reconstruction_tol = 1.0;   // Angstrom, max free slab-atom displacement
};

struct OffendingPair {
  int i = 0;
  int j = 0;
  double distance = 0.0;
  double threshold = 0.0;
};

struct HeuristicReport {
  bool collision = false;
  bool dissociation = false;
  bool desorption = false;
  bool reconstruction = false;
  std::vector<OffendingPair> collision_pairs;
  int adsorbate_fragments = 0;        // when dissociation was evaluated
  double min_surface_gap = 0.0;       // smallest adsorbate-slab distance ratio
  double max_slab_displacement = 0.0; // when reconstruction was evaluated

  bool any() const { return collision || dissociation || desorption || reconstruction; }
};

/// Any minimum-image pair closer than factor * (r_i + r_j).
std::pair<bool, std::vector<OffendingPair>> check_collision(const Structure& structure,
                                                            double factor = 0.8);

/// True when the adsorbate connectivity graph splits into >1 fragment.
bool check_dissociation(const Structure& structure, double bond_factor = 1.25);

/// True when no adsorbate-slab pair is within bond_factor * radius sum.
bool check_desorption(const Structure& structure, double bond_factor = 1.25);

/// True when any free non-adsorbate atom moved more than displacement_tol
/// from its position in the reference slab.
bool check_reconstruction(const Structure& generated, const Structure& reference_initial,
                          double displacement_tol = 1.0);

HeuristicReport run_heuristics(const Structure& generated, const Structure& reference_initial,
                               const HeuristicOptions& options = {});

enum class OutlierSource { kDmaeThreshold, kHeuristic, kBoth };

std::string to_string(OutlierSource source);

struct OutlierLabel {
  std::string id;
  bool is_outlier = false;
  OutlierSource source = OutlierSource::kDmaeThreshold; // meaningful when outlier
  std::optional<double> dmae;
  double noise_coefficient = 0.0;
  HeuristicReport report;
};

struct LabeledStructure {
  Structure structure;
  OutlierLabel label;
};

/// Generates each pair at every noise coefficient (eta = coefficient),
/// labels by DMAE against the relaxed reference unioned with heuristics.
std::vector<LabeledStructure> label_generations(
    const DenoiserFn& denoiser, const BridgeSchedule& schedule, const SamplerConfig& sampler,
    const std::vector<StructurePair>& pairs,
    const std::vector<double>& noise_coefficients = {0.0, 0.5, 1.0},
    double dmae_threshold = 0.05, const HeuristicOptions& heuristics = {}, int jobs = 1);

struct ClassifierTrainConfig {
  int epochs = 20;
  int batch_size = 256;
  double learning_rate = 1e-3; // constant
  double split_ratio = 0.8;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Inverse-frequency weights normalized so a balanced set gets (1, 1);
/// returns (weight for class a, weight for class b).
std::pair<double, double> inverse_frequency_weights(std::size_t count_a, std::size_t count_b);

struct ClassifierTrainResult {
  ParameterSet params;
  DenoiserConfig config;
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double test_auc = 0.0;
};

/// Weighted binary cross-entropy on the scalar-head network; class weights
/// inversely proportional to frequency. Label 1 = normal, 0 = outlier.
/// Throws on a single-class dataset.
ClassifierTrainResult train_classifier(const std::vector<LabeledStructure>& data,
                                       DenoiserConfig config,
                                       const ClassifierTrainConfig& train_config);

struct DetectResult {
  bool is_outlier = false;
  double confidence = 0.0;
  HeuristicReport report;
};

/// Union rule: low confidence or any heuristic flag marks an outlier.
DetectResult detect(const Structure& structure, const ParameterSet& classifier,
                    const DenoiserConfig& config, double confidence_threshold,
                    const Structure& reference_initial, const HeuristicOptions& options = {});

} // namespace bridgecat
