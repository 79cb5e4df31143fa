#pragma once

#include "bridgecat/autodiff.hpp"
#include "bridgecat/bridge.hpp"
#include "bridgecat/geometry.hpp"
#include "bridgecat/neighbors.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>

namespace bridgecat {

struct DenoiserConfig {
  double cutoff = 4.0;
  int hidden = 64;
  int layers = 3;
  int num_rbf = 32;
  int n_frequencies = 8;
  int envelope_exponent = 5;
  int out_channels = 3; // 3 = vector head (denoiser), 1 = scalar head (classifier)
  int max_atomic_number = 96;
  int time_embed_dim = 64;
  bool surface_pass = true; // restrict the first message pass to slab-slab edges

  void validate() const;
};

/// Named parameter arrays; std::map keeps a deterministic name ordering.
using ParameterSet = std::map<std::string, Eigen::MatrixXd>;

std::size_t parameter_count(const ParameterSet& params);

/// Total parameter count implied by a config; independent of any instance.
///
/// With F = hidden, K = num_rbf, NF = n_frequencies, D = time_embed_dim,
/// Z = max_atomic_number, L = layers:
///   embedding     Z*F + D*F + F
///   per layer     2 * (F*F + F + 3*F*F + 3*F + (K + 6*NF + 1)*3*F)   [messages]
///                 + 2*F*F + 2*F*F + F + 3*F*F + 3*F                  [update]
///   head          F                       (vector head, out_channels = 3)
///                 F*F + F + F + 1         (scalar head, out_channels = 1)
std::size_t parameter_count(const DenoiserConfig& config);

/// Deterministic seeded initialization; shapes are a pure function of config.
ParameterSet init_parameters(const DenoiserConfig& config, std::uint64_t seed);

/// Per-atom features: scalars are rotation invariant, vector channels rotate
/// with the structure.
struct NodeState {
  Eigen::MatrixXd scalars;                 // N x hidden
  std::array<Eigen::MatrixXd, 3> vectors;  // x/y/z component, each N x hidden
};

/// Gaussian radial basis with centers on (0, cutoff], width gamma =
/// (num_rbf/cutoff)^2, multiplied by the polynomial cutoff envelope.
/// d >= cutoff yields zeros; d <= 0 is an error.
Eigen::VectorXd rbf_expand(double d, double cutoff, int num_rbf, int envelope_exponent);

/// Polynomial envelope u with u(0) = 1, u(1) = 0, u'(1) = u''(1) = 0.
double envelope_poly(double x, int exponent);

/// sin(2 pi k f) and cos(2 pi k f) for k = 1..n per component; exactly
/// periodic under f -> f + 1.
Eigen::VectorXd fourier_frac_features(const Vec3& frac_displacement, int n_frequencies);

/// Element embedding plus sinusoidal time conditioning; vector features zero.
NodeState embed_atoms(const Structure& structure, int t, const BridgeSchedule& schedule,
                      const ParameterSet& params, const DenoiserConfig& config);

/// One interaction block: time conditioning added to scalars, a message pass
/// over slab-slab edges, a message pass over all edges, then the gated
/// scalar/vector update.
NodeState block_forward(const NodeState& state, const Structure& structure,
                        const Positions& x_t, int t, const BridgeSchedule& schedule,
                        int block_index, const ParameterSet& params,
                        const DenoiserConfig& config);

/// Full denoiser pass: per-atom 3-vector eps prediction. The neighbor graph
/// is rebuilt from x_t on every call.
Positions denoiser_forward(const Structure& structure, const Positions& x_t, int t,
                           const BridgeSchedule& schedule, const ParameterSet& params,
                           const DenoiserConfig& config);

/// Invariant scalar confidence in (0, 1); sum-pooled scalars through the
/// scalar head. Requires out_channels = 1.
double classifier_forward(const Structure& structure, const ParameterSet& params,
                          const DenoiserConfig& config);

/// A recorded forward evaluation. Attach a loss, then query gradients; asking
/// for gradients without a recorded loss is an error.
class ForwardContext {
public:
  static ForwardContext record_denoiser(const Structure& structure, const Positions& x_t,
                                        int t, const BridgeSchedule& schedule,
                                        const ParameterSet& params,
                                        const DenoiserConfig& config);
  static ForwardContext record_classifier(const Structure& structure,
                                          const ParameterSet& params,
                                          const DenoiserConfig& config);

  const Positions& eps() const;  // denoiser output
  double confidence() const;     // classifier output

  /// Mean |eps - target| over free-atom coordinates.
  double l1_loss(const Positions& target);
  /// Mean squared error over free-atom coordinates.
  double l2_loss(const Positions& target);
  /// Weighted binary cross-entropy against a {0,1} label.
  double bce_loss(double label, double weight);

  /// Reverse pass for the recorded loss; throws without one.
  ParameterSet gradient();

private:
  ForwardContext() = default;

  struct Impl;
  std::shared_ptr<Impl> impl_;
};

/// Wraps parameters into the bridge-sampler denoiser interface.
DenoiserFn make_denoiser_fn(const ParameterSet& params, const DenoiserConfig& config,
                            const BridgeSchedule& schedule);

} // namespace bridgecat
