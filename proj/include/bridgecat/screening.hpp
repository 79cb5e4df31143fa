#pragma once

#include "bridgecat/bridge.hpp"
#include "bridgecat/geometry.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bridgecat {

enum class SiteKind { kTop, kBridge, kHollow };

std::string to_string(SiteKind kind);

struct AdsorptionSite {
  SiteKind kind = SiteKind::kTop;
  Vec3 position = Vec3::Zero(); // on the topmost-layer plane, wrapped
  std::vector<int> anchors;     // slab atom indices (1 top / 2 bridge / >=3 hollow)
  Vec3 normal = Vec3::UnitZ();
};

enum class Facet { kFcc111, kFcc100 };

Facet facet_from_string(const std::string& name);
std::string to_string(Facet facet);

struct SlabSpec {
  double lattice_constant = 3.92; // Angstrom
  Facet facet = Facet::kFcc111;
  int nx = 2;
  int ny = 2;
  int layers = 3;
  double vacuum = 10.0;
  std::vector<std::string> species; // cycled over sites to form ordered alloys
  std::string id;
};

/// fcc-style slab with the bottom two layers fixed, wrapped, pbc (T,T,F).
Structure build_slab(const SlabSpec& spec);

/// Top/bridge/hollow sites from a Delaunay triangulation of the topmost
/// layer plus its 8 in-plane periodic images; wrapped and merged by distance
/// clustering.
std::vector<AdsorptionSite> enumerate_sites(const Structure& slab,
                                            double merge_radius = 0.25);

/// Rigid adsorbate fragment; the anchor atom sits at the origin and the
/// molecular axis points along +z.
struct AdsorbateTemplate {
  std::string name;
  std::vector<int> atomic_numbers;
  Positions positions;
};

/// Built-in templates: "O", "OH", "H".
AdsorbateTemplate adsorbate_template(const std::string& name);

/// Places the template anchor at site.position + height * normal, rotating
/// the molecular z-axis onto the normal. Adsorbate atoms are tagged and free.
Structure place_adsorbate(const Structure& slab, const AdsorptionSite& site,
                          const AdsorbateTemplate& adsorbate, double height = 1.5);

/// Pairwise force-shifted Lennard-Jones surrogate standing in for the
/// reference relaxation engine. Parameters are synthetic; defaults derive
/// pair minima from covalent radii.
class SurrogateOracle {
public:
  explicit SurrogateOracle(double cutoff = 6.0);

  void set_pair(int zi, int zj, double epsilon_ev, double minimum_angstrom);
  /// (epsilon, sigma) actually used for a pair.
  std::pair<double, double> pair_parameters(int zi, int zj) const;

  double cutoff() const { return cutoff_; }

  double energy(const Structure& structure) const;
  Positions forces(const Structure& structure) const; // zeroed on fixed atoms

private:
  double pair_epsilon(int zi, int zj) const;
  double cutoff_;
  std::map<std::pair<int, int>, std::pair<double, double>> overrides_;
};

struct RelaxSettings {
  double force_tolerance = 0.05; // eV/Angstrom, max free-atom force
  int max_steps = 500;           // cap on descent attempts
  double initial_step = 0.05;    // Angstrom^2/eV
  double max_displacement = 0.2; // Angstrom per atom per step
};

struct RelaxResult {
  Structure structure;
  int steps = 0; // accepted descent steps
  double energy = 0.0;
  std::vector<double> energies; // energy after each accepted step, initial first
};

/// Steepest descent with adaptive step (halved on energy increase); moves
/// free atoms only, energies non-increasing across accepted steps.
RelaxResult oracle_relax(const Structure& structure, const SurrogateOracle& oracle,
                         const RelaxSettings& settings = {});

/// E(system) - E(slab) - E(gas); plain energy evaluations of the given
/// geometries.
double adsorption_energy(const Structure& system, const Structure& slab,
                         const Structure& adsorbate_gas, const SurrogateOracle& oracle);

/// Isolated molecule in a large open box, relaxed with the oracle.
Structure gas_reference(const AdsorbateTemplate& adsorbate, const SurrogateOracle& oracle);

struct DatasetOptions {
  double height = 1.5;
  double jitter = 0.0; // in-plane Gaussian displacement of the adsorbate
  double clean_min_dmae = 1e-3;
  double clean_max_dmae = 0.5;
  RelaxSettings relax;
};

/// Initial guesses from site enumeration and placement; references from the
/// surrogate oracle; cleaned; deterministic for a fixed seed.
std::vector<StructurePair> make_synthetic_dataset(const std::vector<Structure>& surfaces,
                                                  const std::vector<AdsorbateTemplate>& adsorbates,
                                                  const SurrogateOracle& oracle,
                                                  std::uint64_t seed,
                                                  const DatasetOptions& options = {});

struct Candidate {
  std::string surface_id;
  AdsorptionSite site;
  double adsorption_energy = 0.0; // eV
  double offset = 0.0;            // vs the reference surface, eV
  bool refined = false;           // sent through oracle refinement by triage
};

/// Outlier triage callback: true => refine this generated structure with the
/// oracle before the energy evaluation.
using TriageFn = std::function<bool(const Structure& generated, const Structure& initial)>;

struct ScreenOptions {
  double height = 1.5;
  std::pair<double, double> window{-0.2, 0.4}; // eV, exclusive bounds
  RelaxSettings relax;
  int jobs = 1;
};

struct ScreenResult {
  std::vector<Candidate> candidates;    // inside the window, ranked
  std::vector<Candidate> all_surfaces;  // best site per surface, surface order
  double reference_energy = 0.0;        // eV
};

/// Per surface: enumerate sites, place the adsorbate, generate with the
/// bridge sampler, triage, take the minimum-energy site, and window the
/// offset against the reference surface.
ScreenResult screen(const std::vector<Structure>& surfaces, const std::string& reference_id,
                    const AdsorbateTemplate& adsorbate, const DenoiserFn& denoiser,
                    const BridgeSchedule& schedule, const SamplerConfig& sampler,
                    const SurrogateOracle& oracle, const TriageFn& triage,
                    const ScreenOptions& options = {});

} // namespace bridgecat
