#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace bridgecat {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
// One row per atom.
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// Periodic cell. Rows of `cell` are the lattice vectors a, b, c (Angstrom);
/// Cartesian and fractional coordinates are related by cart = frac * cell.
/// Slabs use periodic = {true, true, false} with vacuum along c.
class Lattice {
public:
  /// Identity cell, slab periodicity; placeholder for later assignment.
  Lattice() : Lattice(Mat3::Identity(), {true, true, false}) {}
  Lattice(const Mat3& cell, const std::array<bool, 3>& periodic);

  const Mat3& cell() const { return cell_; }
  const Mat3& inverse() const { return inverse_; }
  const std::array<bool, 3>& periodic() const { return periodic_; }

  Vec3 to_frac(const Vec3& cart) const { return inverse_.transpose() * cart; }
  Vec3 to_cart(const Vec3& frac) const { return cell_.transpose() * frac; }

  Positions to_frac(const Positions& cart) const { return cart * inverse_; }
  Positions to_cart(const Positions& frac) const { return frac * cell_; }

  /// Minimum-image displacement from -> to, restricted to periodic axes:
  /// the shortest vector among all periodic images of (to - from).
  Vec3 mic_displacement(const Vec3& from, const Vec3& to) const;

  /// Shortest distance between two points across periodic images.
  double mic_distance(const Vec3& from, const Vec3& to) const {
    return mic_displacement(from, to).norm();
  }

  /// Row-wise minimum-image displacements (to - from per row).
  Positions mic_displacements(const Positions& from, const Positions& to) const;

  /// Map fractional coordinates into [0, 1) along periodic axes.
  Positions wrap(const Positions& cart) const;
  Vec3 wrap(const Vec3& cart) const;

  bool operator==(const Lattice& other) const {
    return cell_ == other.cell_ && periodic_ == other.periodic_;
  }

private:
  Mat3 cell_;
  Mat3 inverse_;
  std::array<bool, 3> periodic_;
};

/// An atomic configuration: the unit of all I/O.
struct Structure {
  std::vector<int> atomic_numbers;
  Positions positions{0, 3};    // N x 3 Cartesian, Angstrom
  std::vector<bool> fixed;      // constrained atoms (never move)
  std::vector<bool> adsorbate;  // adsorbate tags
  Lattice lattice;
  std::string id;

  /// Empty placeholder; fails validate() until populated.
  Structure() = default;
  Structure(std::vector<int> numbers, Positions pos, std::vector<bool> fixed_mask,
            std::vector<bool> adsorbate_mask, Lattice lat, std::string label = "");

  Eigen::Index size() const { return positions.rows(); }
  int free_count() const;
  int adsorbate_count() const;

  /// Throws if array lengths disagree, positions are non-finite, or an
  /// adsorbate atom is marked fixed.
  void validate() const;
};

/// Returns a copy with all positions wrapped into the cell.
Structure wrap_into_cell(const Structure& structure);

/// (initial y, relaxed x) with shared atom ordering; the training sample.
struct StructurePair {
  Structure initial;
  Structure relaxed;
  std::string adsorbate_species;
  std::string facet;

  /// Throws unless both members share atomic numbers, masks, lattice, and
  /// fixed-atom positions (tolerance 1e-6 A).
  void validate() const;
};

} // namespace bridgecat
