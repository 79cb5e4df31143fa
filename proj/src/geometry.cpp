#include "bridgecat/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace bridgecat {

Lattice::Lattice(const Mat3& cell, const std::array<bool, 3>& periodic)
    : cell_(cell), periodic_(periodic) {
  double det = cell.determinant();
  if (!std::isfinite(det) || std::abs(det) <= 1e-8) {
    throw std::invalid_argument("degenerate lattice");
  }
  inverse_ = cell.inverse();
}

Vec3 Lattice::mic_displacement(const Vec3& from, const Vec3& to) const {
  const Vec3 diff = to - from;
  Vec3 frac = to_frac(diff);
  // Candidate shift per periodic axis: nearest integer (ties to even) plus
  // its two neighbours. Rounding alone is not minimal for oblique cells.
  std::array<double, 3> base{};
  for (int k = 0; k < 3; ++k) {
    base[k] = periodic_[k] ? std::nearbyint(frac[k]) : 0.0;
  }
  Vec3 best = to_cart(Vec3(frac[0] - base[0], frac[1] - base[1], frac[2] - base[2]));
  double best_norm2 = best.squaredNorm();
  const std::array<double, 3> offsets = {0.0, -1.0, 1.0};
  for (double o0 : offsets) {
    if (o0 != 0.0 && !periodic_[0]) continue;
    for (double o1 : offsets) {
      if (o1 != 0.0 && !periodic_[1]) continue;
      for (double o2 : offsets) {
        if (o2 != 0.0 && !periodic_[2]) continue;
        if (o0 == 0.0 && o1 == 0.0 && o2 == 0.0) continue;
        Vec3 cand = to_cart(Vec3(frac[0] - base[0] - o0, frac[1] - base[1] - o1,
                                 frac[2] - base[2] - o2));
        double n2 = cand.squaredNorm();
        if (n2 < best_norm2) {
          best_norm2 = n2;
          best = cand;
        }
      }
    }
  }
  return best;
}

Positions Lattice::mic_displacements(const Positions& from, const Positions& to) const {
  if (from.rows() != to.rows()) {
    throw std::invalid_argument("mic_displacements: row count mismatch");
  }
  Positions out(from.rows(), 3);
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    out.row(i) = mic_displacement(from.row(i), to.row(i)).transpose();
  }
  return out;
}

namespace {

// Integer lattice shift that moves fractional coordinate f into [0, 1).
// Guards the f = -epsilon case where f - floor(f) rounds to exactly 1.
inline double wrap_shift(double f) {
  double n = std::floor(f);
  if (f - n >= 1.0) n += 1.0;
  return n;
}

} // namespace

// Wrapping subtracts an exact integer combination of lattice vectors in
// Cartesian space; atoms already inside the cell are returned bit-identical.
Vec3 Lattice::wrap(const Vec3& cart) const {
  Vec3 frac = to_frac(cart);
  Vec3 out = cart;
  for (int k = 0; k < 3; ++k) {
    if (!periodic_[k]) continue;
    double n = wrap_shift(frac[k]);
    if (n != 0.0) out -= n * cell_.row(k).transpose();
  }
  return out;
}

Positions Lattice::wrap(const Positions& cart) const {
  Positions frac = to_frac(cart);
  Positions out = cart;
  for (Eigen::Index i = 0; i < frac.rows(); ++i) {
    for (int k = 0; k < 3; ++k) {
      if (!periodic_[k]) continue;
      double n = wrap_shift(frac(i, k));
      if (n != 0.0) out.row(i) -= n * cell_.row(k);
    }
  }
  return out;
}

Structure::Structure(std::vector<int> numbers, Positions pos, std::vector<bool> fixed_mask,
                     std::vector<bool> adsorbate_mask, Lattice lat, std::string label)
    : atomic_numbers(std::move(numbers)),
      positions(std::move(pos)),
      fixed(std::move(fixed_mask)),
      adsorbate(std::move(adsorbate_mask)),
      lattice(std::move(lat)),
      id(std::move(label)) {
  validate();
}

int Structure::free_count() const {
  int n = 0;
  for (bool f : fixed) n += f ? 0 : 1;
  return n;
}

int Structure::adsorbate_count() const {
  int n = 0;
  for (bool a : adsorbate) n += a ? 1 : 0;
  return n;
}

void Structure::validate() const {
  const auto n = static_cast<std::size_t>(positions.rows());
  if (n < 1) throw std::invalid_argument("structure must contain at least one atom");
  if (atomic_numbers.size() != n || fixed.size() != n || adsorbate.size() != n) {
    throw std::invalid_argument("structure arrays must share length N");
  }
  if (!positions.allFinite()) {
    throw std::invalid_argument("structure positions must be finite");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (atomic_numbers[i] < 1) {
      throw std::invalid_argument("atomic numbers must be positive");
    }
    if (adsorbate[i] && fixed[i]) {
      throw std::invalid_argument("adsorbate atoms must not be fixed");
    }
  }
}

Structure wrap_into_cell(const Structure& structure) {
  Structure out = structure;
  out.positions = structure.lattice.wrap(structure.positions);
  return out;
}

void StructurePair::validate() const {
  initial.validate();
  relaxed.validate();
  if (initial.atomic_numbers != relaxed.atomic_numbers ||
      initial.fixed != relaxed.fixed || initial.adsorbate != relaxed.adsorbate) {
    throw std::invalid_argument("structure pair members must share atoms and masks");
  }
  if (!(initial.lattice == relaxed.lattice)) {
    throw std::invalid_argument("structure pair members must share the lattice");
  }
  for (Eigen::Index i = 0; i < initial.size(); ++i) {
    if (initial.fixed[static_cast<std::size_t>(i)]) {
      double d = (initial.positions.row(i) - relaxed.positions.row(i)).norm();
      if (d > 1e-6) {
        throw std::invalid_argument("fixed atoms must coincide in both pair members");
      }
    }
  }
}

} // namespace bridgecat
