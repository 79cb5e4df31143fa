#pragma once

#include "bridgecat/geometry.hpp"

#include <array>
#include <vector>

namespace bridgecat {

/// A directed edge i -> image of j shifted by (k1, k2, k3) cell vectors.
struct NeighborEdge {
  int i;
  int j;
  std::array<int, 3> shift;
  double distance;     // Angstrom, always in (0, cutoff)
  Vec3 unit_vector;    // from atom i towards the image of atom j
};

struct NeighborGraph {
  std::vector<NeighborEdge> edges;
  double cutoff = 0.0;
};

/// Enumerates every directed edge with 0 < d < cutoff across periodic images
/// (shifts in {-1,0,1} along periodic axes, 0 elsewhere), including self-image
/// edges i == j with a nonzero shift. Expects a wrapped structure.
/// Throws "coincident atoms" if two distinct atom images overlap.
NeighborGraph build_neighbor_multigraph(const Structure& structure, double cutoff);

/// N x N matrix of minimum-image distances; symmetric with zero diagonal.
Eigen::MatrixXd min_image_distance_matrix(const Structure& structure);

} // namespace bridgecat
