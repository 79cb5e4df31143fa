#include "bridgecat/neighbors.hpp"

#include <stdexcept>

namespace bridgecat {

NeighborGraph build_neighbor_multigraph(const Structure& structure, double cutoff) {
  if (cutoff <= 0.0) throw std::invalid_argument("cutoff must be positive");
  const auto& lattice = structure.lattice;
  const auto& periodic = lattice.periodic();
  const Eigen::Index n = structure.size();

  std::vector<int> k_lo(3, 0), k_hi(3, 0);
  for (int a = 0; a < 3; ++a) {
    if (periodic[a]) {
      k_lo[a] = -1;
      k_hi[a] = 1;
    }
  }

  NeighborGraph graph;
  graph.cutoff = cutoff;
  const double cutoff2 = cutoff * cutoff;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 ri = structure.positions.row(i);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Vec3 rj = structure.positions.row(j);
      for (int k1 = k_lo[0]; k1 <= k_hi[0]; ++k1) {
        for (int k2 = k_lo[1]; k2 <= k_hi[1]; ++k2) {
          for (int k3 = k_lo[2]; k3 <= k_hi[2]; ++k3) {
            if (i == j && k1 == 0 && k2 == 0 && k3 == 0) continue;
            Vec3 image = rj + lattice.to_cart(Vec3(k1, k2, k3));
            Vec3 delta = image - ri;
            double d2 = delta.squaredNorm();
            if (d2 >= cutoff2) continue;
            if (d2 < 1e-20) throw std::invalid_argument("coincident atoms");
            double d = std::sqrt(d2);
            graph.edges.push_back(NeighborEdge{static_cast<int>(i), static_cast<int>(j),
                                               {k1, k2, k3}, d, delta / d});
          }
        }
      }
    }
  }
  return graph;
}

Eigen::MatrixXd min_image_distance_matrix(const Structure& structure) {
  const Eigen::Index n = structure.size();
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double d = structure.lattice.mic_distance(structure.positions.row(i),
                                                structure.positions.row(j));
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  return dist;
}

} // namespace bridgecat
