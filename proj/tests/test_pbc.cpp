#include "bridgecat/geometry.hpp"
#include "bridgecat/neighbors.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>

using namespace bridgecat;
using namespace bridgecat::testing;

TEST_CASE("cart/frac round trip on a diagonal cell") {
  Lattice lattice = cubic_lattice(10.0);
  Vec3 frac = lattice.to_frac(Vec3(5.0, 5.0, 5.0));
  CHECK(frac.isApprox(Vec3(0.5, 0.5, 0.5), 1e-14));

  Rng rng(7);
  for (int k = 0; k < 50; ++k) {
    Vec3 p(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20));
    Vec3 back = lattice.to_cart(lattice.to_frac(p));
    CHECK((back - p).norm() < 1e-10);
  }
}

TEST_CASE("cart/frac on a triclinic cell matches the hand-solved system") {
  Mat3 cell;
  cell << 10.0, 0.0, 0.0, 5.0, 8.66, 0.0, 0.0, 0.0, 30.0;
  Lattice lattice(cell, {true, true, false});
  Vec3 frac = lattice.to_frac(Vec3(10.0, 4.33, 0.0));
  CHECK(frac.x() == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(frac.y() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(frac.z() == doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    Vec3 p(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20));
    CHECK((lattice.to_cart(lattice.to_frac(p)) - p).norm() < 1e-10);
  }
}

TEST_CASE("degenerate lattice is rejected") {
  Mat3 cell = Mat3::Zero();
  cell(0, 0) = 1.0;
  cell(1, 1) = 1.0; // third row zero
  CHECK_THROWS_WITH_AS(Lattice(cell, {true, true, false}), "degenerate lattice",
                       std::invalid_argument);
}

TEST_CASE("wrap_into_cell maps fractions into [0,1) on periodic axes only") {
  Lattice lattice = cubic_lattice(10.0);
  Positions cart(1, 3);
  cart.row(0) = lattice.to_cart(Vec3(1.2, -0.3, 0.5)).transpose();
  Structure s({78}, cart, {false}, {false}, lattice, "w");
  Structure wrapped = wrap_into_cell(s);
  Vec3 frac = lattice.to_frac(Vec3(wrapped.positions.row(0)));
  CHECK(frac.x() == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(frac.y() == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(frac.z() == doctest::Approx(0.5).epsilon(1e-12)); // z untouched

  Structure again = wrap_into_cell(wrapped);
  CHECK((again.positions - wrapped.positions).norm() == doctest::Approx(0.0));
}

TEST_CASE("wrap preserves the min-image distance matrix") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Lattice lattice = random_slab_lattice(rng);
    Structure s = random_structure(rng, 8, lattice);
    // Push atoms far outside the cell first.
    Structure shifted = s;
    shifted.positions.array() += 3.0;
    Eigen::MatrixXd before(s.size(), s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      for (Eigen::Index j = 0; j < s.size(); ++j) {
        before(i, j) = brute_force_mic(lattice, shifted.positions.row(i),
                                       shifted.positions.row(j))
                           .norm();
      }
    }
    Eigen::MatrixXd after = min_image_distance_matrix(wrap_into_cell(shifted));
    CHECK((before - after).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("mic_displacement basics") {
  Lattice lattice = cubic_lattice(1.0, {true, true, true});
  Vec3 d = lattice.mic_displacement(Vec3(0.9, 0.0, 0.0), Vec3(0.1, 0.0, 0.0));
  CHECK(d.x() == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(lattice.mic_displacement(Vec3(0.3, 0.4, 0.5), Vec3(0.3, 0.4, 0.5)).norm() ==
        doctest::Approx(0.0));
}

TEST_CASE("mic_displacement equals brute-force image search on oblique cells") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    Lattice lattice = random_slab_lattice(rng);
    Vec3 a = lattice.to_cart(Vec3(rng.uniform(), rng.uniform(), rng.uniform()));
    Vec3 b = lattice.to_cart(Vec3(rng.uniform(), rng.uniform(), rng.uniform()));
    Vec3 mic = lattice.mic_displacement(a, b);
    Vec3 oracle = brute_force_mic(lattice, a, b);
    CHECK(mic.norm() == doctest::Approx(oracle.norm()).epsilon(1e-12));
  }
}

TEST_CASE("mic_displacement is antisymmetric") {
  Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    Lattice lattice = random_slab_lattice(rng);
    Vec3 a = lattice.to_cart(Vec3(rng.uniform(), rng.uniform(), rng.uniform()));
    Vec3 b = lattice.to_cart(Vec3(rng.uniform(), rng.uniform(), rng.uniform()));
    Vec3 ab = lattice.mic_displacement(a, b);
    Vec3 ba = lattice.mic_displacement(b, a);
    CHECK((ab + ba).norm() < 1e-10);
  }
}

TEST_CASE("multigraph: single atom in a 3 A square cell, cutoff 4 A") {
  Mat3 cell = Mat3::Zero();
  cell(0, 0) = 3.0;
  cell(1, 1) = 3.0;
  cell(2, 2) = 30.0;
  Lattice lattice(cell, {true, true, false});
  Positions pos(1, 3);
  pos << 1.0, 1.0, 10.0;
  Structure s({78}, pos, {false}, {false}, lattice, "single");
  NeighborGraph graph = build_neighbor_multigraph(s, 4.0);
  REQUIRE(graph.edges.size() == 4); // axial self-images at 3.0; diagonals at 4.243 excluded
  for (const auto& e : graph.edges) {
    CHECK(e.i == 0);
    CHECK(e.j == 0);
    CHECK(e.distance == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(e.shift[2] == 0);
  }
}

TEST_CASE("multigraph: isolated dimer has two directed zero-shift edges") {
  Lattice lattice = cubic_lattice(20.0);
  Positions pos(2, 3);
  pos << 5.0, 5.0, 5.0, 6.0, 5.0, 5.0;
  Structure s({78, 78}, pos, {false, false}, {false, false}, lattice, "dimer");
  NeighborGraph graph = build_neighbor_multigraph(s, 4.0);
  REQUIRE(graph.edges.size() == 2);
  for (const auto& e : graph.edges) {
    CHECK(e.shift == std::array<int, 3>{0, 0, 0});
    CHECK(e.distance == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("multigraph matches brute-force enumeration on random slabs") {
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    Lattice lattice = random_slab_lattice(rng);
    Structure s = random_structure(rng, 20, lattice);
    NeighborGraph graph = build_neighbor_multigraph(s, 4.0);
    std::vector<BruteEdge> expected = brute_force_edges(s, 4.0);

    std::vector<BruteEdge> got;
    for (const auto& e : graph.edges) {
      got.push_back(BruteEdge{e.i, e.j, e.shift[0], e.shift[1], e.shift[2], e.distance});
    }
    std::sort(got.begin(), got.end());
    REQUIRE(got.size() == expected.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(got[k].i == expected[k].i);
      CHECK(got[k].j == expected[k].j);
      CHECK(got[k].k1 == expected[k].k1);
      CHECK(got[k].k2 == expected[k].k2);
      CHECK(got[k].k3 == 0);
      CHECK(got[k].distance == doctest::Approx(expected[k].distance).epsilon(1e-12));
    }
  }
}

TEST_CASE("multigraph edge distances recompute from positions plus shift") {
  Rng rng(41);
  Lattice lattice = random_slab_lattice(rng);
  Structure s = random_structure(rng, 12, lattice);
  NeighborGraph graph = build_neighbor_multigraph(s, 4.0);
  for (const auto& e : graph.edges) {
    Vec3 delta = Vec3(s.positions.row(e.j)) +
                 lattice.to_cart(Vec3(e.shift[0], e.shift[1], e.shift[2])) -
                 Vec3(s.positions.row(e.i));
    CHECK(std::abs(delta.norm() - e.distance) < 1e-10);
    CHECK((delta / delta.norm() - e.unit_vector).norm() < 1e-10);
  }
}

TEST_CASE("multigraph rejects coincident atoms") {
  Lattice lattice = cubic_lattice(10.0);
  Positions pos(2, 3);
  pos << 1.0, 1.0, 1.0, 1.0, 1.0, 1.0;
  Structure s({78, 78}, pos, {false, false}, {false, false}, lattice, "bad");
  CHECK_THROWS_WITH_AS(build_neighbor_multigraph(s, 4.0), "coincident atoms",
                       std::invalid_argument);
}

TEST_CASE("multigraph is permutation covariant") {
  Rng rng(43);
  Lattice lattice = random_slab_lattice(rng);
  Structure s = random_structure(rng, 10, lattice);

  std::vector<int> perm(10);
  for (int i = 0; i < 10; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng.engine());

  Structure p = s;
  for (int i = 0; i < 10; ++i) {
    p.positions.row(perm[static_cast<std::size_t>(i)]) = s.positions.row(i);
    p.atomic_numbers[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
        s.atomic_numbers[static_cast<std::size_t>(i)];
    p.adsorbate[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
        s.adsorbate[static_cast<std::size_t>(i)];
  }

  auto edge_set = [](const NeighborGraph& g, const std::vector<int>* map) {
    std::vector<BruteEdge> out;
    for (const auto& e : g.edges) {
      int i = map != nullptr ? (*map)[static_cast<std::size_t>(e.i)] : e.i;
      int j = map != nullptr ? (*map)[static_cast<std::size_t>(e.j)] : e.j;
      out.push_back(BruteEdge{i, j, e.shift[0], e.shift[1], e.shift[2], e.distance});
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  auto original = edge_set(build_neighbor_multigraph(s, 4.0), &perm);
  auto permuted = edge_set(build_neighbor_multigraph(p, 4.0), nullptr);
  REQUIRE(original.size() == permuted.size());
  for (std::size_t k = 0; k < original.size(); ++k) {
    CHECK(original[k].i == permuted[k].i);
    CHECK(original[k].j == permuted[k].j);
    CHECK(original[k].distance == doctest::Approx(permuted[k].distance).epsilon(1e-12));
  }
}

TEST_CASE("wide cells reduce the multigraph to the naive neighbor search") {
  Rng rng(47);
  Mat3 cell = Mat3::Zero();
  cell(0, 0) = 9.0;
  cell(1, 1) = 9.5;
  cell(2, 2) = 30.0;
  Lattice lattice(cell, {true, true, false}); // both in-plane lengths > 2 * cutoff
  Structure s = random_structure(rng, 15, lattice);
  NeighborGraph graph = build_neighbor_multigraph(s, 4.0);

  // No self-image edges and at most one image per directed pair: the
  // multigraph collapses to the plain minimum-image neighbor search.
  std::map<std::pair<int, int>, int> per_pair;
  for (const auto& e : graph.edges) {
    CHECK(e.i != e.j);
    per_pair[{e.i, e.j}] += 1;
  }
  for (const auto& [pair, count] : per_pair) CHECK(count == 1);

  std::size_t naive = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      if (i == j) continue;
      if (lattice.mic_distance(s.positions.row(i), s.positions.row(j)) < 4.0) ++naive;
    }
  }
  CHECK(graph.edges.size() == naive);
}

TEST_CASE("min_image_distance_matrix basics and oracle agreement") {
  Lattice big = cubic_lattice(50.0);
  Positions pos(2, 3);
  pos << 10.0, 10.0, 10.0, 11.0, 10.0, 10.0;
  Structure dimer({78, 78}, pos, {false, false}, {false, false}, big, "dimer");
  Eigen::MatrixXd d = min_image_distance_matrix(dimer);
  CHECK(d(0, 0) == 0.0);
  CHECK(d(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d(1, 0) == doctest::Approx(1.0).epsilon(1e-12));

  Lattice ten = cubic_lattice(10.0);
  Positions pos2(2, 3);
  pos2.row(0) = ten.to_cart(Vec3(0.05, 0.5, 0.3)).transpose();
  pos2.row(1) = ten.to_cart(Vec3(0.95, 0.5, 0.3)).transpose();
  Structure wrap_pair({78, 78}, pos2, {false, false}, {false, false}, ten, "pair");
  CHECK(min_image_distance_matrix(wrap_pair)(0, 1) == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    Lattice lattice = random_slab_lattice(rng);
    Structure s = random_structure(rng, 10, lattice);
    Eigen::MatrixXd got = min_image_distance_matrix(s);
    CHECK(got.isApprox(got.transpose(), 1e-12));
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      for (Eigen::Index j = 0; j < s.size(); ++j) {
        double expected =
            brute_force_mic(lattice, s.positions.row(i), s.positions.row(j)).norm();
        CHECK(std::abs(got(i, j) - expected) < 1e-10);
      }
    }
  }
}

TEST_CASE("distance matrix is invariant under lattice translation") {
  Rng rng(59);
  Lattice lattice = random_slab_lattice(rng);
  Structure s = random_structure(rng, 9, lattice);
  Eigen::MatrixXd base = min_image_distance_matrix(s);
  Structure t = s;
  t.positions.rowwise() += lattice.to_cart(Vec3(2.0, -1.0, 0.0)).transpose();
  Eigen::MatrixXd shifted = min_image_distance_matrix(wrap_into_cell(t));
  CHECK((base - shifted).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("structure pair validation catches mask and position mismatches") {
  Lattice lattice = cubic_lattice(10.0);
  Positions pos(2, 3);
  pos << 1, 1, 1, 2, 2, 2;
  Structure a({78, 8}, pos, {true, false}, {false, true}, lattice, "a");
  StructurePair pair;
  pair.initial = a;
  pair.relaxed = a;
  CHECK_NOTHROW(pair.validate());

  pair.relaxed.positions(0, 0) += 0.1; // fixed atom moved
  CHECK_THROWS_AS(pair.validate(), std::invalid_argument);

  pair.relaxed = a;
  pair.relaxed.atomic_numbers[1] = 1;
  CHECK_THROWS_AS(pair.validate(), std::invalid_argument);
}
