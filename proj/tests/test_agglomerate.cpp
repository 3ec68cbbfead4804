#include "doctest.h"

#include <set>

#include "agglomg/agglomerate.hpp"
#include "helpers.hpp"

using namespace agglomg;

namespace {

void check_valid(const Topology& t, const Agglomeration& a) {
  CHECK(is_total(a));
  CHECK(is_dense(a));
  CHECK(is_contiguous(t, a));
}

}  // namespace

TEST_CASE("algorithm names round trip") {
  for (Algorithm a : kAllAlgorithms) CHECK(parse_algorithm(to_string(a)) == a);
  CHECK(parse_algorithm("metis") == Algorithm::sizebased);
  CHECK(parse_algorithm("mgridgen") == Algorithm::aspect);
  CHECK_THROWS_AS(parse_algorithm("bogus"), ConfigError);
  CHECK(uses_size(Algorithm::greedy));
  CHECK_FALSE(uses_size(Algorithm::jones));
}

TEST_CASE("jones on two triangles: the interior face is taken first") {
  Mesh m;
  m.dim = 2;
  m.nodes = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  m.elements = {{0, 1, 2, -1}, {0, 2, 3, -1}};
  m.material_id = {1, 1};
  const Topology t = build_topology(m);
  WeightState state;
  const Agglomeration a = jones_coarsen(t, &state);
  CHECK(a.num_aggregates == 1);
  CHECK(a.element_to_agg == std::vector<Index>{0, 0});
  for (int w : state.face) CHECK(w == -1);
}

TEST_CASE("jones and kraus consume every face") {
  const Topology t2 = build_topology(testing::square(8, 0.2, 1));
  const Topology t3 = build_topology(testing::cube(3, 0.2, 1));
  for (const Topology* t : {&t2, &t3}) {
    WeightState s;
    const Agglomeration j = jones_coarsen(*t, &s);
    for (int w : s.face) CHECK(w == -1);
    WeightState sk;
    const Agglomeration k = kraus_coarsen(*t, &sk);
    for (int w : sk.face) CHECK(w == -1);
    for (int w : sk.edge) CHECK(w == -1);
  }
}

TEST_CASE("greedy never exceeds the desired size before cleanup") {
  const Topology t = build_topology(testing::square(16, 0.2, 4));
  for (Index s : {2, 4, 24}) {
    const Agglomeration a = greedy_coarsen(t, s, 3);
    CHECK(is_total(a));
    for (Index size : a.sizes()) CHECK(size <= s);
  }
}

TEST_CASE("sizebased asks for floor(n/s) parts") {
  CHECK(sizebased_parts(512, 24) == 21);
  CHECK(sizebased_parts(48, 24) == 2);
  CHECK_THROWS_AS(sizebased_parts(10, 24), ConfigError);
  CHECK_THROWS_AS(sizebased_parts(10, 1), ConfigError);
  const Topology t = build_topology(testing::square(16, 0.2, 4));
  const Agglomeration a = sizebased_coarsen(t, 24, true, 0);
  CHECK(a.num_aggregates == 512 / 24);
}

TEST_CASE("aspect moves never raise the objective") {
  const Topology t = build_topology(testing::square(16, 0.2, 8));
  std::vector<double> history;
  const Agglomeration a = aspect_ratio_coarsen(t, 8, 2, &history);
  REQUIRE(history.size() >= 2);
  for (std::size_t i = 1; i < history.size(); ++i) CHECK(history[i] <= history[i - 1] + 1e-9);
  CHECK(aspect_objective(t, a.element_to_agg, a.num_aggregates) ==
        doctest::Approx(history.back()));
}

TEST_CASE("aspect objective of a single square agglomerate") {
  // Surface 40, volume 100.
  const Topology t = build_topology(testing::square(4));
  const std::vector<Index> one(static_cast<std::size_t>(t.num_elements), 0);
  CHECK(aspect_objective(t, one, 1) == doctest::Approx(16.0));
}

TEST_CASE("every algorithm gives a valid agglomeration after cleanup") {
  const Topology t2 = build_topology(testing::square(12, 0.2, 3));
  const Topology t3 = build_topology(testing::cube(4, 0.2, 3));
  for (const Topology* t : {&t2, &t3}) {
    for (Algorithm alg : kAllAlgorithms) {
      CoarsenConfig cfg;
      cfg.algorithm = alg;
      cfg.desired_size = t->dim == 2 ? 8 : 20;
      cfg.seed = 5;
      const Agglomeration a = coarsen(*t, cfg);
      INFO(to_string(alg));
      check_valid(*t, a);
      CHECK(a.num_aggregates < t->num_elements);
      CoarsenConfig again = cfg;
      CHECK(coarsen(*t, again).element_to_agg == a.element_to_agg);
    }
  }
}

TEST_CASE("cleanup: an unused element joins the smaller of two equal candidates") {
  const Topology t = build_topology(testing::strip(5));
  const auto order = testing::path_order(t);
  REQUIRE(order.size() == 10);
  Agglomeration a;
  a.element_to_agg.assign(10, -1);
  for (int i = 0; i < 3; ++i) a.element_to_agg[order[i]] = 0;
  for (int i = 4; i < 9; ++i) a.element_to_agg[order[i]] = 1;
  a.element_to_agg[order[9]] = 2;
  a.num_aggregates = 3;
  const CleanupReport r = cleanup(t, a);
  CHECK(r.unused_attached == 1);
  CHECK(a.element_to_agg[order[3]] == a.element_to_agg[order[0]]);
  check_valid(t, a);
}

TEST_CASE("cleanup: node-touching pieces are split and reattached") {
  // Elements 0 and 7 of the 2x2 square touch only at the centre node.
  const Topology t = build_topology(testing::square(2));
  Agglomeration a;
  a.num_aggregates = 2;
  a.element_to_agg = {0, 1, 1, 1, 1, 1, 1, 0};
  {
    const auto r0 = t.dual.adjacency[0];
    REQUIRE(std::find(r0.begin(), r0.end(), 7) == r0.end());
  }
  // Agglomerate 1 is then also in two pieces, joined only through 0 and 7.
  const CleanupReport r = cleanup(t, a);
  CHECK(r.disconnected_split == 2);
  check_valid(t, a);
}

TEST_CASE("cleanup: enclosed agglomerate is merged into its neighbour") {
  // The centre cells of a 3x3 grid sit inside a ring.
  const Mesh m = testing::square(3);
  const Topology t = build_topology(m);
  Agglomeration a;
  a.num_aggregates = 2;
  for (Index e = 0; e < t.num_elements; ++e) {
    const auto c = testing::centroid(m, e);
    const bool centre = c.x() > 10.0 / 3 && c.x() < 20.0 / 3 && c.y() > 10.0 / 3 && c.y() < 20.0 / 3;
    a.element_to_agg.push_back(centre ? 1 : 0);
  }
  const CleanupReport r = cleanup(t, a);
  CHECK(r.enclosed_merged == 1);
  CHECK(a.num_aggregates == 1);
}

TEST_CASE("cleanup is idempotent and quiet on valid input") {
  const Topology t = build_topology(testing::square(10, 0.2, 6));
  for (Algorithm alg : kAllAlgorithms) {
    CoarsenConfig cfg;
    cfg.algorithm = alg;
    cfg.desired_size = 6;
    Agglomeration a = coarsen(t, cfg);
    const Agglomeration before = a;
    const CleanupReport r = cleanup(t, a);
    CHECK(r.all_zero());
    CHECK(a.element_to_agg == before.element_to_agg);
  }
}

TEST_CASE("cleanup: isolated unused region becomes an agglomerate") {
  const Topology t = build_topology(testing::square(2));
  Agglomeration a;
  a.num_aggregates = 0;
  a.element_to_agg.assign(8, -1);
  const CleanupReport r = cleanup(t, a);
  CHECK(a.num_aggregates == 1);
  CHECK(r.isolated_resolved + r.unused_attached == 8);
  check_valid(t, a);
}

TEST_CASE("statistics of a known agglomeration") {
  const Topology t = build_topology(testing::strip(4));
  const auto order = testing::path_order(t);
  Agglomeration a;
  a.num_aggregates = 2;
  a.element_to_agg.assign(8, 0);
  for (int i = 4; i < 8; ++i) a.element_to_agg[order[i]] = 1;
  const AgglomerateStats s = agglomerate_stats(t, a);
  CHECK(s.average_size == doctest::Approx(4.0));
  CHECK(s.edge_cut == 1);
  CHECK(s.size_histogram.at(4) == 2);
  const auto members = a.members();
  CHECK(members.size() == 2);
  CHECK(members.degree(1) == 4);
}
