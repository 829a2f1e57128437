#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fffsim/coarsen.hpp"
#include "helpers.hpp"

using namespace fffsim;
using namespace fffsim::testing;

namespace {

ThermalState linear_state(const HexMesh& m) {
  ThermalState s;
  // trilinear and equal to the bed temperature on z = 0
  for (const auto& l : m.nodes) s.T.push_back(60.0 + l.z * (5.0 + 0.3 * l.x - 0.2 * l.y));
  return s;
}

}  // namespace

TEST(Coarsen, CandidateNeedsBuiltLayers) {
  const auto m = make_mesh(dense_part(4, 4, 4), {0, 0, 0, 0}, 4);
  EXPECT_FALSE(next_candidate(m, 1, 3).has_value());
  const auto c = next_candidate(m, 2, 3);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->first, 0);
  EXPECT_EQ(c->level, 1);
  EXPECT_FALSE(next_candidate(m, 4, 0).has_value());
}

TEST(Coarsen, CandidateSkipsMixedLevels) {
  const auto m = make_mesh(dense_part(4, 4, 8), {1, 0, 0, 0, 0}, 6);
  const auto c = next_candidate(m, 6, 3);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->first, 1);
  EXPECT_EQ(m.bands[1].z0, 2);
}

TEST(Coarsen, PotentialMeshKeepsActivityAndVolume) {
  auto m = make_mesh(dense_part(4, 4, 4), {0, 0, 0, 0}, 3);
  const auto pot = build_potential_mesh(m, {0, 1});
  EXPECT_EQ(pot.bands.front(), (Band{0, 2, 1}));
  EXPECT_NEAR(pot.total_volume(), m.total_volume(), 1e-22);
  for (const auto& e : pot.elements) {
    if (e.level == 1) {
      EXPECT_TRUE(e.active);
      EXPECT_EQ(e.material, ElementMaterial::effective);
    } else {
      EXPECT_EQ(e.active, e.z0 < 3);
    }
  }
  EXPECT_THROW(build_potential_mesh(m, {0, 2}), MeshError);
  EXPECT_THROW(build_potential_mesh(m, {3, 1}), MeshError);
}

TEST(Coarsen, TrilinearFieldIsAccepted) {
  const auto m = make_mesh(dense_part(4, 4, 4), {0, 0, 0, 0}, 4);
  const auto s = linear_state(m);
  const CandidateBand c{0, 1};
  const auto d = check_layer(m, s, build_potential_mesh(m, c), c, 1e-12, 1.0);
  EXPECT_TRUE(d.accept);
  EXPECT_LT(d.worst_error, 1e-13);
  EXPECT_GE(d.worst_node, 0);
  EXPECT_EQ(d.band_lo, 0);
  EXPECT_EQ(d.band_hi, 2);
}

TEST(Coarsen, BumpIsRejectedAtItsNode) {
  const auto m = make_mesh(dense_part(4, 4, 4), {0, 0, 0, 0}, 4);
  auto s = linear_state(m);
  const NodeId bump = m.node_at(1, 1, 1);
  s.T[bump] += 2.0;
  const CandidateBand c{0, 1};
  const auto pot = build_potential_mesh(m, c);
  const auto d = check_layer(m, s, pot, c, 0.01, 1.0);
  EXPECT_FALSE(d.accept);
  EXPECT_EQ(d.worst_node, bump);
  EXPECT_NEAR(d.worst_error, 2.0 / s.T[bump], 1e-12);
  EXPECT_TRUE(check_layer(m, s, pot, c, 0.05, 1.0).accept);
}

TEST(Coarsen, FloorGuardsSmallTemperatures) {
  const auto m = make_mesh(dense_part(2, 2, 2), {0, 0}, 2);
  ThermalState s;
  s.T.assign(m.node_count(), 0.0);
  s.T[static_cast<std::size_t>(m.node_at(1, 1, 1))] = 0.5;
  const CandidateBand c{0, 1};
  const auto d = check_layer(m, s, build_potential_mesh(m, c), c, 1.0, 1.0);
  EXPECT_NEAR(d.worst_error, 0.5, 1e-15);
}

TEST(Coarsen, MapSolutionCopiesCoincidingNodes) {
  const auto m = make_mesh(dense_part(4, 4, 4), {0, 0, 0, 0}, 4);
  const auto s = linear_state(m);
  const auto pot = build_potential_mesh(m, {0, 1});
  const auto mapped = map_solution(m, s, pot, ProcessParameters{});
  for (std::size_t n = 0; n < pot.node_count(); ++n) {
    const auto& l = pot.nodes[n];
    EXPECT_NEAR(mapped.T[n], 60.0 + l.z * (5.0 + 0.3 * l.x - 0.2 * l.y), 1e-12);
  }
  EXPECT_EQ(mapped.locks.size(), 9u);
}

TEST(Coarsen, MapSolutionStartsNewLayersAtAmbient) {
  auto part = dense_part(2, 2, 3);
  const auto m = make_mesh(part, {0, 0}, 2);
  auto s = linear_state(m);
  const auto next = make_mesh(part, {0, 0, 0}, 2);
  const auto mapped = map_solution(m, s, next, ProcessParameters{});
  for (std::size_t n = 0; n < next.node_count(); ++n)
    if (next.nodes[n].z == 3) EXPECT_DOUBLE_EQ(mapped.T[n], 25.0);
}

TEST(Coarsen, PassChainsAcceptedBands) {
  const auto m = make_mesh(dense_part(4, 4, 8), std::vector<int>(8, 0), 8);
  const auto s = linear_state(m);
  CoarseningParameters params;
  params.epsilon = 1e-9;
  const auto pass = coarsening_pass(m, s, 8, params, ProcessParameters{}, 3);
  ASSERT_TRUE(pass.mesh.has_value());
  EXPECT_GE(pass.accepted, 3);
  for (const auto& d : pass.decisions) {
    EXPECT_TRUE(d.accept);
    EXPECT_EQ(d.step, 3);
  }
  EXPECT_NEAR(pass.mesh->total_volume(), m.total_volume(), 1e-21);
  EXPECT_GE(pass.mesh->bands.front().level, 2);
  EXPECT_EQ(pass.state.T.size(), pass.mesh->node_count());
}

TEST(Coarsen, PassStopsAtFirstRejection) {
  const auto m = make_mesh(dense_part(4, 4, 8), std::vector<int>(8, 0), 8);
  auto s = linear_state(m);
  s.T[static_cast<std::size_t>(m.node_at(1, 1, 1))] += 5.0;
  CoarseningParameters params;
  const auto pass = coarsening_pass(m, s, 8, params, ProcessParameters{}, 0);
  ASSERT_EQ(pass.decisions.size(), 1u);
  EXPECT_FALSE(pass.decisions[0].accept);
  EXPECT_FALSE(pass.mesh.has_value());
  EXPECT_EQ(pass.accepted, 0);
}

TEST(Coarsen, DecisionLog) {
  const auto path = std::filesystem::temp_directory_path() / "fffsim_decisions.csv";
  write_decision_log({{1, 0, 2, 1, true, 0.001, 7}, {1, 2, 4, 1, false, 0.2, 9}}, path.string());
  std::ifstream in(path);
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(header, "step,band_lo,band_hi,level,verdict,worst_err,worst_node");
  EXPECT_EQ(first.substr(0, 15), "1,0,2,1,accept,");
  EXPECT_EQ(second.substr(0, 15), "1,2,4,1,reject,");
  std::filesystem::remove(path);
}
