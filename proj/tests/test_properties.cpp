// Randomized invariants over small meshes.

#include <gtest/gtest.h>

#include "property_checks.hpp"

using namespace fffsim::testing;

namespace {

constexpr int kCases = 1000;

}  // namespace

TEST(Properties, ConductanceRowsSumToZero) { EXPECT_EQ(check_conductance_rows(kCases), ""); }

TEST(Properties, CapacitanceTotalsRhoCV) { EXPECT_EQ(check_capacitance_totals(kCases), ""); }

TEST(Properties, ConstraintWeightsSumToOne) { EXPECT_EQ(check_constraint_weights(kCases), ""); }

TEST(Properties, VolumeConservedAcrossCoarsening) { EXPECT_EQ(check_volume_across_coarsening(kCases), ""); }

TEST(Properties, StepResidualBelowTolerance) { EXPECT_EQ(check_step_residual(kCases), ""); }
