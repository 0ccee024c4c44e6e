#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "gm/degree.hpp"
#include "gm/nodal_solver.hpp"
#include "gm/subsup.hpp"

namespace {

using gm::Field;
using gm::Grid;
using gm::MapKind;
using gm::ProblemParams;
using gm::Region;

ProblemParams params() {
    ProblemParams p;
    p.alpha1 = 0.5;
    p.alpha2 = 0.5;
    p.beta1 = 0.0;
    p.beta2 = 0.0;
    p.rho = 1.0;
    return p;
}

gm::DegreeOptions fast_options(std::uint64_t seed = 1) {
    gm::DegreeOptions o;
    o.n_starts = 32;
    o.rng_seed = seed;
    o.threads = 1;
    return o;
}

TEST(Degree, IdentityAndReflection) {
    const gm::VectorMap id = [](const Eigen::VectorXd& x) { return x; };
    const gm::DegreeEstimate e = gm::estimate_degree(id, Region::symmetric(4, 1.0), fast_options());
    EXPECT_EQ(e.value, 1);
    ASSERT_EQ(e.zeros.size(), 1u);
    EXPECT_LE(e.zeros[0].x.cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(e.boundary_margin, 1.0, 1e-15);

    const gm::VectorMap neg = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(-x); };
    EXPECT_EQ(gm::estimate_degree(neg, Region::symmetric(5, 1.0), fast_options()).value, -1);
}

TEST(Degree, NoZerosGivesZero) {
    const gm::VectorMap shifted = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.array() + 3.0); };
    const gm::DegreeEstimate e = gm::estimate_degree(shifted, Region::symmetric(3, 1.0), fast_options());
    EXPECT_EQ(e.value, 0);
    EXPECT_TRUE(e.zeros.empty());
}

TEST(Degree, BoundaryZeroIsInadmissible) {
    const gm::VectorMap f = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.array() - 1.0); };
    try {
        gm::estimate_degree(f, Region::symmetric(2, 1.0), fast_options());
        FAIL() << "expected AdmissibilityError";
    } catch (const gm::AdmissibilityError& e) {
        EXPECT_LE(e.margin(), 1e-10);
    }
}

TEST(Degree, UnknownLimitAndRegionValidation) {
    const gm::VectorMap id = [](const Eigen::VectorXd& x) { return x; };
    EXPECT_THROW(gm::estimate_degree(id, Region::symmetric(gm::kMaxDegreeUnknowns + 1, 1.0), fast_options()),
                 gm::InvalidArgument);
    Region bad = Region::symmetric(2, 1.0);
    bad.hole_lower = Eigen::VectorXd::Constant(2, -2.0);
    bad.hole_upper = Eigen::VectorXd::Constant(2, 0.5);
    EXPECT_THROW(bad.validate(), gm::InvalidArgument);
    Region annulus = Region::symmetric(2, 1.0);
    annulus.hole_lower = Eigen::VectorXd::Constant(2, -0.5);
    annulus.hole_upper = Eigen::VectorXd::Constant(2, 0.5);
    EXPECT_FALSE(annulus.contains(Eigen::VectorXd::Zero(2)));
    EXPECT_TRUE(annulus.contains(Eigen::VectorXd::Constant(2, 0.75)));
    EXPECT_FALSE(annulus.contains(Eigen::VectorXd::Constant(2, 1.0)));
}

TEST(NoSolutionWitness, HoldsOnSeveralGrids) {
    for (const Grid& g : {gm::build_grid_1d(1.0, 8), gm::build_grid_1d(2.0, 101), gm::build_grid_2d(1.0, 3.0, 9, 17)}) {
        const gm::NoSolutionWitness w = gm::check_no_solution_t0(gm::assemble_neumann_operator(g));
        EXPECT_TRUE(w.no_solution);
        EXPECT_NEAR(w.magnitude, g.volume(), 1e-13);
        EXPECT_LE(w.identity_defect, 1e-13);
        EXPECT_EQ(w.nodes, g.size());
    }
}

class CompactMaps : public ::testing::Test {
protected:
    Grid g = gm::build_grid_1d(1.0, 8);
    gm::NeumannOperator op = gm::assemble_neumann_operator(g);
    gm::EigenPair eig = gm::principal_eigenpair(op);
    ProblemParams p = params();
    gm::CertifiedRectangles cr = gm::certify_with_doubling(op, eig, p);
    Field upper = cr.constants.C * cr.aux.y;
    gm::TruncationEnv env{0.5, upper, upper, eig.phi1, 1.0};
    double radius = gm::NodalRegion{cr.aux.z, cr.aux.z, cr.constants.C * cr.aux.y.sup_norm(), p.rho}.radius(0.5);

    gm::CompactMap map(MapKind kind, double t) const { return gm::make_compact_map(op, kind, p, env, eig.lambda1, t); }
};

TEST_F(CompactMaps, HandEvaluations) {
    const gm::FieldPair h0 = gm::map_eval(map(MapKind::H, 0.0), Field(g, 0.0), Field(g, 0.0));
    EXPECT_LE((h0.u - Field(g, -1.0)).sup_norm(), 1e-12);
    EXPECT_LE((h0.v - Field(g, -1.0)).sup_norm(), 1e-12);

    const gm::FieldPair n0 = gm::map_eval(map(MapKind::N, 0.0), eig.phi1, eig.phi1);
    EXPECT_LE(n0.u.sup_norm(), 1e-12);
    EXPECT_LE(n0.v.sup_norm(), 1e-12);
    // chi_hat puts -phi1/3 and every c phi1 with c >= 1 on the zero set.
    for (double c : {-1.0 / 3.0, 2.0}) {
        const gm::FieldPair z = gm::map_eval(map(MapKind::N, 0.0), c * eig.phi1, c * eig.phi1);
        EXPECT_LE(std::max(z.u.sup_norm(), z.v.sup_norm()), 1e-12) << c;
    }
    EXPECT_THROW(map(MapKind::H, 1.5), gm::InvalidArgument);
    EXPECT_EQ(map(MapKind::N, 0.0).unknowns(), 16u);
}

TEST_F(CompactMaps, HomotopyStartHasDegreeZero) {
    const gm::DegreeEstimate e =
        gm::estimate_degree(gm::as_vector_map(map(MapKind::H, 0.0)), Region::symmetric(16, radius), fast_options());
    EXPECT_EQ(e.value, 0);
    EXPECT_TRUE(e.zeros.empty());
}

TEST_F(CompactMaps, SweepMarginsArePositiveForH) {
    const gm::CompactMap base = map(MapKind::H, 0.0);
    std::vector<double> t_grid;
    for (int i = 0; i <= 4; ++i) t_grid.push_back(0.25 * i);
    const gm::SweepTrace tr =
        gm::homotopy_sweep([&](double t) { return gm::as_vector_map(base.at(t)); }, t_grid, Region::symmetric(16, radius));
    ASSERT_EQ(tr.margin.size(), 5u);
    EXPECT_GT(tr.min_margin, 0.0);
    EXPECT_DOUBLE_EQ(tr.min_margin, *std::min_element(tr.margin.begin(), tr.margin.end()));
    EXPECT_THROW(gm::homotopy_sweep([&](double t) { return gm::as_vector_map(base.at(t)); }, {}, Region::symmetric(16, radius)),
                 gm::InvalidArgument);
}

TEST_F(CompactMaps, EndpointEstimateIndependentOfSeed) {
    const gm::VectorMap h1 = gm::as_vector_map(map(MapKind::H, 1.0));
    const gm::DegreeEstimate a = gm::estimate_degree(h1, Region::symmetric(16, radius), fast_options(1));
    const gm::DegreeEstimate b = gm::estimate_degree(h1, Region::symmetric(16, radius), fast_options(99));
    EXPECT_EQ(a.value, b.value);
    ASSERT_EQ(a.zeros.size(), b.zeros.size());
    for (std::size_t i = 0; i < a.zeros.size(); ++i) {
        EXPECT_LE((a.zeros[i].x - b.zeros[i].x).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LE(a.zeros[i].residual, 1e-10);
    }
}

}  // namespace
