#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "gm/sign_solver.hpp"

namespace {

using gm::Field;
using gm::FieldPair;
using gm::Grid;
using gm::ProblemParams;

ProblemParams make(double a1, double a2, double b1, double b2, double rho) {
    ProblemParams p;
    p.alpha1 = a1;
    p.alpha2 = a2;
    p.beta1 = b1;
    p.beta2 = b2;
    p.rho = rho;
    return p;
}

class SignSolver : public ::testing::Test {
protected:
    Grid g = gm::build_grid_1d(1.0, 101);
    gm::NeumannOperator op = gm::assemble_neumann_operator(g);
    gm::EigenPair eig = gm::principal_eigenpair(op);
};

TEST_F(SignSolver, ConstantOracleFromSeveralSeeds) {
    // u = sqrt(u) + 2 and v = sqrt(u) give (4, 2).
    const ProblemParams p = make(0.5, 0.5, 0, 0, 2.0);
    const gm::CertifiedRectangles cr = gm::certify_with_doubling(op, eig, p);
    ASSERT_TRUE(cr.certificate.passed());
    gm::SignSolveOptions opts;
    opts.tol = 1e-10;
    const std::vector<FieldPair> seeds{
        {Field(g, 1.0), Field(g, 1.0)},
        {Field(g, 5.5), Field(g, 0.5)},
        {Field::from_function(g, [](double x, double) { return 1.0 + 4.0 * x; }), Field(g, 3.0)},
        {Field(g, 100.0), Field(g, 100.0)},
        {Field(g, -3.0), Field::from_function(g, [](double x, double) { return std::cos(6.0 * x) + 2.0; })},
    };
    for (const FieldPair& s : seeds) {
        const gm::Solution sol = gm::solve_positive(op, p, cr.rectangles.positive, opts, &s);
        ASSERT_TRUE(sol.converged);
        EXPECT_LE((sol.u - Field(g, 4.0)).sup_norm(), 1e-8);
        EXPECT_LE((sol.v - Field(g, 2.0)).sup_norm(), 1e-8);
    }
}

TEST_F(SignSolver, NegationSolvesOddSystem) {
    const ProblemParams p = make(0.3, 0.6, 0.1, 0.25, 2.0);
    const gm::CertifiedRectangles cr = gm::certify_with_doubling(op, eig, p);
    const gm::Solution pos = gm::solve_positive(op, p, cr.rectangles.positive);
    ASSERT_TRUE(pos.converged);
    const gm::Solution neg = gm::negate(pos);
    const gm::Residual rp = gm::residual(op, p, pos.u, pos.v);
    const gm::Residual rn = gm::residual(op, p, neg.u, neg.v);
    EXPECT_LE(std::abs(rn.norm() - rp.norm()), 1e-12);
    EXPECT_TRUE(gm::check_containment(neg, cr.rectangles.negative).in_rectangle);
    EXPECT_TRUE(gm::check_containment(neg, cr.rectangles.negative).in_zero_to_upper);
}

TEST_F(SignSolver, SeparationFromSubsolution) {
    const ProblemParams p = make(0.5, 0.5, 0, 0.25, 1.0);
    const gm::CertifiedRectangles cr = gm::certify_with_doubling(op, eig, p);
    const gm::Solution pos = gm::solve_positive(op, p, cr.rectangles.positive);
    ASSERT_TRUE(pos.converged);
    const gm::SeparationReport su = gm::check_separation(pos.u, cr.aux.z, +1);
    EXPECT_TRUE(su.passed);
    EXPECT_GT(su.margin, 1.0);
    const gm::Solution neg = gm::negate(pos);
    EXPECT_NEAR(gm::check_separation(neg.v, cr.aux.z, -1).margin, gm::check_separation(pos.v, cr.aux.z, +1).margin, 0.0);
}

TEST(Separation, HandExamples) {
    const Grid g = gm::build_grid_1d(1.0, 3);
    Eigen::VectorXd u(3);
    u << 0.5, 0.2, 0.9;
    const Field z(g, 0.2);
    const gm::SeparationReport r = gm::check_separation(Field(g, u), z, +1);
    EXPECT_DOUBLE_EQ(r.margin, 0.0);
    EXPECT_EQ(r.worst_node, 1u);
    EXPECT_FALSE(r.passed);
    EXPECT_TRUE(gm::check_separation(Field(g, -u) - Field(g, 0.1), z, -1).passed);
}

TEST_F(SignSolver, ContainmentDetectsEscape) {
    const ProblemParams p = make(0.5, 0.5, 0, 0, 2.0);
    const gm::CertifiedRectangles cr = gm::certify_with_doubling(op, eig, p);
    gm::Solution s = gm::solve_positive(op, p, cr.rectangles.positive);
    EXPECT_TRUE(gm::check_containment(s, cr.rectangles.positive).in_rectangle);
    s.u = s.u + Field(g, 1e3);
    EXPECT_FALSE(gm::check_containment(s, cr.rectangles.positive).in_rectangle);
    EXPECT_FALSE(gm::check_containment(s, cr.rectangles.positive).in_zero_to_upper);
}

TEST_F(SignSolver, RelaxationMustLieInUnitInterval) {
    const ProblemParams p = make(0.5, 0.5, 0, 0, 2.0);
    const gm::CertifiedRectangles cr = gm::certify_with_doubling(op, eig, p);
    for (double w : {0.0, -0.5, 1.5}) {
        gm::SignSolveOptions opts;
        opts.relaxation = w;
        EXPECT_THROW(gm::solve_positive(op, p, cr.rectangles.positive, opts), gm::InvalidArgument);
    }
    gm::SignSolveOptions opts;
    opts.relaxation = 0.5;
    opts.newton_polish = false;
    EXPECT_TRUE(gm::solve_positive(op, p, cr.rectangles.positive, opts).converged);
}

TEST(SignSolver2D, CertifiedSetsConverge) {
    const Grid g = gm::build_grid_2d(1.0, 1.0, 21, 21);
    const gm::NeumannOperator op = gm::assemble_neumann_operator(g);
    const gm::EigenPair eig = gm::principal_eigenpair(op);
    const ProblemParams p = make(0.6, 0.7, 0.1, 0.25, 4.0);
    const gm::CertifiedRectangles cr = gm::certify_with_doubling(op, eig, p);
    ASSERT_TRUE(cr.certificate.passed());
    const gm::Solution s = gm::solve_positive(op, p, cr.rectangles.positive);
    EXPECT_TRUE(s.converged);
    EXPECT_LE(gm::residual(op, p, s.u, s.v).norm(), 1e-8);
    EXPECT_TRUE(gm::check_containment(s, cr.rectangles.positive).in_rectangle);
}

}  // namespace
