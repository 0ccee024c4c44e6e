#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gm/model.hpp"
#include "gm/newton.hpp"

namespace {

using gm::Field;
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

TEST(Params, ExponentCondition) {
    EXPECT_NO_THROW(make(0.5, 0.5, 0.2, 0.25, 1.0).validate());
    EXPECT_THROW(make(0.5, 0.5, 0.3, 0.0, 1.0).validate(), gm::InvalidArgument);   // a1 + 2 b1 = 1.1
    EXPECT_THROW(make(0.5, 0.9, 0.0, 0.25, 1.0).validate(), gm::InvalidArgument);  // a2 + b2/2 = 1.025
    EXPECT_THROW(make(0.0, 0.5, 0.0, 0.0, 1.0).validate(), gm::InvalidArgument);
    EXPECT_THROW(make(0.5, 0.5, 0.0, 0.0, 0.0).validate(), gm::InvalidArgument);
    EXPECT_DOUBLE_EQ(make(0.5, 0.9, 0.0, 0.2, 1.0).proof_side_condition(), 0.7);
    EXPECT_THROW(make(0.5, 0.5, 0.1, 0.0, 1.0).require_beta1_zero(), gm::InvalidArgument);
}

TEST(Scalars, SignConventionAtZero) {
    EXPECT_EQ(gm::sgn(0.0), 1.0);
    EXPECT_EQ(gm::sgn(-0.0), 1.0);
    EXPECT_EQ(gm::sgn(-1e-300), -1.0);
    EXPECT_DOUBLE_EQ(gm::gamma_eps(0.2, 0.0), 0.3);
    EXPECT_DOUBLE_EQ(gm::gamma_eps(0.2, -1.0), -0.1);
    EXPECT_THROW(gm::gamma_eps(1.0, 0.0), gm::InvalidArgument);
    EXPECT_THROW(gm::gamma_eps(0.0, 0.0), gm::InvalidArgument);
}

TEST(Scalars, TruncationT2Bound) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> eps_d(1e-3, 0.999), v_d(-5.0, 5.0), vbar_d(0.01, 3.0);
    for (int i = 0; i < 10000; ++i) {
        const double eps = eps_d(rng), v = v_d(rng), vbar = vbar_d(rng);
        const double t = std::abs(gm::trunc_T2(eps, v, vbar));
        ASSERT_GE(t, eps / 2.0);
        ASSERT_LE(t, 1.5 * eps + vbar);
    }
    EXPECT_DOUBLE_EQ(gm::trunc_T1(5.0, 2.0), 2.0);
    EXPECT_DOUBLE_EQ(gm::trunc_T1(-5.0, 2.0), -2.0);
    EXPECT_THROW(gm::trunc_T1(1.0, 0.0), gm::InvalidArgument);
}

TEST(Scalars, ChiHatBranches) {
    EXPECT_DOUBLE_EQ(gm::chi_hat(1.0, 2.0), 3.0);
    EXPECT_DOUBLE_EQ(gm::chi_hat(1.0, 0.5), 1.5);
    EXPECT_DOUBLE_EQ(gm::chi_hat(1.0, 0.0), 1.5);
    EXPECT_DOUBLE_EQ(gm::chi_hat(1.0, -0.5), -0.5);
    EXPECT_DOUBLE_EQ(gm::chi_hat(1.0, -3.0), -1.5);
    EXPECT_THROW(gm::chi_hat(0.0, 1.0), gm::InvalidArgument);
}

TEST(Scalars, ChiMuBranches) {
    EXPECT_DOUBLE_EQ(gm::chi_mu(0.1, 0.05), 1.0);
    EXPECT_DOUBLE_EQ(gm::chi_mu(0.1, 0.1), 1.0);
    EXPECT_DOUBLE_EQ(gm::chi_mu(0.1, -0.15), 0.5);
    EXPECT_DOUBLE_EQ(gm::chi_mu(0.1, 0.2), 0.0);
    EXPECT_DOUBLE_EQ(gm::chi_mu(0.1, 7.0), 0.0);
    EXPECT_THROW(gm::chi_mu(0.0, 1.0), gm::InvalidArgument);
}

class ModelOnGrid : public ::testing::Test {
protected:
    Grid g = gm::build_grid_1d(1.0, 21);
    gm::NeumannOperator op = gm::assemble_neumann_operator(g);
};

TEST_F(ModelOnGrid, ConstantRightHandSides) {
    const ProblemParams p = make(0.5, 0.5, 0.0, 0.0, 2.0);
    const gm::FieldPair r = gm::rhs_P(p, Field(g, 4.0), Field(g, 2.0));
    EXPECT_DOUBLE_EQ(r.u[3], 4.0);  // 4^0.5 + 2
    EXPECT_DOUBLE_EQ(r.v[3], 2.0);  // 4^0.5
    EXPECT_LE(gm::residual(op, p, Field(g, 4.0), Field(g, 2.0)).norm(), 1e-14);
}

TEST_F(ModelOnGrid, SignCouplingAndSingularity) {
    const ProblemParams p = make(0.5, 0.5, 0.0, 0.25, 1.0);
    Field u(g, -4.0), v(g, 1.0);
    const gm::FieldPair r = gm::rhs_P(p, u, v);
    EXPECT_DOUBLE_EQ(r.u[0], 3.0);   // f1(v) = +1
    EXPECT_DOUBLE_EQ(r.v[0], -2.0);  // f2(u) = -1
    v[7] = 0.0;
    try {
        gm::rhs_P(p, u, v);
        FAIL() << "expected SingularityError";
    } catch (const gm::SingularityError& e) {
        EXPECT_EQ(e.node(), 7u);
    }
    EXPECT_NO_THROW(gm::rhs_P(make(0.5, 0.5, 0.0, 0.0, 1.0), u, v));
}

TEST_F(ModelOnGrid, OddSymmetryOfResidual) {
    const ProblemParams p = make(0.4, 0.6, 0.1, 0.25, 1.5);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        Field u(g), v(g);
        for (std::size_t k = 0; k < g.size(); ++k) {
            u[k] = d(rng);
            v[k] = d(rng);
            if (v[k] == 0.0) v[k] = 1.0;
        }
        const gm::Residual a = gm::residual(op, p, u, v);
        const gm::Residual b = gm::residual(op, p, -u, -v);
        EXPECT_LE((a.r1 + b.r1).sup_norm(), 1e-13);
        EXPECT_LE((a.r2 + b.r2).sup_norm(), 1e-13);
    }
}

TEST_F(ModelOnGrid, RegularizationConvergesLinearly) {
    const ProblemParams p = make(0.5, 0.5, 0.0, 0.25, 1.0);
    const Field u = Field::from_function(g, [](double x, double) { return 0.5 + x; });
    const Field v = Field::from_function(g, [](double x, double) { return x < 0.5 ? 0.7 + x : -0.4 - x; });
    double prev = 0.0;
    for (double eps : {1e-2, 5e-3, 2.5e-3}) {
        const gm::FieldPair a = gm::rhs_Peps(p, eps, u, v);
        const gm::FieldPair b = gm::rhs_P(p, u, v);
        const double d = std::max((a.u - b.u).sup_norm(), (a.v - b.v).sup_norm());
        if (prev > 0.0) EXPECT_NEAR(d / prev, 0.5, 0.1);
        prev = d;
    }
    EXPECT_THROW(gm::rhs_Peps(make(0.5, 0.5, 0.1, 0.0, 1.0), 0.1, u, v), gm::InvalidArgument);
}

TEST_F(ModelOnGrid, DerivativesMatchFiniteDifferences) {
    const ProblemParams p = make(0.5, 0.6, 0.1, 0.25, 1.0);
    const Field u = Field::from_function(g, [](double x, double) { return 0.3 + x; });
    const Field v = Field::from_function(g, [](double x, double) { return -0.5 - x * x; });
    const Eigen::MatrixXd a = op.dense();
    gm::VectorMap f = [&](const Eigen::VectorXd& x) {
        auto [uu, vv] = gm::unstack(g, x);
        gm::Residual r = gm::residual(op, p, uu, vv);
        return gm::stack(r.r1, r.r2);
    };
    const Eigen::MatrixXd j = gm::coupled_jacobian(a, gm::rhs_derivatives(p, u, v));
    const Eigen::MatrixXd jfd = gm::fd_jacobian(f, gm::stack(u, v));
    EXPECT_LE((j - jfd).cwiseAbs().maxCoeff(), 1e-6);

    const ProblemParams q = make(0.5, 0.6, 0.0, 0.25, 1.0);
    gm::VectorMap fe = [&](const Eigen::VectorXd& x) {
        auto [uu, vv] = gm::unstack(g, x);
        gm::Residual r = gm::residual_regularized(op, q, 0.1, uu, vv);
        return gm::stack(r.r1, r.r2);
    };
    const Eigen::MatrixXd je = gm::coupled_jacobian(a, gm::rhs_derivatives(q, u, v, 0.1));
    EXPECT_LE((je - gm::fd_jacobian(fe, gm::stack(u, v))).cwiseAbs().maxCoeff(), 1e-6);
}

TEST_F(ModelOnGrid, ManufacturedForcingIsExact) {
    const ProblemParams p = make(0.5, 0.5, 0.0, 0.25, 1.0);
    const Field u = Field::from_function(g, [](double x, double) { return std::cos(3.0 * x); });
    const Field v = Field::from_function(g, [](double x, double) { return 0.2 + x; });
    const gm::FieldPair c = gm::manufacture(op, p, u, v);
    EXPECT_LE(gm::residual(op, p, u, v, &c).norm(), 1e-13);
    const gm::FieldPair ce = gm::manufacture_regularized(op, p, 0.25, u, v);
    EXPECT_LE(gm::residual_regularized(op, p, 0.25, u, v, &ce).norm(), 1e-13);
}

TEST_F(ModelOnGrid, HomotopyEndpoints) {
    const ProblemParams p = make(0.5, 0.5, 0.0, 0.0, 1.0);
    const Field phi(g, 1.0);
    gm::TruncationEnv env{0.5, Field(g, 4.0), Field(g, 4.0), phi, 1.0};
    EXPECT_NO_THROW(env.validate());

    const Field u = Field::from_function(g, [](double x, double) { return x - 0.5; });
    const gm::FieldPair f0 = gm::rhs_F(p, env, 0.0, u, u);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_DOUBLE_EQ(f0.u[k], std::max(u[k], 0.0) + 1.0);

    // chi_hat branch: (2/3) lambda1 (3/2) phi = phi.
    const gm::FieldPair n0 = gm::rhs_Fhat(p, env, 1.0, 0.0, phi, phi);
    EXPECT_LE((n0.u - phi).sup_norm(), 1e-15);

    // At t = 1 both homotopies reduce to the truncated system.
    const Field w(g, 1.0);
    const gm::FieldPair a = gm::rhs_F(p, env, 1.0, w, w);
    const gm::FieldPair b = gm::rhs_Fhat(p, env, 1.0, 1.0, w, w);
    EXPECT_LE((a.u - b.u).sup_norm(), 0.0);
    EXPECT_LE((a.v - b.v).sup_norm(), 0.0);
    EXPECT_THROW(gm::rhs_F(p, env, 1.5, w, w), gm::InvalidArgument);
}

TEST_F(ModelOnGrid, LiteralHomotopyExponents) {
    ProblemParams p = make(0.3, 0.6, 0.0, 0.0, 1.0);
    gm::TruncationEnv env{0.5, Field(g, 10.0), Field(g, 10.0), Field(g, 1.0), 1.0};
    const Field u(g, 4.0);
    const double standard = gm::rhs_F(p, env, 1.0, u, u).v[0];
    p.literal_homotopy_exponents = true;
    const double literal = gm::rhs_F(p, env, 1.0, u, u).v[0];
    EXPECT_DOUBLE_EQ(standard, std::pow(4.0, 0.6));
    EXPECT_DOUBLE_EQ(literal, std::pow(4.0, 0.3));
}

}  // namespace
