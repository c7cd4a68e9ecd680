#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <memory>

#include "shapefeat/pde_solver.hpp"
#include "shapefeat/synth.hpp"
#include "test_util.hpp"

using namespace shapefeat;

namespace {

Eigen::MatrixXd dense(const CsrMatrix& m) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<long>(m.rows), static_cast<long>(m.rows));
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k)
            d(static_cast<long>(r), static_cast<long>(m.col[k])) = m.val[k];
    return d;
}

Eigen::VectorXd as_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

} // namespace

TEST(PdeParameters, DerivedQuantities) {
    const PdeParameters p(0.2, 0.2);
    EXPECT_DOUBLE_EQ(p.a_tilde(), 0.2 * 0.04);
    EXPECT_DOUBLE_EQ(p.alpha(), 20.0);
    EXPECT_NEAR(p.lambda(), 50.0, 1e-12);
    for (double h0 : {0.05, 0.3, 2.0})
        for (double a : {0.01, 0.2, 1.0}) {
            const PdeParameters q(h0, a);
            EXPECT_NEAR(q.a_tilde() * q.lambda() * q.lambda() / q.alpha(), 1.0, 1e-12);
            EXPECT_NEAR(q.lambda(), 2.0 / (a * h0), 1e-9 * q.lambda());
        }
}

TEST(PdeParameters, RejectsNonPositive) {
    EXPECT_THROW(PdeParameters(0.2, 0.0), InputError);
    EXPECT_THROW(PdeParameters(0.0, 0.2), InputError);
    EXPECT_THROW(PdeParameters(-1.0, 0.2), InputError);
    EXPECT_THROW(PdeParameters(0.2, std::nan("")), InputError);
    EXPECT_THROW(PdeParameters::with_damping(0.2, 0.2, 0.0), InputError);
}

TEST(ElementMatrices, ReferenceValues) {
    const double e = 0.3;
    const ElementMatrices em(e);
    for (int a = 0; a < 4; ++a) {
        EXPECT_NEAR(em.stiffness[a][a], 2.0 / 3.0, 1e-14);
        EXPECT_NEAR(em.stiffness[a][(a + 1) % 4], -1.0 / 6.0, 1e-14);
        EXPECT_NEAR(em.stiffness[a][(a + 2) % 4], -1.0 / 3.0, 1e-14);
        EXPECT_NEAR(em.mass[a][a], 4 * e * e / 36, 1e-15);
        EXPECT_NEAR(em.mass[a][(a + 1) % 4], 2 * e * e / 36, 1e-15);
        EXPECT_NEAR(em.mass[a][(a + 2) % 4], e * e / 36, 1e-15);
    }
    const std::array<double, 4> sx{-e / 2, e / 2, e / 2, -e / 2};
    const std::array<double, 4> sy{-e / 2, -e / 2, e / 2, e / 2};
    for (int a = 0; a < 4; ++a) {
        EXPECT_NEAR(em.source[0][a], sx[a], 1e-15);
        EXPECT_NEAR(em.source[1][a], sy[a], 1e-15);
    }
}

TEST(Assemble, SingleBlackElementSource) {
    auto f = synth::blank(3, 3, 0.5);
    f(1, 1) = 1;
    const FemGrid g(f, 1);
    const auto sys = assemble(g, PdeParameters(0.2, 0.2));
    ASSERT_EQ(sys.matrix.rows, 4u);
    // free nodes (1,1), (2,1), (1,2), (2,2) are the corners of the black element
    const std::vector<double> rx{-0.25, 0.25, -0.25, 0.25};
    const std::vector<double> ry{-0.25, -0.25, 0.25, 0.25};
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_NEAR(sys.rhs[0][k], rx[k], 1e-15);
        EXPECT_NEAR(sys.rhs[1][k], ry[k], 1e-15);
    }
}

TEST(Assemble, WhiteImageHasZeroSource) {
    const auto f = synth::blank(6, 5, 0.1);
    const auto sys = assemble(FemGrid(f, 2), PdeParameters(0.3, 0.2));
    for (int axis = 0; axis < 2; ++axis)
        for (double v : sys.rhs[axis]) EXPECT_EQ(v, 0.0);
}

TEST(Assemble, SourceVanishesAwayFromBlackElements) {
    const auto f = random_field(9, 7, 0.1, 0.15, 11);
    const FemGrid g(f, 2);
    const auto sys = assemble(g, PdeParameters(0.3, 0.2));
    for (int j = 1; j < g.ny(); ++j)
        for (int i = 1; i < g.nx(); ++i) {
            bool touches_black = false;
            for (int ej = j - 1; ej <= j; ++ej)
                for (int ei = i - 1; ei <= i; ++ei) touches_black |= g.element_chi(ei, ej) != 0;
            if (touches_black) continue;
            const auto k = static_cast<std::size_t>(g.free_index(i, j));
            EXPECT_EQ(sys.rhs[0][k], 0.0);
            EXPECT_EQ(sys.rhs[1][k], 0.0);
        }
}

TEST(Assemble, BlackImageHasNoDamping) {
    const auto f = CharacteristicField::filled(4, 4, 1.0, 1);
    const FemGrid g(f, 1);
    const auto a = assemble(g, PdeParameters::with_damping(0.2, 0.2, 1.0));
    const auto b = assemble(g, PdeParameters::with_damping(0.2, 0.2, 1000.0));
    EXPECT_EQ(a.matrix.val, b.matrix.val);
    // pure a~ times the 9-point Q1 Laplacian
    const double at = 0.2 * 0.04;
    EXPECT_NEAR(a.matrix.at(0, 0), at * 8.0 / 3.0, 1e-15);
    EXPECT_NEAR(a.matrix.at(0, 1), -at / 3.0, 1e-15);
    EXPECT_NEAR(a.matrix.at(0, 4), -at / 3.0, 1e-15);
}

TEST(Assemble, SymmetricPositiveDefinite) {
    for (unsigned seed = 0; seed < 4; ++seed) {
        const auto f = random_field(6, 5, 0.1, 0.4, seed);
        const auto sys = assemble(FemGrid(f, 2), PdeParameters(0.3, 0.2));
        EXPECT_EQ(sys.matrix.max_relative_asymmetry(), 0.0);
        const auto d = dense(sys.matrix);
        EXPECT_LT((d - d.transpose()).cwiseAbs().maxCoeff(), 1e-15);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d);
        EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
    }
}

TEST(Assemble, NineEntryStencil) {
    const auto f = random_field(5, 5, 0.1, 0.5, 2);
    const FemGrid g(f, 1);
    const auto sys = assemble(g, PdeParameters(0.3, 0.2));
    for (int j = 1; j < g.ny(); ++j)
        for (int i = 1; i < g.nx(); ++i) {
            const auto r = static_cast<std::size_t>(g.free_index(i, j));
            int expected = 0;
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) expected += !g.is_boundary(i + di, j + dj);
            EXPECT_EQ(static_cast<int>(sys.matrix.row_ptr[r + 1] - sys.matrix.row_ptr[r]), expected);
        }
}

TEST(Solve, MatchesDenseSolve) {
    const auto f = random_field(7, 6, 0.1, 0.35, 5);
    const auto sys = assemble(FemGrid(f, 2), PdeParameters(0.3, 0.2));
    const auto state = solve(sys, 1e-12);
    const auto d = dense(sys.matrix);
    const auto& g = *sys.grid;
    for (int axis = 0; axis < 2; ++axis) {
        const Eigen::VectorXd ref = d.ldlt().solve(as_eigen(sys.rhs[axis]));
        double worst = 0.0;
        for (int j = 1; j < g.ny(); ++j)
            for (int i = 1; i < g.nx(); ++i)
                worst = std::max(worst, std::abs(state.node_value(axis, i, j) -
                                                 ref(g.free_index(i, j))));
        EXPECT_LT(worst, 1e-9 * ref.cwiseAbs().maxCoeff());
        EXPECT_LE(state.report().relative_residual[axis], 1e-12);
        // residual recomputed from scratch
        std::vector<double> x(sys.rhs[axis].size());
        for (int j = 1; j < g.ny(); ++j)
            for (int i = 1; i < g.nx(); ++i)
                x[static_cast<std::size_t>(g.free_index(i, j))] = state.node_value(axis, i, j);
        const Eigen::VectorXd r = d * as_eigen(x) - as_eigen(sys.rhs[axis]);
        EXPECT_LE(r.norm(), 1e-12 * as_eigen(sys.rhs[axis]).norm() * 1.0001);
    }
}

TEST(Solve, DirichletRimIsZero) {
    const auto f = random_field(6, 6, 0.1, 0.5, 8);
    const auto state = solve(assemble(FemGrid(f, 2), PdeParameters(0.3, 0.2)), 1e-10);
    for (auto idx : state.grid().boundary_nodes()) {
        EXPECT_EQ(state.component(0)[idx], 0.0);
        EXPECT_EQ(state.component(1)[idx], 0.0);
    }
}

TEST(Solve, WhiteImageGivesZeroWithoutIterating) {
    const auto state = solve_state(synth::blank(8, 8, 0.1), PdeParameters(0.3, 0.2));
    EXPECT_EQ(state.report().iterations[0], 0);
    EXPECT_EQ(state.report().iterations[1], 0);
    for (int axis = 0; axis < 2; ++axis)
        for (double v : state.component(axis)) EXPECT_EQ(v, 0.0);
}

TEST(Solve, IterationCapRaisesConvergenceError) {
    const auto f = synth::vertical_stripe(20, 20, 0.05, 8, 4);
    const auto sys = assemble(FemGrid(f, 2), PdeParameters(0.3, 0.2));
    try {
        solve(sys, 1e-10, 1);
        FAIL() << "expected a convergence error";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.final_residual(), 1e-10);
        EXPECT_EQ(e.category(), ErrorCategory::convergence);
    }
}

TEST(Solve, IndefiniteMatrixRaisesDefinitenessError) {
    const auto f = synth::vertical_stripe(10, 10, 0.05, 4, 2);
    auto sys = assemble(FemGrid(f, 1), PdeParameters(0.3, 0.2));
    // keep the diagonal positive but make the operator indefinite
    for (std::size_t r = 0; r < sys.matrix.rows; ++r)
        for (std::size_t k = sys.matrix.row_ptr[r]; k < sys.matrix.row_ptr[r + 1]; ++k)
            if (sys.matrix.col[k] != r) sys.matrix.val[k] *= 40.0;
    EXPECT_THROW(solve(sys, 1e-10), DefinitenessError);

    for (std::size_t r = 0; r < sys.matrix.rows; ++r)
        for (std::size_t k = sys.matrix.row_ptr[r]; k < sys.matrix.row_ptr[r + 1]; ++k)
            if (sys.matrix.col[k] == r) sys.matrix.val[k] = -1.0;
    EXPECT_THROW(solve(sys, 1e-10), DefinitenessError);
}

TEST(Solve, RejectsBadTolerance) {
    const auto sys = assemble(FemGrid(synth::blank(3, 3, 0.1), 1), PdeParameters(0.3, 0.2));
    EXPECT_THROW(solve(sys, 0.0), InputError);
    EXPECT_THROW(solve(sys, 1.0), InputError);
}

TEST(Solve, EnergyIdentity) {
    const auto f = random_field(12, 10, 0.05, 0.3, 21);
    const auto state = solve_state(f, PdeParameters(0.3, 0.2));
    for (int axis = 0; axis < 2; ++axis) {
        const auto eb = energy_balance(state, axis);
        EXPECT_GT(eb.bilinear, 0.0);
        EXPECT_NEAR(eb.bilinear, eb.source, 1e-8 * eb.source);
    }
}

TEST(Solve, DecaysAwayFromBlackDomain) {
    const PdeParameters params(0.3, 0.2);
    const auto f = synth::vertical_stripe(60, 60, 0.05, 27, 6);
    SolveOptions so;
    so.padding = 0.0;
    const auto state = solve_state(f, params, so);
    const auto& g = state.grid();
    const double left = 27 * 0.05, right = 33 * 0.05;
    double smax = 0.0;
    for (double v : state.component(0)) smax = std::max(smax, std::abs(v));
    double worst_far = 0.0;
    for (int j = 1; j < g.ny(); ++j)
        for (int i = 1; i < g.nx(); ++i) {
            const double x = g.node_position(i, j).x;
            const double d = std::max(left - x, x - right);
            const double s = std::abs(state.node_value(0, i, j));
            if (d >= 5.0 / params.lambda()) {
                EXPECT_LE(s, (std::exp(-params.lambda() * d) * 1.05 + 1e-9) * smax) << i << ',' << j;
            }
            if (d >= 14.0 / params.lambda()) worst_far = std::max(worst_far, s);
        }
    EXPECT_LE(worst_far, 1e-6 * smax);
}

TEST(Solve, ExtremumLiesInsideOrNextToBlack) {
    for (unsigned seed = 0; seed < 5; ++seed) {
        const auto f = random_field(10, 10, 0.05, 0.2, 100 + seed);
        const auto state = solve_state(f, PdeParameters(0.3, 0.2));
        const auto& g = state.grid();
        for (int axis = 0; axis < 2; ++axis) {
            const auto& s = state.component(axis);
            std::size_t arg = 0;
            for (std::size_t k = 0; k < s.size(); ++k)
                if (std::abs(s[k]) > std::abs(s[arg])) arg = k;
            const int i = static_cast<int>(arg % (g.nx() + 1));
            const int j = static_cast<int>(arg / (g.nx() + 1));
            bool near_black = false;
            for (int ej = std::max(0, j - 2); ej < std::min(g.ny(), j + 2); ++ej)
                for (int ei = std::max(0, i - 2); ei < std::min(g.nx(), i + 2); ++ei)
                    near_black |= g.element_chi(ei, ej) != 0;
            EXPECT_TRUE(near_black) << "seed " << seed << " axis " << axis;
        }
    }
}

TEST(StateField, InterpolationAndGradientOfLinearField) {
    const auto f = synth::blank(4, 3, 0.25);
    for (int sub : {1, 2, 3}) {
        auto grid = std::make_shared<const FemGrid>(f, sub);
        std::array<std::vector<double>, 2> nodal;
        for (auto& v : nodal) v.resize(grid->node_count());
        for (int j = 0; j <= grid->ny(); ++j)
            for (int i = 0; i <= grid->nx(); ++i) {
                const auto p = grid->node_position(i, j);
                nodal[0][grid->node_index(i, j)] = 2.0 * p.x - 3.0 * p.y + 1.0;
                nodal[1][grid->node_index(i, j)] = 0.5 * p.y;
            }
        const StateField st(grid, PdeParameters(0.3, 0.2), nodal, {});
        for (Point2 p : {Point2{0.1, 0.1}, Point2{0.5, 0.25}, Point2{0.125, 0.375}, Point2{1.0, 0.75}}) {
            const auto v = st.value_at(p);
            EXPECT_NEAR(v[0], 2.0 * p.x - 3.0 * p.y + 1.0, 1e-12);
            EXPECT_NEAR(v[1], 0.5 * p.y, 1e-12);
            const auto gr = st.gradient_at(p);
            EXPECT_NEAR(gr[0][0], 2.0, 1e-12);
            EXPECT_NEAR(gr[0][1], -3.0, 1e-12);
            EXPECT_NEAR(gr[1][0], 0.0, 1e-12);
            EXPECT_NEAR(gr[1][1], 0.5, 1e-12);
        }
        EXPECT_THROW(st.value_at({1.5, 0.1}), InputError);
    }
}
