#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "shapefeat/features.hpp"
#include "shapefeat/oracle_1d.hpp"
#include "shapefeat/synth.hpp"
#include "shapefeat/validate.hpp"
#include "test_util.hpp"

using namespace shapefeat;

namespace {

double mean_over(const ScalarRaster& r, const CharacteristicField& f, int row_begin, int row_end) {
    double s = 0.0;
    int n = 0;
    for (int row = row_begin; row < row_end; ++row)
        for (int c = 0; c < f.width(); ++c)
            if (f(c, row)) {
                s += r(c, row);
                ++n;
            }
    return s / n;
}

/// 51 x 51 stripe without ends, 15 columns wide and centred on column 25.
const StateField& extruded_stripe_state() {
    static const StateField state = [] {
        const PdeParameters params(0.3, 0.2);
        const auto s = validate::detail::extruded_stripe(51, 51, 0.02, 18, 15,
                                                         params.default_padding());
        return validate::detail::solve_on_domain(
            s.domain, s.image, params, subdivisions_for(0.02, params.default_element_size()), 1e-10);
    }();
    return state;
}

} // namespace

TEST(ShapeTensor, UniaxialGradient) {
    const auto t = shape_tensor({{{3.0, 0.0}, {0.0, 0.0}}});
    EXPECT_DOUBLE_EQ(t.eigenvalues[0], 0.0);
    EXPECT_DOUBLE_EQ(t.eigenvalues[1], 3.0);
    EXPECT_NEAR(std::abs(t.eigenvectors[1][0]), 1.0, 1e-15);
    EXPECT_NEAR(t.eigenvectors[1][1], 0.0, 1e-15);
}

TEST(ShapeTensor, AntisymmetricPartIsDiscarded) {
    const auto t = shape_tensor({{{0.0, 2.0}, {-2.0, 0.0}}});
    EXPECT_EQ(t.s12, 0.0);
    EXPECT_EQ(t.eigenvalues[0], 0.0);
    EXPECT_EQ(t.eigenvalues[1], 0.0);
    EXPECT_EQ(t.eigenvectors[0], (Vec2{1.0, 0.0}));
    EXPECT_EQ(t.eigenvectors[1], (Vec2{0.0, 1.0}));
}

TEST(ShapeTensor, ShearGradient) {
    const double g = 1.5;
    const auto t = shape_tensor({{{0.0, g}, {g, 0.0}}});
    EXPECT_NEAR(t.eigenvalues[0], -g, 1e-15);
    EXPECT_NEAR(t.eigenvalues[1], g, 1e-15);
    const double r = std::numbers::sqrt2 / 2;
    EXPECT_NEAR(t.eigenvectors[1][0], r, 1e-15);
    EXPECT_NEAR(t.eigenvectors[1][1], r, 1e-15);
    EXPECT_NEAR(std::abs(t.eigenvectors[0][0]), r, 1e-15);
    EXPECT_NEAR(t.eigenvectors[0][0], -t.eigenvectors[0][1], 1e-15);
}

TEST(ShapeTensor, RandomGradientInvariants) {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const Mat2 g{{{u(rng), u(rng)}, {u(rng), u(rng)}}};
        const auto t = shape_tensor(g);
        const double scale = 1.0 + std::abs(g[0][0]) + std::abs(g[0][1]) + std::abs(g[1][0]) +
                             std::abs(g[1][1]);
        EXPECT_LE(t.eigenvalues[0], t.eigenvalues[1]);
        EXPECT_NEAR(t.eigenvalues[0] + t.eigenvalues[1], g[0][0] + g[1][1], 1e-13 * scale);
        EXPECT_NEAR(t.trace(), g[0][0] + g[1][1], 1e-13 * scale);
        const auto& x0 = t.eigenvectors[0];
        const auto& x1 = t.eigenvectors[1];
        EXPECT_NEAR(x0[0] * x0[0] + x0[1] * x0[1], 1.0, 1e-14);
        EXPECT_NEAR(x1[0] * x1[0] + x1[1] * x1[1], 1.0, 1e-14);
        EXPECT_NEAR(x0[0] * x1[0] + x0[1] * x1[1], 0.0, 1e-14);
        for (int k = 0; k < 2; ++k) {
            const auto& x = t.eigenvectors[k];
            EXPECT_NEAR(t.s11 * x[0] + t.s12 * x[1], t.eigenvalues[k] * x[0], 1e-12 * scale);
            EXPECT_NEAR(t.s12 * x[0] + t.s22 * x[1], t.eigenvalues[k] * x[1], 1e-12 * scale);
        }
        const Vec2 s{u(rng), u(rng)};
        const auto st = t.transform(s);
        EXPECT_NEAR(std::hypot(st[0], st[1]), std::hypot(s[0], s[1]), 1e-12 * scale);
    }
}

TEST(ShapeTensor, NonFiniteGradientThrows) {
    EXPECT_THROW(shape_tensor({{{std::nan(""), 0.0}, {0.0, 0.0}}}), NumericError);
    EXPECT_THROW(shape_tensor({{{0.0, 0.0}, {0.0, HUGE_VAL}}}), NumericError);
}

TEST(RecoverGradient, LinearStateIsExactAtPixelCentres) {
    const auto f = synth::blank(5, 4, 0.2);
    for (int sub : {1, 2}) {
        auto grid = std::make_shared<const FemGrid>(f, sub);
        std::array<std::vector<double>, 2> nodal;
        for (auto& v : nodal) v.resize(grid->node_count());
        for (int j = 0; j <= grid->ny(); ++j)
            for (int i = 0; i <= grid->nx(); ++i) {
                const auto p = grid->node_position(i, j);
                nodal[0][grid->node_index(i, j)] = 0.7 * p.x + 0.2 * p.y;
                nodal[1][grid->node_index(i, j)] = -0.4;
            }
        const auto gf = recover_gradient(StateField(grid, PdeParameters(0.3, 0.2), nodal, {}));
        for (const auto& g : gf.gradient) {
            EXPECT_NEAR(g[0][0], 0.7, 1e-12);
            EXPECT_NEAR(g[0][1], 0.2, 1e-12);
            EXPECT_NEAR(g[1][0], 0.0, 1e-12);
            EXPECT_NEAR(g[1][1], 0.0, 1e-12);
        }
        for (const auto& s : gf.state) EXPECT_NEAR(s[1], -0.4, 1e-15);
    }
}

TEST(Thickness, FormulaGuardAndFlags) {
    const CharacteristicField chi(4, 1, 4.0, {1, 1, 1, 0});
    ScalarRaster inv{chi.geometry(), {1.0 / 1.2, 0.0, 10.0, 5.0}};
    const auto r = thickness(inv, chi, 0.2, 0.2, 1e-9);
    EXPECT_NEAR(r.thickness.values[0], 0.2, 1e-15);
    EXPECT_EQ(r.thickness.values[1], 0.0);
    EXPECT_EQ(r.degenerate[1], 1);
    EXPECT_EQ(r.thickness.values[2], 0.0); // 1/f_h < a would be negative
    EXPECT_EQ(r.degenerate[2], 1);
    EXPECT_EQ(r.thickness.values[3], 0.0); // outside the black domain
    EXPECT_EQ(r.degenerate[3], 0);
    EXPECT_EQ(r.degenerate[0], 0);
    EXPECT_THROW(thickness(inv, chi, 0.2, 0.2, 0.0), InputError);
}

TEST(Features, WhiteImageGivesZeroMaps) {
    const auto maps = compute_all(solve_state(synth::blank(10, 10, 0.05), PdeParameters(0.3, 0.2)));
    for (double v : maps.inv_thickness.values) EXPECT_EQ(v, 0.0);
    for (double v : maps.thickness.values) EXPECT_EQ(v, 0.0);
    for (double v : maps.skeleton.values) EXPECT_EQ(v, 0.0);
    for (auto d : maps.normal.defined) EXPECT_EQ(d, 0);
}

TEST(Features, StripeMatchesLimitSolution) {
    const auto& state = extruded_stripe_state();
    const auto maps = compute_all(state);
    const auto& f = state.image();
    const auto lim = oracle1d::solve_limit(18 * 0.02, 15 * 0.02, 0.3, 0.2);
    const auto tensors = shape_tensor_field(recover_gradient(state));
    for (int r = 0; r < f.height(); ++r)
        for (int c = 19; c < 32; ++c) {
            const auto& t = tensors.tensor[f.geometry().index(c, r)];
            EXPECT_NEAR(t.s11 / lim.c3(), 1.0, 0.02);
            EXPECT_NEAR(maps.inv_thickness(c, r), 0.09 * lim.c3(), 0.02 * 0.09 * lim.c3());
            EXPECT_NEAR(maps.thickness(c, r), 0.3, 0.02 * 0.3);
        }
}

TEST(Features, StripeOrientation) {
    const auto& state = extruded_stripe_state();
    const auto maps = compute_all(state);
    // right half points to +x, left half to -x, the mid-line is undefined
    for (int r = 0; r < 51; ++r) {
        for (int c = 26; c < 33; ++c) {
            ASSERT_TRUE(maps.normal.is_defined(c, r));
            EXPECT_NEAR(maps.normal(c, r)[0], 1.0, 1e-3);
            EXPECT_NEAR(maps.tangent(c, r)[1], 1.0, 1e-3);
        }
        for (int c = 18; c < 25; ++c) EXPECT_NEAR(maps.normal(c, r)[0], -1.0, 1e-3);
        EXPECT_FALSE(maps.normal.is_defined(25, r));
    }
}

TEST(Features, OrientationVectorsAreUnitAndOrthogonal) {
    const auto f = random_field(20, 20, 0.05, 0.3, 77);
    const auto maps = compute_all(solve_state(f, PdeParameters(0.3, 0.2)));
    int defined = 0;
    for (std::size_t i = 0; i < maps.normal.values.size(); ++i) {
        if (!maps.normal.defined[i]) continue;
        ++defined;
        const auto& n = maps.normal.values[i];
        const auto& t = maps.tangent.values[i];
        EXPECT_NEAR(std::hypot(n[0], n[1]), 1.0, 1e-12);
        EXPECT_NEAR(std::hypot(t[0], t[1]), 1.0, 1e-12);
        EXPECT_NEAR(n[0] * t[0] + n[1] * t[1], 0.0, 1e-12);
        EXPECT_NEAR(n[0] * t[1] - n[1] * t[0], 1.0, 1e-12);
    }
    EXPECT_GT(defined, 0);
}

TEST(Features, MapsVanishOutsideBlackDomain) {
    const auto f = random_field(16, 12, 0.05, 0.3, 31);
    const auto maps = compute_all(solve_state(f, PdeParameters(0.3, 0.2)));
    for (std::size_t i = 0; i < f.chi().size(); ++i) {
        EXPECT_GE(maps.thickness.values[i], 0.0);
        EXPECT_TRUE(maps.skeleton.values[i] == 0.0 || maps.skeleton.values[i] == 1.0);
        if (f.chi()[i]) continue;
        EXPECT_EQ(maps.inv_thickness.values[i], 0.0);
        EXPECT_EQ(maps.thickness.values[i], 0.0);
        EXPECT_EQ(maps.skeleton.values[i], 0.0);
    }
}

TEST(Features, MirrorFlipsNormals) {
    const auto f = validate::asymmetric_shape();
    const PdeParameters params(0.3, 0.2);
    const auto a = compute_all(solve_state(f, params));
    const auto b = compute_all(solve_state(synth::mirror_x(f), params));
    const int w = f.width();
    for (int r = 0; r < f.height(); ++r)
        for (int c = 0; c < w; ++c) {
            EXPECT_NEAR(a.thickness(c, r), b.thickness(w - 1 - c, r), 1e-8);
            ASSERT_EQ(a.normal.is_defined(c, r), b.normal.is_defined(w - 1 - c, r));
            if (!a.normal.is_defined(c, r)) continue;
            EXPECT_NEAR(a.normal(c, r)[0], -b.normal(w - 1 - c, r)[0], 1e-8);
            EXPECT_NEAR(a.normal(c, r)[1], b.normal(w - 1 - c, r)[1], 1e-8);
        }
}

TEST(Features, QuarterTurnEquivariance) {
    const auto f = validate::asymmetric_shape();
    const auto g = synth::rotate90(f);
    const PdeParameters params(0.3, 0.2);
    const auto a = compute_all(solve_state(f, params));
    const auto b = compute_all(solve_state(g, params));
    const int n = f.width();
    ASSERT_EQ(n, f.height());
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            // pixel (c, r) lands on (r, n-1-c); vectors turn by +90 degrees
            const int rc = r, rr = n - 1 - c;
            ASSERT_EQ(f(c, r), g(rc, rr));
            EXPECT_NEAR(a.thickness(c, r), b.thickness(rc, rr), 1e-7);
            EXPECT_EQ(a.skeleton(c, r), b.skeleton(rc, rr));
            if (!a.normal.is_defined(c, r)) continue;
            EXPECT_NEAR(-a.normal(c, r)[1], b.normal(rc, rr)[0], 1e-7);
            EXPECT_NEAR(a.normal(c, r)[0], b.normal(rc, rr)[1], 1e-7);
        }
}

TEST(Skeleton, PulseIsClosedInterval) {
    EXPECT_EQ(pulse(0.5, 0.5), 1.0);
    EXPECT_EQ(pulse(-0.5, 0.5), 1.0);
    EXPECT_EQ(pulse(0.0, 0.5), 1.0);
    EXPECT_EQ(pulse(std::nextafter(0.5, 1.0), 0.5), 0.0);
}

TEST(Skeleton, StripeMidLine) {
    const auto maps = compute_all(extruded_stripe_state());
    for (int r = 0; r < 51; ++r)
        for (int c = 0; c < 51; ++c) EXPECT_EQ(maps.skeleton(c, r), c == 25 ? 1.0 : 0.0) << c;
}

TEST(Skeleton, FiniteStripeAwayFromEnds) {
    // 15 x 41 pixel stripe; rows within one stripe width of the ends are excluded
    auto f = synth::blank(51, 61, 0.02);
    synth::fill_rect(f, 18, 33, 10, 51);
    const auto maps = compute_all(solve_state(f, PdeParameters(0.3, 0.2)));
    for (int r = 25; r < 36; ++r)
        for (int c = 18; c < 33; ++c) EXPECT_EQ(maps.skeleton(c, r), c == 25 ? 1.0 : 0.0);
}

TEST(Skeleton, SquareFollowsDiagonals) {
    auto f = synth::blank(41, 41, 0.02);
    synth::fill_rect(f, 8, 33, 8, 33); // 25 x 25 square centred on pixel 20
    const auto maps = compute_all(solve_state(f, PdeParameters(0.3, 0.2)));
    int on = 0, off_diagonal = 0;
    for (int r = 0; r < 41; ++r)
        for (int c = 0; c < 41; ++c) {
            if (maps.skeleton(c, r) == 0.0) continue;
            ++on;
            const int dx = c - 20, dy = r - 20;
            if (std::min(std::abs(dx - dy), std::abs(dx + dy)) > 2) ++off_diagonal;
        }
    EXPECT_GT(on, 20);
    EXPECT_EQ(off_diagonal, 0);
}

TEST(Thickness, IsolatedBarWidth) {
    // single 0.4-wide bar on 0.05 pixels, sampled across its central section
    const PdeParameters params(0.3, 0.2);
    auto f = synth::blank(24, 60, 0.05);
    synth::fill_rect(f, 8, 16, 5, 55);
    SolveOptions so;
    so.subdivisions = subdivisions_for(0.05, params.a() * params.h0() / 4);
    const auto maps = compute_all(solve_state(f, params, so));
    EXPECT_NEAR(mean_over(maps.thickness, f, 20, 40), 0.4, 0.02 * 0.4);
}
