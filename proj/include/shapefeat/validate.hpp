#pragma once

// Executable acceptance criteria. Each check builds its own synthetic input,
// runs the full pipeline and compares against a closed-form or symmetry
// reference at a fixed tolerance.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "shapefeat/features.hpp"
#include "shapefeat/image_io.hpp"
#include "shapefeat/oracle_1d.hpp"
#include "shapefeat/pde_solver.hpp"
#include "shapefeat/synth.hpp"

namespace shapefeat::validate {

struct Options {
    /// Multiplies the damping coefficient 4/a. Anything but 1 is a deliberate mutation.
    double damping_factor = 1.0;
    double tol = 1e-10;
};

struct CriterionResult {
    std::string id;   ///< "AC1".."AC8"
    std::string name; ///< short selector used by --only
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

namespace detail {

inline std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

inline PdeParameters make_params(double h0, double a, const Options& o) {
    return o.damping_factor == 1.0 ? PdeParameters(h0, a)
                                   : PdeParameters::with_damping(h0, a, o.damping_factor * 4.0 / a);
}

/// A vertical stripe that crosses the whole reference domain (no ends), i.e. the
/// 2D extrusion of the 1D bar problem. The image is the unpadded central part.
struct ExtrudedStripe {
    CharacteristicField image;
    CharacteristicField domain;
};

inline ExtrudedStripe extruded_stripe(int width, int height, double pixel_size, int col_begin,
                                      int col_count, double margin) {
    const int pad = padding_pixels(margin, pixel_size);
    ExtrudedStripe s{synth::vertical_stripe(width, height, pixel_size, col_begin, col_count), {}};
    const int w = width + 2 * pad;
    const int h = height + 2 * pad;
    auto dom = synth::vertical_stripe(w, h, pixel_size, col_begin + pad, col_count);
    s.domain = CharacteristicField(w, h, w * pixel_size, dom.chi(), -pad * pixel_size,
                                   -pad * pixel_size);
    return s;
}

inline StateField solve_on_domain(const CharacteristicField& domain,
                                  const CharacteristicField& image, const PdeParameters& params,
                                  int subdivisions, double tol) {
    auto grid = std::make_shared<const FemGrid>(domain, subdivisions);
    auto state = solve(assemble(grid, params), tol);
    state.set_image(image);
    return state;
}

inline double r_squared(const std::vector<double>& x, const std::vector<double>& y,
                        double* slope_out = nullptr) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (slope_out) *slope_out = sxy / sxx;
    return sxy * sxy / (sxx * syy);
}

inline double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace detail

/// AC1: FEM stripe vs the infinite-domain 1D solution.
inline CriterionResult oracle_equivalence(const Options& o = {}) {
    CriterionResult res{"AC1", "oracle", false, {}, 0.0};
    const double h0 = 0.2, a = 0.2, pixel = 0.01;
    const auto params = detail::make_params(h0, a, o);
    const int sub = subdivisions_for(pixel, a * h0 / 4.0);
    // 1x1 image, stripe x in [0.4, 0.6]
    const auto stripe = detail::extruded_stripe(100, 100, pixel, 40, 20, params.default_padding());
    const auto state = detail::solve_on_domain(stripe.domain, stripe.image, params, sub, o.tol);
    const PdeParameters exact_params(h0, a);
    const auto limit = oracle1d::solve_limit(0.4, 0.2, h0, a);
    const double lam = exact_params.lambda();

    const auto& g = state.grid();
    double err = 0.0, ref = 0.0, s1max = 0.0, s2max = 0.0;
    for (int j = 0; j <= g.ny(); ++j) {
        for (int i = 0; i <= g.nx(); ++i) {
            const auto p = g.node_position(i, j);
            if (p.y < -1e-9 || p.y > 1.0 + 1e-9) continue;
            s1max = std::max(s1max, std::abs(state.node_value(0, i, j)));
            s2max = std::max(s2max, std::abs(state.node_value(1, i, j)));
            if (p.x < 0.4 - 5.0 / lam - 1e-9 || p.x > 0.6 + 5.0 / lam + 1e-9) continue;
            const double e = limit(p.x);
            err = std::max(err, std::abs(state.node_value(0, i, j) - e));
            ref = std::max(ref, std::abs(e));
        }
    }
    const auto maps = compute_all(state);
    double sum = 0.0;
    int n = 0;
    for (int r = 0; r < stripe.image.height(); ++r)
        for (int c = 0; c < stripe.image.width(); ++c)
            if (stripe.image(c, r)) {
                sum += maps.thickness(c, r);
                ++n;
            }
    const double mean_hf = sum / n;
    const double rel = err / ref;
    const double s2ratio = s2max / s1max;
    const double hf_err = std::abs(mean_hf - 0.2) / 0.2;
    res.passed = rel <= 1e-2 && s2ratio <= 1e-3 && hf_err <= 0.02;
    res.detail = "relLinf(s1)=" + detail::fmt("%.3e", rel) + " (<=1e-2), max|s2|/max|s1|=" +
                 detail::fmt("%.2e", s2ratio) + " (<=1e-3), mean h_f=" +
                 detail::fmt("%.5f", mean_hf) + " (0.2 +-2%)";
    return res;
}

/// AC2: per-bar averages of 1/f_h and h_f are linear in bar thickness.
inline CriterionResult bars_linearity(const Options& o = {}) {
    CriterionResult res{"AC2", "bars", false, {}, 0.0};
    const double h0 = 0.3, a = 0.2;
    const auto params = detail::make_params(h0, a, o);
    synth::BarsLayout layout;
    const auto image = synth::bars_image(layout);
    SolveOptions so;
    so.subdivisions = subdivisions_for(layout.pixel_size, a * h0 / 4.0);
    so.tol = o.tol;
    const auto maps = compute_all(solve_state(image, params, so));

    std::vector<double> inv, hf;
    for (std::size_t b = 0; b < layout.thickness.size(); ++b) {
        const int w = static_cast<int>(std::lround(layout.thickness[b] / layout.pixel_size));
        double si = 0.0, sh = 0.0;
        int n = 0;
        for (int r = 0; r < image.height(); ++r) {
            const double y = image.geometry().pixel_center(layout.col_begin[b], r).y;
            if (y < 1.5 || y > 6.5) continue;
            for (int c = layout.col_begin[b]; c < layout.col_begin[b] + w; ++c) {
                si += 1.0 / maps.inv_thickness(c, r);
                sh += maps.thickness(c, r);
                ++n;
            }
        }
        inv.push_back(si / n);
        hf.push_back(sh / n);
    }
    double slope_inv = 0.0, slope_hf = 0.0;
    const double r2_inv = detail::r_squared(layout.thickness, inv, &slope_inv);
    const double r2_hf = detail::r_squared(layout.thickness, hf, &slope_hf);
    res.passed = r2_inv >= 0.999 && r2_hf >= 0.999 && std::abs(slope_hf - 1.0) <= 0.05;
    res.detail = "R2(1/f_h)=" + detail::fmt("%.6f", r2_inv) + ", R2(h_f)=" +
                 detail::fmt("%.6f", r2_hf) + " (>=0.999), slope(h_f)=" +
                 detail::fmt("%.4f", slope_hf) + " (1 +-5%)";
    return res;
}

/// AC3: the closed-form thickness is the identity in h.
inline CriterionResult thickness_identity(const Options& = {}) {
    CriterionResult res{"AC3", "thickness", false, {}, 0.0};
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> len(0.05, 5.0), par(0.01, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const double h = len(rng), h0 = len(rng), a = par(rng);
        const double t = oracle1d::analytic_thickness(0.0, h, h0, a);
        worst = std::max(worst, std::abs(t - h) / h);
    }
    res.passed = worst <= 1e-12;
    res.detail = "max rel |h_f - h| over 100 triples=" + detail::fmt("%.2e", worst) + " (<=1e-12)";
    return res;
}

/// Parameter sweeps built on the three 1D reference cases (K=0, L=1, h0=0.2).
inline std::vector<oracle1d::Config> reference_1d_cases() {
    std::vector<oracle1d::Config> out;
    for (double h : {0.1, 0.2, 0.3, 0.4}) out.push_back({0.0, 1.0, 0.2, h, 0.2, 0.2});
    for (double p : {0.2, 0.3, 0.4, 0.5, 0.6}) out.push_back({0.0, 1.0, p, 0.2, 0.2, 0.2});
    for (double a : {0.1, 0.2, 0.5, 1.0}) out.push_back({0.0, 1.0, 0.4, 0.2, 0.2, a});
    return out;
}

/// AC4: closed-form coefficients agree with the interface solve; interface continuity.
inline CriterionResult oracle_consistency(const Options& = {}) {
    CriterionResult res{"AC4", "consistency", false, {}, 0.0};
    double coef_gap = 0.0, cont_gap = 0.0;
    for (const auto& cfg : reference_1d_cases()) {
        const auto closed = oracle1d::solve_finite(cfg);
        const auto linear = oracle1d::solve_finite_linear(cfg);
        const auto rc = closed.raw_coefficients();
        const auto rl = linear.raw_coefficients();
        for (std::size_t i = 0; i < 6; ++i) {
            const double scale = std::max(std::abs(rc[i]), std::abs(rl[i]));
            if (scale > 0.0) coef_gap = std::max(coef_gap, std::abs(rc[i] - rl[i]) / scale);
        }
        const double s_scale = std::abs(closed(cfg.p + cfg.h));
        for (double x : {cfg.p, cfg.p + cfg.h}) {
            const double left = closed(std::nextafter(x, -1e300));
            const double right = closed(x);
            cont_gap = std::max(cont_gap, std::abs(left - right) / s_scale);
            cont_gap = std::max(cont_gap, std::abs(closed.flux(x, true) - closed.flux(x, false)));
        }
        cont_gap = std::max(cont_gap, std::abs(closed(cfg.K)) / s_scale);
        cont_gap = std::max(cont_gap, std::abs(closed(cfg.L)) / s_scale);
    }
    res.passed = coef_gap <= 1e-8 && cont_gap <= 1e-9;
    res.detail = "closed vs 6x6 rel gap=" + detail::fmt("%.2e", coef_gap) +
                 " (<=1e-8), continuity gap=" + detail::fmt("%.2e", cont_gap) + " (<=1e-9)";
    return res;
}

/// Asymmetric test shape in a 50x50 raster of pixel 0.02.
inline CharacteristicField asymmetric_shape() {
    auto f = synth::blank(50, 50, 0.02);
    synth::fill_rect(f, 10, 26, 12, 20);
    synth::fill_rect(f, 10, 16, 20, 36);
    synth::fill_rect(f, 20, 28, 28, 34);
    return f;
}

/// AC5: vanishing field, mirror antisymmetry, translation equivariance.
inline CriterionResult symmetry_properties(const Options& o = {}) {
    CriterionResult res{"AC5", "symmetry", false, {}, 0.0};
    const auto params = detail::make_params(0.2, 0.2, o);
    SolveOptions so;
    so.tol = o.tol;

    const auto white = solve_state(synth::blank(50, 50, 0.02), params, so);
    const double white_max =
        std::max(detail::max_abs(white.component(0)), detail::max_abs(white.component(1)));

    const auto base_img = asymmetric_shape();
    const auto base = solve_state(base_img, params, so);
    const auto mirrored = solve_state(synth::mirror_x(base_img), params, so);
    const auto& g = base.grid();
    double mirror_gap = 0.0;
    for (int j = 0; j <= g.ny(); ++j) {
        for (int i = 0; i <= g.nx(); ++i) {
            const int mi = g.nx() - i;
            mirror_gap = std::max(mirror_gap, std::abs(mirrored.node_value(0, mi, j) +
                                                       base.node_value(0, i, j)));
            mirror_gap = std::max(mirror_gap, std::abs(mirrored.node_value(1, mi, j) -
                                                       base.node_value(1, i, j)));
        }
    }

    const int dc = 6, dr = -4;
    const auto shifted = solve_state(synth::shift(base_img, dc, dr), params, so);
    const int di = dc * g.subdivisions(), dj = -dr * g.subdivisions();
    double shift_gap = 0.0;
    for (int j = 0; j <= g.ny(); ++j) {
        for (int i = 0; i <= g.nx(); ++i) {
            const int si = i + di, sj = j + dj;
            if (si < 0 || sj < 0 || si > g.nx() || sj > g.ny()) continue;
            for (int axis = 0; axis < 2; ++axis)
                shift_gap = std::max(shift_gap, std::abs(shifted.node_value(axis, si, sj) -
                                                         base.node_value(axis, i, j)));
        }
    }
    const auto mb = compute_all(base);
    const auto ms = compute_all(shifted);
    for (int r = 0; r < base_img.height(); ++r) {
        for (int c = 0; c < base_img.width(); ++c) {
            const int sc = c + dc, sr = r + dr;
            if (sc < 0 || sr < 0 || sc >= base_img.width() || sr >= base_img.height()) continue;
            shift_gap = std::max(shift_gap, std::abs(ms.inv_thickness(sc, sr) - mb.inv_thickness(c, r)));
            shift_gap = std::max(shift_gap, std::abs(ms.thickness(sc, sr) - mb.thickness(c, r)));
            shift_gap = std::max(shift_gap, std::abs(ms.skeleton(sc, sr) - mb.skeleton(c, r)));
        }
    }
    res.passed = white_max <= 1e-8 && mirror_gap <= 1e-6 && shift_gap <= 1e-6;
    res.detail = "white |s|inf=" + detail::fmt("%.1e", white_max) + " (<=1e-8), mirror gap=" +
                 detail::fmt("%.2e", mirror_gap) + " (<=1e-6), shift gap=" +
                 detail::fmt("%.2e", shift_gap) + " (<=1e-6)";
    return res;
}

/// AC6: skeleton of a centred stripe lies on its centre line.
inline CriterionResult skeleton_localization(const Options& o = {}) {
    CriterionResult res{"AC6", "skeleton", false, {}, 0.0};
    const double h0 = 0.3, a = 0.2, pixel = 0.02;
    const auto params = detail::make_params(h0, a, o);
    // 51x51 image; stripe columns 18..32 (width 0.3), centre column 25 = image centre.
    const auto stripe = detail::extruded_stripe(51, 51, pixel, 18, 15, params.default_padding());
    const int sub = subdivisions_for(pixel, params.default_element_size());
    const auto maps = compute_all(detail::solve_on_domain(stripe.domain, stripe.image, params, sub, o.tol));
    const int centre = 25;
    int stray = 0, marked_centre = 0, rows = stripe.image.height();
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < stripe.image.width(); ++c) {
            if (maps.skeleton(c, r) == 0.0) continue;
            if (std::abs(c - centre) > 1) ++stray;
        }
        if (maps.skeleton(centre, r) != 0.0) ++marked_centre;
    }
    const double coverage = static_cast<double>(marked_centre) / rows;
    res.passed = stray == 0 && coverage >= 0.9;
    res.detail = "off-centre skeleton pixels=" + std::to_string(stray) +
                 " (0), centre-line coverage=" + detail::fmt("%.3f", coverage) + " (>=0.9)";
    return res;
}

/// AC7: an axis-aligned and a 45-degree square share their interior thickness.
inline CriterionResult rotation_invariance(const Options& o = {}) {
    CriterionResult res{"AC7", "invariance", false, {}, 0.0};
    const auto params = detail::make_params(0.3, 0.2, o);
    auto image = synth::blank(160, 80, 0.01);
    const double pi = std::acos(-1.0);
    synth::draw_square(image, 0.4, 0.4, 0.3, 0.0);
    synth::draw_square(image, 1.2, 0.4, 0.3, pi / 4.0);
    SolveOptions so;
    so.tol = o.tol;
    const auto maps = compute_all(solve_state(image, params, so));
    auto disc_mean = [&](double cx, double cy) {
        double s = 0.0;
        int n = 0;
        for (int r = 0; r < image.height(); ++r)
            for (int c = 0; c < image.width(); ++c) {
                const auto p = image.geometry().pixel_center(c, r);
                if (std::hypot(p.x - cx, p.y - cy) <= 0.1 && image(c, r)) {
                    s += maps.thickness(c, r);
                    ++n;
                }
            }
        return s / n;
    };
    const double m0 = disc_mean(0.4, 0.4);
    const double m45 = disc_mean(1.2, 0.4);
    const double gap = std::abs(m0 - m45) / (0.5 * (m0 + m45));
    res.passed = gap <= 0.03;
    res.detail = "mean h_f axis-aligned=" + detail::fmt("%.5f", m0) + ", rotated=" +
                 detail::fmt("%.5f", m45) + ", rel gap=" + detail::fmt("%.4f", gap) + " (<=0.03)";
    return res;
}

/// AC8: matrix symmetry, discrete energy identity, insensitivity to padding.
inline CriterionResult solver_health(const Options& o = {}) {
    CriterionResult res{"AC8", "health", false, {}, 0.0};
    const auto params = detail::make_params(0.2, 0.2, o);
    const auto image = asymmetric_shape();
    const int sub = resolve_subdivisions(image, params, 0);
    auto grid = std::make_shared<const FemGrid>(pad_field(image, params.default_padding()), sub);
    const auto system = assemble(grid, params);
    const double asym = system.matrix.max_relative_asymmetry();

    auto state = solve(system, o.tol);
    state.set_image(image);
    double energy_gap = 0.0;
    for (int axis = 0; axis < 2; ++axis) {
        const auto e = energy_balance(state, axis);
        energy_gap = std::max(energy_gap, std::abs(e.bilinear - e.source) / std::abs(e.source));
    }

    SolveOptions wide;
    wide.tol = o.tol;
    wide.padding = 2.0 * params.default_padding();
    const auto doubled = solve_state(image, params, wide);
    double pad_gap = 0.0, scale = 0.0;
    for (int r = 0; r < image.height(); ++r)
        for (int c = 0; c < image.width(); ++c) {
            const auto p = image.geometry().pixel_center(c, r);
            const auto v1 = state.value_at(p);
            const auto v2 = doubled.value_at(p);
            for (int axis = 0; axis < 2; ++axis) {
                pad_gap = std::max(pad_gap, std::abs(v1[axis] - v2[axis]));
                scale = std::max(scale, std::abs(v1[axis]));
            }
        }
    pad_gap /= scale;
    res.passed = asym <= 1e-12 && energy_gap <= 10.0 * o.tol && pad_gap <= 1e-6;
    res.detail = "asymmetry=" + detail::fmt("%.1e", asym) + " (<=1e-12), energy gap=" +
                 detail::fmt("%.2e", energy_gap) + " (<=" + detail::fmt("%.0e", 10.0 * o.tol) +
                 "), padding gap=" + detail::fmt("%.2e", pad_gap) + " (<=1e-6)";
    return res;
}

struct Criterion {
    std::string id;
    std::string name;
    std::function<CriterionResult(const Options&)> run;
};

inline std::vector<Criterion> all_criteria() {
    return {{"AC1", "oracle", oracle_equivalence},       {"AC2", "bars", bars_linearity},
            {"AC3", "thickness", thickness_identity},    {"AC4", "consistency", oracle_consistency},
            {"AC5", "symmetry", symmetry_properties},    {"AC6", "skeleton", skeleton_localization},
            {"AC7", "invariance", rotation_invariance},  {"AC8", "health", solver_health}};
}

/// Runs the selected criteria (all when `only` is empty); entries of `only` match
/// either the id or the short name.
inline std::vector<CriterionResult> run(const std::vector<std::string>& only = {},
                                        const Options& options = {}) {
    std::vector<CriterionResult> out;
    for (const auto& c : all_criteria()) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end() &&
            std::find(only.begin(), only.end(), c.name) == only.end())
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        CriterionResult r;
        try {
            r = c.run(options);
        } catch (const std::exception& e) {
            r = {c.id, c.name, false, std::string("exception: ") + e.what(), 0.0};
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(std::move(r));
    }
    return out;
}

/// Wall-clock budgets in seconds for criteria that carry one.
inline double time_budget(const std::string& id) {
    if (id == "AC1") return 10.0;
    if (id == "AC2") return 60.0;
    return 0.0;
}

inline void print(std::FILE* out, const std::vector<CriterionResult>& results) {
    for (const auto& r : results) {
        const double budget = time_budget(r.id);
        const bool in_time = budget == 0.0 || r.seconds < budget;
        std::fprintf(out, "[%s] %s %-12s %s  (%.2fs%s)\n", r.passed && in_time ? "PASS" : "FAIL",
                     r.id.c_str(), r.name.c_str(), r.detail.c_str(), r.seconds,
                     budget > 0.0 ? (" / budget " + detail::fmt("%.0fs", budget)).c_str() : "");
    }
}

inline bool all_passed(const std::vector<CriterionResult>& results) {
    return std::all_of(results.begin(), results.end(), [](const CriterionResult& r) {
        const double budget = time_budget(r.id);
        return r.passed && (budget == 0.0 || r.seconds < budget);
    });
}

} // namespace shapefeat::validate
