#pragma once

// Closed-form solution of the 1D problem
//
//   (a~ s')' - alpha s = 0   on [K, p) and (p+h, L]
//   (a~ s' - 1)'       = 0   on [p, p+h]
//   s(K) = s(L) = 0, s and a~ s' - chi continuous at p and p+h.
//
// Every exponential is evaluated relative to the nearest interface, so the
// solution stays finite even when lambda (L - K) exceeds the double range.
// In that shifted basis the three branches read
//
//   left:   l1 e^{-lambda (p - x)}   + l2 e^{-lambda (x - K)}
//   middle: m1 (x - p) + m2
//   right:  r1 e^{-lambda (x - q)}   + r2 e^{-lambda (L - x)},      q = p + h.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "shapefeat/error.hpp"
#include "shapefeat/image_io.hpp"
#include "shapefeat/pde_solver.hpp"

namespace shapefeat::oracle1d {

struct Config {
    double K = 0.0;
    double L = 1.0;
    double p = 0.4;
    double h = 0.2;
    double h0 = 0.2;
    double a = 0.2;

    PdeParameters params() const { return {h0, a}; }

    void validate() const {
        if (!(h > 0.0)) throw InputError("bar width h must be positive");
        if (!(K < p)) throw InputError("require K < p");
        if (!(p + h < L)) throw InputError("require p + h < L");
        (void)params();
    }
};

/// Coefficients in the shifted basis described at the top of this header.
struct ShiftedCoefficients {
    double l1 = 0.0, l2 = 0.0;
    double m1 = 0.0, m2 = 0.0;
    double r1 = 0.0, r2 = 0.0;

    std::array<double, 6> as_array() const { return {l1, l2, m1, m2, r1, r2}; }
};

class Solution {
public:
    Solution(Config config, ShiftedCoefficients coeffs) : cfg_(config), c_(coeffs) {
        const auto params = cfg_.params();
        a_tilde_ = params.a_tilde();
        lambda_ = params.lambda();
    }

    const Config& config() const { return cfg_; }
    const ShiftedCoefficients& shifted() const { return c_; }
    double lambda() const { return lambda_; }
    double a_tilde() const { return a_tilde_; }

    double operator()(double x) const {
        const double q = cfg_.p + cfg_.h;
        if (x < cfg_.p)
            return c_.l1 * std::exp(-lambda_ * (cfg_.p - x)) +
                   c_.l2 * std::exp(-lambda_ * (x - cfg_.K));
        if (x <= q) return c_.m1 * (x - cfg_.p) + c_.m2;
        return c_.r1 * std::exp(-lambda_ * (x - q)) + c_.r2 * std::exp(-lambda_ * (cfg_.L - x));
    }

    /// One-sided derivative: `left_limit` selects the branch to the left of x.
    double derivative(double x, bool left_limit) const {
        const double q = cfg_.p + cfg_.h;
        const bool in_left = left_limit ? x <= cfg_.p : x < cfg_.p;
        const bool in_right = left_limit ? x > q : x >= q;
        if (in_left)
            return lambda_ * (c_.l1 * std::exp(-lambda_ * (cfg_.p - x)) -
                              c_.l2 * std::exp(-lambda_ * (x - cfg_.K)));
        if (in_right)
            return lambda_ * (-c_.r1 * std::exp(-lambda_ * (x - q)) +
                              c_.r2 * std::exp(-lambda_ * (cfg_.L - x)));
        return c_.m1;
    }

    /// Flux a~ s' - chi on the chosen side of x.
    double flux(double x, bool left_limit) const {
        const double q = cfg_.p + cfg_.h;
        const bool black = left_limit ? (x > cfg_.p && x <= q) : (x >= cfg_.p && x < q);
        return a_tilde_ * derivative(x, left_limit) - (black ? 1.0 : 0.0);
    }

    /// Coefficients c1..c6 of s = c1 e^{lx} + c2 e^{-lx} | c3 x + c4 | c5 e^{lx} + c6 e^{-lx}.
    /// Throws NumericError when they are not representable.
    std::array<double, 6> raw_coefficients() const {
        const double q = cfg_.p + cfg_.h;
        const std::array<double, 6> raw{
            c_.l1 * std::exp(-lambda_ * cfg_.p),      c_.l2 * std::exp(lambda_ * cfg_.K),
            c_.m1,                                    c_.m2 - c_.m1 * cfg_.p,
            c_.r2 * std::exp(-lambda_ * cfg_.L),      c_.r1 * std::exp(lambda_ * q)};
        for (double v : raw)
            if (!std::isfinite(v))
                throw NumericError("raw coefficients overflow; shrink lambda*(L-K) or use the "
                                   "shifted form");
        return raw;
    }

private:
    Config cfg_;
    ShiftedCoefficients c_;
    double a_tilde_ = 0.0;
    double lambda_ = 0.0;
};

/// Finite-domain solution from the closed-form coefficients.
inline Solution solve_finite(const Config& cfg) {
    cfg.validate();
    const auto params = cfg.params();
    const double at = params.a_tilde();
    const double lam = params.lambda();
    const double lh = lam * cfg.h;
    // All terms divided by e^{2 lambda (L + p)}.
    const double A = std::exp(-2.0 * lam * (cfg.p - cfg.K));
    const double B = std::exp(-2.0 * lam * (cfg.L - (cfg.p + cfg.h)));
    const double denom = at * ((2.0 + lh) + lh * A + (lh - 2.0) * A * B + lh * B);
    if (!(denom > 0.0) || !std::isfinite(denom))
        throw NumericError("1D oracle denominator out of range; shrink lambda*(L-K)");

    ShiftedCoefficients c;
    const double left = cfg.h * (1.0 + B) / denom;
    c.l1 = -left;
    c.l2 = left * std::exp(-lam * (cfg.p - cfg.K));
    c.m1 = 2.0 * (1.0 - A * B) / denom;
    c.m2 = (-cfg.h * (1.0 - A * B) + cfg.h * (A - B)) / denom;
    const double right = cfg.h * (1.0 + A) / denom;
    c.r1 = right;
    c.r2 = -right * std::exp(-lam * (cfg.L - (cfg.p + cfg.h)));
    for (double v : c.as_array())
        if (!std::isfinite(v)) throw NumericError("1D oracle coefficient out of range");
    return {cfg, c};
}

/// Same coefficients from the 6x6 boundary/interface system; used to cross-check solve_finite.
inline Solution solve_finite_linear(const Config& cfg) {
    cfg.validate();
    const auto params = cfg.params();
    const double at = params.a_tilde();
    const double lam = params.lambda();
    const double ep = std::exp(-lam * (cfg.p - cfg.K));
    const double eq = std::exp(-lam * (cfg.L - (cfg.p + cfg.h)));

    Eigen::Matrix<double, 6, 6> m = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> rhs = Eigen::Matrix<double, 6, 1>::Zero();
    // unknowns: l1 l2 m1 m2 r1 r2
    m(0, 0) = ep; m(0, 1) = 1.0;                                   // s(K) = 0
    m(1, 4) = eq; m(1, 5) = 1.0;                                   // s(L) = 0
    m(2, 0) = 1.0; m(2, 1) = ep; m(2, 3) = -1.0;                   // s continuous at p
    m(3, 0) = at * lam; m(3, 1) = -at * lam * ep; m(3, 2) = -at;   // flux continuous at p
    rhs(3) = -1.0;
    m(4, 2) = cfg.h; m(4, 3) = 1.0; m(4, 4) = -1.0; m(4, 5) = -eq; // s continuous at q
    m(5, 2) = at; m(5, 4) = at * lam; m(5, 5) = -at * lam * eq;    // flux continuous at q
    rhs(5) = 1.0;

    const Eigen::Matrix<double, 6, 1> x = m.fullPivLu().solve(rhs);
    return {cfg, {x(0), x(1), x(2), x(3), x(4), x(5)}};
}

/// Infinite-domain limit (K -> -inf, L -> +inf) for a bar [p, p+h].
class LimitSolution {
public:
    LimitSolution(double p, double h, double h0, double a) : p_(p), h_(h) {
        if (!(h > 0.0)) throw InputError("bar width h must be positive");
        const PdeParameters params(h0, a);
        a_tilde_ = params.a_tilde();
        lambda_ = params.lambda();
        scale_ = 1.0 / (a_tilde_ * (lambda_ * h + 2.0));
    }

    double p() const { return p_; }
    double h() const { return h_; }
    double lambda() const { return lambda_; }

    /// Slope inside the bar, 2 / (a~ (lambda h + 2)).
    double c3() const { return 2.0 * scale_; }
    double c4() const { return -(2.0 * p_ + h_) * scale_; }

    double operator()(double x) const {
        if (x < p_) return -h_ * scale_ * std::exp(lambda_ * (x - p_));
        if (x <= p_ + h_) return scale_ * (2.0 * x - (2.0 * p_ + h_));
        return h_ * scale_ * std::exp(-lambda_ * (x - (p_ + h_)));
    }

    /// Limit c1..c6; c1 and c6 carry e^{-lambda p} and e^{lambda (p+h)} and may overflow.
    std::array<double, 6> coefficients() const {
        return {-h_ * std::exp(-lambda_ * p_) * scale_, 0.0, c3(), c4(), 0.0,
                h_ * std::exp(lambda_ * (p_ + h_)) * scale_};
    }

private:
    double p_;
    double h_;
    double a_tilde_ = 0.0;
    double lambda_ = 0.0;
    double scale_ = 0.0;
};

inline LimitSolution solve_limit(double p, double h, double h0, double a) {
    return {p, h, h0, a};
}

/// h0 (1 / (h0^2 c3) - a) with the limit slope; equals h.
inline double analytic_thickness(double p, double h, double h0, double a) {
    const LimitSolution s(p, h, h0, a);
    return h0 * (1.0 / (h0 * h0 * s.c3()) - a);
}

struct ExtrudedState {
    ScalarRaster s1;
    ScalarRaster s2;
};

/// Samples the limit solution of a vertical stripe at every pixel centre.
inline ExtrudedState extrude_to_2d(const LimitSolution& limit, const RasterGeometry& geometry) {
    ExtrudedState out{{geometry, std::vector<double>(geometry.size())},
                      {geometry, std::vector<double>(geometry.size(), 0.0)}};
    for (int r = 0; r < geometry.height; ++r)
        for (int c = 0; c < geometry.width; ++c)
            out.s1(c, r) = limit(geometry.pixel_center(c, r).x);
    return out;
}

} // namespace shapefeat::oracle1d
