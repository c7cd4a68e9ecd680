#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "shapefeat/error.hpp"
#include "shapefeat/image_io.hpp"
#include "shapefeat/pde_solver.hpp"

namespace shapefeat {

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<Vec2, 2>; ///< m[i][j] = d s_i / d x_j for gradients

/// Symmetrized state gradient with its ordered eigen decomposition.
struct ShapeTensor {
    double s11 = 0.0;
    double s12 = 0.0;
    double s22 = 0.0;
    Vec2 eigenvalues{0.0, 0.0};                  ///< ascending
    std::array<Vec2, 2> eigenvectors{{{1.0, 0.0}, {0.0, 1.0}}}; ///< eigenvectors[k] pairs with eigenvalues[k]

    double trace() const { return s11 + s22; }

    /// Components of `s` in the eigenvector basis (eigenvectors as rows).
    Vec2 transform(const Vec2& s) const {
        return {eigenvectors[0][0] * s[0] + eigenvectors[0][1] * s[1],
                eigenvectors[1][0] * s[0] + eigenvectors[1][1] * s[1]};
    }
};

inline ShapeTensor shape_tensor(const Mat2& grad) {
    for (const auto& row : grad)
        for (double v : row)
            if (!std::isfinite(v)) throw NumericError("non-finite state gradient");

    ShapeTensor t;
    t.s11 = grad[0][0];
    t.s22 = grad[1][1];
    t.s12 = 0.5 * (grad[0][1] + grad[1][0]);

    const double mean = 0.5 * (t.s11 + t.s22);
    const double half_diff = 0.5 * (t.s11 - t.s22);
    const double radius = std::hypot(half_diff, t.s12);
    const double scale = std::max({std::abs(t.s11), std::abs(t.s22), std::abs(t.s12)});
    t.eigenvalues = {mean - radius, mean + radius};
    if (radius <= 4 * std::numeric_limits<double>::epsilon() * scale) {
        t.eigenvalues = {mean, mean};
        return t; // canonical axes
    }
    const double theta = 0.5 * std::atan2(2.0 * t.s12, t.s11 - t.s22);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    t.eigenvectors[1] = {c, s};
    t.eigenvectors[0] = {-s, c};
    return t;
}

/// Per-pixel state value and gradient at the pixel centres of the state's image.
struct GradientField {
    RasterGeometry geometry;
    std::vector<Vec2> state;
    std::vector<Mat2> gradient;
};

inline GradientField recover_gradient(const StateField& state) {
    const auto& geom = state.image().geometry();
    GradientField out{geom, std::vector<Vec2>(geom.size()), std::vector<Mat2>(geom.size())};
    for (int r = 0; r < geom.height; ++r) {
        for (int c = 0; c < geom.width; ++c) {
            const auto p = geom.pixel_center(c, r);
            const auto idx = geom.index(c, r);
            out.state[idx] = state.value_at(p);
            out.gradient[idx] = state.gradient_at(p);
        }
    }
    return out;
}

struct FeatureTensorField {
    RasterGeometry geometry;
    std::vector<ShapeTensor> tensor;
    std::vector<Vec2> state;
    std::vector<Vec2> transformed_state;
};

inline FeatureTensorField shape_tensor_field(const GradientField& grad) {
    FeatureTensorField out{grad.geometry, {}, grad.state, {}};
    out.tensor.reserve(grad.gradient.size());
    out.transformed_state.reserve(grad.gradient.size());
    for (std::size_t i = 0; i < grad.gradient.size(); ++i) {
        out.tensor.push_back(shape_tensor(grad.gradient[i]));
        out.transformed_state.push_back(out.tensor.back().transform(grad.state[i]));
    }
    return out;
}

/// f_h = h0^2 trace(S) chi.
inline ScalarRaster inverse_thickness(const FeatureTensorField& tensors,
                                      const CharacteristicField& chi, double h0) {
    ScalarRaster out{tensors.geometry, std::vector<double>(tensors.tensor.size(), 0.0)};
    for (std::size_t i = 0; i < out.values.size(); ++i)
        if (chi.chi()[i]) out.values[i] = h0 * h0 * tensors.tensor[i].trace();
    return out;
}

struct ThicknessResult {
    ScalarRaster thickness;
    std::vector<std::uint8_t> degenerate; ///< 1 where f_h <= floor or the raw value was negative
};

/// h_f = h0 (1/f_h - a) chi, guarded where f_h is at or below `floor_eps`.
inline ThicknessResult thickness(const ScalarRaster& inv_thickness, const CharacteristicField& chi,
                                 double h0, double a, double floor_eps) {
    if (!(floor_eps > 0.0)) throw InputError("thickness floor must be positive");
    const auto n = inv_thickness.values.size();
    ThicknessResult out{{inv_thickness.geometry, std::vector<double>(n, 0.0)},
                        std::vector<std::uint8_t>(n, 0)};
    for (std::size_t i = 0; i < n; ++i) {
        if (!chi.chi()[i]) continue;
        const double fh = inv_thickness.values[i];
        if (!(fh > floor_eps)) {
            out.degenerate[i] = 1;
            continue;
        }
        const double h = h0 * (1.0 / fh - a);
        if (h < 0.0) {
            out.degenerate[i] = 1;
            continue;
        }
        out.thickness.values[i] = h;
    }
    return out;
}

struct Orientation {
    VectorRaster normal;
    VectorRaster tangent;
};

/// n_f = s/|s| where |s| exceeds `eps` times the global maximum; t_f is n_f rotated by +90 degrees.
inline Orientation orientation(const FeatureTensorField& tensors, double eps) {
    if (!(eps > 0.0)) throw InputError("orientation threshold must be positive");
    const auto n = tensors.state.size();
    Orientation out{{tensors.geometry, std::vector<Vec2>(n, Vec2{0.0, 0.0}),
                     std::vector<std::uint8_t>(n, 0)},
                    {tensors.geometry, std::vector<Vec2>(n, Vec2{0.0, 0.0}),
                     std::vector<std::uint8_t>(n, 0)}};
    double max_norm = 0.0;
    for (const auto& s : tensors.state) max_norm = std::max(max_norm, std::hypot(s[0], s[1]));
    if (max_norm == 0.0) return out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = tensors.state[i];
        const double norm = std::hypot(s[0], s[1]);
        if (!(norm > eps * max_norm)) continue;
        const Vec2 nf{s[0] / norm, s[1] / norm};
        out.normal.values[i] = nf;
        out.tangent.values[i] = {-nf[1], nf[0]};
        out.normal.defined[i] = out.tangent.defined[i] = 1;
    }
    return out;
}

/// Indicator of the closed interval [-w, w].
inline double pulse(double x, double w) { return (x >= -w && x <= w) ? 1.0 : 0.0; }

/// Largest |lambda_s^(2)| over the black domain; the reference for the skeleton floor.
inline double max_major_eigenvalue(const FeatureTensorField& tensors,
                                   const CharacteristicField& chi) {
    double m = 0.0;
    for (std::size_t i = 0; i < tensors.tensor.size(); ++i)
        if (chi.chi()[i]) m = std::max(m, std::abs(tensors.tensor[i].eigenvalues[1]));
    return m;
}

/// f_s = P(|s~*| / lambda*) chi using the eigenpair of the largest eigenvalue.
inline ScalarRaster skeleton(const FeatureTensorField& tensors, const CharacteristicField& chi,
                             double w, double lambda_floor) {
    if (!(w > 0.0)) throw InputError("skeleton width must be positive");
    if (!(lambda_floor > 0.0)) throw InputError("eigenvalue floor must be positive");
    ScalarRaster out{tensors.geometry, std::vector<double>(tensors.tensor.size(), 0.0)};
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        if (!chi.chi()[i]) continue;
        const double lam = tensors.tensor[i].eigenvalues[1];
        if (!(std::abs(lam) > lambda_floor)) continue;
        out.values[i] = pulse(std::abs(tensors.transformed_state[i][1]) / lam, w);
    }
    return out;
}

struct FeatureOptions {
    double skeleton_width = 0.0;          ///< physical length; 0 means 0.75 * pixel_size
    double orientation_eps = 1e-3;        ///< relative to max |s|
    double lambda_floor_relative = 1e-3;  ///< relative to max lambda_s^(2) over the black domain
    double thickness_floor = 1e-9;

    double resolved_skeleton_width(double pixel_size) const {
        return skeleton_width > 0.0 ? skeleton_width : 0.75 * pixel_size;
    }
};

struct FeatureMaps {
    ScalarRaster s1;
    ScalarRaster s2;
    ScalarRaster inv_thickness;
    ScalarRaster thickness;
    std::vector<std::uint8_t> thickness_degenerate;
    VectorRaster normal;
    VectorRaster tangent;
    ScalarRaster skeleton;
};

inline FeatureMaps compute_all(const StateField& state, const FeatureOptions& options = {}) {
    const auto& chi = state.image();
    const auto tensors = shape_tensor_field(recover_gradient(state));
    const double h0 = state.params().h0();

    FeatureMaps maps;
    maps.s1 = {tensors.geometry, std::vector<double>(tensors.state.size())};
    maps.s2 = {tensors.geometry, std::vector<double>(tensors.state.size())};
    for (std::size_t i = 0; i < tensors.state.size(); ++i) {
        maps.s1.values[i] = tensors.state[i][0];
        maps.s2.values[i] = tensors.state[i][1];
    }
    maps.inv_thickness = inverse_thickness(tensors, chi, h0);
    auto th = thickness(maps.inv_thickness, chi, h0, state.params().a(), options.thickness_floor);
    maps.thickness = std::move(th.thickness);
    maps.thickness_degenerate = std::move(th.degenerate);
    auto orient = orientation(tensors, options.orientation_eps);
    maps.normal = std::move(orient.normal);
    maps.tangent = std::move(orient.tangent);

    const double lam_max = max_major_eigenvalue(tensors, chi);
    if (lam_max > 0.0) {
        maps.skeleton = skeleton(tensors, chi, options.resolved_skeleton_width(chi.pixel_size()),
                                 options.lambda_floor_relative * lam_max);
    } else {
        maps.skeleton = {tensors.geometry, std::vector<double>(tensors.state.size(), 0.0)};
    }
    return maps;
}

} // namespace shapefeat
