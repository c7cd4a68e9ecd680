#pragma once

// Synthetic binary images and lossless raster transforms.

#include <cmath>
#include <cstdint>
#include <vector>

#include "shapefeat/error.hpp"
#include "shapefeat/image_io.hpp"

namespace shapefeat::synth {

/// All-white raster with square pixels of the given size.
inline CharacteristicField blank(int width, int height, double pixel_size) {
    return CharacteristicField::filled(width, height, width * pixel_size, 0);
}

/// Fills columns [col_begin, col_end) over rows [row_begin, row_end).
inline void fill_rect(CharacteristicField& f, int col_begin, int col_end, int row_begin,
                      int row_end) {
    for (int r = row_begin; r < row_end; ++r)
        for (int c = col_begin; c < col_end; ++c) f(c, r) = 1;
}

inline CharacteristicField vertical_stripe(int width, int height, double pixel_size,
                                           int col_begin, int col_count) {
    auto f = blank(width, height, pixel_size);
    fill_rect(f, col_begin, col_begin + col_count, 0, height);
    return f;
}

/// Rasterizes a square (side `side`, centre (cx, cy), rotated by `angle` radians) by
/// sampling `supersample`^2 points per pixel and keeping pixels at least half covered.
inline void draw_square(CharacteristicField& f, double cx, double cy, double side, double angle,
                        int supersample = 8) {
    const auto& g = f.geometry();
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double half = side / 2.0;
    const int total = supersample * supersample;
    for (int r = 0; r < g.height; ++r) {
        for (int col = 0; col < g.width; ++col) {
            const auto centre = g.pixel_center(col, r);
            int inside = 0;
            for (int sy = 0; sy < supersample; ++sy) {
                for (int sx = 0; sx < supersample; ++sx) {
                    const double x = centre.x + ((sx + 0.5) / supersample - 0.5) * g.pixel_size - cx;
                    const double y = centre.y + ((sy + 0.5) / supersample - 0.5) * g.pixel_size - cy;
                    const double u = c * x + s * y;
                    const double v = -s * x + c * y;
                    if (std::abs(u) <= half && std::abs(v) <= half) ++inside;
                }
            }
            if (2 * inside >= total) f(col, r) = 1;
        }
    }
}

/// Mirror about the vertical centre line (x -> -x).
inline CharacteristicField mirror_x(const CharacteristicField& f) {
    auto out = f;
    for (int r = 0; r < f.height(); ++r)
        for (int c = 0; c < f.width(); ++c) out(c, r) = f(f.width() - 1 - c, r);
    return out;
}

/// Shifts content by whole pixels (positive dc to the right, positive dr downwards);
/// content pushed off the raster is rejected.
inline CharacteristicField shift(const CharacteristicField& f, int dc, int dr) {
    auto out = blank(f.width(), f.height(), f.pixel_size());
    for (int r = 0; r < f.height(); ++r) {
        for (int c = 0; c < f.width(); ++c) {
            if (!f(c, r)) continue;
            const int nc = c + dc;
            const int nr = r + dr;
            if (nc < 0 || nr < 0 || nc >= f.width() || nr >= f.height())
                throw InputError("shift moves black pixels off the raster");
            out(nc, nr) = 1;
        }
    }
    return out;
}

/// Rotates a square raster by +90 degrees (counter-clockwise in physical coordinates).
inline CharacteristicField rotate90(const CharacteristicField& f) {
    if (f.width() != f.height()) throw InputError("rotate90 needs a square raster");
    const int n = f.width();
    auto out = blank(n, n, f.pixel_size());
    // Physical (x, y) -> (-y, x). With col ~ x and (n-1-row) ~ y this maps
    // (c, r) -> (r, n-1-c).
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) out(r, n - 1 - c) = f(c, r);
    return out;
}

/// Geometry of the multiple-bars test image.
struct BarsLayout {
    double pixel_size = 0.05;
    int width = 100;  // 5.0 wide
    int height = 160; // 8.0 tall
    int row_begin = 10;
    int row_end = 150; // bars span y in [0.5, 7.5]
    std::vector<double> thickness{0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.55, 0.6};
    std::vector<int> col_begin; // filled by bars_image
};

/// Eight vertical bars of the listed thicknesses separated by white gaps.
inline CharacteristicField bars_image(BarsLayout& layout) {
    auto f = blank(layout.width, layout.height, layout.pixel_size);
    std::vector<int> widths;
    int black = 0;
    for (double t : layout.thickness) {
        widths.push_back(static_cast<int>(std::lround(t / layout.pixel_size)));
        black += widths.back();
    }
    const int bars = static_cast<int>(widths.size());
    const int white = layout.width - black;
    if (white < bars + 1) throw InputError("bars do not fit in the image");
    const int gap = white / (bars + 1);
    const int extra = white - gap * (bars + 1); // spread over the outer gaps
    int col = gap + extra / 2;
    layout.col_begin.clear();
    for (int b = 0; b < bars; ++b) {
        layout.col_begin.push_back(col);
        fill_rect(f, col, col + widths[b], layout.row_begin, layout.row_end);
        col += widths[b] + gap;
    }
    return f;
}

} // namespace shapefeat::synth
