#pragma once

// Binary raster input and feature-field output.
//
// Rasters are stored row-major with row 0 at the top of the image, the way
// image files store them. Physical coordinates have y pointing up, so the
// centre of pixel (col, row) sits at
//   x = origin_x + (col + 0.5) * pixel_size
//   y = origin_y + (height - row - 0.5) * pixel_size
// where (origin_x, origin_y) is the lower-left corner of the raster.

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "shapefeat/error.hpp"

namespace shapefeat {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct RasterGeometry {
    int width = 0;
    int height = 0;
    double pixel_size = 1.0;
    double origin_x = 0.0;
    double origin_y = 0.0;

    std::size_t size() const { return static_cast<std::size_t>(width) * height; }
    std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * width + col;
    }
    double extent_x() const { return width * pixel_size; }
    double extent_y() const { return height * pixel_size; }

    Point2 pixel_center(int col, int row) const {
        return {origin_x + (col + 0.5) * pixel_size,
                origin_y + (height - row - 0.5) * pixel_size};
    }

    bool operator==(const RasterGeometry&) const = default;
};

/// Indicator of the black domain on a rectangular, physically dimensioned raster.
class CharacteristicField {
public:
    CharacteristicField() = default;

    /// Builds a field whose physical width is `extent_x`; extent_y follows from
    /// the square-pixel assumption.
    CharacteristicField(int width, int height, double extent_x, std::vector<std::uint8_t> chi,
                        double origin_x = 0.0, double origin_y = 0.0)
        : chi_(std::move(chi)) {
        if (width <= 0 || height <= 0)
            throw InputError("characteristic field must have non-zero dimensions");
        if (!(extent_x > 0.0) || !std::isfinite(extent_x))
            throw InputError("physical extent must be strictly positive");
        if (chi_.size() != static_cast<std::size_t>(width) * height)
            throw InputError("chi size does not match width*height");
        for (auto v : chi_)
            if (v > 1) throw InputError("chi entries must be 0 or 1");
        geom_ = {width, height, extent_x / width, origin_x, origin_y};
    }

    static CharacteristicField filled(int width, int height, double extent_x, std::uint8_t value) {
        return {width, height, extent_x,
                std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                              std::max(height, 0),
                                          value)};
    }

    const RasterGeometry& geometry() const { return geom_; }
    int width() const { return geom_.width; }
    int height() const { return geom_.height; }
    double pixel_size() const { return geom_.pixel_size; }
    double extent_x() const { return geom_.extent_x(); }
    double extent_y() const { return geom_.extent_y(); }
    double origin_x() const { return geom_.origin_x; }
    double origin_y() const { return geom_.origin_y; }

    std::uint8_t operator()(int col, int row) const { return chi_[geom_.index(col, row)]; }
    std::uint8_t& operator()(int col, int row) { return chi_[geom_.index(col, row)]; }
    const std::vector<std::uint8_t>& chi() const { return chi_; }

    std::size_t count_black() const {
        return static_cast<std::size_t>(std::count(chi_.begin(), chi_.end(), std::uint8_t{1}));
    }

    bool operator==(const CharacteristicField&) const = default;

private:
    RasterGeometry geom_;
    std::vector<std::uint8_t> chi_;
};

/// Pixel-sampled scalars; NaN marks an undefined sample.
struct ScalarRaster {
    RasterGeometry geometry;
    std::vector<double> values;

    double operator()(int col, int row) const { return values[geometry.index(col, row)]; }
    double& operator()(int col, int row) { return values[geometry.index(col, row)]; }
};

struct VectorRaster {
    RasterGeometry geometry;
    std::vector<std::array<double, 2>> values;
    std::vector<std::uint8_t> defined;

    const std::array<double, 2>& operator()(int col, int row) const {
        return values[geometry.index(col, row)];
    }
    bool is_defined(int col, int row) const { return defined[geometry.index(col, row)] != 0; }
};

inline ScalarRaster to_raster(const CharacteristicField& field) {
    ScalarRaster r{field.geometry(), {}};
    r.values.assign(field.chi().begin(), field.chi().end());
    return r;
}

enum class RasterFormat { pgm, png, csv };

inline RasterFormat parse_format(std::string_view name) {
    if (name == "pgm") return RasterFormat::pgm;
    if (name == "png") return RasterFormat::png;
    if (name == "csv") return RasterFormat::csv;
    throw InputError("unknown output format '" + std::string(name) + "'");
}

inline const char* extension(RasterFormat f) {
    switch (f) {
    case RasterFormat::pgm: return ".pgm";
    case RasterFormat::png: return ".png";
    case RasterFormat::csv: return ".csv";
    }
    return "";
}

namespace detail {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> intensity; // normalized to [0,1], row 0 at top
};

inline void skip_pgm_space(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            return;
        }
    }
}

inline long read_pgm_int(std::istream& in, const std::string& path) {
    skip_pgm_space(in);
    long v = -1;
    if (!(in >> v) || v < 0) throw FormatError("malformed PGM header in " + path);
    return v;
}

inline GrayImage read_pgm(std::istream& in, const std::string& path) {
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || (magic[1] != '2' && magic[1] != '5'))
        throw FormatError("not a PGM (P2/P5) file: " + path);
    const bool binary = magic[1] == '5';
    const long w = read_pgm_int(in, path);
    const long h = read_pgm_int(in, path);
    const long maxval = read_pgm_int(in, path);
    if (maxval <= 0 || maxval > 65535) throw FormatError("PGM maxval out of range in " + path);
    if (w == 0 || h == 0) throw InputError("zero-dimension image: " + path);

    GrayImage img{static_cast<int>(w), static_cast<int>(h), {}};
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    img.intensity.resize(n);
    if (binary) {
        in.get(); // single whitespace after maxval
        const int bytes = maxval < 256 ? 1 : 2;
        std::vector<unsigned char> buf(n * bytes);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size())
            throw FormatError("truncated PGM pixel data in " + path);
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned v = bytes == 1 ? buf[i] : (unsigned{buf[2 * i]} << 8) | buf[2 * i + 1];
            img.intensity[i] = static_cast<double>(v) / maxval;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            long v = -1;
            skip_pgm_space(in);
            if (!(in >> v) || v < 0 || v > maxval)
                throw FormatError("malformed PGM pixel data in " + path);
            img.intensity[i] = static_cast<double>(v) / maxval;
        }
    }
    return img;
}

inline GrayImage read_png(const std::string& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw FormatError("cannot read PNG " + path + ": " + image.message);
    image.format = PNG_FORMAT_GRAY;
    if (image.width == 0 || image.height == 0) {
        png_image_free(&image);
        throw InputError("zero-dimension image: " + path);
    }
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw FormatError("cannot decode PNG " + path + ": " + msg);
    }
    GrayImage img{static_cast<int>(image.width), static_cast<int>(image.height), {}};
    img.intensity.resize(buf.size());
    std::transform(buf.begin(), buf.end(), img.intensity.begin(),
                   [](png_byte b) { return b / 255.0; });
    return img;
}

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ofstream out(path, mode);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

inline std::vector<std::uint8_t> quantize(const std::vector<double>& values, double& lo,
                                          double& hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(lo <= hi)) lo = hi = 0.0;
    std::vector<std::uint8_t> bytes(values.size(), 0);
    const double span = hi - lo;
    if (span > 0.0) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!std::isfinite(values[i])) continue;
            bytes[i] = static_cast<std::uint8_t>(std::lround((values[i] - lo) / span * 255.0));
        }
    }
    return bytes;
}

} // namespace detail

/// Reads a PGM (P2/P5) or PNG image and thresholds it into a characteristic field.
/// Dark pixels (intensity < threshold) are the black domain unless `invert` is set.
inline CharacteristicField load_binary_image(const std::filesystem::path& path, double threshold,
                                             bool invert, double extent_x) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw InputError("threshold must lie in (0,1)");
    if (!(extent_x > 0.0)) throw InputError("extent_x must be strictly positive");

    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open image " + path.string());
    char magic[8] = {};
    in.read(magic, sizeof magic);
    const auto got = in.gcount();
    in.clear();
    in.seekg(0);

    detail::GrayImage img;
    static constexpr unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (got == 8 && std::equal(std::begin(png_sig), std::end(png_sig),
                               reinterpret_cast<unsigned char*>(magic))) {
        in.close();
        img = detail::read_png(path.string());
    } else {
        img = detail::read_pgm(in, path.string());
    }

    std::vector<std::uint8_t> chi(img.intensity.size());
    for (std::size_t i = 0; i < chi.size(); ++i) {
        const bool dark = img.intensity[i] < threshold;
        chi[i] = (dark != invert) ? 1 : 0;
    }
    return {img.width, img.height, extent_x, std::move(chi)};
}

/// Number of pixels added on each side for a physical margin.
inline int padding_pixels(double margin, double pixel_size) {
    if (margin < 0.0) throw InputError("padding margin must be non-negative");
    return static_cast<int>(std::ceil(margin / pixel_size - 1e-9));
}

/// Surrounds the field with white pixels; content keeps its physical position.
inline CharacteristicField pad_field(const CharacteristicField& field, double margin) {
    const int n = padding_pixels(margin, field.pixel_size());
    if (n == 0) return field;
    const int w = field.width() + 2 * n;
    const int h = field.height() + 2 * n;
    std::vector<std::uint8_t> chi(static_cast<std::size_t>(w) * h, 0);
    for (int r = 0; r < field.height(); ++r)
        for (int c = 0; c < field.width(); ++c)
            chi[static_cast<std::size_t>(r + n) * w + (c + n)] = field(c, r);
    const double shift = n * field.pixel_size();
    return {w, h, w * field.pixel_size(), std::move(chi), field.origin_x() - shift,
            field.origin_y() - shift};
}

/// Writes a scalar raster. Images are min/max-normalized to 8 bits with the range
/// recorded in `<path>.range`; CSV rows are `x,y,value` at pixel centres.
inline void export_scalar_field(const ScalarRaster& raster, const std::filesystem::path& path,
                                RasterFormat format) {
    const auto& g = raster.geometry;
    if (raster.values.size() != g.size()) throw InputError("raster size mismatch");

    if (format == RasterFormat::csv) {
        auto out = detail::open_output(path, std::ios::binary);
        out << "x,y,value\n";
        for (int r = 0; r < g.height; ++r) {
            for (int c = 0; c < g.width; ++c) {
                const auto p = g.pixel_center(c, r);
                const double v = raster(c, r);
                out << detail::format_number(p.x) << ',' << detail::format_number(p.y) << ',';
                if (std::isfinite(v)) out << detail::format_number(v);
                out << '\n';
            }
        }
        if (!out) throw IoError("write failed: " + path.string());
        return;
    }

    double lo = 0.0, hi = 0.0;
    const auto bytes = detail::quantize(raster.values, lo, hi);
    if (format == RasterFormat::pgm) {
        auto out = detail::open_output(path, std::ios::binary);
        out << "P5\n" << g.width << ' ' << g.height << "\n255\n";
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed: " + path.string());
    } else {
        png_image image{};
        image.version = PNG_IMAGE_VERSION;
        image.width = static_cast<png_uint_32>(g.width);
        image.height = static_cast<png_uint_32>(g.height);
        image.format = PNG_FORMAT_GRAY;
        if (!png_image_write_to_file(&image, path.string().c_str(), 0, bytes.data(), 0, nullptr))
            throw IoError("cannot write PNG " + path.string() + ": " + image.message);
    }
    auto side = detail::open_output(path.string() + ".range", std::ios::binary);
    side << "min " << detail::format_number(lo) << "\nmax " << detail::format_number(hi) << '\n';
    if (!side) throw IoError("write failed: " + path.string() + ".range");
}

/// Writes `x,y,vx,vy` rows for every defined pixel.
inline void export_vector_field(const VectorRaster& raster, const std::filesystem::path& path) {
    const auto& g = raster.geometry;
    if (raster.values.size() != g.size() || raster.defined.size() != g.size())
        throw InputError("raster size mismatch");
    auto out = detail::open_output(path, std::ios::binary);
    out << "x,y,vx,vy\n";
    for (int r = 0; r < g.height; ++r) {
        for (int c = 0; c < g.width; ++c) {
            if (!raster.is_defined(c, r)) continue;
            const auto p = g.pixel_center(c, r);
            const auto& v = raster(c, r);
            out << detail::format_number(p.x) << ',' << detail::format_number(p.y) << ','
                << detail::format_number(v[0]) << ',' << detail::format_number(v[1]) << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace shapefeat
