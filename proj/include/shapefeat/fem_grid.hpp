#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "shapefeat/error.hpp"
#include "shapefeat/image_io.hpp"

namespace shapefeat {

/// Structured Q1 mesh over a characteristic field. Nodes are numbered
/// `j * (nx + 1) + i` with j counted from the bottom edge; element (ei, ej)
/// has corners (i,j), (i+1,j), (i+1,j+1), (i,j+1) in counter-clockwise order.
class FemGrid {
public:
    FemGrid(const CharacteristicField& field, int subdivisions)
        : field_(field), subdivisions_(subdivisions) {
        if (subdivisions < 1) throw InputError("subdivisions must be >= 1");
        nx_ = field.width() * subdivisions;
        ny_ = field.height() * subdivisions;
        element_size_ = field.pixel_size() / subdivisions;
        element_chi_.resize(static_cast<std::size_t>(nx_) * ny_);
        for (int ej = 0; ej < ny_; ++ej) {
            const int row = field.height() - 1 - ej / subdivisions;
            for (int ei = 0; ei < nx_; ++ei)
                element_chi_[element_index(ei, ej)] = field(ei / subdivisions, row);
        }
        boundary_nodes_.reserve(2 * (nx_ + ny_));
        for (int j = 0; j <= ny_; ++j)
            for (int i = 0; i <= nx_; ++i)
                if (is_boundary(i, j)) boundary_nodes_.push_back(node_index(i, j));
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int subdivisions() const { return subdivisions_; }
    double element_size() const { return element_size_; }
    double origin_x() const { return field_.origin_x(); }
    double origin_y() const { return field_.origin_y(); }
    const CharacteristicField& field() const { return field_; }

    std::size_t node_count() const { return static_cast<std::size_t>(nx_ + 1) * (ny_ + 1); }
    std::size_t element_count() const { return static_cast<std::size_t>(nx_) * ny_; }

    std::size_t node_index(int i, int j) const {
        return static_cast<std::size_t>(j) * (nx_ + 1) + i;
    }
    std::size_t element_index(int ei, int ej) const {
        return static_cast<std::size_t>(ej) * nx_ + ei;
    }

    Point2 node_position(int i, int j) const {
        return {origin_x() + i * element_size_, origin_y() + j * element_size_};
    }

    std::array<std::size_t, 4> element_nodes(int ei, int ej) const {
        return {node_index(ei, ej), node_index(ei + 1, ej), node_index(ei + 1, ej + 1),
                node_index(ei, ej + 1)};
    }

    std::uint8_t element_chi(int ei, int ej) const { return element_chi_[element_index(ei, ej)]; }
    const std::vector<std::uint8_t>& element_chi() const { return element_chi_; }

    bool is_boundary(int i, int j) const { return i == 0 || j == 0 || i == nx_ || j == ny_; }
    const std::vector<std::size_t>& boundary_nodes() const { return boundary_nodes_; }

    /// Number of unknowns after removing the Dirichlet rim.
    std::size_t free_count() const {
        return nx_ < 2 || ny_ < 2 ? 0 : static_cast<std::size_t>(nx_ - 1) * (ny_ - 1);
    }
    /// Free-DOF index of node (i, j), or -1 on the rim.
    long free_index(int i, int j) const {
        if (is_boundary(i, j)) return -1;
        return static_cast<long>(j - 1) * (nx_ - 1) + (i - 1);
    }

private:
    CharacteristicField field_;
    int subdivisions_;
    int nx_ = 0;
    int ny_ = 0;
    double element_size_ = 0.0;
    std::vector<std::uint8_t> element_chi_;
    std::vector<std::size_t> boundary_nodes_;
};

inline FemGrid build_grid(const CharacteristicField& field, int subdivisions) {
    return FemGrid(field, subdivisions);
}

/// Smallest subdivision count whose element size does not exceed `max_element_size`.
inline int subdivisions_for(double pixel_size, double max_element_size) {
    if (!(max_element_size > 0.0)) throw InputError("element size bound must be positive");
    return std::max(1, static_cast<int>(std::ceil(pixel_size / max_element_size - 1e-9)));
}

} // namespace shapefeat
