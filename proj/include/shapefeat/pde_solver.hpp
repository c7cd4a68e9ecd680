#pragma once

// Galerkin Q1 discretization and solution of the damped diffusion system
//
//   -div(a~ grad s_i - e_i chi) + alpha (1 - chi) s_i = 0   in the reference domain
//                                                s_i = 0   on its boundary
//
// assembled from the variational identity
//
//   int a~ grad s_i . grad xi + alpha int (1 - chi) s_i xi = int chi d(xi)/dx_i .
//
// The components decouple: one SPD matrix, one right-hand side per axis.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shapefeat/error.hpp"
#include "shapefeat/fem_grid.hpp"
#include "shapefeat/image_io.hpp"

namespace shapefeat {

/// Diffusion a~ = a h0^2, damping alpha = 4/a, decay rate lambda = sqrt(alpha / a~).
class PdeParameters {
public:
    PdeParameters(double h0, double a) : PdeParameters(h0, a, 0.0, false) {}

    /// Overrides the damping coefficient. Only useful for mutation testing;
    /// every production path uses alpha = 4/a.
    static PdeParameters with_damping(double h0, double a, double alpha) {
        return PdeParameters(h0, a, alpha, true);
    }

    double h0() const { return h0_; }
    double a() const { return a_; }
    double a_tilde() const { return a_tilde_; }
    double alpha() const { return alpha_; }
    double lambda() const { return lambda_; }

    /// Padding that keeps the Dirichlet rim out of reach of the white-domain decay.
    double default_padding() const { return std::max(2.0 * h0_, 10.0 / lambda_); }
    /// Largest element size that resolves the decay layer 1/lambda.
    double default_element_size() const { return std::min(a_ * h0_ / 2.0, h0_ / 6.0); }

private:
    PdeParameters(double h0, double a, double alpha, bool override_alpha) : h0_(h0), a_(a) {
        if (!(h0 > 0.0) || !std::isfinite(h0)) throw InputError("h0 must be strictly positive");
        if (!(a > 0.0) || !std::isfinite(a))
            throw InputError("a must be strictly positive (alpha = 4/a)");
        a_tilde_ = a * h0 * h0;
        alpha_ = override_alpha ? alpha : 4.0 / a;
        if (!(alpha_ > 0.0)) throw InputError("damping coefficient must be positive");
        lambda_ = std::sqrt(alpha_ / a_tilde_);
    }

    double h0_;
    double a_;
    double a_tilde_ = 0.0;
    double alpha_ = 0.0;
    double lambda_ = 0.0;
};

/// Compressed sparse row matrix with sorted column indices.
struct CsrMatrix {
    std::size_t rows = 0;
    std::vector<std::size_t> row_ptr;
    std::vector<std::size_t> col;
    std::vector<double> val;

    std::size_t nonzeros() const { return val.size(); }

    double at(std::size_t r, std::size_t c) const {
        const auto b = col.begin() + static_cast<long>(row_ptr[r]);
        const auto e = col.begin() + static_cast<long>(row_ptr[r + 1]);
        const auto it = std::lower_bound(b, e, c);
        return it != e && *it == c ? val[static_cast<std::size_t>(it - col.begin())] : 0.0;
    }

    void multiply(const std::vector<double>& x, std::vector<double>& y) const {
        y.resize(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            double sum = 0.0;
            for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) sum += val[k] * x[col[k]];
            y[r] = sum;
        }
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(rows, 0.0);
        for (std::size_t r = 0; r < rows; ++r) d[r] = at(r, r);
        return d;
    }

    /// max |A_ij - A_ji| / max(|A_ij|, |A_ji|) over stored pairs.
    double max_relative_asymmetry() const {
        double worst = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
                const double aij = val[k];
                const double aji = at(col[k], r);
                const double scale = std::max(std::abs(aij), std::abs(aji));
                if (scale > 0.0) worst = std::max(worst, std::abs(aij - aji) / scale);
            }
        }
        return worst;
    }
};

/// Q1 element matrices on a square of side `size`, integrated with 2x2 Gauss points.
/// Local node order: (0,0), (1,0), (1,1), (0,1).
struct ElementMatrices {
    std::array<std::array<double, 4>, 4> stiffness{};
    std::array<std::array<double, 4>, 4> mass{};
    std::array<std::array<double, 4>, 2> source{}; // int dN_a/dx_i

    explicit ElementMatrices(double size) {
        static constexpr std::array<double, 4> xi_a{-1.0, 1.0, 1.0, -1.0};
        static constexpr std::array<double, 4> eta_a{-1.0, -1.0, 1.0, 1.0};
        const double g = 1.0 / std::sqrt(3.0);
        const double jac = size * size / 4.0;
        const double dref = 2.0 / size;
        for (double xi : {-g, g}) {
            for (double eta : {-g, g}) {
                std::array<double, 4> n{}, dx{}, dy{};
                for (int a = 0; a < 4; ++a) {
                    n[a] = 0.25 * (1 + xi_a[a] * xi) * (1 + eta_a[a] * eta);
                    dx[a] = 0.25 * xi_a[a] * (1 + eta_a[a] * eta) * dref;
                    dy[a] = 0.25 * eta_a[a] * (1 + xi_a[a] * xi) * dref;
                }
                for (int a = 0; a < 4; ++a) {
                    source[0][a] += dx[a] * jac;
                    source[1][a] += dy[a] * jac;
                    for (int b = 0; b < 4; ++b) {
                        stiffness[a][b] += (dx[a] * dx[b] + dy[a] * dy[b]) * jac;
                        mass[a][b] += n[a] * n[b] * jac;
                    }
                }
            }
        }
    }
};

struct SparseSystem {
    std::shared_ptr<const FemGrid> grid;
    PdeParameters params;
    CsrMatrix matrix;
    std::array<std::vector<double>, 2> rhs;
};

struct SolveReport {
    std::array<int, 2> iterations{0, 0};
    std::array<double, 2> relative_residual{0.0, 0.0};
};

/// Nodal solution s = (s1, s2) over a grid, plus the raster the features are sampled on.
class StateField {
public:
    StateField(std::shared_ptr<const FemGrid> grid, PdeParameters params,
               std::array<std::vector<double>, 2> nodal, SolveReport report)
        : grid_(std::move(grid)), params_(params), nodal_(std::move(nodal)), report_(report),
          image_(grid_->field()) {}

    const FemGrid& grid() const { return *grid_; }
    std::shared_ptr<const FemGrid> grid_ptr() const { return grid_; }
    const PdeParameters& params() const { return params_; }
    const SolveReport& report() const { return report_; }

    /// Nodal values of component `axis` (0 -> s1, 1 -> s2), full node numbering.
    const std::vector<double>& component(int axis) const { return nodal_[axis]; }

    /// Raster on which features are sampled (the unpadded input when padding was applied).
    const CharacteristicField& image() const { return image_; }
    void set_image(CharacteristicField image) { image_ = std::move(image); }

    double node_value(int axis, int i, int j) const { return nodal_[axis][grid_->node_index(i, j)]; }

    /// Bilinear interpolation of both components at a physical point.
    std::array<double, 2> value_at(Point2 p) const {
        const auto loc = locate(p);
        std::array<double, 2> out{};
        const int ei = loc.ei.front();
        const int ej = loc.ej.front();
        const double u = loc.u - ei;
        const double v = loc.v - ej;
        const auto nodes = grid_->element_nodes(ei, ej);
        const std::array<double, 4> w{(1 - u) * (1 - v), u * (1 - v), u * v, (1 - u) * v};
        for (int axis = 0; axis < 2; ++axis)
            for (int a = 0; a < 4; ++a) out[axis] += w[a] * nodal_[axis][nodes[a]];
        return out;
    }

    /// grad[i][j] = d s_i / d x_j. Inside an element this is the exact Q1 derivative;
    /// on element edges and nodes it is the average over the elements sharing the point.
    std::array<std::array<double, 2>, 2> gradient_at(Point2 p) const {
        const auto loc = locate(p);
        std::array<std::array<double, 2>, 2> g{};
        int count = 0;
        const double h = grid_->element_size();
        for (int ei : loc.ei) {
            for (int ej : loc.ej) {
                const double u = std::clamp(loc.u - ei, 0.0, 1.0);
                const double v = std::clamp(loc.v - ej, 0.0, 1.0);
                const auto nodes = grid_->element_nodes(ei, ej);
                for (int axis = 0; axis < 2; ++axis) {
                    const auto& s = nodal_[axis];
                    const double s0 = s[nodes[0]], s1 = s[nodes[1]], s2 = s[nodes[2]],
                                 s3 = s[nodes[3]];
                    g[axis][0] += ((s1 - s0) * (1 - v) + (s2 - s3) * v) / h;
                    g[axis][1] += ((s3 - s0) * (1 - u) + (s2 - s1) * u) / h;
                }
                ++count;
            }
        }
        for (auto& row : g)
            for (auto& x : row) x /= count;
        return g;
    }

private:
    struct Location {
        double u = 0.0; // position in element units from the grid origin
        double v = 0.0;
        std::vector<int> ei;
        std::vector<int> ej;
    };

    static std::vector<int> candidates(double t, int n) {
        constexpr double snap = 1e-9;
        const double k = std::round(t);
        if (std::abs(t - k) < snap) {
            const int ki = static_cast<int>(k);
            std::vector<int> out;
            if (ki - 1 >= 0) out.push_back(ki - 1);
            if (ki < n) out.push_back(ki);
            return out;
        }
        return {std::clamp(static_cast<int>(std::floor(t)), 0, n - 1)};
    }

    Location locate(Point2 p) const {
        const double h = grid_->element_size();
        Location loc;
        loc.u = (p.x - grid_->origin_x()) / h;
        loc.v = (p.y - grid_->origin_y()) / h;
        constexpr double slack = 1e-9;
        if (loc.u < -slack || loc.v < -slack || loc.u > grid_->nx() + slack ||
            loc.v > grid_->ny() + slack)
            throw InputError("evaluation point outside the grid");
        loc.ei = candidates(loc.u, grid_->nx());
        loc.ej = candidates(loc.v, grid_->ny());
        return loc;
    }

    std::shared_ptr<const FemGrid> grid_;
    PdeParameters params_;
    std::array<std::vector<double>, 2> nodal_;
    SolveReport report_;
    CharacteristicField image_;
};

/// Assembles stiffness a~ K + alpha M_white over free nodes and the per-axis source vectors.
inline SparseSystem assemble(std::shared_ptr<const FemGrid> grid, const PdeParameters& params) {
    if (!grid || grid->element_count() == 0) throw InputError("cannot assemble an empty grid");
    const FemGrid& g = *grid;
    const int nx = g.nx();
    const int ny = g.ny();
    const std::size_t n = g.free_count();

    CsrMatrix m;
    m.rows = n;
    m.row_ptr.assign(n + 1, 0);
    for (int j = 1; j < ny; ++j) {
        for (int i = 1; i < nx; ++i) {
            const auto r = static_cast<std::size_t>(g.free_index(i, j));
            std::size_t cnt = 0;
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di)
                    if (g.free_index(i + di, j + dj) >= 0) ++cnt;
            m.row_ptr[r + 1] = cnt;
        }
    }
    for (std::size_t r = 0; r < n; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    m.col.resize(m.row_ptr[n]);
    m.val.assign(m.row_ptr[n], 0.0);
    for (int j = 1; j < ny; ++j) {
        for (int i = 1; i < nx; ++i) {
            auto k = m.row_ptr[static_cast<std::size_t>(g.free_index(i, j))];
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di)
                    if (const long c = g.free_index(i + di, j + dj); c >= 0)
                        m.col[k++] = static_cast<std::size_t>(c);
        }
    }

    const ElementMatrices em(g.element_size());
    std::array<std::vector<double>, 2> rhs{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    static constexpr std::array<int, 4> off_i{0, 1, 1, 0};
    static constexpr std::array<int, 4> off_j{0, 0, 1, 1};

    for (int ej = 0; ej < ny; ++ej) {
        for (int ei = 0; ei < nx; ++ei) {
            const bool black = g.element_chi(ei, ej) != 0;
            std::array<long, 4> dof{};
            for (int a = 0; a < 4; ++a) dof[a] = g.free_index(ei + off_i[a], ej + off_j[a]);
            for (int a = 0; a < 4; ++a) {
                if (dof[a] < 0) continue;
                const auto r = static_cast<std::size_t>(dof[a]);
                if (black) {
                    rhs[0][r] += em.source[0][a];
                    rhs[1][r] += em.source[1][a];
                }
                for (int b = 0; b < 4; ++b) {
                    if (dof[b] < 0) continue;
                    double v = params.a_tilde() * em.stiffness[a][b];
                    if (!black) v += params.alpha() * em.mass[a][b];
                    const auto c = static_cast<std::size_t>(dof[b]);
                    const auto first = m.col.begin() + static_cast<long>(m.row_ptr[r]);
                    const auto last = m.col.begin() + static_cast<long>(m.row_ptr[r + 1]);
                    m.val[static_cast<std::size_t>(std::find(first, last, c) - m.col.begin())] += v;
                }
            }
        }
    }
    return {std::move(grid), params, std::move(m), std::move(rhs)};
}

inline SparseSystem assemble(const FemGrid& grid, const PdeParameters& params) {
    return assemble(std::make_shared<const FemGrid>(grid), params);
}

struct CgResult {
    std::vector<double> x;
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients. `inv_diag` is shared between solves.
inline CgResult conjugate_gradient(const CsrMatrix& a, const std::vector<double>& b,
                                   const std::vector<double>& inv_diag, double tol, int max_iter) {
    const std::size_t n = a.rows;
    auto dot = [n](const std::vector<double>& u, const std::vector<double>& v) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += u[i] * v[i];
        return s;
    };
    CgResult res;
    res.x.assign(n, 0.0);
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0) return res;

    std::vector<double> r = b, z(n), p(n), ap(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    double rnorm = bnorm;

    for (int it = 1; it <= max_iter; ++it) {
        a.multiply(p, ap);
        const double curvature = dot(p, ap);
        if (!(curvature > 0.0))
            throw DefinitenessError("non-positive curvature p'Ap = " + std::to_string(curvature) +
                                    " at iteration " + std::to_string(it));
        const double step = rz / curvature;
        for (std::size_t i = 0; i < n; ++i) {
            res.x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        rnorm = std::sqrt(dot(r, r));
        res.iterations = it;
        if (rnorm <= tol * bnorm) {
            // The recursive residual drifts; confirm against the true one and
            // keep iterating from it if needed.
            a.multiply(res.x, ap);
            for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
            rnorm = std::sqrt(dot(r, r));
            if (rnorm <= tol * bnorm) {
                res.relative_residual = rnorm / bnorm;
                return res;
            }
            for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
            p = z;
            rz = dot(r, z);
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw ConvergenceError("conjugate gradients hit the iteration cap (" +
                               std::to_string(max_iter) + "), relative residual " +
                               std::to_string(rnorm / bnorm),
                           rnorm / bnorm);
}

/// Iteration cap used when none is given; CG iterations grow with the grid diameter.
inline int default_max_iterations(const FemGrid& grid) {
    return std::max(2000, 50 * (grid.nx() + grid.ny()));
}

/// Solves both components and re-inserts the Dirichlet rim as exact zeros.
inline StateField solve(const SparseSystem& system, double tol, int max_iter = 0) {
    if (!(tol > 0.0 && tol < 1.0)) throw InputError("solver tolerance must lie in (0,1)");
    const FemGrid& g = *system.grid;
    if (max_iter <= 0) max_iter = default_max_iterations(g);

    auto inv_diag = system.matrix.diagonal();
    for (double& d : inv_diag) {
        if (!(d > 0.0)) throw DefinitenessError("non-positive diagonal entry in assembled matrix");
        d = 1.0 / d;
    }

    auto run = [&](int axis) {
        return conjugate_gradient(system.matrix, system.rhs[axis], inv_diag, tol, max_iter);
    };
    auto second = std::async(std::launch::async, run, 1);
    CgResult r1 = run(0);
    CgResult r2 = second.get();

    SolveReport report;
    std::array<std::vector<double>, 2> nodal{std::vector<double>(g.node_count(), 0.0),
                                             std::vector<double>(g.node_count(), 0.0)};
    const std::array<const CgResult*, 2> results{&r1, &r2};
    for (int axis = 0; axis < 2; ++axis) {
        report.iterations[axis] = results[axis]->iterations;
        report.relative_residual[axis] = results[axis]->relative_residual;
        for (int j = 1; j < g.ny(); ++j)
            for (int i = 1; i < g.nx(); ++i)
                nodal[axis][g.node_index(i, j)] =
                    results[axis]->x[static_cast<std::size_t>(g.free_index(i, j))];
    }
    return {system.grid, system.params, std::move(nodal), report};
}

struct SolveOptions {
    int subdivisions = 0;         ///< 0 picks the smallest count meeting default_element_size()
    std::optional<double> padding; ///< physical margin; default_padding() when unset
    double tol = 1e-10;
    int max_iter = 0; ///< 0 uses default_max_iterations()
};

inline int resolve_subdivisions(const CharacteristicField& field, const PdeParameters& params,
                                int requested) {
    if (requested > 0) return requested;
    return subdivisions_for(field.pixel_size(), params.default_element_size());
}

/// Pads, meshes, assembles and solves; features are later sampled on `field`'s pixels.
inline StateField solve_state(const CharacteristicField& field, const PdeParameters& params,
                              const SolveOptions& options = {}) {
    const double margin = options.padding.value_or(params.default_padding());
    const int subdivisions = resolve_subdivisions(field, params, options.subdivisions);
    auto grid = std::make_shared<const FemGrid>(pad_field(field, margin), subdivisions);
    StateField state = solve(assemble(grid, params), options.tol, options.max_iter);
    state.set_image(field);
    return state;
}

struct EnergyBalance {
    double bilinear = 0.0; ///< a~ |grad s_i|^2 + alpha |s_i|^2 over the white domain
    double source = 0.0;   ///< int chi d(s_i)/dx_i
};

/// Both sides of the variational identity with the test function set to the solution,
/// integrated element by element (independent of the assembled matrix).
inline EnergyBalance energy_balance(const StateField& state, int axis) {
    const FemGrid& g = state.grid();
    const ElementMatrices em(g.element_size());
    const auto& s = state.component(axis);
    const auto& p = state.params();
    EnergyBalance out;
    for (int ej = 0; ej < g.ny(); ++ej) {
        for (int ei = 0; ei < g.nx(); ++ei) {
            const auto nodes = g.element_nodes(ei, ej);
            const bool black = g.element_chi(ei, ej) != 0;
            for (int a = 0; a < 4; ++a) {
                const double ua = s[nodes[a]];
                if (black) out.source += em.source[axis][a] * ua;
                for (int b = 0; b < 4; ++b) {
                    double k = p.a_tilde() * em.stiffness[a][b];
                    if (!black) k += p.alpha() * em.mass[a][b];
                    out.bilinear += ua * k * s[nodes[b]];
                }
            }
        }
    }
    return out;
}

} // namespace shapefeat
