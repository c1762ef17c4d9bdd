#ifndef MAXCQ_DISCRETIZATION_HPP
#define MAXCQ_DISCRETIZATION_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "maxcq/material.hpp"

namespace maxcq {

/// Uniform periodic mesh on [z_min, z_max]. Node j sits at z_min + j*h_z,
/// element j spans [node j, node j+1]; node count equals n_cells because of
/// the periodic identification.
struct Mesh1D {
    double z_min = 0.0;
    double z_max = 0.0;
    Eigen::Index n_cells = 0;
    double h_z = 0.0;

    Eigen::Index n_nodes() const { return n_cells; }
    double node_z(Eigen::Index j) const { return z_min + static_cast<double>(j) * h_z; }
    double midpoint_z(Eigen::Index j) const {
        return z_min + (static_cast<double>(j) + 0.5) * h_z;
    }
};

inline Mesh1D build_mesh(double z_min, double z_max, Eigen::Index n_cells) {
    if (!(z_max > z_min)) throw std::invalid_argument("build_mesh: z_max must exceed z_min");
    if (n_cells < 2) throw std::invalid_argument("build_mesh: n_cells must be at least 2");
    Mesh1D m;
    m.z_min = z_min;
    m.z_max = z_max;
    m.n_cells = n_cells;
    m.h_z = (z_max - z_min) / static_cast<double>(n_cells);
    return m;
}

struct MaterialRegion {
    double z_lo = 0.0;
    double z_hi = 0.0;
    std::string material;
};

/// Piecewise-constant material assignment. Regions must tile [z_min, z_max]
/// with no overlap; lookups treat each region as [z_lo, z_hi).
struct MaterialLayout {
    std::vector<MaterialModel> materials;
    std::vector<MaterialRegion> regions;

    Eigen::Index material_index(const std::string& name) const {
        for (std::size_t i = 0; i < materials.size(); ++i) {
            if (materials[i].name == name) return static_cast<Eigen::Index>(i);
        }
        return -1;
    }

    Eigen::Index region_material_at(double z) const {
        for (std::size_t i = 0; i < regions.size(); ++i) {
            const MaterialRegion& r = regions[i];
            const bool last_edge = (i + 1 == regions.size()) && z <= r.z_hi;
            if ((z >= r.z_lo && z < r.z_hi) || last_edge) return material_index(r.material);
        }
        return -1;
    }
};

inline MaterialLayout uniform_layout(MaterialModel material, double z_min, double z_max) {
    MaterialLayout layout;
    layout.regions.push_back({z_min, z_max, material.name});
    layout.materials.push_back(std::move(material));
    return layout;
}

inline std::vector<std::string> validate_layout(const MaterialLayout& layout, double z_min,
                                                double z_max) {
    std::vector<std::string> issues;
    if (layout.regions.empty()) {
        issues.push_back("layout: no regions");
        return issues;
    }
    std::vector<MaterialRegion> sorted = layout.regions;
    std::sort(sorted.begin(), sorted.end(),
              [](const MaterialRegion& a, const MaterialRegion& b) { return a.z_lo < b.z_lo; });
    const double tol = 1e-12 * (z_max - z_min);
    if (std::abs(sorted.front().z_lo - z_min) > tol) {
        issues.push_back("layout: first region does not start at z_min");
    }
    if (std::abs(sorted.back().z_hi - z_max) > tol) {
        issues.push_back("layout: last region does not end at z_max");
    }
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const MaterialRegion& r = sorted[i];
        if (!(r.z_hi > r.z_lo)) {
            issues.push_back("layout: region '" + r.material + "' has non-positive extent");
        }
        if (layout.material_index(r.material) < 0) {
            issues.push_back("layout: region references unknown material '" + r.material + "'");
        }
        if (i > 0) {
            const double gap = r.z_lo - sorted[i - 1].z_hi;
            if (gap > tol) issues.push_back("layout: gap before region '" + r.material + "'");
            if (gap < -tol) issues.push_back("layout: overlap at region '" + r.material + "'");
        }
    }
    for (const MaterialModel& m : layout.materials) {
        const ValidationReport r = validate_model(m);
        for (const std::string& s : r.issues) issues.push_back("material '" + m.name + "': " + s);
    }
    return issues;
}

/// Region and coefficient data for one Debye pole of one material,
/// restricted to the nodes assigned to that material. mask is 1 on those
/// nodes and 0 elsewhere; the diagonal matrices vanish off the region.
struct PoleSlot {
    Eigen::Index material_index = -1;
    DebyePole pole;
    Eigen::ArrayXd mask;
    Eigen::ArrayXd md_diag;  // h_z * tau_relax / (eps0 * delta_eps) on the region
    Eigen::ArrayXd mp_diag;  // h_z / (eps0 * delta_eps) on the region
};

/// Diagonal lumped-mass operators and the periodic difference matrix,
/// applied matrix-free. (C e)_j = e_{j+1} - e_j and (C^T h)_k = h_{k-1} - h_k,
/// indices mod n.
struct DiscreteOperators {
    Mesh1D mesh;
    Eigen::ArrayXd mh;        // element diagonal, mu0 * h_z
    Eigen::ArrayXd me;        // nodal diagonal, eps0 * eps_inf(node) * h_z
    double m_lumped = 0.0;    // nodal diagonal is m_lumped * I with m_lumped = h_z
    std::vector<Eigen::Index> node_material;  // index into layout.materials
    std::vector<PoleSlot> pole_slots;
};

inline Eigen::VectorXd apply_curl(const Eigen::VectorXd& e) {
    const Eigen::Index n = e.size();
    Eigen::VectorXd out(n);
    for (Eigen::Index j = 0; j < n; ++j) out[j] = e[(j + 1) % n] - e[j];
    return out;
}

inline Eigen::VectorXd apply_curl_transpose(const Eigen::VectorXd& h) {
    const Eigen::Index n = h.size();
    Eigen::VectorXd out(n);
    for (Eigen::Index k = 0; k < n; ++k) out[k] = h[(k + n - 1) % n] - h[k];
    return out;
}

inline Eigen::MatrixXd curl_matrix(Eigen::Index n) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        c(j, j) = -1.0;
        c(j, (j + 1) % n) = 1.0;
    }
    return c;
}

/// Assembles mass matrices and per-pole region data. A node shared by two
/// elements of different materials takes the material of the element to its
/// right, so node j inherits element j's material (element material sampled
/// at the midpoint).
inline DiscreteOperators build_operators(const Mesh1D& mesh, const MaterialLayout& layout,
                                         const PhysicalConstants& constants) {
    {
        const std::vector<std::string> issues = validate_layout(layout, mesh.z_min, mesh.z_max);
        if (!issues.empty()) {
            throw std::invalid_argument("build_operators: " + issues.front());
        }
    }
    DiscreteOperators ops;
    ops.mesh = mesh;
    const Eigen::Index n = mesh.n_nodes();
    ops.mh = Eigen::ArrayXd::Constant(mesh.n_cells, constants.mu0 * mesh.h_z);
    ops.m_lumped = mesh.h_z;
    ops.me.resize(n);
    ops.node_material.resize(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index mat = layout.region_material_at(mesh.midpoint_z(j));
        if (mat < 0) throw std::invalid_argument("build_operators: uncovered element midpoint");
        ops.node_material[static_cast<std::size_t>(j)] = mat;
        ops.me[j] = constants.eps0 * layout.materials[static_cast<std::size_t>(mat)].eps_inf() *
                    mesh.h_z;
    }
    for (std::size_t mi = 0; mi < layout.materials.size(); ++mi) {
        const MaterialModel& m = layout.materials[mi];
        if (!m.dispersive()) continue;
        Eigen::ArrayXd mask = Eigen::ArrayXd::Zero(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (ops.node_material[static_cast<std::size_t>(j)] ==
                static_cast<Eigen::Index>(mi)) {
                mask[j] = 1.0;
            }
        }
        for (const DebyePole& p : m.poles) {
            PoleSlot slot;
            slot.material_index = static_cast<Eigen::Index>(mi);
            slot.pole = p;
            slot.mask = mask;
            slot.md_diag = mask * (mesh.h_z * p.tau_relax / (constants.eps0 * p.delta_eps));
            slot.mp_diag = mask * (mesh.h_z / (constants.eps0 * p.delta_eps));
            ops.pole_slots.push_back(std::move(slot));
        }
    }
    return ops;
}

struct CflResult {
    double tau_max = 0.0;
    double lambda_max = 0.0;
    long iterations = 0;
};

/// Largest generalized eigenvalue of C^T M_h^{-1} C versus M_e by power
/// iteration, seeded with a fixed pseudorandom vector (mt19937, seed 12345).
/// tau_max = 1/sqrt(lambda_max). The top of the spectrum is clustered on
/// fine meshes, so convergence is judged on the Rayleigh-quotient change
/// over blocks of 500 iterations; throws after the iteration cap.
inline CflResult cfl_bound(const DiscreteOperators& ops, double rel_tol = 1e-12,
                           long max_iterations = 8000000) {
    const Eigen::Index n = ops.mesh.n_nodes();
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::VectorXd x(n);
    for (Eigen::Index j = 0; j < n; ++j) x[j] = dist(rng);
    x.normalize();

    const auto apply = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd w = apply_curl(v);
        w.array() /= ops.mh;
        Eigen::VectorXd u = apply_curl_transpose(w);
        u.array() /= ops.me;
        return u;
    };
    const auto rayleigh = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& av) {
        return (v.array() * ops.me * av.array()).sum() / (v.array() * ops.me * v.array()).sum();
    };

    const long block = 500;
    double lambda = 0.0;
    double lambda_block = -1.0;
    long it = 0;
    while (it < max_iterations) {
        Eigen::VectorXd ax = apply(x);
        lambda = rayleigh(x, ax);
        x = ax / ax.norm();
        ++it;
        if (it % block == 0) {
            if (lambda_block >= 0.0 && std::abs(lambda - lambda_block) <= rel_tol * lambda) {
                break;
            }
            lambda_block = lambda;
        }
    }
    if (it >= max_iterations) {
        throw std::runtime_error("cfl_bound: power iteration did not converge");
    }
    CflResult r;
    r.lambda_max = lambda;
    r.tau_max = 1.0 / std::sqrt(lambda);
    r.iterations = it;
    return r;
}

/// Dense generalized eigensolve for small test meshes.
inline double cfl_bound_dense(const DiscreteOperators& ops) {
    const Eigen::Index n = ops.mesh.n_nodes();
    const Eigen::MatrixXd c = curl_matrix(n);
    const Eigen::MatrixXd a = c.transpose() * ops.mh.inverse().matrix().asDiagonal() * c;
    const Eigen::MatrixXd mei_sqrt =
        ops.me.sqrt().inverse().matrix().asDiagonal();
    const Eigen::MatrixXd sym = mei_sqrt * a * mei_sqrt;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sym + sym.transpose()));
    return 1.0 / std::sqrt(es.eigenvalues().maxCoeff());
}

}  // namespace maxcq

#endif
