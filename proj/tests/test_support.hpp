#pragma once

#include "mehdg/bench.hpp"
#include "mehdg/csv.hpp"

#include <random>

namespace testing_support
{

using namespace mehdg;

inline Vec2 macro_point(const MacroMesh& mesh, int macro, const Vec2& xi)
{
    return reference_to_physical(mesh.corners(macro)).to_physical(xi);
}

/// Nodal interpolation of (q*, u*) = (-grad u*, u*) into patch coefficients.
inline std::vector<Vector> interpolate_interior(const MacroMesh& mesh, int p, const ScalarField& u,
                                                const std::function<Vec2(const Vec2&)>& grad)
{
    std::vector<Vector> out;
    for (const auto& k : mesh.macros) {
        const PatchDofMap map = build_patch_dof_map(k, p);
        const int Q = map.dof_count;
        Vector c(3 * Q);
        for (int i = 0; i < Q; ++i) {
            const Vec2 x = macro_point(mesh, k.id, map.node_reference[i]);
            const Vec2 g = grad(x);
            c[i] = -g.x();
            c[Q + i] = -g.y();
            c[2 * Q + i] = u(x);
        }
        out.push_back(c);
    }
    return out;
}

/// Trace interpolation on every unknown face.
inline Vector interpolate_trace(const MacroMesh& mesh, const TraceSpace& ts, const ScalarField& u)
{
    Vector out = Vector::Zero(ts.size);
    for (int f : ts.unknown_faces) {
        const auto& layout = ts.layouts[f];
        for (int k = 0; k < layout.size(); ++k)
            out[ts.face_offset[f] + k] = u(mesh.skeleton[f].point(layout.node(k)));
    }
    return out;
}

/// Residual of the uncondensed block system; `sys` must not be condensed yet.
struct BlockResidual
{
    double local = 0.0;
    double global = 0.0;
    double rhs_norm = 0.0;
};

inline BlockResidual block_residual(const CondensedSystem& sys, const std::vector<Vector>& x, const Vector& u_hat)
{
    BlockResidual r;
    std::vector<Vector> cx(sys.locals.size());
    for (std::size_t e = 0; e < sys.locals.size(); ++e) {
        const auto& L = sys.locals[e];
        const Vector ue = gather_trace(sys, static_cast<int>(e), u_hat, false);
        const Vector res = L.A * x[e] + L.B * ue - L.R_u;
        r.local = std::max(r.local, res.cwiseAbs().maxCoeff());
        r.rhs_norm = std::max(r.rhs_norm, L.R_u.cwiseAbs().maxCoeff());
        cx[e] = L.C * x[e];
    }
    for (int f : sys.traces.unknown_faces) {
        const int off = sys.traces.face_offset[f];
        const auto& F = sys.faces[f];
        Vector res = F.D * u_hat.segment(off, F.D.rows()) - F.R_hat;
        for (const auto& side : sys.mesh->skeleton[f].sides) {
            const auto& seg = sys.traces.macro_segments[side.macro][side.edge];
            res.segment(seg.first_dof, seg.count) += cx[side.macro].segment(seg.local_offset, seg.count);
        }
        r.global = std::max(r.global, res.cwiseAbs().maxCoeff());
        r.rhs_norm = std::max(r.rhs_norm, F.R_hat.size() ? F.R_hat.cwiseAbs().maxCoeff() : 0.0);
    }
    return r;
}

inline Vector random_vector(int n, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Vector v(n);
    for (int i = 0; i < n; ++i)
        v[i] = U(rng);
    return v;
}

/// Brute-force face matching on vertex coordinates of macro triangles.
inline std::pair<int, int> brute_force_face_count(const MacroMesh& mesh)
{
    std::vector<std::array<Vec2, 2>> edges;
    for (const auto& k : mesh.macros) {
        const auto c = mesh.corners(k);
        for (int e = 0; e < 3; ++e)
            edges.push_back({c[e], c[(e + 1) % 3]});
    }
    int interior = 0, boundary = 0;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        int matches = 0;
        for (std::size_t j = 0; j < edges.size(); ++j) {
            if (i == j)
                continue;
            const bool same = ((edges[i][0] - edges[j][0]).norm() < 1e-12 && (edges[i][1] - edges[j][1]).norm() < 1e-12) ||
                              ((edges[i][0] - edges[j][1]).norm() < 1e-12 && (edges[i][1] - edges[j][0]).norm() < 1e-12);
            matches += same;
        }
        if (matches == 0)
            ++boundary;
        else
            ++interior;
    }
    return {interior / 2, boundary};
}

} // namespace testing_support
