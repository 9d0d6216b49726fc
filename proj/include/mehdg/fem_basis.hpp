#pragma once

#include "mehdg/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace mehdg
{

struct MacroElement;

/// Points and weights on the reference simplex {x_i >= 0, sum x_i <= 1}.
struct QuadratureRule
{
    int d = 0;
    int exactness = 0;
    std::vector<Eigen::VectorXd> points; ///< reference (Cartesian) coordinates
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    /// Barycentric coordinates (lambda_0 = 1 - sum x_i, then x_1..x_d).
    Eigen::VectorXd barycentric(std::size_t i) const;
};

/// Gauss-Legendre rule with `n` points on [0,1].
QuadratureRule gauss_legendre(int n);

/// Rule on the reference d-simplex (d = 1, 2, 3) exact up to total degree `degree`.
/// Collapsed-coordinate Gauss products; the centroid rule for degree <= 1.
QuadratureRule quadrature_rule(int d, int degree);

/// Equispaced nodal Lagrange basis of total degree p on the reference d-simplex.
class LagrangeBasis
{
  public:
    LagrangeBasis(int d, int p);

    int dimension() const { return d_; }
    int degree() const { return p_; }
    int size() const { return static_cast<int>(nodes_.size()); }
    const std::vector<Eigen::VectorXd>& nodes() const { return nodes_; }

    Vector values(const Eigen::VectorXd& x) const;
    /// size() x d matrix of reference gradients.
    Matrix gradients(const Eigen::VectorXd& x) const;
    /// size() x (d*d) matrix, row i holds the row-major Hessian of basis i.
    Matrix hessians(const Eigen::VectorXd& x) const;

  private:
    int d_;
    int p_;
    std::vector<Eigen::VectorXd> nodes_;
    std::vector<std::array<int, 3>> exponents_;
    Matrix coefficients_; // column j holds monomial coefficients of basis j
};

/// Shared immutable instance per (d, p); thread-safe.
const LagrangeBasis& reference_basis(int d, int p);

/// Multi-indices with |alpha| <= p, last coordinate varying slowest.
std::vector<std::array<int, 3>> simplex_lattice(int d, int p);

/// Index of lattice point (i, j) in the 2D ordering of simplex_lattice(2, n).
inline int lattice_index(int i, int j, int n) { return j * (n + 1) - j * (j - 1) / 2 + i; }

/// binom(m p + d, d): C0 dofs of a degree-p field on an m-subdivided d-simplex.
std::int64_t patch_dof_count(int d, int m, int p);

/// Scalar C0 dof numbering of one macro-element patch.
struct PatchDofMap
{
    int macro = -1;
    int m = 0;
    int p = 0;
    int dof_count = 0;                            ///< Q
    std::vector<std::vector<int>> element_dofs;   ///< sub-element local -> patch index
    std::array<std::vector<int>, 3> edge_dofs;    ///< patch dofs along macro edge j, vertex j to j+1
    std::vector<Vec2> node_reference;             ///< macro reference coordinates of each patch dof
};

PatchDofMap build_patch_dof_map(const MacroElement& macro, int p);
PatchDofMap build_patch_dof_map(int m, int p);

/// Piecewise-P_p C0 layout of a trace on a face split into `sub_faces` equal segments.
struct FaceTraceLayout
{
    int sub_faces = 0;
    int p = 0;
    int size() const { return sub_faces * p + 1; }
    /// Face parameter in [0,1] of trace dof k.
    double node(int k) const { return static_cast<double>(k) / (sub_faces * p); }
    /// Segment containing parameter t, clamped to the face.
    int segment(double t) const;
    /// Values of the p+1 dofs of `segment` at parameter t; dof index = segment*p + a.
    Vector segment_values(int segment, double t) const;
};

struct SkeletonFace;
struct MacroMesh;
/// Trace layout of `face`; throws InvalidArgument when an adjacent macro's edge does not
/// coincide with the face geometry at its recorded parameter interval.
FaceTraceLayout face_trace_map(const MacroMesh& mesh, const SkeletonFace& face, int p);

} // namespace mehdg
