#pragma once

#include "mehdg/fem_basis.hpp"
#include "mehdg/mesh.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <vector>

namespace mehdg
{

enum class BoundaryTag
{
    Dirichlet,
    Neumann
};

using ScalarField = std::function<double(const Vec2&)>;
/// Neumann data g_N(x, n) = (a u - kappa grad u) . n on the boundary.
using FluxField = std::function<double(const Vec2&, const Vec2&)>;

/// Steady advection-diffusion  div(a u) - div(kappa grad u) = f  with constant a.
struct ProblemData
{
    Vec2 advection = Vec2::Zero();
    double kappa = 1.0;
    ScalarField source = [](const Vec2&) { return 0.0; };
    ScalarField dirichlet = [](const Vec2&) { return 0.0; };
    FluxField neumann = [](const Vec2&, const Vec2&) { return 0.0; };
    /// Tag of a boundary face from its midpoint and outward normal; Dirichlet by default.
    std::function<BoundaryTag(const Vec2&, const Vec2&)> boundary_tag = [](const Vec2&, const Vec2&) {
        return BoundaryTag::Dirichlet;
    };

    void validate() const;
};

enum class SupgVariant
{
    ClassicalMinus, ///< h/(2|a|) (coth Pe - 1/Pe)
    PaperPlus       ///< h/(2|a|) (coth Pe + 1/Pe)
};

/// Length scale l in the diffusive part kappa / l of the flux stabilization.
enum class TauLength
{
    SubElement, ///< diameter of the sub-elements of the adjacent macro
    Macro       ///< diameter of the adjacent macro-element
};

struct StabilizationConfig
{
    TauLength tau_length = TauLength::SubElement;
    bool supg = false;
    SupgVariant supg_variant = SupgVariant::ClassicalMinus;
    /// Added to the default quadrature exactness (2p+1, or 2p+2 with SUPG).
    int extra_quadrature = 0;
};

/// tau = |a.n| + kappa / length.
double stabilization_tau(const Vec2& advection, double kappa, const Vec2& normal, double length);
/// Length entering tau for one side of a face owned by `macro`.
double tau_length(const MacroMesh& mesh, int macro, const StabilizationConfig& stab);

double element_peclet(double h, double speed, double kappa);
/// SUPG parameter of an element of diameter h; zero when a = 0.
double supg_parameter(double h, const Vec2& advection, double kappa, SupgVariant variant);

/// Global numbering of the unknown trace dofs and per-macro local trace layout.
struct TraceSpace
{
    struct Segment
    {
        int edge = -1;
        int face = -1;
        int first_dof = 0; ///< first face dof covered by this macro edge
        int count = 0;
        int local_offset = 0;
    };

    int p = 1;
    int size = 0; ///< z-hat: number of unknown trace dofs
    std::vector<FaceTraceLayout> layouts;
    std::vector<BoundaryTag> boundary_tags; ///< meaningful on boundary faces only
    std::vector<int> face_offset;           ///< global offset or -1 on Dirichlet faces
    std::vector<Vector> dirichlet_values;   ///< L2-projected data, Dirichlet faces only
    std::vector<int> unknown_faces;         ///< face ids in increasing order
    std::vector<std::array<Segment, 3>> macro_segments;
    std::vector<int> macro_trace_size;
    std::vector<std::vector<int>> local_to_global; ///< per macro, -1 on Dirichlet faces

    bool is_dirichlet(int face) const { return face_offset[face] < 0; }
    /// Global index of local trace dof `k` of `macro`, or -1 on Dirichlet faces.
    int global_index(int macro, int k) const;
};

TraceSpace build_trace_space(const MacroMesh& mesh, int p, const ProblemData& problem);

enum class StorageMode
{
    Dense,
    Sparse
};

/// Dense for m <= 2, compressed sparse otherwise.
StorageMode storage_for(int m);

class LocalMatrix
{
  public:
    using Sparse = Eigen::SparseMatrix<double>;

    LocalMatrix() = default;
    static LocalMatrix from_triplets(int rows, int cols, const std::vector<Eigen::Triplet<double>>& t,
                                     StorageMode mode);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    StorageMode mode() const { return mode_; }
    bool empty() const { return rows_ == 0 && cols_ == 0; }

    Vector operator*(const Vector& x) const;
    Matrix operator*(const Matrix& x) const;
    Matrix to_dense() const;
    const Matrix& dense() const { return dense_; }
    const Sparse& sparse() const { return sparse_; }

    /// Stored values (rows*cols when dense).
    std::size_t stored_values() const;
    /// Structurally nonzero entries with |a_ij| > 0.
    std::size_t nonzeros() const;
    std::size_t bytes() const { return 8 * stored_values(); }
    void release();

  private:
    int rows_ = 0;
    int cols_ = 0;
    StorageMode mode_ = StorageMode::Dense;
    Matrix dense_;
    Sparse sparse_;
};

/// Per-macro blocks. Unknown order (q_x, q_y, u), each Q patch dofs; trace columns in local
/// trace order (edges 0,1,2). Dirichlet data is already eliminated into R_u.
struct LocalOperators
{
    int macro = -1;
    int Q = 0;
    StorageMode storage = StorageMode::Dense;
    LocalMatrix A;
    LocalMatrix B;
    LocalMatrix C;
    Vector R_u;
};

struct FaceOperator
{
    int face = -1;
    Matrix D;
    Vector R_hat;
};

/// Evaluates the C0 patch basis of one macro-element at physical points.
class PatchEvaluator
{
  public:
    PatchEvaluator(const MacroMesh& mesh, int macro, const PatchDofMap& map, const LagrangeBasis& basis);

    struct Sample
    {
        int sub_element = -1;
        Vector values;    ///< local basis values (size of the element basis)
        Matrix gradients; ///< physical gradients, local basis x 2
    };

    Sample at(const Vec2& x, bool with_gradients = false) const;
    /// Patch-level value of a field with patch coefficients `c` at x.
    double value(const Vector& c, const Vec2& x) const;
    Vec2 gradient(const Vector& c, const Vec2& x) const;

    const AffineMap& macro_map() const { return macro_map_; }
    const std::vector<AffineMap>& sub_maps() const { return sub_maps_; }
    const PatchDofMap& dof_map() const { return *map_; }
    const LagrangeBasis& basis() const { return *basis_; }

  private:
    const PatchDofMap* map_;
    const LagrangeBasis* basis_;
    int m_;
    AffineMap macro_map_;
    std::vector<AffineMap> sub_maps_;
};

int default_quadrature_degree(int p, const StabilizationConfig& stab);

LocalOperators assemble_macro(const MacroMesh& mesh, int macro, const PatchDofMap& map, const TraceSpace& traces,
                              const ProblemData& problem, const StabilizationConfig& stab);

/// D and R_hat of an unknown face; empty D on Dirichlet faces.
FaceOperator assemble_face(const MacroMesh& mesh, int face, const TraceSpace& traces, const ProblemData& problem,
                           const StabilizationConfig& stab);

/// Trace mass matrix over parameter interval [t0, t1] of the face.
Matrix face_mass_matrix(const SkeletonFace& face, const FaceTraceLayout& layout, double t0 = 0.0, double t1 = 1.0,
                        int extra_quadrature = 0);

/// L2 projection of g onto the face trace space.
Vector project_dirichlet(const SkeletonFace& face, const FaceTraceLayout& layout, const ScalarField& g);

} // namespace mehdg
