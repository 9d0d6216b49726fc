#pragma once

#include "mehdg/types.hpp"

#include <array>
#include <iosfwd>
#include <set>
#include <vector>

namespace mehdg
{

/// Affine map from the reference triangle (0,0),(1,0),(0,1) onto a physical triangle.
struct AffineMap
{
    Mat2 jacobian;
    Mat2 inverse_jacobian;
    Vec2 offset;
    double det = 0.0;
    /// Unit outward normal of edge j, which runs from vertex j to vertex j+1.
    std::array<Vec2, 3> normals;

    Vec2 to_physical(const Vec2& ref) const { return offset + jacobian * ref; }
    Vec2 to_reference(const Vec2& x) const { return inverse_jacobian * (x - offset); }
};

/// Throws DegenerateGeometry for a zero-area (or clockwise) triangle.
AffineMap reference_to_physical(const std::array<Vec2, 3>& vertices);

double triangle_area(const std::array<Vec2, 3>& v);
double triangle_diameter(const std::array<Vec2, 3>& v);

/// Integer lattice vertices (units 1/m, macro reference frame) of the m^2 "red" sub-triangles.
struct SubTriangle
{
    std::array<std::array<int, 2>, 3> v;
};
std::vector<SubTriangle> red_subdivision(int m);
/// Sub-triangle index containing macro reference point xi (clamped onto the macro).
int locate_sub_triangle(int m, const Vec2& xi);

enum class FaceKind
{
    Interior,
    Hanging,
    Boundary
};

/// Portion of a skeleton face covered by one macro edge. Parameters t refer to the face,
/// t_start at the macro's vertex `edge`, t_end at vertex `edge+1`.
struct FaceSide
{
    int macro = -1;
    int edge = -1;
    double t_start = 0.0;
    double t_end = 1.0;
    double t_min() const { return std::min(t_start, t_end); }
    double t_max() const { return std::max(t_start, t_end); }
};

struct SkeletonFace
{
    int id = -1;
    std::array<Vec2, 2> vertices; ///< face parameter runs from vertices[0] (t=0) to vertices[1]
    FaceKind kind = FaceKind::Interior;
    int sub_faces = 1;            ///< m_f: equal segments of the face trace
    std::vector<FaceSide> sides;  ///< sorted by macro id; hanging faces list the coarse side first

    bool boundary() const { return kind == FaceKind::Boundary; }
    bool hanging() const { return kind == FaceKind::Hanging; }
    double length() const { return (vertices[1] - vertices[0]).norm(); }
    Vec2 point(double t) const { return vertices[0] + t * (vertices[1] - vertices[0]); }
};

struct MacroEdge
{
    int face = -1;
    double t_start = 0.0;
    double t_end = 1.0;
};

struct MacroElement
{
    int id = -1;
    std::array<int, 3> vertices{};
    int m = 1;
    int level = 0;
    std::vector<std::array<Vec2, 3>> sub_elements;
    std::array<MacroEdge, 3> edges; ///< boundary_faces: edge j runs from vertex j to j+1
};

struct MacroMesh
{
    int d = 2;
    int n = 1;
    int m = 1;
    std::vector<Vec2> vertices;
    std::vector<MacroElement> macros;
    std::vector<SkeletonFace> skeleton;

    std::array<Vec2, 3> corners(const MacroElement& k) const
    {
        return {vertices[k.vertices[0]], vertices[k.vertices[1]], vertices[k.vertices[2]]};
    }
    std::array<Vec2, 3> corners(int macro) const { return corners(macros[macro]); }
    std::size_t interior_face_count() const;
    std::size_t boundary_face_count() const;
    std::size_t sub_element_count() const;
    int max_level() const;
};

/// Uniform macro mesh of the unit square: 2 n^2 macro triangles (cells split along the
/// (i,j)-(i+1,j+1) diagonal), each subdivided into m^2 sub-triangles. Only d = 2 builds
/// geometry; use build_simplex_complex for d = 3 counting.
MacroMesh build_structured_macro_mesh(int d, int n, int m);

/// Dyadic red refinement of the marked macros plus closure to 2:1 balance across faces.
MacroMesh refine_macros(const MacroMesh& mesh, const std::set<int>& marked);

/// Recompute sub-elements and the skeleton of a mesh whose macros/vertices were edited.
void rebuild_topology(MacroMesh& mesh);

/// Vertex/cell lists of the Kuhn (Freudenthal) split of [0,1]^d into d! n^d simplices,
/// with face incidence, for counting in d = 2 or 3.
struct SimplexComplex
{
    int d = 2;
    std::vector<std::array<double, 3>> vertices;
    std::vector<std::vector<int>> cells;
    std::size_t interior_faces = 0;
    std::size_t boundary_faces = 0;
};
SimplexComplex build_simplex_complex(int d, int n);

/// Text export: `v x y`, `e i j k macro_id` per sub-element, `f left right tag`.
void write_mesh_text(const MacroMesh& mesh, std::ostream& os);
void write_mesh_vtk(const MacroMesh& mesh, std::ostream& os);

} // namespace mehdg
