#include "mehdg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

namespace mehdg
{

namespace
{

using PointKey = std::array<long long, 2>;
using SegmentKey = std::array<long long, 4>;

struct Quantizer
{
    double scale;
    PointKey operator()(const Vec2& x) const
    {
        return {std::llround(x.x() * scale), std::llround(x.y() * scale)};
    }
    SegmentKey segment(const Vec2& a, const Vec2& b) const
    {
        PointKey ka = (*this)(a), kb = (*this)(b);
        if (kb < ka)
            std::swap(ka, kb);
        return {ka[0], ka[1], kb[0], kb[1]};
    }
};

Quantizer make_quantizer(const MacroMesh& mesh)
{
    // vertices sit on the k / (n 2^L) lattice; quarter points of the coarsest edges need L+2
    const int level = std::min(mesh.max_level() + 3, 40);
    return Quantizer{static_cast<double>(mesh.n) * std::ldexp(1.0, level)};
}

bool on_unit_square_boundary(const Vec2& a, const Vec2& b)
{
    constexpr double eps = 1e-12;
    for (int c = 0; c < 2; ++c) {
        if (std::abs(a[c]) < eps && std::abs(b[c]) < eps)
            return true;
        if (std::abs(a[c] - 1.0) < eps && std::abs(b[c] - 1.0) < eps)
            return true;
    }
    return false;
}

double face_parameter(const SkeletonFace& f, const Vec2& x)
{
    const Vec2 e = f.vertices[1] - f.vertices[0];
    const double t = (x - f.vertices[0]).dot(e) / e.squaredNorm();
    // snap to the dyadic values the mesh can produce
    const double snapped = std::round(t * 4.0) / 4.0;
    return std::abs(snapped - t) < 1e-12 ? snapped : t;
}

void build_sub_elements(MacroMesh& mesh)
{
    for (auto& k : mesh.macros) {
        const auto c = mesh.corners(k);
        const Vec2 e1 = (c[1] - c[0]) / k.m;
        const Vec2 e2 = (c[2] - c[0]) / k.m;
        k.sub_elements.clear();
        for (const auto& t : red_subdivision(k.m)) {
            std::array<Vec2, 3> v;
            for (int a = 0; a < 3; ++a)
                v[a] = c[0] + t.v[a][0] * e1 + t.v[a][1] * e2;
            k.sub_elements.push_back(v);
        }
    }
}

void build_skeleton(MacroMesh& mesh)
{
    const Quantizer q = make_quantizer(mesh);
    std::map<SegmentKey, std::vector<std::pair<int, int>>> owners;
    for (const auto& k : mesh.macros) {
        const auto c = mesh.corners(k);
        for (int e = 0; e < 3; ++e)
            owners[q.segment(c[e], c[(e + 1) % 3])].emplace_back(k.id, e);
    }

    auto other_owner = [&](const Vec2& a, const Vec2& b, int self) -> std::pair<int, int> {
        auto it = owners.find(q.segment(a, b));
        if (it == owners.end())
            return {-1, -1};
        for (const auto& o : it->second)
            if (o.first != self)
                return o;
        return {-1, -1};
    };

    mesh.skeleton.clear();
    std::vector<std::array<bool, 3>> assigned(mesh.macros.size(), {false, false, false});

    auto attach = [&](SkeletonFace& f, int macro, int edge) {
        const auto c = mesh.corners(macro);
        FaceSide s;
        s.macro = macro;
        s.edge = edge;
        s.t_start = face_parameter(f, c[edge]);
        s.t_end = face_parameter(f, c[(edge + 1) % 3]);
        f.sides.push_back(s);
        mesh.macros[macro].edges[edge] = MacroEdge{f.id, s.t_start, s.t_end};
        assigned[macro][edge] = true;
    };

    auto make_hanging = [&](int coarse, int cedge) {
        const auto c = mesh.corners(coarse);
        const Vec2 a = c[cedge], b = c[(cedge + 1) % 3], mid = 0.5 * (a + b);
        const auto lo = other_owner(a, mid, coarse);
        const auto hi = other_owner(mid, b, coarse);
        if (lo.first < 0 || hi.first < 0)
            throw Error("mesh is not 2:1 balanced near macro-element " + std::to_string(coarse));
        SkeletonFace f;
        f.id = static_cast<int>(mesh.skeleton.size());
        f.vertices = {a, b};
        f.kind = FaceKind::Hanging;
        f.sub_faces = 2 * mesh.macros[coarse].m;
        attach(f, coarse, cedge);
        attach(f, lo.first, lo.second);
        attach(f, hi.first, hi.second);
        mesh.skeleton.push_back(std::move(f));
    };

    for (const auto& k : mesh.macros) {
        const auto c = mesh.corners(k);
        for (int e = 0; e < 3; ++e) {
            if (assigned[k.id][e])
                continue;
            const Vec2 a = c[e], b = c[(e + 1) % 3];

            // half of a coarser neighbour's edge
            auto parent = other_owner(a, 2.0 * b - a, k.id);
            if (parent.first < 0)
                parent = other_owner(2.0 * a - b, b, k.id);
            if (parent.first >= 0) {
                make_hanging(parent.first, parent.second);
                continue;
            }

            const auto twin = other_owner(a, b, k.id);
            if (twin.first >= 0) {
                SkeletonFace f;
                f.id = static_cast<int>(mesh.skeleton.size());
                f.vertices = {a, b};
                f.kind = FaceKind::Interior;
                f.sub_faces = k.m;
                attach(f, k.id, e);
                attach(f, twin.first, twin.second);
                std::sort(f.sides.begin(), f.sides.end(),
                          [](const FaceSide& x, const FaceSide& y) { return x.macro < y.macro; });
                mesh.skeleton.push_back(std::move(f));
                continue;
            }

            const Vec2 mid = 0.5 * (a + b);
            if (other_owner(a, mid, k.id).first >= 0 && other_owner(mid, b, k.id).first >= 0) {
                make_hanging(k.id, e);
                continue;
            }

            if (!on_unit_square_boundary(a, b))
                throw Error("unmatched interior edge on macro-element " + std::to_string(k.id));
            SkeletonFace f;
            f.id = static_cast<int>(mesh.skeleton.size());
            f.vertices = {a, b};
            f.kind = FaceKind::Boundary;
            f.sub_faces = k.m;
            attach(f, k.id, e);
            mesh.skeleton.push_back(std::move(f));
        }
    }
}

int add_vertex(MacroMesh& mesh, std::map<PointKey, int>& index, const Quantizer& q, const Vec2& x)
{
    const auto key = q(x);
    auto it = index.find(key);
    if (it != index.end())
        return it->second;
    const int id = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(x);
    index.emplace(key, id);
    return id;
}

MacroMesh red_refine(const MacroMesh& mesh, const std::vector<bool>& flag)
{
    MacroMesh out;
    out.d = mesh.d;
    out.n = mesh.n;
    out.m = mesh.m;
    out.vertices = mesh.vertices;
    MacroMesh probe = mesh;
    for (auto& k : probe.macros)
        k.level += 1;
    const Quantizer q = make_quantizer(probe);
    std::map<PointKey, int> index;
    for (int i = 0; i < static_cast<int>(out.vertices.size()); ++i)
        index.emplace(q(out.vertices[i]), i);

    for (const auto& k : mesh.macros) {
        if (!flag[k.id]) {
            MacroElement copy;
            copy.id = static_cast<int>(out.macros.size());
            copy.vertices = k.vertices;
            copy.m = k.m;
            copy.level = k.level;
            out.macros.push_back(copy);
            continue;
        }
        const auto c = mesh.corners(k);
        const int v0 = k.vertices[0], v1 = k.vertices[1], v2 = k.vertices[2];
        const int m01 = add_vertex(out, index, q, 0.5 * (c[0] + c[1]));
        const int m12 = add_vertex(out, index, q, 0.5 * (c[1] + c[2]));
        const int m20 = add_vertex(out, index, q, 0.5 * (c[2] + c[0]));
        const std::array<std::array<int, 3>, 4> children = {
            {{v0, m01, m20}, {m01, v1, m12}, {m20, m12, v2}, {m12, m20, m01}}};
        for (const auto& ch : children) {
            MacroElement child;
            child.id = static_cast<int>(out.macros.size());
            child.vertices = ch;
            child.m = k.m;
            child.level = k.level + 1;
            out.macros.push_back(child);
        }
    }
    return out;
}

std::vector<bool> balance_violations(const MacroMesh& mesh)
{
    const Quantizer q = make_quantizer(mesh);
    std::map<SegmentKey, int> edges;
    for (const auto& k : mesh.macros) {
        const auto c = mesh.corners(k);
        for (int e = 0; e < 3; ++e)
            edges.emplace(q.segment(c[e], c[(e + 1) % 3]), k.id);
    }
    std::vector<bool> flag(mesh.macros.size(), false);
    for (const auto& k : mesh.macros) {
        const auto c = mesh.corners(k);
        for (int e = 0; e < 3 && !flag[k.id]; ++e) {
            const Vec2 a = c[e], b = c[(e + 1) % 3];
            for (int s = 0; s < 4; ++s) {
                const Vec2 x0 = a + 0.25 * s * (b - a), x1 = a + 0.25 * (s + 1) * (b - a);
                if (edges.count(q.segment(x0, x1))) {
                    flag[k.id] = true;
                    break;
                }
            }
        }
    }
    return flag;
}

} // namespace

AffineMap reference_to_physical(const std::array<Vec2, 3>& v)
{
    AffineMap map;
    map.offset = v[0];
    map.jacobian.col(0) = v[1] - v[0];
    map.jacobian.col(1) = v[2] - v[0];
    map.det = map.jacobian.determinant();
    const double scale = std::max((v[1] - v[0]).squaredNorm(), (v[2] - v[0]).squaredNorm());
    if (!(map.det > 1e-14 * scale))
        throw DegenerateGeometry("degenerate or inverted triangle");
    map.inverse_jacobian = map.jacobian.inverse();
    for (int e = 0; e < 3; ++e) {
        const Vec2 t = v[(e + 1) % 3] - v[e];
        map.normals[e] = Vec2(t.y(), -t.x()).normalized();
    }
    return map;
}

double triangle_area(const std::array<Vec2, 3>& v)
{
    const Vec2 a = v[1] - v[0], b = v[2] - v[0];
    return 0.5 * std::abs(a.x() * b.y() - a.y() * b.x());
}

double triangle_diameter(const std::array<Vec2, 3>& v)
{
    return std::max({(v[1] - v[0]).norm(), (v[2] - v[1]).norm(), (v[0] - v[2]).norm()});
}

std::vector<SubTriangle> red_subdivision(int m)
{
    std::vector<SubTriangle> out;
    out.reserve(static_cast<std::size_t>(m) * m);
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i + j < m; ++i) {
            out.push_back({{{{i, j}, {i + 1, j}, {i, j + 1}}}});
            if (i + j + 1 < m)
                out.push_back({{{{i + 1, j}, {i + 1, j + 1}, {i, j + 1}}}});
        }
    }
    return out;
}

int locate_sub_triangle(int m, const Vec2& xi)
{
    const double sx = xi.x() * m, sy = xi.y() * m;
    const int i = std::clamp(static_cast<int>(std::floor(sx)), 0, m - 1);
    const int j = std::clamp(static_cast<int>(std::floor(sy)), 0, m - 1 - i);
    const double r = sx - i, t = sy - j;
    const int row = j * (2 * m - j);
    if (i + j == m - 1 || r + t <= 1.0)
        return row + 2 * i;
    return row + 2 * i + 1;
}

std::size_t MacroMesh::interior_face_count() const
{
    return static_cast<std::size_t>(std::count_if(skeleton.begin(), skeleton.end(),
                                                  [](const SkeletonFace& f) { return !f.boundary(); }));
}

std::size_t MacroMesh::boundary_face_count() const { return skeleton.size() - interior_face_count(); }

std::size_t MacroMesh::sub_element_count() const
{
    std::size_t n = 0;
    for (const auto& k : macros)
        n += k.sub_elements.size();
    return n;
}

int MacroMesh::max_level() const
{
    int l = 0;
    for (const auto& k : macros)
        l = std::max(l, k.level);
    return l;
}

void rebuild_topology(MacroMesh& mesh)
{
    build_sub_elements(mesh);
    build_skeleton(mesh);
}

MacroMesh build_structured_macro_mesh(int d, int n, int m)
{
    if (d != 2)
        throw InvalidArgument("macro mesh geometry is available for d = 2 only (use build_simplex_complex to count d = 3)");
    if (n < 1 || m < 1)
        throw InvalidArgument("n and m must be at least 1");
    MacroMesh mesh;
    mesh.d = d;
    mesh.n = n;
    mesh.m = m;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            mesh.vertices.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n);
    auto v = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            MacroElement lower, upper;
            lower.id = static_cast<int>(mesh.macros.size());
            lower.vertices = {v(i, j), v(i + 1, j), v(i + 1, j + 1)};
            lower.m = m;
            mesh.macros.push_back(lower);
            upper.id = static_cast<int>(mesh.macros.size());
            upper.vertices = {v(i, j), v(i + 1, j + 1), v(i, j + 1)};
            upper.m = m;
            mesh.macros.push_back(upper);
        }
    }
    rebuild_topology(mesh);
    return mesh;
}

MacroMesh refine_macros(const MacroMesh& mesh, const std::set<int>& marked)
{
    std::vector<bool> flag(mesh.macros.size(), false);
    for (int id : marked) {
        if (id < 0 || id >= static_cast<int>(mesh.macros.size()))
            throw InvalidArgument("marked macro id out of range: " + std::to_string(id));
        flag[id] = true;
    }
    if (marked.empty())
        return mesh;
    MacroMesh out = red_refine(mesh, flag);
    for (;;) {
        const auto violators = balance_violations(out);
        if (std::none_of(violators.begin(), violators.end(), [](bool b) { return b; }))
            break;
        out = red_refine(out, violators);
    }
    rebuild_topology(out);
    return out;
}

SimplexComplex build_simplex_complex(int d, int n)
{
    if (d != 2 && d != 3)
        throw InvalidArgument("simplex complex supports d = 2 or 3");
    if (n < 1)
        throw InvalidArgument("n must be at least 1");
    SimplexComplex sc;
    sc.d = d;
    const int side = n + 1;
    const int kmax = d == 3 ? n : 0;
    auto vid = [&](int i, int j, int k) { return (k * side + j) * side + i; };
    for (int k = 0; k <= kmax; ++k)
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i)
                sc.vertices.push_back({double(i) / n, double(j) / n, d == 3 ? double(k) / n : 0.0});

    std::map<std::vector<int>, int> faces;
    std::vector<int> perm(d);
    const int kcells = d == 3 ? n : 1;
    for (int k = 0; k < kcells; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                std::iota(perm.begin(), perm.end(), 0);
                do {
                    std::array<int, 3> x = {i, j, k};
                    std::vector<int> cell = {vid(x[0], x[1], x[2])};
                    for (int s = 0; s < d; ++s) {
                        ++x[perm[s]];
                        cell.push_back(vid(x[0], x[1], x[2]));
                    }
                    for (int omit = 0; omit <= d; ++omit) {
                        std::vector<int> f;
                        for (int a = 0; a <= d; ++a)
                            if (a != omit)
                                f.push_back(cell[a]);
                        std::sort(f.begin(), f.end());
                        ++faces[f];
                    }
                    sc.cells.push_back(std::move(cell));
                } while (std::next_permutation(perm.begin(), perm.end()));
            }
    for (const auto& [f, count] : faces) {
        if (count == 2)
            ++sc.interior_faces;
        else
            ++sc.boundary_faces;
    }
    return sc;
}

void write_mesh_text(const MacroMesh& mesh, std::ostream& os)
{
    const Quantizer q = make_quantizer(mesh);
    std::map<PointKey, int> index;
    std::vector<Vec2> points;
    std::vector<std::array<int, 4>> elements;
    for (const auto& k : mesh.macros) {
        for (const auto& se : k.sub_elements) {
            std::array<int, 4> e{};
            for (int a = 0; a < 3; ++a) {
                auto [it, inserted] = index.emplace(q(se[a]), static_cast<int>(points.size()));
                if (inserted)
                    points.push_back(se[a]);
                e[a] = it->second;
            }
            e[3] = k.id;
            elements.push_back(e);
        }
    }
    const auto old = os.precision(17);
    for (const auto& x : points)
        os << "v " << x.x() << ' ' << x.y() << '\n';
    for (const auto& e : elements)
        os << "e " << e[0] << ' ' << e[1] << ' ' << e[2] << ' ' << e[3] << '\n';
    for (const auto& f : mesh.skeleton) {
        switch (f.kind) {
        case FaceKind::Boundary:
            os << "f " << f.sides[0].macro << " -1 boundary\n";
            break;
        case FaceKind::Interior:
            os << "f " << f.sides[0].macro << ' ' << f.sides[1].macro << " interior\n";
            break;
        case FaceKind::Hanging:
            for (std::size_t s = 1; s < f.sides.size(); ++s)
                os << "f " << f.sides[0].macro << ' ' << f.sides[s].macro << " hanging\n";
            break;
        }
    }
    os.precision(old);
}

void write_mesh_vtk(const MacroMesh& mesh, std::ostream& os)
{
    const std::size_t ne = mesh.sub_element_count();
    const auto old = os.precision(17);
    os << "# vtk DataFile Version 3.0\nmacro-element mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << 3 * ne << " double\n";
    for (const auto& k : mesh.macros)
        for (const auto& se : k.sub_elements)
            for (const auto& x : se)
                os << x.x() << ' ' << x.y() << " 0\n";
    os << "CELLS " << ne << ' ' << 4 * ne << '\n';
    for (std::size_t e = 0; e < ne; ++e)
        os << "3 " << 3 * e << ' ' << 3 * e + 1 << ' ' << 3 * e + 2 << '\n';
    os << "CELL_TYPES " << ne << '\n';
    for (std::size_t e = 0; e < ne; ++e)
        os << "5\n";
    os << "CELL_DATA " << ne << "\nSCALARS macro_id int 1\nLOOKUP_TABLE default\n";
    for (const auto& k : mesh.macros)
        for (std::size_t e = 0; e < k.sub_elements.size(); ++e)
            os << k.id << '\n';
    os.precision(old);
}

} // namespace mehdg
