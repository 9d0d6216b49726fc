#include "mehdg/assembly.hpp"

#include <cmath>
#include <limits>

namespace mehdg
{

namespace
{

using Triplets = std::vector<Eigen::Triplet<double>>;

// xi(Pe) in tau_supg = h/(2|a|) xi(Pe)
double supg_shape(double pe, SupgVariant variant)
{
    if (std::isinf(pe))
        return 1.0;
    if (variant == SupgVariant::ClassicalMinus) {
        if (pe < 1e-3)
            return pe / 3.0 - pe * pe * pe / 45.0;
        return 1.0 / std::tanh(pe) - 1.0 / pe;
    }
    return 1.0 / std::tanh(pe) + 1.0 / pe;
}

int segment_begin(double t, int sub_faces) { return static_cast<int>(std::llround(t * sub_faces)); }

Vec2 edge_normal(const MacroMesh& mesh, int macro, int edge)
{
    const auto c = mesh.corners(macro);
    const Vec2 t = c[(edge + 1) % 3] - c[edge];
    return Vec2(t.y(), -t.x()).normalized();
}

} // namespace

void ProblemData::validate() const
{
    if (!(kappa > 0.0))
        throw InvalidArgument("diffusion coefficient kappa must be positive");
    if (!source || !dirichlet || !neumann || !boundary_tag)
        throw InvalidArgument("problem data callbacks must be set");
}

double stabilization_tau(const Vec2& advection, double kappa, const Vec2& normal, double length)
{
    return std::abs(advection.dot(normal)) + kappa / length;
}

double tau_length(const MacroMesh& mesh, int macro, const StabilizationConfig& stab)
{
    const double d = triangle_diameter(mesh.corners(macro));
    return stab.tau_length == TauLength::Macro ? d : d / mesh.macros[macro].m;
}

double element_peclet(double h, double speed, double kappa)
{
    if (kappa <= 0.0)
        return std::numeric_limits<double>::infinity();
    return speed * h / (2.0 * kappa);
}

double supg_parameter(double h, const Vec2& advection, double kappa, SupgVariant variant)
{
    const double speed = advection.norm();
    if (speed == 0.0)
        return 0.0;
    return h / (2.0 * speed) * supg_shape(element_peclet(h, speed, kappa), variant);
}

int TraceSpace::global_index(int macro, int k) const { return local_to_global[macro][k]; }

TraceSpace build_trace_space(const MacroMesh& mesh, int p, const ProblemData& problem)
{
    TraceSpace ts;
    ts.p = p;
    const std::size_t nf = mesh.skeleton.size();
    ts.layouts.reserve(nf);
    ts.boundary_tags.assign(nf, BoundaryTag::Dirichlet);
    ts.face_offset.assign(nf, -1);
    ts.dirichlet_values.resize(nf);
    for (const auto& f : mesh.skeleton) {
        ts.layouts.push_back(face_trace_map(mesh, f, p));
        if (f.boundary()) {
            const auto& s = f.sides[0];
            ts.boundary_tags[f.id] = problem.boundary_tag(f.point(0.5), edge_normal(mesh, s.macro, s.edge));
        }
        if (f.boundary() && ts.boundary_tags[f.id] == BoundaryTag::Dirichlet) {
            ts.dirichlet_values[f.id] = project_dirichlet(f, ts.layouts.back(), problem.dirichlet);
        } else {
            ts.face_offset[f.id] = ts.size;
            ts.size += ts.layouts.back().size();
            ts.unknown_faces.push_back(f.id);
        }
    }

    ts.macro_segments.resize(mesh.macros.size());
    ts.macro_trace_size.assign(mesh.macros.size(), 0);
    ts.local_to_global.resize(mesh.macros.size());
    for (const auto& k : mesh.macros) {
        int offset = 0;
        for (int e = 0; e < 3; ++e) {
            const auto& me = k.edges[e];
            const auto& layout = ts.layouts[me.face];
            const int n = layout.sub_faces * p;
            TraceSpace::Segment seg;
            seg.edge = e;
            seg.face = me.face;
            seg.first_dof = static_cast<int>(std::llround(std::min(me.t_start, me.t_end) * n));
            const int last = static_cast<int>(std::llround(std::max(me.t_start, me.t_end) * n));
            seg.count = last - seg.first_dof + 1;
            seg.local_offset = offset;
            offset += seg.count;
            ts.macro_segments[k.id][e] = seg;
            for (int i = 0; i < seg.count; ++i) {
                const int fo = ts.face_offset[me.face];
                ts.local_to_global[k.id].push_back(fo < 0 ? -1 : fo + seg.first_dof + i);
            }
        }
        ts.macro_trace_size[k.id] = offset;
    }
    return ts;
}

StorageMode storage_for(int m) { return m <= 2 ? StorageMode::Dense : StorageMode::Sparse; }

LocalMatrix LocalMatrix::from_triplets(int rows, int cols, const std::vector<Eigen::Triplet<double>>& t,
                                       StorageMode mode)
{
    LocalMatrix lm;
    lm.rows_ = rows;
    lm.cols_ = cols;
    lm.mode_ = mode;
    if (mode == StorageMode::Dense) {
        lm.dense_ = Matrix::Zero(rows, cols);
        for (const auto& e : t)
            lm.dense_(e.row(), e.col()) += e.value();
    } else {
        lm.sparse_.resize(rows, cols);
        lm.sparse_.setFromTriplets(t.begin(), t.end());
        lm.sparse_.makeCompressed();
    }
    return lm;
}

Vector LocalMatrix::operator*(const Vector& x) const
{
    if (mode_ == StorageMode::Dense)
        return dense_ * x;
    return sparse_ * x;
}

Matrix LocalMatrix::operator*(const Matrix& x) const
{
    if (mode_ == StorageMode::Dense)
        return dense_ * x;
    return sparse_ * x;
}

Matrix LocalMatrix::to_dense() const
{
    if (mode_ == StorageMode::Dense)
        return dense_;
    return Matrix(sparse_);
}

std::size_t LocalMatrix::stored_values() const
{
    if (mode_ == StorageMode::Dense)
        return static_cast<std::size_t>(dense_.size());
    return static_cast<std::size_t>(sparse_.nonZeros());
}

std::size_t LocalMatrix::nonzeros() const
{
    if (mode_ == StorageMode::Dense)
        return static_cast<std::size_t>((dense_.array() != 0.0).count());
    std::size_t n = 0;
    for (int k = 0; k < sparse_.outerSize(); ++k)
        for (Sparse::InnerIterator it(sparse_, k); it; ++it)
            n += it.value() != 0.0;
    return n;
}

void LocalMatrix::release()
{
    dense_ = Matrix();
    sparse_ = Sparse();
}

PatchEvaluator::PatchEvaluator(const MacroMesh& mesh, int macro, const PatchDofMap& map, const LagrangeBasis& basis)
    : map_(&map), basis_(&basis), m_(mesh.macros[macro].m), macro_map_(reference_to_physical(mesh.corners(macro)))
{
    for (const auto& se : mesh.macros[macro].sub_elements)
        sub_maps_.push_back(reference_to_physical(se));
}

PatchEvaluator::Sample PatchEvaluator::at(const Vec2& x, bool with_gradients) const
{
    Sample s;
    s.sub_element = locate_sub_triangle(m_, macro_map_.to_reference(x));
    const auto& sm = sub_maps_[s.sub_element];
    const Eigen::VectorXd ref = sm.to_reference(x);
    s.values = basis_->values(ref);
    if (with_gradients)
        s.gradients = basis_->gradients(ref) * sm.inverse_jacobian;
    return s;
}

double PatchEvaluator::value(const Vector& c, const Vec2& x) const
{
    const auto s = at(x);
    const auto& dofs = map_->element_dofs[s.sub_element];
    double v = 0.0;
    for (int a = 0; a < s.values.size(); ++a)
        v += c[dofs[a]] * s.values[a];
    return v;
}

Vec2 PatchEvaluator::gradient(const Vector& c, const Vec2& x) const
{
    const auto s = at(x, true);
    const auto& dofs = map_->element_dofs[s.sub_element];
    Vec2 g = Vec2::Zero();
    for (int a = 0; a < s.values.size(); ++a)
        g += c[dofs[a]] * s.gradients.row(a).transpose();
    return g;
}

int default_quadrature_degree(int p, const StabilizationConfig& stab)
{
    return 2 * p + 1 + (stab.supg ? 1 : 0) + stab.extra_quadrature;
}

LocalOperators assemble_macro(const MacroMesh& mesh, int macro, const PatchDofMap& map, const TraceSpace& traces,
                              const ProblemData& problem, const StabilizationConfig& stab)
{
    if (mesh.d != 2)
        throw InvalidArgument("assembly supports d = 2 only");
    const int p = traces.p;
    const auto& K = mesh.macros[macro];
    const LagrangeBasis& basis = reference_basis(2, p);
    const PatchEvaluator ev(mesh, macro, map, basis);
    const int nl = basis.size();
    const int Q = map.dof_count;
    const int nu = 3 * Q;
    const int nt = traces.macro_trace_size[macro];
    const Vec2 a = problem.advection;
    const double kappa = problem.kappa;
    const int degree = default_quadrature_degree(p, stab);
    const QuadratureRule rule = quadrature_rule(2, degree);

    std::vector<Vector> ref_values;
    std::vector<Matrix> ref_grads, ref_hess;
    for (std::size_t q = 0; q < rule.size(); ++q) {
        ref_values.push_back(basis.values(rule.points[q]));
        ref_grads.push_back(basis.gradients(rule.points[q]));
        ref_hess.push_back(basis.hessians(rule.points[q]));
    }

    Triplets ta, tb, tc;
    Vector R = Vector::Zero(nu);

    for (std::size_t e = 0; e < K.sub_elements.size(); ++e) {
        const AffineMap& sm = ev.sub_maps()[e];
        const auto& dofs = map.element_dofs[e];
        const double tau_s = stab.supg ? supg_parameter(triangle_diameter(K.sub_elements[e]), a, kappa,
                                                        stab.supg_variant)
                                       : 0.0;
        const Mat2 metric = sm.inverse_jacobian * sm.inverse_jacobian.transpose();

        Matrix mass = Matrix::Zero(nl, nl), gx = Matrix::Zero(nl, nl), gy = Matrix::Zero(nl, nl);
        Matrix adv = Matrix::Zero(nl, nl), supg = Matrix::Zero(nl, nl);
        Vector load = Vector::Zero(nl);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double w = rule.weights[q] * sm.det;
            const Vec2 x = sm.to_physical(rule.points[q]);
            const double f = problem.source(x);
            const Vector& phi = ref_values[q];
            const Matrix grad = ref_grads[q] * sm.inverse_jacobian;
            const Vector adv_grad = grad * a;
            mass.noalias() += w * phi * phi.transpose();
            gx.noalias() += w * grad.col(0) * phi.transpose();
            gy.noalias() += w * grad.col(1) * phi.transpose();
            adv.noalias() += w * adv_grad * phi.transpose();
            load += w * f * phi;
            if (stab.supg) {
                Vector lap(nl);
                for (int i = 0; i < nl; ++i)
                    lap[i] = ref_hess[q](i, 0) * metric(0, 0) + ref_hess[q](i, 1) * metric(0, 1) +
                             ref_hess[q](i, 2) * metric(1, 0) + ref_hess[q](i, 3) * metric(1, 1);
                supg.noalias() += w * tau_s * adv_grad * (adv_grad - kappa * lap).transpose();
                load += w * tau_s * f * adv_grad;
            }
        }
        for (int i = 0; i < nl; ++i) {
            const int I = dofs[i];
            R[2 * Q + I] += load[i];
            for (int j = 0; j < nl; ++j) {
                const int J = dofs[j];
                ta.emplace_back(I, J, mass(i, j));
                ta.emplace_back(Q + I, Q + J, mass(i, j));
                ta.emplace_back(I, 2 * Q + J, -gx(i, j));
                ta.emplace_back(Q + I, 2 * Q + J, -gy(i, j));
                ta.emplace_back(2 * Q + I, J, -kappa * gx(i, j));
                ta.emplace_back(2 * Q + I, Q + J, -kappa * gy(i, j));
                ta.emplace_back(2 * Q + I, 2 * Q + J, supg(i, j) - adv(i, j));
            }
        }
    }

    const double diameter = tau_length(mesh, macro, stab);
    for (int e = 0; e < 3; ++e) {
        const auto& seg = traces.macro_segments[macro][e];
        const SkeletonFace& F = mesh.skeleton[seg.face];
        const FaceTraceLayout& layout = traces.layouts[seg.face];
        const Vec2 n = ev.macro_map().normals[e];
        const double tau = stabilization_tau(a, kappa, n, diameter);
        const double an = a.dot(n);
        const auto& me = K.edges[e];
        const int s0 = segment_begin(std::min(me.t_start, me.t_end), layout.sub_faces);
        const int s1 = segment_begin(std::max(me.t_start, me.t_end), layout.sub_faces);
        const QuadratureRule line = quadrature_rule(1, degree);
        const double seg_len = F.length() / layout.sub_faces;
        for (int s = s0; s < s1; ++s) {
            for (std::size_t q = 0; q < line.size(); ++q) {
                const double t = (s + line.points[q][0]) / layout.sub_faces;
                const double w = line.weights[q] * seg_len;
                const Vec2 x = F.point(t);
                const auto smp = ev.at(x);
                const auto& dofs = map.element_dofs[smp.sub_element];
                const Vector psi = layout.segment_values(s, t);
                for (int i = 0; i < nl; ++i) {
                    const int I = dofs[i];
                    const double pi = smp.values[i];
                    for (int j = 0; j < nl; ++j) {
                        const int J = dofs[j];
                        const double pp = w * pi * smp.values[j];
                        ta.emplace_back(2 * Q + I, J, kappa * n.x() * pp);
                        ta.emplace_back(2 * Q + I, Q + J, kappa * n.y() * pp);
                        ta.emplace_back(2 * Q + I, 2 * Q + J, tau * pp);
                    }
                    for (int b = 0; b <= p; ++b) {
                        const int k = seg.local_offset + s * p + b - seg.first_dof;
                        const double pv = w * psi[b] * pi;
                        tb.emplace_back(I, k, pv * n.x());
                        tb.emplace_back(Q + I, k, pv * n.y());
                        tb.emplace_back(2 * Q + I, k, (an - tau) * pv);
                        tc.emplace_back(k, I, kappa * n.x() * pv);
                        tc.emplace_back(k, Q + I, kappa * n.y() * pv);
                        tc.emplace_back(k, 2 * Q + I, tau * pv);
                    }
                }
            }
        }
    }

    LocalOperators ops;
    ops.macro = macro;
    ops.Q = Q;
    ops.storage = storage_for(K.m);
    ops.A = LocalMatrix::from_triplets(nu, nu, ta, ops.storage);
    ops.B = LocalMatrix::from_triplets(nu, nt, tb, ops.storage);
    ops.C = LocalMatrix::from_triplets(nt, nu, tc, ops.storage);

    Vector g = Vector::Zero(nt);
    bool any_dirichlet = false;
    for (const auto& seg : traces.macro_segments[macro]) {
        if (!traces.is_dirichlet(seg.face))
            continue;
        any_dirichlet = true;
        g.segment(seg.local_offset, seg.count) = traces.dirichlet_values[seg.face].segment(seg.first_dof, seg.count);
    }
    if (any_dirichlet)
        R -= ops.B * g;
    ops.R_u = std::move(R);
    return ops;
}

FaceOperator assemble_face(const MacroMesh& mesh, int face, const TraceSpace& traces, const ProblemData& problem,
                           const StabilizationConfig& stab)
{
    FaceOperator op;
    op.face = face;
    if (traces.is_dirichlet(face))
        return op;
    const SkeletonFace& F = mesh.skeleton[face];
    const FaceTraceLayout& layout = traces.layouts[face];
    const int p = traces.p;
    const int nd = layout.size();
    op.D = Matrix::Zero(nd, nd);
    op.R_hat = Vector::Zero(nd);
    const QuadratureRule line = quadrature_rule(1, default_quadrature_degree(p, stab));
    const double seg_len = F.length() / layout.sub_faces;

    for (const auto& side : F.sides) {
        const Vec2 n = edge_normal(mesh, side.macro, side.edge);
        const double tau =
            stabilization_tau(problem.advection, problem.kappa, n, tau_length(mesh, side.macro, stab));
        const double coef = problem.advection.dot(n) - tau;
        const int s0 = segment_begin(side.t_min(), layout.sub_faces);
        const int s1 = segment_begin(side.t_max(), layout.sub_faces);
        for (int s = s0; s < s1; ++s)
            for (std::size_t q = 0; q < line.size(); ++q) {
                const double t = (s + line.points[q][0]) / layout.sub_faces;
                const Vector psi = layout.segment_values(s, t);
                op.D.block(s * p, s * p, p + 1, p + 1) += line.weights[q] * seg_len * coef * psi * psi.transpose();
            }
    }

    if (F.boundary() && traces.boundary_tags[face] == BoundaryTag::Neumann) {
        const Vec2 n = edge_normal(mesh, F.sides[0].macro, F.sides[0].edge);
        const QuadratureRule rich = gauss_legendre(p + 12);
        for (int s = 0; s < layout.sub_faces; ++s)
            for (std::size_t q = 0; q < rich.size(); ++q) {
                const double t = (s + rich.points[q][0]) / layout.sub_faces;
                const Vector psi = layout.segment_values(s, t);
                op.R_hat.segment(s * p, p + 1) += rich.weights[q] * seg_len * problem.neumann(F.point(t), n) * psi;
            }
    }
    return op;
}

Matrix face_mass_matrix(const SkeletonFace& face, const FaceTraceLayout& layout, double t0, double t1,
                        int extra_quadrature)
{
    const int p = layout.p;
    const int nd = layout.size();
    Matrix M = Matrix::Zero(nd, nd);
    const QuadratureRule line = quadrature_rule(1, 2 * p + extra_quadrature);
    const double seg_len = face.length() / layout.sub_faces;
    const int s0 = segment_begin(t0, layout.sub_faces), s1 = segment_begin(t1, layout.sub_faces);
    for (int s = s0; s < s1; ++s)
        for (std::size_t q = 0; q < line.size(); ++q) {
            const double t = (s + line.points[q][0]) / layout.sub_faces;
            const Vector psi = layout.segment_values(s, t);
            M.block(s * p, s * p, p + 1, p + 1) += line.weights[q] * seg_len * psi * psi.transpose();
        }
    return M;
}

Vector project_dirichlet(const SkeletonFace& face, const FaceTraceLayout& layout, const ScalarField& g)
{
    const int p = layout.p;
    const Matrix M = face_mass_matrix(face, layout);
    Vector b = Vector::Zero(layout.size());
    const QuadratureRule rich = gauss_legendre(p + 12);
    const double seg_len = face.length() / layout.sub_faces;
    for (int s = 0; s < layout.sub_faces; ++s)
        for (std::size_t q = 0; q < rich.size(); ++q) {
            const double t = (s + rich.points[q][0]) / layout.sub_faces;
            b.segment(s * p, p + 1) += rich.weights[q] * seg_len * g(face.point(t)) * layout.segment_values(s, t);
        }
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success || !(face.length() > 0.0))
        throw DegenerateGeometry("singular face mass matrix on face " + std::to_string(face.id));
    return llt.solve(b);
}

} // namespace mehdg
