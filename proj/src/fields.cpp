#include "mehdg/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mehdg
{

DiscreteField::DiscreteField(const MacroMesh& mesh, int p, const Solution& solution)
    : mesh_(&mesh), p_(p), solution_(&solution)
{
    if (solution.interior.size() != mesh.macros.size())
        throw InvalidArgument("solution does not match the mesh");
    maps_.reserve(mesh.macros.size());
    for (const auto& k : mesh.macros)
        maps_.push_back(build_patch_dof_map(k, p));
    evaluators_.reserve(mesh.macros.size());
    for (const auto& k : mesh.macros)
        evaluators_.emplace_back(mesh, k.id, maps_[k.id], reference_basis(2, p));
}

Vector DiscreteField::u_coefficients(int macro) const
{
    const int Q = maps_[macro].dof_count;
    return solution_->interior[macro].segment(2 * Q, Q);
}

double DiscreteField::u(int macro, const Vec2& x) const { return evaluators_[macro].value(u_coefficients(macro), x); }

Vec2 DiscreteField::grad_u(int macro, const Vec2& x) const
{
    return evaluators_[macro].gradient(u_coefficients(macro), x);
}

Vec2 DiscreteField::q(int macro, const Vec2& x) const
{
    const int Q = maps_[macro].dof_count;
    const Vector& c = solution_->interior[macro];
    return Vec2(evaluators_[macro].value(c.segment(0, Q), x), evaluators_[macro].value(c.segment(Q, Q), x));
}

void for_each_quadrature_point(const MacroMesh& mesh, int degree,
                               const std::function<void(int, const Vec2&, double)>& fn)
{
    const QuadratureRule rule = quadrature_rule(2, degree);
    for (const auto& k : mesh.macros)
        for (const auto& se : k.sub_elements) {
            const AffineMap map = reference_to_physical(se);
            for (std::size_t q = 0; q < rule.size(); ++q)
                fn(k.id, map.to_physical(rule.points[q]), rule.weights[q] * map.det);
        }
}

double l2_error(const DiscreteField& field, const ScalarField& exact, int degree)
{
    double sum = 0.0;
    for_each_quadrature_point(field.mesh(), std::max(2 * field.p() + 2, degree),
                              [&](int e, const Vec2& x, double w) {
                                  const double d = field.u(e, x) - exact(x);
                                  sum += w * d * d;
                              });
    return std::sqrt(sum);
}

double q_l2_error(const DiscreteField& field, const std::function<Vec2(const Vec2&)>& grad_exact)
{
    double sum = 0.0;
    for_each_quadrature_point(field.mesh(), 2 * field.p() + 2, [&](int e, const Vec2& x, double w) {
        sum += w * (field.q(e, x) + grad_exact(x)).squaredNorm();
    });
    return std::sqrt(sum);
}

double max_nodal_value(const DiscreteField& field)
{
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < field.mesh().macros.size(); ++e)
        mx = std::max(mx, field.u_coefficients(static_cast<int>(e)).maxCoeff());
    return mx;
}

} // namespace mehdg
