#pragma once

#include "mehdg/schur_solver.hpp"

namespace mehdg
{

/// Discrete fields of a solved system, evaluated patch by patch.
class DiscreteField
{
  public:
    DiscreteField(const MacroMesh& mesh, int p, const Solution& solution);

    int p() const { return p_; }
    const MacroMesh& mesh() const { return *mesh_; }
    const PatchDofMap& dof_map(int macro) const { return maps_[macro]; }
    /// Scalar u_h patch coefficients of `macro`.
    Vector u_coefficients(int macro) const;

    double u(int macro, const Vec2& x) const;
    Vec2 grad_u(int macro, const Vec2& x) const;
    Vec2 q(int macro, const Vec2& x) const;

  private:
    const MacroMesh* mesh_;
    int p_;
    const Solution* solution_;
    std::vector<PatchDofMap> maps_;
    std::vector<PatchEvaluator> evaluators_;
};

/// Visits every quadrature point of every sub-element: fn(macro, x, weight).
void for_each_quadrature_point(const MacroMesh& mesh, int degree,
                               const std::function<void(int, const Vec2&, double)>& fn);

/// ||u_h - u*||_{L2(Omega)} with sub-element quadrature of exactness max(2p+2, degree).
double l2_error(const DiscreteField& field, const ScalarField& exact, int degree = 0);
/// ||q_h + grad u*||_{L2}; `grad_exact` is the exact gradient.
double q_l2_error(const DiscreteField& field, const std::function<Vec2(const Vec2&)>& grad_exact);
/// Largest u_h value over patch nodes.
double max_nodal_value(const DiscreteField& field);

} // namespace mehdg
