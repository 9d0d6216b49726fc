#include "mehdg/adaptivity.hpp"
#include "mehdg/csv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace mehdg
{

IndicatorField error_indicator(const DiscreteField& field, WorkerPool* pool)
{
    const MacroMesh& mesh = field.mesh();
    const int nm = static_cast<int>(mesh.macros.size());
    const QuadratureRule rule = quadrature_rule(2, 2 * field.p());
    IndicatorField out;
    out.eta.assign(nm, 0.0);
    auto body = [&](int e) {
        const auto& k = mesh.macros[e];
        double sum = 0.0;
        for (const auto& se : k.sub_elements) {
            const AffineMap map = reference_to_physical(se);
            for (std::size_t q = 0; q < rule.size(); ++q)
                sum += rule.weights[q] * map.det * field.grad_u(e, map.to_physical(rule.points[q])).squaredNorm();
        }
        out.eta[e] = triangle_diameter(mesh.corners(e)) * std::sqrt(sum);
    };
    if (pool)
        pool->parallel_for(nm, body);
    else
        for (int e = 0; e < nm; ++e)
            body(e);
    double t = 0.0;
    for (double v : out.eta)
        t += v * v;
    out.total = std::sqrt(t);
    return out;
}

std::set<int> mark(const IndicatorField& eta, double theta)
{
    if (!(theta > 0.0 && theta <= 1.0))
        throw InvalidArgument("marking fraction must lie in (0, 1]");
    std::vector<int> order(eta.eta.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return eta.eta[a] > eta.eta[b]; });
    double total = 0.0;
    for (int i : order)
        total += eta.eta[i] * eta.eta[i];
    // slack for exact ties under rounding
    const double target = theta * theta * total * (1.0 - 1e-12);
    std::set<int> marked;
    double acc = 0.0;
    for (int i : order) {
        if (acc >= target || eta.eta[i] <= 0.0)
            break;
        marked.insert(i);
        acc += eta.eta[i] * eta.eta[i];
    }
    return marked;
}

AdaptState adapt(const MacroMesh& base, const ProblemData& problem, const StabilizationConfig& stab,
                 const SolverConfig& config, const AdaptOptions& options)
{
    if (options.levels < 0)
        throw InvalidArgument("levels must be nonnegative");
    AdaptState state;
    state.mesh = base;
    for (int level = 0;; ++level) {
        state.level = level;
        state.last = solve(state.mesh, options.p, problem, stab, config);
        const DiscreteField field(state.mesh, options.p, state.last.solution);
        WorkerPool pool(config.workers);
        const IndicatorField eta = error_indicator(field, &pool);
        AdaptRow row;
        row.level = level;
        row.n_macros = static_cast<int>(state.mesh.macros.size());
        row.dof_local = state.last.report.dof_local;
        row.dof_global = state.last.report.dof_global;
        row.l2_error = options.exact ? l2_error(field, *options.exact) : std::nan("");
        row.eta_total = eta.total;
        row.iterations = state.last.report.iterations;
        row.converged = state.last.report.converged;
        state.history.push_back(row);
        if (level == options.levels)
            break;
        const std::set<int> marked = mark(eta, options.theta);
        state.marked.push_back(marked);
        state.mesh = refine_macros(state.mesh, marked);
    }
    return state;
}

void write_adapt_csv(const std::vector<AdaptRow>& rows, std::ostream& os)
{
    os << "level,n_macros,dof_local,dof_global,l2_error,eta_total\n";
    for (const auto& r : rows)
        os << r.level << ',' << r.n_macros << ',' << r.dof_local << ',' << r.dof_global << ',' << fmt17(r.l2_error)
           << ',' << fmt17(r.eta_total) << '\n';
}

} // namespace mehdg
