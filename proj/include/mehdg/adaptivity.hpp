#pragma once

#include "mehdg/fields.hpp"

#include <iosfwd>
#include <optional>
#include <set>

namespace mehdg
{

struct IndicatorField
{
    std::vector<double> eta; ///< per macro
    double total = 0.0;      ///< (sum eta^2)^{1/2}
};

/// eta_K = h_K ||grad u_h||_{L2(K)}, h_K the macro diameter.
IndicatorField error_indicator(const DiscreteField& field, WorkerPool* pool = nullptr);

/// Dorfler bulk marking: smallest set, by decreasing eta and then increasing id, with
/// sum eta^2 >= theta^2 total^2.
std::set<int> mark(const IndicatorField& eta, double theta);

struct AdaptRow
{
    int level = 0;
    int n_macros = 0;
    long long dof_local = 0;
    int dof_global = 0;
    double l2_error = 0.0;
    double eta_total = 0.0;
    int iterations = 0;
    bool converged = true;
};

struct AdaptState
{
    MacroMesh mesh;
    int level = 0;
    std::vector<AdaptRow> history;
    std::vector<std::set<int>> marked; ///< marked macros per refinement step
    SolveResult last;
};

struct AdaptOptions
{
    int p = 2;
    int levels = 0;
    double theta = 0.5;
    /// Exact solution for the error column; NaN when absent.
    std::optional<ScalarField> exact;
};

AdaptState adapt(const MacroMesh& base, const ProblemData& problem, const StabilizationConfig& stab,
                 const SolverConfig& config, const AdaptOptions& options);

void write_adapt_csv(const std::vector<AdaptRow>& rows, std::ostream& os);

} // namespace mehdg
