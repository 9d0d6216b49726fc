#pragma once

#include "mehdg/adaptivity.hpp"
#include "mehdg/costmodel.hpp"

#include <iosfwd>
#include <limits>
#include <string>

namespace mehdg
{

using VectorField = std::function<Vec2(const Vec2&)>;

/// Manufactured problem on the unit square: exact solution and derived data.
struct BenchmarkCase
{
    std::string name;
    double kappa = 1.0;
    Vec2 advection = Vec2::Zero();
    ScalarField exact;
    VectorField gradient;
    ScalarField laplacian;
    ScalarField source; ///< a . grad u* - kappa lap u*
    double length_scale = 1.0; ///< width of the sharpest feature of u*

    /// |a| L / kappa with L = 1.
    double peclet() const;
    /// Dirichlet data on the whole boundary.
    ProblemData problem() const;
    /// Boundary flux (a u* - kappa grad u*) . n.
    FluxField neumann_flux() const;
};

/// `tanh` (internal layer along 2x - y = 0.4), `linear` (x + y), `poly<k>` (full degree-k polynomial).
BenchmarkCase make_benchmark(const std::string& name, double kappa, const Vec2& advection);

/// Max relative deviation of `source` from a finite-difference evaluation of
/// a . grad u* - kappa lap u* at `points` seeded random points.
double source_audit(const BenchmarkCase& bc, int points = 100, unsigned seed = 7);

struct ConvergenceRow
{
    int p = 0;
    int m = 0;
    int n = 0;
    double h = 0.0;
    long long dof_local = 0;
    int dof_global = 0;
    double l2_error = 0.0;
    double rate = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool converged = true;
    double t_init_s = 0.0;
    double t_solve_s = 0.0;
    double q_l2_error = std::numeric_limits<double>::quiet_NaN();
};

struct RunOptions
{
    SolverConfig solver;
    StabilizationConfig stab;
    bool q_error = false;
};

std::vector<ConvergenceRow> run_convergence(const BenchmarkCase& bc, const std::vector<int>& ps, int m,
                                            const std::vector<int>& ns, const RunOptions& opt);

struct CsvOptions
{
    bool timings = false;
    bool q_error = false;
};

void write_convergence_csv(const std::vector<ConvergenceRow>& rows, std::ostream& os, const CsvOptions& opt = {});
std::vector<ConvergenceRow> parse_convergence_csv(const std::string& text);

struct CompareRow
{
    double tol = 0.0;
    SolveMode mode = SolveMode::MatrixFree;
    int iterations = 0;
    bool converged = true;
    double t_init_s = 0.0;
    double t_solve_s = 0.0;
};

struct CompareReport
{
    int p = 0;
    int m = 0;
    int n = 0;
    std::vector<CompareRow> rows; ///< per tolerance: mb then mf
    /// |it(mb) - it(mf)| <= 1 at every tolerance.
    bool parity = true;
};

CompareReport run_compare(const BenchmarkCase& bc, int p, int m, int n, const std::vector<double>& tolerances,
                          const RunOptions& opt);
void write_compare_csv(const CompareReport& r, std::ostream& os, bool timings = false);

AdaptState run_adapt(const BenchmarkCase& bc, int p, int m, int n, int levels, double theta,
                     const RunOptions& opt);

std::vector<CostReport> run_cost(int d, int nm_product, int p, Arithmetic arithmetic);

} // namespace mehdg
