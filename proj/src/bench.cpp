#include "mehdg/bench.hpp"
#include "mehdg/csv.hpp"

#include <chrono>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace mehdg
{

namespace
{

double sech2(double s)
{
    const double c = std::cosh(s);
    return std::isinf(c) ? 0.0 : 1.0 / (c * c);
}

double ipow(double x, int k)
{
    double r = 1.0;
    for (int i = 0; i < k; ++i)
        r *= x;
    return r;
}

struct Monomial
{
    int i, j;
    double c;
};

std::vector<Monomial> full_polynomial(int k)
{
    std::vector<Monomial> terms;
    for (int j = 0; j <= k; ++j)
        for (int i = 0; i + j <= k; ++i)
            terms.push_back({i, j, 1.0 / (1.0 + i + 2.0 * j)});
    return terms;
}

} // namespace

double BenchmarkCase::peclet() const { return advection.norm() / kappa; }

ProblemData BenchmarkCase::problem() const
{
    ProblemData pd;
    pd.advection = advection;
    pd.kappa = kappa;
    pd.source = source;
    pd.dirichlet = exact;
    pd.neumann = neumann_flux();
    return pd;
}

FluxField BenchmarkCase::neumann_flux() const
{
    return [u = exact, g = gradient, a = advection, k = kappa](const Vec2& x, const Vec2& n) {
        return (a * u(x) - k * g(x)).dot(n);
    };
}

BenchmarkCase make_benchmark(const std::string& name, double kappa, const Vec2& a)
{
    if (!(kappa > 0.0))
        throw InvalidArgument("kappa must be positive");
    BenchmarkCase bc;
    bc.name = name;
    bc.kappa = kappa;
    bc.advection = a;
    if (name == "tanh") {
        bc.length_scale = kappa;
        bc.exact = [kappa](const Vec2& x) { return 0.5 * (1.0 + std::tanh((x.y() - 2.0 * x.x() + 0.4) / kappa)); };
        bc.gradient = [kappa](const Vec2& x) {
            const double us = 0.5 * sech2((x.y() - 2.0 * x.x() + 0.4) / kappa) / kappa;
            return Vec2(-2.0 * us, us);
        };
        bc.laplacian = [kappa](const Vec2& x) {
            const double s = (x.y() - 2.0 * x.x() + 0.4) / kappa;
            return -5.0 * std::tanh(s) * sech2(s) / (kappa * kappa);
        };
    } else if (name == "linear") {
        bc.exact = [](const Vec2& x) { return x.x() + x.y(); };
        bc.gradient = [](const Vec2&) { return Vec2(1.0, 1.0); };
        bc.laplacian = [](const Vec2&) { return 0.0; };
    } else if (name.rfind("poly", 0) == 0 && name.size() > 4) {
        int k = 0;
        try {
            std::size_t used = 0;
            k = std::stoi(name.substr(4), &used);
            if (used != name.size() - 4)
                k = -1;
        } catch (const std::exception&) {
            k = -1;
        }
        if (k < 0 || k > 10)
            throw InvalidArgument("unknown benchmark '" + name + "'");
        const auto terms = full_polynomial(k);
        bc.exact = [terms](const Vec2& x) {
            double v = 0.0;
            for (const auto& t : terms)
                v += t.c * ipow(x.x(), t.i) * ipow(x.y(), t.j);
            return v;
        };
        bc.gradient = [terms](const Vec2& x) {
            Vec2 g = Vec2::Zero();
            for (const auto& t : terms) {
                if (t.i > 0)
                    g.x() += t.c * t.i * ipow(x.x(), t.i - 1) * ipow(x.y(), t.j);
                if (t.j > 0)
                    g.y() += t.c * t.j * ipow(x.x(), t.i) * ipow(x.y(), t.j - 1);
            }
            return g;
        };
        bc.laplacian = [terms](const Vec2& x) {
            double v = 0.0;
            for (const auto& t : terms) {
                if (t.i > 1)
                    v += t.c * t.i * (t.i - 1) * ipow(x.x(), t.i - 2) * ipow(x.y(), t.j);
                if (t.j > 1)
                    v += t.c * t.j * (t.j - 1) * ipow(x.x(), t.i) * ipow(x.y(), t.j - 2);
            }
            return v;
        };
    } else {
        throw InvalidArgument("unknown benchmark '" + name + "'");
    }
    bc.source = [g = bc.gradient, l = bc.laplacian, a, kappa](const Vec2& x) {
        return a.dot(g(x)) - kappa * l(x);
    };
    return bc;
}

double source_audit(const BenchmarkCase& bc, int points, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.05, 0.95);
    const auto& u = bc.exact;
    // central differences with two Richardson steps (sixth order)
    auto d1 = [&](const Vec2& x, const Vec2& e, double h) {
        return (u(x + h * e) - u(x - h * e)) / (2.0 * h);
    };
    auto d2 = [&](const Vec2& x, const Vec2& e, double h) {
        return (u(x + h * e) - 2.0 * u(x) + u(x - h * e)) / (h * h);
    };
    auto extrapolate = [](auto&& d, double h) {
        const double a = d(h), b = d(h / 2), c = d(h / 4);
        const double r1 = (4.0 * b - a) / 3.0, r2 = (4.0 * c - b) / 3.0;
        return (16.0 * r2 - r1) / 15.0;
    };
    const double h = 2e-2 * std::min(1.0, bc.length_scale);
    double worst = 0.0;
    for (int k = 0; k < points; ++k) {
        const Vec2 x(U(rng), U(rng));
        double fd = 0.0;
        for (int c = 0; c < 2; ++c) {
            const Vec2 e = c == 0 ? Vec2(1.0, 0.0) : Vec2(0.0, 1.0);
            const double g = extrapolate([&](double s) { return d1(x, e, s); }, h);
            const double l = extrapolate([&](double s) { return d2(x, e, s); }, h);
            fd += bc.advection[c] * g - bc.kappa * l;
        }
        const double f = bc.source(x);
        worst = std::max(worst, std::abs(f - fd) / std::max(1.0, std::abs(f)));
    }
    return worst;
}

std::vector<ConvergenceRow> run_convergence(const BenchmarkCase& bc, const std::vector<int>& ps, int m,
                                            const std::vector<int>& ns, const RunOptions& opt)
{
    for (std::size_t i = 1; i < ns.size(); ++i)
        if (ns[i] <= ns[i - 1])
            throw InvalidArgument("n list must be strictly increasing");
    const ProblemData pd = bc.problem();
    std::vector<ConvergenceRow> rows;
    for (int p : ps) {
        for (std::size_t i = 0; i < ns.size(); ++i) {
            const MacroMesh mesh = build_structured_macro_mesh(2, ns[i], m);
            const auto t0 = std::chrono::steady_clock::now();
            const SolveResult res = solve(mesh, p, pd, opt.stab, opt.solver);
            const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const DiscreteField field(mesh, p, res.solution);
            ConvergenceRow r;
            r.p = p;
            r.m = m;
            r.n = ns[i];
            r.h = 1.0 / (static_cast<double>(ns[i]) * m);
            r.dof_local = res.report.dof_local;
            r.dof_global = res.report.dof_global;
            r.l2_error = l2_error(field, bc.exact);
            if (opt.q_error)
                r.q_l2_error = q_l2_error(field, bc.gradient);
            r.iterations = res.report.iterations;
            r.converged = res.report.converged;
            r.t_init_s = res.report.t_init_s;
            r.t_solve_s = total - res.report.t_init_s;
            if (i > 0) {
                const auto& prev = rows.back();
                r.rate = std::log(prev.l2_error / r.l2_error) / std::log(static_cast<double>(ns[i]) / ns[i - 1]);
            }
            rows.push_back(r);
        }
    }
    return rows;
}

void write_convergence_csv(const std::vector<ConvergenceRow>& rows, std::ostream& os, const CsvOptions& opt)
{
    os << "p,m,n,h,dof_local,dof_global,l2_error,rate,iterations,converged";
    if (opt.q_error)
        os << ",q_l2_error";
    if (opt.timings)
        os << ",t_init_s,t_solve_s";
    os << '\n';
    for (const auto& r : rows) {
        os << r.p << ',' << r.m << ',' << r.n << ',' << fmt17(r.h) << ',' << r.dof_local << ',' << r.dof_global << ','
           << fmt17(r.l2_error) << ',' << (std::isnan(r.rate) ? std::string() : fmt17(r.rate)) << ','
           << r.iterations << ',' << (r.converged ? 1 : 0);
        if (opt.q_error)
            os << ',' << fmt17(r.q_l2_error);
        if (opt.timings)
            os << ',' << fmt17(r.t_init_s) << ',' << fmt17(r.t_solve_s);
        os << '\n';
    }
}

std::vector<ConvergenceRow> parse_convergence_csv(const std::string& text)
{
    const CsvTable t = parse_csv(text);
    std::vector<ConvergenceRow> rows;
    auto has = [&](const std::string& c) {
        return std::find(t.header.begin(), t.header.end(), c) != t.header.end();
    };
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        ConvergenceRow r;
        r.p = static_cast<int>(t.number(i, "p"));
        r.m = static_cast<int>(t.number(i, "m"));
        r.n = static_cast<int>(t.number(i, "n"));
        r.h = t.number(i, "h");
        r.dof_local = static_cast<long long>(t.number(i, "dof_local"));
        r.dof_global = static_cast<int>(t.number(i, "dof_global"));
        r.l2_error = t.number(i, "l2_error");
        r.rate = t.number(i, "rate");
        r.iterations = static_cast<int>(t.number(i, "iterations"));
        r.converged = t.number(i, "converged") != 0.0;
        if (has("q_l2_error"))
            r.q_l2_error = t.number(i, "q_l2_error");
        if (has("t_init_s")) {
            r.t_init_s = t.number(i, "t_init_s");
            r.t_solve_s = t.number(i, "t_solve_s");
        }
        rows.push_back(r);
    }
    return rows;
}

CompareReport run_compare(const BenchmarkCase& bc, int p, int m, int n, const std::vector<double>& tolerances,
                          const RunOptions& opt)
{
    CompareReport rep;
    rep.p = p;
    rep.m = m;
    rep.n = n;
    const MacroMesh mesh = build_structured_macro_mesh(2, n, m);
    const ProblemData pd = bc.problem();
    for (double tol : tolerances) {
        int its[2] = {0, 0};
        for (SolveMode mode : {SolveMode::MatrixBased, SolveMode::MatrixFree}) {
            SolverConfig cfg = opt.solver;
            cfg.tolerance = tol;
            cfg.mode = mode;
            const auto t0 = std::chrono::steady_clock::now();
            const SolveResult res = solve(mesh, p, pd, opt.stab, cfg);
            const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            CompareRow row;
            row.tol = tol;
            row.mode = mode;
            row.iterations = res.report.iterations;
            row.converged = res.report.converged;
            row.t_init_s = res.report.t_init_s;
            row.t_solve_s = total - res.report.t_init_s;
            its[mode == SolveMode::MatrixFree] = row.iterations;
            rep.rows.push_back(row);
        }
        if (std::abs(its[0] - its[1]) > 1)
            rep.parity = false;
    }
    return rep;
}

void write_compare_csv(const CompareReport& r, std::ostream& os, bool timings)
{
    os << "p,m,n,tol,mode,iterations,converged";
    if (timings)
        os << ",t_init_s,t_solve_s";
    os << '\n';
    for (const auto& row : r.rows) {
        os << r.p << ',' << r.m << ',' << r.n << ',' << fmt17(row.tol) << ',' << to_string(row.mode) << ','
           << row.iterations << ',' << (row.converged ? 1 : 0);
        if (timings)
            os << ',' << fmt17(row.t_init_s) << ',' << fmt17(row.t_solve_s);
        os << '\n';
    }
}

AdaptState run_adapt(const BenchmarkCase& bc, int p, int m, int n, int levels, double theta, const RunOptions& opt)
{
    AdaptOptions ao;
    ao.p = p;
    ao.levels = levels;
    ao.theta = theta;
    ao.exact = bc.exact;
    return adapt(build_structured_macro_mesh(2, n, m), bc.problem(), opt.stab, opt.solver, ao);
}

std::vector<CostReport> run_cost(int d, int nm_product, int p, Arithmetic arithmetic)
{
    return cost_sweep(d, nm_product, p, arithmetic);
}

} // namespace mehdg
