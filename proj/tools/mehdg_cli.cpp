#include "mehdg/bench.hpp"
#include "mehdg/csv.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace mehdg;

namespace
{

struct NoConvergence : Error
{
    using Error::Error;
};

struct Common
{
    int dim = 2;
    int n = 4;
    int m = 2;
    int p = 2;
    double kappa = 0.4;
    std::string advect = "1,1";
    double tol = 1e-6;
    std::string mode = "mf";
    std::string precond = "dinv";
    std::string supg = "off";
    std::string tau_length = "sub";
    std::string benchmark = "tanh";
    int workers = 1;
    int restart = 100;
    int max_iterations = 10000;
    std::string out;
    bool timings = false;
};

Vec2 parse_vec2(const std::string& s)
{
    std::stringstream ss(s);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !ss.eof())
        throw InvalidArgument("expected ax,ay but got '" + s + "'");
    try {
        return Vec2(std::stod(a), std::stod(b));
    } catch (const std::exception&) {
        throw InvalidArgument("expected ax,ay but got '" + s + "'");
    }
}

template <class T> std::vector<T> parse_list(const std::string& s)
{
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::istringstream is(item);
        T v{};
        if (!(is >> v) || !is.eof())
            throw InvalidArgument("bad list entry '" + item + "' in '" + s + "'");
        out.push_back(v);
    }
    if (out.empty())
        throw InvalidArgument("empty list");
    return out;
}

void add_common(CLI::App& app, Common& c)
{
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.add_option_function<std::string>(
        "--config", [](const std::string&) {}, "key=value configuration file; command-line flags take precedence");
    app.add_option("--dim", c.dim, "Spatial dimension (2; 3 for cost only)");
    app.add_option("--n", c.n, "Macro-elements per unit-square edge");
    app.add_option("--m", c.m, "Sub-elements per macro edge");
    app.add_option("--p", c.p, "Polynomial degree");
    app.add_option("--kappa", c.kappa, "Diffusion coefficient");
    app.add_option("--advect", c.advect, "Advection velocity ax,ay");
    app.add_option("--tol", c.tol, "GMRES relative tolerance");
    app.add_option("--mode", c.mode, "Global solver: mf|mb");
    app.add_option("--precond", c.precond, "Preconditioner: dinv|none");
    app.add_option("--supg", c.supg, "SUPG: on|off|paper-plus");
    app.add_option("--tau-length", c.tau_length, "Length scale in tau: sub|macro");
    app.add_option("--case", c.benchmark, "Benchmark: tanh|linear|poly<k>");
    app.add_option("--workers", c.workers, "Worker threads");
    app.add_option("--restart", c.restart, "GMRES restart length");
    app.add_option("--max-iterations", c.max_iterations, "GMRES iteration limit");
    app.add_option("--out", c.out, "Output file (stdout when empty)");
    app.add_flag("--timings", c.timings, "Add timing columns to CSV output");
}

RunOptions run_options(const Common& c)
{
    RunOptions o;
    o.solver.tolerance = c.tol;
    o.solver.restart = c.restart;
    o.solver.max_iterations = c.max_iterations;
    o.solver.mode = parse_solve_mode(c.mode);
    o.solver.precond = parse_preconditioner(c.precond);
    o.solver.workers = c.workers;
    o.solver.validate();
    if (c.supg == "on") {
        o.stab.supg = true;
    } else if (c.supg == "paper-plus") {
        o.stab.supg = true;
        o.stab.supg_variant = SupgVariant::PaperPlus;
    } else if (c.supg != "off") {
        throw InvalidArgument("unknown --supg value '" + c.supg + "' (expected on|off|paper-plus)");
    }
    if (c.tau_length == "macro")
        o.stab.tau_length = TauLength::Macro;
    else if (c.tau_length != "sub")
        throw InvalidArgument("unknown --tau-length value '" + c.tau_length + "' (expected sub|macro)");
    return o;
}

void check_solver_inputs(const Common& c)
{
    if (c.dim != 2)
        throw InvalidArgument("only --dim 2 can be solved");
    if (c.n < 1 || c.m < 1 || c.p < 1)
        throw InvalidArgument("--n, --m and --p must be at least 1");
}

template <class F> void with_output(const Common& c, F&& write)
{
    if (c.out.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream os(c.out);
    if (!os)
        throw InvalidArgument("cannot open output file '" + c.out + "'");
    write(os);
}

// Expands a key=value file into `--key value` pairs placed right after the subcommand;
// explicit flags override them.
std::vector<std::string> expand_config(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + i, args.begin() + i + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + i);
            break;
        }
    }
    if (path.empty())
        return args;
    std::ifstream is(path);
    if (!is)
        throw InvalidArgument("cannot read config file '" + path + "'");
    std::vector<std::string> extra;
    std::string line;
    while (std::getline(is, line)) {
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument("config line without '=': " + line);
        auto trim = [](std::string v) {
            const auto b = v.find_first_not_of(" \t");
            const auto e = v.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (value == "true" || value == "false") {
            if (value == "true")
                extra.push_back("--" + key);
            continue;
        }
        extra.push_back("--" + key);
        extra.push_back(value);
    }
    const auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.rfind("-", 0) != 0; });
    args.insert(sub == args.end() ? sub : sub + 1, extra.begin(), extra.end());
    return args;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Macro-element HDG solver and benchmark harness"};
    app.require_subcommand(1);

    Common c;
    auto* solve_cmd = app.add_subcommand("solve", "Solve one benchmark problem and print the solver record");
    add_common(*solve_cmd, c);

    auto* conv = app.add_subcommand("convergence", "Uniform-refinement convergence study (CSV)");
    add_common(*conv, c);
    std::string ns = "2,4,8,16", ps = "1,2,3";
    bool q_error = false;
    conv->add_option("--ns", ns, "Comma-separated n values");
    conv->add_option("--ps", ps, "Comma-separated p values");
    conv->add_flag("--q-error", q_error, "Add the flux error column");

    auto* cmp = app.add_subcommand("compare", "Matrix-based vs matrix-free iterations (CSV)");
    add_common(*cmp, c);
    std::string tols = "1e-2,1e-6";
    cmp->add_option("--tols", tols, "Comma-separated tolerances");

    auto* ad = app.add_subcommand("adapt", "Adaptive refinement study (CSV)");
    add_common(*ad, c);
    int levels = 5;
    double theta = 0.5;
    ad->add_option("--levels", levels, "Refinement steps");
    ad->add_option("--theta", theta, "Dorfler marking fraction");

    auto* cost = app.add_subcommand("cost", "Cost-model sweep over m with n*m fixed (CSV)");
    add_common(*cost, c);
    int nm = 8;
    std::string arith = "dense";
    cost->add_option("--nm", nm, "Product n*m held fixed");
    cost->add_option("--arith", arith, "dense|sparse");

    auto* dump = app.add_subcommand("mesh-dump", "Write the macro mesh (text or legacy VTK)");
    add_common(*dump, c);
    std::string format = "text", refine;
    dump->add_option("--format", format, "text|vtk");
    dump->add_option("--refine", refine, "Comma-separated macro ids refined once");

    try {
        std::vector<std::string> args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*cost) {
            Arithmetic a = Arithmetic::Dense;
            if (arith == "sparse")
                a = Arithmetic::Sparse;
            else if (arith != "dense")
                throw InvalidArgument("unknown --arith value '" + arith + "'");
            const auto rows = run_cost(c.dim, nm, c.p, a);
            with_output(c, [&](std::ostream& os) { write_cost_csv(rows, os); });
            return 0;
        }
        check_solver_inputs(c);
        if (*dump) {
            MacroMesh mesh = build_structured_macro_mesh(c.dim, c.n, c.m);
            if (!refine.empty()) {
                std::set<int> marked;
                for (int id : parse_list<int>(refine)) {
                    if (id < 0 || id >= static_cast<int>(mesh.macros.size()))
                        throw InvalidArgument("macro id " + std::to_string(id) + " out of range");
                    marked.insert(id);
                }
                mesh = refine_macros(mesh, marked);
            }
            if (format != "text" && format != "vtk")
                throw InvalidArgument("unknown --format value '" + format + "'");
            with_output(c, [&](std::ostream& os) {
                if (format == "vtk")
                    write_mesh_vtk(mesh, os);
                else
                    write_mesh_text(mesh, os);
            });
            return 0;
        }

        const RunOptions opt = run_options(c);
        const BenchmarkCase bc = make_benchmark(c.benchmark, c.kappa, parse_vec2(c.advect));

        if (*solve_cmd) {
            const MacroMesh mesh = build_structured_macro_mesh(2, c.n, c.m);
            const SolveResult res = solve(mesh, c.p, bc.problem(), opt.stab, opt.solver);
            const DiscreteField field(mesh, c.p, res.solution);
            const double err = l2_error(field, bc.exact);
            with_output(c, [&](std::ostream& os) { os << res.report.to_json() << '\n'; });
            std::cerr << "l2_error " << fmt17(err) << "\n";
            if (!res.report.converged)
                throw NoConvergence("GMRES did not converge");
        } else if (*conv) {
            RunOptions o = opt;
            o.q_error = q_error;
            const auto rows = run_convergence(bc, parse_list<int>(ps), c.m, parse_list<int>(ns), o);
            with_output(c, [&](std::ostream& os) { write_convergence_csv(rows, os, {c.timings, q_error}); });
            for (const auto& r : rows)
                if (!r.converged)
                    throw NoConvergence("GMRES did not converge");
        } else if (*cmp) {
            const auto rep = run_compare(bc, c.p, c.m, c.n, parse_list<double>(tols), opt);
            with_output(c, [&](std::ostream& os) { write_compare_csv(rep, os, c.timings); });
            std::cerr << "iteration parity " << (rep.parity ? "yes" : "no") << "\n";
            for (const auto& r : rep.rows)
                if (!r.converged)
                    throw NoConvergence("GMRES did not converge");
        } else if (*ad) {
            const AdaptState st = run_adapt(bc, c.p, c.m, c.n, levels, theta, opt);
            with_output(c, [&](std::ostream& os) { write_adapt_csv(st.history, os); });
            for (const auto& r : st.history)
                if (!r.converged)
                    throw NoConvergence("GMRES did not converge");
        }
        return 0;
    } catch (const NoConvergence& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
