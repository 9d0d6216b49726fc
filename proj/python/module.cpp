#include "mehdg/bench.hpp"
#include "mehdg/fields.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <sstream>

namespace py = pybind11;
using namespace py::literals;
using namespace mehdg;

namespace
{

RunOptions make_options(double tol, const std::string& mode, const std::string& precond, const std::string& supg,
                        int workers, const std::string& tau_length)
{
    RunOptions o;
    o.solver.tolerance = tol;
    o.solver.mode = parse_solve_mode(mode);
    o.solver.precond = parse_preconditioner(precond);
    o.solver.workers = workers;
    o.solver.validate();
    if (supg == "on" || supg == "paper-plus")
        o.stab.supg = true;
    else if (supg != "off")
        throw InvalidArgument("supg must be on, off or paper-plus");
    if (supg == "paper-plus")
        o.stab.supg_variant = SupgVariant::PaperPlus;
    if (tau_length == "macro")
        o.stab.tau_length = TauLength::Macro;
    else if (tau_length != "sub")
        throw InvalidArgument("tau_length must be sub or macro");
    return o;
}

Vec2 to_vec2(const std::vector<double>& a)
{
    if (a.size() != 2)
        throw InvalidArgument("advection must have two components");
    return Vec2(a[0], a[1]);
}

py::dict report_dict(const SolveReport& r)
{
    return py::dict("p"_a = r.p, "m"_a = r.m, "n"_a = r.n, "dof_local"_a = r.dof_local, "dof_global"_a = r.dof_global,
                    "iterations"_a = r.iterations, "converged"_a = r.converged, "tol"_a = r.tol,
                    "mode"_a = to_string(r.mode), "precond"_a = to_string(r.precond), "t_init_s"_a = r.t_init_s,
                    "t_local_s"_a = r.t_local_s, "t_global_s"_a = r.t_global_s, "lbf"_a = r.lbf,
                    "residuals"_a = r.residuals, "worker_busy_s"_a = r.worker_busy_s);
}

py::dict cost_dict(const CostReport& r)
{
    return py::dict("d"_a = r.inputs.d, "n"_a = r.inputs.n, "m"_a = r.inputs.m, "p"_a = r.inputs.p, "N"_a = r.N,
                    "M"_a = r.M, "Q"_a = r.Q, "Q_dm1"_a = r.Q_dm1, "D"_a = r.D_faces, "sparsity"_a = r.sparsity,
                    "init"_a = r.ops[0], "step1"_a = r.ops[1], "step2"_a = r.ops[2], "step3"_a = r.ops[3],
                    "step4"_a = r.ops[4], "mem_A"_a = r.memory.A_block, "mem_BC"_a = r.memory.BC_block,
                    "mem_D"_a = r.memory.D_block, "mem_total"_a = r.memory.total);
}

Arithmetic parse_arith(const std::string& s)
{
    if (s == "dense")
        return Arithmetic::Dense;
    if (s == "sparse")
        return Arithmetic::Sparse;
    throw InvalidArgument("arithmetic must be dense or sparse");
}

} // namespace

PYBIND11_MODULE(_mehdg, m)
{
    m.doc() = "Macro-element HDG solver for steady advection-diffusion";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

    py::class_<MacroMesh>(m, "MacroMesh")
        .def_readonly("n", &MacroMesh::n)
        .def_readonly("m", &MacroMesh::m)
        .def_property_readonly("n_macros", [](const MacroMesh& mesh) { return mesh.macros.size(); })
        .def_property_readonly("n_faces", [](const MacroMesh& mesh) { return mesh.skeleton.size(); })
        .def_property_readonly("n_hanging",
                               [](const MacroMesh& mesh) {
                                   int h = 0;
                                   for (const auto& f : mesh.skeleton)
                                       h += f.hanging();
                                   return h;
                               })
        .def("interior_face_count", &MacroMesh::interior_face_count)
        .def("boundary_face_count", &MacroMesh::boundary_face_count)
        .def("sub_element_count", &MacroMesh::sub_element_count)
        .def("max_level", &MacroMesh::max_level)
        .def("refine", [](const MacroMesh& mesh, const std::set<int>& ids) { return refine_macros(mesh, ids); },
             "ids"_a)
        .def("to_text", [](const MacroMesh& mesh) {
            std::ostringstream os;
            write_mesh_text(mesh, os);
            return os.str();
        });

    m.def("build_mesh", [](int n, int mm) { return build_structured_macro_mesh(2, n, mm); }, "n"_a, "m"_a);
    m.def("patch_dof_count", &patch_dof_count, "d"_a, "m"_a, "p"_a);
    m.def("stabilization_tau",
          [](const std::vector<double>& a, double kappa, const std::vector<double>& n, double length) {
              return stabilization_tau(to_vec2(a), kappa, to_vec2(n), length);
          },
          "advect"_a, "kappa"_a, "normal"_a, "length"_a);
    m.def("supg_parameter",
          [](double h, const std::vector<double>& a, double kappa, bool paper_plus) {
              return supg_parameter(h, to_vec2(a), kappa,
                                    paper_plus ? SupgVariant::PaperPlus : SupgVariant::ClassicalMinus);
          },
          "h"_a, "advect"_a, "kappa"_a, "paper_plus"_a = false);

    m.def("solve",
          [](int n, int mm, int p, double kappa, const std::vector<double>& advect, const std::string& benchmark,
             double tol, const std::string& mode, const std::string& precond, const std::string& supg, int workers,
             const std::string& tau_length, const MacroMesh* mesh) {
              const RunOptions o = make_options(tol, mode, precond, supg, workers, tau_length);
              const BenchmarkCase bc = make_benchmark(benchmark, kappa, to_vec2(advect));
              const MacroMesh built = mesh ? *mesh : build_structured_macro_mesh(2, n, mm);
              SolveResult r;
              {
                  py::gil_scoped_release release;
                  r = solve(built, p, bc.problem(), o.stab, o.solver);
              }
              py::dict out = report_dict(r.report);
              const DiscreteField field(built, p, r.solution);
              out["l2_error"] = l2_error(field, bc.exact);
              out["max_u"] = max_nodal_value(field);
              out["trace"] = r.solution.trace;
              return out;
          },
          "n"_a = 4, "m"_a = 2, "p"_a = 2, "kappa"_a = 0.4, "advect"_a = std::vector<double>{1.0, 1.0},
          "benchmark"_a = "tanh", "tol"_a = 1e-6, "mode"_a = "mf", "precond"_a = "dinv", "supg"_a = "off",
          "workers"_a = 1, "tau_length"_a = "sub", "mesh"_a = nullptr,
          "Solve a benchmark problem; returns the solver record with l2_error, max_u and the trace vector.");

    m.def("convergence",
          [](const std::vector<int>& ps, int mm, const std::vector<int>& ns, double kappa,
             const std::vector<double>& advect, const std::string& benchmark, double tol, const std::string& supg) {
              const RunOptions o = make_options(tol, "mf", "dinv", supg, 1, "sub");
              const auto rows = run_convergence(make_benchmark(benchmark, kappa, to_vec2(advect)), ps, mm, ns, o);
              py::list out;
              for (const auto& r : rows)
                  out.append(py::dict("p"_a = r.p, "m"_a = r.m, "n"_a = r.n, "h"_a = r.h, "dof_local"_a = r.dof_local,
                                      "dof_global"_a = r.dof_global, "l2_error"_a = r.l2_error, "rate"_a = r.rate,
                                      "iterations"_a = r.iterations, "converged"_a = r.converged));
              return out;
          },
          "ps"_a, "m"_a, "ns"_a, "kappa"_a = 0.4, "advect"_a = std::vector<double>{1.0, 1.0}, "benchmark"_a = "tanh",
          "tol"_a = 1e-10, "supg"_a = "off");

    m.def("compare",
          [](int p, int mm, int n, const std::vector<double>& tols, double kappa, const std::vector<double>& advect) {
              const CompareReport r =
                  run_compare(make_benchmark("tanh", kappa, to_vec2(advect)), p, mm, n, tols, RunOptions{});
              py::list rows;
              for (const auto& row : r.rows)
                  rows.append(py::dict("tol"_a = row.tol, "mode"_a = to_string(row.mode),
                                       "iterations"_a = row.iterations, "converged"_a = row.converged));
              return py::dict("rows"_a = rows, "parity"_a = r.parity);
          },
          "p"_a = 2, "m"_a = 2, "n"_a = 4, "tols"_a = std::vector<double>{1e-2, 1e-6}, "kappa"_a = 0.4,
          "advect"_a = std::vector<double>{1.0, 1.0});

    m.def("adapt",
          [](int p, int mm, int n, int levels, double theta, double kappa, const std::vector<double>& advect,
             double tol) {
              const RunOptions o = make_options(tol, "mf", "dinv", "off", 1, "sub");
              const AdaptState s = run_adapt(make_benchmark("tanh", kappa, to_vec2(advect)), p, mm, n, levels, theta, o);
              py::list out;
              for (const auto& r : s.history)
                  out.append(py::dict("level"_a = r.level, "n_macros"_a = r.n_macros, "dof_local"_a = r.dof_local,
                                      "dof_global"_a = r.dof_global, "l2_error"_a = r.l2_error,
                                      "eta_total"_a = r.eta_total));
              return py::make_tuple(out, s.mesh);
          },
          "p"_a = 2, "m"_a = 2, "n"_a = 2, "levels"_a = 3, "theta"_a = 0.5, "kappa"_a = 1e-2,
          "advect"_a = std::vector<double>{1.0, 1.0}, "tol"_a = 1e-8,
          "Adaptive study; returns (history rows, final mesh).");

    m.def("mark",
          [](const std::vector<double>& eta, double theta) {
              IndicatorField f;
              f.eta = eta;
              for (double v : eta)
                  f.total += v * v;
              f.total = std::sqrt(f.total);
              return mark(f, theta);
          },
          "eta"_a, "theta"_a);

    m.def("cost",
          [](int d, int nm, int p, const std::string& arith) {
              py::list out;
              for (const auto& r : run_cost(d, nm, p, parse_arith(arith)))
                  out.append(cost_dict(r));
              return out;
          },
          "d"_a = 2, "nm"_a = 8, "p"_a = 1, "arith"_a = "dense");
    m.def("cost_report",
          [](int d, int n, int mm, int p, const std::string& arith) {
              return cost_dict(cost_report({d, n, mm, p, parse_arith(arith)}));
          },
          "d"_a, "n"_a, "m"_a, "p"_a, "arith"_a = "dense");
    m.def("operation_counts",
          [](int d, int n_bar, int m_bar, int p) {
              const OperationComparison c = operation_counts(d, n_bar, m_bar, p);
              return py::dict("mehdg"_a = c.mehdg, "hdg"_a = c.hdg);
          },
          "d"_a, "n_bar"_a, "m_bar"_a, "p"_a);
}
