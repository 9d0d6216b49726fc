#include "standard_hdg.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <json.hpp>

using namespace mehdg;
using namespace testing_support;

namespace
{

CondensedSystem build(const MacroMesh& mesh, int p, const ProblemData& pd, int workers = 1, bool condensed = true,
                      const StabilizationConfig& stab = {})
{
    CondensedSystem sys = assemble_system(mesh, p, pd, stab, std::make_shared<WorkerPool>(workers));
    if (condensed)
        condense(sys);
    return sys;
}

struct DenseBlocks
{
    Matrix A, B, C, D;
    Vector Ru, Rhat;
};

// Full uncondensed system written out densely.
DenseBlocks dense_blocks(const CondensedSystem& sys)
{
    int nu = 0;
    std::vector<int> off;
    for (const auto& L : sys.locals) {
        off.push_back(nu);
        nu += L.A.rows();
    }
    const int z = sys.dof_global();
    DenseBlocks d{Matrix::Zero(nu, nu), Matrix::Zero(nu, z), Matrix::Zero(z, nu), Matrix::Zero(z, z),
                  Vector::Zero(nu), Vector::Zero(z)};
    for (std::size_t e = 0; e < sys.locals.size(); ++e) {
        const auto& L = sys.locals[e];
        const int n = L.A.rows();
        d.A.block(off[e], off[e], n, n) = L.A.to_dense();
        d.Ru.segment(off[e], n) = L.R_u;
        const Matrix B = L.B.to_dense(), C = L.C.to_dense();
        const auto& l2g = sys.traces.local_to_global[e];
        for (std::size_t k = 0; k < l2g.size(); ++k) {
            if (l2g[k] < 0)
                continue;
            d.B.col(l2g[k]).segment(off[e], n) += B.col(k);
            d.C.row(l2g[k]).segment(off[e], n) += C.row(k);
        }
    }
    for (int f : sys.traces.unknown_faces) {
        const int o = sys.traces.face_offset[f];
        const auto& F = sys.faces[f];
        d.D.block(o, o, F.D.rows(), F.D.cols()) = F.D;
        d.Rhat.segment(o, F.R_hat.size()) = F.R_hat;
    }
    return d;
}

ProblemData smooth_problem(const Vec2& a, double kappa)
{
    return make_benchmark("tanh", kappa, a).problem();
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / b.norm(); }

} // namespace

TEST_CASE("solver configuration")
{
    SolverConfig c;
    CHECK(c.tolerance == 1e-6);
    CHECK(c.restart == 100);
    CHECK(c.max_iterations == 10000);
    CHECK_NOTHROW(c.validate());
    for (double t : {0.0, 1.0, -1e-3, 2.0}) {
        c.tolerance = t;
        CHECK_THROWS_AS(c.validate(), InvalidArgument);
    }
    c = {};
    c.workers = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    CHECK(parse_preconditioner("dinv") == Preconditioner::DInv);
    CHECK(parse_preconditioner("none") == Preconditioner::None);
    CHECK(parse_solve_mode("mf") == SolveMode::MatrixFree);
    CHECK(parse_solve_mode("mb") == SolveMode::MatrixBased);
    CHECK_THROWS_AS(parse_solve_mode("x"), InvalidArgument);
    CHECK_THROWS_AS(parse_preconditioner("ilu"), InvalidArgument);
}

TEST_CASE("condense")
{
    SUBCASE("zero data gives a zero right-hand side")
    {
        ProblemData pd;
        pd.advection = Vec2(1, 2);
        const MacroMesh mesh = build_structured_macro_mesh(2, 2, 2);
        const CondensedSystem sys = build(mesh, 2, pd);
        CHECK(sys.rhs.size() == sys.dof_global());
        CHECK(sys.rhs.cwiseAbs().maxCoeff() == 0.0);
        const auto x = reconstruct_interior(sys, Vector::Zero(sys.dof_global()));
        for (const auto& v : x)
            CHECK(v.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("two-macro counts")
    {
        const MacroMesh mesh = build_structured_macro_mesh(2, 1, 1);
        const CondensedSystem sys = build(mesh, 1, ProblemData{});
        CHECK(sys.dof_global() == 2);
        CHECK(sys.dof_local() == 2 * 9);
        CHECK(sys.traces.unknown_faces.size() == 1);
    }
    SUBCASE("linear patch test")
    {
        for (int m : {1, 2, 4})
            for (int p : {1, 2}) {
                const BenchmarkCase bc = make_benchmark("linear", 1.0, Vec2::Zero());
                const MacroMesh mesh = build_structured_macro_mesh(2, 2, m);
                SolverConfig cfg;
                cfg.tolerance = 1e-13;
                const SolveResult r = solve(mesh, p, bc.problem(), {}, cfg);
                CHECK(r.report.converged);
                const CondensedSystem sys = build(mesh, p, bc.problem());
                const Vector expect = interpolate_trace(mesh, sys.traces, bc.exact);
                CHECK((r.solution.trace - expect).cwiseAbs().maxCoeff() < 1e-10);
                const auto x = interpolate_interior(mesh, p, bc.exact, bc.gradient);
                for (std::size_t e = 0; e < x.size(); ++e) {
                    const int Q = sys.locals[e].Q;
                    CHECK((r.solution.interior[e].tail(Q) - x[e].tail(Q)).cwiseAbs().maxCoeff() < 1e-9);
                    CHECK((r.solution.interior[e] - x[e]).cwiseAbs().maxCoeff() < 1e-8);
                }
            }
    }
}

TEST_CASE("local and face factorizations")
{
    LocalSolver ls;
    Matrix S = Matrix::Identity(4, 4);
    S(3, 3) = 0.0;
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < 3; ++i)
        t.emplace_back(i, i, 1.0);
    CHECK_THROWS_AS(ls.factor(LocalMatrix::from_triplets(4, 4, t, StorageMode::Dense), 5), SingularLocalBlock);
    try {
        ls.factor(LocalMatrix::from_triplets(4, 4, t, StorageMode::Sparse), 7);
        CHECK(false);
    } catch (const SingularLocalBlock& e) {
        CHECK(e.macro_id == 7);
    }
    t.emplace_back(3, 3, 2.0);
    t.emplace_back(0, 3, 1.0);
    for (StorageMode mode : {StorageMode::Dense, StorageMode::Sparse}) {
        ls.factor(LocalMatrix::from_triplets(4, 4, t, mode), 0);
        const Vector b = random_vector(4, 2);
        const Vector x = ls.solve(b);
        CHECK((LocalMatrix::from_triplets(4, 4, t, mode) * x - b).norm() < 1e-14);
    }

    FaceFactor ff;
    const Matrix spd = (Matrix(2, 2) << 2, 1, 1, 3).finished();
    ff.factor(spd, 0);
    CHECK(ff.kind() == FaceFactor::Kind::Cholesky);
    ff.factor(-spd, 0);
    CHECK(ff.kind() == FaceFactor::Kind::NegatedCholesky);
    const Vector b = random_vector(2, 1);
    CHECK((-spd * ff.solve(b) - b).norm() < 1e-14);
    const Matrix indefinite = (Matrix(2, 2) << 1, 2, 0, -1).finished();
    ff.factor(indefinite, 0);
    CHECK(ff.kind() == FaceFactor::Kind::LU);
    CHECK((indefinite * ff.solve(b) - b).norm() < 1e-14);
    try {
        ff.factor(Matrix::Zero(3, 3), 11);
        CHECK(false);
    } catch (const SingularFaceBlock& e) {
        CHECK(e.face_id == 11);
    }
}

TEST_CASE("interior face blocks are negative definite")
{
    const MacroMesh mesh = build_structured_macro_mesh(2, 3, 2);
    const CondensedSystem sys = build(mesh, 2, smooth_problem(Vec2(1, 1), 0.4));
    for (int f : sys.traces.unknown_faces)
        CHECK(sys.face_factors[f].kind() == FaceFactor::Kind::NegatedCholesky);
}

TEST_CASE("matrix-free Schur operator")
{
    SUBCASE("zero in, zero out")
    {
        const MacroMesh mesh = build_structured_macro_mesh(2, 2, 2);
        const CondensedSystem sys = build(mesh, 2, smooth_problem(Vec2(1, 1), 0.4));
        CHECK(apply_schur(sys, Vector::Zero(sys.dof_global())).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("agrees with the explicit Schur matrix")
    {
        for (auto [n, m, p] : std::array<std::array<int, 3>, 4>{{{2, 1, 1}, {2, 2, 2}, {3, 2, 3}, {2, 4, 2}}}) {
            MacroMesh mesh = build_structured_macro_mesh(2, n, m);
            if (m == 4)
                mesh = refine_macros(mesh, {2});
            const CondensedSystem sys = build(mesh, p, smooth_problem(Vec2(1, 1), 0.05));
            const SchurMatrix S = assemble_schur_explicit(sys);
            for (unsigned s = 0; s < 20; ++s) {
                const Vector x = random_vector(sys.dof_global(), 100 + s);
                const Vector mb = S * x;
                CHECK(rel(apply_schur(sys, x), mb) <= 1e-10);
                const Vector pmb = apply_preconditioner(sys, mb);
                CHECK(rel(apply_preconditioned_schur(sys, x), pmb) <= 1e-10);
            }
        }
    }
    SUBCASE("two-macro instrumentation")
    {
        const MacroMesh mesh = build_structured_macro_mesh(2, 1, 2);
        const CondensedSystem sys = build(mesh, 2, smooth_problem(Vec2(1, 1), 0.4));
        sys.stats = {};
        apply_schur(sys, random_vector(sys.dof_global(), 3));
        CHECK(sys.stats.applications == 1);
        CHECK(sys.stats.macro_computations == 2);
        CHECK(sys.stats.face_reductions == 1);
    }
}

TEST_CASE("explicit Schur matrix")
{
    SUBCASE("dense block elimination oracle")
    {
        for (int p : {1, 2, 3}) {
            const MacroMesh mesh = build_structured_macro_mesh(2, 1, 1);
            const ProblemData pd = smooth_problem(Vec2(1, 0.3), 0.2);
            const CondensedSystem raw = build(mesh, p, pd, 1, false);
            const DenseBlocks d = dense_blocks(raw);
            const Eigen::PartialPivLU<Matrix> lu(d.A);
            const Matrix S = d.D - d.C * lu.solve(d.B);
            const Vector f = d.Rhat - d.C * lu.solve(d.Ru);
            const CondensedSystem sys = build(mesh, p, pd);
            const Matrix Se = Matrix(assemble_schur_explicit(sys));
            CHECK((Se - S).cwiseAbs().maxCoeff() <= 1e-11);
            CHECK((sys.rhs - f).cwiseAbs().maxCoeff() <= 1e-11);
            // Preconditioned operator against the dense inverse.
            const Vector x = random_vector(sys.dof_global(), 8);
            const Vector ref = d.D.inverse() * (S * x);
            CHECK((apply_preconditioned_schur(sys, x) - ref).cwiseAbs().maxCoeff() < 1e-12 * ref.norm() + 1e-14);
            const Vector dx = d.D * x;
            CHECK((apply_preconditioner(sys, dx) - x).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    SUBCASE("sparsity follows face adjacency")
    {
        const MacroMesh mesh = build_structured_macro_mesh(2, 3, 1);
        const CondensedSystem sys = build(mesh, 2, smooth_problem(Vec2(1, 1), 0.4));
        const Matrix S = Matrix(assemble_schur_explicit(sys));
        std::vector<int> face_of(sys.dof_global());
        for (int f : sys.traces.unknown_faces)
            for (int k = 0; k < sys.traces.layouts[f].size(); ++k)
                face_of[sys.traces.face_offset[f] + k] = f;
        auto share = [&](int f, int g) {
            for (const auto& a : mesh.skeleton[f].sides)
                for (const auto& b : mesh.skeleton[g].sides)
                    if (a.macro == b.macro)
                        return true;
            return false;
        };
        int checked_zero = 0;
        for (int i = 0; i < S.rows(); ++i)
            for (int j = 0; j < S.cols(); ++j)
                if (!share(face_of[i], face_of[j])) {
                    CHECK(S(i, j) == 0.0);
                    ++checked_zero;
                }
        CHECK(checked_zero > 0);
    }
    SUBCASE("symmetric for pure diffusion")
    {
        for (int m : {1, 2, 3}) {
            ProblemData pd;
            pd.kappa = 0.3;
            const MacroMesh mesh = refine_macros(build_structured_macro_mesh(2, 2, m), {4});
            const CondensedSystem sys = build(mesh, 2, pd);
            const Matrix S = Matrix(assemble_schur_explicit(sys));
            CHECK((S - S.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * S.cwiseAbs().maxCoeff());
        }
    }
}

TEST_CASE("preconditioner of an identity face block is the identity")
{
    const MacroMesh mesh = build_structured_macro_mesh(2, 2, 1);
    CondensedSystem sys = build(mesh, 2, smooth_problem(Vec2(1, 1), 0.4));
    for (int f : sys.traces.unknown_faces) {
        sys.faces[f].D = Matrix::Identity(sys.faces[f].D.rows(), sys.faces[f].D.cols());
        sys.face_factors[f].factor(sys.faces[f].D, f);
        CHECK(sys.face_factors[f].kind() == FaceFactor::Kind::Cholesky);
    }
    const Vector w = random_vector(sys.dof_global(), 4);
    CHECK((apply_preconditioner(sys, w) - w).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gmres")
{
    SolverConfig cfg;
    cfg.tolerance = 1e-12;
    const Vector ones = Vector::Ones(5);
    const GmresResult id = gmres([](const Vector& x) { return x; }, random_vector(7, 1), cfg);
    CHECK(id.converged);
    CHECK(id.iterations == 1);

    const Vector diag = Vector::LinSpaced(5, 1, 5);
    const GmresResult r = gmres([&](const Vector& x) { return Vector(diag.cwiseProduct(x)); }, ones, cfg);
    CHECK(r.converged);
    CHECK(r.iterations <= 5);
    CHECK((r.x - diag.cwiseInverse()).cwiseAbs().maxCoeff() < 1e-11);
    CHECK(r.residuals.front() == 1.0);
    CHECK(r.residuals.size() == static_cast<std::size_t>(r.iterations + 1));
    CHECK(r.residuals.back() <= cfg.tolerance);

    // Restarted GMRES on a nonsymmetric system.
    const int n = 60;
    Matrix M = Matrix::Identity(n, n) * 4;
    for (int i = 0; i + 1 < n; ++i) {
        M(i, i + 1) = -1.5;
        M(i + 1, i) = -0.5;
    }
    cfg.restart = 7;
    cfg.tolerance = 1e-10;
    const Vector b = random_vector(n, 6);
    const GmresResult rr = gmres([&](const Vector& x) { return Vector(M * x); }, b, cfg);
    CHECK(rr.converged);
    CHECK((M * rr.x - b).norm() <= 1e-10 * b.norm() * 1.0001);

    cfg.max_iterations = 3;
    const GmresResult stop = gmres([&](const Vector& x) { return Vector(M * x); }, b, cfg);
    CHECK_FALSE(stop.converged);
    CHECK(stop.iterations == 3);
    CHECK(stop.x.size() == n);

    const GmresResult zero = gmres([&](const Vector& x) { return Vector(M * x); }, Vector::Zero(n), {});
    CHECK(zero.converged);
    CHECK(zero.x.norm() == 0.0);
}

TEST_CASE("matrix-based and matrix-free iteration counts agree")
{
    const ProblemData pd = smooth_problem(Vec2(1, 1), 0.4);
    for (auto [n, m] : std::array<std::pair<int, int>, 3>{{{2, 2}, {4, 1}, {2, 4}}})
        for (double tol : {1e-2, 1e-6}) {
            const MacroMesh mesh = build_structured_macro_mesh(2, n, m);
            SolverConfig cfg;
            cfg.tolerance = tol;
            const SolveResult mf = solve(mesh, 2, pd, {}, cfg);
            cfg.mode = SolveMode::MatrixBased;
            const SolveResult mb = solve(mesh, 2, pd, {}, cfg);
            CHECK(std::abs(mf.report.iterations - mb.report.iterations) <= 1);
            CHECK(mf.report.converged);
            CHECK(mb.report.converged);
        }
}

TEST_CASE("reconstruction satisfies the block system")
{
    for (int m : {1, 2, 3})
        for (double tol : {1e-6, 1e-10}) {
            const MacroMesh mesh = refine_macros(build_structured_macro_mesh(2, 2, m), {1});
            const ProblemData pd = smooth_problem(Vec2(1, 1), 0.1);
            SolverConfig cfg;
            cfg.tolerance = tol;
            const SolveResult r = solve(mesh, 2, pd, {}, cfg);
            REQUIRE(r.report.converged);
            const CondensedSystem raw = build(mesh, 2, pd, 1, false);
            const BlockResidual res = block_residual(raw, r.solution.interior, r.solution.trace);
            CHECK(res.local <= 1e-12 * res.rhs_norm + 1e-14);
            CHECK(res.global <= 10 * tol * res.rhs_norm);
        }
}

TEST_CASE("standard HDG special case")
{
    for (int p : {1, 2, 3}) {
        const int n = 3;
        const BenchmarkCase bc = make_benchmark("tanh", 0.4, Vec2(1, 1));
        oracle::HdgProblem hp;
        hp.a = bc.advection;
        hp.kappa = bc.kappa;
        hp.f = bc.source;
        hp.g = bc.exact;
        const oracle::StandardHdg ref(n, p, hp);
        const MacroMesh mesh = build_structured_macro_mesh(2, n, 1);
        StabilizationConfig stab;
        stab.extra_quadrature = 19 - 2 * p;
        SolverConfig cfg;
        cfg.tolerance = 1e-14;
        const SolveResult r = solve(mesh, p, bc.problem(), stab, cfg);
        CHECK(r.report.dof_global == ref.trace_unknowns());
        const DiscreteField field(mesh, p, r.solution);
        double err = 0.0;
        for (const auto& k : mesh.macros) {
            const auto c = mesh.corners(k);
            const int cell = ref.locate((c[0] + c[1] + c[2]) / 3.0);
            const PatchDofMap& map = field.dof_map(k.id);
            const Vector u = field.u_coefficients(k.id);
            for (int i = 0; i < map.dof_count; ++i)
                err = std::max(err, std::abs(u[i] - ref.u(cell, macro_point(mesh, k.id, map.node_reference[i]))));
        }
        CAPTURE(p);
        CHECK(err <= 1e-9);
    }
}

TEST_CASE("results do not depend on the worker count")
{
    const MacroMesh mesh = refine_macros(build_structured_macro_mesh(2, 3, 2), {0, 7});
    const ProblemData pd = smooth_problem(Vec2(1, 1), 0.4);
    SolverConfig cfg;
    cfg.workers = 1;
    const SolveResult base = solve(mesh, 2, pd, {}, cfg);
    for (int w : {2, 3, 8}) {
        cfg.workers = w;
        const SolveResult r = solve(mesh, 2, pd, {}, cfg);
        CHECK(r.report.iterations == base.report.iterations);
        REQUIRE(r.solution.trace.size() == base.solution.trace.size());
        CHECK((r.solution.trace.array() == base.solution.trace.array()).all());
        for (std::size_t e = 0; e < r.solution.interior.size(); ++e)
            CHECK((r.solution.interior[e].array() == base.solution.interior[e].array()).all());
        CHECK(r.report.lbf > 0.0);
        CHECK(r.report.lbf <= 1.0);
        CHECK(r.report.worker_busy_s.size() == static_cast<std::size_t>(w));
    }
}

TEST_CASE("solution is linear in the data")
{
    const BenchmarkCase bc = make_benchmark("tanh", 0.2, Vec2(1, 1));
    ProblemData pd = bc.problem();
    pd.neumann = bc.neumann_flux();
    pd.boundary_tag = [](const Vec2& x, const Vec2&) {
        return x.y() < 1e-12 ? BoundaryTag::Neumann : BoundaryTag::Dirichlet;
    };
    const double s = -3.5;
    ProblemData scaled = pd;
    scaled.source = [&](const Vec2& x) { return s * bc.source(x); };
    scaled.dirichlet = [&](const Vec2& x) { return s * bc.exact(x); };
    scaled.neumann = [&, g = pd.neumann](const Vec2& x, const Vec2& n) { return s * g(x, n); };
    const MacroMesh mesh = build_structured_macro_mesh(2, 2, 2);
    SolverConfig cfg;
    cfg.tolerance = 1e-13;
    const SolveResult a = solve(mesh, 2, pd, {}, cfg);
    const SolveResult b = solve(mesh, 2, scaled, {}, cfg);
    CHECK(rel(b.solution.trace, s * a.solution.trace) <= 1e-12);
    for (std::size_t e = 0; e < a.solution.interior.size(); ++e)
        CHECK(rel(b.solution.interior[e], s * a.solution.interior[e]) <= 1e-12);
}

TEST_CASE("solve report")
{
    const MacroMesh mesh = build_structured_macro_mesh(2, 2, 2);
    SolverConfig cfg;
    const SolveResult r = solve(mesh, 2, smooth_problem(Vec2(1, 1), 0.4), {}, cfg);
    const auto j = nlohmann::json::parse(r.report.to_json());
    for (const char* key : {"p", "m", "n", "dof_local", "dof_global", "iterations", "converged", "tol", "mode",
                            "precond", "t_init_s", "t_local_s", "t_global_s", "lbf"})
        CHECK(j.contains(key));
    CHECK(j["mode"] == "mf");
    CHECK(j["precond"] == "dinv");
    CHECK(j["dof_global"] == r.report.dof_global);
    CHECK(r.report.residuals.size() == static_cast<std::size_t>(r.report.iterations + 1));
    CHECK(r.report.face_factor_negated == static_cast<int>(mesh.interior_face_count()));

    cfg.max_iterations = 2;
    const SolveResult nc = solve(mesh, 2, smooth_problem(Vec2(1, 1), 0.4), {}, cfg);
    CHECK_FALSE(nc.report.converged);
    CHECK(nc.report.iterations == 2);
}

TEST_CASE("m=2 needs fewer global dofs than m=1" * doctest::description("equal n*m"))
{
    const ProblemData pd = smooth_problem(Vec2(1, 1), 0.4);
    const SolveResult a = solve(build_structured_macro_mesh(2, 8, 1), 2, pd, {}, {});
    const SolveResult b = solve(build_structured_macro_mesh(2, 4, 2), 2, pd, {}, {});
    CHECK(b.report.dof_global < a.report.dof_global);
    CHECK(b.report.iterations <= a.report.iterations);
}

TEST_CASE("block preconditioning does not increase iteration counts" * doctest::may_fail())
{
    const BenchmarkCase bc = make_benchmark("tanh", 0.4, Vec2(1, 1));
    for (int p : {1, 2, 3})
        for (int m : {1, 2, 4})
            for (int nm : {4, 8, 16}) {
                if (nm < m)
                    continue;
                const MacroMesh mesh = build_structured_macro_mesh(2, nm / m, m);
                SolverConfig cfg;
                const SolveResult with = solve(mesh, p, bc.problem(), {}, cfg);
                cfg.precond = Preconditioner::None;
                const SolveResult without = solve(mesh, p, bc.problem(), {}, cfg);
                CAPTURE(p);
                CAPTURE(m);
                CAPTURE(nm);
                CHECK(with.report.iterations <= without.report.iterations);
            }
}
