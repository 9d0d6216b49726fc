#include "test_support.hpp"

#include <doctest.h>

#include <sstream>

using namespace mehdg;
using namespace testing_support;

namespace
{

// Solution whose u part interpolates `u` and whose q part is zero.
Solution nodal_solution(const MacroMesh& mesh, int p, const ScalarField& u)
{
    Solution s;
    for (const auto& k : mesh.macros) {
        const PatchDofMap map = build_patch_dof_map(k, p);
        Vector c = Vector::Zero(3 * map.dof_count);
        for (int i = 0; i < map.dof_count; ++i)
            c[2 * map.dof_count + i] = u(macro_point(mesh, k.id, map.node_reference[i]));
        s.interior.push_back(c);
    }
    return s;
}

double layer_distance(const MacroMesh& mesh, int macro)
{
    const auto c = mesh.corners(macro);
    double lo = 1e300, hi = -1e300, dmin = 1e300;
    for (const auto& x : c) {
        const double s = (2 * x.x() - x.y() - 0.4) / std::sqrt(5.0);
        lo = std::min(lo, s);
        hi = std::max(hi, s);
        dmin = std::min(dmin, std::abs(s));
    }
    return lo <= 0.0 && hi >= 0.0 ? 0.0 : dmin;
}

} // namespace

TEST_CASE("indicator of simple fields")
{
    const MacroMesh mesh = refine_macros(build_structured_macro_mesh(2, 2, 2), {3});
    const Solution c = nodal_solution(mesh, 2, [](const Vec2&) { return 2.5; });
    const IndicatorField e0 = error_indicator(DiscreteField(mesh, 2, c));
    for (double v : e0.eta)
        CHECK(std::abs(v) < 1e-12);

    const Solution x = nodal_solution(mesh, 2, [](const Vec2& y) { return y.x(); });
    const DiscreteField fx(mesh, 2, x);
    const IndicatorField e1 = error_indicator(fx);
    double total = 0.0;
    for (const auto& k : mesh.macros) {
        const auto corners = mesh.corners(k);
        const double expect = triangle_diameter(corners) * std::sqrt(triangle_area(corners));
        CHECK(std::abs(e1.eta[k.id] - expect) < 1e-13);
        total += expect * expect;
    }
    CHECK(std::abs(e1.total - std::sqrt(total)) < 1e-13);

    WorkerPool pool(3);
    const IndicatorField e2 = error_indicator(fx, &pool);
    CHECK(e2.eta == e1.eta);
}

TEST_CASE("dorfler marking")
{
    IndicatorField a;
    a.eta = {3, 4, 0};
    a.total = 5;
    CHECK(mark(a, 0.8) == std::set<int>{1});
    CHECK(mark(a, 1.0) == std::set<int>{0, 1});
    CHECK(mark(a, 0.81) == std::set<int>{0, 1});

    IndicatorField eq;
    eq.eta.assign(10, 1.0);
    eq.total = std::sqrt(10.0);
    CHECK(mark(eq, 0.5) == std::set<int>{0, 1, 2});
    eq.eta.assign(8, 1.0);
    CHECK(mark(eq, 0.5).size() == 2);

    CHECK_THROWS_AS(mark(a, 0.0), InvalidArgument);
    CHECK_THROWS_AS(mark(a, 1.5), InvalidArgument);
}

TEST_CASE("hanging-face traces are conforming")
{
    MacroMesh mesh = build_structured_macro_mesh(2, 2, 2);
    mesh = refine_macros(mesh, {0, 5});
    mesh = refine_macros(mesh, {1});
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    int hanging = 0;
    for (int p : {1, 2, 3}) {
        const BenchmarkCase poly = make_benchmark("poly" + std::to_string(p), 1.0, Vec2::Zero());
        for (const auto& F : mesh.skeleton) {
            if (!F.hanging())
                continue;
            ++hanging;
            const FaceTraceLayout layout = face_trace_map(mesh, F, p);
            CHECK(layout.sub_faces == 2 * mesh.macros[F.sides[0].macro].m);
            const auto& coarse = mesh.macros[F.sides[0].macro];
            const PatchDofMap map = build_patch_dof_map(coarse, p);
            const PatchEvaluator ev(mesh, coarse.id, map, reference_basis(2, p));
            const Vector c = random_vector(map.dof_count, 31 * p + F.id);
            Vector t(layout.size()), g(layout.size());
            for (int k = 0; k < layout.size(); ++k) {
                t[k] = ev.value(c, F.point(layout.node(k)));
                g[k] = poly.exact(F.point(layout.node(k)));
            }
            for (int r = 0; r < 20; ++r) {
                const double s = U(rng);
                const int seg = layout.segment(s);
                const Vector psi = layout.segment_values(seg, s);
                CHECK(std::abs(psi.dot(t.segment(seg * p, p + 1)) - ev.value(c, F.point(s))) <= 1e-12);
                CHECK(std::abs(psi.dot(g.segment(seg * p, p + 1)) - poly.exact(F.point(s))) <= 1e-12);
            }
        }
    }
    CHECK(hanging > 0);
}

TEST_CASE("adapt driver")
{
    const BenchmarkCase bc = make_benchmark("tanh", 1e-2, Vec2(1, 2) / std::sqrt(5.0));
    RunOptions opt;
    opt.solver.tolerance = 1e-8;

    SUBCASE("zero levels is a single solve")
    {
        const AdaptState s = run_adapt(bc, 2, 2, 2, 0, 0.5, opt);
        CHECK(s.history.size() == 1);
        CHECK(s.marked.empty());
        const auto rows = run_convergence(bc, {2}, 2, {2}, opt);
        CHECK(s.history[0].dof_global == rows[0].dof_global);
        CHECK(s.history[0].l2_error == rows[0].l2_error);
        CHECK(s.history[0].iterations == rows[0].iterations);
    }

    SUBCASE("refinement follows the layer")
    {
        const AdaptState s = run_adapt(bc, 2, 2, 2, 4, 0.5, opt);
        REQUIRE(s.history.size() == 5);
        for (std::size_t i = 1; i < s.history.size(); ++i) {
            CHECK(s.history[i].level == static_cast<int>(i));
            CHECK(s.history[i].dof_global > s.history[i - 1].dof_global);
            CHECK(s.history[i].n_macros > s.history[i - 1].n_macros);
        }
        CHECK(s.mesh.max_level() >= 1);
        CHECK(s.mesh.max_level() <= 4);
    }

    SUBCASE("largest indicator sits on the layer")
    {
        const MacroMesh mesh = build_structured_macro_mesh(2, 8, 2);
        const SolveResult r = solve(mesh, 2, bc.problem(), {}, opt.solver);
        const IndicatorField eta = error_indicator(DiscreteField(mesh, 2, r.solution));
        const int best = static_cast<int>(std::max_element(eta.eta.begin(), eta.eta.end()) - eta.eta.begin());
        CHECK(layer_distance(mesh, best) == 0.0);
    }

    SUBCASE("empty marking leaves the solution unchanged")
    {
        const MacroMesh mesh = build_structured_macro_mesh(2, 3, 2);
        const SolveResult a = solve(mesh, 2, bc.problem(), {}, opt.solver);
        const SolveResult b = solve(refine_macros(mesh, {}), 2, bc.problem(), {}, opt.solver);
        CHECK((a.solution.trace.array() == b.solution.trace.array()).all());
        for (std::size_t e = 0; e < a.solution.interior.size(); ++e)
            CHECK((a.solution.interior[e].array() == b.solution.interior[e].array()).all());
    }
}

TEST_CASE("marked macros concentrate along a sharp layer")
{
    const BenchmarkCase bc = make_benchmark("tanh", 1e-10, Vec2(1, 2) / std::sqrt(5.0));
    RunOptions opt;
    opt.solver.tolerance = 1e-8;
    const MacroMesh base = build_structured_macro_mesh(2, 2, 2);
    const AdaptState s = adapt(base, bc.problem(), opt.stab, opt.solver, AdaptOptions{2, 5, 0.5, bc.exact});
    REQUIRE(s.marked.size() == 5);
    // Replay the refinement to recover each marked macro's geometry.
    MacroMesh mesh = base;
    int near = 0, total = 0;
    for (const auto& marked : s.marked) {
        for (int id : marked) {
            const double h = triangle_diameter(mesh.corners(id));
            near += layer_distance(mesh, id) <= 2 * h;
            ++total;
        }
        mesh = refine_macros(mesh, marked);
    }
    CHECK(mesh.macros.size() == s.mesh.macros.size());
    CHECK(total > 0);
    CHECK(near >= 0.8 * total);
    for (const auto& row : s.history)
        CHECK(std::isfinite(row.l2_error));

    std::ostringstream os;
    write_adapt_csv(s.history, os);
    const CsvTable t = parse_csv(os.str());
    CHECK(t.header == std::vector<std::string>{"level", "n_macros", "dof_local", "dof_global", "l2_error", "eta_total"});
    REQUIRE(t.rows.size() == s.history.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CHECK(t.number(i, "l2_error") == s.history[i].l2_error);
        CHECK(t.number(i, "dof_global") == s.history[i].dof_global);
    }
}
