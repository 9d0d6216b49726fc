#include "mehdg/schur_solver.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>

namespace mehdg
{

namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Subtracts each side's contribution `v` from the face segment of `out`, sides in stored order.
void reduce_face(const CondensedSystem& sys, int face, const std::vector<Vector>& v, Vector& out)
{
    const int offset = sys.traces.face_offset[face];
    for (const auto& side : sys.mesh->skeleton[face].sides) {
        const auto& seg = sys.traces.macro_segments[side.macro][side.edge];
        for (int i = 0; i < seg.count; ++i)
            out[offset + seg.first_dof + i] -= v[side.macro][seg.local_offset + i];
    }
}

Vector face_segment(const CondensedSystem& sys, int face, const Vector& x)
{
    return x.segment(sys.traces.face_offset[face], sys.traces.layouts[face].size());
}

void macro_steps(const CondensedSystem& sys, const Vector& u_hat)
{
    auto t0 = Clock::now();
    const int nm = static_cast<int>(sys.locals.size());
    sys.pool->parallel_for(nm, [&](int e) {
        const Vector ue = gather_trace(sys, e, u_hat, false);
        const Vector x = sys.locals[e].B * ue;
        const Vector y = sys.solvers[e].solve(x);
        sys.scratch[e] = sys.locals[e].C * y;
    });
    sys.stats.macro_computations += nm;
    sys.stats.local_seconds += seconds_since(t0);
}

} // namespace

std::string to_string(Preconditioner p) { return p == Preconditioner::DInv ? "dinv" : "none"; }
std::string to_string(SolveMode m) { return m == SolveMode::MatrixFree ? "mf" : "mb"; }

Preconditioner parse_preconditioner(const std::string& s)
{
    if (s == "dinv")
        return Preconditioner::DInv;
    if (s == "none")
        return Preconditioner::None;
    throw InvalidArgument("unknown preconditioner '" + s + "' (expected dinv|none)");
}

SolveMode parse_solve_mode(const std::string& s)
{
    if (s == "mf")
        return SolveMode::MatrixFree;
    if (s == "mb")
        return SolveMode::MatrixBased;
    throw InvalidArgument("unknown mode '" + s + "' (expected mf|mb)");
}

std::string to_string(FaceFactor::Kind k)
{
    switch (k) {
    case FaceFactor::Kind::Cholesky:
        return "cholesky";
    case FaceFactor::Kind::NegatedCholesky:
        return "negated-cholesky";
    case FaceFactor::Kind::LU:
        return "lu";
    default:
        return "none";
    }
}

void SolverConfig::validate() const
{
    if (!(tolerance > 0.0 && tolerance < 1.0))
        throw InvalidArgument("tolerance must lie in (0, 1)");
    if (restart < 1 || max_iterations < 1)
        throw InvalidArgument("restart and max iterations must be positive");
    if (workers < 1)
        throw InvalidArgument("worker count must be at least 1");
}

void LocalSolver::factor(const LocalMatrix& A, int macro)
{
    n_ = A.rows();
    mode_ = A.mode();
    if (mode_ == StorageMode::Dense) {
        const Matrix& M = A.dense();
        const double scale = M.cwiseAbs().maxCoeff();
        dense_.compute(M);
        const double pivot = dense_.matrixLU().diagonal().cwiseAbs().minCoeff();
        if (!(scale > 0.0) || !(pivot >= 1e-13 * scale))
            throw SingularLocalBlock(macro);
        return;
    }
    const auto& S = A.sparse();
    double scale = 0.0;
    for (int k = 0; k < S.outerSize(); ++k)
        for (LocalMatrix::Sparse::InnerIterator it(S, k); it; ++it)
            scale = std::max(scale, std::abs(it.value()));
    sparse_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    sparse_->compute(S);
    if (!(scale > 0.0) || sparse_->info() != Eigen::Success)
        throw SingularLocalBlock(macro);
    const Vector b = Vector::LinSpaced(n_, 1.0, 2.0);
    const Vector x = sparse_->solve(b);
    if (!x.allFinite() || (S * x - b).norm() > 1e-8 * b.norm())
        throw SingularLocalBlock(macro);
}

Vector LocalSolver::solve(const Vector& b) const
{
    if (mode_ == StorageMode::Dense)
        return dense_.solve(b);
    return sparse_->solve(b);
}

Matrix LocalSolver::solve(const Matrix& b) const
{
    if (mode_ == StorageMode::Dense)
        return dense_.solve(b);
    return sparse_->solve(b);
}

void FaceFactor::factor(const Matrix& D, int face)
{
    const double scale = D.size() ? D.cwiseAbs().maxCoeff() : 0.0;
    if (!(scale > 0.0))
        throw SingularFaceBlock(face);
    const bool symmetric = (D - D.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
    if (symmetric) {
        const Matrix neg = -D;
        llt_.compute(neg);
        if (llt_.info() == Eigen::Success) {
            kind_ = Kind::NegatedCholesky;
            return;
        }
        llt_.compute(D);
        if (llt_.info() == Eigen::Success) {
            kind_ = Kind::Cholesky;
            return;
        }
    }
    lu_.compute(D);
    const double pivot = lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(pivot >= 1e-13 * scale))
        throw SingularFaceBlock(face);
    kind_ = Kind::LU;
}

Vector FaceFactor::solve(const Vector& b) const
{
    switch (kind_) {
    case Kind::Cholesky:
        return llt_.solve(b);
    case Kind::NegatedCholesky:
        return -llt_.solve(b);
    case Kind::LU:
        return lu_.solve(b);
    default:
        throw Error("face block not factorized");
    }
}

long long CondensedSystem::dof_local() const
{
    long long z = 0;
    for (const auto& l : locals)
        z += 3LL * l.Q;
    return z;
}

Vector gather_trace(const CondensedSystem& sys, int macro, const Vector& u_hat, bool with_dirichlet)
{
    const auto& l2g = sys.traces.local_to_global[macro];
    Vector ue = Vector::Zero(static_cast<int>(l2g.size()));
    for (std::size_t k = 0; k < l2g.size(); ++k)
        if (l2g[k] >= 0)
            ue[k] = u_hat[l2g[k]];
    if (with_dirichlet)
        for (const auto& seg : sys.traces.macro_segments[macro])
            if (sys.traces.is_dirichlet(seg.face))
                ue.segment(seg.local_offset, seg.count) =
                    sys.traces.dirichlet_values[seg.face].segment(seg.first_dof, seg.count);
    return ue;
}

CondensedSystem assemble_system(const MacroMesh& mesh, int p, const ProblemData& problem,
                                const StabilizationConfig& stab, std::shared_ptr<WorkerPool> pool)
{
    problem.validate();
    if (mesh.d != 2)
        throw InvalidArgument("the solver supports d = 2 only");
    if (p < 1)
        throw InvalidArgument("polynomial degree must be at least 1");
    CondensedSystem sys;
    sys.mesh = &mesh;
    sys.pool = pool ? std::move(pool) : std::make_shared<WorkerPool>(1);
    sys.traces = build_trace_space(mesh, p, problem);
    const int nm = static_cast<int>(mesh.macros.size());
    const int nf = static_cast<int>(mesh.skeleton.size());
    sys.maps.resize(nm);
    sys.locals.resize(nm);
    sys.faces.resize(nf);
    reference_basis(2, p);
    sys.pool->parallel_for(nm, [&](int e) {
        sys.maps[e] = build_patch_dof_map(mesh.macros[e], p);
        sys.locals[e] = assemble_macro(mesh, e, sys.maps[e], sys.traces, problem, stab);
    });
    sys.pool->parallel_for(nf, [&](int f) { sys.faces[f] = assemble_face(mesh, f, sys.traces, problem, stab); });
    return sys;
}

void condense(CondensedSystem& sys)
{
    const int nm = static_cast<int>(sys.locals.size());
    const int nf = static_cast<int>(sys.faces.size());
    sys.solvers.resize(nm);
    sys.face_factors.resize(nf);
    sys.scratch.assign(nm, Vector());
    sys.pool->parallel_for(nm, [&](int e) {
        sys.solvers[e].factor(sys.locals[e].A, e);
        sys.locals[e].A.release();
        sys.scratch[e] = sys.locals[e].C * sys.solvers[e].solve(sys.locals[e].R_u);
    });
    sys.rhs = Vector::Zero(sys.traces.size);
    const auto& unknown = sys.traces.unknown_faces;
    sys.pool->parallel_for(static_cast<int>(unknown.size()), [&](int i) {
        const int f = unknown[i];
        sys.face_factors[f].factor(sys.faces[f].D, f);
        sys.rhs.segment(sys.traces.face_offset[f], sys.faces[f].R_hat.size()) = sys.faces[f].R_hat;
        reduce_face(sys, f, sys.scratch, sys.rhs);
    });
}

Vector apply_schur(const CondensedSystem& sys, const Vector& u_hat)
{
    macro_steps(sys, u_hat);
    auto t0 = Clock::now();
    Vector w = Vector::Zero(sys.traces.size);
    const auto& unknown = sys.traces.unknown_faces;
    sys.pool->parallel_for(static_cast<int>(unknown.size()), [&](int i) {
        const int f = unknown[i];
        w.segment(sys.traces.face_offset[f], sys.faces[f].D.rows()) = sys.faces[f].D * face_segment(sys, f, u_hat);
        reduce_face(sys, f, sys.scratch, w);
    });
    sys.stats.face_reductions += static_cast<long long>(unknown.size());
    sys.stats.global_seconds += seconds_since(t0);
    ++sys.stats.applications;
    return w;
}

Vector apply_preconditioner(const CondensedSystem& sys, const Vector& w)
{
    Vector out(w.size());
    const auto& unknown = sys.traces.unknown_faces;
    sys.pool->parallel_for(static_cast<int>(unknown.size()), [&](int i) {
        const int f = unknown[i];
        out.segment(sys.traces.face_offset[f], sys.faces[f].D.rows()) =
            sys.face_factors[f].solve(face_segment(sys, f, w));
    });
    return out;
}

Vector apply_preconditioned_schur(const CondensedSystem& sys, const Vector& u_hat)
{
    macro_steps(sys, u_hat);
    auto t0 = Clock::now();
    Vector w = Vector::Zero(sys.traces.size);
    const auto& unknown = sys.traces.unknown_faces;
    sys.pool->parallel_for(static_cast<int>(unknown.size()), [&](int i) {
        const int f = unknown[i];
        const int off = sys.traces.face_offset[f];
        const int nd = sys.faces[f].D.rows();
        reduce_face(sys, f, sys.scratch, w);
        w.segment(off, nd) = face_segment(sys, f, u_hat) + sys.face_factors[f].solve(w.segment(off, nd));
    });
    sys.stats.face_reductions += static_cast<long long>(unknown.size());
    sys.stats.global_seconds += seconds_since(t0);
    ++sys.stats.applications;
    return w;
}

SchurMatrix assemble_schur_explicit(const CondensedSystem& sys)
{
    const int nm = static_cast<int>(sys.locals.size());
    std::vector<Matrix> blocks(nm);
    sys.pool->parallel_for(nm, [&](int e) {
        const Matrix B = sys.locals[e].B.to_dense();
        blocks[e] = sys.locals[e].C * sys.solvers[e].solve(B);
    });
    std::vector<Eigen::Triplet<double>> t;
    for (int f : sys.traces.unknown_faces) {
        const Matrix& D = sys.faces[f].D;
        const int off = sys.traces.face_offset[f];
        for (int i = 0; i < D.rows(); ++i)
            for (int j = 0; j < D.cols(); ++j)
                if (D(i, j) != 0.0)
                    t.emplace_back(off + i, off + j, D(i, j));
    }
    for (int e = 0; e < nm; ++e) {
        const auto& l2g = sys.traces.local_to_global[e];
        for (int i = 0; i < blocks[e].rows(); ++i) {
            if (l2g[i] < 0)
                continue;
            for (int j = 0; j < blocks[e].cols(); ++j)
                if (l2g[j] >= 0 && blocks[e](i, j) != 0.0)
                    t.emplace_back(l2g[i], l2g[j], -blocks[e](i, j));
        }
    }
    SchurMatrix S(sys.traces.size, sys.traces.size);
    S.setFromTriplets(t.begin(), t.end());
    S.makeCompressed();
    return S;
}

GmresResult gmres(const LinearOperator& op, const Vector& rhs, const SolverConfig& cfg)
{
    cfg.validate();
    const int n = static_cast<int>(rhs.size());
    GmresResult res;
    res.x = Vector::Zero(n);
    const double bnorm = rhs.norm();
    res.residuals.push_back(1.0);
    if (bnorm == 0.0 || n == 0) {
        res.converged = true;
        res.residuals.back() = 0.0;
        return res;
    }
    const int restart = std::min(cfg.restart, n);
    Vector r = rhs;
    double beta = bnorm;
    while (res.iterations < cfg.max_iterations) {
        Matrix V(n, restart + 1);
        Matrix H = Matrix::Zero(restart + 1, restart);
        Vector cs = Vector::Zero(restart), sn = Vector::Zero(restart);
        Vector g = Vector::Zero(restart + 1);
        g[0] = beta;
        V.col(0) = r / beta;
        int k = 0;
        bool done = false;
        for (; k < restart && res.iterations < cfg.max_iterations; ++k) {
            Vector w = op(V.col(k));
            for (int i = 0; i <= k; ++i) {
                H(i, k) = V.col(i).dot(w);
                w -= H(i, k) * V.col(i);
            }
            H(k + 1, k) = w.norm();
            const bool breakdown = H(k + 1, k) <= 1e-14 * bnorm;
            if (!breakdown)
                V.col(k + 1) = w / H(k + 1, k);
            for (int i = 0; i < k; ++i) {
                const double tmp = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
                H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
                H(i, k) = tmp;
            }
            const double denom = std::hypot(H(k, k), H(k + 1, k));
            cs[k] = H(k, k) / denom;
            sn[k] = H(k + 1, k) / denom;
            H(k, k) = denom;
            H(k + 1, k) = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            ++res.iterations;
            const double rel = std::abs(g[k + 1]) / bnorm;
            res.residuals.push_back(rel);
            if (rel <= cfg.tolerance || breakdown) {
                ++k;
                done = true;
                break;
            }
        }
        const Vector y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        res.x += V.leftCols(k) * y;
        r = rhs - op(res.x);
        beta = r.norm();
        if (beta / bnorm <= cfg.tolerance) {
            res.converged = true;
            return res;
        }
        if (done && beta / bnorm > cfg.tolerance && res.residuals.back() <= cfg.tolerance)
            res.residuals.back() = beta / bnorm;
    }
    return res;
}

std::vector<Vector> reconstruct_interior(const CondensedSystem& sys, const Vector& u_hat)
{
    const int nm = static_cast<int>(sys.locals.size());
    std::vector<Vector> out(nm);
    sys.pool->parallel_for(nm, [&](int e) {
        const Vector ue = gather_trace(sys, e, u_hat, false);
        out[e] = sys.solvers[e].solve(Vector(sys.locals[e].R_u - sys.locals[e].B * ue));
    });
    return out;
}

std::string SolveReport::to_json() const
{
    nlohmann::ordered_json j;
    j["p"] = p;
    j["m"] = m;
    j["n"] = n;
    j["dof_local"] = dof_local;
    j["dof_global"] = dof_global;
    j["iterations"] = iterations;
    j["converged"] = converged;
    j["tol"] = tol;
    j["mode"] = to_string(mode);
    j["precond"] = to_string(precond);
    j["t_init_s"] = t_init_s;
    j["t_local_s"] = t_local_s;
    j["t_global_s"] = t_global_s;
    j["lbf"] = lbf;
    return j.dump();
}

SolveResult solve(const MacroMesh& mesh, int p, const ProblemData& problem, const StabilizationConfig& stab,
                  const SolverConfig& config)
{
    config.validate();
    auto pool = std::make_shared<WorkerPool>(config.workers);
    SolveResult out;
    SolveReport& rep = out.report;
    rep.p = p;
    rep.m = mesh.m;
    rep.n = mesh.n;
    rep.tol = config.tolerance;
    rep.mode = config.mode;
    rep.precond = config.precond;

    auto t0 = Clock::now();
    CondensedSystem sys = assemble_system(mesh, p, problem, stab, pool);
    condense(sys);
    rep.t_init_s = seconds_since(t0);
    rep.dof_local = sys.dof_local();
    rep.dof_global = sys.dof_global();
    for (int f : sys.traces.unknown_faces) {
        switch (sys.face_factors[f].kind()) {
        case FaceFactor::Kind::Cholesky:
            ++rep.face_factor_cholesky;
            break;
        case FaceFactor::Kind::NegatedCholesky:
            ++rep.face_factor_negated;
            break;
        default:
            ++rep.face_factor_lu;
        }
    }

    const bool dinv = config.precond == Preconditioner::DInv;
    LinearOperator op;
    Vector rhs = dinv ? apply_preconditioner(sys, sys.rhs) : sys.rhs;
    SchurMatrix S;
    if (config.mode == SolveMode::MatrixFree) {
        if (dinv)
            op = [&](const Vector& x) { return apply_preconditioned_schur(sys, x); };
        else
            op = [&](const Vector& x) { return apply_schur(sys, x); };
    } else {
        auto tb = Clock::now();
        S = assemble_schur_explicit(sys);
        rep.t_init_s += seconds_since(tb);
        op = [&](const Vector& x) {
            auto ta = Clock::now();
            Vector y = S * x;
            if (dinv)
                y = apply_preconditioner(sys, y);
            sys.stats.global_seconds += seconds_since(ta);
            ++sys.stats.applications;
            return y;
        };
    }
    GmresResult g = gmres(op, rhs, config);
    rep.iterations = g.iterations;
    rep.converged = g.converged;
    rep.residuals = std::move(g.residuals);
    rep.t_local_s = sys.stats.local_seconds;
    rep.t_global_s = sys.stats.global_seconds;

    auto tr = Clock::now();
    out.solution.trace = std::move(g.x);
    out.solution.interior = reconstruct_interior(sys, out.solution.trace);
    rep.t_reconstruct_s = seconds_since(tr);
    rep.worker_busy_s = pool->busy_seconds();
    rep.lbf = pool->load_balance_factor();
    return out;
}

} // namespace mehdg
