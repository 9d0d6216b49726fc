#pragma once

#include "mehdg/assembly.hpp"
#include "mehdg/workers.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mehdg
{

enum class Preconditioner
{
    None,
    DInv
};

enum class SolveMode
{
    MatrixFree,
    MatrixBased
};

std::string to_string(Preconditioner p);
std::string to_string(SolveMode m);
Preconditioner parse_preconditioner(const std::string& s);
SolveMode parse_solve_mode(const std::string& s);

struct SolverConfig
{
    double tolerance = 1e-6;
    int restart = 100;
    int max_iterations = 10000;
    Preconditioner precond = Preconditioner::DInv;
    SolveMode mode = SolveMode::MatrixFree;
    int workers = 1;

    void validate() const;
};

/// Partial-pivoted LU of a local block A, dense or sparse following its storage mode.
class LocalSolver
{
  public:
    LocalSolver() = default;
    /// Throws SingularLocalBlock(macro) when a pivot falls below 1e-13 max|A|.
    void factor(const LocalMatrix& A, int macro);

    Vector solve(const Vector& b) const;
    Matrix solve(const Matrix& b) const;
    int size() const { return n_; }

  private:
    int n_ = 0;
    StorageMode mode_ = StorageMode::Dense;
    Eigen::PartialPivLU<Matrix> dense_;
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> sparse_;
};

/// Factorization of a face block D: Cholesky of D or of -D when definite, LU otherwise.
class FaceFactor
{
  public:
    enum class Kind
    {
        None,
        Cholesky,
        NegatedCholesky,
        LU
    };

    void factor(const Matrix& D, int face);
    Vector solve(const Vector& b) const;
    Kind kind() const { return kind_; }

  private:
    Kind kind_ = Kind::None;
    Eigen::LLT<Matrix> llt_;
    Eigen::PartialPivLU<Matrix> lu_;
};

std::string to_string(FaceFactor::Kind k);

/// Instrumentation of Schur applications.
struct ApplyStats
{
    long long applications = 0;
    long long macro_computations = 0;
    long long face_reductions = 0;
    double local_seconds = 0.0;  ///< steps 1-3
    double global_seconds = 0.0; ///< step 4
};

struct CondensedSystem
{
    const MacroMesh* mesh = nullptr;
    TraceSpace traces;
    std::vector<PatchDofMap> maps;
    std::vector<LocalOperators> locals;
    std::vector<LocalSolver> solvers;
    std::vector<FaceOperator> faces;      ///< indexed by face id; empty D on Dirichlet faces
    std::vector<FaceFactor> face_factors; ///< indexed by face id
    Vector rhs;                           ///< f = R_hat - C A^{-1} R_u
    std::shared_ptr<WorkerPool> pool;
    mutable ApplyStats stats;
    /// Per-macro scratch of step 3 outputs.
    mutable std::vector<Vector> scratch;

    int dof_global() const { return traces.size; }
    /// z: total interior (q, u) unknowns over all macros.
    long long dof_local() const;
};

/// Assemble all local and face operators of `mesh`.
CondensedSystem assemble_system(const MacroMesh& mesh, int p, const ProblemData& problem, const StabilizationConfig& stab,
                                std::shared_ptr<WorkerPool> pool);

/// Factorize every A and D block and form the reduced right-hand side.
void condense(CondensedSystem& sys);

/// (D - C A^{-1} B) u_hat through the four matrix-free steps.
Vector apply_schur(const CondensedSystem& sys, const Vector& u_hat);
/// Face-wise D^{-1} w.
Vector apply_preconditioner(const CondensedSystem& sys, const Vector& w);
/// Fused u_hat - D^{-1} (sum of C A^{-1} B u_hat contributions).
Vector apply_preconditioned_schur(const CondensedSystem& sys, const Vector& u_hat);

using SchurMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
SchurMatrix assemble_schur_explicit(const CondensedSystem& sys);

struct GmresResult
{
    Vector x;
    int iterations = 0;
    bool converged = false;
    std::vector<double> residuals; ///< relative residual estimates, initial value first
};

using LinearOperator = std::function<Vector(const Vector&)>;
/// Restarted GMRES from x0 = 0. `op` and `rhs` are already preconditioned when left
/// preconditioning is wanted; the tolerance applies to ||rhs - op x|| / ||rhs||.
GmresResult gmres(const LinearOperator& op, const Vector& rhs, const SolverConfig& cfg);

/// Per-macro (q_x, q_y, u) patch coefficients from A x = R_u - B u_hat.
std::vector<Vector> reconstruct_interior(const CondensedSystem& sys, const Vector& u_hat);

/// Local trace vector of `macro`; Dirichlet entries taken from the projected data when
/// `with_dirichlet`, zero otherwise.
Vector gather_trace(const CondensedSystem& sys, int macro, const Vector& u_hat, bool with_dirichlet);

struct Solution
{
    std::vector<Vector> interior; ///< per macro, 3Q coefficients (q_x, q_y, u)
    Vector trace;                 ///< unknown trace dofs
};

struct SolveReport
{
    int p = 0;
    int m = 0;
    int n = 0;
    long long dof_local = 0;
    int dof_global = 0;
    int iterations = 0;
    bool converged = false;
    double tol = 0.0;
    SolveMode mode = SolveMode::MatrixFree;
    Preconditioner precond = Preconditioner::DInv;
    std::vector<double> residuals;
    double t_init_s = 0.0;
    double t_local_s = 0.0;
    double t_global_s = 0.0;
    double t_reconstruct_s = 0.0;
    std::vector<double> worker_busy_s;
    double lbf = 1.0;
    int face_factor_cholesky = 0;
    int face_factor_negated = 0;
    int face_factor_lu = 0;

    std::string to_json() const;
};

struct SolveResult
{
    Solution solution;
    SolveReport report;
};

SolveResult solve(const MacroMesh& mesh, int p, const ProblemData& problem, const StabilizationConfig& stab,
                  const SolverConfig& config);

} // namespace mehdg
