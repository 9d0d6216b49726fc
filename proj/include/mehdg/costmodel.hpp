#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace mehdg
{

enum class Arithmetic
{
    Dense,
    Sparse
};

struct CostInputs
{
    int d = 2;
    int n = 1;
    int m = 1;
    int p = 1;
    Arithmetic arithmetic = Arithmetic::Dense;

    void validate() const;
};

/// Leading-order operation counts; index 0 = initialization, 1..4 = steps 1..4.
using OpCounts = std::array<double, 5>;

struct MemoryEstimate
{
    double A_block = 0.0;  ///< bytes per macro, scalar Q_d x Q_d block
    double BC_block = 0.0; ///< bytes per macro, each of B and C
    double D_block = 0.0;  ///< bytes per face
    double total = 0.0;    ///< N (A + 2 BC) + D_faces D
};

struct CostReport
{
    CostInputs inputs;
    std::int64_t N = 0;       ///< macro-elements
    std::int64_t M = 0;       ///< sub-elements per macro
    std::int64_t Q = 0;       ///< Q_(d)
    std::int64_t Q_dm1 = 0;   ///< Q_(d-1)
    std::int64_t D_faces = 0; ///< interior skeleton faces
    double sparsity = 1.0;
    double sparsity_dm1 = 1.0;
    OpCounts ops{};
    MemoryEstimate memory;
};

/// Counting part of the cost report (N, M, Q, D, sparsity).
CostReport dependent_quantities(const CostInputs& in);

/// Sparsity constant in dimension `k` for degree p, m subdivisions; 1 for dense arithmetic.
double sparsity_constant(int k, int m, int p, Arithmetic arithmetic);

struct OperationComparison
{
    OpCounts mehdg{};
    OpCounts hdg{};
    /// Standard-HDG step 4 exactly as tabulated, m^d n^d (p+d)^(2d-2).
    double hdg_step4_tabulated = 0.0;
};

/// MEHDG counts at (n_bar, m_bar) against standard HDG at m = 1, n = n_bar m_bar.
OperationComparison operation_counts(int d, int n_bar, int m_bar, int p);
/// MEHDG counts for one configuration.
OpCounts mehdg_operation_counts(int d, int n, int m, int p);

MemoryEstimate memory_estimate(const CostInputs& in);

/// Full report: counts, MEHDG operations for (n, m), memory.
CostReport cost_report(const CostInputs& in);

/// Sweep m over powers of two dividing `nm_product`, n = nm_product / m.
std::vector<CostReport> cost_sweep(int d, int nm_product, int p, Arithmetic arithmetic);

void write_cost_csv(const std::vector<CostReport>& rows, std::ostream& os);

} // namespace mehdg
