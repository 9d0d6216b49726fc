#include "mehdg/costmodel.hpp"
#include "mehdg/csv.hpp"
#include "mehdg/fem_basis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace mehdg
{

namespace
{

double ipow(double x, int k)
{
    double r = 1.0;
    for (int i = 0; i < k; ++i)
        r *= x;
    return r;
}

std::int64_t ipow_int(std::int64_t x, int k)
{
    std::int64_t r = 1;
    for (int i = 0; i < k; ++i)
        r *= x;
    return r;
}

std::int64_t binom(std::int64_t n, int k)
{
    std::int64_t r = 1;
    for (int i = 1; i <= k; ++i)
        r = r * (n - k + i) / i;
    return r;
}

} // namespace

void CostInputs::validate() const
{
    if (d != 2 && d != 3)
        throw InvalidArgument("cost model supports d = 2 or 3");
    if (n < 1 || m < 1 || p < 1)
        throw InvalidArgument("n, m and p must be at least 1");
}

double sparsity_constant(int k, int m, int p, Arithmetic arithmetic)
{
    if (arithmetic == Arithmetic::Dense)
        return 1.0;
    const double q = static_cast<double>(binom(static_cast<std::int64_t>(m) * p + k, k));
    return std::min(1.0, ipow(2.0 * p + 1.0, k) / q);
}

CostReport dependent_quantities(const CostInputs& in)
{
    in.validate();
    CostReport r;
    r.inputs = in;
    const int d = in.d;
    const std::int64_t n = in.n;
    r.N = (d == 2 ? 2 : 6) * ipow_int(n, d);
    r.M = ipow_int(in.m, d);
    r.Q = binom(static_cast<std::int64_t>(in.m) * in.p + d, d);
    r.Q_dm1 = binom(static_cast<std::int64_t>(in.m) * in.p + d - 1, d - 1);
    const std::int64_t A = d == 2 ? 1 : 6;
    const std::int64_t B = d == 2 ? 1 : 2;
    r.D_faces = A * ipow_int(n, d) + B * d * ipow_int(n, d - 1) * (n - 1);
    r.sparsity = sparsity_constant(d, in.m, in.p, in.arithmetic);
    r.sparsity_dm1 = sparsity_constant(d - 1, in.m, in.p, in.arithmetic);
    return r;
}

OpCounts mehdg_operation_counts(int d, int n, int m, int p)
{
    const double nd = ipow(n, d);
    const double base = static_cast<double>(m) * p + d;
    return {nd * ipow(base, 3 * d), nd * ipow(base, 2 * d - 1), nd * ipow(base, 2 * d), nd * ipow(base, 2 * d - 1),
            nd * ipow(base - 1.0, 2 * d - 2)};
}

OperationComparison operation_counts(int d, int n_bar, int m_bar, int p)
{
    CostInputs{d, n_bar, m_bar, p}.validate();
    OperationComparison c;
    c.mehdg = mehdg_operation_counts(d, n_bar, m_bar, p);
    c.hdg = mehdg_operation_counts(d, n_bar * m_bar, 1, p);
    c.hdg_step4_tabulated = ipow(m_bar, d) * ipow(n_bar, d) * ipow(p + d, 2 * d - 2);
    return c;
}

MemoryEstimate memory_estimate(const CostInputs& in)
{
    const CostReport r = dependent_quantities(in);
    MemoryEstimate mem;
    const double Q = static_cast<double>(r.Q), Qf = static_cast<double>(r.Q_dm1);
    mem.A_block = r.sparsity * Q * Q * 8.0;
    mem.BC_block = r.sparsity * (in.d + 1) * Qf * Q * 8.0;
    mem.D_block = r.sparsity_dm1 * Qf * Qf * 8.0;
    mem.total = static_cast<double>(r.N) * (mem.A_block + 2.0 * mem.BC_block) +
                static_cast<double>(r.D_faces) * mem.D_block;
    return mem;
}

CostReport cost_report(const CostInputs& in)
{
    CostReport r = dependent_quantities(in);
    r.ops = mehdg_operation_counts(in.d, in.n, in.m, in.p);
    r.memory = memory_estimate(in);
    return r;
}

std::vector<CostReport> cost_sweep(int d, int nm_product, int p, Arithmetic arithmetic)
{
    if (nm_product < 1)
        throw InvalidArgument("n*m must be at least 1");
    std::vector<CostReport> rows;
    for (int m = 1; m <= nm_product; m *= 2)
        if (nm_product % m == 0)
            rows.push_back(cost_report({d, nm_product / m, m, p, arithmetic}));
    return rows;
}

void write_cost_csv(const std::vector<CostReport>& rows, std::ostream& os)
{
    os << "d,n,m,p,N,Q,D,sparsity,init,step1,step2,step3,step4,mem_A,mem_BC,mem_D,mem_total\n";
    for (const auto& r : rows) {
        os << r.inputs.d << ',' << r.inputs.n << ',' << r.inputs.m << ',' << r.inputs.p << ',' << r.N << ',' << r.Q
           << ',' << r.D_faces << ',' << fmt17(r.sparsity);
        for (double v : r.ops)
            os << ',' << fmt17(v);
        os << ',' << fmt17(r.memory.A_block) << ',' << fmt17(r.memory.BC_block) << ',' << fmt17(r.memory.D_block)
           << ',' << fmt17(r.memory.total) << '\n';
    }
}

} // namespace mehdg
