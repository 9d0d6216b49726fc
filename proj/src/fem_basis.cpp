#include "mehdg/fem_basis.hpp"

#include "mehdg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

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

// derivative coefficient k x^(k-1), zero for k == 0
double dpow(double x, int k) { return k == 0 ? 0.0 : k * ipow(x, k - 1); }
double ddpow(double x, int k) { return k < 2 ? 0.0 : k * (k - 1) * ipow(x, k - 2); }

double factorial(int d)
{
    double f = 1.0;
    for (int i = 2; i <= d; ++i)
        f *= i;
    return f;
}

} // namespace

Eigen::VectorXd QuadratureRule::barycentric(std::size_t i) const
{
    Eigen::VectorXd b(d + 1);
    b[0] = 1.0 - points[i].sum();
    b.tail(d) = points[i];
    return b;
}

QuadratureRule gauss_legendre(int n)
{
    if (n < 1)
        throw InvalidArgument("Gauss-Legendre rule needs at least one point");
    QuadratureRule rule;
    rule.d = 1;
    rule.exactness = 2 * n - 1;
    for (int i = 0; i < n; ++i) {
        // Newton on P_n starting from the Chebyshev-like guess
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        // recompute derivative at the converged root
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        Eigen::VectorXd pt(1);
        pt[0] = 0.5 * (1.0 - x);
        rule.points.push_back(pt);
        rule.weights.push_back(0.5 * w);
    }
    std::vector<std::size_t> order(rule.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return rule.points[a][0] < rule.points[b][0]; });
    QuadratureRule sorted = rule;
    for (std::size_t i = 0; i < order.size(); ++i) {
        sorted.points[i] = rule.points[order[i]];
        sorted.weights[i] = rule.weights[order[i]];
    }
    return sorted;
}

QuadratureRule quadrature_rule(int d, int degree)
{
    if (d < 1 || d > 3)
        throw InvalidArgument("quadrature is available for d = 1, 2, 3");
    if (degree < 0 || degree > 20)
        throw InvalidArgument("unsupported quadrature degree " + std::to_string(degree));
    QuadratureRule rule;
    rule.d = d;
    rule.exactness = degree;
    if (degree <= 1) {
        rule.points.push_back(Eigen::VectorXd::Constant(d, 1.0 / (d + 1)));
        rule.weights.push_back(1.0 / factorial(d));
        return rule;
    }
    if (d == 1) {
        auto gl = gauss_legendre((degree + 2) / 2);
        gl.exactness = degree;
        return gl;
    }
    if (d == 2) {
        const auto gu = gauss_legendre((degree + 3) / 2);
        const auto gv = gauss_legendre((degree + 2) / 2);
        for (std::size_t a = 0; a < gu.size(); ++a)
            for (std::size_t b = 0; b < gv.size(); ++b) {
                const double u = gu.points[a][0], v = gv.points[b][0];
                rule.points.push_back(Eigen::Vector2d(u, (1.0 - u) * v));
                rule.weights.push_back(gu.weights[a] * gv.weights[b] * (1.0 - u));
            }
        return rule;
    }
    const auto gu = gauss_legendre((degree + 4) / 2);
    const auto gv = gauss_legendre((degree + 3) / 2);
    const auto gw = gauss_legendre((degree + 2) / 2);
    for (std::size_t a = 0; a < gu.size(); ++a)
        for (std::size_t b = 0; b < gv.size(); ++b)
            for (std::size_t c = 0; c < gw.size(); ++c) {
                const double u = gu.points[a][0], v = gv.points[b][0], w = gw.points[c][0];
                rule.points.push_back(Eigen::Vector3d(u, (1.0 - u) * v, (1.0 - u) * (1.0 - v) * w));
                rule.weights.push_back(gu.weights[a] * gv.weights[b] * gw.weights[c] * (1.0 - u) * (1.0 - u) * (1.0 - v));
            }
    return rule;
}

std::vector<std::array<int, 3>> simplex_lattice(int d, int p)
{
    std::vector<std::array<int, 3>> out;
    const int kmax = d >= 3 ? p : 0;
    for (int k = 0; k <= kmax; ++k) {
        const int jmax = d >= 2 ? p - k : 0;
        for (int j = 0; j <= jmax; ++j)
            for (int i = 0; i + j + k <= p; ++i)
                out.push_back({i, j, k});
    }
    return out;
}

LagrangeBasis::LagrangeBasis(int d, int p) : d_(d), p_(p)
{
    if (d < 1 || d > 3)
        throw InvalidArgument("Lagrange basis supports d = 1, 2, 3");
    if (p < 1)
        throw InvalidArgument("polynomial degree must be at least 1");
    exponents_ = simplex_lattice(d, p);
    for (const auto& e : exponents_) {
        Eigen::VectorXd x(d);
        for (int c = 0; c < d; ++c)
            x[c] = static_cast<double>(e[c]) / p;
        nodes_.push_back(x);
    }
    const int n = size();
    Matrix vandermonde(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            double v = 1.0;
            for (int c = 0; c < d; ++c)
                v *= ipow(nodes_[i][c], exponents_[k][c]);
            vandermonde(i, k) = v;
        }
    coefficients_ = vandermonde.fullPivLu().inverse();
}

Vector LagrangeBasis::values(const Eigen::VectorXd& x) const
{
    const int n = size();
    Vector mono(n);
    for (int k = 0; k < n; ++k) {
        double v = 1.0;
        for (int c = 0; c < d_; ++c)
            v *= ipow(x[c], exponents_[k][c]);
        mono[k] = v;
    }
    return coefficients_.transpose() * mono;
}

Matrix LagrangeBasis::gradients(const Eigen::VectorXd& x) const
{
    const int n = size();
    Matrix dmono(n, d_);
    for (int k = 0; k < n; ++k)
        for (int g = 0; g < d_; ++g) {
            double v = 1.0;
            for (int c = 0; c < d_; ++c)
                v *= (c == g) ? dpow(x[c], exponents_[k][c]) : ipow(x[c], exponents_[k][c]);
            dmono(k, g) = v;
        }
    return coefficients_.transpose() * dmono;
}

Matrix LagrangeBasis::hessians(const Eigen::VectorXd& x) const
{
    const int n = size();
    Matrix hmono(n, d_ * d_);
    for (int k = 0; k < n; ++k)
        for (int g = 0; g < d_; ++g)
            for (int h = 0; h < d_; ++h) {
                double v = 1.0;
                for (int c = 0; c < d_; ++c) {
                    const int e = exponents_[k][c];
                    if (g == h && c == g)
                        v *= ddpow(x[c], e);
                    else if (c == g || c == h)
                        v *= dpow(x[c], e);
                    else
                        v *= ipow(x[c], e);
                }
                hmono(k, g * d_ + h) = v;
            }
    return coefficients_.transpose() * hmono;
}

const LagrangeBasis& reference_basis(int d, int p)
{
    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::unique_ptr<LagrangeBasis>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[{d, p}];
    if (!slot)
        slot = std::make_unique<LagrangeBasis>(d, p);
    return *slot;
}

std::int64_t patch_dof_count(int d, int m, int p)
{
    if (d < 1 || d > 3 || m < 1 || p < 1)
        throw InvalidArgument("patch_dof_count needs d in {1,2,3}, m >= 1, p >= 1");
    // binom(mp + d, d) = (mp+1)...(mp+d) / d!
    std::int64_t num = 1, den = 1;
    for (int i = 1; i <= d; ++i) {
        num *= static_cast<std::int64_t>(m) * p + i;
        den *= i;
    }
    return num / den;
}

PatchDofMap build_patch_dof_map(int m, int p)
{
    if (m < 1 || p < 1)
        throw InvalidArgument("patch dof map needs m >= 1 and p >= 1");
    PatchDofMap map;
    map.m = m;
    map.p = p;
    const int n = m * p;
    map.dof_count = (n + 1) * (n + 2) / 2;
    map.node_reference.resize(map.dof_count);
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i + j <= n; ++i)
            map.node_reference[lattice_index(i, j, n)] = Vec2(double(i) / n, double(j) / n);

    const auto local = simplex_lattice(2, p);
    for (const auto& t : red_subdivision(m)) {
        std::vector<int> dofs;
        dofs.reserve(local.size());
        const int e1x = t.v[1][0] - t.v[0][0], e1y = t.v[1][1] - t.v[0][1];
        const int e2x = t.v[2][0] - t.v[0][0], e2y = t.v[2][1] - t.v[0][1];
        for (const auto& a : local) {
            const int i = p * t.v[0][0] + a[0] * e1x + a[1] * e2x;
            const int j = p * t.v[0][1] + a[0] * e1y + a[1] * e2y;
            dofs.push_back(lattice_index(i, j, n));
        }
        map.element_dofs.push_back(std::move(dofs));
    }
    for (int k = 0; k <= n; ++k) {
        map.edge_dofs[0].push_back(lattice_index(k, 0, n));
        map.edge_dofs[1].push_back(lattice_index(n - k, k, n));
        map.edge_dofs[2].push_back(lattice_index(0, n - k, n));
    }
    return map;
}

PatchDofMap build_patch_dof_map(const MacroElement& macro, int p)
{
    PatchDofMap map = build_patch_dof_map(macro.m, p);
    map.macro = macro.id;
    return map;
}

int FaceTraceLayout::segment(double t) const
{
    return std::clamp(static_cast<int>(std::floor(t * sub_faces)), 0, sub_faces - 1);
}

Vector FaceTraceLayout::segment_values(int seg, double t) const
{
    const double r = t * sub_faces - seg;
    Vector v(p + 1);
    for (int a = 0; a <= p; ++a) {
        double l = 1.0;
        for (int b = 0; b <= p; ++b)
            if (b != a)
                l *= (r * p - b) / static_cast<double>(a - b);
        v[a] = l;
    }
    return v;
}

FaceTraceLayout face_trace_map(const MacroMesh& mesh, const SkeletonFace& face, int p)
{
    if (p < 1)
        throw InvalidArgument("trace degree must be at least 1");
    const double tol = 1e-12 * std::max(1.0, face.length());
    for (const auto& s : face.sides) {
        const auto c = mesh.corners(s.macro);
        const Vec2 a = c[s.edge], b = c[(s.edge + 1) % 3];
        if ((face.point(s.t_start) - a).norm() > tol || (face.point(s.t_end) - b).norm() > tol)
            throw InvalidArgument("orientation mismatch between skeleton face " + std::to_string(face.id) +
                                  " and macro-element " + std::to_string(s.macro));
    }
    return FaceTraceLayout{face.sub_faces, p};
}

} // namespace mehdg
