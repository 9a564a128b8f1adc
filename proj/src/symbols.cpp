#include "sidewise/symbols.hpp"

#include <cmath>

namespace sidewise {

double principal_symbol(const PhasePoint& p, const MetricField& metric) {
    return p.tau * p.tau - metric.at(p.x).quad(p.xi);
}

HamiltonianField hamiltonian_field(const PhasePoint& p, const MetricField& metric) {
    HamiltonianField f;
    f.dt = 2.0 * p.tau;
    f.dx = -2.0 * metric.at(p.x).apply(p.xi);
    f.dtau = 0.0;
    auto g = metric.grad(p.x);
    f.dxi = {p.xi.dot(g[0].apply(p.xi)), p.xi.dot(g[1].apply(p.xi))};
    return f;
}

double boundary_r0(const BoundaryCovector& b, const Domain& domain, const MetricField& metric) {
    double h0 = tangential_cometric(domain, b.curve, b.s, 0.0, metric);
    return b.tau * b.tau - h0 * b.xi_t * b.xi_t;
}

double boundary_dn_r(const BoundaryCovector& b, const Domain& domain, const MetricField& metric) {
    double dh = tangential_cometric_normal_derivative(domain, b.curve, b.s, metric);
    return -b.xi_t * b.xi_t * dh;
}

Classification classify(const BoundaryCovector& b, const Domain& domain,
                        const MetricField& metric, double tol) {
    Classification c;
    double n2 = b.tau * b.tau + b.xi_t * b.xi_t;
    c.r0 = boundary_r0(b, domain, metric) / n2;
    if (c.r0 < -tol) {
        c.cls = PointClass::Elliptic;
        c.margin = c.r0;
    } else if (c.r0 > tol) {
        c.cls = PointClass::Hyperbolic;
        c.margin = c.r0;
    } else {
        c.cls = PointClass::Glancing;
        c.dn_r = boundary_dn_r(b, domain, metric) / n2;
        c.margin = c.dn_r;
        if (c.dn_r > tol)
            c.kind = GlancingKind::Diffractive;
        else if (c.dn_r < -tol)
            c.kind = GlancingKind::StrictlyGliding;
        else
            c.kind = GlancingKind::Degenerate;
    }
    return c;
}

int fiber_count(const BoundaryCovector& b, const Domain& domain, const MetricField& metric,
                double tol) {
    double n2 = b.tau * b.tau + b.xi_t * b.xi_t;
    double r0 = boundary_r0(b, domain, metric) / n2;
    if (r0 < -tol) return 0;
    if (r0 > tol) return 2;
    return 1;
}

Vec2 covector_from_collar(const BoundaryChart& chart, double xi_t, double xi_n) {
    // Solve [tangent conormal]^T xi = (xi_t, xi_n).
    const Vec2& a = chart.tangent;
    const Vec2& b = chart.conormal;
    double det = a.x * b.y - a.y * b.x;
    return {(xi_t * b.y - xi_n * a.y) / det, (xi_n * a.x - xi_t * b.x) / det};
}

PhasePoint hyperbolic_lift(const BoundaryCovector& b, int sign, const Domain& domain,
                           const MetricField& metric, double tol) {
    double n2 = b.tau * b.tau + b.xi_t * b.xi_t;
    double r0 = boundary_r0(b, domain, metric);
    if (r0 / n2 <= tol)
        throw Error(Errc::NotHyperbolic, "boundary covector has no real normal lift");
    BoundaryChart chart = boundary_chart(domain, b.curve, b.s, metric);
    double xi_n = (sign >= 0 ? 1.0 : -1.0) * std::sqrt(r0);
    PhasePoint p;
    p.t = b.t;
    p.x = chart.x;
    p.tau = b.tau;
    p.xi = covector_from_collar(chart, b.xi_t, xi_n);
    return p;
}

PhasePoint tangential_lift(const BoundaryCovector& b, const Domain& domain,
                           const MetricField& metric) {
    BoundaryChart chart = boundary_chart(domain, b.curve, b.s, metric);
    PhasePoint p;
    p.t = b.t;
    p.x = chart.x;
    p.tau = b.tau;
    p.xi = covector_from_collar(chart, b.xi_t, 0.0);
    return p;
}

BoundaryDecomposition decompose_at_boundary(const PhasePoint& p, int curve_index, double s,
                                            const Domain& domain, const MetricField& metric) {
    BoundaryDecomposition d;
    d.chart = boundary_chart(domain, curve_index, s, metric);
    d.covector.curve = curve_index;
    d.covector.s = d.chart.s;
    d.covector.t = p.t;
    d.covector.tau = p.tau;
    d.covector.xi_t = p.xi.dot(d.chart.tangent);
    d.xi_n = p.xi.dot(d.chart.conormal);
    return d;
}

}  // namespace sidewise
