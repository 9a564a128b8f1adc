#ifndef SIDEWISE_SYMBOLS_HPP
#define SIDEWISE_SYMBOLS_HPP

#include "sidewise/geometry.hpp"

namespace sidewise {

// Interior cotangent point. All flow decisions are homogeneous of degree zero
// in (tau, xi); the flow keeps |(tau, xi)| = 1.
struct PhasePoint {
    double t = 0.0;
    Vec2 x;
    double tau = 1.0;
    Vec2 xi;
};

// Boundary cotangent point in collar coordinates: arc length s along the
// curve, tangential covector component xi_t.
struct BoundaryCovector {
    int curve = 0;
    double s = 0.0;
    double t = 0.0;
    double tau = 1.0;
    double xi_t = 0.0;
};

enum class PointClass { Elliptic, Hyperbolic, Glancing };
enum class GlancingKind { None, Diffractive, StrictlyGliding, Degenerate };

struct Classification {
    PointClass cls = PointClass::Elliptic;
    GlancingKind kind = GlancingKind::None;
    double r0 = 0.0;    // boundary symbol, normalized by |(tau, xi')|^2
    double dn_r = 0.0;  // collar derivative of the symbol, same normalization
                        // (populated for glancing points)
    double margin = 0.0;  // r0 away from the glancing band, dn_r inside it

    bool is(PointClass c) const { return cls == c; }
    bool is(GlancingKind k) const { return cls == PointClass::Glancing && kind == k; }
};

// tau^2 - xi^T A(x) xi
double principal_symbol(const PhasePoint& p, const MetricField& metric);

// Raw Hamiltonian field in flow parametrization:
// (dt, dx, dtau, dxi) = (2 tau, -2 A xi, 0, (xi^T dA/dx1 xi, xi^T dA/dx2 xi)).
struct HamiltonianField {
    double dt = 0.0;
    Vec2 dx;
    double dtau = 0.0;
    Vec2 dxi;
};
HamiltonianField hamiltonian_field(const PhasePoint& p, const MetricField& metric);

// tau^2 - h0(s) xi_t^2, h0 the tangential cometric factor on the boundary.
double boundary_r0(const BoundaryCovector& b, const Domain& domain, const MetricField& metric);

// Collar derivative of the boundary symbol at the tangential lift,
// -xi_t^2 * dh/dnu(0). Unnormalized (scales with xi_t^2).
double boundary_dn_r(const BoundaryCovector& b, const Domain& domain, const MetricField& metric);

Classification classify(const BoundaryCovector& b, const Domain& domain,
                        const MetricField& metric, double tol = 1e-7);

// Number of characteristic normal lifts over the boundary point: 0, 1 or 2.
int fiber_count(const BoundaryCovector& b, const Domain& domain, const MetricField& metric,
                double tol = 1e-7);

// Interior covector over x(s) with tangential part xi_t and normal part
// sign * sqrt(r0) along the collar conormal. Throws NOT_HYPERBOLIC when the
// point is not hyperbolic at tolerance tol.
PhasePoint hyperbolic_lift(const BoundaryCovector& b, int sign, const Domain& domain,
                           const MetricField& metric, double tol = 1e-7);

// Tangential lift (xi_n = 0); the continuation covector at glancing points.
PhasePoint tangential_lift(const BoundaryCovector& b, const Domain& domain,
                           const MetricField& metric);

// Decomposition of an interior covector at a boundary point into collar
// components (tangential xi_t, normal xi_n).
struct BoundaryDecomposition {
    BoundaryCovector covector;
    double xi_n = 0.0;
    BoundaryChart chart;
};
BoundaryDecomposition decompose_at_boundary(const PhasePoint& p, int curve_index, double s,
                                            const Domain& domain, const MetricField& metric);

// Cartesian covector with prescribed collar components at chart.
Vec2 covector_from_collar(const BoundaryChart& chart, double xi_t, double xi_n);

}  // namespace sidewise

#endif
