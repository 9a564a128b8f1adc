#include "sidewise/rayflow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sidewise {

namespace {

// ---------------------------------------------------------------------------
// Interior flow: Dormand-Prince 5(4) on (x, xi) with unit-rate physical time.
// dx/dt = -A(x) xi / tau,  dxi/dt = (xi^T dA_k xi) / (2 tau),  dtau/dt = 0.
// ---------------------------------------------------------------------------

struct FlowDeriv {
    Vec2 dx, dxi;
};

FlowDeriv flow_field(const MetricField& m, const PhasePoint& p) {
    FlowDeriv f;
    f.dx = metric_velocity(m, p);
    auto g = m.grad(p.x);
    f.dxi = Vec2{p.xi.dot(g[0].apply(p.xi)), p.xi.dot(g[1].apply(p.xi))} / (2.0 * p.tau);
    return f;
}

PhasePoint axpy(const PhasePoint& p, double h, const Vec2& kx, const Vec2& kxi) {
    PhasePoint q = p;
    q.t += h;
    q.x = p.x + kx * h;
    q.xi = p.xi + kxi * h;
    return q;
}

struct RkStep {
    PhasePoint y;   // end state (5th order)
    double err = 0; // scaled error estimate
};

RkStep dp5_step(const MetricField& m, const PhasePoint& p, const FlowDeriv& f1, double h,
                double tol) {
    // Dormand-Prince coefficients
    const FlowDeriv k1 = f1;
    PhasePoint p2 = p;
    p2.t = p.t + h / 5.0;
    p2.x = p.x + (h / 5.0) * k1.dx;
    p2.xi = p.xi + (h / 5.0) * k1.dxi;
    const FlowDeriv k2 = flow_field(m, p2);

    PhasePoint p3 = p;
    p3.t = p.t + 3.0 / 10.0 * h;
    p3.x = p.x + h * (3.0 / 40.0 * k1.dx + 9.0 / 40.0 * k2.dx);
    p3.xi = p.xi + h * (3.0 / 40.0 * k1.dxi + 9.0 / 40.0 * k2.dxi);
    const FlowDeriv k3 = flow_field(m, p3);

    PhasePoint p4 = p;
    p4.t = p.t + 4.0 / 5.0 * h;
    p4.x = p.x + h * (44.0 / 45.0 * k1.dx - 56.0 / 15.0 * k2.dx + 32.0 / 9.0 * k3.dx);
    p4.xi = p.xi + h * (44.0 / 45.0 * k1.dxi - 56.0 / 15.0 * k2.dxi + 32.0 / 9.0 * k3.dxi);
    const FlowDeriv k4 = flow_field(m, p4);

    PhasePoint p5 = p;
    p5.t = p.t + 8.0 / 9.0 * h;
    p5.x = p.x + h * (19372.0 / 6561.0 * k1.dx - 25360.0 / 2187.0 * k2.dx +
                      64448.0 / 6561.0 * k3.dx - 212.0 / 729.0 * k4.dx);
    p5.xi = p.xi + h * (19372.0 / 6561.0 * k1.dxi - 25360.0 / 2187.0 * k2.dxi +
                        64448.0 / 6561.0 * k3.dxi - 212.0 / 729.0 * k4.dxi);
    const FlowDeriv k5 = flow_field(m, p5);

    PhasePoint p6 = p;
    p6.t = p.t + h;
    p6.x = p.x + h * (9017.0 / 3168.0 * k1.dx - 355.0 / 33.0 * k2.dx + 46732.0 / 5247.0 * k3.dx +
                      49.0 / 176.0 * k4.dx - 5103.0 / 18656.0 * k5.dx);
    p6.xi = p.xi + h * (9017.0 / 3168.0 * k1.dxi - 355.0 / 33.0 * k2.dxi +
                        46732.0 / 5247.0 * k3.dxi + 49.0 / 176.0 * k4.dxi -
                        5103.0 / 18656.0 * k5.dxi);
    const FlowDeriv k6 = flow_field(m, p6);

    PhasePoint y = p;
    y.t = p.t + h;
    y.x = p.x + h * (35.0 / 384.0 * k1.dx + 500.0 / 1113.0 * k3.dx + 125.0 / 192.0 * k4.dx -
                     2187.0 / 6784.0 * k5.dx + 11.0 / 84.0 * k6.dx);
    y.xi = p.xi + h * (35.0 / 384.0 * k1.dxi + 500.0 / 1113.0 * k3.dxi + 125.0 / 192.0 * k4.dxi -
                       2187.0 / 6784.0 * k5.dxi + 11.0 / 84.0 * k6.dxi);
    const FlowDeriv k7 = flow_field(m, y);

    Vec2 ex = h * (71.0 / 57600.0 * k1.dx - 71.0 / 16695.0 * k3.dx + 71.0 / 1920.0 * k4.dx -
                   17253.0 / 339200.0 * k5.dx + 22.0 / 525.0 * k6.dx - 1.0 / 40.0 * k7.dx);
    Vec2 exi = h * (71.0 / 57600.0 * k1.dxi - 71.0 / 16695.0 * k3.dxi + 71.0 / 1920.0 * k4.dxi -
                    17253.0 / 339200.0 * k5.dxi + 22.0 / 525.0 * k6.dxi - 1.0 / 40.0 * k7.dxi);

    RkStep out;
    out.y = y;
    double sc = tol;
    double e2 = (ex.norm2() + exi.norm2()) / (sc * sc);
    out.err = std::sqrt(e2 / 4.0);
    return out;
}

// Rescale xi so tau^2 = xi^T A xi exactly, then bring |(tau, xi)| back to 1.
// Returns the magnitude of the characteristic projection.
double project_and_normalize(const MetricField& m, PhasePoint& p) {
    double q = m.at(p.x).quad(p.xi);
    double shift = 0.0;
    if (q > 0) {
        double beta = std::abs(p.tau) / std::sqrt(q);
        shift = std::abs(1.0 - beta) * p.xi.norm();
        p.xi *= beta;
    }
    double nu = std::sqrt(p.tau * p.tau + p.xi.norm2());
    p.tau /= nu;
    p.xi = p.xi / nu;
    return shift;
}

struct Stepper {
    const MetricField& metric;
    const ToleranceSet& tol;
    PhasePoint state;
    double h = 1e-3;
    double max_shift = 0.0;
    double max_residual = 0.0;

    void check_state() const {
        if (std::abs(state.tau) < 1e-6)
            throw Error(Errc::TauDegenerate, "cannot time-parametrize: |tau| < 1e-6");
        if (!std::isfinite(state.x.x) || !std::isfinite(state.xi.x) ||
            !std::isfinite(state.x.y) || !std::isfinite(state.xi.y))
            throw Error(Errc::NanDetected, "non-finite ray state");
    }

    // One accepted step, not exceeding t_limit. Returns the start state of the
    // step (for dense output).
    PhasePoint advance(double t_limit) {
        check_state();
        PhasePoint start = state;
        FlowDeriv f1 = flow_field(metric, state);
        for (int attempts = 0; attempts < 200; ++attempts) {
            double hh = std::min({h, tol.dt_max, t_limit - state.t});
            if (hh <= 0) return start;
            RkStep st = dp5_step(metric, state, f1, hh, tol.ode);
            if (st.err <= 1.0 || hh <= tol.dt_min) {
                state = st.y;
                double shift = project_and_normalize(metric, state);
                max_shift = std::max(max_shift, shift);
                max_residual = std::max(max_residual,
                                        std::abs(principal_symbol(state, metric)));
                double fac = st.err > 1e-12 ? 0.9 * std::pow(st.err, -0.2) : 5.0;
                h = hh * std::clamp(fac, 0.2, 5.0);
                return start;
            }
            double fac = 0.9 * std::pow(st.err, -0.2);
            h = hh * std::clamp(fac, 0.05, 0.9);
            if (h < tol.dt_min)
                throw Error(Errc::StiffFailure, "step size collapsed below dt_min");
        }
        throw Error(Errc::StiffFailure, "no acceptable step after 200 attempts");
    }

    // Advance exactly to t_target (several accepted steps, the last one clipped).
    void advance_to(double t_target) {
        int guard = 0;
        while (state.t < t_target - 1e-15 && ++guard < 100000) advance(t_target);
    }
};

// Cubic Hermite position interpolation over one accepted step.
struct HermiteSeg {
    double t0, t1;
    Vec2 x0, x1, v0, v1;

    Vec2 eval(double t) const {
        double dt = t1 - t0;
        double u = (t - t0) / dt;
        double u2 = u * u, u3 = u2 * u;
        double h00 = 2 * u3 - 3 * u2 + 1;
        double h10 = u3 - 2 * u2 + u;
        double h01 = -2 * u3 + 3 * u2;
        double h11 = u3 - u2;
        return x0 * h00 + v0 * (h10 * dt) + x1 * h01 + v1 * (h11 * dt);
    }
};

// Golden-section/parabolic minimizer for smooth 1d functions.
template <typename F>
std::pair<double, double> brent_min(F&& f, double a, double b, double tol_t) {
    const double gr = 0.3819660112501051;
    double x = a + gr * (b - a), w = x, v = x;
    double fx = f(x), fw = fx, fv = fx;
    double d = 0, e = 0;
    for (int iter = 0; iter < 120; ++iter) {
        double mid = 0.5 * (a + b);
        double tol1 = tol_t * std::abs(x) + 1e-16;
        if (std::abs(x - mid) <= 2 * tol1 - 0.5 * (b - a)) break;
        bool parab = false;
        if (std::abs(e) > tol1) {
            double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2 * (q - r);
            if (q > 0) p = -p;
            q = std::abs(q);
            double etemp = e;
            e = d;
            if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
                parab = true;
                d = p / q;
                double u = x + d;
                if (u - a < 2 * tol1 || b - u < 2 * tol1) d = (mid > x ? tol1 : -tol1);
            }
        }
        if (!parab) {
            e = (x < mid ? b - x : a - x);
            d = gr * e;
        }
        double u = (std::abs(d) >= tol1 ? x + d : x + (d > 0 ? tol1 : -tol1));
        double fu = f(u);
        if (fu <= fx) {
            if (u < x) b = x; else a = x;
            v = w; fv = fw; w = x; fw = fx; x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) { v = w; fv = fw; w = u; fw = fu; }
            else if (fu <= fv || v == x || v == w) { v = u; fv = fu; }
        }
    }
    return {x, fx};
}

template <typename F>
double brent_root(F&& f, double a, double b, double fa, double fb, double tol_t) {
    if (fa == 0) return a;
    if (fb == 0) return b;
    double c = a, fc = fa, d = b - a, e = d;
    for (int iter = 0; iter < 200; ++iter) {
        if ((fb > 0) == (fc > 0)) { c = a; fc = fa; d = b - a; e = d; }
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        double tol1 = 2e-16 * std::abs(b) + 0.5 * tol_t;
        double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            double s = fb / fa, p, q;
            if (a == c) {
                p = 2 * xm * s;
                q = 1 - s;
            } else {
                double qq = fa / fc, r = fb / fc;
                p = s * (2 * xm * qq * (qq - r) - (b - a) * (r - 1));
                q = (qq - 1) * (r - 1) * (s - 1);
            }
            if (p > 0) q = -q;
            p = std::abs(p);
            if (2 * p < std::min(3 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d; d = p / q;
            } else { d = xm; e = d; }
        } else { d = xm; e = d; }
        a = b; fa = fb;
        b += (std::abs(d) > tol1 ? d : (xm > 0 ? tol1 : -tol1));
        fb = f(b);
    }
    return b;
}

// Candidate boundary interaction inside one interval.
struct IntervalHit {
    double t = 0.0;
    bool tangential = false;
};

// Scan x(t) over [ta, tb] for the first boundary interaction. `pos` evaluates
// the position; sd values at the ends are supplied.
template <typename PosFn>
std::optional<IntervalHit> scan_interval(PosFn&& pos, const Domain& dom, double ta, double tb,
                                         double v_max, const ToleranceSet& tol) {
    auto sd = [&](double t) { return dom.signed_distance(pos(t)); };
    int n = std::max(4, int(std::ceil((tb - ta) / 0.005)));
    n = std::min(n, 256);
    std::vector<double> ts(n + 1), ds(n + 1);
    for (int i = 0; i <= n; ++i) {
        ts[i] = ta + (tb - ta) * i / n;
        ds[i] = sd(ts[i]);
    }
    double sub = (tb - ta) / n;
    double dip_guard = v_max * sub + 10.0 * tol.tangency;
    for (int i = 0; i < n; ++i) {
        if (ds[i + 1] <= 0.0) {
            // crossing in (ts[i], ts[i+1]]
            double root = brent_root(sd, ts[i], ts[i + 1], ds[i], ds[i + 1], 1e-14);
            return IntervalHit{root, false};
        }
        // interior local minimum that may dip into the tangency band
        bool is_min = (i > 0) && ds[i] <= ds[i - 1] && ds[i] <= ds[i + 1];
        if (is_min && ds[i] <= dip_guard) {
            auto [tmin, dmin] = brent_min(sd, ts[i - 1], ts[i + 1], 1e-13);
            if (dmin <= 0.0) {
                double root = brent_root(sd, ts[i - 1], tmin, ds[i - 1], dmin, 1e-14);
                return IntervalHit{root, false};
            }
            if (dmin <= tol.tangency) return IntervalHit{tmin, true};
        }
    }
    return std::nullopt;
}

}  // namespace

Vec2 metric_velocity(const MetricField& m, const PhasePoint& p) {
    return (-1.0 / p.tau) * m.at(p.x).apply(p.xi);
}

const char* ray_event_name(RayEventKind k) {
    switch (k) {
        case RayEventKind::HyperbolicReflection: return "hyperbolic_reflection";
        case RayEventKind::DiffractiveTouch: return "diffractive_touch";
        case RayEventKind::GlidingEntry: return "gliding_entry";
        case RayEventKind::GlidingExit: return "gliding_exit";
        case RayEventKind::RegionHit: return "region_hit";
        case RayEventKind::TimeExpired: return "time_expired";
    }
    return "unknown";
}

std::vector<RaySample> RayPath::flatten() const {
    std::vector<RaySample> out;
    for (const auto& a : arcs) out.insert(out.end(), a.samples.begin(), a.samples.end());
    return out;
}

InteriorResult integrate_interior(const PhasePoint& start, const MetricField& metric,
                                  double t_span, const ToleranceSet& tol) {
    InteriorResult res;
    Stepper st{metric, tol};
    st.state = start;
    project_and_normalize(metric, st.state);
    res.samples.push_back({st.state.t, st.state.x, st.state.tau, st.state.xi,
                           RayRegime::Interior});
    double t_end = start.t + t_span;
    int guard = 0;
    while (st.state.t < t_end - 1e-15 && ++guard < 2000000) {
        st.advance(t_end);
        res.samples.push_back({st.state.t, st.state.x, st.state.tau, st.state.xi,
                               RayRegime::Interior});
    }
    res.state = st.state;
    res.max_symbol_residual = st.max_residual;
    res.max_projection_shift = st.max_shift;
    return res;
}

std::optional<BoundaryEventHit> detect_boundary_event(std::span<const RaySample> arc,
                                                      const Domain& domain,
                                                      const MetricField& metric,
                                                      const ToleranceSet& tol) {
    if (arc.size() < 2) return std::nullopt;
    double v_max = std::sqrt(std::max(metric.lambda_max(), 1.0));
    for (size_t i = 0; i + 1 < arc.size(); ++i) {
        PhasePoint a{arc[i].t, arc[i].x, arc[i].tau, arc[i].xi};
        PhasePoint b{arc[i + 1].t, arc[i + 1].x, arc[i + 1].tau, arc[i + 1].xi};
        HermiteSeg seg{a.t, b.t, a.x, b.x, metric_velocity(metric, a), metric_velocity(metric, b)};
        auto hit = scan_interval([&](double t) { return seg.eval(t); }, domain, a.t, b.t, v_max,
                                 tol);
        if (!hit) continue;
        // interpolate the full state at the hit time
        double u = (hit->t - a.t) / (b.t - a.t);
        PhasePoint s;
        s.t = hit->t;
        s.x = seg.eval(hit->t);
        s.tau = a.tau + (b.tau - a.tau) * u;
        s.xi = a.xi + (b.xi - a.xi) * u;
        Projection pr = domain.project(s.x);
        auto d = decompose_at_boundary(s, pr.curve_index, pr.s, domain, metric);
        BoundaryEventHit out;
        out.t = hit->t;
        out.covector = d.covector;
        out.xi_n = d.xi_n;
        out.tangential = hit->tangential;
        out.state = s;
        return out;
    }
    return std::nullopt;
}

PhasePoint reflect_hyperbolic(const BoundaryCovector& b, double incoming_xi_n,
                              const Domain& domain, const MetricField& metric,
                              const ToleranceSet& tol) {
    int sign = incoming_xi_n >= 0 ? -1 : +1;
    PhasePoint p = hyperbolic_lift(b, sign, domain, metric, tol.glancing);
    return p;
}

GlidingResult gliding_step(const GlidingState& start, const Domain& domain,
                           const MetricField& metric, double dt_max, const ToleranceSet& tol) {
    GlidingResult res;
    res.state = start;
    const Curve& curve = domain.curve(start.curve);
    const double L = curve.length();

    auto h0 = [&](double s) { return tangential_cometric(domain, start.curve, s, 0.0, metric); };
    // normalized collar derivative of the symbol at the gliding covector
    auto dnr_hat = [&](double s) {
        double hh = h0(s);
        double xit = -res.state.direction * res.state.tau / std::sqrt(hh);
        double dh = tangential_cometric_normal_derivative(domain, start.curve, s, metric);
        double n2 = res.state.tau * res.state.tau + xit * xit;
        return -xit * xit * dh / n2;
    };
    auto speed = [&](double s) { return double(res.state.direction) * std::sqrt(h0(s)); };
    auto record = [&](double t, double s) {
        BoundaryChart ch = boundary_chart(domain, start.curve, s, metric);
        double xit = -res.state.direction * res.state.tau / std::sqrt(h0(s));
        Vec2 xi = covector_from_collar(ch, xit, 0.0);
        double nn = std::sqrt(res.state.tau * res.state.tau + xi.norm2());
        res.samples.push_back({t, ch.x, res.state.tau / nn, xi / nn, RayRegime::Gliding});
        res.s_values.push_back(s);
    };

    double hh0 = h0(start.s);
    if (!(hh0 > 1e-12) || !std::isfinite(hh0))
        throw Error(Errc::DenominatorDegenerate, "collar metric degenerate while gliding");

    double t = start.t, s = start.s;
    record(t, s);
    const double t_end = start.t + dt_max;
    const double sub = 0.01 * std::min(1.0, curve.min_curvature_radius());
    int guard = 0;
    while (t < t_end - 1e-15 && ++guard < 2000000) {
        double dnr_before = dnr_hat(s);
        if (dnr_before > -tol.glancing) {
            // boundary no longer strictly gliding here: exit immediately
            res.exited = true;
            break;
        }
        double step = std::min(sub, t_end - t);
        // classical RK4 on ds/dt = dir * sqrt(h0(s))
        double k1 = speed(s);
        double k2 = speed(curve.wrap(s + 0.5 * step * k1));
        double k3 = speed(curve.wrap(s + 0.5 * step * k2));
        double k4 = speed(curve.wrap(s + step * k3));
        double s_next = curve.wrap(s + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4));
        double dnr_after = dnr_hat(s_next);
        if (dnr_after > -tol.glancing) {
            // bisect the crossing of the gliding condition within this substep
            double lo = 0.0, hi = step;
            for (int it = 0; it < 60; ++it) {
                double mid = 0.5 * (lo + hi);
                double sm = curve.wrap(s + mid * speed(s));  // short step: first order is enough
                if (dnr_hat(sm) > -tol.glancing) hi = mid; else lo = mid;
            }
            s = curve.wrap(s + hi * speed(s));
            t += hi;
            record(t, s);
            res.exited = true;
            break;
        }
        s = s_next;
        t += step;
        record(t, s);
    }
    (void)L;
    res.state.s = s;
    res.state.t = t;
    return res;
}

// ---------------------------------------------------------------------------
// trace
// ---------------------------------------------------------------------------

namespace {

struct Tracer {
    const Domain& dom;
    const MetricField& metric;
    const ToleranceSet& tol;
    const std::vector<BoundaryRegion>& watch;
    std::vector<int> watch_curves;
    double t_max;
    double v_max;
    RayPath path;

    Tracer(const Domain& d, const MetricField& m, const ToleranceSet& tl,
           const std::vector<BoundaryRegion>& w, double tm)
        : dom(d), metric(m), tol(tl), watch(w), t_max(tm) {
        v_max = std::sqrt(std::max(m.lambda_max(), 1.0));
        for (const auto& r : watch) watch_curves.push_back(dom.curve_index(r.curve));
    }

    void emit_region_hits(const BoundaryCovector& bc, const Classification& cls, bool flagged) {
        for (size_t i = 0; i < watch.size(); ++i) {
            if (watch_curves[i] != bc.curve) continue;
            if (!watch[i].contains(bc.s, dom.curve(bc.curve).length(), 1e-9)) continue;
            RayEvent ev;
            ev.kind = RayEventKind::RegionHit;
            ev.t = bc.t;
            ev.where = bc;
            ev.cls = cls;
            ev.region = watch[i].label;
            ev.region_index = int(i);
            ev.flagged = flagged;
            path.events.push_back(ev);
        }
    }

    void push_event(RayEventKind kind, double t, const BoundaryCovector& bc,
                    const Classification& cls, bool flagged = false) {
        RayEvent ev;
        ev.kind = kind;
        ev.t = t;
        ev.where = bc;
        ev.cls = cls;
        ev.flagged = flagged;
        path.events.push_back(ev);
    }

    // Interior propagation until the next boundary interaction or t_max.
    // Returns the located hit, or nullopt when time expired.
    std::optional<BoundaryEventHit> run_interior_arc(PhasePoint start, bool start_on_boundary) {
        Stepper st{metric, tol};
        st.state = start;
        project_and_normalize(metric, st.state);
        RayArc arc;
        arc.regime = RayRegime::Interior;
        arc.samples.push_back({st.state.t, st.state.x, st.state.tau, st.state.xi,
                               RayRegime::Interior});

        const double depart_dist = std::max(2.0 * tol.tangency, 20.0 * tol.boundary);
        bool armed = !start_on_boundary;
        double arc_t0 = start.t;

        std::optional<BoundaryEventHit> found;
        int guard = 0;
        while (st.state.t < t_max - 1e-15 && ++guard < 2000000) {
            PhasePoint y0 = st.advance(t_max);
            PhasePoint y1 = st.state;
            arc.samples.push_back({y1.t, y1.x, y1.tau, y1.xi, RayRegime::Interior});
            HermiteSeg seg{y0.t, y1.t, y0.x, y1.x, metric_velocity(metric, y0),
                           metric_velocity(metric, y1)};

            if (!armed) {
                double d_end = dom.signed_distance(y1.x);
                if (d_end < -10.0 * tol.boundary) {
                    throw Error(Errc::MissedEvent,
                                "ray failed to depart from the boundary (left the domain)");
                }
                if (d_end >= depart_dist && y1.t - arc_t0 >= tol.min_dwell) armed = true;
                continue;
            }

            double scan_from = y0.t;
            while (scan_from < y1.t - 1e-15 && !found) {
                auto hit = scan_interval([&](double t) { return seg.eval(t); }, dom, scan_from,
                                         y1.t, v_max, tol);
                if (!hit) break;

                // Polish by re-integration: land exactly on the hit time, then
                // a few Newton corrections on the true signed distance.
                double t_star = hit->t;
                PhasePoint ys;
                for (int it = 0; it < 6; ++it) {
                    Stepper fine{metric, tol};
                    fine.state = y0;
                    fine.advance_to(t_star);
                    ys = fine.state;
                    double d = dom.signed_distance(ys.x);
                    if (hit->tangential) break;
                    if (std::abs(d) <= tol.boundary) break;
                    Projection pr = dom.project(ys.x);
                    BoundaryChart ch = boundary_chart(dom, pr.curve_index, pr.s, metric);
                    Vec2 n_in = dom.curve(pr.curve_index).domain_left()
                                    ? ch.tangent.perp()
                                    : -1.0 * ch.tangent.perp();
                    double rate = n_in.dot(metric_velocity(metric, ys));
                    if (std::abs(rate) < 1e-12) break;
                    t_star -= d / rate;
                    t_star = std::clamp(t_star, y0.t, y1.t + 10 * tol.min_dwell);
                }
                if (hit->tangential) {
                    // minimize the true distance near the interpolant minimum
                    auto f = [&](double t) {
                        Stepper fine{metric, tol};
                        fine.state = y0;
                        fine.advance_to(t);
                        return dom.signed_distance(fine.state.x);
                    };
                    auto [tm, dm] = brent_min(f, std::max(y0.t, t_star - 1e-3),
                                              std::min(y1.t, t_star + 1e-3), 1e-12);
                    if (dm > tol.tangency) {
                        scan_from = tm + 1e-9;  // a near miss; look further along
                        continue;
                    }
                    t_star = tm;
                    Stepper fine{metric, tol};
                    fine.state = y0;
                    fine.advance_to(t_star);
                    ys = fine.state;
                }
                if (t_star > t_max) break;

                Projection pr = dom.project(ys.x);
                auto dec = decompose_at_boundary(ys, pr.curve_index, pr.s, dom, metric);
                BoundaryEventHit ev;
                ev.t = t_star;
                ev.covector = dec.covector;
                ev.xi_n = dec.xi_n;
                ev.tangential = hit->tangential;
                ev.state = ys;
                if (hit->tangential) {
                    Classification c = classify(ev.covector, dom, metric, tol.glancing);
                    if (c.cls == PointClass::Hyperbolic) {
                        // grazing but still transversal; the crossing (if any)
                        // lies further along this step
                        scan_from = t_star + 1e-9;
                        continue;
                    }
                }
                found = ev;
            }
            if (found) {
                // truncate the arc at the event and close with the exact state
                while (!arc.samples.empty() && arc.samples.back().t > found->t)
                    arc.samples.pop_back();
                arc.samples.push_back({found->t, found->state.x, found->state.tau,
                                       found->state.xi, RayRegime::Interior});
                break;
            }
        path.max_projection_shift = std::max(path.max_projection_shift, st.max_shift);
        path.max_symbol_residual = std::max(path.max_symbol_residual, st.max_residual);
        path.end_time = st.state.t;
        path.arcs.push_back(std::move(arc));
        return found;
    }

    // Gliding propagation; returns the exit covector or nullopt on time expiry.
    std::optional<BoundaryCovector> run_gliding(GlidingState gs) {
        RayArc arc;
        arc.regime = RayRegime::Gliding;
        const Curve& curve = dom.curve(gs.curve);
        double L = curve.length();
        std::vector<bool> inside(watch.size());
        for (size_t i = 0; i < watch.size(); ++i) {
            inside[i] = watch_curves[i] == gs.curve && watch[i].contains(gs.s, L, 1e-9);
            if (inside[i]) {
                Classification c = classify({gs.curve, gs.s, gs.t, gs.tau,
                                             -gs.direction * gs.tau /
                                                 std::sqrt(tangential_cometric(dom, gs.curve, gs.s,
                                                                               0.0, metric))},
                                            dom, metric, tol.glancing);
                emit_region_hits(gs.t, gs.curve, gs.s, c, false);
            }
        }

        bool exited = false;
        BoundaryCovector exit_bc;
        int guard = 0;
        while (gs.t < t_max - 1e-15 && ++guard < 1000000) {
            GlidingResult r = gliding_step(gs, dom, metric, std::min(0.25, t_max - gs.t), tol);
            // watch-region transitions along the swept samples
            for (size_t k = 1; k < r.samples.size(); ++k) {
                Projection pr{gs.curve, 0.0, 0.0};
                double s_here = curve.project(r.samples[k].x);
                for (size_t i = 0; i < watch.size(); ++i) {
                    if (watch_curves[i] != gs.curve) continue;
                    bool now = watch[i].contains(s_here, L, 1e-9);
                    if (now && !inside[i]) {
                        BoundaryCovector bc{gs.curve, s_here, r.samples[k].t, r.samples[k].tau,
                                            r.samples[k].xi.dot(curve.derivative(s_here))};
                        Classification c = classify(bc, dom, metric, tol.glancing);
                        emit_region_hits(r.samples[k].t, gs.curve, s_here, c, false);
                    }
                    inside[i] = now;
                }
                (void)pr;
            }
            arc.samples.insert(arc.samples.end(), r.samples.begin(), r.samples.end());
            gs = r.state;
            if (r.exited) {
                exited = true;
                double hh = tangential_cometric(dom, gs.curve, gs.s, 0.0, metric);
                exit_bc = {gs.curve, gs.s, gs.t, gs.tau, -gs.direction * gs.tau / std::sqrt(hh)};
                break;
            }
        }
        path.end_time = gs.t;
        path.arcs.push_back(std::move(arc));
        if (exited) return exit_bc;
        return std::nullopt;
    }

    void run(const InitialCondition& init) {
        try {
            if (init.kind == InitialCondition::Kind::Interior) {
                PhasePoint p = init.phase;
                project_and_normalize(metric, p);
                double sd = dom.signed_distance(p.x);
                if (sd < -tol.boundary * 10)
                    throw Error(Errc::Config, "interior start lies outside the domain");
                bool on_boundary = sd < std::max(2.0 * tol.tangency, 20.0 * tol.boundary);
                interior_chain(p, on_boundary);
            } else {
                start_from_boundary(init);
            }
            if (!path.failure) {
                RayEvent ev;
                ev.kind = RayEventKind::TimeExpired;
                ev.t = std::min(path.end_time, t_max);
                path.events.push_back(ev);
            }
        } catch (const Error& e) {
            path.failure = RayFailure{e.code(), e.what(), path.end_time};
        } catch (const std::exception& e) {
            path.failure = RayFailure{Errc::Config, e.what(), path.end_time};
        }
    }

    void start_from_boundary(const InitialCondition& init) {
        BoundaryCovector bc = init.bc;
        Classification c = classify(bc, dom, metric, tol.glancing);
        emit_region_hits(bc.t, bc.curve, bc.s, c, false);
        if (c.cls == PointClass::Elliptic)
            throw Error(Errc::Config, "boundary start must be non-elliptic");
        if (c.is(GlancingKind::Degenerate))
            throw Error(Errc::DegenerateGlancing,
                        "degenerate glancing start (higher-order contact)");
        if (c.cls == PointClass::Hyperbolic) {
            PhasePoint p = hyperbolic_lift(bc, init.lift_sign, dom, metric, tol.glancing);
            // Forward continuation through a hyperbolic boundary point is the
            // inward-moving fiber; an exiting lift reflects at t = 0.
            BoundaryChart ch = boundary_chart(dom, bc.curve, bc.s, metric);
            Vec2 n_in = dom.curve(bc.curve).domain_left() ? ch.tangent.perp()
                                                          : -1.0 * ch.tangent.perp();
            if (n_in.dot(metric_velocity(metric, p)) < 0) {
                auto dec = decompose_at_boundary(p, bc.curve, bc.s, dom, metric);
                p = reflect_hyperbolic(dec.covector, dec.xi_n, dom, metric, tol);
                bool flagged = c.r0 <= tol.near_glancing_factor * tol.glancing;
                push_event(RayEventKind::HyperbolicReflection, bc.t, bc.curve == dec.covector.curve
                                                                        ? dec.covector
                                                                        : bc,
                           c, flagged);
            }
            interior_chain(p, true);
        } else if (c.is(GlancingKind::Diffractive)) {
            push_event(RayEventKind::DiffractiveTouch, bc.t, bc, c);
            interior_chain(tangential_lift(bc, dom, metric), true);
        } else {
            push_event(RayEventKind::GlidingEntry, bc.t, bc, c);
            GlidingState gs;
            gs.curve = bc.curve;
            gs.s = bc.s;
            gs.t = bc.t;
            gs.tau = bc.tau;
            gs.direction = (bc.xi_t * bc.tau) > 0 ? -1 : +1;
            gliding_chain(gs);
        }
    }

    void interior_chain(PhasePoint p, bool on_boundary) {
        int guard = 0;
        while (++guard < 100000) {
            auto hit = run_interior_arc(p, on_boundary);
            if (!hit) return;  // time expired
            Classification c = classify(hit->covector, dom, metric, tol.glancing);
            bool flagged = c.cls == PointClass::Hyperbolic &&
                           c.r0 <= tol.near_glancing_factor * tol.glancing;
            emit_region_hits(hit->t, hit->covector.curve, hit->covector.s, c, flagged);
            if (c.cls == PointClass::Hyperbolic) {
                PhasePoint refl = reflect_hyperbolic(hit->covector, hit->xi_n, dom, metric, tol);
                refl.t = hit->t;
                push_event(RayEventKind::HyperbolicReflection, hit->t, hit->covector, c, flagged);
                p = refl;
                on_boundary = true;
            } else if (c.is(GlancingKind::Diffractive)) {
                push_event(RayEventKind::DiffractiveTouch, hit->t, hit->covector, c);
                p = tangential_lift(hit->covector, dom, metric);
                p.t = hit->t;
                on_boundary = true;
            } else if (c.is(GlancingKind::StrictlyGliding)) {
                push_event(RayEventKind::GlidingEntry, hit->t, hit->covector, c);
                GlidingState gs;
                gs.curve = hit->covector.curve;
                gs.s = hit->covector.s;
                gs.t = hit->t;
                gs.tau = hit->covector.tau;
                gs.direction = (hit->covector.xi_t * hit->covector.tau) > 0 ? -1 : +1;
                gliding_chain(gs);
                return;
            } else {
                throw Error(Errc::DegenerateGlancing,
                            "degenerate glancing contact (out of modeled scope)");
            }
            if (p.t >= t_max - 1e-15) return;
        }
        throw Error(Errc::StiffFailure, "event limit exceeded");
    }

    void gliding_chain(GlidingState gs) {
        int guard = 0;
        while (++guard < 100000) {
            auto exit_bc = run_gliding(gs);
            if (!exit_bc) return;  // time expired
            Classification c = classify(*exit_bc, dom, metric, tol.glancing);
            push_event(RayEventKind::GlidingExit, exit_bc->t, *exit_bc, c);
            PhasePoint p = tangential_lift(*exit_bc, dom, metric);
            p.t = exit_bc->t;
            interior_chain(p, true);
            return;
        }
    }
};

}  // namespace

RayPath trace(const InitialCondition& init, const Domain& domain, const MetricField& metric,
              double t_max, const std::vector<BoundaryRegion>& watch, const ToleranceSet& tol) {
    Tracer tr(domain, metric, tol, watch, t_max);
    tr.run(init);
    // events sorted by time (stable within equal stamps)
    std::stable_sort(tr.path.events.begin(), tr.path.events.end(),
                     [](const RayEvent& a, const RayEvent& b) { return a.t < b.t; });
    return std::move(tr.path);
}

std::string ray_path_to_text(const RayPath& path) {
    std::ostringstream os;
    os.precision(12);
    os << "# t x1 x2 tau xi1 xi2 regime\n";
    for (const auto& arc : path.arcs) {
        for (const auto& s : arc.samples) {
            os << s.t << ' ' << s.x.x << ' ' << s.x.y << ' ' << s.tau << ' ' << s.xi.x << ' '
               << s.xi.y << ' ' << (s.regime == RayRegime::Interior ? "interior" : "gliding")
               << '\n';
        }
    }
    os << "# events\n";
    for (const auto& e : path.events) {
        os << "# event " << ray_event_name(e.kind) << " t=" << e.t;
        if (e.kind != RayEventKind::TimeExpired) {
            os << " curve=" << e.where.curve << " s=" << e.where.s;
            if (e.kind == RayEventKind::RegionHit) os << " region=" << e.region_index;
            if (e.flagged) os << " flagged";
        }
        os << '\n';
    }
    if (path.failure) {
        os << "# failure " << errc_name(path.failure->code) << " t=" << path.failure->t << " "
           << path.failure->message << '\n';
    }
    return os.str();
}

}  // namespace sidewise
