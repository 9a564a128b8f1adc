#include "sidewise/geometry.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace sidewise {

// ---------------------------------------------------------------------------
// MetricField
// ---------------------------------------------------------------------------

MetricField MetricField::identity() {
    return MetricField(
        "identity", [](Vec2) { return Mat2::identity(); },
        [](Vec2) { return std::array<Mat2, 2>{Mat2{0, 0, 0}, Mat2{0, 0, 0}}; });
}

MetricField MetricField::constant(Mat2 a) {
    MetricField m(
        "constant", [a](Vec2) { return a; },
        [](Vec2) { return std::array<Mat2, 2>{Mat2{0, 0, 0}, Mat2{0, 0, 0}}; });
    auto ev = a.eigenvalues();
    m.lambda_min_ = ev[0];
    m.lambda_max_ = ev[1];
    return m;
}

MetricField MetricField::diag_linear(double ax, double by) {
    return MetricField(
        "diag_linear",
        [ax, by](Vec2 p) { return Mat2{1.0 + ax * p.x, 0.0, 1.0 + by * p.y}; },
        [ax, by](Vec2) {
            return std::array<Mat2, 2>{Mat2{ax, 0, 0}, Mat2{0, 0, by}};
        });
}

MetricField MetricField::conformal_gaussian(double amp, Vec2 center, double width) {
    const double w2 = width * width;
    return MetricField(
        "conformal_gaussian",
        [amp, center, w2](Vec2 p) {
            Vec2 d = p - center;
            double c = 1.0 + amp * std::exp(-d.norm2() / w2);
            return Mat2{c, 0.0, c};
        },
        [amp, center, w2](Vec2 p) {
            Vec2 d = p - center;
            double e = amp * std::exp(-d.norm2() / w2);
            double cx = -2.0 * d.x / w2 * e;
            double cy = -2.0 * d.y / w2 * e;
            return std::array<Mat2, 2>{Mat2{cx, 0, cx}, Mat2{cy, 0, cy}};
        });
}

void MetricField::estimate_bounds(const BBox& box, int n) {
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            Vec2 p{box.lo.x + (box.hi.x - box.lo.x) * i / n,
                   box.lo.y + (box.hi.y - box.lo.y) * j / n};
            auto ev = at(p).eigenvalues();
            lo = std::min(lo, ev[0]);
            hi = std::max(hi, ev[1]);
        }
    }
    lambda_min_ = lo;
    lambda_max_ = hi;
}

// ---------------------------------------------------------------------------
// Curve base
// ---------------------------------------------------------------------------

double Curve::project(Vec2 p) const {
    const double L = length();
    const int n = 1024;
    double best_s = 0.0, best_d2 = 1e300;
    for (int i = 0; i < n; ++i) {
        double s = L * i / n;
        double d2 = (position(s) - p).norm2();
        if (d2 < best_d2) {
            best_d2 = d2;
            best_s = s;
        }
    }
    // Newton on phi(s) = (x(s) - p) . x'(s) = 0.
    double s = best_s;
    for (int it = 0; it < 40; ++it) {
        Vec2 d = position(s) - p;
        Vec2 t = derivative(s);
        double phi = d.dot(t);
        double dphi = 1.0 + d.dot(second_derivative(s));
        if (std::abs(dphi) < 1e-14) break;
        double step = phi / dphi;
        // keep the iteration near the sampled candidate
        step = std::clamp(step, -2.0 * L / n, 2.0 * L / n);
        s -= step;
        if (std::abs(step) < 1e-14 * std::max(1.0, L)) break;
    }
    return wrap(s);
}

double Curve::min_curvature_radius() const {
    double cached = min_r_cache_.load();
    if (cached > 0) return cached;
    const int n = 1024;
    double kmax = 0.0;
    for (int i = 0; i < n; ++i) {
        kmax = std::max(kmax, std::abs(signed_curvature(length() * i / n)));
    }
    double r = kmax < 1e-12 ? 1e6 : 1.0 / kmax;
    min_r_cache_.store(r);
    return r;
}

// ---------------------------------------------------------------------------
// CircleCurve
// ---------------------------------------------------------------------------

CircleCurve::CircleCurve(std::string name, Vec2 center, double radius, bool ccw, bool domain_left)
    : Curve(std::move(name), domain_left), center_(center), radius_(radius), dir_(ccw ? 1.0 : -1.0) {}

Vec2 CircleCurve::position(double s) const {
    double a = dir_ * s / radius_;
    return center_ + Vec2{radius_ * std::cos(a), radius_ * std::sin(a)};
}

Vec2 CircleCurve::derivative(double s) const {
    double a = dir_ * s / radius_;
    return {-dir_ * std::sin(a), dir_ * std::cos(a)};
}

Vec2 CircleCurve::second_derivative(double s) const {
    double a = dir_ * s / radius_;
    return {-std::cos(a) / radius_, -std::sin(a) / radius_};
}

double CircleCurve::project(Vec2 p) const {
    Vec2 d = p - center_;
    double a = std::atan2(d.y, d.x);
    return wrap(dir_ * a * radius_);
}

// ---------------------------------------------------------------------------
// ReparamCurve: arc-length reparametrization through a quadrature table
// ---------------------------------------------------------------------------

namespace {

// 4-point Gauss-Legendre on [a, b].
template <typename F>
double gauss4(F&& f, double a, double b) {
    static const double xg[4] = {-0.8611363115940526, -0.3399810435848563,
                                 0.3399810435848563, 0.8611363115940526};
    static const double wg[4] = {0.3478548451374538, 0.6521451548625461,
                                 0.6521451548625461, 0.3478548451374538};
    double c = 0.5 * (a + b), h = 0.5 * (b - a), sum = 0.0;
    for (int i = 0; i < 4; ++i) sum += wg[i] * f(c + h * xg[i]);
    return h * sum;
}

}  // namespace

ReparamCurve::ReparamCurve(std::string name, bool domain_left, PosFn f, DerFn df, Der2Fn ddf,
                           int table_size)
    : Curve(std::move(name), domain_left), f_(std::move(f)), df_(std::move(df)), ddf_(std::move(ddf)) {
    du_ = 2.0 * M_PI / table_size;
    s_table_.resize(table_size + 1);
    s_table_[0] = 0.0;
    auto speed = [this](double u) { return df_(u).norm(); };
    for (int i = 0; i < table_size; ++i) {
        s_table_[i + 1] = s_table_[i] + gauss4(speed, i * du_, (i + 1) * du_);
    }
    total_length_ = s_table_.back();
}

double ReparamCurve::u_of_s(double s) const {
    s = wrap(s);
    auto it = std::upper_bound(s_table_.begin(), s_table_.end(), s);
    int k = std::max<int>(0, int(it - s_table_.begin()) - 1);
    double u = k * du_;
    auto speed = [this](double uu) { return df_(uu).norm(); };
    double acc = s_table_[k];
    // Newton on s(u) with incremental quadrature from the table knot.
    for (int iter = 0; iter < 8; ++iter) {
        double su = acc + gauss4(speed, k * du_, u);
        double v = speed(u);
        double step = (su - s) / std::max(v, 1e-14);
        u -= step;
        if (std::abs(step) < 1e-14) break;
    }
    return u;
}

Vec2 ReparamCurve::position(double s) const { return f_(u_of_s(s)); }

Vec2 ReparamCurve::derivative(double s) const {
    double u = u_of_s(s);
    return df_(u).normalized();
}

Vec2 ReparamCurve::second_derivative(double s) const {
    double u = u_of_s(s);
    Vec2 v = df_(u);
    Vec2 a = ddf_(u);
    // normal part of the acceleration, rescaled to arc length
    Vec2 n = a - v * (v.dot(a) / v.norm2());
    return n / v.norm2();
}

// ---------------------------------------------------------------------------
// SplineCurve: periodic cubic spline through points
// ---------------------------------------------------------------------------

namespace {

// Solves the cyclic tridiagonal system for periodic cubic spline moments.
std::vector<double> periodic_spline_moments(const std::vector<double>& y, double h) {
    const int n = int(y.size());
    // M_{i-1} + 4 M_i + M_{i+1} = 6 (y_{i-1} - 2 y_i + y_{i+1}) / h^2, cyclic.
    std::vector<double> rhs(n);
    for (int i = 0; i < n; ++i) {
        double ym = y[(i + n - 1) % n], yp = y[(i + 1) % n];
        rhs[i] = 6.0 * (ym - 2.0 * y[i] + yp) / (h * h);
    }
    // Sherman-Morrison for the cyclic part.
    std::vector<double> a(n, 1.0), b(n, 4.0), c(n, 1.0);
    auto solve_tri = [&](std::vector<double> r) {
        std::vector<double> cp(n), x(n);
        double beta = b[0];
        x[0] = r[0] / beta;
        for (int i = 1; i < n; ++i) {
            cp[i] = c[i - 1] / beta;
            beta = b[i] - a[i] * cp[i];
            x[i] = (r[i] - a[i] * x[i - 1]) / beta;
        }
        for (int i = n - 2; i >= 0; --i) x[i] -= cp[i + 1] * x[i + 1];
        return x;
    };
    double gamma = -b[0];
    std::vector<double> bb = b;
    bb[0] -= gamma;
    bb[n - 1] -= c[n - 1] * a[0] / gamma;
    std::vector<double> bsave = b;
    b = bb;
    std::vector<double> x = solve_tri(rhs);
    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = c[n - 1];
    std::vector<double> z = solve_tri(u);
    b = bsave;
    double fact = (x[0] + a[0] * x[n - 1] / gamma) / (1.0 + z[0] + a[0] * z[n - 1] / gamma);
    for (int i = 0; i < n; ++i) x[i] -= fact * z[i];
    return x;
}

struct SplineData {
    std::vector<Vec2> p;
    std::vector<Vec2> m;  // second derivatives at knots
    double h = 1.0;       // knot spacing in parameter

    Vec2 eval(double u) const {
        int n = int(p.size());
        double t = u / h;
        int i = int(std::floor(t)) % n;
        if (i < 0) i += n;
        double loc = (u - std::floor(u / h) * h) / h;
        int j = (i + 1) % n;
        double A = 1.0 - loc, B = loc;
        double h2 = h * h / 6.0;
        auto comp = [&](double pi, double pj, double mi, double mj) {
            return A * pi + B * pj + ((A * A * A - A) * mi + (B * B * B - B) * mj) * h2;
        };
        return {comp(p[i].x, p[j].x, m[i].x, m[j].x), comp(p[i].y, p[j].y, m[i].y, m[j].y)};
    }
    Vec2 eval_d(double u) const {
        int n = int(p.size());
        double t = u / h;
        int i = int(std::floor(t)) % n;
        if (i < 0) i += n;
        double loc = (u - std::floor(u / h) * h) / h;
        int j = (i + 1) % n;
        double A = 1.0 - loc, B = loc;
        auto comp = [&](double pi, double pj, double mi, double mj) {
            return (pj - pi) / h + ((3.0 * B * B - 1.0) * mj - (3.0 * A * A - 1.0) * mi) * h / 6.0;
        };
        return {comp(p[i].x, p[j].x, m[i].x, m[j].x), comp(p[i].y, p[j].y, m[i].y, m[j].y)};
    }
    Vec2 eval_dd(double u) const {
        int n = int(p.size());
        double t = u / h;
        int i = int(std::floor(t)) % n;
        if (i < 0) i += n;
        double loc = (u - std::floor(u / h) * h) / h;
        int j = (i + 1) % n;
        double A = 1.0 - loc, B = loc;
        return {A * m[i].x + B * m[j].x, A * m[i].y + B * m[j].y};
    }
};

ReparamCurve build_spline_curve(std::string name, bool domain_left, std::vector<Vec2> points) {
    if (points.size() < 4) throw Error(Errc::Config, "spline needs at least 4 points");
    const int n = int(points.size());
    double h = 2.0 * M_PI / n;
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = points[i].x;
        ys[i] = points[i].y;
    }
    auto mx = periodic_spline_moments(xs, h);
    auto my = periodic_spline_moments(ys, h);
    auto data = std::make_shared<SplineData>();
    data->p = std::move(points);
    data->m.resize(n);
    for (int i = 0; i < n; ++i) data->m[i] = {mx[i], my[i]};
    data->h = h;
    return ReparamCurve(
        std::move(name), domain_left,
        [data](double u) { return data->eval(u); },
        [data](double u) { return data->eval_d(u); },
        [data](double u) { return data->eval_dd(u); }, 4096);
}

}  // namespace

SplineCurve::SplineCurve(std::string name, bool domain_left, std::vector<Vec2> points)
    : ReparamCurve(build_spline_curve(std::move(name), domain_left, std::move(points))) {}

std::shared_ptr<Curve> make_polar_curve(std::string name, std::function<double(double)> rho,
                                        std::function<double(double)> drho,
                                        std::function<double(double)> ddrho) {
    auto pos = [rho](double u) {
        double r = rho(u);
        return Vec2{r * std::cos(u), r * std::sin(u)};
    };
    auto der = [rho, drho](double u) {
        double r = rho(u), dr = drho(u);
        return Vec2{dr * std::cos(u) - r * std::sin(u), dr * std::sin(u) + r * std::cos(u)};
    };
    auto der2 = [rho, drho, ddrho](double u) {
        double r = rho(u), dr = drho(u), ddr = ddrho(u);
        return Vec2{(ddr - r) * std::cos(u) - 2.0 * dr * std::sin(u),
                    (ddr - r) * std::sin(u) + 2.0 * dr * std::cos(u)};
    };
    return std::make_shared<ReparamCurve>(std::move(name), true, pos, der, der2, 4096);
}

// ---------------------------------------------------------------------------
// Piecewise line/arc curve (exact arc length, C^1 joins)
// ---------------------------------------------------------------------------

namespace {

struct Segment {
    bool is_arc = false;
    // line
    Vec2 p0, dir;
    // arc
    Vec2 center;
    double radius = 0.0;
    double theta0 = 0.0;
    double sweep = 0.0;  // signed; positive = ccw
    double len = 0.0;
};

class PiecewiseCurve final : public Curve {
public:
    PiecewiseCurve(std::string name, bool domain_left, std::vector<Segment> segs)
        : Curve(std::move(name), domain_left), segs_(std::move(segs)) {
        cum_.resize(segs_.size() + 1, 0.0);
        for (size_t i = 0; i < segs_.size(); ++i) cum_[i + 1] = cum_[i] + segs_[i].len;
        // continuity audit
        for (size_t i = 0; i < segs_.size(); ++i) {
            size_t j = (i + 1) % segs_.size();
            Vec2 pe = eval(i, segs_[i].len).first;
            Vec2 ps = eval(j, 0.0).first;
            Vec2 te = eval(i, segs_[i].len).second;
            Vec2 ts = eval(j, 0.0).second;
            if ((pe - ps).norm() > 1e-9 || (te - ts).norm() > 1e-9)
                throw Error(Errc::NonSmooth, "piecewise curve join mismatch at segment " +
                                                 std::to_string(i));
        }
    }

    double length() const override { return cum_.back(); }
    Vec2 position(double s) const override {
        auto [i, loc] = locate(s);
        return eval(i, loc).first;
    }
    Vec2 derivative(double s) const override {
        auto [i, loc] = locate(s);
        return eval(i, loc).second;
    }
    Vec2 second_derivative(double s) const override {
        auto [i, loc] = locate(s);
        const Segment& g = segs_[i];
        if (!g.is_arc) return {0, 0};
        double sgn = g.sweep >= 0 ? 1.0 : -1.0;
        double th = g.theta0 + sgn * loc / g.radius;
        return Vec2{-std::cos(th), -std::sin(th)} / g.radius;
    }

private:
    std::pair<size_t, double> locate(double s) const {
        s = wrap(s);
        auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
        size_t i = std::min(segs_.size() - 1, size_t(std::max<long>(0, (it - cum_.begin()) - 1)));
        return {i, s - cum_[i]};
    }
    std::pair<Vec2, Vec2> eval(size_t i, double loc) const {
        const Segment& g = segs_[i];
        if (!g.is_arc) return {g.p0 + g.dir * loc, g.dir};
        double sgn = g.sweep >= 0 ? 1.0 : -1.0;
        double th = g.theta0 + sgn * loc / g.radius;
        Vec2 pos = g.center + Vec2{g.radius * std::cos(th), g.radius * std::sin(th)};
        Vec2 tan = Vec2{-std::sin(th), std::cos(th)} * sgn;
        return {pos, tan};
    }

    std::vector<Segment> segs_;
    std::vector<double> cum_;
};

Segment line_seg(Vec2 a, Vec2 b) {
    Segment s;
    s.is_arc = false;
    s.p0 = a;
    s.dir = (b - a).normalized();
    s.len = (b - a).norm();
    return s;
}

Segment arc_seg(Vec2 center, double radius, double theta0, double sweep) {
    Segment s;
    s.is_arc = true;
    s.center = center;
    s.radius = radius;
    s.theta0 = theta0;
    s.sweep = sweep;
    s.len = radius * std::abs(sweep);
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Regions
// ---------------------------------------------------------------------------

namespace {

// Normalize to a sorted union of disjoint arcs in [0, L), merging overlaps.
// A full cover is returned as the single arc [0, L].
std::vector<std::array<double, 2>> normalize_arcs(const std::vector<std::array<double, 2>>& in,
                                                  double L) {
    std::vector<std::array<double, 2>> flat;
    double total = 0.0;
    for (auto [a, b] : in) {
        if (b < a) std::swap(a, b);
        double w = std::min(b - a, L);
        total += w;
        double a0 = std::fmod(a, L);
        if (a0 < 0) a0 += L;
        if (a0 + w <= L) {
            flat.push_back({a0, a0 + w});
        } else {
            flat.push_back({a0, L});
            flat.push_back({0.0, a0 + w - L});
        }
    }
    if (total >= L - 1e-12) return {{0.0, L}};
    std::sort(flat.begin(), flat.end());
    std::vector<std::array<double, 2>> out;
    for (auto& arc : flat) {
        if (!out.empty() && arc[0] <= out.back()[1] + 1e-15) {
            out.back()[1] = std::max(out.back()[1], arc[1]);
        } else {
            out.push_back(arc);
        }
    }
    // merge across the wrap point
    if (out.size() > 1 && out.front()[0] <= 1e-15 && out.back()[1] >= L - 1e-15) {
        out.front()[0] = out.back()[0] - L;
        out.pop_back();
    }
    return out;
}

}  // namespace

bool BoundaryRegion::contains(double s, double curve_length, double tol) const {
    double L = curve_length;
    double s0 = std::fmod(s, L);
    if (s0 < 0) s0 += L;
    for (auto [a, b] : intervals) {
        if (b < a) std::swap(a, b);
        double w = std::min(b - a, L) + 2.0 * tol;
        double a0 = std::fmod(a - tol, L);
        if (a0 < 0) a0 += L;
        double rel = s0 - a0;
        if (rel < 0) rel += L;
        if (rel <= w) return true;
    }
    return false;
}

double BoundaryRegion::measure() const {
    double m = 0.0;
    for (auto [a, b] : intervals) m += std::abs(b - a);
    return m;
}

BoundaryRegion BoundaryRegion::dilated(double amount, double curve_length) const {
    BoundaryRegion out = *this;
    out.intervals.clear();
    for (auto [a, b] : intervals) {
        if (b < a) std::swap(a, b);
        double w = std::min(b - a + 2.0 * amount, curve_length);
        out.intervals.push_back({a - amount, a - amount + w});
    }
    return out;
}

bool BoundaryRegion::covers_full_curve(double curve_length, double tol) const {
    auto arcs = normalize_arcs(intervals, curve_length);
    return arcs.size() == 1 && arcs[0][1] - arcs[0][0] >= curve_length - tol;
}

bool region_strictly_contains(const BoundaryRegion& outer, const BoundaryRegion& inner,
                              double L) {
    if (outer.curve != inner.curve) return false;
    auto oa = normalize_arcs(outer.intervals, L);
    if (oa.size() == 1 && oa[0][1] - oa[0][0] >= L - 1e-12) return true;  // full cover
    auto ia = normalize_arcs(inner.intervals, L);
    for (auto [a, b] : ia) {
        bool ok = false;
        for (auto [c, d] : oa) {
            // try both unwrapped placements of the inner arc
            for (double shift : {0.0, -L, L}) {
                if (c < a + shift && b + shift < d) {
                    ok = true;
                    break;
                }
            }
            if (ok) break;
        }
        if (!ok) return false;
    }
    return true;
}

bool regions_disjoint_closures(const BoundaryRegion& a, const BoundaryRegion& b, double L) {
    if (a.curve != b.curve) return true;
    auto aa = normalize_arcs(a.intervals, L);
    auto bb = normalize_arcs(b.intervals, L);
    for (auto [p, q] : aa) {
        for (auto [r, t] : bb) {
            for (double shift : {0.0, -L, L}) {
                double lo = std::max(p, r + shift), hi = std::min(q, t + shift);
                if (lo <= hi) return false;
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Domain
// ---------------------------------------------------------------------------

Domain::Domain(std::string name, std::vector<std::shared_ptr<const Curve>> curves)
    : name_(std::move(name)), curves_(std::move(curves)) {
    if (curves_.empty()) throw Error(Errc::Config, "domain needs at least one curve");
    bool first = true;
    double min_r = 1e300;
    for (auto& c : curves_) {
        for (int i = 0; i < 512; ++i) {
            Vec2 p = c->position(c->length() * i / 512.0);
            if (first) {
                bbox_ = {p, p};
                first = false;
            } else {
                bbox_.absorb(p);
            }
        }
        min_r = std::min(min_r, c->min_curvature_radius());
    }
    collar_radius_ = 0.2 * min_r;
}

int Domain::curve_index(const std::string& curve_name) const {
    for (size_t i = 0; i < curves_.size(); ++i)
        if (curves_[i]->name() == curve_name) return int(i);
    throw Error(Errc::Config, "unknown curve '" + curve_name + "'");
}

bool Domain::inside(Vec2 p) const {
    for (auto& c : curves_) {
        double s = c->project(p);
        Vec2 d = p - c->position(s);
        double side = c->derivative(s).cross(d);
        if (std::abs(side) < 1e-30) continue;  // on the boundary
        if ((side > 0) != c->domain_left()) return false;
    }
    return true;
}

bool Domain::inside_by_winding(Vec2 p, int n_samples) const {
    for (auto& c : curves_) {
        double theta = 0.0;
        Vec2 prev = c->position(0.0) - p;
        for (int i = 1; i <= n_samples; ++i) {
            Vec2 cur = c->position(c->length() * i / n_samples) - p;
            theta += std::atan2(prev.cross(cur), prev.dot(cur));
            prev = cur;
        }
        double winding = theta / (2.0 * M_PI);
        bool inside_curve = std::abs(winding) > 0.5;
        // signed area orientation: ccw curves have the left side inside
        double area = 0.0;
        Vec2 q0 = c->position(0.0);
        for (int i = 1; i <= 256; ++i) {
            Vec2 q1 = c->position(c->length() * i / 256.0);
            area += q0.cross(q1);
            q0 = q1;
        }
        bool ccw = area > 0;
        bool domain_is_inside = (ccw == c->domain_left());
        if (inside_curve != domain_is_inside) return false;
    }
    return true;
}

double Domain::signed_distance(Vec2 p) const {
    double dmin = 1e300;
    for (auto& c : curves_) {
        double s = c->project(p);
        dmin = std::min(dmin, (p - c->position(s)).norm());
    }
    return inside(p) ? dmin : -dmin;
}

SignedDistance Domain::signed_distance_checked(Vec2 p) const {
    SignedDistance r;
    r.value = signed_distance(p);
    r.far_field = (r.value < 0.0) && (-r.value > collar_radius_);
    return r;
}

Projection Domain::project(Vec2 p, double ambiguity_tol) const {
    Projection best, second;
    best.distance = 1e300;
    second.distance = 1e300;
    for (size_t i = 0; i < curves_.size(); ++i) {
        double s = curves_[i]->project(p);
        double d = (p - curves_[i]->position(s)).norm();
        if (d < best.distance) {
            second = best;
            best = {int(i), s, d};
        } else if (d < second.distance) {
            second = {int(i), s, d};
        }
    }
    if (curves_.size() > 1 && second.curve_index >= 0 &&
        std::abs(best.distance - second.distance) <= ambiguity_tol) {
        throw Error(Errc::Ambiguity, "point equidistant from two boundary curves");
    }
    return best;
}

// ---------------------------------------------------------------------------
// Built-in domains
// ---------------------------------------------------------------------------

Domain make_disc(double radius) {
    auto c = std::make_shared<CircleCurve>("circle", Vec2{0, 0}, radius, true, true);
    return Domain("disc", {c});
}

Domain make_annulus(double r_inner, double r_outer) {
    if (!(0 < r_inner && r_inner < r_outer))
        throw Error(Errc::Config, "annulus needs 0 < r_inner < r_outer");
    // Outer circle ccw (domain inside = left); inner circle cw so that the
    // domain (outside the inner circle) is again on the left.
    auto outer = std::make_shared<CircleCurve>("outer", Vec2{0, 0}, r_outer, true, true);
    auto inner = std::make_shared<CircleCurve>("inner", Vec2{0, 0}, r_inner, false, true);
    return Domain("annulus", {inner, outer});
}

Domain make_stadium(double straight, double radius) {
    double a = 0.5 * straight;
    std::vector<Segment> segs;
    segs.push_back(line_seg({-a, -radius}, {a, -radius}));
    segs.push_back(arc_seg({a, 0}, radius, -M_PI / 2, M_PI));
    segs.push_back(line_seg({a, radius}, {-a, radius}));
    segs.push_back(arc_seg({-a, 0}, radius, M_PI / 2, M_PI));
    auto c = std::make_shared<PiecewiseCurve>("wall", true, std::move(segs));
    return Domain("stadium", {c});
}

Domain make_pocket(double width, double height, double pocket_radius) {
    const double rc = 0.25 * std::min(width, height);  // corner radius
    const double rf = 0.35 * pocket_radius;            // fillet radius
    const double depth = 0.55 * pocket_radius;         // pocket depth
    const double W = width, H = height, rp = pocket_radius;

    // Pocket carved into the top side, centered at x = 0. Fillet circles sit
    // below the top line; the pocket circle sits above the lowest pocket point.
    const double ytop = H / 2;
    const Vec2 D{0.0, ytop - depth + rp};  // pocket circle center
    const double dy = (ytop - rf) - D.y;
    const double inside = (rf + rp) * (rf + rp) - dy * dy;
    if (inside <= 0) throw Error(Errc::Config, "pocket parameters do not close");
    const double x1 = std::sqrt(inside);  // fillet center abscissa (right side)
    if (x1 + rf > W / 2 - rc - 0.05 * W)
        throw Error(Errc::Config, "pocket too wide for the rectangle");
    const Vec2 F1{x1, ytop - rf}, F2{-x1, ytop - rf};
    Vec2 u1 = (D - F1).normalized();
    Vec2 J1 = F1 + u1 * rf;
    Vec2 u2 = (D - F2).normalized();
    Vec2 J2 = F2 + u2 * rf;
    double thJ1_f = std::atan2(J1.y - F1.y, J1.x - F1.x);
    double thJ1_d = std::atan2(J1.y - D.y, J1.x - D.x);
    double thJ2_f = std::atan2(J2.y - F2.y, J2.x - F2.x);
    double thJ2_d = std::atan2(J2.y - D.y, J2.x - D.x);

    std::vector<Segment> segs;
    // ccw from the bottom-left rounded corner end
    segs.push_back(line_seg({-W / 2 + rc, -H / 2}, {W / 2 - rc, -H / 2}));
    segs.push_back(arc_seg({W / 2 - rc, -H / 2 + rc}, rc, -M_PI / 2, M_PI / 2));
    segs.push_back(line_seg({W / 2, -H / 2 + rc}, {W / 2, H / 2 - rc}));
    segs.push_back(arc_seg({W / 2 - rc, H / 2 - rc}, rc, 0.0, M_PI / 2));
    segs.push_back(line_seg({W / 2 - rc, ytop}, {x1, ytop}));
    // right fillet: convex, ccw from the circle top (pi/2) to the join
    segs.push_back(arc_seg(F1, rf, M_PI / 2, thJ1_f - M_PI / 2));
    // pocket arc: concave, cw from join 1 to join 2 (through the bottom, -pi/2)
    {
        double sweep = thJ2_d - thJ1_d;
        while (sweep > 0) sweep -= 2.0 * M_PI;  // force clockwise
        segs.push_back(arc_seg(D, rp, thJ1_d, sweep));
    }
    // left fillet: convex, ccw from join 2 up to the circle top
    {
        double sweep = M_PI / 2 - thJ2_f;
        while (sweep < 0) sweep += 2.0 * M_PI;
        segs.push_back(arc_seg(F2, rf, thJ2_f, sweep));
    }
    segs.push_back(line_seg({-x1, ytop}, {-W / 2 + rc, ytop}));
    segs.push_back(arc_seg({-W / 2 + rc, H / 2 - rc}, rc, M_PI / 2, M_PI / 2));
    segs.push_back(line_seg({-W / 2, H / 2 - rc}, {-W / 2, -H / 2 + rc}));
    segs.push_back(arc_seg({-W / 2 + rc, -H / 2 + rc}, rc, M_PI, M_PI / 2));
    auto c = std::make_shared<PiecewiseCurve>("wall", true, std::move(segs));
    return Domain("pocket", {c});
}

Domain make_peanut(double scale, double waist) {
    if (!(waist > 0.2 && waist < 0.9))
        throw Error(Errc::Config, "peanut waist must be in (0.2, 0.9) for a concave neck");
    auto rho = [scale, waist](double u) { return scale * (1.0 + waist * std::cos(2.0 * u)); };
    auto drho = [scale, waist](double u) { return -2.0 * scale * waist * std::sin(2.0 * u); };
    auto ddrho = [scale, waist](double u) { return -4.0 * scale * waist * std::cos(2.0 * u); };
    auto c = make_polar_curve("wall", rho, drho, ddrho);
    return Domain("peanut", {c});
}

Domain make_polyline_domain(const std::vector<Vec2>& points, const std::string& name) {
    // orientation: make traversal ccw so the enclosed region is on the left
    double area = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
        area += points[i].cross(points[(i + 1) % points.size()]);
    }
    std::vector<Vec2> pts = points;
    if (area < 0) std::reverse(pts.begin(), pts.end());
    auto c = std::make_shared<SplineCurve>("wall", true, std::move(pts));
    return Domain(name, {c});
}

// ---------------------------------------------------------------------------
// Geodesic collar
// ---------------------------------------------------------------------------

BoundaryChart boundary_chart(const Domain& domain, int curve_index, double s,
                             const MetricField& metric) {
    const Curve& c = domain.curve(curve_index);
    BoundaryChart ch;
    ch.curve_index = curve_index;
    ch.s = c.wrap(s);
    ch.x = c.position(ch.s);
    ch.tangent = c.derivative(ch.s);
    Vec2 inward_euclid = c.domain_left() ? ch.tangent.perp() : -1.0 * ch.tangent.perp();
    Mat2 A = metric.at(ch.x);
    Vec2 n = A.apply(ch.tangent.perp());
    // unit length in the A^{-1} norm
    double nn = n.dot(metric.inverse_at(ch.x).apply(n));
    n = n / std::sqrt(nn);
    if (n.dot(inward_euclid) < 0) n = -1.0 * n;
    ch.conormal = n;
    return ch;
}

Vec2 collar_point(const Domain& domain, int curve_index, double s, double nu,
                  const MetricField& metric) {
    BoundaryChart ch = boundary_chart(domain, curve_index, s, metric);
    if (metric.is_identity()) return ch.x + ch.conormal * nu;
    // geodesic of the metric A^{-1}: dx/dsig = A p, dp_k/dsig = -1/2 p^T dA_k p
    Vec2 x = ch.x;
    Vec2 p = metric.inverse_at(ch.x).apply(ch.conormal);
    const int n_steps = 16;
    double hstep = nu / n_steps;
    auto field = [&metric](Vec2 xx, Vec2 pp, Vec2& dx, Vec2& dp) {
        dx = metric.at(xx).apply(pp);
        auto g = metric.grad(xx);
        dp = {-0.5 * pp.dot(g[0].apply(pp)), -0.5 * pp.dot(g[1].apply(pp))};
    };
    for (int i = 0; i < n_steps; ++i) {
        Vec2 k1x, k1p, k2x, k2p, k3x, k3p, k4x, k4p;
        field(x, p, k1x, k1p);
        field(x + k1x * (hstep / 2), p + k1p * (hstep / 2), k2x, k2p);
        field(x + k2x * (hstep / 2), p + k2p * (hstep / 2), k3x, k3p);
        field(x + k3x * hstep, p + k3p * hstep, k4x, k4p);
        x += (k1x + 2.0 * k2x + 2.0 * k3x + k4x) * (hstep / 6.0);
        p += (k1p + 2.0 * k2p + 2.0 * k3p + k4p) * (hstep / 6.0);
    }
    return x;
}

double tangential_cometric(const Domain& domain, int curve_index, double s, double nu,
                           const MetricField& metric) {
    const Curve& c = domain.curve(curve_index);
    if (nu == 0.0) {
        // on the boundary the collar map is the curve itself
        Vec2 t = c.derivative(s);
        return 1.0 / t.dot(metric.inverse_at(c.position(s)).apply(t));
    }
    const double ds = 1e-3 * std::min(c.min_curvature_radius(), 1.0);
    // 5-point derivative of the collar map in s
    Vec2 pm2 = collar_point(domain, curve_index, s - 2 * ds, nu, metric);
    Vec2 pm1 = collar_point(domain, curve_index, s - ds, nu, metric);
    Vec2 pp1 = collar_point(domain, curve_index, s + ds, nu, metric);
    Vec2 pp2 = collar_point(domain, curve_index, s + 2 * ds, nu, metric);
    Vec2 d = (pm2 - pp2 + (pp1 - pm1) * 8.0) / (12.0 * ds);
    Vec2 phi = collar_point(domain, curve_index, s, nu, metric);
    double e = d.dot(metric.inverse_at(phi).apply(d));
    return 1.0 / e;
}

double tangential_cometric_normal_derivative(const Domain& domain, int curve_index, double s,
                                             const MetricField& metric) {
    const Curve& c = domain.curve(curve_index);
    const double dnu = 1e-4 * std::min(c.min_curvature_radius(), 1.0);
    auto h = [&](double nu) { return tangential_cometric(domain, curve_index, s, nu, metric); };
    double d1 = (h(dnu) - h(-dnu)) / (2.0 * dnu);
    double d2 = (h(dnu / 2) - h(-dnu / 2)) / dnu;
    return (4.0 * d2 - d1) / 3.0;
}

bool collar_injective(const Domain& domain, int curve_index, double nu_max,
                      const MetricField& metric, int n_s, int n_nu) {
    const Curve& c = domain.curve(curve_index);
    // The collar map is injective when projecting back recovers (s, nu).
    for (int i = 0; i < n_s; ++i) {
        double s = c.length() * i / n_s;
        for (int j = 1; j <= n_nu; ++j) {
            double nu = nu_max * j / n_nu;
            Vec2 p = collar_point(domain, curve_index, s, nu, metric);
            Projection pr;
            try {
                pr = domain.project(p);
            } catch (const Error&) {
                return false;
            }
            if (pr.curve_index != curve_index) return false;
            double ds = std::abs(pr.s - s);
            ds = std::min(ds, c.length() - ds);
            if (ds > 0.25 * std::max(nu, 1e-6) + 1e-6) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Concavity
// ---------------------------------------------------------------------------

ConcavityReport check_a1_concavity(const Domain& domain, const BoundaryRegion& region,
                                   const MetricField& metric, int n_samples, double threshold) {
    int ci = domain.curve_index(region.curve);
    const Curve& c = domain.curve(ci);
    if (region.intervals.empty() || region.measure() <= 0.0)
        throw Error(Errc::EmptyRegion, "concavity check on empty region");

    ConcavityReport rep;
    rep.threshold = threshold;
    rep.min_margin = 1e300;
    for (auto [a, b] : region.intervals) {
        if (b < a) std::swap(a, b);
        int n = std::max(1, int(std::lround(double(n_samples) * (b - a) / region.measure())));
        for (int i = 0; i < n; ++i) {
            double s = a + (b - a) * (i + 0.5) / n;
            ConcavitySample sample;
            sample.s = c.wrap(s);
            double h0, dh;
            try {
                h0 = tangential_cometric(domain, ci, s, 0.0, metric);
                dh = tangential_cometric_normal_derivative(domain, ci, s, metric);
            } catch (const std::exception& e) {
                throw Error(Errc::NonSmooth, std::string("curvature data unavailable: ") + e.what());
            }
            if (!std::isfinite(h0) || !std::isfinite(dh) || h0 <= 0.0)
                throw Error(Errc::NonSmooth, "collar metric degenerate at sample");
            // Second variation of the collar coordinate along the tangent
            // geodesic, in physical time; equals the geodesic curvature of the
            // wall (1/R for a circle seen from the concave side).
            sample.margin = -dh / (2.0 * h0);
            rep.min_margin = std::min(rep.min_margin, sample.margin);
            rep.samples.push_back(sample);
        }
    }
    if (rep.min_margin >= threshold)
        rep.verdict = ConcavityVerdict::StrictConcave;
    else if (rep.min_margin > -threshold)
        rep.verdict = ConcavityVerdict::ConcaveDegenerate;
    else
        rep.verdict = ConcavityVerdict::NotConcave;
    return rep;
}

}  // namespace sidewise
