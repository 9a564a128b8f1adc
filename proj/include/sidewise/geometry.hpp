#ifndef SIDEWISE_GEOMETRY_HPP
#define SIDEWISE_GEOMETRY_HPP

#include <array>
#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sidewise/errors.hpp"
#include "sidewise/vec.hpp"

namespace sidewise {

// ---------------------------------------------------------------------------
// Metric field
// ---------------------------------------------------------------------------

// Symmetric positive-definite coefficient matrix A(x) with first derivatives.
// All wave speeds and ray geometry derive from it.
class MetricField {
public:
    using MatrixFn = std::function<Mat2(Vec2)>;
    using GradFn = std::function<std::array<Mat2, 2>(Vec2)>;  // d/dx A, d/dy A

    MetricField() : MetricField(identity()) {}
    MetricField(std::string name, MatrixFn a, GradFn grad_a)
        : name_(std::move(name)), a_(std::move(a)), grad_(std::move(grad_a)) {}

    static MetricField identity();
    static MetricField constant(Mat2 a);
    // diag(1 + ax*x, 1 + by*y)
    static MetricField diag_linear(double ax, double by);
    // (1 + amp * exp(-|x-c|^2 / w^2)) * Id
    static MetricField conformal_gaussian(double amp, Vec2 center, double width);

    Mat2 at(Vec2 x) const { return a_(x); }
    std::array<Mat2, 2> grad(Vec2 x) const { return grad_(x); }
    Mat2 inverse_at(Vec2 x) const { return a_(x).inverse(); }

    const std::string& name() const { return name_; }
    bool is_identity() const { return name_ == "identity"; }

    // Uniform ellipticity bounds, estimated by dense sampling over a box.
    void estimate_bounds(const BBox& box, int n = 64);
    double lambda_min() const { return lambda_min_; }
    double lambda_max() const { return lambda_max_; }

private:
    std::string name_;
    MatrixFn a_;
    GradFn grad_;
    double lambda_min_ = 1.0;
    double lambda_max_ = 1.0;
};

// ---------------------------------------------------------------------------
// Boundary curves
// ---------------------------------------------------------------------------

// Closed smooth curve, parametrized by Euclidean arc length s in [0, length).
// Orientation is encoded by domain_left(): whether the domain lies to the
// left of the tangent direction.
class Curve {
public:
    virtual ~Curve() = default;

    virtual double length() const = 0;
    virtual Vec2 position(double s) const = 0;
    virtual Vec2 derivative(double s) const = 0;         // dx/ds, unit
    virtual Vec2 second_derivative(double s) const = 0;  // d2x/ds2

    // Signed curvature: positive when the curve turns left.
    double signed_curvature(double s) const {
        return derivative(s).cross(second_derivative(s));
    }

    // Closest-point parameter; default implementation samples then polishes.
    virtual double project(Vec2 p) const;

    const std::string& name() const { return name_; }
    bool domain_left() const { return domain_left_; }
    double wrap(double s) const {
        double L = length();
        s = std::fmod(s, L);
        return s < 0 ? s + L : s;
    }

    // Minimum radius of curvature (sampled once, cached), used for collar sizing.
    double min_curvature_radius() const;

protected:
    Curve(std::string name, bool domain_left) : name_(std::move(name)), domain_left_(domain_left) {}
    Curve(const Curve& o) : name_(o.name_), domain_left_(o.domain_left_) {}
    Curve& operator=(const Curve& o) {
        name_ = o.name_;
        domain_left_ = o.domain_left_;
        min_r_cache_.store(-1.0);
        return *this;
    }

private:
    std::string name_;
    bool domain_left_;
    mutable std::atomic<double> min_r_cache_{-1.0};
};

class CircleCurve final : public Curve {
public:
    // ccw = true traverses counterclockwise; domain_left then means "inside".
    CircleCurve(std::string name, Vec2 center, double radius, bool ccw, bool domain_left);

    double length() const override { return 2.0 * M_PI * radius_; }
    Vec2 position(double s) const override;
    Vec2 derivative(double s) const override;
    Vec2 second_derivative(double s) const override;
    double project(Vec2 p) const override;

    Vec2 center() const { return center_; }
    double radius() const { return radius_; }

private:
    Vec2 center_;
    double radius_;
    double dir_;  // +1 ccw, -1 cw
};

// Curve given in an arbitrary smooth parametrization, reparametrized to arc
// length through a dense quadrature table.
class ReparamCurve : public Curve {
public:
    using PosFn = std::function<Vec2(double)>;   // u in [0, 2*pi)
    using DerFn = std::function<Vec2(double)>;   // dx/du
    using Der2Fn = std::function<Vec2(double)>;  // d2x/du2

    ReparamCurve(std::string name, bool domain_left, PosFn f, DerFn df, Der2Fn ddf,
                 int table_size = 4096);

    double length() const override { return total_length_; }
    Vec2 position(double s) const override;
    Vec2 derivative(double s) const override;
    Vec2 second_derivative(double s) const override;

private:
    double u_of_s(double s) const;

    PosFn f_;
    DerFn df_;
    Der2Fn ddf_;
    double total_length_ = 0.0;
    std::vector<double> s_table_;  // cumulative arc length at u_i = i * du
    double du_ = 0.0;
};

// Periodic cubic spline through sample points (closed implicitly).
class SplineCurve final : public ReparamCurve {
public:
    SplineCurve(std::string name, bool domain_left, std::vector<Vec2> points);
};

// Polar graph r = rho(phi), smooth and positive; domain inside.
std::shared_ptr<Curve> make_polar_curve(std::string name,
                                        std::function<double(double)> rho,
                                        std::function<double(double)> drho,
                                        std::function<double(double)> ddrho);

// ---------------------------------------------------------------------------
// Regions on the boundary
// ---------------------------------------------------------------------------

// One or more arc-length intervals on a single curve.
enum class RegionLabel { Source, SourceNeighborhood, Measurement, Custom };

struct BoundaryRegion {
    std::string curve;                                // curve name
    std::vector<std::array<double, 2>> intervals;     // [s_a, s_b], s_b may exceed L (wrap)
    RegionLabel label = RegionLabel::Custom;

    bool contains(double s, double curve_length, double tol = 0.0) const;
    double measure() const;
    // Dilate every interval by `amount` of arc length on both ends.
    BoundaryRegion dilated(double amount, double curve_length) const;
    bool covers_full_curve(double curve_length, double tol = 1e-12) const;
};

// closure(inner) strictly inside interior(outer) on the same curve.
bool region_strictly_contains(const BoundaryRegion& outer, const BoundaryRegion& inner,
                              double curve_length);
bool regions_disjoint_closures(const BoundaryRegion& a, const BoundaryRegion& b,
                               double curve_length);

// ---------------------------------------------------------------------------
// Domain
// ---------------------------------------------------------------------------

struct Projection {
    int curve_index = -1;
    double s = 0.0;
    double distance = 0.0;  // unsigned
};

struct SignedDistance {
    double value = 0.0;   // positive inside, negative outside
    bool far_field = false;  // beyond collar validity and outside the hull
};

class Domain {
public:
    Domain(std::string name, std::vector<std::shared_ptr<const Curve>> curves);

    const std::string& name() const { return name_; }
    const std::vector<std::shared_ptr<const Curve>>& curves() const { return curves_; }
    const Curve& curve(int i) const { return *curves_[i]; }
    int curve_index(const std::string& curve_name) const;
    const BBox& bbox() const { return bbox_; }
    double collar_radius() const { return collar_radius_; }

    bool inside(Vec2 p) const;
    // Independent inside test via winding numbers (slow; used as an oracle).
    bool inside_by_winding(Vec2 p, int n_samples = 2048) const;

    double signed_distance(Vec2 p) const;
    SignedDistance signed_distance_checked(Vec2 p) const;

    // Nearest boundary point. Throws Errc::Ambiguity when two curves are
    // equidistant within tol.
    Projection project(Vec2 p, double ambiguity_tol = 1e-9) const;

private:
    std::string name_;
    std::vector<std::shared_ptr<const Curve>> curves_;
    BBox bbox_;
    double collar_radius_ = 0.0;
};

// Built-in domain library.
Domain make_disc(double radius = 1.0);
Domain make_annulus(double r_inner = 1.0, double r_outer = 2.0);
// Rounded rectangle with one strictly concave arc carved into the top side.
Domain make_pocket(double width = 6.0, double height = 3.0, double pocket_radius = 1.2);
// Smooth peanut (two lobes, concave waist): rho(phi) = a*(1 + d*cos(2*phi)).
Domain make_peanut(double scale = 1.5, double waist = 0.35);
// Stadium: rectangle with semicircular caps (flat walls, no corners).
Domain make_stadium(double straight = 2.0, double radius = 1.0);
Domain make_polyline_domain(const std::vector<Vec2>& points, const std::string& name = "polyline");

// ---------------------------------------------------------------------------
// Geodesic collar
// ---------------------------------------------------------------------------

// Boundary chart data at arc-length s: the metric-orthogonal inward conormal
// spanning the geodesic collar coordinate.
struct BoundaryChart {
    int curve_index = 0;
    double s = 0.0;
    Vec2 x;        // boundary point
    Vec2 tangent;  // unit Euclidean tangent dx/ds
    Vec2 conormal; // inward collar direction: A t_perp, normalized to unit A^-1 norm
};

BoundaryChart boundary_chart(const Domain& domain, int curve_index, double s,
                             const MetricField& metric);

// Point reached by following the metric geodesic from x(s) along the inward
// conormal for collar parameter nu (metric arc length; nu may be negative).
Vec2 collar_point(const Domain& domain, int curve_index, double s, double nu,
                  const MetricField& metric);

// Tangential cometric factor h(s, nu) = 1 / |d(collar)/ds|^2_{A^{-1}}.
// The boundary symbol is tau^2 - h * xi'^2; h(., 0) is the value on the
// boundary itself.
double tangential_cometric(const Domain& domain, int curve_index, double s, double nu,
                           const MetricField& metric);

// d/dnu of tangential_cometric at nu = 0 (centered differences at two steps,
// Richardson-combined).
double tangential_cometric_normal_derivative(const Domain& domain, int curve_index, double s,
                                             const MetricField& metric);

// Sampled injectivity check of the collar map over [0, nu_max].
bool collar_injective(const Domain& domain, int curve_index, double nu_max,
                      const MetricField& metric, int n_s = 128, int n_nu = 8);

// ---------------------------------------------------------------------------
// Concavity check
// ---------------------------------------------------------------------------

enum class ConcavityVerdict { StrictConcave, ConcaveDegenerate, NotConcave };

struct ConcavitySample {
    double s = 0.0;
    double margin = 0.0;  // second variation of the collar coordinate along the
                          // tangent geodesic; 1/R for a circle seen from outside
};

struct ConcavityReport {
    ConcavityVerdict verdict = ConcavityVerdict::NotConcave;
    double min_margin = 0.0;
    double threshold = 0.0;
    std::vector<ConcavitySample> samples;
};

ConcavityReport check_a1_concavity(const Domain& domain, const BoundaryRegion& region,
                                   const MetricField& metric, int n_samples,
                                   double threshold = 1e-6);

}  // namespace sidewise

#endif
