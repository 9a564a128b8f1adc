#ifndef SIDEWISE_RAYFLOW_HPP
#define SIDEWISE_RAYFLOW_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sidewise/symbols.hpp"

namespace sidewise {

struct ToleranceSet {
    double ode = 1e-10;        // local error per integrator step
    double glancing = 1e-7;    // |r0| band (normalized) for glancing verdicts
    double tangency = 1e-7;    // boundary approach treated as a touch
    double boundary = 1e-10;   // event location polish on |signed distance|
    double min_dwell = 1e-6;   // minimum time between boundary events
    double dt_min = 1e-12;
    double dt_max = 0.05;
    double near_glancing_factor = 10.0;  // hyperbolic hits with r0 <= factor*glancing are flagged
    double concavity_threshold = 1e-6;
};

enum class RayRegime { Interior, Gliding };

struct RaySample {
    double t = 0.0;
    Vec2 x;
    double tau = 1.0;
    Vec2 xi;
    RayRegime regime = RayRegime::Interior;
};

enum class RayEventKind {
    HyperbolicReflection,
    DiffractiveTouch,
    GlidingEntry,
    GlidingExit,
    RegionHit,
    TimeExpired,
};

const char* ray_event_name(RayEventKind k);

// dx/dt of the unit-rate flow: -A(x) xi / tau.
Vec2 metric_velocity(const MetricField& m, const PhasePoint& p);

struct RayEvent {
    RayEventKind kind = RayEventKind::TimeExpired;
    double t = 0.0;
    BoundaryCovector where;
    Classification cls;
    RegionLabel region = RegionLabel::Custom;
    int region_index = -1;
    bool flagged = false;  // near-glancing hyperbolic interaction
};

struct RayArc {
    RayRegime regime = RayRegime::Interior;
    std::vector<RaySample> samples;
};

struct RayFailure {
    Errc code = Errc::Config;
    std::string message;
    double t = 0.0;
};

struct RayPath {
    std::vector<RayArc> arcs;
    std::vector<RayEvent> events;
    std::optional<RayFailure> failure;
    double end_time = 0.0;
    double max_symbol_residual = 0.0;    // max |p_A| seen along the path
    double max_projection_shift = 0.0;   // max per-step renormalization shift

    bool ok() const { return !failure.has_value(); }
    // Flat view of all samples in time order.
    std::vector<RaySample> flatten() const;
};

// Launch descriptor: an interior characteristic point, or a boundary covector
// with a lift choice.
struct InitialCondition {
    enum class Kind { Interior, Boundary } kind = Kind::Interior;
    PhasePoint phase;      // Kind::Interior
    BoundaryCovector bc;   // Kind::Boundary
    int lift_sign = -1;    // normal covector sign for hyperbolic boundary starts
};

// Advance the interior Hamiltonian flow (no boundary handling) for a time
// span; unit-rate physical time, renormalized and projected onto the
// characteristic set after each step.
struct InteriorResult {
    PhasePoint state;
    std::vector<RaySample> samples;
    double max_symbol_residual = 0.0;
    double max_projection_shift = 0.0;
};
InteriorResult integrate_interior(const PhasePoint& start, const MetricField& metric,
                                  double t_span, const ToleranceSet& tol);

// First boundary interaction along a densely sampled interior arc.
struct BoundaryEventHit {
    double t = 0.0;
    BoundaryCovector covector;
    double xi_n = 0.0;
    bool tangential = false;  // located as a grazing minimum rather than a crossing
    PhasePoint state;         // phase state at the event time
};
std::optional<BoundaryEventHit> detect_boundary_event(std::span<const RaySample> arc,
                                                      const Domain& domain,
                                                      const MetricField& metric,
                                                      const ToleranceSet& tol);

// Specular reflection at a hyperbolic boundary point: tangential component and
// tau unchanged, collar-normal component negated.
PhasePoint reflect_hyperbolic(const BoundaryCovector& b, double incoming_xi_n,
                              const Domain& domain, const MetricField& metric,
                              const ToleranceSet& tol);

// Boundary-following motion at strictly gliding points. Advances at unit
// metric speed along the wall until dt_max elapses, the gliding condition
// fails (exit), or the trace cap is reached.
struct GlidingState {
    int curve = 0;
    double s = 0.0;
    double t = 0.0;
    double tau = 1.0;
    int direction = +1;  // sign of ds/dt
};
struct GlidingResult {
    GlidingState state;
    std::vector<RaySample> samples;
    std::vector<double> s_values;  // arc-length coordinate per sample
    bool exited = false;  // gliding condition lost (boundary turned concave)
};
GlidingResult gliding_step(const GlidingState& start, const Domain& domain,
                           const MetricField& metric, double dt_max, const ToleranceSet& tol);

// Full generalized-ray trace: interior flow, reflections, diffractive
// pass-throughs and gliding segments, with watch-region hits recorded.
RayPath trace(const InitialCondition& init, const Domain& domain, const MetricField& metric,
              double t_max, const std::vector<BoundaryRegion>& watch, const ToleranceSet& tol);

// Export: "t x1 x2 tau xi1 xi2 regime" per sample plus an events block.
std::string ray_path_to_text(const RayPath& path);

}  // namespace sidewise

#endif
