#pragma once

#include "shapestab/synthesis.hpp"

#include <string>

namespace shapestab {

struct PhaseFlow {
    Vec qdot;
    Vec pdot;
};

/// Closed-loop vector field: qdot^i = H^ij(q) p_j and
/// pdot_i = -1/2 dH^jk/dq^i p_j p_k - dh_i + y_i(q, p). The control enters
/// the momentum equation only. Throws ChartDomainError outside the box.
PhaseFlow closed_loop_field(const MechanicalModel& model, const ControlLaw& law,
                            const Vec& q, const Vec& p);

/// Fixed-step trajectory with per-step diagnostics. Times are k * dt.
struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<CotangentState> states;
    std::vector<double> H_vals;
    std::vector<double> Hhat_vals;
    std::vector<double> mu_vals;
    /// Largest single-step increase of the shaped energy seen anywhere.
    double max_decrease_violation = 0.0;
    bool aborted = false;
    std::string abort_reason;
    bool converged = false;
    double final_distance = std::numeric_limits<double>::quiet_NaN();

    std::size_t size() const { return times.size(); }
    double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
};

/// Classical fixed-step fourth-order integration of the closed loop from x0
/// over [0, T]. Deterministic; aborts (keeping the valid prefix) when the
/// state leaves the chart box or turns non-finite.
TrajectoryRecord integrate(const MechanicalModel& model, const ControlLaw& law,
                           const CotangentState& x0, double dt, double T);

struct MonitorReport {
    bool pass = false;
    double step_tolerance = 0.0;
    double rate_tolerance = 0.0;
    /// Largest per-step increase of the shaped energy.
    double max_step_increase = 0.0;
    /// Largest pointwise gap between the centered discrete rate of the
    /// shaped energy and the negated decrease rate.
    double max_rate_mismatch = 0.0;
    long first_violation = -1;
};

/// Checks that the shaped energy never rises by more than step_tol per step
/// and that its centered difference quotient tracks -mu pointwise within
/// max(rate_tol, dt^2 * s), where s is the third-derivative scale of the
/// shaped energy estimated from third differences of the record.
MonitorReport lyapunov_monitor(const TrajectoryRecord& record, double step_tol = 1e-8,
                               double rate_tol = 1e-6);

/// True iff the final state lies within radius of (q*, 0) in the Euclidean
/// chart norm; stores the flag and distance on the record.
bool convergence_check(TrajectoryRecord& record, const Equilibrium& e, double radius);

/// CSV serialization: header t,q1..qn,p1..pn,H,Hhat,mu then one row per
/// step, every value printed with full double precision.
void write_trajectory_csv(const TrajectoryRecord& record, int n, const std::string& path);

}  // namespace shapestab
