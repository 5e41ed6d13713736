#include "shapestab/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace shapestab {

PhaseFlow closed_loop_field(const MechanicalModel& model, const ControlLaw& law,
                            const Vec& q, const Vec& p) {
    if (q.size() != model.n || p.size() != model.n)
        throw DimensionError("closed_loop_field: state dimension mismatch");
    if (!model.chart_box.contains(q))
        throw ChartDomainError("closed_loop_field: configuration left the chart box");

    PhaseFlow flow;
    flow.qdot = model.kinetic.A_at(q) * p;
    const Tensor3 dH = model.kinetic.dA_at(q);
    flow.pdot = -model.kinetic.df_at(q) + law.y(q, p);
    for (int i = 0; i < model.n; ++i) flow.pdot[i] -= 0.5 * p.dot(dH[i] * p);
    return flow;
}

TrajectoryRecord integrate(const MechanicalModel& model, const ControlLaw& law,
                           const CotangentState& x0, double dt, double T) {
    if (!(dt > 0.0) || !(T >= dt)) throw ConfigError("integrate: need dt > 0 and T >= dt");
    if (x0.dim() != model.n) throw DimensionError("integrate: x0 dimension mismatch");

    const long steps = std::lround(T / dt);
    TrajectoryRecord rec;
    rec.times.reserve(steps + 1);
    rec.states.reserve(steps + 1);
    rec.H_vals.reserve(steps + 1);
    rec.Hhat_vals.reserve(steps + 1);
    rec.mu_vals.reserve(steps + 1);

    auto record_state = [&](long k, const CotangentState& s) {
        rec.times.push_back(k * dt);
        rec.states.push_back(s);
        rec.H_vals.push_back(model.hamiltonian(s));
        const double hhat = law.shaped_energy(s.q, s.p);
        if (!rec.Hhat_vals.empty())
            rec.max_decrease_violation =
                std::max(rec.max_decrease_violation, hhat - rec.Hhat_vals.back());
        rec.Hhat_vals.push_back(hhat);
        rec.mu_vals.push_back(law.mu(s.q, s.p));
    };

    auto finite = [](const Vec& v) { return v.allFinite(); };

    CotangentState s = x0;
    record_state(0, s);
    for (long k = 0; k < steps; ++k) {
        try {
            const PhaseFlow k1 = closed_loop_field(model, law, s.q, s.p);
            const PhaseFlow k2 = closed_loop_field(model, law, s.q + 0.5 * dt * k1.qdot,
                                                   s.p + 0.5 * dt * k1.pdot);
            const PhaseFlow k3 = closed_loop_field(model, law, s.q + 0.5 * dt * k2.qdot,
                                                   s.p + 0.5 * dt * k2.pdot);
            const PhaseFlow k4 =
                closed_loop_field(model, law, s.q + dt * k3.qdot, s.p + dt * k3.pdot);
            s.q += dt / 6.0 * (k1.qdot + 2.0 * k2.qdot + 2.0 * k3.qdot + k4.qdot);
            s.p += dt / 6.0 * (k1.pdot + 2.0 * k2.pdot + 2.0 * k3.pdot + k4.pdot);
        } catch (const ChartDomainError& err) {
            rec.aborted = true;
            rec.abort_reason = err.what();
            break;
        }
        if (!finite(s.q) || !finite(s.p)) {
            rec.aborted = true;
            rec.abort_reason = "state turned non-finite";
            break;
        }
        if (!model.chart_box.contains(s.q)) {
            rec.aborted = true;
            rec.abort_reason = "configuration left the chart box";
            break;
        }
        record_state(k + 1, s);
    }
    return rec;
}

MonitorReport lyapunov_monitor(const TrajectoryRecord& record, double step_tol,
                               double rate_tol) {
    MonitorReport report;
    report.step_tolerance = step_tol;
    const double dt = record.dt();
    // The centered quotient carries a dt^2-scale truncation term proportional
    // to the third time derivative of the shaped energy; estimate that scale
    // from third differences of the record.
    double third_scale = 0.0;
    const auto& hh_all = record.Hhat_vals;
    for (std::size_t k = 0; k + 3 < hh_all.size(); ++k) {
        const double d3 =
            hh_all[k + 3] - 3.0 * hh_all[k + 2] + 3.0 * hh_all[k + 1] - hh_all[k];
        third_scale = std::max(third_scale, std::abs(d3) / (dt * dt * dt));
    }
    report.rate_tolerance = std::max(rate_tol, dt * dt * third_scale);
    report.pass = true;

    const auto& hh = record.Hhat_vals;
    auto flag = [&](std::size_t k) {
        const long idx = static_cast<long>(k);
        if (report.first_violation < 0 || idx < report.first_violation)
            report.first_violation = idx;
    };
    for (std::size_t k = 0; k + 1 < hh.size(); ++k) {
        const double rise = hh[k + 1] - hh[k];
        report.max_step_increase = std::max(report.max_step_increase, rise);
        if (rise > step_tol) flag(k);
    }
    for (std::size_t k = 1; k + 1 < hh.size(); ++k) {
        const double rate = (hh[k + 1] - hh[k - 1]) / (2.0 * dt);
        const double gap = std::abs(rate + record.mu_vals[k]);
        report.max_rate_mismatch = std::max(report.max_rate_mismatch, gap);
        if (gap > report.rate_tolerance) flag(k);
    }
    report.pass = report.max_step_increase <= step_tol &&
                  report.max_rate_mismatch <= report.rate_tolerance;
    return report;
}

bool convergence_check(TrajectoryRecord& record, const Equilibrium& e, double radius) {
    if (record.states.empty()) {
        record.converged = false;
        return false;
    }
    const CotangentState& last = record.states.back();
    const double dist =
        std::sqrt((last.q - e.q_star).squaredNorm() + last.p.squaredNorm());
    record.final_distance = dist;
    record.converged = !record.aborted && dist < radius;
    return record.converged;
}

void write_trajectory_csv(const TrajectoryRecord& record, int n, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("write_trajectory_csv: cannot open " + path);

    out << "t";
    for (int i = 1; i <= n; ++i) out << ",q" << i;
    for (int i = 1; i <= n; ++i) out << ",p" << i;
    out << ",H,Hhat,mu\n";

    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << ',' << buf;
    };
    for (std::size_t k = 0; k < record.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", record.times[k]);
        out << buf;
        for (int i = 0; i < n; ++i) put(record.states[k].q[i]);
        for (int i = 0; i < n; ++i) put(record.states[k].p[i]);
        put(record.H_vals[k]);
        put(record.Hhat_vals[k]);
        put(record.mu_vals[k]);
        out << '\n';
    }
}

}  // namespace shapestab
