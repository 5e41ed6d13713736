#include "shapestab/synthesis.hpp"

#include "shapestab/tensor_core.hpp"

#include <cmath>

namespace shapestab {

namespace {

// Everything a pointwise synthesis formula needs at one configuration,
// evaluated once and shared across the terms of a law evaluation.
struct EvalCtx {
    int n = 0;
    int m = 0;
    Vec q;
    Mat H, Hh;
    Tensor3 dH, dHh;
    Vec dh, dhh;
    Tensor3 gamma;
    bool flat = true;
    Mat Xi;  // n x m actuation columns
    Eigen::ColPivHouseholderQR<Mat> gram_qr;  // of Xi^T Hh Xi
    Eigen::ColPivHouseholderQR<Mat> hh_qr;    // of Hh

    EvalCtx(const MechanicalModel& model, const ShapingCandidate& cand,
            const Connection& conn, const Vec& q_in) {
        n = model.n;
        m = model.m;
        q = q_in;
        H = model.kinetic.A_at(q);
        Hh = cand.kinetic_hat.A_at(q);
        dH = model.kinetic.dA_at(q);
        dHh = cand.kinetic_hat.dA_at(q);
        dh = model.kinetic.df_at(q);
        dhh = cand.kinetic_hat.df_at(q);
        flat = conn.flat;
        if (!flat) gamma = conn.eval(q);
        Xi = model.actuation_at(q);
        if (m > 0) {
            gram_qr.compute(Xi.transpose() * Hh * Xi);
            gram_qr.setThreshold(1e-10);
        }
        hh_qr.compute(Hh);
        hh_qr.setThreshold(1e-10);
        if (hh_qr.rank() < n) throw RankError("shaped cometric singular at sampled q");
    }

    double bhat(const Vec& a, const Vec& b) const { return a.dot(Hh * b); }

    Vec project(const Vec& alpha) const {
        if (m == 0) return Vec::Zero(n);
        if (gram_qr.rank() < m)
            throw RankError("Gram matrix of actuation columns is rank deficient");
        return Xi * gram_qr.solve(Xi.transpose() * (Hh * alpha));
    }

    // Base derivative of the quadratic form 1/2 p^T A p.
    Vec quad_base(const Mat& A, const Tensor3& dA, const Vec& p) const {
        Vec out(n);
        for (int i = 0; i < n; ++i) out[i] = 0.5 * p.dot(dA[i] * p);
        if (!flat) {
            const Vec u = A * p;
            for (int k = 0; k < n; ++k) out += p[k] * (gamma[k] * u);
        }
        return out;
    }

    // Bilinear base derivative by polarization of the quadratic one.
    Vec quad_base_polarized(const Mat& A, const Tensor3& dA, const Vec& a1,
                            const Vec& a2) const {
        return 0.5 * (quad_base(A, dA, a1 + a2) - quad_base(A, dA, a1) - quad_base(A, dA, a2));
    }

    double upsilon(const Vec& a1, const Vec& a2, const Vec& a3) const {
        const Vec bb_hat = quad_base_polarized(Hh, dHh, a1, a2);
        const Vec bb = quad_base_polarized(H, dH, a1, a2);
        return bb_hat.dot(H * a3) - bb.dot(Hh * a3);
    }

    double gyro(const GyroSpec& spec, const Vec& a1, const Vec& a2, const Vec& a3) const {
        const Vec g1 = project(a1), g2 = project(a2), g3 = project(a3);
        const Vec s1 = a1 - g1, s2 = a2 - g2, s3 = a3 - g3;

        // Complement part of the third slot: Upsilon of the full first two.
        double total = upsilon(a1, a2, s3);
        // Actuated part of the third slot, split over the first two.
        total -= 0.5 * (upsilon(g1, g3, s2) + upsilon(g2, g3, s1));
        if (spec.A) total -= 0.5 * (spec.A(q, g1, g3, s2) + spec.A(q, g2, g3, s1));
        total -= upsilon(g3, s2, s1) + upsilon(g3, s1, s2);
        if (spec.B) total += spec.B(q, g1, g2, g3);
        return total;
    }

    Vec gyro_force(const GyroSpec& spec, const Vec& p) const {
        const Mat Hh_inv_cols = hh_qr.solve(Mat::Identity(n, n));
        Vec z = Vec::Zero(n);
        for (int i = 0; i < n; ++i) z[i] = gyro(spec, p, p, Hh_inv_cols.col(i));
        return z;
    }

    Vec xi_of(const DissipationSpec& spec) const {
        if (spec.xi) return spec.xi(q);
        if (m == 0) return Vec::Zero(n);
        Vec col = Xi.col(0);
        return col / col.norm();
    }

    double mu_of(const DissipationSpec& spec, const Vec& p) const {
        if (spec.mu_custom) return spec.mu_custom(q, p);
        const Vec Pa = project(p);
        return bhat(Pa, Pa);
    }

    Vec dissipative(const DissipationSpec& spec, const Vec& p) const {
        const Vec Pa = project(p);
        const Vec xi = xi_of(spec);
        if (!spec.mu_custom) {
            const double mu = bhat(Pa, Pa);
            return -mu * xi - (1.0 - bhat(xi, Pa)) * Pa;
        }
        const double mu = spec.mu_custom(q, p);
        const double denom = bhat(Pa, Pa);
        if (std::abs(denom) < 1e-14) return Vec::Zero(n);  // rate must vanish here
        return -mu * (xi + (1.0 - bhat(xi, Pa)) / denom * Pa);
    }

    // Shaping part of a law: -Hhat^-1 H BHhat + BH with full base derivatives.
    Vec shaping_term(const Vec& p) const {
        Vec BH = quad_base(H, dH, p) + dh;
        Vec BHh = quad_base(Hh, dHh, p) + dhh;
        return BH - hh_qr.solve(H * BHh);
    }
};

void enforce_matching_or_throw(const MechanicalModel& model, const ShapingCandidate& cand,
                               const SynthesisOptions& opts, const char* route) {
    if (!opts.enforce_matching) return;
    const auto sampler =
        StateSampler::for_model(model, opts.matching_seed, opts.matching_samples);
    const MatchingReport rep = matching_report(model, cand, sampler, opts.matching_tol);
    if (!rep.pass)
        throw MatchingError(std::string(route) + ": candidate '" + cand.name +
                            "' fails matching (sup kinetic " +
                            std::to_string(rep.sup_kinetic_residual) + ", sup potential " +
                            std::to_string(rep.sup_potential_residual) +
                            "); the law would leave the actuation span");
}

}  // namespace

Vec project_W(const MechanicalModel& model, const ShapingCandidate& candidate, const Vec& q,
              const Vec& alpha) {
    if (alpha.size() != model.n) throw DimensionError("project_W: covector dimension mismatch");
    return EvalCtx(model, candidate, Connection::flat_connection(model.n), q).project(alpha);
}

double bhat_pairing(const ShapingCandidate& candidate, const Vec& q, const Vec& a,
                    const Vec& b) {
    return a.dot(candidate.kinetic_hat.A_at(q) * b);
}

double upsilon(const MechanicalModel& model, const ShapingCandidate& candidate,
               const Connection& conn, const Vec& q, const Vec& a1, const Vec& a2,
               const Vec& a3) {
    if (a1.size() != model.n || a2.size() != model.n || a3.size() != model.n)
        throw DimensionError("upsilon: covector dimension mismatch");
    return EvalCtx(model, candidate, conn, q).upsilon(a1, a2, a3);
}

double gyro_eval(const MechanicalModel& model, const ShapingCandidate& candidate,
                 const Connection& conn, const GyroSpec& spec, const Vec& q, const Vec& a1,
                 const Vec& a2, const Vec& a3) {
    return EvalCtx(model, candidate, conn, q).gyro(spec, a1, a2, a3);
}

Vec gyro_force(const MechanicalModel& model, const ShapingCandidate& candidate,
               const Connection& conn, const GyroSpec& spec, const Vec& q, const Vec& p) {
    return EvalCtx(model, candidate, conn, q).gyro_force(spec, p);
}

Vec DissipationSpec::xi_at(const MechanicalModel& model, const Vec& q) const {
    if (xi) return xi(q);
    if (model.m == 0) return Vec::Zero(model.n);
    Vec col = model.actuation_at(q).col(0);
    return col / col.norm();
}

double DissipationSpec::mu(const MechanicalModel& model, const ShapingCandidate& candidate,
                           const Vec& q, const Vec& p) const {
    if (mu_custom) return mu_custom(q, p);
    const Vec Pa = project_W(model, candidate, q, p);
    return bhat_pairing(candidate, q, Pa, Pa);
}

Vec dissipative_force(const DissipationSpec& spec, const ShapingCandidate& candidate,
                      const MechanicalModel& model, const Vec& q, const Vec& p) {
    return EvalCtx(model, candidate, Connection::flat_connection(model.n), q)
        .dissipative(spec, p);
}

Vec dissipative_force_raw(const DissipationSpec& spec, const ShapingCandidate& candidate,
                          const MechanicalModel& model, const Vec& q, const Vec& p,
                          double floor) {
    const EvalCtx ctx(model, candidate, Connection::flat_connection(model.n), q);
    const Vec Pa = ctx.project(p);
    const double denom = ctx.bhat(Pa, Pa);
    if (std::abs(denom) < floor)
        throw RankError("dissipative_force_raw: P alpha vanishes, quotient undefined");
    const double mu = ctx.mu_of(spec, p);
    const Vec x = -mu * ctx.xi_of(spec);
    return x - (ctx.bhat(x, Pa) + mu) / denom * Pa;
}

ControlLaw control_CH(const MechanicalModel& model, const ShapingCandidate& candidate,
                      const GyroSpec& gyro, const DissipationSpec& diss,
                      const Connection& conn, const SynthesisOptions& opts) {
    enforce_matching_or_throw(model, candidate, opts, "control_CH");
    ControlLaw law;
    law.route = ControlLaw::Route::CH;
    law.y = [model, candidate, gyro, diss, conn](const Vec& q, const Vec& p) {
        const EvalCtx ctx(model, candidate, conn, q);
        return Vec(ctx.dissipative(diss, p) + ctx.gyro_force(gyro, p) +
                   ctx.shaping_term(p));
    };
    law.shaped_energy = [candidate](const Vec& q, const Vec& p) {
        return candidate.kinetic_hat.value({q, p});
    };
    law.mu = [model, candidate, diss](const Vec& q, const Vec& p) {
        return diss.mu(model, candidate, q, p);
    };
    return law;
}

ControlLaw control_LCB(const MechanicalModel& model, const ShapingCandidate& candidate,
                       const DissipationSpec& diss, const Connection& conn,
                       const SynthesisOptions& opts) {
    enforce_matching_or_throw(model, candidate, opts, "control_LCB");
    ControlLaw law;
    law.route = ControlLaw::Route::LCB;
    law.y = [model, candidate, diss, conn](const Vec& q, const Vec& p) {
        const EvalCtx ctx(model, candidate, conn, q);

        // Complement component from the (n-m)-dimensional linear system
        // bhat(z_perp, sigma_k) = -Upsilon(alpha, alpha, sigma_k).
        Vec z_perp = Vec::Zero(model.n);
        const WhatBasis basis = what_basis(model, candidate, q);
        if (basis.count() > 0) {
            Mat gram(basis.count(), basis.count());
            Vec rhs(basis.count());
            for (int j = 0; j < basis.count(); ++j) {
                for (int k = 0; k < basis.count(); ++k)
                    gram(j, k) = ctx.bhat(basis.columns.col(j), basis.columns.col(k));
                rhs[j] = -ctx.upsilon(p, p, basis.columns.col(j));
            }
            Eigen::ColPivHouseholderQR<Mat> qr(gram);
            qr.setThreshold(1e-10);
            if (qr.rank() < basis.count())
                throw RankError("control_LCB: Gram matrix of the complement basis singular");
            z_perp = basis.columns * qr.solve(rhs);
        }

        // Actuated component through the smooth dissipative-plus-gyroscopic
        // construction.
        const Vec z_gyro = ctx.gyro_force(GyroSpec::zero(), p);
        const Vec z_par = ctx.dissipative(diss, p) + ctx.project(z_gyro);

        return Vec(z_par - z_perp + ctx.shaping_term(p));
    };
    law.shaped_energy = [candidate](const Vec& q, const Vec& p) {
        return candidate.kinetic_hat.value({q, p});
    };
    law.mu = [model, candidate, diss](const Vec& q, const Vec& p) {
        return diss.mu(model, candidate, q, p);
    };
    return law;
}

ControlLaw single_actuator_control(const MechanicalModel& model,
                                   const ShapingCandidate& candidate,
                                   const DissipationSpec& diss, const Connection& conn,
                                   const SynthesisOptions& opts) {
    if (model.m != 1)
        throw DimensionError("single_actuator_control: model has m = " +
                             std::to_string(model.m) + ", requires exactly one actuator");
    enforce_matching_or_throw(model, candidate, opts, "single_actuator_control");

    std::function<Vec(const Vec&, const Vec&)> fallback;
    if (opts.fallback_to_smooth) {
        SynthesisOptions inner = opts;
        inner.enforce_matching = false;  // already checked above
        fallback = control_CH(model, candidate, GyroSpec::zero(), diss, conn, inner).y;
    }

    ControlLaw law;
    law.route = ControlLaw::Route::SingleActuator;
    law.y = [model, candidate, diss, fallback](const Vec& q, const Vec& p) {
        const Vec xi = diss.xi_at(model, q);
        const Vec fh = candidate.kinetic_hat.A_at(q) * p;
        const double denom = xi.dot(fh);
        if (std::abs(denom) > 1e-8 * xi.norm() * fh.norm() && denom != 0.0) {
            const double mu = diss.mu(model, candidate, q, p);
            const double br =
                poisson_bracket_simple(model.kinetic, candidate.kinetic_hat, {q, p});
            return Vec(-(mu + br) / denom * xi);
        }
        if (!fallback)
            throw RankError("single_actuator_control: denominator below threshold and no "
                            "fallback configured");
        return fallback(q, p);
    };
    law.shaped_energy = [candidate](const Vec& q, const Vec& p) {
        return candidate.kinetic_hat.value({q, p});
    };
    law.mu = [model, candidate, diss](const Vec& q, const Vec& p) {
        return diss.mu(model, candidate, q, p);
    };
    return law;
}

ControlLaw zero_control(const MechanicalModel& model) {
    ControlLaw law;
    law.route = ControlLaw::Route::Zero;
    const int n = model.n;
    law.y = [n](const Vec&, const Vec&) { return Vec(Vec::Zero(n)); };
    law.shaped_energy = [kin = model.kinetic](const Vec& q, const Vec& p) {
        return kin.value({q, p});
    };
    law.mu = [](const Vec&, const Vec&) { return 0.0; };
    return law;
}

EquivalenceReport verify_equivalence(const MechanicalModel& model,
                                     const ShapingCandidate& candidate,
                                     const DissipationSpec& diss, const Connection& conn,
                                     const StateSampler& sampler, double tol) {
    const ControlLaw lcb = control_LCB(model, candidate, diss, conn);
    const ControlLaw ch = control_CH(model, candidate, GyroSpec::zero(), diss, conn);

    EquivalenceReport report;
    report.tolerance = tol;

    auto update_worst = [&](double v, const Vec& q, const Vec& p) {
        if (v > std::max({report.sup_law_difference, report.szd_max_violation,
                          report.reconstruction_difference})) {
            report.witness_q = q;
            report.witness_p = p;
        }
    };

    for (const CotangentState& s : sampler.states()) {
        ++report.samples;
        const Vec y_lcb = lcb.y(s.q, s.p);
        const Vec y_ch = ch.y(s.q, s.p);
        const double law_diff = (y_ch - y_lcb).cwiseAbs().maxCoeff();
        update_worst(law_diff, s.q, s.p);
        report.sup_law_difference = std::max(report.sup_law_difference, law_diff);

        // Read the fiber map z back out of the constraint-route law, split
        // off the gyroscopic part prescribed by the equivalence construction,
        // and check the remainder against the dissipative conditions.
        const EvalCtx ctx(model, candidate, conn, s.q);
        const Vec z = y_lcb - ctx.shaping_term(s.p);
        const Vec z_gyro = ctx.gyro_force(GyroSpec::zero(), s.p);
        const Vec z_d = z - z_gyro;

        const double mu = diss.mu(model, candidate, s.q, s.p);
        const double decrease_gap = std::abs(ctx.bhat(z_d, s.p) + mu);
        const double span_gap = (z_d - ctx.project(z_d)).cwiseAbs().maxCoeff();
        const Vec rest = Vec::Zero(model.n);
        const Vec z_d_rest = lcb.y(s.q, rest) - ctx.shaping_term(rest);  // z at p = 0
        const double rest_gap = z_d_rest.cwiseAbs().maxCoeff();
        const double szd = std::max({decrease_gap, span_gap, rest_gap});
        update_worst(szd, s.q, s.p);
        report.szd_max_violation = std::max(report.szd_max_violation, szd);

        const Vec y_rebuilt = z_d + z_gyro + ctx.shaping_term(s.p);
        const double rec = (y_rebuilt - y_lcb).cwiseAbs().maxCoeff();
        update_worst(rec, s.q, s.p);
        report.reconstruction_difference = std::max(report.reconstruction_difference, rec);
    }

    report.pass = report.sup_law_difference < tol && report.szd_max_violation < 1e-10 &&
                  report.reconstruction_difference < tol;
    return report;
}

}  // namespace shapestab
