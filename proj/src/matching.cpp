#include "shapestab/matching.hpp"

#include "shapestab/tensor_core.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace shapestab {

WhatBasis what_basis(const MechanicalModel& model, const ShapingCandidate& candidate,
                     const Vec& q) {
    if (q.size() != model.n) throw DimensionError("what_basis: q dimension mismatch");
    const int n = model.n;
    const int m = model.m;

    WhatBasis basis;
    basis.q = q;

    Mat null_cols;  // basis of the annihilator of the actuation columns
    if (m == 0) {
        null_cols = Mat::Identity(n, n);
    } else {
        const Mat Wt = model.actuation_at(q).transpose();  // m x n
        Eigen::JacobiSVD<Mat> svd(Wt, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const double thresh = 1e-10 * sv[0];
        int rank = 0;
        for (int i = 0; i < sv.size(); ++i)
            if (sv[i] > thresh) ++rank;
        if (rank != m)
            throw RankError("what_basis: actuation rank " + std::to_string(rank) +
                            " differs from m = " + std::to_string(m));
        null_cols = svd.matrixV().rightCols(n - m);
    }
    if (m == n) {
        basis.columns = Mat::Zero(n, 0);
        return basis;
    }

    const Mat Hh = candidate.kinetic_hat.A_at(q);
    Eigen::ColPivHouseholderQR<Mat> qr(Hh);
    qr.setThreshold(1e-10);
    if (qr.rank() < n) throw RankError("what_basis: shaped cometric singular at sampled q");
    basis.columns = qr.solve(null_cols);
    return basis;
}

double kinetic_residual(const MechanicalModel& model, const ShapingCandidate& candidate,
                        const Vec& q, const Vec& p) {
    if (q.size() != model.n || p.size() != model.n)
        throw DimensionError("kinetic_residual: dimension mismatch");
    const QuadBasicFn& kin = model.kinetic;
    const QuadBasicFn& kin_hat = candidate.kinetic_hat;
    const Vec u = kin.A_at(q) * p;
    const Vec uh = kin_hat.A_at(q) * p;
    const Tensor3 dH = kin.dA_at(q);
    const Tensor3 dHh = kin_hat.dA_at(q);
    double r = 0.0;
    for (int k = 0; k < model.n; ++k)
        r += p.dot(dHh[k] * p) * u[k] - p.dot(dH[k] * p) * uh[k];
    return r;
}

double potential_residual(const MechanicalModel& model, const ShapingCandidate& candidate,
                          const Vec& q, const Vec& p) {
    if (q.size() != model.n || p.size() != model.n)
        throw DimensionError("potential_residual: dimension mismatch");
    const Vec u = model.kinetic.A_at(q) * p;
    const Vec uh = candidate.kinetic_hat.A_at(q) * p;
    return candidate.kinetic_hat.df_at(q).dot(u) - model.kinetic.df_at(q).dot(uh);
}

MatchingReport matching_report(const MechanicalModel& model,
                               const ShapingCandidate& candidate,
                               const StateSampler& sampler, double tol) {
    MatchingReport report;
    report.tolerance = tol;
    report.seed = sampler.seed;

    Rng rng(sampler.seed);
    const int combos_per_q = 3;

    auto consider = [&](const Vec& q, const Vec& p) {
        ++report.samples;
        const double kin = kinetic_residual(model, candidate, q, p);
        const double pot = potential_residual(model, candidate, q, p);
        if (std::max(std::abs(kin), std::abs(pot)) >
            std::max(report.sup_kinetic_residual, report.sup_potential_residual)) {
            report.worst_q = q;
            report.worst_p = p;
        }
        report.sup_kinetic_residual = std::max(report.sup_kinetic_residual, std::abs(kin));
        report.sup_potential_residual =
            std::max(report.sup_potential_residual, std::abs(pot));

        // Bracket values at p and 2p determine the cubic and linear parts:
        // b(s) = c s^3 + l s. The parts must equal half the kinetic residual
        // and the potential residual.
        const CotangentState s1{q, p};
        const CotangentState s2{q, Vec(2.0 * p)};
        const double b1 = poisson_bracket_simple(model.kinetic, candidate.kinetic_hat, s1);
        const double b2 = poisson_bracket_simple(model.kinetic, candidate.kinetic_hat, s2);
        report.sup_bracket = std::max(report.sup_bracket, std::abs(b1));
        const double cubic = (b2 - 2.0 * b1) / 6.0;
        const double linear = (8.0 * b1 - b2) / 6.0;
        const double split_err =
            std::max(std::abs(cubic - 0.5 * kin), std::abs(linear - pot));
        report.lambda_split_max_error = std::max(report.lambda_split_max_error, split_err);
    };

    for (int i = 0; i < sampler.count; ++i) {
        const Vec q = rng.in_box(sampler.box);
        const WhatBasis basis = what_basis(model, candidate, q);
        for (int j = 0; j < basis.count(); ++j) consider(q, basis.columns.col(j));
        if (basis.count() > 0) {
            for (int j = 0; j < combos_per_q; ++j) {
                const Vec c = rng.sphere(basis.count(), sampler.momentum_radius);
                consider(q, basis.columns * c);
            }
        }
    }

    report.pass = std::max(report.sup_kinetic_residual, report.sup_potential_residual) < tol;
    return report;
}

std::pair<long, long> count_equations(int n, int m) {
    if (n <= 0 || m <= 0 || m > n)
        throw DimensionError("count_equations: need 1 <= m <= n");
    const long nm = n - m;
    const long traditional = static_cast<long>(n) * (n + 1) * nm / 2;
    const long simple = nm * (nm + 1) * (nm + 2) / 6;
    return {traditional, simple};
}

}  // namespace shapestab
