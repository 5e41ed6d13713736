#pragma once

#include "shapestab/model.hpp"

#include <utility>

namespace shapestab {

/// Basis of the complement subbundle at q: the momenta p with
/// Hhat(q) p annihilating every actuation covector. Columns are linearly
/// independent; there are n - m of them.
struct WhatBasis {
    Vec q;
    Mat columns;  // n x (n - m)

    int count() const { return static_cast<int>(columns.cols()); }
};

/// Computes the complement basis by extracting the null space of the
/// transposed actuation matrix (singular values below 1e-10 of the largest)
/// and mapping it through Hhat(q)^-1.
WhatBasis what_basis(const MechanicalModel& model, const ShapingCandidate& candidate,
                     const Vec& q);

/// Cubic-in-p part of the bracket mismatch:
///   (dHhat^ij/dq^k H^kl - dH^ij/dq^k Hhat^kl) p_i p_j p_l.
double kinetic_residual(const MechanicalModel& model, const ShapingCandidate& candidate,
                        const Vec& q, const Vec& p);

/// Linear-in-p part:
///   (dhhat/dq^k H^kl - dh/dq^k Hhat^kl) p_l.
double potential_residual(const MechanicalModel& model, const ShapingCandidate& candidate,
                          const Vec& q, const Vec& p);

/// Seeded sampling plan: configurations uniform over the box, momenta from
/// the sphere of the given radius.
struct StateSampler {
    Box box;
    double momentum_radius = 1.0;
    std::uint64_t seed = 0;
    int count = 100;

    static StateSampler for_model(const MechanicalModel& model, std::uint64_t seed,
                                  int count) {
        return StateSampler{model.chart_box, model.momentum_radius, seed, count};
    }

    std::vector<CotangentState> states() const {
        Rng rng(seed);
        std::vector<CotangentState> out;
        out.reserve(count);
        const int n = static_cast<int>(box.lo.size());
        for (int i = 0; i < count; ++i) {
            Vec q = rng.in_box(box);
            Vec p = rng.sphere(n, momentum_radius);
            out.emplace_back(std::move(q), std::move(p));
        }
        return out;
    }
};

struct MatchingReport {
    bool pass = false;
    double tolerance = 0.0;
    double sup_kinetic_residual = 0.0;
    double sup_potential_residual = 0.0;
    /// Largest |bracket| seen on the complement samples; bounded by the
    /// residual sups through the cubic/linear split.
    double sup_bracket = 0.0;
    /// Worst disagreement between the residuals and their reconstruction
    /// from bracket values at scaled momenta.
    double lambda_split_max_error = 0.0;
    int samples = 0;
    std::uint64_t seed = 0;
    Vec worst_q;
    Vec worst_p;
};

/// Evaluates both residuals and the full bracket on the complement basis and
/// on random complement combinations over sampled configurations. Each
/// bracket value is split into its cubic and linear parts by evaluating at
/// momenta p and 2p; the parts must reproduce the residuals.
MatchingReport matching_report(const MechanicalModel& model,
                               const ShapingCandidate& candidate,
                               const StateSampler& sampler, double tol = 1e-9);

/// Number of scalar equations in the two formulations of the kinetic
/// condition: (n(n+1)(n-m)/2, (n-m+2)(n-m+1)(n-m)/6).
std::pair<long, long> count_equations(int n, int m);

}  // namespace shapestab
