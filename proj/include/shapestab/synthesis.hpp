#pragma once

#include "shapestab/matching.hpp"

namespace shapestab {

/// Orthogonal projection of the covector alpha onto the actuation span at q,
/// orthogonality taken in the bilinear form a^T Hhat(q) b of the shaped
/// cometric. Idempotent; alpha - P alpha lies in the complement subbundle.
Vec project_W(const MechanicalModel& model, const ShapingCandidate& candidate, const Vec& q,
              const Vec& alpha);

/// Shaped pairing b_hat(a, b) = a^T Hhat(q) b.
double bhat_pairing(const ShapingCandidate& candidate, const Vec& q, const Vec& a,
                    const Vec& b);

/// Trilinear mismatch tensor of the two kinetic terms,
///   Upsilon(a1, a2, a3) = <Bbhat(a1,a2), H a3> - <Bb(a1,a2), Hhat a3>,
/// with the bilinear base derivatives recovered from the quadratic ones by
/// polarization. Symmetric in its first two arguments.
double upsilon(const MechanicalModel& model, const ShapingCandidate& candidate,
               const Connection& conn, const Vec& q, const Vec& a1, const Vec& a2,
               const Vec& a3);

/// Optional tensors entering the gyroscopic construction. A is trilinear on
/// W x W x What and antisymmetric in its first two slots; B is trilinear on
/// W x W x W, symmetric in its first two slots and zero on the diagonal.
/// Null members mean zero.
struct GyroSpec {
    std::function<double(const Vec& q, const Vec&, const Vec&, const Vec&)> A;
    std::function<double(const Vec& q, const Vec&, const Vec&, const Vec&)> B;

    static GyroSpec zero() { return {}; }
};

/// Evaluates the gyroscopic tensor by splitting every argument into its
/// actuated and complement components and applying the case table
/// multilinearly. Symmetric in the first two slots; vanishes on the total
/// diagonal whenever the candidate satisfies the kinetic condition.
double gyro_eval(const MechanicalModel& model, const ShapingCandidate& candidate,
                 const Connection& conn, const GyroSpec& spec, const Vec& q, const Vec& a1,
                 const Vec& a2, const Vec& a3);

/// The gyroscopic force covector: component i is the tensor evaluated at
/// (alpha, alpha, Hhat^-1 e_i). Does no work against the shaped energy.
Vec gyro_force(const MechanicalModel& model, const ShapingCandidate& candidate,
               const Connection& conn, const GyroSpec& spec, const Vec& q, const Vec& p);

/// Dissipation data: the damping direction xi (a covector field with values
/// in the actuation span; by default the first actuation column, normalized)
/// and the decrease rate mu (by default b_hat(P alpha, P alpha)).
struct DissipationSpec {
    std::function<Vec(const Vec& q)> xi;  // null: first actuation column, normalized
    std::function<double(const Vec& q, const Vec& p)> mu_custom;  // null: default rate

    Vec xi_at(const MechanicalModel& model, const Vec& q) const;
    double mu(const MechanicalModel& model, const ShapingCandidate& candidate, const Vec& q,
              const Vec& p) const;
};

/// Smooth dissipative force. For the default rate this is the closed form
///   z_d = -b_hat(Pa, Pa) xi - (1 - b_hat(xi, Pa)) Pa,
/// which satisfies b_hat(z_d, alpha) = -mu(alpha), lies in the actuation
/// span, and vanishes at p = 0.
Vec dissipative_force(const DissipationSpec& spec, const ShapingCandidate& candidate,
                      const MechanicalModel& model, const Vec& q, const Vec& p);

/// Direct quotient evaluation
///   z_d = x - (b_hat(x, Pa) + mu) / b_hat(Pa, Pa) Pa,  x = -mu xi.
/// Defined only where P alpha is nonzero; kept as an independent route for
/// cross-checks. Throws RankError when |b_hat(Pa, Pa)| is below floor.
Vec dissipative_force_raw(const DissipationSpec& spec, const ShapingCandidate& candidate,
                          const MechanicalModel& model, const Vec& q, const Vec& p,
                          double floor = 1e-14);

struct SynthesisOptions {
    bool enforce_matching = true;  // sample the residuals and refuse on failure
    int matching_samples = 40;
    double matching_tol = 1e-9;
    std::uint64_t matching_seed = 0x5eed;
    bool fallback_to_smooth = true;  // single-actuator law near its singular set
};

/// A state feedback producing an actuation covector, together with the
/// shaped energy and decrease rate it was built for.
struct ControlLaw {
    enum class Route { CH, LCB, SingleActuator, Zero };

    Route route = Route::Zero;
    std::function<Vec(const Vec& q, const Vec& p)> y;
    std::function<double(const Vec& q, const Vec& p)> shaped_energy;
    std::function<double(const Vec& q, const Vec& p)> mu;
};

/// Energy-shaping route: y = z_d + z_g - Hhat^-1 H BHhat + BH with the base
/// derivatives taken in the given torsion-free connection. Refuses to build
/// when the candidate fails the sampled matching check (the law would leave
/// the actuation span).
ControlLaw control_CH(const MechanicalModel& model, const ShapingCandidate& candidate,
                      const GyroSpec& gyro, const DissipationSpec& diss,
                      const Connection& conn, const SynthesisOptions& opts = {});

/// Constraint-force route: solves for the complement component z_perp from
/// the (n-m)-dimensional system b_hat(z_perp, sigma_k) = -Upsilon(a, a,
/// sigma_k), takes the actuated component through the smooth dissipative and
/// gyroscopic construction, and assembles y = z_par - z_perp - Hhat^-1 H
/// BHhat + BH.
ControlLaw control_LCB(const MechanicalModel& model, const ShapingCandidate& candidate,
                       const DissipationSpec& diss, const Connection& conn,
                       const SynthesisOptions& opts = {});

/// Single-actuator closed form
///   y = -(mu + bracket) / <xi, Hhat p> xi,
/// used where the denominator exceeds 1e-8 |xi| |Hhat p|; elsewhere the
/// smooth route takes over (or an error is raised when the fallback is
/// disabled).
ControlLaw single_actuator_control(const MechanicalModel& model,
                                   const ShapingCandidate& candidate,
                                   const DissipationSpec& diss, const Connection& conn,
                                   const SynthesisOptions& opts = {});

/// Open loop: y = 0, with the plant energy monitored and zero rate.
ControlLaw zero_control(const MechanicalModel& model);

struct EquivalenceReport {
    bool pass = false;
    double tolerance = 0.0;
    /// sup |y_CH - y_LCB| over the sample, CH built with zero gyro tensors.
    double sup_law_difference = 0.0;
    /// Violations of the dissipative conditions by the force reconstructed
    /// from the constraint route: decrease identity and actuated-span
    /// membership.
    double szd_max_violation = 0.0;
    double reconstruction_difference = 0.0;
    int samples = 0;
    Vec witness_q;
    Vec witness_p;
};

/// Builds the constraint-route law, reads its fiber map back, splits off the
/// gyroscopic part prescribed by the equivalence construction, checks the
/// remainder satisfies the dissipative conditions, reassembles the shaping
/// route from those parts, and compares both laws pointwise over the sample.
EquivalenceReport verify_equivalence(const MechanicalModel& model,
                                     const ShapingCandidate& candidate,
                                     const DissipationSpec& diss, const Connection& conn,
                                     const StateSampler& sampler, double tol = 1e-9);

}  // namespace shapestab
