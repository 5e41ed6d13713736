#pragma once

#include "shapestab/types.hpp"

#include <map>
#include <optional>

namespace shapestab {

/// An underactuated mechanical system on a single chart. The kinetic member
/// holds the cometric field H(q) (inverse mass matrix, symmetric positive
/// definite) and the potential h(q); actuation(q) is an n x m matrix whose
/// columns span the codistribution along which control covectors may act.
struct MechanicalModel {
    std::string name;
    int n = 0;
    int m = 0;
    QuadBasicFn kinetic;
    std::function<Mat(const Vec&)> actuation;
    Box chart_box;
    double momentum_radius = 1.0;

    Mat actuation_at(const Vec& q) const {
        if (m == 0) return Mat::Zero(n, 0);
        Mat W = actuation(q);
        if (W.rows() != n || W.cols() != m)
            throw DimensionError("actuation matrix has wrong shape for model " + name);
        return W;
    }

    double hamiltonian(const CotangentState& s) const { return kinetic.value(s); }
};

/// A shaping candidate: the would-be closed-loop cometric and potential.
struct ShapingCandidate {
    std::string name;
    QuadBasicFn kinetic_hat;
};

/// Target point (q*, 0) in phase space.
struct Equilibrium {
    Vec q_star;
};

struct CheckIssue {
    std::string what;
    Vec q;
};

struct ConsistencyReport {
    bool pass = true;
    int samples = 0;
    std::vector<CheckIssue> issues;

    void fail(std::string what, const Vec& q) {
        pass = false;
        issues.push_back({std::move(what), q});
    }
};

struct EquilibriumReport {
    bool pass = false;
    double grad_norm = 0.0;
    double tolerance = 0.0;
};

/// Passes iff |dh(q*)| < tol. The fiber derivative vanishes identically at
/// p = 0 and is asserted as well.
EquilibriumReport validate_equilibrium(const MechanicalModel& model, const Equilibrium& e,
                                       double tol = 1e-10);

/// Samples the chart box and checks: dA/df against central finite
/// differences (step 1e-6, relative 1e-5), symmetry and positive
/// definiteness of the cometric, and constant actuation rank.
ConsistencyReport consistency_check(const MechanicalModel& model,
                                    std::uint64_t seed = 0x5eed, int samples = 100);

/// Candidate variant: derivative consistency, symmetry, and invertibility of
/// the shaped cometric over the model's box.
ConsistencyReport consistency_check(const MechanicalModel& model,
                                    const ShapingCandidate& candidate,
                                    std::uint64_t seed = 0x5eed, int samples = 100);

/// Sampled positive-definiteness check of the shaped energy around the
/// equilibrium: hhat(q*) = 0, hhat > 0 elsewhere on the box, and the shaped
/// cometric positive definite.
ConsistencyReport candidate_definiteness_check(const MechanicalModel& model,
                                               const ShapingCandidate& candidate,
                                               const Equilibrium& e,
                                               std::uint64_t seed = 0x5eed,
                                               int samples = 100);

using Params = std::map<std::string, double>;

/// Built-in models: "pendulum", "flat2dof", "cartpend-lin", "cartpend".
/// Throws ConfigError for unknown names or invalid parameters.
MechanicalModel registry_get(const std::string& name, const Params& params = {});

std::vector<std::string> registry_names();

/// The identity shaping (Hhat, hhat) = (H, h) of the given model.
ShapingCandidate candidate_trivial(const MechanicalModel& model);

/// Built-in shaping candidates: "pendulum:shaped", "flat2dof:shaped",
/// "flat2dof:curved", "cartpend-lin:shaped".
ShapingCandidate candidate_registry_get(const std::string& name, const Params& params = {});

std::vector<std::string> candidate_registry_names();

}  // namespace shapestab
