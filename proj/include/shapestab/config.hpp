#pragma once

#include "shapestab/model.hpp"

#include <optional>

namespace shapestab {

/// Run configuration for the command-line pipeline, parsed from a sectioned
/// key = value text file. See the README for the grammar.
struct RunConfig {
    std::string model_name;
    Params model_params;

    enum class CandidateKind { Trivial, Registered, Explicit };
    CandidateKind candidate_kind = CandidateKind::Trivial;
    std::string candidate_registered;
    std::optional<Mat> hhat_matrix;  // explicit constant shaped cometric

    enum class PotentialForm { None, Quadratic, OneMinusCos, OnePlusCos };
    PotentialForm potential_form = PotentialForm::None;
    Mat potential_K;          // quadratic form coefficients
    double potential_coef = 0.0;
    int potential_axis = 0;   // zero-based coordinate index for the cosine forms

    Vec q_star;

    std::optional<Box> box;  // overrides the model's declared box
    std::optional<double> momentum_radius;

    std::uint64_t seed = 0;
    int sample_count = 200;

    std::optional<Vec> xi_fixed;  // constant damping covector; default otherwise

    double dt = 1e-3;
    double T = 10.0;
    Vec x0;
    double convergence_radius = 1e-2;
};

/// Parses the file; throws ConfigError with a line reference on bad input.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");

/// Instantiates the model, applying any [domain] overrides.
MechanicalModel build_model(const RunConfig& config);

/// Instantiates the candidate against the model.
ShapingCandidate build_candidate(const RunConfig& config, const MechanicalModel& model);

Equilibrium build_equilibrium(const RunConfig& config, const MechanicalModel& model);

/// Seed override from the SHAPESTAB_SEED environment variable, if set.
std::uint64_t effective_seed(const RunConfig& config);

}  // namespace shapestab
