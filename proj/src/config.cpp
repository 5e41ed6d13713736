#include "shapestab/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace shapestab {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<double> parse_numbers(const std::string& text, const std::string& where) {
    std::vector<double> out;
    std::istringstream in(text);
    double v;
    while (in >> v) out.push_back(v);
    std::string rest;
    in.clear();
    in >> rest;
    if (!rest.empty()) throw ConfigError(where + ": cannot parse '" + rest + "' as a number");
    for (double x : out)
        if (!std::isfinite(x)) throw ConfigError(where + ": non-finite value");
    return out;
}

Vec parse_vector(const std::string& text, const std::string& where) {
    const auto nums = parse_numbers(text, where);
    if (nums.empty()) throw ConfigError(where + ": empty vector");
    Vec v(nums.size());
    for (std::size_t i = 0; i < nums.size(); ++i) v[i] = nums[i];
    return v;
}

// Rows separated by ';', entries by whitespace.
Mat parse_matrix(const std::string& text, const std::string& where) {
    std::vector<Vec> rows;
    std::string row;
    std::istringstream in(text);
    while (std::getline(in, row, ';')) rows.push_back(parse_vector(row, where));
    if (rows.empty()) throw ConfigError(where + ": empty matrix");
    Mat M(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != M.cols()) throw ConfigError(where + ": ragged matrix rows");
        M.row(i) = rows[i];
    }
    return M;
}

double parse_double(const std::string& text, const std::string& where) {
    const auto nums = parse_numbers(text, where);
    if (nums.size() != 1) throw ConfigError(where + ": expected one number");
    return nums[0];
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    bool seed_set = false;

    std::string section;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const std::string where = origin + ":" + std::to_string(lineno);

        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigError(where + ": empty key or value");

        if (section == "model") {
            if (key == "name")
                cfg.model_name = value;
            else
                cfg.model_params[key] = parse_double(value, where);
        } else if (section == "candidate") {
            if (key == "trivial") {
                if (value != "true" && value != "false")
                    throw ConfigError(where + ": trivial must be true or false");
                if (value == "true") cfg.candidate_kind = RunConfig::CandidateKind::Trivial;
            } else if (key == "registered") {
                cfg.candidate_kind = RunConfig::CandidateKind::Registered;
                cfg.candidate_registered = value;
            } else if (key == "Hhat") {
                cfg.candidate_kind = RunConfig::CandidateKind::Explicit;
                cfg.hhat_matrix = parse_matrix(value, where);
            } else if (key == "hhat") {
                std::istringstream vs(value);
                std::string form;
                vs >> form;
                std::string rest;
                std::getline(vs, rest);
                if (form == "quadratic") {
                    cfg.potential_form = RunConfig::PotentialForm::Quadratic;
                    cfg.potential_K = parse_matrix(rest, where);
                } else if (form == "onemcos" || form == "onepcos") {
                    cfg.potential_form = form == "onemcos"
                                             ? RunConfig::PotentialForm::OneMinusCos
                                             : RunConfig::PotentialForm::OnePlusCos;
                    const auto nums = parse_numbers(rest, where);
                    if (nums.size() != 2)
                        throw ConfigError(where + ": expected '<coef> <axis>'");
                    cfg.potential_coef = nums[0];
                    cfg.potential_axis = static_cast<int>(nums[1]) - 1;
                } else {
                    throw ConfigError(where + ": unknown potential form '" + form +
                                      "' (quadratic | onemcos | onepcos)");
                }
            } else {
                throw ConfigError(where + ": unknown candidate key '" + key + "'");
            }
        } else if (section == "equilibrium") {
            if (key == "q_star")
                cfg.q_star = parse_vector(value, where);
            else
                throw ConfigError(where + ": unknown equilibrium key '" + key + "'");
        } else if (section == "domain") {
            if (key == "box_lo") {
                if (!cfg.box) cfg.box = Box{};
                cfg.box->lo = parse_vector(value, where);
            } else if (key == "box_hi") {
                if (!cfg.box) cfg.box = Box{};
                cfg.box->hi = parse_vector(value, where);
            } else if (key == "momentum_radius") {
                cfg.momentum_radius = parse_double(value, where);
            } else {
                throw ConfigError(where + ": unknown domain key '" + key + "'");
            }
        } else if (section == "sampler") {
            if (key == "seed") {
                cfg.seed = std::stoull(value);
                seed_set = true;
            } else if (key == "count") {
                cfg.sample_count = static_cast<int>(parse_double(value, where));
            } else {
                throw ConfigError(where + ": unknown sampler key '" + key + "'");
            }
        } else if (section == "dissipation") {
            if (key == "xi") {
                if (value != "default") cfg.xi_fixed = parse_vector(value, where);
            } else {
                throw ConfigError(where + ": unknown dissipation key '" + key + "'");
            }
        } else if (section == "gyro") {
            if (key == "mode") {
                if (value != "zero")
                    throw ConfigError(where + ": only 'mode = zero' is supported here; "
                                              "other gyroscopic tensors are code-level");
            } else {
                throw ConfigError(where + ": unknown gyro key '" + key + "'");
            }
        } else if (section == "integrator") {
            if (key == "dt")
                cfg.dt = parse_double(value, where);
            else if (key == "T")
                cfg.T = parse_double(value, where);
            else if (key == "x0")
                cfg.x0 = parse_vector(value, where);
            else if (key == "convergence_radius")
                cfg.convergence_radius = parse_double(value, where);
            else
                throw ConfigError(where + ": unknown integrator key '" + key + "'");
        } else {
            throw ConfigError(where + ": key outside of any known section");
        }
    }

    if (cfg.model_name.empty()) throw ConfigError(origin + ": missing [model] name");
    if (!seed_set) throw ConfigError(origin + ": missing [sampler] seed (required)");
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

MechanicalModel build_model(const RunConfig& config) {
    MechanicalModel model = registry_get(config.model_name, config.model_params);
    if (config.box) {
        if (config.box->lo.size() != model.n || config.box->hi.size() != model.n)
            throw ConfigError("[domain] box dimension does not match the model");
        for (int i = 0; i < model.n; ++i)
            if (!(config.box->lo[i] < config.box->hi[i]))
                throw ConfigError("[domain] box_lo must be strictly below box_hi");
        model.chart_box = *config.box;
    }
    if (config.momentum_radius) {
        if (!(*config.momentum_radius > 0.0))
            throw ConfigError("[domain] momentum_radius must be positive");
        model.momentum_radius = *config.momentum_radius;
    }
    return model;
}

ShapingCandidate build_candidate(const RunConfig& config, const MechanicalModel& model) {
    switch (config.candidate_kind) {
        case RunConfig::CandidateKind::Trivial:
            return candidate_trivial(model);
        case RunConfig::CandidateKind::Registered: {
            ShapingCandidate cand =
                candidate_registry_get(config.candidate_registered, config.model_params);
            if (cand.kinetic_hat.n != model.n)
                throw ConfigError("[candidate] '" + config.candidate_registered +
                                  "' has dimension " + std::to_string(cand.kinetic_hat.n) +
                                  ", model has " + std::to_string(model.n));
            return cand;
        }
        case RunConfig::CandidateKind::Explicit:
            break;
    }

    const Mat& Hh = *config.hhat_matrix;
    if (Hh.rows() != model.n || Hh.cols() != model.n)
        throw ConfigError("[candidate] Hhat dimension does not match the model");
    if ((Hh - Hh.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError("[candidate] Hhat must be symmetric");

    ShapingCandidate cand;
    cand.name = "config";
    cand.kinetic_hat = QuadBasicFn::constant_kinetic(Hh);

    switch (config.potential_form) {
        case RunConfig::PotentialForm::None:
            break;
        case RunConfig::PotentialForm::Quadratic: {
            const Mat K = config.potential_K;
            if (K.rows() != model.n || K.cols() != model.n)
                throw ConfigError("[candidate] quadratic potential dimension mismatch");
            cand.kinetic_hat.f = [K](const Vec& q) { return 0.5 * q.dot(K * q); };
            cand.kinetic_hat.df = [K](const Vec& q) { return Vec(K * q); };
            break;
        }
        case RunConfig::PotentialForm::OneMinusCos:
        case RunConfig::PotentialForm::OnePlusCos: {
            const int axis = config.potential_axis;
            if (axis < 0 || axis >= model.n)
                throw ConfigError("[candidate] cosine potential axis out of range");
            const double c = config.potential_coef;
            const double sign =
                config.potential_form == RunConfig::PotentialForm::OneMinusCos ? -1.0 : 1.0;
            cand.kinetic_hat.f = [c, axis, sign](const Vec& q) {
                return c * (1.0 + sign * std::cos(q[axis]));
            };
            cand.kinetic_hat.df = [c, axis, sign, n = model.n](const Vec& q) {
                Vec d = Vec::Zero(n);
                d[axis] = -c * sign * std::sin(q[axis]);
                return d;
            };
            break;
        }
    }
    return cand;
}

Equilibrium build_equilibrium(const RunConfig& config, const MechanicalModel& model) {
    if (config.q_star.size() != model.n)
        throw ConfigError("[equilibrium] q_star missing or of wrong dimension");
    return Equilibrium{config.q_star};
}

std::uint64_t effective_seed(const RunConfig& config) {
    if (const char* env = std::getenv("SHAPESTAB_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("SHAPESTAB_SEED is not an unsigned integer");
        }
    }
    return config.seed;
}

}  // namespace shapestab
