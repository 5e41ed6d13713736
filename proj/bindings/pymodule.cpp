#include "shapestab/config.hpp"
#include "shapestab/matching.hpp"
#include "shapestab/simulator.hpp"
#include "shapestab/synthesis.hpp"
#include "shapestab/tensor_core.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
namespace ss = shapestab;

namespace {

ss::Params to_params(const py::dict& d) {
    ss::Params p;
    for (const auto& item : d)
        p[py::cast<std::string>(item.first)] = py::cast<double>(item.second);
    return p;
}

ss::ControlLaw make_law(const ss::MechanicalModel& model, const ss::ShapingCandidate& cand,
                        const std::string& route) {
    const ss::Connection conn = ss::Connection::flat_connection(model.n);
    const ss::DissipationSpec diss;
    if (route == "ch")
        return ss::control_CH(model, cand, ss::GyroSpec::zero(), diss, conn);
    if (route == "lcb") return ss::control_LCB(model, cand, diss, conn);
    if (route == "single") return ss::single_actuator_control(model, cand, diss, conn);
    if (route == "zero") return ss::zero_control(model);
    throw ss::ConfigError("unknown route '" + route + "' (ch | lcb | single | zero)");
}

py::dict matching_to_dict(const ss::MatchingReport& rep) {
    py::dict d;
    d["pass"] = rep.pass;
    d["sup_kinetic_residual"] = rep.sup_kinetic_residual;
    d["sup_potential_residual"] = rep.sup_potential_residual;
    d["lambda_split_max_error"] = rep.lambda_split_max_error;
    d["tolerance"] = rep.tolerance;
    d["samples"] = rep.samples;
    d["seed"] = rep.seed;
    return d;
}

py::dict simulate_to_dict(const ss::MechanicalModel& model, const ss::ControlLaw& law,
                          const ss::Vec& q0, const ss::Vec& p0, double dt, double T,
                          std::optional<ss::Vec> q_star, double radius) {
    ss::TrajectoryRecord rec = ss::integrate(model, law, {q0, p0}, dt, T);
    const ss::MonitorReport mon = ss::lyapunov_monitor(rec);
    const auto N = static_cast<Eigen::Index>(rec.size());
    ss::Vec times(N), H(N), Hh(N), mu(N);
    ss::Mat Q(N, model.n), P(N, model.n);
    for (Eigen::Index k = 0; k < N; ++k) {
        times[k] = rec.times[k];
        Q.row(k) = rec.states[k].q;
        P.row(k) = rec.states[k].p;
        H[k] = rec.H_vals[k];
        Hh[k] = rec.Hhat_vals[k];
        mu[k] = rec.mu_vals[k];
    }
    py::dict d;
    d["t"] = times;
    d["q"] = Q;
    d["p"] = P;
    d["H"] = H;
    d["Hhat"] = Hh;
    d["mu"] = mu;
    d["aborted"] = rec.aborted;
    d["abort_reason"] = rec.abort_reason;
    d["monitor_pass"] = mon.pass;
    d["max_step_increase"] = mon.max_step_increase;
    d["max_rate_mismatch"] = mon.max_rate_mismatch;
    if (q_star) {
        ss::convergence_check(rec, ss::Equilibrium{*q_star}, radius);
        d["converged"] = rec.converged;
        d["final_distance"] = rec.final_distance;
    }
    return d;
}

}  // namespace

PYBIND11_MODULE(_shapestab, m) {
    m.doc() = "Matching verification, energy-shaping control synthesis, and closed-loop "
              "simulation for underactuated mechanical systems";

    py::register_exception<ss::MatchingError>(m, "MatchingError");
    py::register_exception<ss::ConfigError>(m, "ConfigError");
    py::register_exception<ss::RankError>(m, "RankError");

    py::class_<ss::MechanicalModel>(m, "MechanicalModel")
        .def_readonly("name", &ss::MechanicalModel::name)
        .def_readonly("n", &ss::MechanicalModel::n)
        .def_readonly("m", &ss::MechanicalModel::m)
        .def_property_readonly("box_lo",
                               [](const ss::MechanicalModel& s) { return s.chart_box.lo; })
        .def_property_readonly("box_hi",
                               [](const ss::MechanicalModel& s) { return s.chart_box.hi; })
        .def("hamiltonian",
             [](const ss::MechanicalModel& s, const ss::Vec& q, const ss::Vec& p) {
                 return s.hamiltonian({q, p});
             })
        .def("actuation", &ss::MechanicalModel::actuation_at);

    py::class_<ss::ShapingCandidate>(m, "ShapingCandidate")
        .def_readonly("name", &ss::ShapingCandidate::name)
        .def("shaped_energy",
             [](const ss::ShapingCandidate& c, const ss::Vec& q, const ss::Vec& p) {
                 return c.kinetic_hat.value({q, p});
             });

    py::class_<ss::ControlLaw>(m, "ControlLaw")
        .def_property_readonly("route",
                               [](const ss::ControlLaw& l) {
                                   switch (l.route) {
                                       case ss::ControlLaw::Route::CH: return "ch";
                                       case ss::ControlLaw::Route::LCB: return "lcb";
                                       case ss::ControlLaw::Route::SingleActuator:
                                           return "single";
                                       default: return "zero";
                                   }
                               })
        .def("y", [](const ss::ControlLaw& l, const ss::Vec& q, const ss::Vec& p) {
            return l.y(q, p);
        })
        .def("shaped_energy",
             [](const ss::ControlLaw& l, const ss::Vec& q, const ss::Vec& p) {
                 return l.shaped_energy(q, p);
             })
        .def("mu", [](const ss::ControlLaw& l, const ss::Vec& q, const ss::Vec& p) {
            return l.mu(q, p);
        });

    m.def("list_models", &ss::registry_names);
    m.def("list_candidates", &ss::candidate_registry_names);
    m.def(
        "get_model",
        [](const std::string& name, const py::dict& params) {
            return ss::registry_get(name, to_params(params));
        },
        py::arg("name"), py::arg("params") = py::dict());
    m.def("trivial_candidate", &ss::candidate_trivial);
    m.def(
        "get_candidate",
        [](const std::string& name, const py::dict& params) {
            return ss::candidate_registry_get(name, to_params(params));
        },
        py::arg("name"), py::arg("params") = py::dict());

    m.def("count_equations", [](int n, int mm) {
        const auto [traditional, simple] = ss::count_equations(n, mm);
        return py::make_tuple(traditional, simple);
    });

    m.def(
        "validate_equilibrium",
        [](const ss::MechanicalModel& model, const ss::Vec& q_star, double tol) {
            const auto rep = ss::validate_equilibrium(model, ss::Equilibrium{q_star}, tol);
            py::dict d;
            d["pass"] = rep.pass;
            d["grad_norm"] = rep.grad_norm;
            d["tolerance"] = rep.tolerance;
            return d;
        },
        py::arg("model"), py::arg("q_star"), py::arg("tolerance") = 1e-10);
    m.def("consistency_check", [](const ss::MechanicalModel& model) {
        const auto rep = ss::consistency_check(model);
        py::dict d;
        d["pass"] = rep.pass;
        py::list issues;
        for (const auto& issue : rep.issues) issues.append(issue.what);
        d["issues"] = issues;
        return d;
    });

    m.def("kinetic_residual", &ss::kinetic_residual);
    m.def("potential_residual", &ss::potential_residual);
    m.def("poisson_bracket",
          [](const ss::MechanicalModel& model, const ss::ShapingCandidate& cand,
             const ss::Vec& q, const ss::Vec& p) {
              return ss::poisson_bracket_simple(model.kinetic, cand.kinetic_hat, {q, p});
          });
    m.def("what_basis", [](const ss::MechanicalModel& model,
                           const ss::ShapingCandidate& cand, const ss::Vec& q) {
        return ss::what_basis(model, cand, q).columns;
    });
    m.def("project_actuation", &ss::project_W);
    m.def("dissipative_force",
          [](const ss::MechanicalModel& model, const ss::ShapingCandidate& cand,
             const ss::Vec& q, const ss::Vec& p) {
              return ss::dissipative_force(ss::DissipationSpec{}, cand, model, q, p);
          });

    m.def(
        "matching_report",
        [](const ss::MechanicalModel& model, const ss::ShapingCandidate& cand,
           std::uint64_t seed, int count, double tol) {
            return matching_to_dict(ss::matching_report(
                model, cand, ss::StateSampler::for_model(model, seed, count), tol));
        },
        py::arg("model"), py::arg("candidate"), py::arg("seed") = 0, py::arg("count") = 200,
        py::arg("tolerance") = 1e-9);

    m.def("synthesize", &make_law, py::arg("model"), py::arg("candidate"),
          py::arg("route") = "ch");
    m.def("zero_control", &ss::zero_control);

    m.def(
        "verify_equivalence",
        [](const ss::MechanicalModel& model, const ss::ShapingCandidate& cand,
           std::uint64_t seed, int count) {
            const auto rep = ss::verify_equivalence(
                model, cand, ss::DissipationSpec{}, ss::Connection::flat_connection(model.n),
                ss::StateSampler::for_model(model, seed, count));
            py::dict d;
            d["pass"] = rep.pass;
            d["sup_law_difference"] = rep.sup_law_difference;
            d["szd_max_violation"] = rep.szd_max_violation;
            d["reconstruction_difference"] = rep.reconstruction_difference;
            d["samples"] = rep.samples;
            return d;
        },
        py::arg("model"), py::arg("candidate"), py::arg("seed") = 0, py::arg("count") = 200);

    m.def("simulate", &simulate_to_dict, py::arg("model"), py::arg("law"), py::arg("q0"),
          py::arg("p0"), py::arg("dt") = 1e-3, py::arg("T") = 10.0,
          py::arg("q_star") = std::nullopt, py::arg("radius") = 1e-2);
}
