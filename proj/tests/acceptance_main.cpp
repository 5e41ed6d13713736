// Acceptance suite: every release-gating property in one binary, one
// pass/fail line per criterion. Exit status is the number of failures.

#include "shapestab/matching.hpp"
#include "shapestab/simulator.hpp"
#include "shapestab/synthesis.hpp"
#include "shapestab/tensor_core.hpp"
#include "support/oracles.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace shapestab;
namespace oracle = shapestab::testing;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int idx, bool pass, const std::string& name, const std::string& detail) {
    std::printf("[%2d] %s  %-34s %s\n", idx, pass ? "PASS" : "FAIL", name.c_str(),
                detail.c_str());
    if (!pass) ++failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2e", v);
    return buf;
}

struct Bench {
    MechanicalModel model;
    ShapingCandidate cand;
};

std::vector<Bench> matched_benchmarks() {
    std::vector<Bench> out;
    out.push_back({registry_get("cartpend-lin"), candidate_registry_get("cartpend-lin:shaped")});
    out.push_back({registry_get("flat2dof"), candidate_registry_get("flat2dof:curved")});
    out.push_back({oracle::make_test3dof(), oracle::make_test3dof_candidate()});
    return out;
}

// 1. Trivial shaping: both residuals stay below 1e-12 over 1000 seeded
//    states per registered model, under a second each.
void criterion_trivial_shaping() {
    double sup = 0.0, worst_time = 0.0;
    for (const auto& name : registry_names()) {
        const MechanicalModel model = registry_get(name);
        const ShapingCandidate cand = candidate_trivial(model);
        const auto t0 = Clock::now();
        Rng rng(101);
        for (int i = 0; i < 1000; ++i) {
            const Vec q = rng.in_box(model.chart_box);
            const Vec p = rng.sphere(model.n, model.momentum_radius);
            sup = std::max(sup, std::abs(kinetic_residual(model, cand, q, p)));
            sup = std::max(sup, std::abs(potential_residual(model, cand, q, p)));
        }
        worst_time = std::max(worst_time, seconds_since(t0));
    }
    report(1, sup < 1e-12 && worst_time < 1.0, "trivial shaping identity",
           "sup_residual=" + fmt(sup) + " (<1e-12), worst_time=" + fmt(worst_time) + "s");
}

// 2. Bracket oddness and antisymmetry at 1e-10; flat and Levi-Civita
//    connections agree to 1e-9 relative.
void criterion_bracket_properties() {
    double worst_odd = 0.0, worst_anti = 0.0, worst_conn = 0.0;
    struct Pair {
        std::string model;
        std::string cand;
    };
    const std::vector<Pair> pairs = {{"pendulum", "pendulum:shaped"},
                                     {"flat2dof", "flat2dof:curved"},
                                     {"cartpend", "flat2dof:curved"},
                                     {"cartpend-lin", "cartpend-lin:shaped"}};
    for (const auto& pr : pairs) {
        const MechanicalModel model = registry_get(pr.model);
        const QuadBasicFn& H = model.kinetic;
        const QuadBasicFn Hh = candidate_registry_get(pr.cand).kinetic_hat;
        const Connection flat = Connection::flat_connection(model.n);
        const Connection lc = levi_civita_connection(H);
        Rng rng(202);
        for (int i = 0; i < 1000; ++i) {
            const CotangentState s{rng.in_box(model.chart_box),
                                   rng.sphere(model.n, model.momentum_radius)};
            const CotangentState sneg{s.q, Vec(-s.p)};
            const double b = poisson_bracket_simple(H, Hh, s);
            worst_odd = std::max(worst_odd,
                                 std::abs(b + poisson_bracket_simple(H, Hh, sneg)));
            worst_anti = std::max(worst_anti,
                                  std::abs(b + poisson_bracket_simple(Hh, H, s)));
            const double via_flat = poisson_bracket_fiber_base(H, Hh, s, flat);
            const double via_lc = poisson_bracket_fiber_base(H, Hh, s, lc);
            worst_conn = std::max(worst_conn,
                                  std::abs(via_flat - via_lc) /
                                      std::max({1.0, std::abs(via_flat), std::abs(via_lc)}));
        }
    }
    report(2, worst_odd < 1e-10 && worst_anti < 1e-10 && worst_conn < 1e-9,
           "bracket properties",
           "odd=" + fmt(worst_odd) + " anti=" + fmt(worst_anti) +
               " (<1e-10), conn=" + fmt(worst_conn) + " (<1e-9)");
}

// 3. Equation counts equal the rank enumeration for n <= 4 plus spot values.
void criterion_equation_counts() {
    bool pass = count_equations(2, 1) == std::pair<long, long>{3, 1} &&
                count_equations(3, 1) == std::pair<long, long>{12, 4};
    Rng rng(303);
    std::string detail = "spot(2,1)=(3,1) spot(3,1)=(12,4)";
    for (int n = 1; n <= 4 && pass; ++n)
        for (int m = 1; m <= n; ++m) {
            const auto [traditional, simple] = count_equations(n, m);
            if (traditional != oracle::enumerate_traditional(n, m, rng) ||
                simple != oracle::enumerate_simple(n, m, rng)) {
                pass = false;
                detail = "enumeration mismatch at n=" + std::to_string(n) +
                         " m=" + std::to_string(m);
                break;
            }
        }
    if (pass) detail += ", enumeration exact for n<=4";
    report(3, pass, "equation counting", detail);
}

// 4. Gyroscopic diagonal and worklessness at 1e-10 across 1000 states and
//    five random admissible tensor pairs per matched benchmark.
void criterion_gyroscopic() {
    double worst_diag = 0.0, worst_work = 0.0;
    for (const auto& b : matched_benchmarks()) {
        const Connection flat = Connection::flat_connection(b.model.n);
        Rng rng(404);
        for (int spec_i = 0; spec_i < 5; ++spec_i) {
            const GyroSpec spec = oracle::random_gyro_spec(rng, b.model.n);
            for (int i = 0; i < 1000; ++i) {
                const Vec q = rng.in_box(b.model.chart_box);
                const Vec p = rng.sphere(b.model.n, b.model.momentum_radius);
                worst_diag = std::max(
                    worst_diag, std::abs(gyro_eval(b.model, b.cand, flat, spec, q, p, p, p)));
                const Vec zg = gyro_force(b.model, b.cand, flat, spec, q, p);
                worst_work =
                    std::max(worst_work, std::abs(zg.dot(b.cand.kinetic_hat.A(q) * p)));
            }
        }
    }
    report(4, worst_diag < 1e-10 && worst_work < 1e-10, "gyroscopic suite",
           "diag=" + fmt(worst_diag) + " work=" + fmt(worst_work) + " (<1e-10)");
}

// 5. Dissipative force: decrease identity and span residual at 1e-10, exact
//    zero at the rest point, and agreement with the raw quotient at 1e-12
//    wherever the actuated component is numerically nonzero.
void criterion_dissipative() {
    double worst_identity = 0.0, worst_span = 0.0, worst_raw = 0.0, worst_rest = 0.0;
    const DissipationSpec diss;
    for (const auto& b : matched_benchmarks()) {
        Rng rng(505);
        for (int i = 0; i < 1000; ++i) {
            const Vec q = rng.in_box(b.model.chart_box);
            const Vec p = rng.sphere(b.model.n, b.model.momentum_radius);
            const Vec zd = dissipative_force(diss, b.cand, b.model, q, p);
            const double mu = diss.mu(b.model, b.cand, q, p);
            worst_identity =
                std::max(worst_identity, std::abs(bhat_pairing(b.cand, q, zd, p) + mu));
            worst_span = std::max(
                worst_span,
                (zd - project_W(b.model, b.cand, q, zd)).cwiseAbs().maxCoeff());
            const Vec Pa = project_W(b.model, b.cand, q, p);
            if (bhat_pairing(b.cand, q, Pa, Pa) > 1e-8) {
                const Vec raw = dissipative_force_raw(diss, b.cand, b.model, q, p);
                worst_raw = std::max(worst_raw, (zd - raw).cwiseAbs().maxCoeff());
            }
        }
        worst_rest = std::max(worst_rest,
                              dissipative_force(diss, b.cand, b.model,
                                                Vec::Zero(b.model.n), Vec::Zero(b.model.n))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    report(5,
           worst_identity < 1e-10 && worst_span < 1e-10 && worst_raw < 1e-12 &&
               worst_rest == 0.0,
           "dissipative suite",
           "identity=" + fmt(worst_identity) + " span=" + fmt(worst_span) +
               " (<1e-10), raw=" + fmt(worst_raw) + " (<1e-12), rest=" + fmt(worst_rest));
}

// 6. Kinetic identity reconstruction on the linearized cart-pendulum: the
//    base-derivative pairing difference equals the constructed tensor on
//    complement directions, within 1e-9 over 1000 pairs.
void criterion_kinetic_identity() {
    const MechanicalModel model = registry_get("cartpend-lin");
    const ShapingCandidate cand = candidate_registry_get("cartpend-lin:shaped");
    const Connection flat = Connection::flat_connection(2);
    QuadBasicFn kin = model.kinetic, kin_hat = cand.kinetic_hat;
    kin.f = kin_hat.f = nullptr;
    kin.df = kin_hat.df = nullptr;
    Rng rng(606);
    const GyroSpec spec = oracle::random_gyro_spec(rng, 2);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec q = rng.in_box(model.chart_box);
        const Vec alpha = rng.sphere(2, 1.0);
        const auto basis = what_basis(model, cand, q);
        const Vec sigma = basis.columns * rng.sphere(basis.count(), 1.0);
        const CotangentState s{q, alpha};
        const double lhs = base_derivative(kin_hat, s, flat).dot(model.kinetic.A(q) * sigma) -
                           base_derivative(kin, s, flat).dot(cand.kinetic_hat.A(q) * sigma);
        const double zg = gyro_eval(model, cand, flat, spec, q, alpha, alpha, sigma);
        worst = std::max(worst, std::abs(lhs - zg));
    }
    report(6, worst < 1e-9, "kinetic matching identity", "gap=" + fmt(worst) + " (<1e-9)");
}

// 7. The two synthesis routes coincide pointwise at 1e-9 and the
//    reconstructed dissipative part obeys its conditions at 1e-10.
void criterion_equivalence() {
    double worst_diff = 0.0, worst_szd = 0.0;
    bool pass = true;
    std::vector<Bench> benches;
    benches.push_back({registry_get("cartpend-lin"), candidate_registry_get("cartpend-lin:shaped")});
    benches.push_back({registry_get("flat2dof"), candidate_registry_get("flat2dof:shaped")});
    benches.push_back({registry_get("flat2dof"), candidate_registry_get("flat2dof:curved")});
    for (const auto& b : benches) {
        const auto rep =
            verify_equivalence(b.model, b.cand, DissipationSpec{},
                               Connection::flat_connection(b.model.n),
                               StateSampler::for_model(b.model, 707, 1000));
        pass = pass && rep.pass;
        worst_diff = std::max(worst_diff, rep.sup_law_difference);
        worst_szd = std::max(worst_szd, rep.szd_max_violation);
    }
    report(7, pass && worst_diff < 1e-9 && worst_szd < 1e-10, "route equivalence",
           "sup|y_CH - y_LCB|=" + fmt(worst_diff) + " (<1e-9), szd=" + fmt(worst_szd) +
               " (<1e-10)");
}

// 8. Stabilization of the linearized cart-pendulum: monotone shaped energy
//    at 1e-8 per step, rate match at 1e-6, final distance below 1e-2 by
//    T = 30 at dt = 1e-3, all under five seconds.
void criterion_closed_loop() {
    const auto t0 = Clock::now();
    const MechanicalModel model = registry_get("cartpend-lin");
    const ShapingCandidate cand = candidate_registry_get("cartpend-lin:shaped");
    const ControlLaw law = control_CH(model, cand, GyroSpec::zero(), DissipationSpec{},
                                      Connection::flat_connection(2));
    Vec q0(2), p0(2);
    q0 << 0.1, 0.05;
    p0 << 0.0, 0.0;
    TrajectoryRecord rec = integrate(model, law, {q0, p0}, 1e-3, 30.0);
    const MonitorReport mon = lyapunov_monitor(rec, 1e-8, 1e-6);
    convergence_check(rec, Equilibrium{Vec::Zero(2)}, 1e-2);
    const double elapsed = seconds_since(t0);
    report(8,
           !rec.aborted && mon.pass && mon.max_rate_mismatch < 1e-6 && rec.converged &&
               elapsed < 5.0,
           "closed-loop stabilization",
           "step_incr=" + fmt(mon.max_step_increase) + " (<1e-8), rate=" +
               fmt(mon.max_rate_mismatch) + " (<1e-6), dist=" + fmt(rec.final_distance) +
               " (<1e-2), time=" + fmt(elapsed) + "s (<5)");
}

// 9. Open-loop pendulum energy drift below 1e-8 over ten seconds.
void criterion_conservation() {
    const MechanicalModel model = registry_get("pendulum");
    const TrajectoryRecord rec =
        integrate(model, zero_control(model),
                  CotangentState{Vec::Constant(1, 2.0), Vec::Zero(1)}, 1e-3, 10.0);
    double drift = 0.0;
    for (double h : rec.H_vals) drift = std::max(drift, std::abs(h - rec.H_vals.front()));
    report(9, !rec.aborted && drift < 1e-8, "open-loop conservation",
           "max|H(t)-H(0)|=" + fmt(drift) + " (<1e-8)");
}

// 10. Same seed, same bytes: trajectory CSV and matching report JSON.
void criterion_determinism() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "shapestab_acceptance";
    fs::create_directories(dir);

    const MechanicalModel model = registry_get("cartpend-lin");
    const ShapingCandidate cand = candidate_registry_get("cartpend-lin:shaped");
    const ControlLaw law = control_LCB(model, cand, DissipationSpec{},
                                       Connection::flat_connection(2));
    Vec q0(2);
    q0 << 0.1, 0.05;
    auto write_once = [&](const fs::path& path) {
        const TrajectoryRecord rec = integrate(model, law, {q0, Vec::Zero(2)}, 1e-3, 5.0);
        write_trajectory_csv(rec, model.n, path.string());
    };
    write_once(dir / "a.csv");
    write_once(dir / "b.csv");

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    const bool csv_same = slurp(dir / "a.csv") == slurp(dir / "b.csv");

    auto matching_json = [&]() {
        const auto rep =
            matching_report(model, cand, StateSampler::for_model(model, 808, 500));
        const nlohmann::json j = {{"sup_kinetic_residual", rep.sup_kinetic_residual},
                                  {"sup_potential_residual", rep.sup_potential_residual},
                                  {"lambda_split_max_error", rep.lambda_split_max_error},
                                  {"pass", rep.pass}};
        return j.dump();
    };
    const bool json_same = matching_json() == matching_json();

    report(10, csv_same && json_same, "determinism",
           std::string("csv_identical=") + (csv_same ? "yes" : "no") +
               " json_identical=" + (json_same ? "yes" : "no"));
}

}  // namespace

int main() {
    std::printf("shapestab acceptance suite\n");
    criterion_trivial_shaping();
    criterion_bracket_properties();
    criterion_equation_counts();
    criterion_gyroscopic();
    criterion_dissipative();
    criterion_kinetic_identity();
    criterion_equivalence();
    criterion_closed_loop();
    criterion_conservation();
    criterion_determinism();
    std::printf("%d criterion(s) failed\n", failures);
    return failures;
}
