#include "shapestab/model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace shapestab {

namespace {

double param(const Params& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

void reject_unknown(const Params& p, std::initializer_list<const char*> known,
                    const std::string& what) {
    for (const auto& [key, _] : p) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        if (!ok) throw ConfigError(what + ": unknown parameter '" + key + "'");
    }
}

void require_positive(double v, const std::string& what) {
    if (!(v > 0.0)) throw ConfigError(what + " must be positive");
}

Mat fd_dA_slice(const QuadBasicFn& F, const Vec& q, int k, double h) {
    Vec qp = q, qm = q;
    qp[k] += h;
    qm[k] -= h;
    return (F.A_at(qp) - F.A_at(qm)) / (2.0 * h);
}

double fd_df_component(const QuadBasicFn& F, const Vec& q, int k, double h) {
    Vec qp = q, qm = q;
    qp[k] += h;
    qm[k] -= h;
    return (F.f_at(qp) - F.f_at(qm)) / (2.0 * h);
}

void check_derivatives_at(const QuadBasicFn& F, const Vec& q, ConsistencyReport& report,
                          const std::string& tag) {
    constexpr double h = 1e-6;
    constexpr double rtol = 1e-5;
    if (F.A) {
        const Tensor3 dA = F.dA_at(q);
        for (int k = 0; k < F.n; ++k) {
            const Mat fd = fd_dA_slice(F, q, k, h);
            const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
            if ((dA[k] - fd).cwiseAbs().maxCoeff() > rtol * scale)
                report.fail(tag + ": dA[" + std::to_string(k) + "] disagrees with finite differences", q);
        }
        const Mat A = F.A(q);
        const double asym = (A - A.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()))
            report.fail(tag + ": cometric not symmetric", q);
    }
    if (F.f) {
        const Vec df = F.df_at(q);
        for (int k = 0; k < F.n; ++k) {
            const double fd = fd_df_component(F, q, k, h);
            if (std::abs(df[k] - fd) > rtol * std::max(1.0, std::abs(fd)))
                report.fail(tag + ": df[" + std::to_string(k) + "] disagrees with finite differences", q);
        }
    }
}

int numerical_rank(const Mat& M) {
    if (M.cols() == 0 || M.rows() == 0) return 0;
    Eigen::JacobiSVD<Mat> svd(M);
    const auto& sv = svd.singularValues();
    const double thresh = 1e-10 * sv[0];
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] > thresh) ++rank;
    return rank;
}

}  // namespace

EquilibriumReport validate_equilibrium(const MechanicalModel& model, const Equilibrium& e,
                                       double tol) {
    if (e.q_star.size() != model.n)
        throw DimensionError("validate_equilibrium: q_star dimension mismatch");
    if (!model.chart_box.contains(e.q_star))
        throw ChartDomainError("validate_equilibrium: q_star outside the chart box");
    EquilibriumReport report;
    report.tolerance = tol;
    report.grad_norm = model.kinetic.df_at(e.q_star).norm();
    // At p = 0 the momentum gradient of the Hamiltonian vanishes identically.
    const CotangentState rest{e.q_star, Vec::Zero(model.n)};
    const Vec fh = model.kinetic.A_at(e.q_star) * rest.p;
    report.pass = report.grad_norm < tol && fh.norm() == 0.0;
    return report;
}

ConsistencyReport consistency_check(const MechanicalModel& model, std::uint64_t seed,
                                    int samples) {
    constexpr std::size_t issue_cap = 8;
    ConsistencyReport report;
    report.samples = samples;
    Rng rng(seed);
    for (int i = 0; i < samples && report.issues.size() < issue_cap; ++i) {
        const Vec q = rng.in_box(model.chart_box);
        check_derivatives_at(model.kinetic, q, report, "model " + model.name);

        const Mat H = model.kinetic.A_at(q);
        Eigen::SelfAdjointEigenSolver<Mat> eig(H);
        if (eig.eigenvalues().minCoeff() <= 0.0)
            report.fail("model " + model.name + ": cometric not positive definite", q);

        const Mat W = model.actuation_at(q);
        if (numerical_rank(W) != model.m)
            report.fail("model " + model.name + ": actuation rank differs from m", q);
    }
    return report;
}

ConsistencyReport consistency_check(const MechanicalModel& model,
                                    const ShapingCandidate& candidate, std::uint64_t seed,
                                    int samples) {
    constexpr std::size_t issue_cap = 8;
    ConsistencyReport report;
    report.samples = samples;
    Rng rng(seed);
    for (int i = 0; i < samples && report.issues.size() < issue_cap; ++i) {
        const Vec q = rng.in_box(model.chart_box);
        check_derivatives_at(candidate.kinetic_hat, q, report, "candidate " + candidate.name);

        const Mat Hh = candidate.kinetic_hat.A_at(q);
        Eigen::JacobiSVD<Mat> svd(Hh);
        const auto& sv = svd.singularValues();
        if (sv[sv.size() - 1] <= 1e-12 * sv[0])
            report.fail("candidate " + candidate.name + ": shaped cometric singular", q);
    }
    return report;
}

ConsistencyReport candidate_definiteness_check(const MechanicalModel& model,
                                               const ShapingCandidate& candidate,
                                               const Equilibrium& e, std::uint64_t seed,
                                               int samples) {
    constexpr std::size_t issue_cap = 8;
    ConsistencyReport report;
    report.samples = samples;
    const QuadBasicFn& K = candidate.kinetic_hat;
    const double h_star = K.f_at(e.q_star);
    if (std::abs(h_star) > 1e-12)
        report.fail("candidate " + candidate.name + ": hhat(q*) not normalized to zero",
                    e.q_star);
    Rng rng(seed);
    for (int i = 0; i < samples && report.issues.size() < issue_cap; ++i) {
        const Vec q = rng.in_box(model.chart_box);
        if ((q - e.q_star).norm() > 1e-9 && K.f_at(q) <= 0.0)
            report.fail("candidate " + candidate.name + ": hhat not positive away from q*", q);
        Eigen::SelfAdjointEigenSolver<Mat> eig(K.A_at(q));
        if (eig.eigenvalues().minCoeff() <= 0.0)
            report.fail("candidate " + candidate.name + ": shaped cometric not positive definite",
                        q);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

namespace {

// Planar pendulum, angle measured from the downward vertical. The potential
// is registered as h(q) = m g l (1 - cos q), so h(0) = 0 at the hanging
// equilibrium and q = pi is the upright one; both are critical points of h.
MechanicalModel make_pendulum(const Params& p) {
    reject_unknown(p, {"m", "l", "g"}, "pendulum");
    const double m = param(p, "m", 1.0);
    const double l = param(p, "l", 1.0);
    const double g = param(p, "g", 9.8);
    require_positive(m, "pendulum: m");
    require_positive(l, "pendulum: l");
    require_positive(g, "pendulum: g");

    MechanicalModel model;
    model.name = "pendulum";
    model.n = 1;
    model.m = 1;
    model.kinetic.n = 1;
    const double inv_inertia = 1.0 / (m * l * l);
    model.kinetic.A = [inv_inertia](const Vec&) {
        Mat H(1, 1);
        H(0, 0) = inv_inertia;
        return H;
    };
    model.kinetic.dA = [](const Vec&) { return Tensor3(1, Mat::Zero(1, 1)); };
    const double mgl = m * g * l;
    model.kinetic.f = [mgl](const Vec& q) { return mgl * (1.0 - std::cos(q[0])); };
    model.kinetic.df = [mgl](const Vec& q) {
        Vec d(1);
        d[0] = mgl * std::sin(q[0]);
        return d;
    };
    model.actuation = [](const Vec&) { return Mat::Identity(1, 1); };
    model.chart_box = Box::cube(1, 7.0);
    model.momentum_radius = 2.0;
    return model;
}

MechanicalModel make_flat2dof(const Params& p) {
    reject_unknown(p, {"a", "b", "actuators"}, "flat2dof");
    const double a = param(p, "a", 1.0);
    const double b = param(p, "b", 1.0);
    const int actuators = static_cast<int>(param(p, "actuators", 1.0));
    require_positive(a, "flat2dof: a");
    require_positive(b, "flat2dof: b");
    if (actuators != 1 && actuators != 2)
        throw ConfigError("flat2dof: actuators must be 1 or 2");

    MechanicalModel model;
    model.name = "flat2dof";
    model.n = 2;
    model.m = actuators;
    Mat H = Mat::Zero(2, 2);
    H(0, 0) = a;
    H(1, 1) = b;
    model.kinetic = QuadBasicFn::constant_kinetic(H);
    model.actuation = [actuators](const Vec&) {
        return Mat(Mat::Identity(2, 2).leftCols(actuators));
    };
    model.chart_box = Box::cube(2, 2.0);
    model.momentum_radius = 1.0;
    return model;
}

Mat cartpend_mass(double M, double m, double l, double c) {
    Mat mass(2, 2);
    mass(0, 0) = M + m;
    mass(0, 1) = m * l * c;
    mass(1, 0) = m * l * c;
    mass(1, 1) = m * l * l;
    return mass;
}

// Cart with an inverted pendulum, angle q2 measured from the upright
// vertical, force applied to the cart. h(0) = 0 with an unstable direction
// along q2.
MechanicalModel make_cartpend(const Params& p) {
    reject_unknown(p, {"M", "m", "l", "g"}, "cartpend");
    const double M = param(p, "M", 1.0);
    const double m = param(p, "m", 1.0);
    const double l = param(p, "l", 1.0);
    const double g = param(p, "g", 9.8);
    require_positive(M, "cartpend: M");
    require_positive(m, "cartpend: m");
    require_positive(l, "cartpend: l");
    require_positive(g, "cartpend: g");

    MechanicalModel model;
    model.name = "cartpend";
    model.n = 2;
    model.m = 1;
    model.kinetic.n = 2;
    model.kinetic.A = [M, m, l](const Vec& q) {
        return Mat(cartpend_mass(M, m, l, std::cos(q[1])).inverse());
    };
    // dH/dq2 = -H M'(q2) H with M' the mass-matrix derivative; no q1 dependence.
    model.kinetic.dA = [M, m, l](const Vec& q) {
        Tensor3 d(2, Mat::Zero(2, 2));
        const Mat H = cartpend_mass(M, m, l, std::cos(q[1])).inverse();
        Mat dmass = Mat::Zero(2, 2);
        dmass(0, 1) = dmass(1, 0) = -m * l * std::sin(q[1]);
        d[1] = -H * dmass * H;
        return d;
    };
    const double mgl = m * g * l;
    model.kinetic.f = [mgl](const Vec& q) { return mgl * (std::cos(q[1]) - 1.0); };
    model.kinetic.df = [mgl](const Vec& q) {
        Vec d = Vec::Zero(2);
        d[1] = -mgl * std::sin(q[1]);
        return d;
    };
    model.actuation = [](const Vec&) {
        Mat W = Mat::Zero(2, 1);
        W(0, 0) = 1.0;
        return W;
    };
    model.chart_box.lo = Vec(2);
    model.chart_box.hi = Vec(2);
    model.chart_box.lo << -2.0, -1.2;
    model.chart_box.hi << 2.0, 1.2;
    model.momentum_radius = 1.0;
    return model;
}

// Linearization of cartpend at the upright point: constant cometric, the
// quadratic expansion of the potential (still with its unstable direction).
MechanicalModel make_cartpend_lin(const Params& p) {
    reject_unknown(p, {"M", "m", "l", "g"}, "cartpend-lin");
    const double M = param(p, "M", 1.0);
    const double m = param(p, "m", 1.0);
    const double l = param(p, "l", 1.0);
    const double g = param(p, "g", 9.8);
    require_positive(M, "cartpend-lin: M");
    require_positive(m, "cartpend-lin: m");
    require_positive(l, "cartpend-lin: l");
    require_positive(g, "cartpend-lin: g");

    MechanicalModel model;
    model.name = "cartpend-lin";
    model.n = 2;
    model.m = 1;
    const Mat H = cartpend_mass(M, m, l, 1.0).inverse();
    model.kinetic = QuadBasicFn::constant_kinetic(H);
    const double mgl = m * g * l;
    model.kinetic.f = [mgl](const Vec& q) { return -0.5 * mgl * q[1] * q[1]; };
    model.kinetic.df = [mgl](const Vec& q) {
        Vec d = Vec::Zero(2);
        d[1] = -mgl * q[1];
        return d;
    };
    model.actuation = [](const Vec&) {
        Mat W = Mat::Zero(2, 1);
        W(0, 0) = 1.0;
        return W;
    };
    model.chart_box = Box::cube(2, 1.0);
    model.momentum_radius = 1.0;
    return model;
}

QuadBasicFn quadratic_potential_fn(const QuadBasicFn& kinetic_part, const Mat& K) {
    QuadBasicFn F = kinetic_part;
    F.f = [K](const Vec& q) { return 0.5 * q.dot(K * q); };
    F.df = [K](const Vec& q) { return Vec(K * q); };
    return F;
}

}  // namespace

MechanicalModel registry_get(const std::string& name, const Params& params) {
    if (name == "pendulum") return make_pendulum(params);
    if (name == "flat2dof") return make_flat2dof(params);
    if (name == "cartpend") return make_cartpend(params);
    if (name == "cartpend-lin") return make_cartpend_lin(params);
    throw ConfigError("unknown model '" + name + "'");
}

std::vector<std::string> registry_names() {
    return {"pendulum", "flat2dof", "cartpend", "cartpend-lin"};
}

ShapingCandidate candidate_trivial(const MechanicalModel& model) {
    return ShapingCandidate{"trivial", model.kinetic};
}

ShapingCandidate candidate_registry_get(const std::string& name, const Params& params) {
    if (name == "pendulum:shaped") {
        // Same inertia, potential flipped to sit at the upright point:
        // hhat(q) = m g l (1 + cos q), zero at q = pi.
        const MechanicalModel base = registry_get("pendulum", params);
        const double m = param(params, "m", 1.0);
        const double l = param(params, "l", 1.0);
        const double g = param(params, "g", 9.8);
        const double mgl = m * g * l;
        ShapingCandidate cand;
        cand.name = name;
        cand.kinetic_hat = base.kinetic;
        cand.kinetic_hat.f = [mgl](const Vec& q) { return mgl * (1.0 + std::cos(q[0])); };
        cand.kinetic_hat.df = [mgl](const Vec& q) {
            Vec d(1);
            d[0] = -mgl * std::sin(q[0]);
            return d;
        };
        return cand;
    }
    if (name == "flat2dof:shaped") {
        // Constant shaped cometric; the quadratic potential is flat exactly
        // along the direction that the potential condition leaves free.
        const double a = param(params, "a", 1.0);
        const double b = param(params, "b", 1.0);
        require_positive(a, "flat2dof:shaped: a");
        require_positive(b, "flat2dof:shaped: b");
        Mat Hh(2, 2);
        Hh << 2.0, 1.0, 1.0, 2.0;
        Mat K(2, 2);
        K << 4.0 * b * b, 2.0 * a * b, 2.0 * a * b, a * a;
        ShapingCandidate cand;
        cand.name = name;
        cand.kinetic_hat = quadratic_potential_fn(QuadBasicFn::constant_kinetic(Hh), K);
        return cand;
    }
    if (name == "flat2dof:curved") {
        // Configuration-dependent shaped cometric that still satisfies the
        // kinetic condition on the complement of the actuated direction:
        // Hhat = diag(1+q2^2, 1+q1^2), hhat = q1^2/2.
        ShapingCandidate cand;
        cand.name = name;
        cand.kinetic_hat.n = 2;
        cand.kinetic_hat.A = [](const Vec& q) {
            Mat H = Mat::Zero(2, 2);
            H(0, 0) = 1.0 + q[1] * q[1];
            H(1, 1) = 1.0 + q[0] * q[0];
            return H;
        };
        cand.kinetic_hat.dA = [](const Vec& q) {
            Tensor3 d(2, Mat::Zero(2, 2));
            d[0](1, 1) = 2.0 * q[0];
            d[1](0, 0) = 2.0 * q[1];
            return d;
        };
        cand.kinetic_hat.f = [](const Vec& q) { return 0.5 * q[0] * q[0]; };
        cand.kinetic_hat.df = [](const Vec& q) {
            Vec d = Vec::Zero(2);
            d[0] = q[0];
            return d;
        };
        return cand;
    }
    if (name == "cartpend-lin:shaped") {
        // Frozen kinetic-plus-potential shaping for the unit-parameter
        // linearized cart-pendulum. Solves the constant-coefficient
        // potential condition (Khat H - K Hhat) Hhat^-1 e2 = 0 with both
        // shaped matrices positive definite.
        const double M = param(params, "M", 1.0);
        const double m = param(params, "m", 1.0);
        const double l = param(params, "l", 1.0);
        const double g = param(params, "g", 9.8);
        if (M != 1.0 || m != 1.0 || l != 1.0)
            throw ConfigError("cartpend-lin:shaped is registered for M = m = l = 1 only");
        require_positive(g, "cartpend-lin:shaped: g");
        Mat Hh(2, 2);
        Hh << 1.0, -3.0, -3.0, 10.0;
        Mat K(2, 2);
        K << 1.0, 2.0, 2.0, 4.0 + g;
        ShapingCandidate cand;
        cand.name = name;
        cand.kinetic_hat = quadratic_potential_fn(QuadBasicFn::constant_kinetic(Hh), K);
        return cand;
    }
    throw ConfigError("unknown candidate '" + name + "'");
}

std::vector<std::string> candidate_registry_names() {
    return {"pendulum:shaped", "flat2dof:shaped", "flat2dof:curved", "cartpend-lin:shaped"};
}

}  // namespace shapestab
