#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace shapestab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Slice-indexed third-order coefficient array: T[k] is an n x n matrix.
/// Used for cometric derivatives (dA[k](i,j) = dA^ij/dq^k) and for
/// Christoffel symbols (gamma[k](i,l) = Gamma^k_il).
using Tensor3 = std::vector<Mat>;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct RankError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MatchingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ChartDomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Phase-space point in chart coordinates: configuration q and conjugate
/// momentum p, both of dimension n.
struct CotangentState {
    Vec q;
    Vec p;

    CotangentState() = default;
    CotangentState(Vec q_, Vec p_) : q(std::move(q_)), p(std::move(p_)) {
        if (q.size() != p.size())
            throw DimensionError("CotangentState: q and p must have equal dimension");
    }

    int dim() const { return static_cast<int>(q.size()); }
};

/// Axis-aligned box in chart coordinates; the declared domain of a model.
struct Box {
    Vec lo;
    Vec hi;

    bool contains(const Vec& q) const {
        if (q.size() != lo.size()) return false;
        for (int i = 0; i < q.size(); ++i)
            if (q[i] < lo[i] || q[i] > hi[i]) return false;
        return true;
    }

    static Box cube(int n, double half_width) {
        Box b;
        b.lo = Vec::Constant(n, -half_width);
        b.hi = Vec::Constant(n, half_width);
        return b;
    }
};

/// Deterministic pseudo-random stream (splitmix64). Avoids the standard
/// library distributions so that identical seeds give identical samples on
/// every platform and build.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Random point of the sphere of the given radius in R^n.
    Vec sphere(int n, double radius) {
        Vec v(n);
        double norm2 = 0.0;
        do {
            for (int i = 0; i < n; ++i) v[i] = normal();
            norm2 = v.squaredNorm();
        } while (norm2 == 0.0);
        return v * (radius / std::sqrt(norm2));
    }

    Vec in_box(const Box& box) {
        Vec q(box.lo.size());
        for (int i = 0; i < q.size(); ++i) q[i] = uniform(box.lo[i], box.hi[i]);
        return q;
    }

private:
    std::uint64_t state_;
};

/// Affine connection on the momentum phase space over a chart, stored as
/// Christoffel symbols gamma[k](i,l) = Gamma^k_il in the coordinate frame.
/// Torsion-free means each slice gamma[k] is symmetric. The flat connection
/// (all symbols zero) is represented without evaluating anything.
struct Connection {
    int n = 0;
    bool flat = true;
    std::function<Tensor3(const Vec&)> christoffel;  // unused when flat

    static Connection flat_connection(int n) {
        Connection c;
        c.n = n;
        c.flat = true;
        return c;
    }

    Tensor3 eval(const Vec& q) const {
        if (flat || !christoffel) return Tensor3(n, Mat::Zero(n, n));
        return christoffel(q);
    }
};

/// A phase-space function of the form F(q,p) = 1/2 p^T A(q) p + f(q):
/// quadratic in the momentum plus a configuration-only term. Models supply
/// the derivatives dA and df analytically; nothing here differentiates.
struct QuadBasicFn {
    int n = 0;
    std::function<Mat(const Vec&)> A;       // symmetric n x n; null means zero
    std::function<Tensor3(const Vec&)> dA;  // dA[k](i,j) = dA^ij/dq^k; null means zero
    std::function<double(const Vec&)> f;    // null means zero
    std::function<Vec(const Vec&)> df;      // null means zero

    Mat A_at(const Vec& q) const { return A ? A(q) : Mat::Zero(n, n); }
    Tensor3 dA_at(const Vec& q) const { return dA ? dA(q) : Tensor3(n, Mat::Zero(n, n)); }
    double f_at(const Vec& q) const { return f ? f(q) : 0.0; }
    Vec df_at(const Vec& q) const { return df ? df(q) : Vec::Zero(n); }

    double value(const CotangentState& s) const {
        check_state(s);
        double v = f_at(s.q);
        if (A) v += 0.5 * s.p.dot(A(s.q) * s.p);
        return v;
    }

    void check_state(const CotangentState& s) const {
        if (s.q.size() != n || s.p.size() != n)
            throw DimensionError("QuadBasicFn: state dimension does not match n");
    }

    static QuadBasicFn zero(int n) {
        QuadBasicFn F;
        F.n = n;
        return F;
    }

    /// Constant cometric, no potential term.
    static QuadBasicFn constant_kinetic(const Mat& A0) {
        QuadBasicFn F;
        F.n = static_cast<int>(A0.rows());
        F.A = [A0](const Vec&) { return A0; };
        F.dA = [n = F.n](const Vec&) { return Tensor3(n, Mat::Zero(n, n)); };
        return F;
    }

    /// Configuration-only function (no momentum dependence).
    static QuadBasicFn basic(int n, std::function<double(const Vec&)> f,
                             std::function<Vec(const Vec&)> df) {
        QuadBasicFn F;
        F.n = n;
        F.f = std::move(f);
        F.df = std::move(df);
        return F;
    }
};

}  // namespace shapestab
