#pragma once

#include "shapestab/types.hpp"

namespace shapestab {

/// Fiber derivative of F at s: the momentum gradient, which for a
/// quadratic-plus-basic function is the vector A(q) p. The basic part
/// contributes nothing.
Vec fiber_derivative(const QuadBasicFn& F, const CotangentState& s);

/// Base derivative of F at s for the given torsion-free connection:
///   sigma_i = 1/2 dA^jk/dq^i p_j p_k + df_i + Gamma^k_il A^lj p_j p_k.
/// For a basic F this is df(q) exactly, whatever the connection.
Vec base_derivative(const QuadBasicFn& F, const CotangentState& s, const Connection& c);

/// Canonical Poisson bracket {G, F} of two quadratic-plus-basic functions,
/// evaluated by the closed connection-free expression
///   1/2 (dA_G^ij/dq^k A_F^kl - dA_F^ij/dq^k A_G^kl) p_i p_j p_l
///   + (df_G^k A_F^kl - df_F^k A_G^kl) p_l.
double poisson_bracket_simple(const QuadBasicFn& F, const QuadBasicFn& G,
                              const CotangentState& s);

/// {G, F} computed through base/fiber pairings for an explicit torsion-free
/// connection: <B G, F F> - <B F, F G>. Agrees with the closed expression
/// for every torsion-free connection.
double poisson_bracket_fiber_base(const QuadBasicFn& F, const QuadBasicFn& G,
                                  const CotangentState& s, const Connection& c);

/// Assertion mode: evaluates the closed expression and re-derives the value
/// through the supplied connection, throwing std::logic_error if the two
/// disagree beyond tol (relative to max(1, |value|)).
double poisson_bracket_simple_checked(const QuadBasicFn& F, const QuadBasicFn& G,
                                      const CotangentState& s, const Connection& c,
                                      double tol = 1e-9);

/// Levi-Civita connection of the Riemannian metric whose inverse is the
/// cometric field kinetic.A. Needs kinetic.A and kinetic.dA.
Connection levi_civita_connection(const QuadBasicFn& kinetic);

/// True when the Christoffel slices at q are symmetric within tol.
bool torsion_free_at(const Connection& c, const Vec& q, double tol = 1e-12);

}  // namespace shapestab
