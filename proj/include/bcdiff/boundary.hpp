#pragma once

#include <cstdint>
#include <vector>

#include "bcdiff/discrete_space.hpp"
#include "bcdiff/matrix.hpp"
#include "bcdiff/schedules.hpp"

namespace bcdiff {

// Sentinel competitor ratio used when no candidate state can absorb the
// trajectory; it maps to a late, near-horizon exit time.
inline constexpr double kMaskedFraction = 100.0;

struct FractionResult {
    double q;            // min over valid competitors of a_j / b_j
    std::size_t j_star;  // winning competitor (the element's own state when masked)
    bool masked;
};

// Competitor ratio for one element. With a = f(x0, I) - f(x0, J) and
// b = f(eps, J) - f(eps, I), the trajectory u_t x0 + v_t eps crosses the
// I/J score boundary where u_t a = v_t b, so the smallest valid a/b picks
// the first exit. f(x0, I) is the anchor's self score Emb(I).Emb(I).
// Competitors with a < 0 (J already beats I at the data) or b <= 0 (the
// noise never tips toward J) carry no crossing and are skipped.
FractionResult boundary_fraction(const double* x0_row, const double* eps_row, std::size_t I,
                                 const EmbeddingTable& table);

struct BoundaryCoeff {
    double u;
    double v;
};

// Exact flow coefficients at the first crossing, solved from u a = v b
// under each kind's constraint:
//   vp (u^2 + v^2 = 1):  u = 1/sqrt(1+q^2),  v = 1/sqrt(1+q^-2)
//   ve (u = 1):          v = q
//   ot (u + v = 1):      u = 1/(1+q),        v = 1/(1+1/q)
// Requires q > 0.
BoundaryCoeff boundary_coeffs(double q, ScheduleKind kind);

// First time the trajectory leaves the winning state's region:
//   ot: T q / (1+q)
//   ve: the log-inversion of v = q, clamped to [0, T]
//   vp: bracketed by the counting rule on the u table, then refined by
//       inverse interpolation inside the bracketing grid step so that
//       coeff_at(t0) reproduces the crossing coefficients
double stopping_time(double q, const Schedule& schedule);

struct BoundaryEstimate {
    std::vector<double> t0;
    std::vector<double> u_t0;
    std::vector<double> v_t0;
    std::vector<std::size_t> j_star;
    std::vector<std::uint8_t> masked;

    std::size_t size() const { return t0.size(); }
    double masked_fraction() const;
};

// Per-element estimates for a whole datum. The parallel version is an
// OpenMP map over rows; the serial twin runs the identical arithmetic and
// is kept as the reference the parallel kernel is tested against.
BoundaryEstimate estimate_boundary(const Matrix& x0, const Matrix& eps,
                                   const std::vector<std::size_t>& indices,
                                   const EmbeddingTable& table, const Schedule& schedule);
BoundaryEstimate estimate_boundary_serial(const Matrix& x0, const Matrix& eps,
                                          const std::vector<std::size_t>& indices,
                                          const EmbeddingTable& table, const Schedule& schedule);

// Boundary flow: pairs each element's crossing point with its crossing time.
struct BoundaryPoint {
    Matrix x;                // n x m crossing points
    std::vector<double> t0;  // length n
};

BoundaryPoint psi(const Matrix& eps, const Matrix& x0, const Schedule& schedule,
                  const BoundaryEstimate& estimate);

// Inverse flow: recovers the driving noise of any (state, time) pair,
// (x - u(t) x0) / v(t) per element. Requires v(t) > 0 elementwise.
Matrix psi_inverse(const Matrix& x_t0, const std::vector<double>& t0, const Matrix& x0,
                   const Schedule& schedule);

}  // namespace bcdiff
