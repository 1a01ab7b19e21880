#pragma once

#include <vector>

#include "bcdiff/boundary.hpp"
#include "bcdiff/discrete_space.hpp"
#include "bcdiff/matrix.hpp"
#include "bcdiff/schedules.hpp"

namespace bcdiff {

// A point of the boundary-rescaled process: the state, the nominal time it
// was sampled at, and the per-element real time actually evaluated.
struct RescaledPoint {
    Matrix x;                 // n x m
    double t = 0.0;           // nominal time
    std::vector<double> tau;  // per-element rescaled time
    Matrix eps;               // the driving noise
    double r = 0.0;           // confidence factor
};

// tau_i = r t0_i + t (T - r t0_i) / T, computed as t + r t0_i (1 - t/T) so
// both endpoints are exact: tau(0) = r t0_i, tau(T) = T, and r = 0 gives
// tau = t bit-for-bit.
std::vector<double> rescale_time(double t, const std::vector<double>& t0, double r,
                                 const Schedule& schedule);

// Draws the rescaled trajectory at nominal time t: estimates each element's
// first-exit time, maps t through the per-element rescaling, and evaluates
// x = u(tau) x0 + v(tau) eps rowwise. The boundary estimate is written to
// estimate_out when given (metrics want the masked fraction).
RescaledPoint forward_sample(const Matrix& x0, const Matrix& eps, double t,
                             const Schedule& schedule, const std::vector<std::size_t>& indices,
                             const EmbeddingTable& table, double r,
                             BoundaryEstimate* estimate_out = nullptr);

// Time derivative of the rescaled trajectory:
// [u'(tau) x0 + v'(tau) eps] (T - r t0) / T per element.
Matrix rescaled_vector_field(const Matrix& x0, const Matrix& eps, double t,
                             const Schedule& schedule, const std::vector<std::size_t>& indices,
                             const EmbeddingTable& table, double r);

// Deterministic reverse-time jump between two times on the same trajectory:
// x_to = (u_to - u_from v_to / v_from) x0 + (v_to / v_from) x_t.
// t_from == t_to returns the state unchanged; v(t_to) == 0 returns x0.
Matrix deterministic_step(const Matrix& x_t, const Matrix& x0, double t_from, double t_to,
                          const Schedule& schedule);

}  // namespace bcdiff
