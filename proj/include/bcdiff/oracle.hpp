#pragma once

#include <cstddef>
#include <vector>

#include "bcdiff/discrete_space.hpp"
#include "bcdiff/matrix.hpp"
#include "bcdiff/schedules.hpp"

namespace bcdiff {

// Slow reference answers computed by scanning, kept free of the closed-form
// machinery they cross-check. These functions evaluate trajectories and
// scores directly from their definitions.

// Walks t over a dense grid of grid_density points per unit step and returns
// the first time the point u(t) x0 + v(t) eps ties or loses the score
// contest for state I; returns T when that never happens.
double brute_first_exit(const double* x0_row, const double* eps_row, std::size_t I,
                        const EmbeddingTable& table, const Schedule& schedule,
                        int grid_density = 32);

// Winning state by direct scan (ties to the lowest index).
std::size_t brute_argmax(const double* x_row, const EmbeddingTable& table);

// Central-difference time derivative of the rescaled trajectory, h in grid
// units. Positions come from forward_sample; only the differentiation is
// approximated.
Matrix finite_diff_field(const Matrix& x0, const Matrix& eps, double t, const Schedule& schedule,
                         const std::vector<std::size_t>& indices, const EmbeddingTable& table,
                         double r, double h = 1.0);

}  // namespace bcdiff
