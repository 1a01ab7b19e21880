#include "bcdiff/boundary.hpp"

#include <cmath>
#include <stdexcept>

#include "bcdiff/parallel.hpp"

namespace bcdiff {

FractionResult boundary_fraction(const double* x0_row, const double* eps_row, std::size_t I,
                                 const EmbeddingTable& table) {
    std::size_t K = table.K();
    std::size_t m = table.m();
    if (I >= K) throw std::out_of_range("boundary_fraction: state index outside table");
    double f_x0_I = dot(table.row(I), table.row(I), m);  // anchor self score
    double f_eps_I = dot(table.row(I), eps_row, m);
    double best_q = kMaskedFraction;
    std::size_t best_j = I;
    bool found = false;
    for (std::size_t j = 0; j < K; ++j) {
        if (j == I) continue;
        double a = f_x0_I - dot(table.row(j), x0_row, m);
        double b = dot(table.row(j), eps_row, m) - f_eps_I;
        if (a < 0.0 || b <= 0.0) continue;  // no crossing toward j
        double q = a / b;
        if (!found || q < best_q) {
            best_q = q;
            best_j = j;
            found = true;
        }
    }
    return {found ? best_q : kMaskedFraction, best_j, !found};
}

BoundaryCoeff boundary_coeffs(double q, ScheduleKind kind) {
    if (!(q > 0.0)) throw std::invalid_argument("boundary_coeffs needs q > 0");
    switch (kind) {
        case ScheduleKind::vp:
            return {1.0 / std::sqrt(1.0 + q * q), 1.0 / std::sqrt(1.0 + 1.0 / (q * q))};
        case ScheduleKind::ve:
            return {1.0, q};
        case ScheduleKind::ot:
            return {1.0 / (1.0 + q), 1.0 / (1.0 + 1.0 / q)};
    }
    throw std::logic_error("unreachable");
}

double stopping_time(double q, const Schedule& schedule) {
    if (!(q > 0.0)) throw std::invalid_argument("stopping_time needs q > 0");
    double T = double(schedule.T());
    switch (schedule.kind()) {
        case ScheduleKind::ot:
            return T * q / (1.0 + q);
        case ScheduleKind::ve:
            return schedule.time_from_u(q).t;
        case ScheduleKind::vp: {
            double u_star = boundary_coeffs(q, ScheduleKind::vp).u;
            InvertedTime inv = schedule.time_from_u(u_star);
            if (inv.clamped) return inv.t;
            int k = int(inv.t);
            if (k == 0) return 0.0;
            const auto& u = schedule.u_table();
            // The count brackets the crossing in (k-1, k]; invert the
            // interpolation segment so coeff_at(t0).u == u_star.
            return double(k - 1) + (u[k - 1] - u_star) / (u[k - 1] - u[k]);
        }
    }
    throw std::logic_error("unreachable");
}

double BoundaryEstimate::masked_fraction() const {
    if (masked.empty()) return 0.0;
    double count = 0.0;
    for (auto flag : masked) count += flag ? 1.0 : 0.0;
    return count / double(masked.size());
}

namespace {

void estimate_row(BoundaryEstimate& out, const Matrix& x0, const Matrix& eps,
                  const std::vector<std::size_t>& indices, const EmbeddingTable& table,
                  const Schedule& schedule, std::size_t i) {
    FractionResult frac = boundary_fraction(x0.row(i), eps.row(i), indices[i], table);
    BoundaryCoeff c = boundary_coeffs(frac.q, schedule.kind());
    out.t0[i] = stopping_time(frac.q, schedule);
    out.u_t0[i] = c.u;
    out.v_t0[i] = c.v;
    out.j_star[i] = frac.j_star;
    out.masked[i] = frac.masked ? 1 : 0;
}

BoundaryEstimate make_estimate(std::size_t n) {
    BoundaryEstimate e;
    e.t0.resize(n);
    e.u_t0.resize(n);
    e.v_t0.resize(n);
    e.j_star.resize(n);
    e.masked.resize(n);
    return e;
}

void check_batch_args(const Matrix& x0, const Matrix& eps, const std::vector<std::size_t>& indices,
                      const EmbeddingTable& table) {
    require_same_shape(x0, eps, "estimate_boundary");
    if (x0.rows != indices.size() || x0.cols != table.m())
        throw std::invalid_argument("estimate_boundary: datum does not match table");
}

}  // namespace

BoundaryEstimate estimate_boundary(const Matrix& x0, const Matrix& eps,
                                   const std::vector<std::size_t>& indices,
                                   const EmbeddingTable& table, const Schedule& schedule) {
    check_batch_args(x0, eps, indices, table);
    BoundaryEstimate e = make_estimate(x0.rows);
    parallel_for(x0.rows,
                 [&](std::size_t i) { estimate_row(e, x0, eps, indices, table, schedule, i); });
    return e;
}

BoundaryEstimate estimate_boundary_serial(const Matrix& x0, const Matrix& eps,
                                          const std::vector<std::size_t>& indices,
                                          const EmbeddingTable& table, const Schedule& schedule) {
    check_batch_args(x0, eps, indices, table);
    BoundaryEstimate e = make_estimate(x0.rows);
    for (std::size_t i = 0; i < x0.rows; ++i)
        estimate_row(e, x0, eps, indices, table, schedule, i);
    return e;
}

BoundaryPoint psi(const Matrix& eps, const Matrix& x0, const Schedule& schedule,
                  const BoundaryEstimate& estimate) {
    (void)schedule;
    require_same_shape(eps, x0, "psi");
    if (estimate.size() != x0.rows) throw std::invalid_argument("psi: estimate size mismatch");
    BoundaryPoint out;
    out.x = Matrix(x0.rows, x0.cols);
    out.t0 = estimate.t0;
    for (std::size_t i = 0; i < x0.rows; ++i) {
        double u = estimate.u_t0[i];
        double v = estimate.v_t0[i];
        const double* xr = x0.row(i);
        const double* er = eps.row(i);
        double* o = out.x.row(i);
        for (std::size_t c = 0; c < x0.cols; ++c) o[c] = u * xr[c] + v * er[c];
    }
    return out;
}

Matrix psi_inverse(const Matrix& x_t0, const std::vector<double>& t0, const Matrix& x0,
                   const Schedule& schedule) {
    require_same_shape(x_t0, x0, "psi_inverse");
    if (t0.size() != x0.rows) throw std::invalid_argument("psi_inverse: time vector mismatch");
    Matrix eps(x0.rows, x0.cols);
    for (std::size_t i = 0; i < x0.rows; ++i) {
        Coeff c = schedule.coeff_at(t0[i]);
        if (!(c.v > 0.0)) throw std::domain_error("psi_inverse needs v(t) > 0");
        const double* xr = x_t0.row(i);
        const double* x0r = x0.row(i);
        double* er = eps.row(i);
        for (std::size_t col = 0; col < x0.cols; ++col) er[col] = (xr[col] - c.u * x0r[col]) / c.v;
    }
    return eps;
}

}  // namespace bcdiff
