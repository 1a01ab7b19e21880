#include "bcdiff/trajectory.hpp"

#include <stdexcept>

namespace bcdiff {

std::vector<double> rescale_time(double t, const std::vector<double>& t0, double r,
                                 const Schedule& schedule) {
    double T = double(schedule.T());
    if (!(t >= 0.0 && t <= T)) throw std::invalid_argument("rescale_time: t outside [0, T]");
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("rescale_time: r outside [0, 1]");
    std::vector<double> tau(t0.size());
    double stretch = 1.0 - t / T;
    for (std::size_t i = 0; i < t0.size(); ++i) tau[i] = t + r * t0[i] * stretch;
    return tau;
}

RescaledPoint forward_sample(const Matrix& x0, const Matrix& eps, double t,
                             const Schedule& schedule, const std::vector<std::size_t>& indices,
                             const EmbeddingTable& table, double r,
                             BoundaryEstimate* estimate_out) {
    BoundaryEstimate estimate = estimate_boundary(x0, eps, indices, table, schedule);
    RescaledPoint p;
    p.t = t;
    p.r = r;
    p.eps = eps;
    p.tau = rescale_time(t, estimate.t0, r, schedule);
    p.x = Matrix(x0.rows, x0.cols);
    for (std::size_t i = 0; i < x0.rows; ++i) {
        Coeff c = schedule.coeff_at(p.tau[i]);
        const double* x0r = x0.row(i);
        const double* er = eps.row(i);
        double* out = p.x.row(i);
        for (std::size_t col = 0; col < x0.cols; ++col) out[col] = c.u * x0r[col] + c.v * er[col];
    }
    if (estimate_out) *estimate_out = std::move(estimate);
    return p;
}

Matrix rescaled_vector_field(const Matrix& x0, const Matrix& eps, double t,
                             const Schedule& schedule, const std::vector<std::size_t>& indices,
                             const EmbeddingTable& table, double r) {
    BoundaryEstimate estimate = estimate_boundary(x0, eps, indices, table, schedule);
    std::vector<double> tau = rescale_time(t, estimate.t0, r, schedule);
    double T = double(schedule.T());
    Matrix field(x0.rows, x0.cols);
    for (std::size_t i = 0; i < x0.rows; ++i) {
        Coeff d = schedule.derivative_at(tau[i]);
        double scale = (T - r * estimate.t0[i]) / T;  // d tau / d t
        const double* x0r = x0.row(i);
        const double* er = eps.row(i);
        double* out = field.row(i);
        for (std::size_t col = 0; col < x0.cols; ++col)
            out[col] = (d.u * x0r[col] + d.v * er[col]) * scale;
    }
    return field;
}

Matrix deterministic_step(const Matrix& x_t, const Matrix& x0, double t_from, double t_to,
                          const Schedule& schedule) {
    require_same_shape(x_t, x0, "deterministic_step");
    if (t_to > t_from) throw std::invalid_argument("deterministic_step runs backward in time");
    if (t_to == t_from) return x_t;
    Coeff from = schedule.coeff_at(t_from);
    Coeff to = schedule.coeff_at(t_to);
    if (to.v == 0.0) return x0;  // the data endpoint
    if (!(from.v > 0.0)) throw std::domain_error("deterministic_step needs v(t_from) > 0");
    double ratio = to.v / from.v;
    double a = to.u - from.u * ratio;
    Matrix out(x_t.rows, x_t.cols);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a * x0.data[i] + ratio * x_t.data[i];
    return out;
}

}  // namespace bcdiff
