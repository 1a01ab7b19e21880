#include "bcdiff/oracle.hpp"

#include <stdexcept>
#include <vector>

#include "bcdiff/trajectory.hpp"

namespace bcdiff {

double brute_first_exit(const double* x0_row, const double* eps_row, std::size_t I,
                        const EmbeddingTable& table, const Schedule& schedule, int grid_density) {
    if (grid_density < 1) throw std::invalid_argument("brute_first_exit needs grid_density >= 1");
    std::size_t K = table.K();
    std::size_t m = table.m();
    if (I >= K) throw std::out_of_range("brute_first_exit: state index outside table");
    long long steps = static_cast<long long>(grid_density) * schedule.T();
    std::vector<double> point(m);
    for (long long j = 0; j <= steps; ++j) {
        double t = double(j) / double(grid_density);
        Coeff c = schedule.coeff_at(t);
        for (std::size_t col = 0; col < m; ++col)
            point[col] = c.u * x0_row[col] + c.v * eps_row[col];
        double own = dot(table.row(I), point.data(), m);
        for (std::size_t k = 0; k < K; ++k) {
            if (k == I) continue;
            if (dot(table.row(k), point.data(), m) >= own) return t;
        }
    }
    return double(schedule.T());
}

std::size_t brute_argmax(const double* x_row, const EmbeddingTable& table) {
    // Backward scan with >= keeps the lowest index on ties.
    std::size_t K = table.K();
    std::size_t m = table.m();
    std::size_t best = K - 1;
    double best_score = dot(table.row(K - 1), x_row, m);
    for (std::size_t j = K - 1; j-- > 0;) {
        double score = dot(table.row(j), x_row, m);
        if (score >= best_score) {
            best_score = score;
            best = j;
        }
    }
    return best;
}

Matrix finite_diff_field(const Matrix& x0, const Matrix& eps, double t, const Schedule& schedule,
                         const std::vector<std::size_t>& indices, const EmbeddingTable& table,
                         double r, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_field needs h > 0");
    RescaledPoint hi = forward_sample(x0, eps, t + h, schedule, indices, table, r);
    RescaledPoint lo = forward_sample(x0, eps, t - h, schedule, indices, table, r);
    Matrix out(x0.rows, x0.cols);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = (hi.x.data[i] - lo.x.data[i]) / (2.0 * h);
    return out;
}

}  // namespace bcdiff
