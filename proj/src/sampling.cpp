#include "bcdiff/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "bcdiff/parallel.hpp"
#include "bcdiff/trajectory.hpp"

namespace bcdiff {

SampleMode sample_mode_from_string(const std::string& s) {
    if (s == "deterministic") return SampleMode::deterministic;
    if (s == "gaussian") return SampleMode::gaussian;
    throw std::invalid_argument("unknown sampler mode: " + s);
}

const char* to_string(SampleMode mode) {
    return mode == SampleMode::deterministic ? "deterministic" : "gaussian";
}

std::vector<double> make_time_grid(int T, int steps) {
    if (steps < 1 || steps > T)
        throw std::invalid_argument("time grid needs 1 <= steps <= T");
    std::vector<double> grid(std::size_t(steps) + 1);
    int base = T / steps;
    int longer = T - base * steps;  // the first `longer` gaps get one extra
    int t = T;
    grid[0] = double(T);
    for (int k = 0; k < steps; ++k) {
        t -= base + (k < longer ? 1 : 0);
        grid[std::size_t(k) + 1] = double(t);
    }
    return grid;
}

std::vector<double> time_grid_from_intervals(int T, const std::vector<int>& intervals) {
    if (intervals.empty()) throw std::invalid_argument("interval list is empty");
    std::vector<double> grid;
    grid.reserve(intervals.size() + 1);
    int t = T;
    grid.push_back(double(T));
    for (int gap : intervals) {
        if (gap < 1) throw std::invalid_argument("intervals must be positive");
        t -= gap;
        grid.push_back(double(t));
    }
    if (t != 0) throw std::invalid_argument("intervals must sum to T");
    return grid;
}

SamplerConfig sampler_config_from(const KeyValues& kv) {
    SamplerConfig cfg;
    cfg.steps = int(kv.get_int("steps", cfg.steps));
    if (kv.has("intervals")) {
        std::string list = kv.get_string("intervals", "");
        std::size_t pos = 0;
        while (pos < list.size()) {
            std::size_t comma = list.find(',', pos);
            if (comma == std::string::npos) comma = list.size();
            cfg.intervals.push_back(std::stoi(list.substr(pos, comma - pos)));
            pos = comma + 1;
        }
    }
    cfg.r = kv.get_double("r", cfg.r);
    cfg.alteration = kv.get_bool("alteration", cfg.alteration);
    cfg.mode = sample_mode_from_string(kv.get_string("mode", "deterministic"));
    cfg.sigma_max = kv.get_double("sigma_max", cfg.sigma_max);
    cfg.seed = kv.get_u64("seed", cfg.seed);
    cfg.n = std::size_t(kv.get_int("n", std::int64_t(cfg.n)));
    if (cfg.steps < 1) throw std::invalid_argument("steps must be positive");
    if (!(cfg.r >= 0.0 && cfg.r <= 1.0)) throw std::invalid_argument("r must lie in [0, 1]");
    if (cfg.sigma_max < 0.0) throw std::invalid_argument("sigma_max must be non-negative");
    return cfg;
}

namespace {

void require_finite(const Matrix& x, int step) {
    for (double v : x.data)
        if (!std::isfinite(v))
            throw std::runtime_error("sampler produced a non-finite state at step " +
                                     std::to_string(step));
}

}  // namespace

SampleResult sample_one(const Predictor& predict, const EmbeddingTable& table,
                        const Schedule& schedule, const SamplerConfig& cfg, RngStream& rng) {
    if (cfg.n == 0) throw std::invalid_argument("sampler needs n > 0");
    std::size_t n = cfg.n, m = table.m();
    int T = schedule.T();
    std::vector<double> grid = cfg.intervals.empty() ? make_time_grid(T, cfg.steps)
                                                     : time_grid_from_intervals(T, cfg.intervals);
    int steps = int(grid.size()) - 1;
    Matrix x(n, m);
    rng.fill_normal(x);
    Matrix eps_hat = x;  // the initial state is its own driving noise
    std::vector<double> tau(n, double(T));
    double v_horizon = schedule.coeff(T).v;
    Matrix x0_hat, z;
    for (int k = 0; k < steps; ++k) {
        double t_now = grid[std::size_t(k)];
        x0_hat = predict(x, t_now);
        require_finite(x0_hat, k);
        if (cfg.alteration) {
            // Noise consistent with the previous state and the fresh x0; tau
            // still holds the times the state was built at.
            for (std::size_t i = 0; i < n; ++i) {
                Coeff c = schedule.coeff_at(tau[i]);
                if (!(c.v > 0.0)) continue;
                const double* xr = x.row(i);
                const double* pr = x0_hat.row(i);
                double* er = eps_hat.row(i);
                for (std::size_t col = 0; col < m; ++col)
                    er[col] = (xr[col] - c.u * pr[col]) / c.v;
            }
        }
        bool inject = cfg.mode == SampleMode::gaussian && cfg.sigma_max > 0.0;
        double sigma = 0.0;
        if (inject) {
            sigma = cfg.sigma_max * schedule.coeff_at(t_now).v / v_horizon;
            if (z.rows != n) z = Matrix(n, m);
            rng.fill_normal(z);
        }
        double t_next = grid[std::size_t(k) + 1];
        std::vector<std::size_t> anchors = round_to_discrete(x0_hat, table);
        BoundaryEstimate est = estimate_boundary(x0_hat, eps_hat, anchors, table, schedule);
        tau = rescale_time(t_next, est.t0, cfg.r, schedule);
        bool final_step = k + 1 == steps;
        for (std::size_t i = 0; i < n; ++i) {
            Coeff c = schedule.coeff_at(tau[i]);
            if (!final_step && !(c.v > 0.0)) {
                // A degenerate rescaled time can only collapse the noise scale
                // on the last hop; elsewhere hold the clock at 1.
                tau[i] = std::max(tau[i], 1.0);
                c = schedule.coeff_at(tau[i]);
            }
            const double* pr = x0_hat.row(i);
            const double* er = eps_hat.row(i);
            double* xr = x.row(i);
            for (std::size_t col = 0; col < m; ++col) {
                double val = c.u * pr[col] + c.v * er[col];
                xr[col] = inject ? val + sigma * z.row(i)[col] : val;
            }
        }
        require_finite(x, k);
    }
    SampleResult out;
    out.x0_continuous = predict(x, std::max(grid.back(), 1.0));
    out.indices = round_to_discrete(out.x0_continuous, table);
    return out;
}

std::vector<SampleResult> sample_batch(const Predictor& predict, const EmbeddingTable& table,
                                       const Schedule& schedule, const SamplerConfig& cfg,
                                       std::size_t count) {
    // Validate the grid and element count up front; a throw inside the
    // parallel region could not propagate.
    if (cfg.n == 0) throw std::invalid_argument("sampling needs at least one element");
    if (cfg.intervals.empty())
        make_time_grid(schedule.T(), cfg.steps);
    else
        time_grid_from_intervals(schedule.T(), cfg.intervals);
    std::vector<SampleResult> results(count);
    parallel_for(count, [&](std::size_t s) {
        RngStream rng(derive_seed(cfg.seed, kSeedSampler, s));
        results[s] = sample_one(predict, table, schedule, cfg, rng);
    });
    return results;
}

}  // namespace bcdiff
