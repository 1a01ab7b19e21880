#pragma once

// Plain diffusion coded straight from x_t = u(t) x0 + v(t) eps, with no use
// of the boundary, trajectory, or sampling modules. The r = 0 code paths of
// the library must land on these bit for bit, so every expression here keeps
// the same shape as its counterpart.

#include <cstdint>
#include <vector>

#include "bcdiff/data_eval.hpp"
#include "bcdiff/denoiser.hpp"
#include "bcdiff/discrete_space.hpp"
#include "bcdiff/matrix.hpp"
#include "bcdiff/rng.hpp"
#include "bcdiff/schedules.hpp"
#include "bcdiff/training.hpp"

namespace plainref {

using namespace bcdiff;

inline Matrix forward(const Matrix& x0, const Matrix& eps, int t, const Schedule& schedule) {
    Coeff c = schedule.coeff(t);
    Matrix out(x0.rows, x0.cols);
    for (std::size_t i = 0; i < x0.rows; ++i) {
        const double* x0r = x0.row(i);
        const double* er = eps.row(i);
        double* o = out.row(i);
        for (std::size_t col = 0; col < x0.cols; ++col) o[col] = c.u * x0r[col] + c.v * er[col];
    }
    return out;
}

struct PlainStepOut {
    double loss_mse = 0.0;
    double loss_round = 0.0;
    double acc = 0.0;
};

inline double plain_kahan(const std::vector<double>& xs) {
    double sum = 0.0, comp = 0.0;
    for (double x : xs) {
        double y = x - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

// One optimizer step of unrescaled diffusion training, drawing (item, t, eps)
// exactly as the library does and noising with the plain forward map.
inline PlainStepOut plain_train_step(TrainState& state, const Dataset& data) {
    const TrainConfig& cfg = state.cfg;
    std::size_t B = cfg.batch;
    std::size_t K = state.table.K(), m = state.table.m();
    std::vector<double> mse(B), round_ce(B), acc(B);
    std::vector<NetGrads> grads(B);
    for (std::size_t b = 0; b < B; ++b) {
        RngStream rng(derive_seed(cfg.seed, kSeedTrainDraw, state.step, b));
        std::size_t item = rng.uniform_below(data.items.size());
        int t = int(1 + rng.uniform_below(std::uint64_t(cfg.T)));
        DiscreteDatum datum = datum_from_indices(data.items[item], state.table);
        std::size_t n = datum.indices.size();
        Matrix eps(n, m);
        rng.fill_normal(eps);
        Matrix x_t = forward(datum.x0, eps, t, state.schedule);
        NetWorkspace ws;
        forward_ws(state.net, x_t, double(t), ws);
        const Matrix& pred = ws.out;

        grads[b] = NetGrads::zeros_like(state.net, state.table);
        mse[b] = loss_mse(pred, datum.x0);
        Matrix d_pred_round, d_emb_round;
        if (state.table.trainable) d_emb_round = Matrix(K, m);
        round_ce[b] = loss_rounding(pred, datum.indices, state.table, &d_pred_round,
                                    state.table.trainable ? &d_emb_round : nullptr);

        double inv_n = 1.0 / double(n);
        double mse_w = cfg.w_mse / double(B);
        double round_w = cfg.w_round / double(B);
        Matrix d_out(n, m);
        for (std::size_t i = 0; i < n; ++i) {
            const double* pr = pred.row(i);
            const double* x0r = datum.x0.row(i);
            const double* dr = d_pred_round.row(i);
            double* out = d_out.row(i);
            for (std::size_t c = 0; c < m; ++c)
                out[c] = mse_w * 2.0 * (pr[c] - x0r[c]) * inv_n + round_w * dr[c];
        }
        backward(state.net, ws, d_out, grads[b]);
        if (state.table.trainable) {
            for (std::size_t k = 0; k < grads[b].d_emb.size(); ++k)
                grads[b].d_emb.data[k] += round_w * d_emb_round.data[k];
            for (std::size_t i = 0; i < n; ++i) {
                double* target = grads[b].d_emb.row(datum.indices[i]);
                const double* pr = pred.row(i);
                const double* x0r = datum.x0.row(i);
                for (std::size_t c = 0; c < m; ++c)
                    target[c] += mse_w * 2.0 * (x0r[c] - pr[c]) * inv_n;
            }
        }
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i)
            hits += round_row_to_discrete(pred.row(i), m, state.table) == datum.indices[i];
        acc[b] = double(hits) / double(n);
    }
    NetGrads total = NetGrads::zeros_like(state.net, state.table);
    for (std::size_t b = 0; b < B; ++b) total.add(grads[b]);
    sgd_step(state.net, state.table, total, state.sgd, cfg.lr, cfg.momentum, cfg.clip);
    ++state.step;
    PlainStepOut out;
    out.loss_mse = plain_kahan(mse) / double(B);
    out.loss_round = plain_kahan(round_ce) / double(B);
    out.acc = plain_kahan(acc) / double(B);
    return out;
}

inline std::vector<double> plain_grid(int T, int steps) {
    std::vector<double> grid(std::size_t(steps) + 1);
    int base = T / steps;
    int longer = T - base * steps;
    int t = T;
    grid[0] = double(T);
    for (int k = 0; k < steps; ++k) {
        t -= base + (k < longer ? 1 : 0);
        grid[std::size_t(k) + 1] = double(t);
    }
    return grid;
}

struct PlainSample {
    std::vector<std::size_t> indices;
    Matrix x0_continuous;
};

// The x0-prediction reverse recurrence with the driving noise re-derived
// from the current state each step (the alteration-on mirror), optionally
// injecting sigma_max v(t)/v(T) fresh noise per step.
inline PlainSample plain_sample(const Predictor& predict, const EmbeddingTable& table,
                                const Schedule& schedule, int steps, std::size_t n,
                                bool refresh_noise, double sigma_max, RngStream& rng) {
    std::size_t m = table.m();
    int T = schedule.T();
    std::vector<double> grid = plain_grid(T, steps);
    Matrix x(n, m);
    rng.fill_normal(x);
    Matrix eps_hat = x;
    double v_horizon = schedule.coeff(T).v;
    Matrix x0_hat, z;
    for (int k = 0; k < steps; ++k) {
        double t_now = grid[std::size_t(k)];
        x0_hat = predict(x, t_now);
        if (refresh_noise) {
            Coeff c = schedule.coeff_at(t_now);
            for (std::size_t i = 0; i < n; ++i) {
                const double* xr = x.row(i);
                const double* pr = x0_hat.row(i);
                double* er = eps_hat.row(i);
                for (std::size_t col = 0; col < m; ++col)
                    er[col] = (xr[col] - c.u * pr[col]) / c.v;
            }
        }
        bool inject = sigma_max > 0.0;
        double sigma = 0.0;
        if (inject) {
            sigma = sigma_max * schedule.coeff_at(t_now).v / v_horizon;
            if (z.rows != n) z = Matrix(n, m);
            rng.fill_normal(z);
        }
        double t_next = grid[std::size_t(k) + 1];
        Coeff c = schedule.coeff_at(t_next);
        for (std::size_t i = 0; i < n; ++i) {
            const double* pr = x0_hat.row(i);
            const double* er = eps_hat.row(i);
            double* xr = x.row(i);
            for (std::size_t col = 0; col < m; ++col) {
                double val = c.u * pr[col] + c.v * er[col];
                xr[col] = inject ? val + sigma * z.row(i)[col] : val;
            }
        }
    }
    PlainSample out;
    out.x0_continuous = predict(x, std::max(grid.back(), 1.0));
    out.indices = round_to_discrete(out.x0_continuous, table);
    return out;
}

// Plain one-step recovery, mirroring the evaluation loop's streams.
inline double plain_recovery_acc(const Predictor& predict, const EmbeddingTable& table,
                                 const Schedule& schedule, const Dataset& data, int t,
                                 std::size_t ti, std::size_t draws, std::uint64_t seed) {
    double hits = 0.0, total = 0.0;
    for (std::size_t item = 0; item < data.items.size(); ++item) {
        DiscreteDatum datum = datum_from_indices(data.items[item], table);
        Matrix eps(datum.indices.size(), table.m());
        for (std::size_t d = 0; d < draws; ++d) {
            RngStream rng(derive_seed(seed, kSeedEval, item, ti * 4096 + d));
            rng.fill_normal(eps);
            Matrix x_t = forward(datum.x0, eps, t, schedule);
            Matrix pred = predict(x_t, double(t));
            auto rounded = round_to_discrete(pred, table);
            for (std::size_t i = 0; i < rounded.size(); ++i) {
                hits += rounded[i] == datum.indices[i] ? 1.0 : 0.0;
                total += 1.0;
            }
        }
    }
    return hits / total;
}

}  // namespace plainref
