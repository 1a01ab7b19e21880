#include "bcdiff/training.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include "bcdiff/parallel.hpp"
#include "bcdiff/rng.hpp"

namespace bcdiff {

SpaceRepr space_repr_from_string(const std::string& s) {
    if (s == "embedding") return SpaceRepr::embedding;
    if (s == "fixed_binary") return SpaceRepr::fixed_binary;
    if (s == "binary_bits") return SpaceRepr::binary_bits;
    throw std::invalid_argument("unknown state representation: " + s);
}

const char* to_string(SpaceRepr repr) {
    switch (repr) {
        case SpaceRepr::embedding: return "embedding";
        case SpaceRepr::fixed_binary: return "fixed_binary";
        case SpaceRepr::binary_bits: return "binary_bits";
    }
    return "?";
}

EmbeddingTable make_table(const SpaceSpec& spec) {
    switch (spec.repr) {
        case SpaceRepr::embedding:
            return random_embedding_table(spec.K, spec.m, spec.seed, spec.trainable);
        case SpaceRepr::fixed_binary: return fixed_binary_table();
        case SpaceRepr::binary_bits: return binary_bit_table();
    }
    throw std::logic_error("unreachable");
}

Schedule make_schedule(const TrainConfig& cfg) {
    switch (cfg.schedule) {
        case ScheduleKind::vp: return Schedule::vp(cfg.T, cfg.beta_min, cfg.beta_max);
        case ScheduleKind::ve: return Schedule::ve(cfg.T, cfg.sigma_min, cfg.sigma_max);
        case ScheduleKind::ot: return Schedule::ot(cfg.T);
    }
    throw std::logic_error("unreachable");
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

TrainConfig train_config_from(const KeyValues& kv) {
    TrainConfig cfg;
    cfg.schedule = schedule_kind_from_string(kv.get_string("schedule", "vp"));
    cfg.T = int(kv.get_int("T", cfg.T));
    cfg.beta_min = kv.get_double("beta_min", cfg.beta_min);
    cfg.beta_max = kv.get_double("beta_max", cfg.beta_max);
    cfg.sigma_min = kv.get_double("sigma_min", cfg.sigma_min);
    cfg.sigma_max = kv.get_double("sigma_max", cfg.sigma_max);
    cfg.r = kv.get_double("r", cfg.r);
    cfg.batch = std::size_t(kv.get_int("batch", std::int64_t(cfg.batch)));
    cfg.steps = std::size_t(kv.get_int("steps", std::int64_t(cfg.steps)));
    cfg.lr = kv.get_double("lr", cfg.lr);
    cfg.momentum = kv.get_double("momentum", cfg.momentum);
    cfg.clip = kv.get_double("clip", cfg.clip);
    cfg.w_mse = kv.get_double("w_mse", cfg.w_mse);
    cfg.w_round = kv.get_double("w_round", cfg.w_round);
    cfg.metrics_every = std::size_t(kv.get_int("metrics_every", std::int64_t(cfg.metrics_every)));
    cfg.seed = kv.get_u64("seed", cfg.seed);
    cfg.data = kv.get_string("data", cfg.data);
    cfg.space.repr = space_repr_from_string(kv.get_string("space", "embedding"));
    bool binary = cfg.space.repr == SpaceRepr::binary_bits || cfg.space.repr == SpaceRepr::fixed_binary;
    if (binary && !kv.has("w_round")) cfg.w_round = 0.0;  // binary codes train on regression alone
    cfg.space.K = std::size_t(kv.get_int("K", std::int64_t(cfg.space.K)));
    cfg.space.m = std::size_t(kv.get_int("m", std::int64_t(cfg.space.m)));
    cfg.space.trainable = kv.get_bool("trainable_embedding", cfg.space.trainable);
    cfg.space.seed = cfg.seed;
    cfg.net.hidden = std::size_t(kv.get_int("hidden", std::int64_t(cfg.net.hidden)));
    cfg.net.hidden_layers = int(kv.get_int("hidden_layers", cfg.net.hidden_layers));
    cfg.net.time_dim = std::size_t(kv.get_int("time_dim", std::int64_t(cfg.net.time_dim)));
    cfg.net.context = kv.get_bool("context", cfg.net.context);
    if (!(cfg.r >= 0.0 && cfg.r <= 1.0)) throw std::invalid_argument("r must lie in [0, 1]");
    if (cfg.batch == 0) throw std::invalid_argument("batch must be positive");
    if (cfg.metrics_every == 0) throw std::invalid_argument("metrics_every must be positive");
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("lr must be positive");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
        throw std::invalid_argument("momentum must lie in [0, 1)");
    if (cfg.w_mse < 0.0 || cfg.w_round < 0.0)
        throw std::invalid_argument("loss weights must be non-negative");
    return cfg;
}

KeyValues to_key_values(const TrainConfig& cfg) {
    KeyValues kv;
    kv.set("schedule", to_string(cfg.schedule));
    kv.set("T", std::to_string(cfg.T));
    kv.set("beta_min", format_double(cfg.beta_min));
    kv.set("beta_max", format_double(cfg.beta_max));
    kv.set("sigma_min", format_double(cfg.sigma_min));
    kv.set("sigma_max", format_double(cfg.sigma_max));
    kv.set("r", format_double(cfg.r));
    kv.set("batch", std::to_string(cfg.batch));
    kv.set("steps", std::to_string(cfg.steps));
    kv.set("lr", format_double(cfg.lr));
    kv.set("momentum", format_double(cfg.momentum));
    kv.set("clip", format_double(cfg.clip));
    kv.set("w_mse", format_double(cfg.w_mse));
    kv.set("w_round", format_double(cfg.w_round));
    kv.set("metrics_every", std::to_string(cfg.metrics_every));
    kv.set("seed", std::to_string(cfg.seed));
    if (!cfg.data.empty()) kv.set("data", cfg.data);
    kv.set("space", to_string(cfg.space.repr));
    kv.set("K", std::to_string(cfg.space.K));
    kv.set("m", std::to_string(cfg.space.m));
    kv.set("trainable_embedding", cfg.space.trainable ? "true" : "false");
    kv.set("hidden", std::to_string(cfg.net.hidden));
    kv.set("hidden_layers", std::to_string(cfg.net.hidden_layers));
    kv.set("time_dim", std::to_string(cfg.net.time_dim));
    kv.set("context", cfg.net.context ? "true" : "false");
    return kv;
}

namespace {

SpaceSpec seeded_space(const TrainConfig& cfg) {
    SpaceSpec s = cfg.space;
    s.seed = cfg.seed;
    return s;
}

NetConfig completed_net(const TrainConfig& cfg, std::size_t m) {
    NetConfig n = cfg.net;
    n.m = m;
    n.T = cfg.T;
    return n;
}

}  // namespace

TrainState::TrainState(const TrainConfig& c)
    : cfg(c),
      schedule(make_schedule(c)),
      table(make_table(seeded_space(c))),
      net(DenoiserNet::create(completed_net(c, table.m()), c.seed)),
      sgd(SgdState::zeros_like(net, table)) {
    cfg.space.seed = c.seed;
    cfg.space.K = table.K();
    cfg.space.m = table.m();
    cfg.net = net.cfg;
}

Predictor TrainState::predictor() const {
    const DenoiserNet* n = &net;
    return [n](const Matrix& x, double t) { return n->forward(x, t); };
}

double loss_mse(const Matrix& pred, const Matrix& x0) {
    require_same_shape(pred, x0, "loss_mse");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double diff = pred.data[i] - x0.data[i];
        total += diff * diff;
    }
    return total / double(pred.rows);
}

double loss_rounding(const Matrix& pred, const std::vector<std::size_t>& indices,
                     const EmbeddingTable& table, Matrix* d_pred, Matrix* d_emb) {
    std::size_t n = pred.rows, m = pred.cols, K = table.K();
    if (indices.size() != n) throw std::invalid_argument("loss_rounding: one index per row");
    if (m != table.m()) throw std::invalid_argument("loss_rounding: row dimension mismatch");
    if (d_pred) *d_pred = Matrix(n, m);
    double inv_n = 1.0 / double(n);
    std::vector<double> logits(K), p(K);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = pred.row(i);
        std::size_t I = indices[i];
        if (I >= K) throw std::out_of_range("loss_rounding: state index out of range");
        double top = -HUGE_VAL;
        for (std::size_t j = 0; j < K; ++j) {
            logits[j] = dot(table.row(j), row, m);
            top = std::max(top, logits[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            p[j] = std::exp(logits[j] - top);
            z += p[j];
        }
        total += std::log(z) - (logits[I] - top);
        if (!d_pred && !d_emb) continue;
        for (std::size_t j = 0; j < K; ++j) {
            double g = (p[j] / z - (j == I ? 1.0 : 0.0)) * inv_n;
            if (d_pred) {
                double* out = d_pred->row(i);
                const double* ej = table.row(j);
                for (std::size_t c = 0; c < m; ++c) out[c] += g * ej[c];
            }
            if (d_emb) {
                double* out = d_emb->row(j);
                for (std::size_t c = 0; c < m; ++c) out[c] += g * row[c];
            }
        }
    }
    return total * inv_n;
}

FieldCheck field_bound_check(const Matrix& x0, const Matrix& pred, const RescaledPoint& pt,
                             const BoundaryEstimate& estimate, const Schedule& schedule) {
    require_same_shape(x0, pred, "field_bound_check");
    double T = double(schedule.T());
    FieldCheck out;
    for (std::size_t i = 0; i < x0.rows; ++i) {
        Coeff c = schedule.coeff_at(pt.tau[i]);
        if (!(c.v > 0.0)) continue;
        Coeff d = schedule.derivative_at(pt.tau[i]);
        double gamma = (T - pt.r * estimate.t0[i]) / T;
        const double* x0r = x0.row(i);
        const double* pr = pred.row(i);
        const double* er = pt.eps.row(i);
        const double* xr = pt.x.row(i);
        double gap = 0.0, err = 0.0;
        for (std::size_t col = 0; col < x0.cols; ++col) {
            double field_true = gamma * (d.u * x0r[col] + d.v * er[col]);
            double eps_hat = (xr[col] - c.u * pr[col]) / c.v;
            double field_model = gamma * (d.u * pr[col] + d.v * eps_hat);
            double g = field_true - field_model;
            gap += g * g;
            double diff = x0r[col] - pr[col];
            err += diff * diff;
        }
        double factor = gamma * (d.u - d.v * c.u / c.v);
        double bound = factor * factor * err;
        if (gap > out.gap) {
            out.gap = gap;
            out.bound = bound;
        }
        if (!(gap <= bound * (1.0 + 1e-9) + 1e-15)) out.ok = false;
    }
    return out;
}

namespace {

double kahan_sum(const std::vector<double>& xs) {
    double sum = 0.0, comp = 0.0;
    for (double x : xs) {
        double y = x - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

bool rows_collapsed(const EmbeddingTable& table) {
    for (std::size_t a = 0; a + 1 < table.K(); ++a)
        for (std::size_t b = a + 1; b < table.K(); ++b) {
            double gap = 0.0;
            for (std::size_t c = 0; c < table.m(); ++c)
                gap = std::max(gap, std::fabs(table.row(a)[c] - table.row(b)[c]));
            if (gap < 1e-6) return true;
        }
    return false;
}

}  // namespace

StepMetrics train_step(TrainState& state, const Dataset& data, bool diagnostics) {
    auto clock_start = std::chrono::steady_clock::now();
    const TrainConfig& cfg = state.cfg;
    if (data.items.empty()) throw std::invalid_argument("train_step: empty dataset");
    std::size_t B = cfg.batch;
    std::size_t K = state.table.K(), m = state.table.m();
    std::vector<double> mse(B), round_ce(B), acc(B), masked(B);
    std::vector<NetGrads> grads(B);
    std::vector<FieldCheck> field(B);
    parallel_for(B, [&](std::size_t b) {
        RngStream rng(derive_seed(cfg.seed, kSeedTrainDraw, state.step, b));
        std::size_t item = rng.uniform_below(data.items.size());
        double t = double(1 + rng.uniform_below(std::uint64_t(cfg.T)));
        DiscreteDatum datum = datum_from_indices(data.items[item], state.table);
        std::size_t n = datum.indices.size();
        Matrix eps(n, m);
        rng.fill_normal(eps);
        BoundaryEstimate est;
        RescaledPoint pt = forward_sample(datum.x0, eps, t, state.schedule, datum.indices,
                                          state.table, cfg.r, &est);
        NetWorkspace ws;
        forward_ws(state.net, pt.x, t, ws);
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
        masked[b] = est.masked_fraction();
        if (diagnostics) field[b] = field_bound_check(datum.x0, pred, pt, est, state.schedule);
    });

    NetGrads total = NetGrads::zeros_like(state.net, state.table);
    for (std::size_t b = 0; b < B; ++b) total.add(grads[b]);

    StepMetrics out;
    out.loss_mse = kahan_sum(mse) / double(B);
    out.loss_round = kahan_sum(round_ce) / double(B);
    out.loss = cfg.w_mse * out.loss_mse + cfg.w_round * out.loss_round;
    out.acc = kahan_sum(acc) / double(B);
    out.masked_frac = kahan_sum(masked) / double(B);
    if (diagnostics) {
        out.has_field = true;
        for (std::size_t b = 0; b < B; ++b) {
            if (field[b].gap > out.field.gap) {
                out.field.gap = field[b].gap;
                out.field.bound = field[b].bound;
            }
            out.field.ok = out.field.ok && field[b].ok;
        }
    }

    sgd_step(state.net, state.table, total, state.sgd, cfg.lr, cfg.momentum, cfg.clip);
    ++state.step;
    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                           clock_start)
                      .count();
    return out;
}

void train(TrainState& state, const Dataset& data, const TrainOptions& opt) {
    std::size_t steps = opt.steps ? opt.steps : state.cfg.steps;
    std::ofstream csv;
    if (!opt.metrics_path.empty()) {
        csv.open(opt.metrics_path);
        if (!csv) throw std::runtime_error("cannot write metrics file: " + opt.metrics_path);
        csv << "step,loss_mse,loss_round,acc,masked_frac,wall_ms\n";
    }
    bool warned_collapse = false;
    for (std::size_t s = 0; s < steps; ++s) {
        std::uint64_t step_index = state.step;
        bool logged = step_index % state.cfg.metrics_every == 0 || s + 1 == steps;
        StepMetrics metrics = train_step(state, data, opt.diagnostics && logged);
        if (!std::isfinite(metrics.loss))
            throw std::runtime_error("training diverged at step " + std::to_string(step_index));
        if (!logged) continue;
        if (csv.is_open()) {
            csv << step_index << ',' << metrics.loss_mse << ',' << metrics.loss_round << ','
                << metrics.acc << ',' << metrics.masked_frac << ',' << metrics.wall_ms << '\n';
            csv.flush();
        }
        if (opt.observer) opt.observer(step_index, metrics);
        if (!warned_collapse && state.table.trainable && rows_collapsed(state.table)) {
            std::cerr << "warning: two embedding rows are within 1e-6; states are merging\n";
            warned_collapse = true;
        }
    }
}

namespace {

constexpr char kCheckpointMagic[8] = {'b', 'c', 'd', 'f', 'c', 'k', 'p', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.put(char((v >> (8 * k)) & 0xff));
}

void put_u64(std::ostream& out, std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out.put(char((v >> (8 * k)) & 0xff));
}

void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) {
        int c = in.get();
        if (c == EOF) throw std::runtime_error("truncated checkpoint");
        v |= std::uint32_t(c & 0xff) << (8 * k);
    }
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) {
        int c = in.get();
        if (c == EOF) throw std::runtime_error("truncated checkpoint");
        v |= std::uint64_t(c & 0xff) << (8 * k);
    }
    return v;
}

void put_array(std::ostream& out, const std::string& name, const Matrix& m) {
    put_u32(out, std::uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    put_u32(out, 2);
    put_u64(out, m.rows);
    put_u64(out, m.cols);
    for (double v : m.data) put_f32(out, float(v));
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, 8);
    std::string echo = to_key_values(state.cfg).serialize();
    put_u64(out, echo.size());
    out.write(echo.data(), std::streamsize(echo.size()));
    put_u64(out, state.cfg.seed);
    put_u64(out, state.step);
    std::uint32_t layers = std::uint32_t(state.net.W.size());
    put_u32(out, 1 + 2 * layers);
    put_array(out, "embedding", state.table.emb);
    for (std::uint32_t l = 0; l < layers; ++l) {
        put_array(out, "W" + std::to_string(l), state.net.W[l]);
        put_array(out, "b" + std::to_string(l), state.net.b[l]);
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

TrainState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint64_t echo_len = get_u64(in);
    if (echo_len > (1u << 20)) throw std::runtime_error("corrupt checkpoint header: " + path);
    std::string echo(echo_len, '\0');
    in.read(echo.data(), std::streamsize(echo_len));
    if (std::uint64_t(in.gcount()) != echo_len) throw std::runtime_error("truncated checkpoint");
    TrainConfig cfg = train_config_from(KeyValues::parse(echo));
    cfg.seed = get_u64(in);
    std::uint64_t step = get_u64(in);

    TrainState state(cfg);
    std::uint32_t count = get_u32(in);
    std::map<std::string, Matrix> arrays;
    for (std::uint32_t a = 0; a < count; ++a) {
        std::uint32_t name_len = get_u32(in);
        if (name_len > 256) throw std::runtime_error("corrupt checkpoint array name");
        std::string name(name_len, '\0');
        in.read(name.data(), std::streamsize(name_len));
        if (std::uint32_t(in.gcount()) != name_len) throw std::runtime_error("truncated checkpoint");
        std::uint32_t ndim = get_u32(in);
        if (ndim != 2) throw std::runtime_error("unexpected checkpoint array rank");
        std::uint64_t rows = get_u64(in), cols = get_u64(in);
        if (rows * cols > (1ull << 28)) throw std::runtime_error("corrupt checkpoint array shape");
        Matrix m{std::size_t(rows), std::size_t(cols)};
        for (double& v : m.data) v = double(std::bit_cast<float>(get_u32(in)));
        arrays.emplace(std::move(name), std::move(m));
    }
    auto take = [&](const std::string& name, Matrix& into) {
        auto it = arrays.find(name);
        if (it == arrays.end()) throw std::runtime_error("checkpoint missing array " + name);
        if (!it->second.same_shape(into))
            throw std::runtime_error("checkpoint array " + name + " has the wrong shape");
        into = std::move(it->second);
    };
    take("embedding", state.table.emb);
    for (std::size_t l = 0; l < state.net.W.size(); ++l) {
        take("W" + std::to_string(l), state.net.W[l]);
        take("b" + std::to_string(l), state.net.b[l]);
    }
    state.step = step;
    return state;
}

}  // namespace bcdiff
