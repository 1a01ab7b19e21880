#include "bcdiff/denoiser.hpp"

#include <cmath>
#include <stdexcept>

#include "bcdiff/rng.hpp"

namespace bcdiff {

namespace {

std::size_t layer_in(const NetConfig& cfg, std::size_t in_dim, int layer) {
    return layer == 0 ? in_dim : cfg.hidden;
}

std::size_t layer_out(const NetConfig& cfg, int layer) {
    return layer == cfg.hidden_layers ? cfg.m : cfg.hidden;
}

void check_time_config(const NetConfig& cfg) {
    if (cfg.m == 0 || cfg.T < 1) throw std::invalid_argument("net config needs m > 0 and T >= 1");
    if (cfg.time_dim % 2 != 0 || cfg.time_dim == 0)
        throw std::invalid_argument("time_dim must be positive and even");
    if (cfg.hidden_layers < 0) throw std::invalid_argument("hidden_layers must be >= 0");
}

}  // namespace

DenoiserNet DenoiserNet::create(const NetConfig& cfg, std::uint64_t seed) {
    check_time_config(cfg);
    DenoiserNet net;
    net.cfg = cfg;
    std::size_t in = net.in_dim();
    int layers = cfg.hidden_layers + 1;
    net.W.resize(layers);
    net.b.resize(layers);
    RngStream rng(derive_seed(seed, kSeedNetInit));
    for (int l = 0; l < layers; ++l) {
        std::size_t fan_in = layer_in(cfg, in, l);
        std::size_t fan_out = layer_out(cfg, l);
        net.W[l] = Matrix(fan_out, fan_in);
        net.b[l] = Matrix(1, fan_out);
        if (l == layers - 1) continue;  // output layer stays at zero
        double bound = std::sqrt(6.0 / double(fan_in + fan_out));
        for (double& w : net.W[l].data) w = (2.0 * rng.uniform() - 1.0) * bound;
    }
    net.time_table = Matrix(cfg.T + 1, cfg.time_dim);
    std::size_t half = cfg.time_dim / 2;
    for (int t = 0; t <= cfg.T; ++t) {
        double* row = net.time_table.row(t);
        for (std::size_t i = 0; i < half; ++i) {
            double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
            row[2 * i] = std::sin(double(t) * freq);
            row[2 * i + 1] = std::cos(double(t) * freq);
        }
    }
    return net;
}

std::size_t DenoiserNet::param_count() const {
    std::size_t n = 0;
    for (const auto& w : W) n += w.size();
    for (const auto& bias : b) n += bias.size();
    return n;
}

void forward_ws(const DenoiserNet& net, const Matrix& x, double t, NetWorkspace& ws) {
    const NetConfig& cfg = net.cfg;
    if (x.cols != cfg.m) throw std::invalid_argument("denoiser forward: row dimension mismatch");
    std::size_t n = x.rows;
    std::size_t in = net.in_dim();
    int time_idx = int(std::llround(t));
    if (time_idx < 0) time_idx = 0;
    if (time_idx > cfg.T) time_idx = cfg.T;
    const double* temb = net.time_table.row(time_idx);

    ws.input = Matrix(n, in);
    std::vector<double> ctx;
    if (cfg.context) {
        ctx.assign(cfg.m, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = x.row(i);
            for (std::size_t c = 0; c < cfg.m; ++c) ctx[c] += row[c];
        }
        for (double& v : ctx) v /= double(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        double* dst = ws.input.row(i);
        const double* src = x.row(i);
        std::size_t p = 0;
        for (std::size_t c = 0; c < cfg.m; ++c) dst[p++] = src[c];
        for (std::size_t c = 0; c < cfg.time_dim; ++c) dst[p++] = temb[c];
        if (cfg.context)
            for (std::size_t c = 0; c < cfg.m; ++c) dst[p++] = ctx[c];
    }

    ws.act.assign(cfg.hidden_layers, Matrix());
    const Matrix* cur = &ws.input;
    for (int l = 0; l < cfg.hidden_layers; ++l) {
        std::size_t width = net.W[l].rows;
        ws.act[l] = Matrix(n, width);
        for (std::size_t i = 0; i < n; ++i) {
            const double* src = cur->row(i);
            double* dst = ws.act[l].row(i);
            for (std::size_t o = 0; o < width; ++o)
                dst[o] = std::tanh(dot(net.W[l].row(o), src, cur->cols) + net.b[l].at(0, o));
        }
        cur = &ws.act[l];
    }
    int last = cfg.hidden_layers;
    ws.out = Matrix(n, cfg.m);
    for (std::size_t i = 0; i < n; ++i) {
        const double* src = cur->row(i);
        double* dst = ws.out.row(i);
        for (std::size_t o = 0; o < cfg.m; ++o)
            dst[o] = dot(net.W[last].row(o), src, cur->cols) + net.b[last].at(0, o);
    }
}

Matrix DenoiserNet::forward(const Matrix& x, double t) const {
    NetWorkspace ws;
    forward_ws(*this, x, t, ws);
    return std::move(ws.out);
}

NetGrads NetGrads::zeros_like(const DenoiserNet& net, const EmbeddingTable& table) {
    NetGrads g;
    g.dW.reserve(net.W.size());
    g.db.reserve(net.b.size());
    for (const auto& w : net.W) g.dW.emplace_back(w.rows, w.cols);
    for (const auto& bias : net.b) g.db.emplace_back(bias.rows, bias.cols);
    if (table.trainable) g.d_emb = Matrix(table.K(), table.m());
    return g;
}

void NetGrads::add(const NetGrads& other) {
    for (std::size_t l = 0; l < dW.size(); ++l) {
        for (std::size_t i = 0; i < dW[l].size(); ++i) dW[l].data[i] += other.dW[l].data[i];
        for (std::size_t i = 0; i < db[l].size(); ++i) db[l].data[i] += other.db[l].data[i];
    }
    for (std::size_t i = 0; i < d_emb.size(); ++i) d_emb.data[i] += other.d_emb.data[i];
}

void NetGrads::scale(double s) {
    for (auto& w : dW)
        for (double& v : w.data) v *= s;
    for (auto& bias : db)
        for (double& v : bias.data) v *= s;
    for (double& v : d_emb.data) v *= s;
}

double NetGrads::squared_norm() const {
    double s = 0.0;
    for (const auto& w : dW)
        for (double v : w.data) s += v * v;
    for (const auto& bias : db)
        for (double v : bias.data) s += v * v;
    for (double v : d_emb.data) s += v * v;
    return s;
}

void backward(const DenoiserNet& net, const NetWorkspace& ws, const Matrix& d_out,
              NetGrads& grads) {
    const NetConfig& cfg = net.cfg;
    require_same_shape(d_out, ws.out, "denoiser backward");
    std::size_t n = d_out.rows;
    int last = cfg.hidden_layers;
    std::vector<double> h(cfg.hidden), next(cfg.hidden);
    for (std::size_t i = 0; i < n; ++i) {
        const double* src_last = last == 0 ? ws.input.row(i) : ws.act[last - 1].row(i);
        std::size_t last_in = last == 0 ? ws.input.cols : cfg.hidden;
        const double* go = d_out.row(i);
        for (std::size_t o = 0; o < cfg.m; ++o) {
            double* wrow = grads.dW[last].row(o);
            for (std::size_t c = 0; c < last_in; ++c) wrow[c] += go[o] * src_last[c];
            grads.db[last].at(0, o) += go[o];
        }
        if (last == 0) continue;
        // Pull the cotangent down through the hidden stack.
        h.assign(cfg.hidden, 0.0);
        for (std::size_t o = 0; o < cfg.m; ++o) {
            const double* wrow = net.W[last].row(o);
            for (std::size_t c = 0; c < cfg.hidden; ++c) h[c] += go[o] * wrow[c];
        }
        for (int l = last - 1; l >= 0; --l) {
            const double* a = ws.act[l].row(i);
            for (std::size_t c = 0; c < cfg.hidden; ++c) h[c] *= 1.0 - a[c] * a[c];
            const double* src = l == 0 ? ws.input.row(i) : ws.act[l - 1].row(i);
            std::size_t in_w = l == 0 ? ws.input.cols : cfg.hidden;
            for (std::size_t o = 0; o < net.W[l].rows; ++o) {
                double* wrow = grads.dW[l].row(o);
                for (std::size_t c = 0; c < in_w; ++c) wrow[c] += h[o] * src[c];
                grads.db[l].at(0, o) += h[o];
            }
            if (l > 0) {
                next.assign(cfg.hidden, 0.0);
                for (std::size_t o = 0; o < net.W[l].rows; ++o) {
                    const double* wrow = net.W[l].row(o);
                    for (std::size_t c = 0; c < cfg.hidden; ++c) next[c] += h[o] * wrow[c];
                }
                h.swap(next);
            }
        }
    }
}

SgdState SgdState::zeros_like(const DenoiserNet& net, const EmbeddingTable& table) {
    SgdState s;
    for (const auto& w : net.W) s.vW.emplace_back(w.rows, w.cols);
    for (const auto& bias : net.b) s.vb.emplace_back(bias.rows, bias.cols);
    if (table.trainable) s.v_emb = Matrix(table.K(), table.m());
    return s;
}

void sgd_step(DenoiserNet& net, EmbeddingTable& table, NetGrads& grads, SgdState& state,
              double lr, double momentum, double clip) {
    if (clip > 0.0) {
        double norm = std::sqrt(grads.squared_norm());
        if (norm > clip) grads.scale(clip / norm);
    }
    for (std::size_t l = 0; l < net.W.size(); ++l) {
        for (std::size_t i = 0; i < net.W[l].size(); ++i) {
            double& v = state.vW[l].data[i];
            v = momentum * v + grads.dW[l].data[i];
            net.W[l].data[i] -= lr * v;
        }
        for (std::size_t i = 0; i < net.b[l].size(); ++i) {
            double& v = state.vb[l].data[i];
            v = momentum * v + grads.db[l].data[i];
            net.b[l].data[i] -= lr * v;
        }
    }
    if (table.trainable) {
        for (std::size_t i = 0; i < table.emb.size(); ++i) {
            double& v = state.v_emb.data[i];
            v = momentum * v + grads.d_emb.data[i];
            table.emb.data[i] -= lr * v;
        }
    }
}

}  // namespace bcdiff
