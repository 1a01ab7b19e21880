#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bcdiff/discrete_space.hpp"
#include "bcdiff/matrix.hpp"

namespace bcdiff {

// Anything that maps a noisy state and a nominal time to an x0 prediction.
using Predictor = std::function<Matrix(const Matrix&, double)>;

struct NetConfig {
    std::size_t m = 0;        // row dimension of the data
    std::size_t hidden = 128;
    int hidden_layers = 2;
    std::size_t time_dim = 32;
    bool context = false;  // append the mean-pooled row to every input
    int T = 0;             // grid length for the sinusoidal time table
};

// Per-position MLP denoiser predicting x0 rows from noisy rows. Inputs are
// [x_row | time embedding | optional mean of all rows]; hidden layers use
// tanh; the output layer starts at zero so a fresh net predicts exactly 0.
struct DenoiserNet {
    NetConfig cfg;
    std::vector<Matrix> W;  // W[l] is out x in; hidden_layers + 1 entries
    std::vector<Matrix> b;  // 1 x out
    Matrix time_table;      // (T+1) x time_dim

    static DenoiserNet create(const NetConfig& cfg, std::uint64_t seed);

    std::size_t in_dim() const { return cfg.m + cfg.time_dim + (cfg.context ? cfg.m : 0); }
    std::size_t param_count() const;

    Matrix forward(const Matrix& x, double t) const;
};

// Activations kept for the backward pass (one sample).
struct NetWorkspace {
    Matrix input;             // n x in_dim
    std::vector<Matrix> act;  // post-tanh hidden activations, n x hidden
    Matrix out;               // n x m
};

void forward_ws(const DenoiserNet& net, const Matrix& x, double t, NetWorkspace& ws);

struct NetGrads {
    std::vector<Matrix> dW;
    std::vector<Matrix> db;
    Matrix d_emb;  // K x m, allocated only for trainable tables

    static NetGrads zeros_like(const DenoiserNet& net, const EmbeddingTable& table);
    void add(const NetGrads& other);
    void scale(double s);
    double squared_norm() const;
};

// Reverse-mode gradients of the network parameters for the given output
// cotangent; activations come from a prior forward_ws call. Gradients do not
// flow into the inputs (the noisy state is treated as data).
void backward(const DenoiserNet& net, const NetWorkspace& ws, const Matrix& d_out,
              NetGrads& grads);

// SGD with classical momentum and global-norm gradient clipping. Updates the
// net and, when the table is trainable, the embedding rows.
struct SgdState {
    std::vector<Matrix> vW;
    std::vector<Matrix> vb;
    Matrix v_emb;

    static SgdState zeros_like(const DenoiserNet& net, const EmbeddingTable& table);
};

void sgd_step(DenoiserNet& net, EmbeddingTable& table, NetGrads& grads, SgdState& state,
              double lr, double momentum, double clip);

}  // namespace bcdiff
