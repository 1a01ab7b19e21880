#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bcdiff/boundary.hpp"
#include "bcdiff/config.hpp"
#include "bcdiff/data_eval.hpp"
#include "bcdiff/denoiser.hpp"
#include "bcdiff/discrete_space.hpp"
#include "bcdiff/schedules.hpp"
#include "bcdiff/trajectory.hpp"

namespace bcdiff {

// How discrete states are embedded: a random trainable/frozen table, the
// fixed 256-state byte code table, or the 2-state sign-bit table.
enum class SpaceRepr { embedding, fixed_binary, binary_bits };

SpaceRepr space_repr_from_string(const std::string& s);
const char* to_string(SpaceRepr repr);

struct SpaceSpec {
    SpaceRepr repr = SpaceRepr::embedding;
    std::size_t K = 16;
    std::size_t m = 8;
    bool trainable = true;
    std::uint64_t seed = 1;  // copied from the run seed by the config builder
};

// The fixed representations ignore K/m/trainable; they are what they are.
EmbeddingTable make_table(const SpaceSpec& spec);

struct TrainConfig {
    ScheduleKind schedule = ScheduleKind::vp;
    int T = 1000;
    double beta_min = 1e-4;
    double beta_max = 2e-2;
    double sigma_min = 0.01;
    double sigma_max = 50.0;
    double r = 0.5;
    std::size_t batch = 32;
    std::size_t steps = 1000;
    double lr = 1e-3;
    double momentum = 0.9;
    double clip = 1.0;
    double w_mse = 1.0;
    double w_round = 1.0;
    std::size_t metrics_every = 50;
    std::uint64_t seed = 1;
    std::string data;  // dataset path; CLI runs fall back to it when no --data is given
    SpaceSpec space;
    NetConfig net;  // net.m and net.T are filled from space/T when the state is built
};

Schedule make_schedule(const TrainConfig& cfg);

// key = value form of a training run; unread or malformed keys raise.
TrainConfig train_config_from(const KeyValues& kv);
KeyValues to_key_values(const TrainConfig& cfg);

struct TrainState {
    TrainConfig cfg;
    Schedule schedule;
    EmbeddingTable table;
    DenoiserNet net;
    SgdState sgd;
    std::uint64_t step = 0;

    explicit TrainState(const TrainConfig& cfg);

    // Wraps the current net; valid while this state is alive.
    Predictor predictor() const;
};

// Mean over rows of the squared row distance.
double loss_mse(const Matrix& pred, const Matrix& x0);

// Mean over rows of the cross entropy of softmax(state scores of pred)
// against the true index; max-stabilized. When d_pred is given it receives
// the gradient (1/n) Emb^T (p - onehot) per row; when d_emb is given its
// rows accumulate (1/n)(p_j - onehot_j) pred_i, the only path besides the
// regression target through which embeddings learn.
double loss_rounding(const Matrix& pred, const std::vector<std::size_t>& indices,
                     const EmbeddingTable& table, Matrix* d_pred = nullptr,
                     Matrix* d_emb = nullptr);

struct FieldCheck {
    double gap = 0.0;    // max over rows of the squared field mismatch
    double bound = 0.0;  // the per-row bound at that same row
    bool ok = true;      // every row satisfied gap <= bound (up to rounding slack)
};

// Verifies, on actual field evaluations with the times frozen at the data's
// rescaling, that replacing x0 by the prediction perturbs the trajectory
// derivative by at most (dtau/dt)^2 (u' - v' u/v)^2 times the squared
// prediction error, elementwise.
FieldCheck field_bound_check(const Matrix& x0, const Matrix& pred, const RescaledPoint& pt,
                             const BoundaryEstimate& estimate, const Schedule& schedule);

struct StepMetrics {
    double loss = 0.0;
    double loss_mse = 0.0;
    double loss_round = 0.0;
    double acc = 0.0;          // rounding accuracy of the batch predictions
    double masked_frac = 0.0;  // elements whose exit estimate fell back to the sentinel
    double wall_ms = 0.0;
    FieldCheck field;
    bool has_field = false;
};

// One optimizer step: draws `batch` (datum, t, noise) triples from streams
// derived off (seed, step, sample), noises each datum along the r-rescaled
// trajectory, predicts x0 with the net conditioned on the nominal t, and
// applies the clipped momentum update of
//   w_mse * loss_mse + w_round * loss_rounding.
// Per-sample gradients are reduced in sample order and losses Kahan-summed,
// so results are bit-identical for any worker count.
StepMetrics train_step(TrainState& state, const Dataset& data, bool diagnostics = false);

struct TrainOptions {
    std::size_t steps = 0;     // 0 means cfg.steps
    std::string metrics_path;  // CSV of logged steps; empty disables
    bool diagnostics = false;  // run the field bound check on logged steps
    std::function<void(std::uint64_t step, const StepMetrics&)> observer;  // logged steps
};

void train(TrainState& state, const Dataset& data, const TrainOptions& opt = {});

// Binary checkpoint: magic, config echo, run seed, step count, then the
// embedding table and every layer's weights and biases as named float32
// little-endian arrays. Optimizer momentum is deliberately not part of the
// format; loading restarts it at zero.
void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

}  // namespace bcdiff
