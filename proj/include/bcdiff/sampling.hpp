#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcdiff/boundary.hpp"
#include "bcdiff/config.hpp"
#include "bcdiff/denoiser.hpp"
#include "bcdiff/discrete_space.hpp"
#include "bcdiff/matrix.hpp"
#include "bcdiff/rng.hpp"
#include "bcdiff/schedules.hpp"

namespace bcdiff {

enum class SampleMode { deterministic, gaussian };

SampleMode sample_mode_from_string(const std::string& s);
const char* to_string(SampleMode mode);

// Descending nominal time grid T = g[0] > ... > g[steps] = 0 with near-equal
// integer gaps; the longer gaps come first. Requires 1 <= steps <= T.
std::vector<double> make_time_grid(int T, int steps);

// Same grid from an explicit gap list; gaps must be positive and sum to T.
std::vector<double> time_grid_from_intervals(int T, const std::vector<int>& intervals);

struct SamplerConfig {
    int steps = 20;
    std::vector<int> intervals;  // explicit gap list; overrides steps when non-empty
    double r = 0.5;              // rescaling strength used while generating
    bool alteration = true;      // refresh the noise estimate from the state each step
    SampleMode mode = SampleMode::deterministic;
    double sigma_max = 0.1;  // gaussian: injected noise scale at t = T
    std::uint64_t seed = 1;
    std::size_t n = 0;  // elements per generated datum
};

SamplerConfig sampler_config_from(const KeyValues& kv);

struct SampleResult {
    std::vector<std::size_t> indices;
    Matrix x0_continuous;
};

// One reverse pass from pure noise. Each iteration predicts x0, optionally
// re-derives the driving noise from the previous state, rounds the
// prediction to re-estimate every element's exit time, and rebuilds the
// state at the rescaled next time; the gaussian mode adds fresh noise
// scaled by sigma_max v(t)/v(T) before stepping. With r = 0 and alteration
// on this reduces exactly to the plain x0-prediction recurrence.
SampleResult sample_one(const Predictor& predict, const EmbeddingTable& table,
                        const Schedule& schedule, const SamplerConfig& cfg, RngStream& rng);

// count independent passes, one derived stream per sample, so the output is
// identical for any worker count.
std::vector<SampleResult> sample_batch(const Predictor& predict, const EmbeddingTable& table,
                                       const Schedule& schedule, const SamplerConfig& cfg,
                                       std::size_t count);

}  // namespace bcdiff
