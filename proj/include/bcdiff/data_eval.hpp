#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcdiff/denoiser.hpp"
#include "bcdiff/discrete_space.hpp"
#include "bcdiff/matrix.hpp"
#include "bcdiff/schedules.hpp"

namespace bcdiff {

enum class SourceKind { markov_tokens, categorical_grid, binary_subpixels };

SourceKind source_kind_from_string(const std::string& s);
const char* to_string(SourceKind kind);

// Synthetic data whose distribution is known exactly.
//   markov_tokens:    K=16 states, length-8 sequences from a sparse
//                     order-1 chain (3 allowed successors per state)
//   categorical_grid: 8x8 grid, K=8, cells independent with fixed marginals
//   binary_subpixels: 8x8 grayscale pixels from a 4-mode mixture, each pixel
//                     split into 8 sign bits (K=2 elements, n=512)
struct SyntheticSource {
    SourceKind kind = SourceKind::markov_tokens;
    std::uint64_t seed = 7;
    std::size_t K = 0;  // states per element
    std::size_t n = 0;  // elements per datum

    Matrix transition;            // markov: K x K row-stochastic
    std::vector<double> initial;  // markov: start distribution

    std::vector<double> marginals;  // grid: cell distribution

    std::vector<double> mix_weight, mix_mean, mix_sigma;  // binary: pixel mixture
    std::size_t pixels = 0;
};

SyntheticSource make_source(SourceKind kind, std::uint64_t seed);

struct Dataset {
    std::vector<std::vector<std::size_t>> items;
    std::size_t K = 0;

    std::size_t size() const { return items.size(); }
};

// Same (source, count, seed) always yields the same dataset, independent of
// worker count.
Dataset generate_dataset(const SyntheticSource& source, std::size_t count, std::uint64_t seed);

// markov_tokens stores whitespace-separated indices, the grid kinds
// comma-separated indices; one datum per line. Loading accepts either
// separator.
void save_dataset(const Dataset& data, SourceKind kind, const std::string& path);
Dataset load_dataset(const std::string& path);

struct TvReport {
    double unigram;
    double bigram;
};

// Empirical total-variation distances between two corpora: unigram pools all
// elements, bigram pools adjacent element pairs in storage order.
TvReport eval_distribution(const Dataset& generated, const Dataset& reference);

struct RecoveryReport {
    std::vector<double> t;    // evaluated nominal times
    std::vector<double> acc;  // one-step rounding accuracy per time
    double masked_frac = 0.0;
    double mean_t0 = 0.0;

    double mean_acc() const;
};

// One-step denoising accuracy: noise every datum to each nominal time along
// the r-rescaled trajectory, predict, round, and compare with the truth,
// averaging over the dataset and `draws` noise draws.
RecoveryReport eval_recovery(const Predictor& predict, const EmbeddingTable& table,
                             const Schedule& schedule, const Dataset& data, double r,
                             const std::vector<double>& t_list, std::size_t draws,
                             std::uint64_t seed);

}  // namespace bcdiff
