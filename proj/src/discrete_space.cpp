#include "bcdiff/discrete_space.hpp"

#include <cmath>
#include <stdexcept>

#include "bcdiff/rng.hpp"

namespace bcdiff {

namespace {

double row_gap(const double* a, const double* b, std::size_t m) {
    double gap = 0.0;
    for (std::size_t i = 0; i < m; ++i) gap = std::max(gap, std::fabs(a[i] - b[i]));
    return gap;
}

}  // namespace

EmbeddingTable random_embedding_table(std::size_t K, std::size_t m, std::uint64_t seed,
                                      bool trainable) {
    if (K < 2 || m < 1) throw std::invalid_argument("embedding table needs K >= 2, m >= 1");
    EmbeddingTable table;
    table.emb = Matrix(K, m);
    table.trainable = trainable;
    RngStream rng(derive_seed(seed, kSeedEmbedding));
    double scale = 1.0 / std::sqrt(double(m));
    for (std::size_t j = 0; j < K; ++j) {
        for (int attempt = 0;; ++attempt) {
            double* row = table.emb.row(j);
            for (std::size_t c = 0; c < m; ++c) row[c] = (2.0 * rng.uniform() - 1.0) * scale;
            bool distinct = true;
            for (std::size_t p = 0; p < j && distinct; ++p)
                distinct = row_gap(row, table.emb.row(p), m) > 1e-8;
            if (distinct) break;
            if (attempt > 64) throw std::runtime_error("embedding init failed to separate rows");
        }
    }
    return table;
}

EmbeddingTable binary_bit_table() {
    EmbeddingTable table;
    table.emb = Matrix(2, 1);
    table.emb.at(0, 0) = 1.0;
    table.emb.at(1, 0) = -1.0;
    table.trainable = false;
    return table;
}

EmbeddingTable fixed_binary_table() {
    EmbeddingTable table;
    table.emb = Matrix(256, 8);
    for (unsigned v = 0; v < 256; ++v) {
        auto code = encode_binary(v);
        for (std::size_t b = 0; b < 8; ++b) table.emb.at(v, b) = code[b];
    }
    table.trainable = false;
    return table;
}

double likelihood(const double* x, std::size_t m, const EmbeddingTable& table, std::size_t j) {
    if (j >= table.K()) throw std::out_of_range("state index outside table");
    if (m != table.m()) throw std::invalid_argument("likelihood: dimension mismatch");
    return dot(table.row(j), x, m);
}

std::size_t round_row_to_discrete(const double* x, std::size_t m, const EmbeddingTable& table) {
    if (m != table.m()) throw std::invalid_argument("rounding: dimension mismatch");
    std::size_t best = 0;
    double best_score = dot(table.row(0), x, m);
    for (std::size_t j = 1; j < table.K(); ++j) {
        double score = dot(table.row(j), x, m);
        if (score > best_score) {  // strict: ties keep the lowest index
            best_score = score;
            best = j;
        }
    }
    return best;
}

std::vector<std::size_t> round_to_discrete(const Matrix& x, const EmbeddingTable& table) {
    std::vector<std::size_t> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i)
        out[i] = round_row_to_discrete(x.row(i), x.cols, table);
    return out;
}

std::array<double, 8> encode_binary(unsigned value) {
    if (value > 255) throw std::out_of_range("binary code needs value 0..255");
    std::array<double, 8> bits;
    for (std::size_t b = 0; b < 8; ++b)
        bits[b] = (value >> (7 - b)) & 1u ? 1.0 : -1.0;
    return bits;
}

unsigned decode_binary(const double* bits) {
    unsigned value = 0;
    for (std::size_t b = 0; b < 8; ++b)
        if (bits[b] >= 0.0) value |= 1u << (7 - b);
    return value;
}

DiscreteDatum datum_from_indices(const std::vector<std::size_t>& indices,
                                 const EmbeddingTable& table) {
    DiscreteDatum d;
    d.indices = indices;
    d.x0 = Matrix(indices.size(), table.m());
    refresh_datum(d, table);
    return d;
}

void refresh_datum(DiscreteDatum& d, const EmbeddingTable& table) {
    for (std::size_t i = 0; i < d.indices.size(); ++i) {
        std::size_t j = d.indices[i];
        if (j >= table.K()) throw std::out_of_range("datum index outside table");
        const double* src = table.row(j);
        double* dst = d.x0.row(i);
        for (std::size_t c = 0; c < table.m(); ++c) dst[c] = src[c];
    }
}

}  // namespace bcdiff
