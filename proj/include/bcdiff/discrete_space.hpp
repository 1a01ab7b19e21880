#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bcdiff/matrix.hpp"

namespace bcdiff {

// K discrete states anchored in R^m, one row per state. States compete by
// the linear score f(x, j) = Emb(j) . x; a point belongs to the state whose
// score wins.
struct EmbeddingTable {
    Matrix emb;  // K x m
    bool trainable = false;

    std::size_t K() const { return emb.rows; }
    std::size_t m() const { return emb.cols; }
    const double* row(std::size_t j) const { return emb.row(j); }
};

// Rows drawn uniformly from [-1/sqrt(m), +1/sqrt(m)], guaranteed pairwise
// distinct (max-norm gap > 1e-8, redrawing the row on collision).
EmbeddingTable random_embedding_table(std::size_t K, std::size_t m, std::uint64_t seed,
                                      bool trainable);

// K=2, m=1 anchor pair {+1, -1}; index 0 carries bit value +1.
EmbeddingTable binary_bit_table();

// K=256, m=8: row v holds the 8-bit code of v over {-1,+1}, MSB first.
EmbeddingTable fixed_binary_table();

// f(x, j) = Emb(j) . x. Throws std::out_of_range for a bad state index.
double likelihood(const double* x, std::size_t m, const EmbeddingTable& table, std::size_t j);

// Winning state of one point; score ties resolve to the lowest index.
std::size_t round_row_to_discrete(const double* x, std::size_t m, const EmbeddingTable& table);

// Row-wise rounding of a whole matrix (columns must equal the table's m).
std::vector<std::size_t> round_to_discrete(const Matrix& x, const EmbeddingTable& table);

// 8-bit binary code over {-1,+1}, MSB first; value must be 0..255.
std::array<double, 8> encode_binary(unsigned value);

// Threshold decode: coordinates >= 0 read as +1.
unsigned decode_binary(const double* bits);

// One datum: discrete indices plus their embedded rows.
struct DiscreteDatum {
    std::vector<std::size_t> indices;  // length n
    Matrix x0;                         // n x m
};

DiscreteDatum datum_from_indices(const std::vector<std::size_t>& indices,
                                 const EmbeddingTable& table);

// Rebuilds x0 rows from the indices (used after embedding updates).
void refresh_datum(DiscreteDatum& d, const EmbeddingTable& table);

}  // namespace bcdiff
