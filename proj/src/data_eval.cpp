#include "bcdiff/data_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bcdiff/parallel.hpp"
#include "bcdiff/rng.hpp"
#include "bcdiff/trajectory.hpp"

namespace bcdiff {

SourceKind source_kind_from_string(const std::string& s) {
    if (s == "markov_tokens") return SourceKind::markov_tokens;
    if (s == "categorical_grid") return SourceKind::categorical_grid;
    if (s == "binary_subpixels") return SourceKind::binary_subpixels;
    throw std::invalid_argument("unknown data source: " + s);
}

const char* to_string(SourceKind kind) {
    switch (kind) {
        case SourceKind::markov_tokens: return "markov_tokens";
        case SourceKind::categorical_grid: return "categorical_grid";
        case SourceKind::binary_subpixels: return "binary_subpixels";
    }
    return "?";
}

namespace {

std::size_t draw_categorical(RngStream& rng, const double* p, std::size_t K) {
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < K; ++k) {
        acc += p[k];
        if (u < acc) return k;
    }
    return K - 1;
}

}  // namespace

SyntheticSource make_source(SourceKind kind, std::uint64_t seed) {
    SyntheticSource src;
    src.kind = kind;
    src.seed = seed;
    RngStream rng(derive_seed(seed, kSeedData, 0xdef));
    switch (kind) {
        case SourceKind::markov_tokens: {
            src.K = 16;
            src.n = 8;
            src.transition = Matrix(src.K, src.K);
            for (std::size_t i = 0; i < src.K; ++i) {
                std::size_t targets[3];
                std::size_t filled = 0;
                while (filled < 3) {
                    std::size_t cand = rng.uniform_below(src.K);
                    bool dup = false;
                    for (std::size_t p = 0; p < filled; ++p) dup |= targets[p] == cand;
                    if (!dup) targets[filled++] = cand;
                }
                double w[3], total = 0.0;
                for (double& x : w) {
                    double u = rng.uniform();
                    x = 0.25 + u * u;
                    total += x;
                }
                for (std::size_t p = 0; p < 3; ++p)
                    src.transition.at(i, targets[p]) = w[p] / total;
            }
            src.initial.assign(src.K, 1.0 / double(src.K));
            break;
        }
        case SourceKind::categorical_grid: {
            src.K = 8;
            src.n = 64;
            src.marginals.resize(src.K);
            double total = 0.0;
            for (double& p : src.marginals) {
                double u = rng.uniform();
                p = 0.3 + u * u;
                total += p;
            }
            for (double& p : src.marginals) p /= total;
            break;
        }
        case SourceKind::binary_subpixels: {
            src.K = 2;
            src.pixels = 64;
            src.n = src.pixels * 8;
            double base_mean[4] = {40.0, 100.0, 160.0, 220.0};
            double total = 0.0;
            for (int mode = 0; mode < 4; ++mode) {
                src.mix_mean.push_back(base_mean[mode] + (rng.uniform() * 20.0 - 10.0));
                src.mix_sigma.push_back(12.0 + rng.uniform() * 4.0);
                double w = 0.5 + rng.uniform();
                src.mix_weight.push_back(w);
                total += w;
            }
            for (double& w : src.mix_weight) w /= total;
            break;
        }
    }
    return src;
}

Dataset generate_dataset(const SyntheticSource& source, std::size_t count, std::uint64_t seed) {
    Dataset data;
    data.K = source.K;
    data.items.resize(count);
    parallel_for(count, [&](std::size_t item) {
        RngStream rng(derive_seed(seed, kSeedData, item + 1));
        std::vector<std::size_t>& idx = data.items[item];
        switch (source.kind) {
            case SourceKind::markov_tokens: {
                idx.resize(source.n);
                idx[0] = draw_categorical(rng, source.initial.data(), source.K);
                for (std::size_t i = 1; i < source.n; ++i)
                    idx[i] = draw_categorical(rng, source.transition.row(idx[i - 1]), source.K);
                break;
            }
            case SourceKind::categorical_grid: {
                idx.resize(source.n);
                for (std::size_t i = 0; i < source.n; ++i)
                    idx[i] = draw_categorical(rng, source.marginals.data(), source.K);
                break;
            }
            case SourceKind::binary_subpixels: {
                idx.resize(source.n);
                for (std::size_t p = 0; p < source.pixels; ++p) {
                    std::size_t mode = draw_categorical(rng, source.mix_weight.data(),
                                                        source.mix_weight.size());
                    double value =
                        source.mix_mean[mode] + source.mix_sigma[mode] * rng.normal();
                    double clamped = std::clamp(std::round(value), 0.0, 255.0);
                    auto bits = encode_binary(unsigned(clamped));
                    for (std::size_t b = 0; b < 8; ++b)
                        idx[p * 8 + b] = bits[b] > 0.0 ? 0 : 1;  // +1 anchors index 0
                }
                break;
            }
        }
    });
    return data;
}

void save_dataset(const Dataset& data, SourceKind kind, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    const char* sep = kind == SourceKind::markov_tokens ? " " : ",";
    for (const auto& item : data.items) {
        for (std::size_t i = 0; i < item.size(); ++i) {
            if (i) out << sep;
            out << item[i];
        }
        out << "\n";
    }
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    Dataset data;
    std::string line;
    std::size_t max_index = 0;
    while (std::getline(in, line)) {
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        std::vector<std::size_t> item;
        std::size_t v;
        while (row >> v) {
            item.push_back(v);
            max_index = std::max(max_index, v);
        }
        if (!item.empty()) data.items.push_back(std::move(item));
    }
    data.K = max_index + 1;
    return data;
}

TvReport eval_distribution(const Dataset& generated, const Dataset& reference) {
    std::size_t K = std::max(generated.K, reference.K);
    if (K == 0) throw std::invalid_argument("eval_distribution needs non-empty corpora");
    auto histograms = [K](const Dataset& d, std::vector<double>& uni, std::vector<double>& bi) {
        uni.assign(K, 0.0);
        bi.assign(K * K, 0.0);
        double uni_total = 0.0, bi_total = 0.0;
        for (const auto& item : d.items) {
            for (std::size_t i = 0; i < item.size(); ++i) {
                uni[item[i]] += 1.0;
                uni_total += 1.0;
                if (i + 1 < item.size()) {
                    bi[item[i] * K + item[i + 1]] += 1.0;
                    bi_total += 1.0;
                }
            }
        }
        if (uni_total > 0.0)
            for (double& x : uni) x /= uni_total;
        if (bi_total > 0.0)
            for (double& x : bi) x /= bi_total;
    };
    std::vector<double> gu, gb, ru, rb;
    histograms(generated, gu, gb);
    histograms(reference, ru, rb);
    TvReport tv{0.0, 0.0};
    for (std::size_t k = 0; k < K; ++k) tv.unigram += std::fabs(gu[k] - ru[k]);
    for (std::size_t k = 0; k < K * K; ++k) tv.bigram += std::fabs(gb[k] - rb[k]);
    tv.unigram *= 0.5;
    tv.bigram *= 0.5;
    return tv;
}

double RecoveryReport::mean_acc() const {
    double s = 0.0;
    for (double a : acc) s += a;
    return acc.empty() ? 0.0 : s / double(acc.size());
}

RecoveryReport eval_recovery(const Predictor& predict, const EmbeddingTable& table,
                             const Schedule& schedule, const Dataset& data, double r,
                             const std::vector<double>& t_list, std::size_t draws,
                             std::uint64_t seed) {
    if (data.items.empty() || t_list.empty() || draws == 0)
        throw std::invalid_argument("eval_recovery needs data, times, and draws");
    std::size_t items = data.items.size();
    std::size_t times = t_list.size();
    // Per-item accumulators, reduced in index order afterwards.
    std::vector<std::vector<double>> hit(items, std::vector<double>(times, 0.0));
    std::vector<std::vector<double>> tot(items, std::vector<double>(times, 0.0));
    std::vector<double> masked(items, 0.0), t0_sum(items, 0.0), t0_count(items, 0.0);
    parallel_for(items, [&](std::size_t item) {
        DiscreteDatum datum = datum_from_indices(data.items[item], table);
        std::size_t n = datum.indices.size();
        Matrix eps(n, table.m());
        for (std::size_t ti = 0; ti < times; ++ti) {
            for (std::size_t d = 0; d < draws; ++d) {
                RngStream rng(derive_seed(seed, kSeedEval, item, ti * 4096 + d));
                rng.fill_normal(eps);
                BoundaryEstimate est;
                RescaledPoint pt = forward_sample(datum.x0, eps, t_list[ti], schedule,
                                                  datum.indices, table, r, &est);
                Matrix pred = predict(pt.x, t_list[ti]);
                auto rounded = round_to_discrete(pred, table);
                for (std::size_t i = 0; i < n; ++i) {
                    hit[item][ti] += rounded[i] == datum.indices[i] ? 1.0 : 0.0;
                    tot[item][ti] += 1.0;
                }
                masked[item] += est.masked_fraction();
                for (double t0 : est.t0) t0_sum[item] += t0;
                t0_count[item] += double(n);
            }
        }
    });
    RecoveryReport report;
    report.t = t_list;
    report.acc.assign(times, 0.0);
    std::vector<double> total(times, 0.0);
    double masked_total = 0.0, t0_total = 0.0, t0_n = 0.0;
    for (std::size_t item = 0; item < items; ++item) {
        for (std::size_t ti = 0; ti < times; ++ti) {
            report.acc[ti] += hit[item][ti];
            total[ti] += tot[item][ti];
        }
        masked_total += masked[item];
        t0_total += t0_sum[item];
        t0_n += t0_count[item];
    }
    for (std::size_t ti = 0; ti < times; ++ti) report.acc[ti] /= total[ti];
    report.masked_frac = masked_total / double(items * times * draws);
    report.mean_t0 = t0_total / t0_n;
    return report;
}

}  // namespace bcdiff
