#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>

#include "bcdiff/boundary.hpp"
#include "bcdiff/data_eval.hpp"
#include "bcdiff/discrete_space.hpp"
#include "bcdiff/parallel.hpp"
#include "bcdiff/rng.hpp"
#include "bcdiff/schedules.hpp"
#include "bcdiff/training.hpp"

using namespace bcdiff;

namespace {

template <class F>
double time_ms(int reps, F&& fn) {
    auto start = std::chrono::steady_clock::now();
    for (int k = 0; k < reps; ++k) fn();
    auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

bool same_estimate(const BoundaryEstimate& a, const BoundaryEstimate& b) {
    return a.t0 == b.t0 && a.u_t0 == b.u_t0 && a.v_t0 == b.v_t0 && a.j_star == b.j_star &&
           a.masked == b.masked;
}

void bench_boundary(std::size_t n, std::size_t K, std::size_t m, int reps) {
    Schedule schedule = Schedule::vp(1000);
    EmbeddingTable table = random_embedding_table(K, m, 11, false);
    RngStream rng(derive_seed(11, kSeedEval, 0xbe));
    std::vector<std::size_t> indices(n);
    for (auto& idx : indices) idx = rng.uniform_below(K);
    DiscreteDatum datum = datum_from_indices(indices, table);
    Matrix eps(n, m);
    rng.fill_normal(eps);

    BoundaryEstimate ref = estimate_boundary_serial(datum.x0, eps, indices, table, schedule);
    BoundaryEstimate par = estimate_boundary(datum.x0, eps, indices, table, schedule);
    double serial_ms = time_ms(
        reps, [&] { ref = estimate_boundary_serial(datum.x0, eps, indices, table, schedule); });
    double parallel_ms =
        time_ms(reps, [&] { par = estimate_boundary(datum.x0, eps, indices, table, schedule); });

    std::cout << "boundary estimation  n=" << n << " K=" << K << " m=" << m << "\n"
              << "  serial   " << serial_ms << " ms\n"
              << "  parallel " << parallel_ms << " ms  (x" << serial_ms / parallel_ms << ")\n"
              << "  bitwise match: " << (same_estimate(ref, par) ? "yes" : "NO") << "\n";
    if (!same_estimate(ref, par)) std::exit(1);
}

void bench_train_step(int reps) {
    TrainConfig cfg;
    cfg.T = 1000;
    cfg.batch = 48;
    cfg.net.hidden = 96;
    SyntheticSource source = make_source(SourceKind::markov_tokens, 7);
    Dataset data = generate_dataset(source, 128, 7);

    auto run = [&](int threads) {
        set_threads(threads);
        TrainState state(cfg);
        StepMetrics last;
        double ms = time_ms(reps, [&] { last = train_step(state, data); });
        set_threads(0);
        return std::pair<double, StepMetrics>(ms, last);
    };
    auto [serial_ms, serial_last] = run(1);
    auto [parallel_ms, parallel_last] = run(max_threads());

    std::cout << "training step  batch=" << cfg.batch << " hidden=" << cfg.net.hidden << "\n"
              << "  serial   " << serial_ms << " ms\n"
              << "  parallel " << parallel_ms << " ms  (x" << serial_ms / parallel_ms << ")\n"
              << "  bitwise match: "
              << (serial_last.loss == parallel_last.loss && serial_last.acc == parallel_last.acc
                      ? "yes"
                      : "NO")
              << "\n";
    if (serial_last.loss != parallel_last.loss) std::exit(1);
}

}  // namespace

int main() {
    std::cout << "workers: " << max_threads() << "\n\n";
    bench_boundary(4096, 64, 16, 20);
    std::cout << "\n";
    bench_train_step(10);
    return 0;
}
