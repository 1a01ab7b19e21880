#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "bcdiff/parallel.hpp"
#include "bcdiff/training.hpp"
#include "plain_reference.hpp"

using namespace bcdiff;

namespace {

Dataset tiny_markov(std::size_t count, std::uint64_t seed) {
    SyntheticSource src = make_source(SourceKind::markov_tokens, 7);
    return generate_dataset(src, count, seed);
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.T = 100;
    cfg.batch = 8;
    cfg.steps = 40;
    cfg.metrics_every = 10;
    cfg.net.hidden = 16;
    cfg.net.hidden_layers = 1;
    cfg.net.time_dim = 8;
    cfg.space.K = 16;
    cfg.space.m = 8;
    return cfg;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("regression loss averages squared row distances") {
    Matrix x0(4, 3, 0.0);
    Matrix pred = x0;
    pred.at(1, 2) += 1.0;
    CHECK(loss_mse(pred, x0) == doctest::Approx(0.25).epsilon(1e-12));

    Matrix p2 = pred;
    Matrix x2 = x0;
    for (std::size_t c = 0; c < 3; ++c) {
        std::swap(p2.at(0, c), p2.at(1, c));
        std::swap(x2.at(0, c), x2.at(1, c));
    }
    CHECK(loss_mse(p2, x2) == doctest::Approx(loss_mse(pred, x0)).epsilon(1e-12));
}

TEST_CASE("rounding loss of a zero prediction is log K") {
    EmbeddingTable table = random_embedding_table(16, 8, 3, false);
    Matrix pred(5, 8, 0.0);
    std::vector<std::size_t> idx = {0, 3, 7, 15, 2};
    CHECK(loss_rounding(pred, idx, table) == doctest::Approx(std::log(16.0)).epsilon(1e-12));
}

TEST_CASE("rounding loss gradients match finite differences") {
    EmbeddingTable table = random_embedding_table(6, 4, 9, true);
    Matrix pred = random_normal(3, 4, 44);
    std::vector<std::size_t> idx = {2, 0, 5};

    Matrix d_pred(3, 4, 0.0);
    Matrix d_emb(6, 4, 0.0);
    loss_rounding(pred, idx, table, &d_pred, &d_emb);

    double h = 1e-6;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        double saved = pred.data[k];
        pred.data[k] = saved + h;
        double up = loss_rounding(pred, idx, table);
        pred.data[k] = saved - h;
        double down = loss_rounding(pred, idx, table);
        pred.data[k] = saved;
        CHECK(d_pred.data[k] == doctest::Approx((up - down) / (2.0 * h)).epsilon(1e-4).scale(1.0));
    }
    for (std::size_t k = 0; k < table.emb.size(); ++k) {
        double saved = table.emb.data[k];
        table.emb.data[k] = saved + h;
        double up = loss_rounding(pred, idx, table);
        table.emb.data[k] = saved - h;
        double down = loss_rounding(pred, idx, table);
        table.emb.data[k] = saved;
        CHECK(d_emb.data[k] == doctest::Approx((up - down) / (2.0 * h)).epsilon(1e-4).scale(1.0));
    }
}

TEST_CASE("a train step is bit-identical for any worker count") {
    Dataset data = tiny_markov(64, 21);
    TrainConfig cfg = small_config();

    set_threads(1);
    TrainState serial(cfg);
    StepMetrics ms1 = train_step(serial, data);
    StepMetrics ms2 = train_step(serial, data);

    set_threads(4);
    TrainState par(cfg);
    StepMetrics mp1 = train_step(par, data);
    StepMetrics mp2 = train_step(par, data);
    set_threads(0);

    CHECK(ms1.loss == mp1.loss);
    CHECK(ms2.loss == mp2.loss);
    CHECK(ms2.loss_mse == mp2.loss_mse);
    CHECK(ms2.loss_round == mp2.loss_round);
    CHECK(ms2.acc == mp2.acc);
    CHECK(ms2.masked_frac == mp2.masked_frac);
    for (std::size_t l = 0; l < serial.net.W.size(); ++l) {
        CHECK(serial.net.W[l].data == par.net.W[l].data);
        CHECK(serial.net.b[l].data == par.net.b[l].data);
    }
    CHECK(serial.table.emb.data == par.table.emb.data);
}

TEST_CASE("at r = 0 a train step equals its plain-diffusion mirror") {
    Dataset data = tiny_markov(48, 22);
    TrainConfig cfg = small_config();
    cfg.r = 0.0;

    TrainState state(cfg);
    TrainState mirror(cfg);
    for (int s = 0; s < 3; ++s) {
        StepMetrics m = train_step(state, data);
        plainref::PlainStepOut p = plainref::plain_train_step(mirror, data);
        CHECK(m.loss_mse == p.loss_mse);
        CHECK(m.loss_round == p.loss_round);
        CHECK(m.acc == p.acc);
    }
    for (std::size_t l = 0; l < state.net.W.size(); ++l) {
        CHECK(state.net.W[l].data == mirror.net.W[l].data);
        CHECK(state.net.b[l].data == mirror.net.b[l].data);
    }
    CHECK(state.table.emb.data == mirror.table.emb.data);
}

TEST_CASE("a short run reduces the loss") {
    Dataset data = tiny_markov(96, 23);
    TrainConfig cfg = small_config();
    cfg.steps = 150;
    cfg.lr = 3e-3;
    cfg.metrics_every = 10;

    TrainState state(cfg);
    std::vector<double> losses;
    TrainOptions opt;
    opt.observer = [&](std::uint64_t, const StepMetrics& m) { losses.push_back(m.loss); };
    train(state, data, opt);
    REQUIRE(losses.size() > 3);
    CHECK(losses.back() < losses.front());
    CHECK(state.step == 150);
}

TEST_CASE("non-finite parameters stop the run with an error") {
    Dataset data = tiny_markov(16, 24);
    TrainConfig cfg = small_config();
    cfg.steps = 5;
    cfg.metrics_every = 1000;  // the check must not depend on logging

    TrainState state(cfg);
    state.net.W[0].data[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train(state, data), std::runtime_error);
}

TEST_CASE("checkpoints round-trip byte for byte and preserve behavior") {
    Dataset data = tiny_markov(32, 25);
    TrainConfig cfg = small_config();
    cfg.steps = 6;
    TrainState state(cfg);
    train(state, data);

    std::string p1 = temp_path("bcdiff_ckp_a.bin");
    std::string p2 = temp_path("bcdiff_ckp_b.bin");
    save_checkpoint(state, p1);
    TrainState loaded = load_checkpoint(p1);
    save_checkpoint(loaded, p2);
    CHECK(slurp(p1) == slurp(p2));
    CHECK(loaded.step == state.step);
    CHECK(loaded.cfg.T == cfg.T);

    std::vector<double> times = {25.0, 75.0};
    RecoveryReport before =
        eval_recovery(state.predictor(), state.table, state.schedule, data, cfg.r, times, 3, 5);
    RecoveryReport after =
        eval_recovery(loaded.predictor(), loaded.table, loaded.schedule, data, cfg.r, times, 3, 5);
    CHECK(before.acc == after.acc);
    CHECK(before.masked_frac == after.masked_frac);
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("binary representations drop the rounding loss unless asked") {
    KeyValues kv;
    kv.set("space", "binary_bits");
    TrainConfig cfg = train_config_from(kv);
    CHECK(cfg.w_round == 0.0);

    KeyValues kv2;
    kv2.set("space", "fixed_binary");
    kv2.set("w_round", "0.7");
    TrainConfig cfg2 = train_config_from(kv2);
    CHECK(cfg2.w_round == 0.7);

    KeyValues kv3;
    TrainConfig cfg3 = train_config_from(kv3);
    CHECK(cfg3.w_round == 1.0);
}

TEST_CASE("the dataset path survives the config round trip") {
    TrainConfig cfg;
    cfg.data = "runs/train.txt";
    cfg.T = 123;
    KeyValues kv = to_key_values(cfg);
    TrainConfig back = train_config_from(kv);
    CHECK(back.data == "runs/train.txt");
    CHECK(back.T == 123);

    TrainConfig blank;
    KeyValues kv2 = to_key_values(blank);
    CHECK(!kv2.has("data"));
}

TEST_CASE("the train state wires net and table together") {
    TrainConfig cfg = small_config();
    TrainState state(cfg);
    CHECK(state.net.cfg.m == state.table.m());
    CHECK(state.net.cfg.T == cfg.T);
    CHECK(state.table.K() == 16);

    TrainConfig fb = small_config();
    fb.space.repr = SpaceRepr::fixed_binary;
    TrainState fstate(fb);
    CHECK(fstate.table.K() == 256);
    CHECK(fstate.table.m() == 8);
    CHECK(fstate.table.trainable == false);
}

TEST_CASE("the field perturbation bound is met and is tight") {
    EmbeddingTable table = random_embedding_table(12, 6, 31, false);
    Schedule schedule = Schedule::vp(500);
    RngStream rng(77);
    std::vector<std::size_t> idx;
    for (int i = 0; i < 10; ++i) idx.push_back(rng.uniform_below(12));
    DiscreteDatum datum = datum_from_indices(idx, table);
    Matrix eps(10, 6);
    rng.fill_normal(eps);

    BoundaryEstimate est;
    RescaledPoint pt = forward_sample(datum.x0, eps, 200.0, schedule, idx, table, 0.5, &est);

    FieldCheck exact = field_bound_check(datum.x0, datum.x0, pt, est, schedule);
    CHECK(exact.ok);
    // The identity gap of an exact prediction is pure rounding noise from
    // the eps reconstruction; squared, that sits far below 1e-30.
    CHECK(exact.gap < 1e-30);

    Matrix pred = datum.x0;
    for (double& v : pred.data) v += 0.1 * rng.normal();
    FieldCheck off = field_bound_check(datum.x0, pred, pt, est, schedule);
    CHECK(off.ok);
    REQUIRE(off.gap > 0.0);
    CHECK(off.gap == doctest::Approx(off.bound).epsilon(1e-6));
}
