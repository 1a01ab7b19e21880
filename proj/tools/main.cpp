#include <CLI11.hpp>
#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bcdiff/boundary.hpp"
#include "bcdiff/config.hpp"
#include "bcdiff/data_eval.hpp"
#include "bcdiff/oracle.hpp"
#include "bcdiff/parallel.hpp"
#include "bcdiff/rng.hpp"
#include "bcdiff/sampling.hpp"
#include "bcdiff/training.hpp"

namespace {

using namespace bcdiff;

void put_u32le(std::ostream& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.put(char((v >> (8 * k)) & 0xff));
}

void put_f32le(std::ostream& out, float f) { put_u32le(out, std::bit_cast<std::uint32_t>(f)); }

void require_all_read(const KeyValues& kv) {
    auto stray = kv.unread_keys();
    if (stray.empty()) return;
    std::ostringstream msg;
    msg << "unknown config keys:";
    for (const auto& k : stray) msg << ' ' << k;
    throw std::invalid_argument(msg.str());
}

bool parse_switch(const std::string& s, const char* what) {
    if (s == "on" || s == "true" || s == "1" || s == "yes") return true;
    if (s == "off" || s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument(std::string(what) + " must be on or off, got " + s);
}

struct TrainArgs {
    std::string config, data, out, metrics;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double r = -1.0;
    long long steps = -1;
    bool diagnostics = false;
};

int run_train(const TrainArgs& a) {
    KeyValues kv = a.config.empty() ? KeyValues() : KeyValues::load(a.config);
    if (a.seed_set) kv.set("seed", std::to_string(a.seed));
    if (a.r >= 0.0) kv.set("r", std::to_string(a.r));
    if (a.steps >= 0) kv.set("steps", std::to_string(a.steps));
    if (!a.data.empty()) kv.set("data", a.data);
    TrainConfig cfg = train_config_from(kv);
    require_all_read(kv);
    if (cfg.data.empty())
        throw std::invalid_argument("no dataset: pass --data or set the data config key");
    Dataset data = load_dataset(cfg.data);
    TrainState state(cfg);
    if (data.K > state.table.K())
        throw std::invalid_argument("dataset uses more states than the table provides");
    TrainOptions opt;
    opt.metrics_path = a.metrics;
    opt.diagnostics = a.diagnostics;
    StepMetrics last;
    std::uint64_t last_step = 0;
    opt.observer = [&](std::uint64_t step, const StepMetrics& m) {
        last = m;
        last_step = step;
    };
    train(state, data, opt);
    save_checkpoint(state, a.out);
    std::cout << "trained " << state.step << " steps on " << data.size() << " items; step "
              << last_step << ": loss " << last.loss << ", accuracy " << last.acc
              << "; checkpoint " << a.out << "\n";
    return 0;
}

struct SampleArgs {
    std::string ckpt, out, dump, intervals;
    std::string mode = "deterministic";
    std::string alteration = "on";
    std::string format = "csv";
    std::size_t count = 16, n = 0;
    SamplerConfig cfg;
};

int run_sample(const SampleArgs& a) {
    TrainState state = load_checkpoint(a.ckpt);
    SamplerConfig cfg = a.cfg;
    cfg.mode = sample_mode_from_string(a.mode);
    cfg.alteration = parse_switch(a.alteration, "--alteration");
    cfg.n = a.n;
    if (cfg.n == 0) throw std::invalid_argument("--n (elements per sample) is required");
    if (!a.intervals.empty()) {
        KeyValues kv;
        kv.set("intervals", a.intervals);
        cfg.intervals = sampler_config_from(kv).intervals;
    }
    char sep;
    if (a.format == "csv")
        sep = ',';
    else if (a.format == "tokens")
        sep = ' ';
    else
        throw std::invalid_argument("--format must be csv or tokens, got " + a.format);
    auto results = sample_batch(state.predictor(), state.table, state.schedule, cfg, a.count);
    std::ofstream out(a.out);
    if (!out) throw std::runtime_error("cannot write samples to " + a.out);
    for (const auto& res : results) {
        for (std::size_t i = 0; i < res.indices.size(); ++i) {
            if (i) out << sep;
            out << res.indices[i];
        }
        out << "\n";
    }
    if (!a.dump.empty()) {
        std::ofstream bin(a.dump, std::ios::binary);
        if (!bin) throw std::runtime_error("cannot write continuous dump to " + a.dump);
        put_u32le(bin, std::uint32_t(results.size()));
        for (const auto& res : results) {
            put_u32le(bin, std::uint32_t(res.x0_continuous.rows));
            put_u32le(bin, std::uint32_t(res.x0_continuous.cols));
            for (double v : res.x0_continuous.data) put_f32le(bin, float(v));
        }
    }
    std::cout << "sampled " << results.size() << " items to " << a.out << "\n";
    return 0;
}

struct ProbeArgs {
    std::string config, schedule, space, out;
    int T = 0;  // unset flags fall through to the config (or its defaults)
    std::size_t K = 0, m = 0, count = 64;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool oracle = false;
    int grid_density = 32;
};

int run_probe(const ProbeArgs& a) {
    KeyValues kv = a.config.empty() ? KeyValues() : KeyValues::load(a.config);
    if (!a.schedule.empty()) kv.set("schedule", a.schedule);
    if (a.T > 0) kv.set("T", std::to_string(a.T));
    if (!a.space.empty()) kv.set("space", a.space);
    if (a.K > 0) kv.set("K", std::to_string(a.K));
    if (a.m > 0) kv.set("m", std::to_string(a.m));
    if (a.seed_set) kv.set("seed", std::to_string(a.seed));
    TrainConfig cfg = train_config_from(kv);
    require_all_read(kv);
    Schedule schedule = make_schedule(cfg);
    EmbeddingTable table = make_table(cfg.space);

    RngStream rng(derive_seed(cfg.seed, kSeedEval, 0xb0));
    std::vector<std::size_t> indices(a.count);
    for (auto& idx : indices) idx = rng.uniform_below(table.K());
    DiscreteDatum datum = datum_from_indices(indices, table);
    Matrix eps(a.count, table.m());
    rng.fill_normal(eps);
    BoundaryEstimate est = estimate_boundary(datum.x0, eps, indices, table, schedule);

    std::ofstream out(a.out);
    if (!out) throw std::runtime_error("cannot write probe report to " + a.out);
    out << "element,t0,u_t0,v_t0,j_star,masked";
    if (a.oracle) out << ",t0_oracle";
    out << "\n";
    for (std::size_t i = 0; i < a.count; ++i) {
        out << i << ',' << est.t0[i] << ',' << est.u_t0[i] << ',' << est.v_t0[i] << ','
            << est.j_star[i] << ',' << int(est.masked[i]);
        if (a.oracle)
            out << ','
                << brute_first_exit(datum.x0.row(i), eps.row(i), indices[i], table, schedule,
                                    a.grid_density);
        out << "\n";
    }
    std::cout << "probed " << a.count << " elements (masked fraction " << est.masked_fraction()
              << ") to " << a.out << "\n";
    return 0;
}

struct EvalArgs {
    std::string ckpt, data, out, times;
    double r = -1.0;
    std::size_t draws = 4;
    std::uint64_t seed = 1;
};

int run_eval(const EvalArgs& a) {
    TrainState state = load_checkpoint(a.ckpt);
    Dataset data = load_dataset(a.data);
    double r = a.r >= 0.0 ? a.r : state.cfg.r;
    std::vector<double> t_list;
    if (a.times.empty()) {
        double T = double(state.cfg.T);
        t_list = {T / 4.0, T / 2.0, 3.0 * T / 4.0};
    } else {
        std::string spec = a.times;
        std::replace(spec.begin(), spec.end(), ',', ' ');
        std::istringstream in(spec);
        double t;
        while (in >> t) t_list.push_back(t);
        if (t_list.empty()) throw std::invalid_argument("--times holds no numbers");
    }
    RecoveryReport report = eval_recovery(state.predictor(), state.table, state.schedule, data, r,
                                          t_list, a.draws, a.seed);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!a.out.empty()) {
        file.open(a.out);
        if (!file) throw std::runtime_error("cannot write report to " + a.out);
        out = &file;
    }
    for (std::size_t i = 0; i < report.t.size(); ++i)
        *out << "t=" << report.t[i] << " acc=" << report.acc[i] << "\n";
    *out << "mean_acc=" << report.mean_acc() << "\n";
    *out << "masked_frac=" << report.masked_frac << "\n";
    *out << "mean_t0=" << report.mean_t0 << "\n";
    if (!a.out.empty()) std::cout << "evaluated " << data.size() << " items to " << a.out << "\n";
    return 0;
}

struct GenArgs {
    std::string source = "markov_tokens", out;
    std::size_t count = 256;
    std::uint64_t seed = 7;
};

int run_gen(const GenArgs& a) {
    SourceKind kind = source_kind_from_string(a.source);
    SyntheticSource source = make_source(kind, a.seed);
    Dataset data = generate_dataset(source, a.count, a.seed);
    save_dataset(data, kind, a.out);
    std::cout << "wrote " << data.size() << " items (K=" << source.K << ", n=" << source.n
              << ") to " << a.out << "\n";
    return 0;
}

struct PlotArgs {
    std::string in, out;
};

// Wide CSV (first column is the row key) to long (key,metric,value) rows,
// ready for any standard plotting tool.
int run_plot(PlotArgs a) {
    if (a.out.empty()) a.out = a.in + ".long.csv";
    std::ifstream in(a.in);
    if (!in) throw std::runtime_error("cannot open " + a.in);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty CSV: " + a.in);
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream row(line);
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        return cells;
    };
    std::vector<std::string> names = split(header);
    if (names.size() < 2) throw std::runtime_error("CSV needs a key column and one metric");
    std::ofstream out(a.out);
    if (!out) throw std::runtime_error("cannot write " + a.out);
    out << names[0] << ",metric,value\n";
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells = split(line);
        if (cells.size() != names.size())
            throw std::runtime_error(a.in + ": line " + std::to_string(lineno) +
                                     " has the wrong cell count");
        for (std::size_t c = 1; c < cells.size(); ++c)
            out << cells[0] << ',' << names[c] << ',' << cells[c] << "\n";
    }
    std::cout << "reshaped " << a.in << " to " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"boundary-rescaled diffusion for discrete data"};
    app.require_subcommand(1);
    int threads = 0;

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a denoiser on a dataset");
    train_cmd->add_option("--config", train_args.config, "key = value training config");
    train_cmd->add_option("--data,--dataset", train_args.data,
                          "dataset file (overrides the config data key)");
    train_cmd->add_option("--out", train_args.out, "checkpoint to write")->required();
    train_cmd->add_option("--metrics", train_args.metrics, "CSV of logged training metrics");
    train_cmd->add_option("--seed", train_args.seed, "run seed (overrides the config)")
        ->each([&](const std::string&) { train_args.seed_set = true; });
    train_cmd->add_option("--r", train_args.r, "rescaling strength (overrides the config)");
    train_cmd->add_option("--steps", train_args.steps, "step count (overrides the config)");
    train_cmd->add_flag("--diagnostics", train_args.diagnostics,
                        "verify the field error bound on logged steps");
    train_cmd->add_option("--threads", threads, "worker threads (0 = default)");

    SampleArgs sample_args;
    auto* sample_cmd = app.add_subcommand("sample", "generate data from a checkpoint");
    sample_cmd->add_option("--ckpt", sample_args.ckpt, "checkpoint file")->required();
    sample_cmd->add_option("--out", sample_args.out, "indices file to write")->required();
    sample_cmd->add_option("--count", sample_args.count, "samples to draw");
    sample_cmd->add_option("--n", sample_args.n, "elements per sample")->required();
    sample_cmd->add_option("--steps", sample_args.cfg.steps, "reverse steps");
    sample_cmd->add_option("--intervals", sample_args.intervals,
                           "comma-separated step gaps summing to T (overrides --steps)");
    sample_cmd->add_option("--r", sample_args.cfg.r, "rescaling strength");
    sample_cmd->add_option("--alteration", sample_args.alteration,
                           "on|off: refresh the noise estimate each step");
    sample_cmd->add_option("--mode", sample_args.mode, "deterministic or gaussian");
    sample_cmd->add_option("--sigma-max", sample_args.cfg.sigma_max, "gaussian noise scale");
    sample_cmd->add_option("--seed", sample_args.cfg.seed, "sampling seed");
    sample_cmd->add_option("--format", sample_args.format, "csv or tokens output separators");
    sample_cmd->add_option("--dump-continuous", sample_args.dump,
                           "binary dump of the continuous predictions");
    sample_cmd->add_option("--threads", threads, "worker threads (0 = default)");

    ProbeArgs probe_args;
    auto* probe_cmd =
        app.add_subcommand("probe-boundary", "estimate exit times for random data/noise pairs");
    probe_cmd->add_option("--config", probe_args.config, "key = value config for the defaults");
    probe_cmd->add_option("--schedule", probe_args.schedule, "vp, ve, or ot (default vp)");
    probe_cmd->add_option("--T", probe_args.T, "grid length (default 1000)");
    probe_cmd->add_option("--space", probe_args.space, "state representation (default embedding)");
    probe_cmd->add_option("--K", probe_args.K, "states per element (default 16)");
    probe_cmd->add_option("--m", probe_args.m, "embedding dimension (default 8)");
    probe_cmd->add_option("--count", probe_args.count, "elements to probe");
    probe_cmd->add_option("--seed", probe_args.seed, "probe seed (default 1)")
        ->each([&](const std::string&) { probe_args.seed_set = true; });
    probe_cmd->add_option("--out", probe_args.out, "CSV to write")->required();
    probe_cmd->add_flag("--oracle", probe_args.oracle, "add a dense-scan exit time column");
    probe_cmd->add_option("--grid-density", probe_args.grid_density,
                          "oracle scan points per unit step");
    probe_cmd->add_option("--threads", threads, "worker threads (0 = default)");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "one-step recovery accuracy of a checkpoint");
    eval_cmd->add_option("--ckpt", eval_args.ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--data,--dataset", eval_args.data, "dataset file")->required();
    eval_cmd->add_option("--out", eval_args.out, "report file (default stdout)");
    eval_cmd->add_option("--r", eval_args.r, "rescaling strength (default: the training value)");
    eval_cmd->add_option("--times", eval_args.times, "comma-separated nominal times");
    eval_cmd->add_option("--draws", eval_args.draws, "noise draws per item and time");
    eval_cmd->add_option("--seed", eval_args.seed, "evaluation seed");
    eval_cmd->add_option("--threads", threads, "worker threads (0 = default)");

    GenArgs gen_args;
    auto* gen_cmd = app.add_subcommand("gen-data", "write a synthetic dataset");
    gen_cmd->add_option("--source", gen_args.source,
                        "markov_tokens, categorical_grid, or binary_subpixels");
    gen_cmd->add_option("--count", gen_args.count, "items to generate");
    gen_cmd->add_option("--seed", gen_args.seed, "source seed");
    gen_cmd->add_option("--out", gen_args.out, "dataset file to write")->required();
    gen_cmd->add_option("--threads", threads, "worker threads (0 = default)");

    PlotArgs plot_args;
    auto* plot_cmd = app.add_subcommand("plot", "reshape a wide metrics CSV to long form");
    plot_cmd->add_option("--report,--in", plot_args.in, "wide CSV")->required();
    plot_cmd->add_option("--out", plot_args.out, "long CSV to write (default <report>.long.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        set_threads(threads);
        if (train_cmd->parsed()) return run_train(train_args);
        if (sample_cmd->parsed()) return run_sample(sample_args);
        if (probe_cmd->parsed()) return run_probe(probe_args);
        if (eval_cmd->parsed()) return run_eval(eval_args);
        if (gen_cmd->parsed()) return run_gen(gen_args);
        if (plot_cmd->parsed()) return run_plot(plot_args);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
