#pragma once

// Command-line driver. Kept header-only so the test suite can call run_cli
// in-process; tools/mores_main.cpp is the executable.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mores/io.hpp"
#include "mores/mores.hpp"

namespace mores::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kInputError = 3, kNumericalError = 4 };

using nlohmann::json;

/// Where samples come from: a CSV file or one of the built-in generators.
struct DataOptions {
    std::string input;
    std::string synth;  // paper | noiseless | drifting
    std::optional<std::uint64_t> seed;
    std::size_t samples = 500;
    std::optional<std::size_t> d;
    std::optional<std::size_t> m;
    double noise_std = 0.1;
    std::optional<std::size_t> switch_at;
    bool add_bias = false;
};

struct RunConfig {
    DataOptions data;
    std::string learner = "mores";
    HyperParams hp;
    double xi = 0.01;
    double pa_c = 1.0;
    double pa_eps = 0.0;
    std::string out;
    std::string predictions_out;
    std::string p_ref;
    bool diagnostics = false;
    std::size_t diag_every = 1;
    bool structure = false;
    std::size_t skip_first = 0;
};

struct LoadedData {
    std::vector<Sample> samples;
    std::size_t d = 0;
    std::size_t m = 0;
    std::optional<Matrix> p_ref;
    std::optional<std::uint64_t> seed;
    json source;
};

/// Non-zero exit with a message for stderr.
struct Failure {
    int code;
    std::string message;
};

inline std::uint64_t fresh_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

inline void require(bool ok, const std::string& message) {
    if (!ok) throw Error(ErrorKind::InvalidConfig, message);
}

inline void validate_data_options(const DataOptions& o) {
    require(o.input.empty() != o.synth.empty(), "input: give exactly one of --input or --synth");
    if (o.d) require(*o.d >= 1, "d: must be >= 1");
    if (o.m) require(*o.m >= 1, "m: must be >= 1");
    if (!o.synth.empty()) {
        require(o.synth == "paper" || o.synth == "noiseless" || o.synth == "drifting",
                "synth: expected paper, noiseless or drifting, got '" + o.synth + "'");
        require(o.samples >= 1, "samples: must be >= 1");
        require(std::isfinite(o.noise_std) && o.noise_std >= 0.0, "noise-std: must be finite and >= 0");
        if (o.synth == "paper") require(!o.m || *o.m == 3, "m: the 'paper' generator always has 3 outputs");
        if (o.switch_at) {
            require(o.synth == "drifting", "switch-at: only applies to --synth drifting");
            require(*o.switch_at >= 1 && *o.switch_at <= o.samples, "switch-at: must lie in [1, samples]");
        }
    }
}

inline LoadedData load_data(const DataOptions& o) {
    LoadedData out;
    if (!o.input.empty()) {
        std::ifstream in(o.input);
        require(static_cast<bool>(in), "input: cannot open '" + o.input + "'");
        io::CsvStream csv = io::read_csv(in, o.d, o.m);
        out.samples = std::move(csv.samples);
        out.d = csv.d;
        out.m = csv.m;
        out.source = {{"input", o.input}};
    } else {
        const std::uint64_t seed = o.seed ? *o.seed : fresh_seed();
        out.seed = seed;
        out.source = {{"synth", o.synth}, {"samples", o.samples}};
        if (o.synth == "paper") {
            SynthConfig cfg;
            cfg.seed = seed;
            cfg.samples = o.samples;
            cfg.d_features = o.d.value_or(10);
            cfg.noise_std = o.noise_std;
            SyntheticStream s = gen_paper_synthetic(cfg);
            out.samples = std::move(s.samples);
            out.p_ref = std::move(s.p_real);
            out.source["d_features"] = cfg.d_features;
            out.source["noise_std"] = cfg.noise_std;
        } else if (o.synth == "noiseless") {
            SyntheticStream s = gen_noiseless_linear(seed, o.samples, o.d.value_or(10), o.m.value_or(3));
            out.samples = std::move(s.samples);
            out.p_ref = std::move(s.p_real);
            out.source["d"] = o.d.value_or(10);
            out.source["m"] = o.m.value_or(3);
        } else {
            const std::size_t switch_at = o.switch_at.value_or(std::max<std::size_t>(1, o.samples / 2));
            DriftingStream s = gen_drifting(seed, o.samples, o.d.value_or(10), o.m.value_or(3), switch_at, o.noise_std);
            out.samples = std::move(s.samples);
            out.source["d"] = o.d.value_or(10);
            out.source["m"] = o.m.value_or(3);
            out.source["switch_at"] = switch_at;
            out.source["noise_std"] = o.noise_std;
        }
        out.d = out.samples.front().x.size();
        out.m = out.samples.front().y.size();
    }
    if (o.add_bias) {
        for (auto& s : out.samples) s.x.push_back(1.0);
        ++out.d;
        if (out.p_ref) out.p_ref.reset();  // the generator's P has no bias column
    }
    out.source["add_bias"] = o.add_bias;
    return out;
}

/// `a.jsonl` → `a.summary.json`; any other name gets the suffix appended.
inline std::string summary_path(const std::string& out) {
    const std::string ext = ".jsonl";
    if (out.size() > ext.size() && out.compare(out.size() - ext.size(), ext.size(), ext) == 0) {
        return out.substr(0, out.size() - ext.size()) + ".summary.json";
    }
    return out + ".summary.json";
}

/// `a.csv` → `a.p_real.json`.
inline std::string sidecar_path(const std::string& csv) {
    const std::string ext = ".csv";
    if (csv.size() > ext.size() && csv.compare(csv.size() - ext.size(), ext.size(), ext) == 0) {
        return csv.substr(0, csv.size() - ext.size()) + ".p_real.json";
    }
    return csv + ".p_real.json";
}

inline std::ofstream open_output(const std::string& path, const std::string& field) {
    std::ofstream f(path, std::ios::binary);
    require(static_cast<bool>(f), field + ": cannot write '" + path + "'");
    return f;
}

using AnyLearner = std::variant<MoresLearner, SomorLearner, PaLearner>;

inline AnyLearner make_learner(const RunConfig& c, std::size_t d, std::size_t m) {
    if (c.learner == "mores") return MoresLearner(d, m, c.hp);
    if (c.learner == "somor") return SomorLearner(d, m, c.xi);
    if (c.learner == "pa1") return PaLearner(d, m, PaVariant::PA1, c.pa_c, c.pa_eps);
    if (c.learner == "pa2") return PaLearner(d, m, PaVariant::PA2, c.pa_c, c.pa_eps);
    throw Error(ErrorKind::InvalidConfig, "learner: expected mores, somor, pa1 or pa2, got '" + c.learner + "'");
}

inline void validate_run_config(const RunConfig& c) {
    validate_data_options(c.data);
    require(c.learner == "mores" || c.learner == "somor" || c.learner == "pa1" || c.learner == "pa2",
            "learner: expected mores, somor, pa1 or pa2, got '" + c.learner + "'");
    c.hp.validate();
    require(std::isfinite(c.xi) && c.xi > 0.0, "xi: must be finite and > 0");
    require(std::isfinite(c.pa_c) && c.pa_c > 0.0, "pa-c: must be finite and > 0");
    require(std::isfinite(c.pa_eps) && c.pa_eps >= 0.0, "pa-eps: must be finite and >= 0");
    require(c.diag_every >= 1, "diag-every: must be >= 1");
}

inline json config_echo(const RunConfig& c) {
    json j = {{"learner", c.learner}, {"skip_first", c.skip_first}, {"diagnostics", c.diagnostics}};
    if (c.learner == "mores") j["hyper_params"] = io::to_json(c.hp);
    if (c.learner == "somor") j["xi"] = c.xi;
    if (c.learner == "pa1" || c.learner == "pa2") {
        j["pa_c"] = c.pa_c;
        j["pa_eps"] = c.pa_eps;
    }
    return j;
}

inline void write_prediction_log(std::ostream& os, const std::vector<Vector>& predictions) {
    for (std::size_t n = 0; n < predictions.size(); ++n) {
        os << json{{"round", n + 1}, {"prediction", predictions[n]}}.dump() << '\n';
    }
}

inline int cmd_run(const RunConfig& c, std::ostream& out, std::ostream& err) {
    validate_run_config(c);
    LoadedData data = load_data(c.data);

    std::optional<Matrix> p_ref = data.p_ref;
    if (!c.p_ref.empty()) {
        std::ifstream f(c.p_ref);
        require(static_cast<bool>(f), "p-ref: cannot open '" + c.p_ref + "'");
        json j;
        try {
            j = json::parse(f);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::InvalidConfig, std::string("p-ref: ") + e.what());
        }
        p_ref = io::matrix_from_json(j.is_object() && j.contains("p_real") ? j["p_real"] : j);
    }
    if (p_ref && (p_ref->rows() != data.m || p_ref->cols() != data.d)) {
        throw Error(ErrorKind::InvalidConfig, "p-ref: shape " + p_ref->shape() + " does not match the stream");
    }

    AnyLearner learner = make_learner(c, data.d, data.m);
    ReportOptions opts;
    opts.skip_first = c.skip_first;
    opts.keep_predictions = !c.predictions_out.empty();
    opts.diagnostics = c.diagnostics;
    opts.diagnostics_every = c.diag_every;
    opts.structure = c.structure;
    if (c.diagnostics) opts.p_ref = p_ref;

    // Predictions for the log must cover every round, including skipped ones.
    std::vector<Vector> all_predictions;
    const auto start = std::chrono::steady_clock::now();
    EvalReport report = std::visit(
        [&](auto& l) {
            if (!opts.keep_predictions) return prequential_run(l, std::span<const Sample>(data.samples), opts);
            ReportOptions o = opts;
            o.skip_first = 0;
            EvalReport full = prequential_run(l, std::span<const Sample>(data.samples), o);
            all_predictions = std::move(full.predictions);
            EvalReport scored = score_predictions(std::span<const Sample>(data.samples).first(all_predictions.size()),
                                                  all_predictions, c.skip_first);
            full.per_output_mae = scored.per_output_mae;
            full.average_mae = scored.average_mae;
            full.evaluated_rounds = scored.evaluated_rounds;
            full.mae_curve = scored.mae_curve;
            std::erase_if(full.rounds, [&](const RoundRecord& r) { return r.t <= c.skip_first; });
            return full;
        },
        learner);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json summary = {{"per_output_mae", report.per_output_mae},
                    {"average_mae", report.average_mae},
                    {"rounds", report.total_rounds},
                    {"evaluated_rounds", report.evaluated_rounds},
                    {"wall_time_s", wall},
                    {"config", config_echo(c)},
                    {"data", data.source},
                    {"d", data.d},
                    {"m", data.m},
                    {"complete", report.complete}};
    summary["seed"] = data.seed ? json(*data.seed) : json(nullptr);
    if (const auto* mores = std::get_if<MoresLearner>(&learner)) {
        const StructureDiagnostics s = structure_diagnostics(mores->state());
        summary["residual_correlation"] = io::to_json(s.residual_correlation);
        summary["coefficient_change_correlation"] = io::to_json(s.coefficient_change_correlation);
    }
    if (p_ref) {
        summary["final_p_dist"] = std::visit(
            [&](const auto& l) { return frobenius_norm(Matrix(l.coefficients()) - *p_ref); }, learner);
    }
    if (!report.complete) {
        summary["error"] = report.error;
        summary["failed_round"] = report.failed_round;
    }

    if (!c.out.empty()) {
        auto f = open_output(c.out, "out");
        io::write_jsonl(f, report);
        auto s = open_output(summary_path(c.out), "out");
        s << summary.dump(2) << '\n';
    }
    if (!c.predictions_out.empty()) {
        auto f = open_output(c.predictions_out, "predictions-out");
        write_prediction_log(f, all_predictions);
    }
    out << summary.dump(2) << '\n';

    if (!report.complete) {
        err << "error: numerical failure at round " << report.failed_round << ": " << report.error << '\n';
        return kNumericalError;
    }
    return kOk;
}

struct SynthOptions {
    DataOptions data;
    std::string out;
};

inline int cmd_synth(SynthOptions o, std::ostream& out, std::ostream&) {
    if (o.data.synth.empty()) o.data.synth = "paper";
    require(!o.out.empty(), "out: required");
    require(o.data.input.empty(), "input: synth does not read a CSV");
    validate_data_options(o.data);
    if (!o.data.seed) o.data.seed = fresh_seed();
    LoadedData data = load_data(o.data);

    {
        auto f = open_output(o.out, "out");
        io::write_csv(f, data.samples);
    }
    json side = {{"generator", data.source}, {"seed", *data.seed}, {"d", data.d}, {"m", data.m}};
    if (o.data.synth == "drifting") {
        const std::size_t switch_at = data.source["switch_at"].get<std::size_t>();
        const DriftingStream s = gen_drifting(*o.data.seed, 1, o.data.d.value_or(10), o.data.m.value_or(3), 1);
        side["p_before"] = io::to_json(s.p_before);
        side["p_after"] = io::to_json(s.p_after);
        side["switch_at"] = switch_at;
    } else if (data.p_ref) {
        side["p_real"] = io::to_json(*data.p_ref);
    }
    auto f = open_output(sidecar_path(o.out), "out");
    f << side.dump(2) << '\n';
    out << "wrote " << data.samples.size() << " rows to " << o.out << " (seed " << *data.seed << ")\n";
    return kOk;
}

struct BenchOptions {
    std::size_t d = 21;
    std::size_t m = 7;
    std::size_t samples = 20000;
    std::size_t warmup = 200;
    std::size_t repeats = 3;
    std::uint64_t seed = 1;
    HyperParams hp;
};

inline int cmd_bench(const BenchOptions& o, std::ostream& out, std::ostream&) {
    require(o.d >= 1, "d: must be >= 1");
    require(o.m >= 1, "m: must be >= 1");
    require(o.samples >= 1, "samples: must be >= 1");
    require(o.repeats >= 1, "repeats: must be >= 1");
    o.hp.validate();

    std::vector<double> rates;
    std::vector<double> step_s;
    std::vector<BenchReport> reports;
    for (std::size_t r = 0; r < o.repeats; ++r) {
        reports.push_back(throughput_bench(o.d, o.m, o.samples, o.hp, o.warmup, o.seed + r));
        rates.push_back(reports.back().updates_per_second);
        step_s.push_back(reports.back().median_step_seconds);
    }
    const double rate = detail::median(rates);
    const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
    const auto phase_median = [&](double PhaseTimings::*field) {
        std::vector<double> v;
        for (const auto& r : reports) v.push_back(r.median_phase.*field * 1e6);
        return detail::median(std::move(v));
    };
    json j = {{"d", o.d},
              {"m", o.m},
              {"samples", o.samples},
              {"warmup", o.warmup},
              {"repeats", o.repeats},
              {"updates_per_second", rate},
              {"updates_per_second_runs", rates},
              {"median_step_us", detail::median(step_s) * 1e6},
              {"phase_median_us",
               {{"fold", phase_median(&PhaseTimings::fold)},
                {"solve_p", phase_median(&PhaseTimings::solve_p)},
                {"update_omega", phase_median(&PhaseTimings::update_omega)},
                {"update_gamma", phase_median(&PhaseTimings::update_gamma)}}},
              {"spread", rate > 0.0 ? (*hi - *lo) / rate : 0.0},
              {"noise_note", "rates vary between runs; differences within +/-20% are ordinary on a shared machine"},
              {"hyper_params", io::to_json(o.hp)}};
    out << j.dump(2) << '\n';
    return kOk;
}

struct SweepOptions {
    DataOptions data;
    HyperParams hp;
    std::vector<std::string> grid;
    std::size_t skip_first = 0;
    unsigned threads = 1;
    std::string out;
};

inline GridAxis parse_grid_axis(const std::string& spec) {
    const auto eq = spec.find('=');
    require(eq != std::string::npos && eq > 0, "grid: expected name=v1,v2,... got '" + spec + "'");
    GridAxis axis{spec.substr(0, eq), {}};
    HyperParams probe;
    for (auto field : io::split_commas(std::string_view(spec).substr(eq + 1))) {
        const auto v = io::parse_double(field);
        require(v.has_value(), "grid: '" + std::string(field) + "' is not a number in axis " + axis.name);
        set_hyper_param(probe, axis.name, *v);  // rejects unknown names
        axis.values.push_back(*v);
    }
    return axis;
}

inline int cmd_sweep(const SweepOptions& o, std::ostream& out, std::ostream&) {
    validate_data_options(o.data);
    o.hp.validate();
    require(!o.grid.empty(), "grid: at least one --grid axis is required");
    std::vector<GridAxis> grid;
    for (const auto& g : o.grid) grid.push_back(parse_grid_axis(g));
    LoadedData data = load_data(o.data);

    ReportOptions opts;
    opts.skip_first = o.skip_first;
    const auto rows = sweep(grid, data.samples, o.hp, opts, o.threads);

    std::ofstream file;
    if (!o.out.empty()) file = open_output(o.out, "out");
    std::ostream& sink = o.out.empty() ? out : file;
    for (const auto& r : rows) {
        json j = {{"params", r.params}, {"hyper_params", io::to_json(r.hp)}};
        if (r.average_mae) {
            j["average_mae"] = *r.average_mae;
            j["per_output_mae"] = r.per_output_mae;
        } else {
            j["error"] = r.error;
        }
        sink << j.dump() << '\n';
    }
    if (data.seed) out << "seed " << *data.seed << '\n';
    return kOk;
}

struct ScoreOptions {
    DataOptions data;
    std::string predictions;
    std::size_t skip_first = 0;
};

inline int cmd_score(const ScoreOptions& o, std::ostream& out, std::ostream&) {
    validate_data_options(o.data);
    require(!o.predictions.empty(), "predictions: required");
    std::ifstream f(o.predictions);
    require(static_cast<bool>(f), "predictions: cannot open '" + o.predictions + "'");
    LoadedData data = load_data(o.data);
    const std::vector<Vector> preds = io::read_prediction_log(f);
    EvalReport report;
    try {
        report = score_predictions(data.samples, preds, o.skip_first);
    } catch (const Error& e) {
        throw io::InputError(0, e.what());
    }
    json j = {{"per_output_mae", report.per_output_mae},
              {"average_mae", report.average_mae},
              {"rounds", report.total_rounds},
              {"evaluated_rounds", report.evaluated_rounds}};
    out << j.dump(2) << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------
// Argument handling
// ---------------------------------------------------------------------------

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Expands `--config FILE` (flat key=value lines, # comments) into
/// `--key=value` arguments placed right after the subcommand. Keys that also
/// appear on the command line are dropped so flags win.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            require(i + 1 < args.size(), "config: missing file name");
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (path.empty()) return args;

    std::ifstream f(path);
    require(static_cast<bool>(f), "config: cannot open '" + path + "'");
    const auto on_command_line = [&](const std::string& key) {
        const std::string flag = "--" + key;
        return std::any_of(args.begin(), args.end(),
                           [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
    };
    std::vector<std::string> extra;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const std::string t = trim(line.substr(0, line.find('#')));
        if (t.empty()) continue;
        const auto eq = t.find('=');
        require(eq != std::string::npos,
                "config: line " + std::to_string(line_no) + " of '" + path + "' is not key=value");
        std::string key = trim(t.substr(0, eq));
        while (!key.empty() && key.front() == '-') key.erase(key.begin());
        std::replace(key.begin(), key.end(), '_', '-');
        require(!key.empty(), "config: empty key on line " + std::to_string(line_no));
        if (on_command_line(key)) continue;
        extra.push_back("--" + key + "=" + trim(t.substr(eq + 1)));
    }
    const std::size_t at = args.size() > 1 ? 2 : args.size();
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), extra.begin(), extra.end());
    return args;
}

inline void add_data_options(CLI::App* app, DataOptions& o) {
    app->add_option("--input", o.input, "CSV stream: header x1..xd,y1..ym, one sample per row");
    app->add_option("--synth", o.synth, "built-in generator: paper | noiseless | drifting");
    app->add_option("--seed", o.seed, "generator seed (random and logged when absent)");
    app->add_option("--samples", o.samples, "generated stream length")->capture_default_str();
    app->add_option("--d", o.d,
                    "input dimension (CSV: override the header; 'paper' generator: features before the bias column)");
    app->add_option("--m", o.m, "output dimension (CSV: override the header)");
    app->add_option("--noise-std", o.noise_std, "generator noise standard deviation")->capture_default_str();
    app->add_option("--switch-at", o.switch_at, "drifting generator: first sample drawn from the new coefficients");
    app->add_flag("--add-bias", o.add_bias, "append a constant 1 input column");
}

inline void add_hyper_options(CLI::App* app, HyperParams& hp) {
    app->add_option("--alpha", hp.alpha, "loss weight")->capture_default_str();
    app->add_option("--beta", hp.beta, "pull of the coefficient-change metric toward its previous value")
        ->capture_default_str();
    app->add_option("--rho", hp.rho, "pull of the coefficient-change metric toward I")->capture_default_str();
    app->add_option("--eta", hp.eta, "pull of the residual metric toward I")->capture_default_str();
    app->add_option("--mu", hp.mu, "forgetting factor in [0, 1]")->capture_default_str();
    app->add_option("--period", hp.update_period, "solve every N rounds")->capture_default_str();
}

/// Entry point shared by the executable and the tests. args[0] is the
/// program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Streaming multiple-output regression with learned output and coefficient metrics"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");
    app.footer("Any subcommand accepts --config FILE with key=value lines; command-line flags win.\n"
               "Exit codes: 0 ok, 2 configuration error, 3 malformed input, 4 numerical failure.");
    // Listed only for --help; expand_config consumes it before parsing.
    std::string unused_config;
    app.add_option("--config", unused_config, "flat key=value configuration file");

    RunConfig run;
    auto* run_cmd = app.add_subcommand("run", "prequential (test-then-train) evaluation of one learner");
    add_data_options(run_cmd, run.data);
    add_hyper_options(run_cmd, run.hp);
    run_cmd->add_option("--learner", run.learner, "mores | somor | pa1 | pa2")->capture_default_str();
    run_cmd->add_option("--xi", run.xi, "somor: squared residual tolerance")->capture_default_str();
    run_cmd->add_option("--pa-c", run.pa_c, "pa1/pa2: aggressiveness")->capture_default_str();
    run_cmd->add_option("--pa-eps", run.pa_eps, "pa1/pa2: insensitivity")->capture_default_str();
    run_cmd->add_option("--out", run.out, "per-round JSON lines; the summary goes next to it as *.summary.json");
    run_cmd->add_option("--predictions-out", run.predictions_out, "prediction log (JSON lines: round, prediction)");
    run_cmd->add_option("--p-ref", run.p_ref, "JSON matrix (or sidecar with p_real) for the p_dist diagnostic");
    run_cmd->add_flag("--diagnostics", run.diagnostics, "add p_dist and metric eigenvalue extremes to records");
    run_cmd->add_option("--diag-every", run.diag_every, "diagnostics cadence in rounds")->capture_default_str();
    run_cmd->add_flag("--structure", run.structure, "with --diagnostics: add correlation matrices to records");
    run_cmd->add_option("--skip-first", run.skip_first, "learn from but do not score the first N rounds")
        ->capture_default_str();

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "write a generated stream as CSV plus a coefficient sidecar");
    add_data_options(synth_cmd, synth.data);
    synth_cmd->add_option("--out", synth.out, "CSV path; coefficients go to *.p_real.json")->required();

    BenchOptions bench;
    auto* bench_cmd = app.add_subcommand("bench", "MORES update throughput");
    bench_cmd->add_option("--d", bench.d, "input dimension")->capture_default_str();
    bench_cmd->add_option("--m", bench.m, "output dimension")->capture_default_str();
    bench_cmd->add_option("--samples", bench.samples, "timed updates per repeat")->capture_default_str();
    bench_cmd->add_option("--warmup", bench.warmup, "untimed updates before timing")->capture_default_str();
    bench_cmd->add_option("--repeats", bench.repeats, "independent timed runs")->capture_default_str();
    bench_cmd->add_option("--seed", bench.seed, "stream seed")->capture_default_str();
    add_hyper_options(bench_cmd, bench.hp);

    SweepOptions sw;
    auto* sweep_cmd = app.add_subcommand("sweep", "MORES over a hyperparameter grid");
    add_data_options(sweep_cmd, sw.data);
    add_hyper_options(sweep_cmd, sw.hp);
    sweep_cmd->add_option("--grid", sw.grid, "axis as name=v1,v2,...; repeat for a Cartesian product")->take_all();
    sweep_cmd->add_option("--skip-first", sw.skip_first, "learn from but do not score the first N rounds");
    sweep_cmd->add_option("--threads", sw.threads, "worker threads")->capture_default_str();
    sweep_cmd->add_option("--out", sw.out, "JSON lines, one per grid cell (default stdout)");

    ScoreOptions score;
    auto* score_cmd = app.add_subcommand("score", "MAE of an external prediction log against a stream");
    add_data_options(score_cmd, score.data);
    score_cmd->add_option("--predictions", score.predictions, "JSON lines: {\"round\": t, \"prediction\": [...]}");
    score_cmd->add_option("--skip-first", score.skip_first, "do not score the first N rounds");

    try {
        args = expand_config(std::move(args));
        std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);  // CLI11 wants them reversed
        app.parse(reversed);
        if (*run_cmd) return cmd_run(run, out, err);
        if (*synth_cmd) return cmd_synth(synth, out, err);
        if (*bench_cmd) return cmd_bench(bench, out, err);
        if (*sweep_cmd) return cmd_sweep(sw, out, err);
        if (*score_cmd) return cmd_score(score, out, err);
        return kConfigError;
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const io::InputError& e) {
        err << "error: malformed input: " << e.what() << '\n';
        return kInputError;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidConfig || e.kind() == ErrorKind::DimensionMismatch) {
            err << "error: " << e.what() << '\n';
            return kConfigError;
        }
        err << "error: numerical failure: " << e.what() << '\n';
        return kNumericalError;
    }
}

}  // namespace mores::cli
