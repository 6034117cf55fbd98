// kgvs: kernel-gradient variable selection from the command line.
//
//   kgvs select       DATA.csv --response y [options]     -> selection.json
//   kgvs interactions DATA.csv --response y [options]     -> selection.json, interactions.json
//   kgvs simulate     --example 1 --n 400 --p 500 ...      -> aggregate.csv, replications.jsonl
//   kgvs generate     --example 2 --n 400 --p 10 -o F.csv  -> synthetic CSV
//
// Every run also writes manifest.json into the output directory.
// Exit codes: 0 success, 2 usage or input error, 3 numerical or degenerate-data error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kgvs/io.hpp"
#include "kgvs/kgvs.hpp"

namespace fs = std::filesystem;
using kgvs::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kManifestName = "manifest.json";

struct CommonOptions {
    std::string kernel = "gaussian";
    std::optional<double> lambda;
    std::optional<double> bandwidth;
    std::optional<double> threshold;
    bool tune = false;
    double grid_min = -3.0;
    double grid_max = 3.0;
    int grid_steps = 61;
    int splits = 20;
    std::optional<long> nystrom_rank;
    int threads = 0;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_kernel) {
    if (with_kernel)
        cmd->add_option("--kernel", o.kernel, "Kernel family")
            ->check(CLI::IsMember({"gaussian", "linear"}))
            ->capture_default_str();
    cmd->add_option("--lambda", o.lambda, "Ridge penalty (default depends on the command)");
    cmd->add_option("--bandwidth", o.bandwidth, "Gaussian bandwidth (default: median pairwise distance)")
        ->check(CLI::PositiveNumber);
    auto* thr = cmd->add_option("--threshold", o.threshold, "Explicit score threshold")->check(CLI::NonNegativeNumber);
    auto* tune = cmd->add_flag("--tune", o.tune, "Tune the threshold by stability (default)");
    thr->excludes(tune);
    cmd->add_option("--grid-min", o.grid_min, "log10 of the smallest grid threshold")->capture_default_str();
    cmd->add_option("--grid-max", o.grid_max, "log10 of the largest grid threshold")->capture_default_str();
    cmd->add_option("--grid-steps", o.grid_steps, "Number of grid thresholds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--splits", o.splits, "Random half-splits for stability tuning")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--nystrom-rank", o.nystrom_rank, "Use a rank-d Nystrom solve")->check(CLI::PositiveNumber);
    cmd->add_option("--threads", o.threads, "Worker threads (default: $KGVS_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", o.seed, "Root random seed")->capture_default_str();
    cmd->add_option("--out-dir,-o", o.out_dir, "Directory for result files")->capture_default_str();
}

kgvs::PipelineConfig to_pipeline(const CommonOptions& o) {
    kgvs::PipelineConfig cfg;
    cfg.kernel = o.kernel == "linear" ? kgvs::KernelFamily::Linear : kgvs::KernelFamily::Gaussian;
    cfg.lambda = o.lambda;
    cfg.bandwidth = o.bandwidth;
    if (o.nystrom_rank) cfg.nystrom_rank = static_cast<kgvs::Index>(*o.nystrom_rank);
    cfg.threshold = o.threshold;
    cfg.grid = kgvs::log_grid(o.grid_min, o.grid_max, o.grid_steps);
    cfg.splits = o.splits;
    cfg.seed = o.seed;
    cfg.threads = o.threads;
    return cfg;
}

json config_json(const CommonOptions& o, double lambda) {
    json j{{"kernel", o.kernel},
           {"lambda", lambda},
           {"lambda_source", o.lambda ? "explicit" : "default"},
           {"threshold_mode", o.threshold ? "explicit" : "stability"},
           {"grid", {{"min_exponent", o.grid_min}, {"max_exponent", o.grid_max}, {"steps", o.grid_steps}}},
           {"splits", o.splits},
           {"seed", o.seed}};
    j["threshold"] = o.threshold ? json(*o.threshold) : json(nullptr);
    j["bandwidth"] = o.bandwidth ? json(*o.bandwidth) : json(nullptr);
    j["nystrom_rank"] = o.nystrom_rank ? json(*o.nystrom_rank) : json(nullptr);
    return j;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw kgvs::InputError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

fs::path prepare_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw kgvs::InputError("cannot create output directory '" + dir + "': " + ec.message());
    return fs::path(dir);
}

struct Manifest {
    std::string command;
    std::string subcommand;
    json config;
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    json to_json() const {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return json{{"command", command},
                    {"subcommand", subcommand},
                    {"config", config},
                    {"seed", seed},
                    {"outputs", outputs},
                    {"versions",
                     {{"kgvs", kVersion},
                      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                    "." + std::to_string(EIGEN_MINOR_VERSION)},
                      {"compiler", __VERSION__}}},
                    {"timing", {{"wall_seconds", wall}}}};
    }
};

int run_select(const std::string& input, const std::string& response, const CommonOptions& o, Manifest& man,
               bool interactions, std::optional<double> v_int, bool no_diagonal) {
    const kgvs::LoadedData loaded = kgvs::load_csv(input, response);
    kgvs::validate(loaded.data);
    const kgvs::PipelineConfig cfg = to_pipeline(o);
    const fs::path dir = prepare_out_dir(o.out_dir);

    const kgvs::SelectionReport rep = kgvs::select(loaded.data, cfg);
    man.config = config_json(o, rep.lambda);
    man.config["input"] = input;
    man.config["response"] = response;
    man.seed = o.seed;

    json sel = kgvs::selection_json(rep, loaded.names);
    sel["manifest"] = kManifestName;
    write_json(dir / "selection.json", sel);
    man.outputs.push_back("selection.json");

    std::cout << "selected " << rep.active.size() << " of " << loaded.data.p() << " variables (threshold "
              << kgvs::format_double(rep.active.threshold) << ")";
    for (kgvs::Index l : rep.active.indices) std::cout << ' ' << loaded.names[static_cast<std::size_t>(l)];
    std::cout << '\n';

    if (interactions) {
        man.config["include_diagonal"] = !no_diagonal;
        man.config["interaction_threshold"] = v_int ? json(*v_int) : json(nullptr);
        std::optional<kgvs::StabilityTrace> trace;
        double v = v_int.value_or(0.0);
        if (!v_int && !rep.active.indices.empty()) {
            trace = kgvs::tune_interaction_threshold(loaded.data, cfg, rep.active, rep.lambda, !no_diagonal);
            v = trace->chosen;
        }
        const kgvs::InteractionReport ir =
            kgvs::select_interactions(rep.model, loaded.data.X, rep.active, v, !no_diagonal, cfg.threads);
        json out = kgvs::interaction_json(ir, loaded.names, trace);
        out["manifest"] = kManifestName;
        write_json(dir / "interactions.json", out);
        man.outputs.push_back("interactions.json");
        std::cout << "interaction pairs:";
        for (auto [l, k] : ir.pairs)
            std::cout << " (" << loaded.names[static_cast<std::size_t>(l)] << ","
                      << loaded.names[static_cast<std::size_t>(k)] << ")";
        std::cout << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel-gradient variable and interaction selection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    CommonOptions common;
    std::string input, response;

    auto* sel = app.add_subcommand("select", "Select variables from a CSV file");
    sel->add_option("input", input, "CSV file with a header row")->required();
    sel->add_option("--response,-r", response, "Name of the response column")->required();
    add_common(sel, common, true);

    std::optional<double> v_int;
    bool no_diagonal = false;
    auto* inter = app.add_subcommand("interactions", "Select variables, then interactions among them");
    inter->add_option("input", input, "CSV file with a header row")->required();
    inter->add_option("--response,-r", response, "Name of the response column")->required();
    add_common(inter, common, true);
    inter->add_option("--interaction-threshold", v_int, "Explicit pair-score threshold (default: stability tuned)")
        ->check(CLI::NonNegativeNumber);
    inter->add_flag("--no-diagonal", no_diagonal, "Score only pairs of distinct variables");

    kgvs::SimConfig sim;
    int example = 1;
    long sim_n = 400, sim_p = 500;
    auto* simc = app.add_subcommand("simulate", "Run the synthetic benchmark harness");
    simc->add_option("--example", example, "Benchmark (1 or 2)")->check(CLI::IsMember({1, 2}))->capture_default_str();
    simc->add_option("--n", sim_n, "Observations")->capture_default_str();
    simc->add_option("--p", sim_p, "Variables")->capture_default_str();
    simc->add_option("--eta", sim.eta, "Common-factor correlation strength")->capture_default_str();
    simc->add_option("--reps", sim.replications, "Replications")->capture_default_str();
    simc->add_flag("--allow-large", sim.allow_large, "Permit scenarios with more than 10000 variables");
    CommonOptions sim_opts;
    add_common(simc, sim_opts, false);

    CommonOptions gen_opts;
    std::string gen_out;
    auto* gen = app.add_subcommand("generate", "Write a synthetic benchmark dataset as CSV");
    gen->add_option("--example", example, "Benchmark (1 or 2)")->check(CLI::IsMember({1, 2}))->capture_default_str();
    gen->add_option("--n", sim_n, "Observations")->capture_default_str();
    gen->add_option("--p", sim_p, "Variables")->capture_default_str();
    gen->add_option("--eta", sim.eta, "Common-factor correlation strength")->capture_default_str();
    gen->add_option("--seed", gen_opts.seed, "Random seed")->capture_default_str();
    gen->add_option("--output,-o", gen_out, "CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    Manifest man;
    for (int i = 0; i < argc; ++i) man.command += (i ? " " : "") + std::string(argv[i]);

    try {
        if (*sel || *inter) {
            const bool is_inter = static_cast<bool>(*inter);
            man.subcommand = is_inter ? "interactions" : "select";
            if (is_inter && common.kernel == "linear")
                throw kgvs::InputError(
                    "interactions need the gaussian kernel: the linear kernel has identically zero second "
                    "derivatives, so every pair score would be 0");
            const int rc = run_select(input, response, common, man, is_inter, v_int, no_diagonal);
            write_json(fs::path(common.out_dir) / kManifestName, man.to_json());
            return rc;
        }
        if (*simc) {
            man.subcommand = "simulate";
            sim.example = example == 2 ? kgvs::Example::Two : kgvs::Example::One;
            sim.n = sim_n;
            sim.p = sim_p;
            sim.seed = sim_opts.seed;
            if (sim.p > kgvs::kLargeScenarioP) {
                if (!sim.allow_large)
                    throw kgvs::GuardError("p = " + std::to_string(sim.p) + " exceeds " +
                                           std::to_string(kgvs::kLargeScenarioP) +
                                           " variables; rerun with --allow-large (and consider --nystrom-rank) "
                                           "if you really want this scenario");
                std::cerr << "warning: p = " << sim.p << " is a very large scenario; expect long runtimes\n";
            }
            kgvs::PipelineConfig cfg = to_pipeline(sim_opts);
            if (!cfg.lambda) cfg.lambda = kgvs::kSimulationLambda;
            const fs::path dir = prepare_out_dir(sim_opts.out_dir);
            const kgvs::ExperimentResult res = kgvs::run_experiment(sim, cfg);

            man.config = config_json(sim_opts, *cfg.lambda);
            man.config["kernel"] = "gaussian";
            man.config["scenario"] = {{"example", example}, {"n", sim.n}, {"p", sim.p}, {"eta", sim.eta},
                                      {"replications", sim.replications}, {"allow_large", sim.allow_large}};
            man.seed = sim.seed;

            {
                std::ofstream out(dir / "replications.jsonl", std::ios::binary);
                if (!out) throw kgvs::InputError("cannot write replications.jsonl");
                for (const auto& rec : res.records) {
                    json j = kgvs::record_json(rec);
                    j["scenario"] = kgvs::scenario_label(sim);
                    j["manifest"] = kManifestName;
                    out << j.dump() << '\n';
                }
            }
            {
                std::ofstream out(dir / "aggregate.csv", std::ios::binary);
                if (!out) throw kgvs::InputError("cannot write aggregate.csv");
                out << kgvs::aggregate_csv_header() << '\n' << kgvs::aggregate_csv_row(sim, res.metrics) << '\n';
            }
            man.outputs = {"aggregate.csv", "replications.jsonl"};
            write_json(dir / kManifestName, man.to_json());
            std::cout << kgvs::aggregate_csv_header() << '\n' << kgvs::aggregate_csv_row(sim, res.metrics) << '\n';
            return 0;
        }
        if (*gen) {
            const kgvs::SimData d = kgvs::generate(example == 2 ? kgvs::Example::Two : kgvs::Example::One, sim_n,
                                                   sim_p, sim.eta, gen_opts.seed);
            std::ofstream out(gen_out, std::ios::binary);
            if (!out) throw kgvs::InputError("cannot write '" + gen_out + "'");
            kgvs::write_dataset_csv(out, d.data);
            return 0;
        }
    } catch (const kgvs::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const kgvs::GuardError& e) {
        std::cerr << "refused: " << e.what() << '\n';
        return 3;
    } catch (const kgvs::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
