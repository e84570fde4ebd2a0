#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "jointdag/errors.hpp"
#include "jointdag/eval.hpp"
#include "jointdag/io.hpp"
#include "jointdag/refit.hpp"
#include "jointdag/search.hpp"
#include "jointdag/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace jointdag;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitShape = 4;
constexpr int kExitSearch = 5;
constexpr int kExitReplicates = 6;

struct GlobalOpts {
    fs::path out_dir;
    long long seed = -1;  // -1: keep the config's seed
    int jobs = 1;
};

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string());
}

io::RunManifest make_manifest(const std::string& command, const std::string& config_json,
                              std::uint64_t seed) {
    io::RunManifest manifest;
    manifest.tool_version = kVersion;
    manifest.command = command;
    manifest.resolved_config_json = config_json;
    manifest.master_seed = seed;
    manifest.started_at = io::timestamp_utc();
    return manifest;
}

void finish_manifest(io::RunManifest& manifest, const fs::path& dir,
                     const std::vector<fs::path>& outputs) {
    manifest.finished_at = io::timestamp_utc();
    for (const auto& path : outputs) manifest.outputs.push_back(path.filename().string());
    io::write_manifest(dir / "manifest.json", manifest);
}

int cmd_simulate(const fs::path& config_path, const GlobalOpts& opts) {
    io::SimulationConfig cfg = io::parse_simulation_config(read_text_file(config_path));
    if (opts.seed >= 0) cfg.model.seed = static_cast<std::uint64_t>(opts.seed);

    json resolved{{"p", cfg.model.p},
                  {"K", cfg.model.K},
                  {"core_edges", cfg.model.core_edges},
                  {"extra_edges", cfg.model.extra_edges},
                  {"weight_range",
                   {{cfg.model.weight_range[0].lo, cfg.model.weight_range[0].hi},
                    {cfg.model.weight_range[1].lo, cfg.model.weight_range[1].hi}}},
                  {"variance_range", {cfg.model.variance_range.lo, cfg.model.variance_range.hi}},
                  {"seed", cfg.model.seed},
                  {"lock_shared_weights", cfg.model.lock_shared_weights},
                  {"n_k", cfg.samples_per_class}};

    io::RunManifest manifest = make_manifest("simulate", resolved.dump(), cfg.model.seed);
    manifest.input_digests[config_path.string()] = io::file_digest(config_path);

    ensure_out_dir(opts.out_dir);
    Rng model_rng(cfg.model.seed);
    const JointModel jm = random_joint_model(cfg.model, model_rng);
    std::vector<fs::path> outputs;
    for (int k = 0; k < cfg.model.K; ++k) {
        Rng rng(derive_seed(cfg.model.seed, 1 + static_cast<std::uint64_t>(k)));
        const Eigen::MatrixXd x =
            sample(jm.sems[k], static_cast<int>(cfg.samples_per_class[k]), rng);
        const fs::path csv = opts.out_dir / ("class_" + std::to_string(k) + ".csv");
        io::write_csv(csv, x);
        outputs.push_back(csv);
        const fs::path sem = opts.out_dir / ("true_class_" + std::to_string(k) + ".sem");
        io::write_sem(sem, jm.sems[k]);
        outputs.push_back(sem);
    }
    finish_manifest(manifest, opts.out_dir, outputs);
    std::cout << "simulate: wrote " << outputs.size() << " files to " << opts.out_dir.string()
              << "\n";
    return 0;
}

struct FitOpts {
    std::vector<fs::path> data_files;
    std::string mode = "joint";
    double lambda1_c = 2.0;
    double lambda1_sq = -1.0;
    int max_in_degree = -1;
    double lambda2 = -1.0;  // negative: cross-validated
    bool force_cv = false;
    fs::path interventions_file;
};

int cmd_fit(const FitOpts& fit_opts, const GlobalOpts& opts) {
    std::vector<Eigen::MatrixXd> classes;
    for (const auto& path : fit_opts.data_files) classes.push_back(io::read_csv(path));
    const int K = static_cast<int>(classes.size());
    if (K == 0) throw ConfigError("fit: no data files given");
    const int p = static_cast<int>(classes.front().cols());
    for (const auto& x : classes)
        if (x.cols() != p) throw SizeMismatchError("fit: data files disagree on the header");

    InterventionSpec spec;
    const bool interventional = !fit_opts.interventions_file.empty();
    if (interventional)
        spec = io::read_interventions(fit_opts.interventions_file, K, p);

    if (fit_opts.force_cv && fit_opts.lambda2 >= 0.0)
        throw ConfigError("fit: --cv and --lambda2 are mutually exclusive");
    const std::uint64_t seed = opts.seed >= 0 ? static_cast<std::uint64_t>(opts.seed) : 0;
    ScoreConfig scfg;
    scfg.lambda1_sq = fit_opts.lambda1_sq;
    scfg.scaling_c = fit_opts.lambda1_c;
    scfg.max_in_degree = fit_opts.max_in_degree;
    SearchConfig search_cfg;
    LassoConfig lasso_cfg;
    lasso_cfg.lambda2 = fit_opts.lambda2;
    lasso_cfg.seed = seed;

    json resolved{{"mode", fit_opts.mode},
                  {"lambda1_c", fit_opts.lambda1_c},
                  {"lambda1_sq", fit_opts.lambda1_sq},
                  {"max_in_degree", fit_opts.max_in_degree},
                  {"lambda2", fit_opts.lambda2},
                  {"interventional", interventional},
                  {"classes", K},
                  {"p", p}};
    io::RunManifest manifest = make_manifest("fit", resolved.dump(), seed);
    for (const auto& path : fit_opts.data_files)
        manifest.input_digests[path.string()] = io::file_digest(path);
    if (interventional)
        manifest.input_digests[fit_opts.interventions_file.string()] =
            io::file_digest(fit_opts.interventions_file);

    ensure_out_dir(opts.out_dir);
    std::vector<fs::path> outputs;

    if (fit_opts.mode == "separate") {
        const MultiDataset data(classes);
        const auto fits = separate_fit(data, scfg, search_cfg);
        for (int k = 0; k < K; ++k) {
            const fs::path graph_path = opts.out_dir / ("class_" + std::to_string(k) + ".cpdag");
            io::write_pdag(graph_path, fits[k].cpdag);
            outputs.push_back(graph_path);
            const fs::path trace_path =
                opts.out_dir / ("class_" + std::to_string(k) + ".trace.jsonl");
            io::write_trace_jsonl(trace_path, fits[k].trace);
            outputs.push_back(trace_path);
        }
    } else if (fit_opts.mode == "joint") {
        const MultiDataset data(classes, spec);
        FitResult fit;
        if (interventional) {
            const InterventionalScorer scorer(data, scfg);
            const GesResult ges = gies_fit(data, scfg, search_cfg);
            const Dag union_dag = best_scoring_extension(ges.cpdag, scorer);
            fit = refit_interventional(data, union_dag, lasso_cfg, opts.jobs);
            fit.trace = ges.trace;
            // The zero-column constraint is structural; verify it anyway on
            // the written models.
            for (int k = 0; k < K; ++k)
                for (int j : spec.targets[k])
                    if (fit.per_class[k].coeffs.col(j).norm() != 0.0)
                        throw Error("fit: intervened column " + std::to_string(j) +
                                    " of class " + std::to_string(k) + " is not zero");
        } else {
            const GesResult ges = ges_fit(data, scfg, search_cfg);
            const Dag union_dag = consistent_extension(ges.cpdag);
            fit = refit_classes(data, union_dag, lasso_cfg, opts.jobs);
            fit.trace = ges.trace;
        }
        outputs = io::write_fit_result(opts.out_dir, fit);
    } else {
        throw ConfigError("fit: unknown mode '" + fit_opts.mode + "'");
    }
    finish_manifest(manifest, opts.out_dir, outputs);
    std::cout << "fit: wrote " << outputs.size() << " files to " << opts.out_dir.string() << "\n";
    return 0;
}

int cmd_evaluate(const std::vector<fs::path>& estimates, const std::vector<fs::path>& truths,
                 const GlobalOpts& opts) {
    if (estimates.size() != truths.size() || estimates.empty())
        throw ConfigError("evaluate: need matching estimate and truth file lists");

    io::RunManifest manifest = make_manifest("evaluate", "", 0);
    for (const auto& path : estimates)
        manifest.input_digests[path.string()] = io::file_digest(path);
    for (const auto& path : truths) manifest.input_digests[path.string()] = io::file_digest(path);

    json per_class = json::array();
    double shd_sum = 0.0, tpr_sum = 0.0, fpr_sum = 0.0;
    std::ostringstream csv;
    csv << "# per-class structural Hamming distance and skeleton confusion counts\n";
    csv << "class,shd,tp,fp,fn,tn,tpr,fpr\n";
    for (std::size_t k = 0; k < estimates.size(); ++k) {
        const Pdag est = io::read_pdag(estimates[k]);
        const Pdag truth = io::read_pdag(truths[k]);
        const int dist = shd(est, truth);
        const Confusion conf = confusion(est, truth);
        shd_sum += dist;
        tpr_sum += conf.tpr();
        fpr_sum += conf.fpr();
        per_class.push_back({{"class", k},
                             {"shd", dist},
                             {"tp", conf.tp},
                             {"fp", conf.fp},
                             {"fn", conf.fn},
                             {"tn", conf.tn},
                             {"tpr", conf.tpr()},
                             {"fpr", conf.fpr()}});
        csv << k << "," << dist << "," << conf.tp << "," << conf.fp << "," << conf.fn << ","
            << conf.tn << "," << conf.tpr() << "," << conf.fpr() << "\n";
    }
    const double K = static_cast<double>(estimates.size());
    json doc{{"per_class", per_class},
             {"mean_shd", shd_sum / K},
             {"mean_tpr", tpr_sum / K},
             {"mean_fpr", fpr_sum / K}};

    ensure_out_dir(opts.out_dir);
    const fs::path json_path = opts.out_dir / "metrics.json";
    std::ofstream jout(json_path);
    jout << doc.dump(2) << "\n";
    const fs::path csv_path = opts.out_dir / "metrics.csv";
    std::ofstream cout_file(csv_path);
    cout_file << csv.str();
    finish_manifest(manifest, opts.out_dir, {json_path, csv_path});
    std::cout << "evaluate: mean SHD " << shd_sum / K << "\n";
    return 0;
}

int cmd_replicate(const fs::path& config_path, const GlobalOpts& opts) {
    ExperimentConfig cfg = io::parse_experiment_config(read_text_file(config_path));
    if (opts.seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(opts.seed);

    io::RunManifest manifest =
        make_manifest("replicate", read_text_file(config_path), cfg.master_seed);
    manifest.input_digests[config_path.string()] = io::file_digest(config_path);

    ensure_out_dir(opts.out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    const MetricsSummary summary = run_comparison(cfg, opts.jobs);
    const auto t1 = std::chrono::steady_clock::now();
    RocCurves curves;
    if (!cfg.tuning_grid.empty()) curves = roc_sweep(cfg, opts.jobs);
    const auto t2 = std::chrono::steady_clock::now();
    manifest.runtimes_seconds["run_comparison"] =
        std::chrono::duration<double>(t1 - t0).count();
    manifest.runtimes_seconds["roc_sweep"] = std::chrono::duration<double>(t2 - t1).count();
    for (const auto& cell : summary.cells)
        manifest.runtimes_seconds["fit_" + cell.method] += cell.runtime_seconds;

    std::vector<fs::path> outputs;
    const fs::path summary_csv = opts.out_dir / "summary.csv";
    io::write_metrics_csv(summary_csv, summary);
    outputs.push_back(summary_csv);
    const fs::path summary_json = opts.out_dir / "summary.json";
    {
        std::ofstream out(summary_json);
        out << io::metrics_to_json(summary) << "\n";
    }
    outputs.push_back(summary_json);
    if (!cfg.tuning_grid.empty()) {
        const fs::path roc_csv = opts.out_dir / "roc.csv";
        io::write_roc_csv(roc_csv, curves);
        outputs.push_back(roc_csv);
        const fs::path roc_json = opts.out_dir / "roc.json";
        std::ofstream out(roc_json);
        out << io::roc_to_json(curves) << "\n";
        outputs.push_back(roc_json);
    }
    finish_manifest(manifest, opts.out_dir, outputs);

    int failures = 0;
    for (const auto& err : summary.replicate_errors)
        if (!err.empty()) ++failures;
    const double failure_rate = static_cast<double>(failures) / cfg.replicates;
    std::cout << "replicate: " << cfg.replicates - failures << "/" << cfg.replicates
              << " replicates succeeded\n";
    return failure_rate > 0.1 ? kExitReplicates : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint estimation of multiple directed Gaussian graphical models"};
    app.require_subcommand(1);

    GlobalOpts opts;
    const char* env_out = std::getenv("JOINTDAG_OUT");
    opts.out_dir = env_out ? fs::path(env_out) : fs::path("out");
    app.add_option("--out", opts.out_dir, "Output directory");
    app.add_option("--seed", opts.seed, "Override the configured master seed");
    app.add_option("--jobs", opts.jobs, "Parallel worker count")->check(CLI::PositiveNumber);

    fs::path sim_config;
    auto* simulate = app.add_subcommand("simulate", "Sample synthetic multi-class SEM data");
    simulate->add_option("--config", sim_config, "JSON model config")->required();

    FitOpts fit_opts;
    auto* fit = app.add_subcommand("fit", "Estimate class DAG models from CSV samples");
    fit->add_option("--data", fit_opts.data_files, "One CSV per class")->required();
    fit->add_option("--mode", fit_opts.mode, "joint or separate");
    fit->add_option("--lambda1-c", fit_opts.lambda1_c,
                    "Scaling constant c in lambda1^2 = c log(p)/n");
    fit->add_option("--lambda1-sq", fit_opts.lambda1_sq, "Explicit lambda1^2 (overrides c)");
    fit->add_option("--max-in-degree", fit_opts.max_in_degree, "In-degree bound d");
    fit->add_option("--lambda2", fit_opts.lambda2,
                    "Fixed lasso penalty scale; omit for 10-fold cross validation");
    fit->add_flag("--cv", fit_opts.force_cv, "Select lambda2 by cross validation (default)");
    fit->add_option("--interventions", fit_opts.interventions_file,
                    "JSON array of per-class intervention target lists");

    std::vector<fs::path> est_files, truth_files;
    auto* evaluate = app.add_subcommand("evaluate", "Compare estimated graphs against truth");
    evaluate->add_option("--estimate", est_files, "Estimated graph files")->required();
    evaluate->add_option("--truth", truth_files, "True graph files")->required();

    fs::path exp_config;
    auto* replicate = app.add_subcommand("replicate", "Run the joint-vs-separate comparison");
    replicate->add_option("--config", exp_config, "JSON experiment config")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(sim_config, opts);
        if (fit->parsed()) return cmd_fit(fit_opts, opts);
        if (evaluate->parsed()) return cmd_evaluate(est_files, truth_files, opts);
        if (replicate->parsed()) return cmd_replicate(exp_config, opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const SizeMismatchError& e) {
        std::cerr << "shape mismatch: " << e.what() << "\n";
        return kExitShape;
    } catch (const BadTargetError& e) {
        std::cerr << "shape mismatch: " << e.what() << "\n";
        return kExitShape;
    } catch (const Error& e) {
        std::cerr << "search error: " << e.what() << "\n";
        return kExitSearch;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSearch;
    }
    return 0;
}
