#include "jointdag/io.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "jointdag/errors.hpp"

namespace jointdag::io {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

struct EdgeListFile {
    int p = 0;
    // (i, j, weight); weight NaN when absent.
    std::vector<std::tuple<int, int, double>> lines;
    bool has_omega = false;
    std::vector<double> omega;
};

EdgeListFile read_edge_list(const fs::path& path) {
    std::ifstream in = open_in(path);
    EdgeListFile out;
    std::string line;
    if (!std::getline(in, line) || line.rfind("p=", 0) != 0)
        throw IoError(path.string() + ": expected a first line of the form p=<count>");
    try {
        out.p = std::stoi(line.substr(2));
    } catch (const std::exception&) {
        throw IoError(path.string() + ": malformed node count line");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string first;
        row >> first;
        if (first == "omega") {
            std::string rest;
            row >> rest;
            std::istringstream values(rest);
            std::string tok;
            while (std::getline(values, tok, ',')) out.omega.push_back(std::stod(tok));
            out.has_omega = true;
            continue;
        }
        int i = 0, j = 0;
        double w = std::numeric_limits<double>::quiet_NaN();
        try {
            i = std::stoi(first);
        } catch (const std::exception&) {
            throw IoError(path.string() + ": malformed edge line '" + line + "'");
        }
        if (!(row >> j)) throw IoError(path.string() + ": malformed edge line '" + line + "'");
        row >> w;
        out.lines.emplace_back(i, j, w);
    }
    return out;
}

json metrics_json_value(const MetricsSummary& summary) {
    json cells = json::array();
    for (const auto& cell : summary.cells) {
        cells.push_back({{"method", cell.method},
                         {"c", cell.c},
                         {"mean_shd", cell.mean_shd()},
                         {"se_shd", cell.se_shd()},
                         {"mean_tpr", cell.mean_tpr()},
                         {"mean_fpr", cell.mean_fpr()},
                         {"shd_per_replicate", cell.shd},
                         {"tpr_per_replicate", cell.tpr},
                         {"fpr_per_replicate", cell.fpr}});
    }
    json errors = json::array();
    for (const auto& e : summary.replicate_errors) errors.push_back(e);
    return json{{"replicates", summary.replicates},
                {"cells", cells},
                {"replicate_errors", errors}};
}

}  // namespace

void write_dag(const fs::path& path, const Dag& d) {
    std::ofstream out = open_out(path);
    out << "p=" << d.node_count() << "\n";
    for (const auto& [i, j] : d.edges()) out << i << "\t" << j << "\n";
}

void write_pdag(const fs::path& path, const Pdag& g) {
    std::ofstream out = open_out(path);
    out << "p=" << g.node_count() << "\n";
    std::vector<Edge> lines = g.directed_edges();
    for (const auto& [i, j] : g.undirected_edges()) {
        lines.emplace_back(i, j);
        lines.emplace_back(j, i);
    }
    std::sort(lines.begin(), lines.end());
    for (const auto& [i, j] : lines) out << i << "\t" << j << "\n";
}

Pdag read_pdag(const fs::path& path) {
    const EdgeListFile file = read_edge_list(path);
    Pdag g(file.p);
    std::set<Edge> seen;
    for (const auto& [i, j, w] : file.lines) seen.insert({i, j});
    std::set<Edge> done;
    for (const auto& [i, j, w] : file.lines) {
        if (done.count({i, j})) continue;
        if (seen.count({j, i})) {
            g.add_undirected(i, j);
            done.insert({i, j});
            done.insert({j, i});
        } else {
            g.add_directed(i, j);
            done.insert({i, j});
        }
    }
    return g;
}

Dag read_dag(const fs::path& path) {
    const EdgeListFile file = read_edge_list(path);
    Dag d(file.p);
    for (const auto& [i, j, w] : file.lines) d.add_edge(i, j);
    return d;
}

void write_sem(const fs::path& path, const SemModel& m) {
    std::ofstream out = open_out(path);
    const int p = m.node_count();
    out << "p=" << p << "\n";
    for (const auto& [i, j] : m.dag().edges())
        out << i << "\t" << j << "\t" << fmt_double(m.coeffs(i, j)) << "\n";
    out << "omega\t";
    for (int j = 0; j < p; ++j) out << (j ? "," : "") << fmt_double(m.noise_var[j]);
    out << "\n";
}

SemModel read_sem(const fs::path& path) {
    const EdgeListFile file = read_edge_list(path);
    if (!file.has_omega || static_cast<int>(file.omega.size()) != file.p)
        throw IoError(path.string() + ": missing or malformed omega line");
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(file.p, file.p);
    for (const auto& [i, j, w] : file.lines) {
        if (std::isnan(w)) throw IoError(path.string() + ": edge line without a weight");
        a(i, j) = w;
    }
    Eigen::VectorXd omega(file.p);
    for (int j = 0; j < file.p; ++j) omega[j] = file.omega[j];
    return SemModel(std::move(a), std::move(omega));
}

void write_csv(const fs::path& path, const Eigen::MatrixXd& x) {
    std::ofstream out = open_out(path);
    for (int c = 0; c < x.cols(); ++c) out << (c ? "," : "") << "X" << c;
    out << "\n";
    for (long r = 0; r < x.rows(); ++r) {
        for (int c = 0; c < x.cols(); ++c) out << (c ? "," : "") << fmt_double(x(r, c));
        out << "\n";
    }
}

Eigen::MatrixXd read_csv(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
    std::vector<std::string> header;
    {
        std::istringstream row(line);
        std::string tok;
        while (std::getline(row, tok, ',')) header.push_back(tok);
    }
    const int p = static_cast<int>(header.size());
    for (int c = 0; c < p; ++c)
        if (header[c] != "X" + std::to_string(c))
            throw IoError(path.string() + ": expected header X0..X" + std::to_string(p - 1));
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                row.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw IoError(path.string() + ": malformed number '" + tok + "'");
            }
        }
        if (static_cast<int>(row.size()) != p)
            throw IoError(path.string() + ": row with wrong column count");
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd x(static_cast<long>(rows.size()), p);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (int c = 0; c < p; ++c) x(static_cast<long>(r), c) = rows[r][c];
    return x;
}

void write_interventions(const fs::path& path, const InterventionSpec& spec) {
    json arr = json::array();
    for (const auto& cls : spec.targets) arr.push_back(cls);
    std::ofstream out = open_out(path);
    out << arr.dump(2) << "\n";
}

InterventionSpec read_interventions(const fs::path& path, int expected_classes, int p) {
    std::ifstream in = open_in(path);
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    if (!doc.is_array())
        throw ConfigError(path.string() + ": expected a JSON array of arrays");
    std::vector<std::vector<int>> targets;
    for (const auto& cls : doc) {
        if (!cls.is_array()) throw ConfigError(path.string() + ": entries must be arrays");
        targets.push_back(cls.get<std::vector<int>>());
    }
    if (expected_classes >= 0 && static_cast<int>(targets.size()) != expected_classes)
        throw SizeMismatchError(path.string() + ": intervention spec lists " +
                                std::to_string(targets.size()) + " classes, data has " +
                                std::to_string(expected_classes));
    return InterventionSpec(std::move(targets), p);
}

namespace {

void check_known_fields(const json& doc, const std::vector<std::string>& known,
                        const std::string& where) {
    for (const auto& [key, value] : doc.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError(where + ": unknown field '" + key + "'");
    }
}

Interval parse_interval(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2)
        throw ConfigError(where + ": expected an interval [lo, hi]");
    return {v[0].get<double>(), v[1].get<double>()};
}

JointModelConfig parse_model_fields(const json& doc, const std::string& where,
                                    std::vector<long>* samples) {
    std::vector<std::string> fields{"p",           "K",           "core_edges",
                                    "extra_edges", "weight_range", "variance_range",
                                    "seed",        "lock_shared_weights"};
    if (samples) fields.push_back("n_k");
    check_known_fields(doc, fields, where);

    JointModelConfig cfg;
    if (!doc.contains("p") || !doc.contains("K"))
        throw ConfigError(where + ": fields p and K are required");
    cfg.p = doc.at("p").get<int>();
    cfg.K = doc.at("K").get<int>();
    if (doc.contains("core_edges")) cfg.core_edges = doc.at("core_edges").get<double>();
    if (doc.contains("extra_edges")) cfg.extra_edges = doc.at("extra_edges").get<int>();
    if (doc.contains("weight_range")) {
        const auto& wr = doc.at("weight_range");
        if (!wr.is_array() || wr.size() != 2)
            throw ConfigError(where + ": weight_range must hold two intervals");
        cfg.weight_range = {parse_interval(wr[0], where + ".weight_range"),
                            parse_interval(wr[1], where + ".weight_range")};
    }
    if (doc.contains("variance_range"))
        cfg.variance_range = parse_interval(doc.at("variance_range"), where + ".variance_range");
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("lock_shared_weights"))
        cfg.lock_shared_weights = doc.at("lock_shared_weights").get<bool>();
    if (samples) {
        if (!doc.contains("n_k")) throw ConfigError(where + ": field n_k is required");
        *samples = doc.at("n_k").get<std::vector<long>>();
    }
    cfg.validate();
    return cfg;
}

json parse_text(const std::string& text, const std::string& where) {
    try {
        return json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(where + ": invalid JSON: " + e.what());
    }
}

}  // namespace

SimulationConfig parse_simulation_config(const std::string& text) {
    const json doc = parse_text(text, "simulation config");
    SimulationConfig cfg;
    cfg.model = parse_model_fields(doc, "simulation config", &cfg.samples_per_class);
    if (static_cast<int>(cfg.samples_per_class.size()) != cfg.model.K)
        throw ConfigError("simulation config: n_k must list K entries");
    for (long n : cfg.samples_per_class)
        if (n < 2) throw ConfigError("simulation config: every n_k must be at least 2");
    return cfg;
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    const json doc = parse_text(text, "experiment config");
    check_known_fields(doc, {"model", "replicates", "scaling_grid", "tuning_grid",
                             "master_seed", "max_in_degree", "cv_folds", "lasso_grid_size"},
                       "experiment config");
    ExperimentConfig cfg;
    if (!doc.contains("model")) throw ConfigError("experiment config: field model is required");
    std::vector<long> samples;
    cfg.model = parse_model_fields(doc.at("model"), "experiment config.model", &samples);
    cfg.samples_per_class = std::move(samples);
    if (doc.contains("replicates")) cfg.replicates = doc.at("replicates").get<int>();
    if (doc.contains("scaling_grid"))
        cfg.scaling_grid = doc.at("scaling_grid").get<std::vector<double>>();
    if (doc.contains("tuning_grid"))
        cfg.tuning_grid = doc.at("tuning_grid").get<std::vector<double>>();
    if (doc.contains("master_seed")) cfg.master_seed = doc.at("master_seed").get<std::uint64_t>();
    if (doc.contains("max_in_degree"))
        cfg.pipeline.score.max_in_degree = doc.at("max_in_degree").get<int>();
    if (doc.contains("cv_folds")) cfg.pipeline.lasso.cv_folds = doc.at("cv_folds").get<int>();
    if (doc.contains("lasso_grid_size"))
        cfg.pipeline.lasso.grid_size = doc.at("lasso_grid_size").get<int>();
    cfg.validate();
    return cfg;
}

void write_trace_jsonl(const fs::path& path, const SearchTrace& trace) {
    std::ofstream out = open_out(path);
    out << json{{"event", "start"}, {"score", trace.initial_score}}.dump() << "\n";
    for (const auto& mv : trace.moves) {
        out << json{{"event", mv.kind == SearchMove::Kind::insert ? "insert" : "delete"},
                    {"x", mv.x},
                    {"y", mv.y},
                    {"set", mv.subset},
                    {"score_before", mv.score_before},
                    {"score_after", mv.score_after},
                    {"delta", mv.score_after - mv.score_before}}
                   .dump()
            << "\n";
    }
    out << json{{"event", "end"},
                {"score", trace.final_score},
                {"moves", trace.moves.size()},
                {"move_limit_hit", trace.move_limit_hit}}
               .dump()
        << "\n";
}

std::vector<fs::path> write_fit_result(const fs::path& dir, const FitResult& fit) {
    std::vector<fs::path> written;
    const fs::path union_path = dir / "union.edges";
    write_dag(union_path, fit.union_dag);
    written.push_back(union_path);
    for (std::size_t k = 0; k < fit.per_class.size(); ++k) {
        const fs::path sem_path = dir / ("class_" + std::to_string(k) + ".sem");
        write_sem(sem_path, fit.per_class[k]);
        written.push_back(sem_path);
    }
    const fs::path trace_path = dir / "trace.jsonl";
    write_trace_jsonl(trace_path, fit.trace);
    written.push_back(trace_path);

    json lambda = json::array();
    for (long k = 0; k < fit.chosen_lambda2.rows(); ++k) {
        json row = json::array();
        for (long j = 0; j < fit.chosen_lambda2.cols(); ++j) {
            const double v = fit.chosen_lambda2(k, j);
            row.push_back(std::isnan(v) ? json(nullptr) : json(v));
        }
        lambda.push_back(row);
    }
    json summary{{"union_edges", fit.union_dag.edge_count()},
                 {"classes", fit.per_class.size()},
                 {"class_edges", json::array()},
                 {"chosen_lambda2", lambda},
                 {"search_moves", fit.trace.moves.size()},
                 {"final_score", fit.trace.final_score}};
    for (const auto& sem : fit.per_class) summary["class_edges"].push_back(sem.dag().edge_count());
    const fs::path summary_path = dir / "summary.json";
    std::ofstream out = open_out(summary_path);
    out << summary.dump(2) << "\n";
    written.push_back(summary_path);
    return written;
}

void write_metrics_csv(const fs::path& path, const MetricsSummary& summary) {
    std::ofstream out = open_out(path);
    out << "# one row per (method, scaling constant); SHD/TPR/FPR averaged over classes "
           "and replicates; se_shd is the standard error across replicates\n";
    out << "method,c,replicates,mean_shd,se_shd,mean_tpr,mean_fpr\n";
    for (const auto& cell : summary.cells) {
        out << cell.method << "," << fmt_double(cell.c) << "," << cell.shd.size() << ","
            << fmt_double(cell.mean_shd()) << "," << fmt_double(cell.se_shd()) << ","
            << fmt_double(cell.mean_tpr()) << "," << fmt_double(cell.mean_fpr()) << "\n";
    }
}

std::string metrics_to_json(const MetricsSummary& summary) {
    return metrics_json_value(summary).dump(2);
}

void write_roc_csv(const fs::path& path, const RocCurves& curves) {
    std::ofstream out = open_out(path);
    out << "# ROC points sorted by FPR; skeleton-level rates macro-averaged over classes "
           "and replicates\n";
    out << "method,c,fpr,tpr\n";
    for (const auto& pt : curves.joint)
        out << "joint," << fmt_double(pt.c) << "," << fmt_double(pt.fpr) << ","
            << fmt_double(pt.tpr) << "\n";
    for (const auto& pt : curves.separate)
        out << "separate," << fmt_double(pt.c) << "," << fmt_double(pt.fpr) << ","
            << fmt_double(pt.tpr) << "\n";
}

std::string roc_to_json(const RocCurves& curves) {
    json doc{{"joint", json::array()}, {"separate", json::array()}};
    for (const auto& pt : curves.joint)
        doc["joint"].push_back({{"c", pt.c}, {"fpr", pt.fpr}, {"tpr", pt.tpr}});
    for (const auto& pt : curves.separate)
        doc["separate"].push_back({{"c", pt.c}, {"fpr", pt.fpr}, {"tpr", pt.tpr}});
    return doc.dump(2);
}

void write_manifest(const fs::path& path, const RunManifest& manifest) {
    json digests = json::object();
    for (const auto& [file, digest] : manifest.input_digests) digests[file] = digest;
    json runtimes = json::object();
    for (const auto& [key, seconds] : manifest.runtimes_seconds) runtimes[key] = seconds;
    json doc{{"tool_version", manifest.tool_version},
             {"command", manifest.command},
             {"resolved_config", manifest.resolved_config_json.empty()
                                     ? json(nullptr)
                                     : json::parse(manifest.resolved_config_json)},
             {"master_seed", manifest.master_seed},
             {"input_digests", digests},
             {"started_at", manifest.started_at},
             {"finished_at", manifest.finished_at},
             {"outputs", manifest.outputs},
             {"runtimes_seconds", runtimes}};
    std::ofstream out = open_out(path);
    out << doc.dump(2) << "\n";
}

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof(buf));
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
    }
    char hex[20];
    std::snprintf(hex, sizeof(hex), "fnv1a64:%016" PRIx64, hash);
    return hex;
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace jointdag::io
