#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jointdag/eval.hpp"
#include "jointdag/graph.hpp"
#include "jointdag/refit.hpp"
#include "jointdag/search.hpp"
#include "jointdag/sem.hpp"

namespace jointdag::io {

namespace fs = std::filesystem;

// Edge-list text format: first line "p=<count>", then one edge per line as
// "i<TAB>j[<TAB>weight]" with 0-based indices. An undirected pair is stored
// as the two reciprocal directed lines.
void write_dag(const fs::path& path, const Dag& d);
void write_pdag(const fs::path& path, const Pdag& g);
Pdag read_pdag(const fs::path& path);
Dag read_dag(const fs::path& path);

// SemModel: weighted edge list plus a final "omega<TAB>v0,v1,..." line.
void write_sem(const fs::path& path, const SemModel& m);
SemModel read_sem(const fs::path& path);

// Sample matrices: CSV with header row X0..X{p-1}.
void write_csv(const fs::path& path, const Eigen::MatrixXd& x);
Eigen::MatrixXd read_csv(const fs::path& path);

// Intervention targets: JSON array of arrays, entry k lists the class-k
// target indices.
void write_interventions(const fs::path& path, const InterventionSpec& spec);
InterventionSpec read_interventions(const fs::path& path, int expected_classes, int p);

struct SimulationConfig {
    JointModelConfig model;
    std::vector<long> samples_per_class;
};

// Strict JSON parsers: exact field names, unknown fields are errors.
SimulationConfig parse_simulation_config(const std::string& text);
ExperimentConfig parse_experiment_config(const std::string& text);

void write_trace_jsonl(const fs::path& path, const SearchTrace& trace);

// FitResult: union edge list, one SemModel file per class, JSON summary.
std::vector<fs::path> write_fit_result(const fs::path& dir, const FitResult& fit);

void write_metrics_csv(const fs::path& path, const MetricsSummary& summary);
std::string metrics_to_json(const MetricsSummary& summary);
void write_roc_csv(const fs::path& path, const RocCurves& curves);
std::string roc_to_json(const RocCurves& curves);

struct RunManifest {
    std::string tool_version;
    std::string command;
    std::string resolved_config_json;  // serialized JSON object
    std::uint64_t master_seed = 0;
    std::map<std::string, std::string> input_digests;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> outputs;
    std::map<std::string, double> runtimes_seconds;
};

void write_manifest(const fs::path& path, const RunManifest& manifest);

/// FNV-1a 64-bit digest of the file contents, hex encoded.
std::string file_digest(const fs::path& path);

std::string timestamp_utc();

}  // namespace jointdag::io
