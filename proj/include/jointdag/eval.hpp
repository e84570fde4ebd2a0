#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "jointdag/graph.hpp"
#include "jointdag/refit.hpp"
#include "jointdag/scoring.hpp"
#include "jointdag/search.hpp"
#include "jointdag/sem.hpp"

namespace jointdag {

struct PipelineConfig {
    ScoreConfig score;
    SearchConfig search;
    LassoConfig lasso;
};

struct ExperimentConfig {
    JointModelConfig model;
    /// Rows drawn per class.
    std::vector<long> samples_per_class;
    int replicates = 1;
    /// Scaling constants c with lambda1^2 = c log(p) / n.
    std::vector<double> scaling_grid{2.0, 3.0, 4.0};
    /// Constants swept for the ROC curve.
    std::vector<double> tuning_grid;
    std::uint64_t master_seed = 0;
    PipelineConfig pipeline;

    void validate() const;
};

struct Confusion {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;

    double tpr() const { return tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0; }
    double fpr() const { return fp + tn > 0 ? static_cast<double>(fp) / (fp + tn) : 0.0; }
};

/// Skeleton-level confusion counts over unordered node pairs.
Confusion confusion(const Pdag& estimate, const Pdag& truth);
Confusion confusion(const Dag& estimate, const Dag& truth);

/// Per-(method, scaling-constant) aggregate with per-replicate values kept
/// for paired comparisons.
struct MethodCell {
    std::string method;
    double c = 0.0;
    std::vector<double> shd;  // one entry per successful replicate, mean over classes
    std::vector<double> tpr;
    std::vector<double> fpr;
    double runtime_seconds = 0.0;

    double mean_shd() const;
    double se_shd() const;
    double mean_tpr() const;
    double mean_fpr() const;
};

struct MetricsSummary {
    std::vector<MethodCell> cells;
    /// One entry per replicate; empty string when it succeeded.
    std::vector<std::string> replicate_errors;
    int replicates = 0;

    const MethodCell* find(const std::string& method, double c) const;
};

/// One generated instance of the experiment; exposed so outputs can be
/// reproduced and cross-checked replicate by replicate.
struct ReplicateInstance {
    std::vector<Dag> true_dags;
    std::vector<SemModel> true_sems;
    MultiDataset data;
};
ReplicateInstance make_replicate(const ExperimentConfig& cfg, int replicate);

/// Joint pipeline at one scaling constant: GES union estimate, deterministic
/// extension, per-class lasso refits.
FitResult joint_pipeline(const MultiDataset& data, double c, const PipelineConfig& pcfg,
                         std::uint64_t lasso_seed, int jobs = 1);

/// Paired jointGES-vs-separate-GES comparison over the scaling grid. SHD for
/// the joint method compares refit class DAGs against the true DAGs; the
/// separate baseline is compared CPDAG against true CPDAG.
MetricsSummary run_comparison(const ExperimentConfig& cfg, int jobs = 1);

struct RocPoint {
    double c = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurves {
    std::vector<RocPoint> joint;
    std::vector<RocPoint> separate;
    std::vector<std::string> replicate_errors;
};

/// Macro-averaged skeleton TPR/FPR per tuning value, sorted by FPR.
RocCurves roc_sweep(const ExperimentConfig& cfg, int jobs = 1);

struct StabilityResult {
    /// Per class, (i, j) entry = fraction of subsamples selecting i -> j.
    std::vector<Eigen::MatrixXd> class_freq;
    Eigen::MatrixXd union_freq;
    std::vector<std::vector<Edge>> class_selected;
    std::vector<Edge> union_selected;
    int subsamples = 0;
};

/// Repeated subsample-and-fit edge frequencies with thresholded selections.
StabilityResult stability_selection(const MultiDataset& data, const PipelineConfig& pcfg,
                                    int subsamples, double fraction, double threshold,
                                    std::uint64_t seed, int jobs = 1);

/// Nodes whose in-degree plus out-degree strictly exceeds the threshold.
std::set<int> hub_nodes(const Dag& union_dag, int min_total_degree = 5);

}  // namespace jointdag
