#include "jointdag/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <mutex>
#include <numeric>
#include <thread>

#include "jointdag/errors.hpp"
#include "jointdag/random.hpp"

namespace jointdag {

namespace {

// Stream ids for per-replicate seed derivation.
constexpr std::uint64_t kStreamModel = 0;
constexpr std::uint64_t kStreamSampleBase = 1;
constexpr std::uint64_t kStreamLassoBase = 1u << 20;

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0) /
                     static_cast<double>(v.size()));
}

void run_replicates(int count, int jobs, const std::function<void(int)>& work) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || count <= 1) {
        for (int r = 0; r < count; ++r) work(r);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(jobs, count); ++w)
        pool.emplace_back([&] {
            for (int r = next.fetch_add(1); r < count; r = next.fetch_add(1)) work(r);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

void ExperimentConfig::validate() const {
    model.validate();
    if (static_cast<int>(samples_per_class.size()) != model.K)
        throw ConfigError("ExperimentConfig: samples_per_class must list K entries");
    for (long n : samples_per_class)
        if (n < 2) throw ConfigError("ExperimentConfig: each class needs at least two samples");
    if (replicates < 1) throw ConfigError("ExperimentConfig: replicates must be positive");
    if (scaling_grid.empty()) throw ConfigError("ExperimentConfig: scaling_grid is empty");
}

Confusion confusion(const Pdag& estimate, const Pdag& truth) {
    if (estimate.node_count() != truth.node_count())
        throw SizeMismatchError("confusion: node count mismatch");
    const int p = truth.node_count();
    Confusion out;
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j) {
            const bool in_est = estimate.adjacent(i, j);
            const bool in_truth = truth.adjacent(i, j);
            if (in_est && in_truth)
                ++out.tp;
            else if (in_est)
                ++out.fp;
            else if (in_truth)
                ++out.fn;
            else
                ++out.tn;
        }
    return out;
}

Confusion confusion(const Dag& estimate, const Dag& truth) {
    return confusion(Pdag::from_dag(estimate), Pdag::from_dag(truth));
}

double MethodCell::mean_shd() const { return mean_of(shd); }
double MethodCell::se_shd() const { return se_of(shd); }
double MethodCell::mean_tpr() const { return mean_of(tpr); }
double MethodCell::mean_fpr() const { return mean_of(fpr); }

const MethodCell* MetricsSummary::find(const std::string& method, double c) const {
    for (const auto& cell : cells)
        if (cell.method == method && cell.c == c) return &cell;
    return nullptr;
}

ReplicateInstance make_replicate(const ExperimentConfig& cfg, int replicate) {
    const std::uint64_t base = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(replicate));
    Rng model_rng(derive_seed(base, kStreamModel));
    JointModel jm = random_joint_model(cfg.model, model_rng);
    std::vector<Eigen::MatrixXd> classes;
    classes.reserve(cfg.model.K);
    for (int k = 0; k < cfg.model.K; ++k) {
        Rng rng(derive_seed(base, kStreamSampleBase + static_cast<std::uint64_t>(k)));
        classes.push_back(sample(jm.sems[k], static_cast<int>(cfg.samples_per_class[k]), rng));
    }
    return {std::move(jm.dags), std::move(jm.sems), MultiDataset(std::move(classes))};
}

FitResult joint_pipeline(const MultiDataset& data, double c, const PipelineConfig& pcfg,
                         std::uint64_t lasso_seed, int jobs) {
    ScoreConfig scfg = pcfg.score;
    scfg.lambda1_sq = -1.0;
    scfg.scaling_c = c;
    const GesResult ges = ges_fit(data, scfg, pcfg.search);
    const Dag union_dag = consistent_extension(ges.cpdag);
    LassoConfig lcfg = pcfg.lasso;
    lcfg.seed = lasso_seed;
    FitResult fit = refit_classes(data, union_dag, lcfg, jobs);
    fit.trace = ges.trace;
    return fit;
}

namespace {

struct ReplicateMetrics {
    // Indexed by scaling-grid position: mean-over-classes SHD / TPR / FPR.
    std::vector<double> joint_shd, joint_tpr, joint_fpr;
    std::vector<double> sep_shd, sep_tpr, sep_fpr;
    double joint_seconds = 0.0;
    double sep_seconds = 0.0;
    std::string error;
    bool ok = false;
};

ReplicateMetrics run_one_replicate(const ExperimentConfig& cfg, int r,
                                   const std::vector<double>& grid) {
    using clock = std::chrono::steady_clock;
    ReplicateMetrics out;
    try {
        const ReplicateInstance inst = make_replicate(cfg, r);
        const int K = cfg.model.K;
        std::vector<Pdag> true_cpdags;
        true_cpdags.reserve(K);
        for (const auto& d : inst.true_dags) true_cpdags.push_back(complete_to_cpdag(d));
        const std::uint64_t base =
            derive_seed(cfg.master_seed, static_cast<std::uint64_t>(r));

        for (std::size_t ci = 0; ci < grid.size(); ++ci) {
            const double c = grid[ci];

            const auto t0 = clock::now();
            const FitResult joint = joint_pipeline(
                inst.data, c, cfg.pipeline, derive_seed(base, kStreamLassoBase + ci), 1);
            const auto t1 = clock::now();
            double shd_sum = 0.0, tpr_sum = 0.0, fpr_sum = 0.0;
            for (int k = 0; k < K; ++k) {
                const Dag est = joint.per_class[k].dag();
                shd_sum += shd(est, inst.true_dags[k]);
                const Confusion conf = confusion(est, inst.true_dags[k]);
                tpr_sum += conf.tpr();
                fpr_sum += conf.fpr();
            }
            out.joint_shd.push_back(shd_sum / K);
            out.joint_tpr.push_back(tpr_sum / K);
            out.joint_fpr.push_back(fpr_sum / K);
            out.joint_seconds += std::chrono::duration<double>(t1 - t0).count();

            // The comparison uses one shared penalty value for both methods,
            // lambda1^2 = c log(p) / n with n the pooled sample count.
            ScoreConfig scfg = cfg.pipeline.score;
            scfg.scaling_c = c;
            scfg.lambda1_sq = scfg.effective_lambda1_sq(inst.data.node_count(),
                                                        inst.data.total_rows());
            const auto t2 = clock::now();
            const auto seps = separate_fit(inst.data, scfg, cfg.pipeline.search);
            const auto t3 = clock::now();
            shd_sum = tpr_sum = fpr_sum = 0.0;
            for (int k = 0; k < K; ++k) {
                shd_sum += shd(seps[k].cpdag, true_cpdags[k]);
                const Confusion conf =
                    confusion(seps[k].cpdag, Pdag::from_dag(inst.true_dags[k]));
                tpr_sum += conf.tpr();
                fpr_sum += conf.fpr();
            }
            out.sep_shd.push_back(shd_sum / K);
            out.sep_tpr.push_back(tpr_sum / K);
            out.sep_fpr.push_back(fpr_sum / K);
            out.sep_seconds += std::chrono::duration<double>(t3 - t2).count();
        }
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
        out.ok = false;
    }
    return out;
}

MetricsSummary collect_metrics(const ExperimentConfig& cfg, int jobs,
                               const std::vector<double>& grid) {
    std::vector<ReplicateMetrics> results(cfg.replicates);
    run_replicates(cfg.replicates, jobs,
                   [&](int r) { results[r] = run_one_replicate(cfg, r, grid); });

    MetricsSummary summary;
    summary.replicates = cfg.replicates;
    summary.replicate_errors.resize(cfg.replicates);
    for (const std::string& method : {"joint", "separate"})
        for (double c : grid) {
            MethodCell cell;
            cell.method = method;
            cell.c = c;
            summary.cells.push_back(std::move(cell));
        }
    auto cell_at = [&](const std::string& method, std::size_t ci) -> MethodCell& {
        return summary.cells[(method == "joint" ? 0 : grid.size()) + ci];
    };
    for (int r = 0; r < cfg.replicates; ++r) {
        const auto& res = results[r];
        summary.replicate_errors[r] = res.error;
        if (!res.ok) continue;
        for (std::size_t ci = 0; ci < grid.size(); ++ci) {
            auto& joint = cell_at("joint", ci);
            joint.shd.push_back(res.joint_shd[ci]);
            joint.tpr.push_back(res.joint_tpr[ci]);
            joint.fpr.push_back(res.joint_fpr[ci]);
            auto& sep = cell_at("separate", ci);
            sep.shd.push_back(res.sep_shd[ci]);
            sep.tpr.push_back(res.sep_tpr[ci]);
            sep.fpr.push_back(res.sep_fpr[ci]);
        }
        for (std::size_t ci = 0; ci < grid.size(); ++ci) {
            cell_at("joint", ci).runtime_seconds += res.joint_seconds / grid.size();
            cell_at("separate", ci).runtime_seconds += res.sep_seconds / grid.size();
        }
    }
    return summary;
}

}  // namespace

MetricsSummary run_comparison(const ExperimentConfig& cfg, int jobs) {
    cfg.validate();
    return collect_metrics(cfg, jobs, cfg.scaling_grid);
}

RocCurves roc_sweep(const ExperimentConfig& cfg, int jobs) {
    cfg.validate();
    if (cfg.tuning_grid.empty()) throw ConfigError("roc_sweep: tuning_grid is empty");
    const MetricsSummary summary = collect_metrics(cfg, jobs, cfg.tuning_grid);

    RocCurves curves;
    curves.replicate_errors = summary.replicate_errors;
    for (const auto& cell : summary.cells) {
        const RocPoint point{cell.c, cell.mean_fpr(), cell.mean_tpr()};
        (cell.method == "joint" ? curves.joint : curves.separate).push_back(point);
    }
    auto by_fpr = [](const RocPoint& a, const RocPoint& b) {
        return a.fpr < b.fpr || (a.fpr == b.fpr && a.tpr < b.tpr);
    };
    std::sort(curves.joint.begin(), curves.joint.end(), by_fpr);
    std::sort(curves.separate.begin(), curves.separate.end(), by_fpr);
    return curves;
}

StabilityResult stability_selection(const MultiDataset& data, const PipelineConfig& pcfg,
                                    int subsamples, double fraction, double threshold,
                                    std::uint64_t seed, int jobs) {
    if (subsamples < 2) throw ConfigError("stability_selection: need at least two subsamples");
    if (!(fraction > 0.0) || fraction >= 1.0)
        throw ConfigError("stability_selection: fraction must lie in (0, 1)");
    if (threshold < 0.0 || threshold > 1.0)
        throw ConfigError("stability_selection: threshold must lie in [0, 1]");

    const int p = data.node_count();
    const int K = data.class_count();
    const double c = pcfg.score.scaling_c;

    // Integer selection counts keep the aggregation exactly order-invariant.
    std::vector<Eigen::MatrixXi> class_counts(K, Eigen::MatrixXi::Zero(p, p));
    Eigen::MatrixXi union_counts = Eigen::MatrixXi::Zero(p, p);
    std::vector<std::string> errors(subsamples);
    std::mutex mu;

    run_replicates(subsamples, jobs, [&](int s) {
        try {
            std::vector<std::vector<int>> rows(K);
            for (int k = 0; k < K; ++k) {
                const int nk = data.rows(k);
                const int take = std::max(2, static_cast<int>(fraction * nk));
                std::vector<int> all(nk);
                std::iota(all.begin(), all.end(), 0);
                Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s),
                                    static_cast<std::uint64_t>(k)));
                std::shuffle(all.begin(), all.end(), rng);
                rows[k].assign(all.begin(), all.begin() + take);
                std::sort(rows[k].begin(), rows[k].end());
            }
            const MultiDataset sub = data.subsample(rows);
            const FitResult fit = joint_pipeline(
                sub, c, pcfg, derive_seed(seed, static_cast<std::uint64_t>(s), 1u << 16), 1);
            std::lock_guard<std::mutex> lock(mu);
            for (const auto& [i, j] : fit.union_dag.edges()) union_counts(i, j) += 1;
            for (int k = 0; k < K; ++k)
                for (const auto& [i, j] : fit.per_class[k].dag().edges())
                    class_counts[k](i, j) += 1;
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(mu);
            errors[s] = e.what();
        }
    });

    StabilityResult out;
    out.subsamples = subsamples;
    out.union_freq = union_counts.cast<double>() / subsamples;
    for (int k = 0; k < K; ++k)
        out.class_freq.push_back(class_counts[k].cast<double>() / subsamples);
    auto select = [&](const Eigen::MatrixXd& freq) {
        std::vector<Edge> sel;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                if (freq(i, j) > 0.0 && freq(i, j) >= threshold) sel.emplace_back(i, j);
        return sel;
    };
    out.union_selected = select(out.union_freq);
    for (int k = 0; k < K; ++k) out.class_selected.push_back(select(out.class_freq[k]));
    return out;
}

std::set<int> hub_nodes(const Dag& union_dag, int min_total_degree) {
    std::set<int> hubs;
    for (int v = 0; v < union_dag.node_count(); ++v) {
        const int degree = static_cast<int>(union_dag.parents(v).size()) +
                           static_cast<int>(union_dag.children(v).size());
        if (degree > min_total_degree) hubs.insert(v);
    }
    return hubs;
}

}  // namespace jointdag
