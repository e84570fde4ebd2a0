#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <list>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "jointdag/graph.hpp"
#include "jointdag/sem.hpp"

namespace jointdag {

/// K per-class sample matrices over a shared node set, with precomputed Gram
/// matrices. Columns are mean-centered at construction unless center=false.
class MultiDataset {
public:
    explicit MultiDataset(std::vector<Eigen::MatrixXd> classes,
                          InterventionSpec interventions = {}, bool center = true);

    int node_count() const { return p_; }
    int class_count() const { return K_; }
    int rows(int k) const { return static_cast<int>(classes_[k].rows()); }
    long total_rows() const { return n_; }
    double weight(int k) const { return static_cast<double>(rows(k)) / static_cast<double>(n_); }
    const Eigen::MatrixXd& data(int k) const { return classes_[k]; }
    const Eigen::MatrixXd& gram(int k) const { return gram_[k]; }

    const InterventionSpec& interventions() const { return interventions_; }
    /// True when at least one class has a non-empty target set.
    bool has_interventions() const { return !interventions_.all_empty(); }

    /// Classes in which node j is not intervened on.
    const std::vector<int>& observational_classes(int j) const { return obs_classes_[j]; }
    /// Total number of samples in which node j is not intervened on.
    long rows_not_intervened(int j) const { return n_minus_[j]; }

    MultiDataset single_class(int k) const;
    MultiDataset subsample(const std::vector<std::vector<int>>& rows_per_class) const;

private:
    int p_ = 0;
    int K_ = 0;
    long n_ = 0;
    std::vector<Eigen::MatrixXd> classes_;
    std::vector<Eigen::MatrixXd> gram_;
    InterventionSpec interventions_;
    std::vector<std::vector<int>> obs_classes_;
    std::vector<long> n_minus_;
};

struct ScoreConfig {
    /// Penalty per union edge; used verbatim when >= 0.
    double lambda1_sq = -1.0;
    /// Otherwise lambda1_sq = scaling_c * log(p) / n.
    double scaling_c = 2.0;
    /// Maximum in-degree d; -1 means unbounded (p - 1).
    int max_in_degree = -1;
    /// Relative clamp for residual sums: rss is floored at
    /// rss_floor * ||X_j||^2, guarding log(0) on exact fits.
    double rss_floor = 1e-12;
    bool use_cache = true;
    /// Cache entry cap; 0 keeps the cache unbounded.
    std::size_t cache_cap = 0;

    double effective_lambda1_sq(int p, long n) const;
    int effective_max_in_degree(int p) const;
    void validate() const;
};

/// Penalty rate with the sparsity-dependent factor; needs a user-supplied
/// guess of the union edge count.
double theory_lambda1_sq(int p, long n, long union_edges_guess);

/// Thread-safe map (class, node, sorted parent set) -> clamped residual sum
/// of squares, with optional LRU eviction. Class -1 holds pooled regressions.
class ScoreCache {
public:
    explicit ScoreCache(std::size_t cap = 0) : cap_(cap) {}

    std::optional<double> get(int k, int j, const std::vector<int>& parents) const;
    void put(int k, int j, const std::vector<int>& parents, double rss);
    std::size_t size() const;

private:
    struct Key {
        int k;
        int j;
        std::vector<int> parents;
        bool operator==(const Key& o) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& key) const;
    };

    mutable std::mutex mu_;
    std::size_t cap_;
    mutable std::list<Key> recency_;
    mutable std::unordered_map<Key, std::pair<double, std::list<Key>::iterator>, KeyHash> map_;
};

/// Minimal residual sum of squares of regressing column j of class k on the
/// parent columns (centered, intercept-free), clamped at the configured
/// floor. Rank-deficient systems fall back to the minimum-norm solution.
double ols_rss(const MultiDataset& data, int k, int j, const std::vector<int>& parents,
               const ScoreConfig& cfg = {}, ScoreCache* cache = nullptr);

/// Decomposable local scorer; higher is better.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual double local_score(int j, const std::vector<int>& parents) const = 0;
    virtual const MultiDataset& data() const = 0;
    /// Largest parent set the scorer can evaluate at node j.
    virtual int max_parents(int j) const = 0;
};

/// Negated per-node summand of the joint objective:
/// -[ sum_k w_k log(rss_jk / n_k) + lambda1^2 |parents| ].
class ObservationalScorer : public Scorer {
public:
    ObservationalScorer(const MultiDataset& data, const ScoreConfig& cfg);
    double local_score(int j, const std::vector<int>& parents) const override;
    const MultiDataset& data() const override { return data_; }
    int max_parents(int j) const override;
    double lambda1_sq() const { return lambda1_sq_; }

protected:
    const MultiDataset& data_;
    ScoreConfig cfg_;
    double lambda1_sq_;
    mutable ScoreCache cache_;
};

/// Profiled score of the interventional objective: classes not intervening on
/// j share one coefficient vector and one noise variance; intervened classes
/// contribute their marginal variance as a parent-independent constant.
/// With an all-empty intervention spec this is exactly the observational score.
class InterventionalScorer : public ObservationalScorer {
public:
    InterventionalScorer(const MultiDataset& data, const ScoreConfig& cfg);
    double local_score(int j, const std::vector<int>& parents) const override;
    int max_parents(int j) const override;
};

double local_score(const MultiDataset& data, int j, const std::vector<int>& parents,
                   const ScoreConfig& cfg);
double graph_score(const MultiDataset& data, const Dag& g, const ScoreConfig& cfg);
double interventional_local_score(const MultiDataset& data, int j,
                                  const std::vector<int>& parents, const ScoreConfig& cfg);
double interventional_graph_score(const MultiDataset& data, const Dag& g,
                                  const ScoreConfig& cfg);
double graph_score(const Scorer& scorer, const Dag& g, int max_in_degree = -1);

/// Gaussian SEM log-likelihood -trace((X^T X / n) Theta) + log det Theta,
/// evaluated stably with log det Theta = -sum_j log omega_j.
double sem_log_likelihood(const Eigen::MatrixXd& data, const SemModel& m);

}  // namespace jointdag
