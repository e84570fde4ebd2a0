#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "jointdag/graph.hpp"
#include "jointdag/scoring.hpp"
#include "jointdag/search.hpp"

namespace jointdag {

struct LassoConfig {
    /// Penalty scale lambda2 (the objective uses lambda2^2); negative means
    /// select per regression by cross validation.
    double lambda2 = -1.0;
    int grid_size = 50;
    /// Smallest grid value as a fraction of the per-node KKT lambda_max.
    double grid_min_ratio = 1e-3;
    int cv_folds = 10;
    /// KKT stationarity tolerance at exit.
    double tol = 1e-6;
    long max_iters = 10000;
    /// Seed for fold assignment; per-regression streams are derived from it.
    std::uint64_t seed = 0;
    /// Scale predictors to unit variance internally and rescale coefficients
    /// back (off by default; the penalty then acts on the standardized scale).
    bool standardize = false;
    /// Relative residual floor, as in the scoring module.
    double rss_floor = 1e-12;

    void validate() const;
};

struct LassoResult {
    Eigen::VectorXd coef;
    bool converged = true;
    long iterations = 0;
};

/// Minimizes (1/n)||y - Xp a||^2 + lambda2^2 ||a||_1 by cyclic coordinate
/// descent with soft thresholding. Inputs are assumed centered.
LassoResult lasso_cd(const Eigen::VectorXd& y, const Eigen::MatrixXd& xp, double lambda2,
                     const LassoConfig& cfg = {});

/// Log-spaced lambda2 grid from the KKT threshold down, largest first.
std::vector<double> lambda2_grid(const Eigen::VectorXd& y, const Eigen::MatrixXd& xp,
                                 int size, double min_ratio);

/// Grid value minimizing mean held-out squared error over seeded folds; ties
/// break toward the larger (sparser) lambda2.
double cv_lambda2(const Eigen::VectorXd& y, const Eigen::MatrixXd& xp,
                  const std::vector<double>& grid, int folds, std::uint64_t seed,
                  const LassoConfig& cfg = {});

struct FitResult {
    Dag union_dag{0};
    std::vector<SemModel> per_class;
    SearchTrace trace;
    /// K x p; NaN where no penalized regression ran for that class and node.
    Eigen::MatrixXd chosen_lambda2;

    std::vector<Dag> class_dags() const;
    int total_class_edges() const;
};

/// Per-class sparse refits restricted to the union graph's parent sets. The
/// K*p regressions are independent; jobs > 1 runs them on a thread pool with
/// schedule-independent results.
FitResult refit_classes(const MultiDataset& data, const Dag& union_dag, const LassoConfig& cfg,
                        int jobs = 1);

/// Runs refit_classes for every member of the class and keeps the result with
/// the fewest total class edges (enumeration-order tie-break). In exact mode
/// a truncated enumeration is an error.
FitResult sparsest_extension_refit(const MultiDataset& data, const Pdag& cpdag,
                                   const LassoConfig& cfg, std::size_t cap, bool exact = true,
                                   int jobs = 1);

/// Refit for interventional data: one pooled regression per node over the
/// classes not intervening on it (shared coefficients and noise variance);
/// class-k outputs zero every column in that class's target set and carry the
/// marginal variance there.
FitResult refit_interventional(const MultiDataset& data, const Dag& union_dag,
                               const LassoConfig& cfg, int jobs = 1);

}  // namespace jointdag
