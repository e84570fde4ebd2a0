#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "jointdag/graph.hpp"
#include "jointdag/random.hpp"

namespace jointdag {

/// Linear Gaussian SEM X = A^T X + eps. coeffs(i, j) != 0 iff i -> j;
/// noise_var is the diagonal of the noise covariance.
struct SemModel {
    Eigen::MatrixXd coeffs;
    Eigen::VectorXd noise_var;

    SemModel(Eigen::MatrixXd A, Eigen::VectorXd omega);

    int node_count() const { return static_cast<int>(coeffs.rows()); }
    /// Support of the coefficient matrix.
    Dag dag() const;
};

struct CovariancePair {
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd theta;
};

/// Perfect-intervention target sets, one per class (possibly empty).
struct InterventionSpec {
    std::vector<std::vector<int>> targets;

    InterventionSpec() = default;
    InterventionSpec(std::vector<std::vector<int>> t, int p);

    int class_count() const { return static_cast<int>(targets.size()); }
    bool all_empty() const;
    bool is_target(int k, int j) const;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
};

/// Parameters of the synthetic joint-model generator: a shared Erdos-Renyi
/// core oriented by a random permutation plus per-class extra edges.
struct JointModelConfig {
    int p = 0;
    int K = 1;
    double core_edges = 0.0;
    int extra_edges = 0;
    std::array<Interval, 2> weight_range{{{-1.0, -0.1}, {0.1, 1.0}}};
    Interval variance_range{1.0, 2.25};
    std::uint64_t seed = 0;
    /// When set, shared core edges keep one weight across classes instead of
    /// being redrawn per class.
    bool lock_shared_weights = false;

    void validate() const;
};

struct JointModel {
    std::vector<Dag> dags;
    std::vector<SemModel> sems;
    Permutation order;
};

/// theta = (I - A) Omega^-1 (I - A)^T and its inverse.
CovariancePair precision_from_sem(const SemModel& m);

/// SEM parameters (A_pi, Omega_pi) from a precision matrix: reorder by pi,
/// factor into strictly-upper-triangular-plus-diagonal form, revert.
SemModel cholesky_sem(const Eigen::MatrixXd& theta, const Permutation& pi);

/// n i.i.d. rows from the model, noise propagated in topological order.
Eigen::MatrixXd sample(const SemModel& m, int n, Rng& rng);

JointModel random_joint_model(const JointModelConfig& cfg, Rng& rng);

/// Perfect intervention: columns into the targets are zeroed and target noise
/// variances replaced; everything else is untouched.
SemModel apply_intervention(const SemModel& m, const std::vector<int>& targets,
                            const std::map<int, double>& new_variances);

}  // namespace jointdag
