#include "jointdag/sem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jointdag/errors.hpp"

namespace jointdag {

SemModel::SemModel(Eigen::MatrixXd A, Eigen::VectorXd omega)
    : coeffs(std::move(A)), noise_var(std::move(omega)) {
    const int p = static_cast<int>(coeffs.rows());
    if (coeffs.cols() != p) throw Error("SemModel: coefficient matrix must be square");
    if (noise_var.size() != p) throw Error("SemModel: noise vector length mismatch");
    for (int j = 0; j < p; ++j)
        if (!(noise_var[j] > 0.0) || !std::isfinite(noise_var[j]))
            throw Error("SemModel: noise variances must be positive and finite");
    dag();  // throws CycleError when the support is cyclic
}

Dag SemModel::dag() const {
    const int p = node_count();
    Dag d(p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            if (i != j && coeffs(i, j) != 0.0) d.add_edge(i, j);
    return d;
}

InterventionSpec::InterventionSpec(std::vector<std::vector<int>> t, int p) : targets(std::move(t)) {
    for (auto& cls : targets) {
        std::sort(cls.begin(), cls.end());
        cls.erase(std::unique(cls.begin(), cls.end()), cls.end());
        for (int j : cls)
            if (j < 0 || j >= p)
                throw BadTargetError("InterventionSpec: target " + std::to_string(j) +
                                     " out of range");
    }
}

bool InterventionSpec::all_empty() const {
    for (const auto& cls : targets)
        if (!cls.empty()) return false;
    return true;
}

bool InterventionSpec::is_target(int k, int j) const {
    if (k < 0 || k >= class_count()) return false;
    const auto& cls = targets[k];
    return std::binary_search(cls.begin(), cls.end(), j);
}

void JointModelConfig::validate() const {
    if (p <= 0) throw ConfigError("JointModelConfig: p must be positive");
    if (K <= 0) throw ConfigError("JointModelConfig: K must be positive");
    if (core_edges < 0) throw ConfigError("JointModelConfig: core_edges must be non-negative");
    if (extra_edges < 0) throw ConfigError("JointModelConfig: extra_edges must be non-negative");
    for (const auto& iv : weight_range)
        if (!(iv.lo <= iv.hi)) throw ConfigError("JointModelConfig: weight_range interval reversed");
    if (!(variance_range.lo <= variance_range.hi) || variance_range.lo <= 0.0)
        throw ConfigError("JointModelConfig: variance_range must be positive and ordered");
}

CovariancePair precision_from_sem(const SemModel& m) {
    const int p = m.node_count();
    const Eigen::MatrixXd ima = Eigen::MatrixXd::Identity(p, p) - m.coeffs;
    Eigen::MatrixXd theta = ima * m.noise_var.cwiseInverse().asDiagonal() * ima.transpose();
    theta = 0.5 * (theta + theta.transpose()).eval();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(theta);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("precision_from_sem: failed to invert the precision matrix");
    Eigen::MatrixXd sigma = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    return {std::move(sigma), std::move(theta)};
}

SemModel cholesky_sem(const Eigen::MatrixXd& theta, const Permutation& pi) {
    const int p = static_cast<int>(theta.rows());
    if (theta.cols() != p) throw Error("cholesky_sem: precision matrix must be square");
    if (pi.size() != p) throw SizeMismatchError("cholesky_sem: permutation size mismatch");

    // Reorder so that permutation rank r maps to row/column r.
    Eigen::MatrixXd th(p, p);
    for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b) th(a, b) = theta(pi.node_at(a), pi.node_at(b));
    th = 0.5 * (th + th.transpose()).eval();

    // Factor th = U E U^T with U unit upper triangular and E diagonal,
    // working from the last row up. E is the inverse noise variance.
    Eigen::MatrixXd u = Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd e(p);
    for (int j = p - 1; j >= 0; --j) {
        double diag = th(j, j);
        for (int k = j + 1; k < p; ++k) diag -= u(j, k) * u(j, k) * e(k);
        if (!(diag > 0.0) || !std::isfinite(diag))
            throw NotPositiveDefiniteError("cholesky_sem: matrix is not positive definite");
        e(j) = diag;
        for (int i = 0; i < j; ++i) {
            double s = th(i, j);
            for (int k = j + 1; k < p; ++k) s -= u(i, k) * e(k) * u(j, k);
            u(i, j) = s / diag;
        }
    }

    // A' = I - U in the reordered basis; revert the ordering.
    Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd omega(p);
    for (int a = 0; a < p; ++a) {
        omega(pi.node_at(a)) = 1.0 / e(a);
        for (int b = a + 1; b < p; ++b) coeffs(pi.node_at(a), pi.node_at(b)) = -u(a, b);
    }
    return SemModel(std::move(coeffs), std::move(omega));
}

Eigen::MatrixXd sample(const SemModel& m, int n, Rng& rng) {
    if (n < 1) throw Error("sample: n must be at least 1");
    const int p = m.node_count();
    Eigen::MatrixXd x(n, p);
    {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int j = 0; j < p; ++j) {
            const double sd = std::sqrt(m.noise_var[j]);
            for (int r = 0; r < n; ++r) x(r, j) = sd * gauss(rng);
        }
    }
    const Dag d = m.dag();
    const Permutation pi = topological_order(d);
    for (int rank = 0; rank < p; ++rank) {
        const int j = pi.node_at(rank);
        for (int i : d.parents(j)) x.col(j) += m.coeffs(i, j) * x.col(i);
    }
    return x;
}

namespace {

double draw_weight(const std::array<Interval, 2>& range, Rng& rng) {
    const double l0 = std::max(range[0].length(), 0.0);
    const double l1 = std::max(range[1].length(), 0.0);
    std::uniform_real_distribution<double> unif(0.0, l0 + l1);
    const double u = unif(rng);
    return u < l0 ? range[0].lo + u : range[1].lo + (u - l0);
}

}  // namespace

JointModel random_joint_model(const JointModelConfig& cfg, Rng& rng) {
    cfg.validate();
    const int p = cfg.p;
    const double n_pairs = 0.5 * p * (p - 1);
    const double incl = n_pairs > 0 ? std::min(1.0, cfg.core_edges / n_pairs) : 0.0;

    std::vector<int> pos(p);
    for (int v = 0; v < p; ++v) pos[v] = v;
    std::shuffle(pos.begin(), pos.end(), rng);
    const Permutation order{std::vector<int>(pos)};

    // Shared core, oriented along the permutation.
    std::bernoulli_distribution coin(incl);
    std::vector<Edge> core;
    std::vector<Edge> free_pairs;
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j) {
            const Edge oriented = pos[i] < pos[j] ? Edge{i, j} : Edge{j, i};
            if (coin(rng))
                core.push_back(oriented);
            else
                free_pairs.push_back(oriented);
        }
    if (static_cast<std::size_t>(cfg.extra_edges) > free_pairs.size())
        throw ConfigError("random_joint_model: extra_edges exceeds the available non-edge slots");

    std::map<Edge, double> locked;
    if (cfg.lock_shared_weights)
        for (const Edge& e : core) locked[e] = draw_weight(cfg.weight_range, rng);

    std::uniform_real_distribution<double> var_draw(cfg.variance_range.lo, cfg.variance_range.hi);

    JointModel out{.dags = {}, .sems = {}, .order = order};
    for (int k = 0; k < cfg.K; ++k) {
        std::vector<Edge> edges = core;
        std::vector<Edge> extra;
        std::sample(free_pairs.begin(), free_pairs.end(), std::back_inserter(extra),
                    cfg.extra_edges, rng);
        edges.insert(edges.end(), extra.begin(), extra.end());

        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
        for (const auto& [i, j] : edges) {
            const auto it = locked.find({i, j});
            a(i, j) = it != locked.end() ? it->second : draw_weight(cfg.weight_range, rng);
        }
        Eigen::VectorXd omega(p);
        for (int j = 0; j < p; ++j) omega[j] = var_draw(rng);

        out.dags.emplace_back(p, edges);
        out.sems.emplace_back(std::move(a), std::move(omega));
    }
    return out;
}

SemModel apply_intervention(const SemModel& m, const std::vector<int>& targets,
                            const std::map<int, double>& new_variances) {
    const int p = m.node_count();
    std::vector<int> sorted = targets;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (int j : sorted)
        if (j < 0 || j >= p)
            throw BadTargetError("apply_intervention: target " + std::to_string(j) +
                                 " out of range");
    if (new_variances.size() != sorted.size())
        throw BadTargetError("apply_intervention: new_variances must be keyed exactly by targets");
    for (const auto& [j, v] : new_variances) {
        if (!std::binary_search(sorted.begin(), sorted.end(), j))
            throw BadTargetError("apply_intervention: variance given for non-target node " +
                                 std::to_string(j));
        if (!(v > 0.0) || !std::isfinite(v))
            throw BadTargetError("apply_intervention: replacement variances must be positive");
    }

    Eigen::MatrixXd a = m.coeffs;
    Eigen::VectorXd omega = m.noise_var;
    for (int j : sorted) {
        a.col(j).setZero();
        omega[j] = new_variances.at(j);
    }
    return SemModel(std::move(a), std::move(omega));
}

}  // namespace jointdag
