#include "jointdag/refit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

#include "jointdag/errors.hpp"
#include "jointdag/random.hpp"

namespace jointdag {

void LassoConfig::validate() const {
    if (grid_size < 1) throw ConfigError("LassoConfig: grid_size must be positive");
    if (!(grid_min_ratio > 0.0) || grid_min_ratio > 1.0)
        throw ConfigError("LassoConfig: grid_min_ratio must lie in (0, 1]");
    if (cv_folds < 2) throw ConfigError("LassoConfig: cv_folds must be at least 2");
    if (!(tol > 0.0)) throw ConfigError("LassoConfig: tol must be positive");
    if (max_iters < 1) throw ConfigError("LassoConfig: max_iters must be positive");
    if (!(rss_floor > 0.0)) throw ConfigError("LassoConfig: rss_floor must be positive");
}

namespace {

constexpr double kAbsoluteFloor = 1e-300;

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

// KKT stationarity of (1/n)||y - X a||^2 + pen ||a||_1 at a, given the
// current residual r = y - X a.
bool kkt_ok(const Eigen::MatrixXd& x, const Eigen::VectorXd& r, const Eigen::VectorXd& a,
            double pen, double tol) {
    const double n = static_cast<double>(x.rows());
    for (int i = 0; i < x.cols(); ++i) {
        const double g = 2.0 * x.col(i).dot(r) / n;
        if (a[i] != 0.0) {
            if (std::abs(g - pen * (a[i] > 0 ? 1.0 : -1.0)) > tol) return false;
        } else {
            if (std::abs(g) > pen + tol) return false;
        }
    }
    return true;
}

LassoResult lasso_cd_raw(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double pen,
                         const LassoConfig& cfg, Eigen::VectorXd warm) {
    const int m = static_cast<int>(x.cols());
    const double n = static_cast<double>(y.size());
    LassoResult out;
    if (m == 0) {
        out.coef = Eigen::VectorXd();
        return out;
    }
    Eigen::VectorXd a = warm.size() == m ? std::move(warm) : Eigen::VectorXd::Zero(m);
    Eigen::VectorXd ztz(m);
    for (int i = 0; i < m; ++i) ztz[i] = 2.0 * x.col(i).squaredNorm() / n;
    Eigen::VectorXd r = y - x * a;

    long it = 0;
    for (; it < cfg.max_iters; ++it) {
        for (int i = 0; i < m; ++i) {
            if (ztz[i] == 0.0) continue;
            const double old = a[i];
            const double rho = 2.0 * x.col(i).dot(r) / n + ztz[i] * old;
            const double next = soft_threshold(rho, pen) / ztz[i];
            if (next != old) {
                a[i] = next;
                r += x.col(i) * (old - next);
            }
        }
        if (kkt_ok(x, r, a, pen, cfg.tol)) {
            out.coef = std::move(a);
            out.converged = true;
            out.iterations = it + 1;
            return out;
        }
    }
    out.coef = std::move(a);
    out.converged = false;
    out.iterations = it;
    return out;
}

}  // namespace

LassoResult lasso_cd(const Eigen::VectorXd& y, const Eigen::MatrixXd& xp, double lambda2,
                     const LassoConfig& cfg) {
    cfg.validate();
    if (y.size() != xp.rows()) throw SizeMismatchError("lasso_cd: row count mismatch");
    if (lambda2 < 0.0) throw ConfigError("lasso_cd: negative penalty");
    const double pen = lambda2 * lambda2;

    if (!cfg.standardize) return lasso_cd_raw(y, xp, pen, cfg, {});

    const double n = static_cast<double>(y.size());
    Eigen::VectorXd scale(xp.cols());
    Eigen::MatrixXd xs = xp;
    for (int i = 0; i < xp.cols(); ++i) {
        const double sd = std::sqrt(xp.col(i).squaredNorm() / n);
        scale[i] = sd > 0.0 ? sd : 1.0;
        xs.col(i) /= scale[i];
    }
    LassoResult out = lasso_cd_raw(y, xs, pen, cfg, {});
    for (int i = 0; i < xp.cols(); ++i) out.coef[i] /= scale[i];
    return out;
}

std::vector<double> lambda2_grid(const Eigen::VectorXd& y, const Eigen::MatrixXd& xp,
                                 int size, double min_ratio) {
    if (size < 1) throw ConfigError("lambda2_grid: size must be positive");
    const double n = static_cast<double>(y.size());
    double pen_max = 0.0;
    for (int i = 0; i < xp.cols(); ++i)
        pen_max = std::max(pen_max, 2.0 * std::abs(xp.col(i).dot(y)) / n);
    const double lmax = std::sqrt(pen_max);
    if (lmax <= 0.0) return {0.0};
    if (size == 1) return {lmax};
    std::vector<double> grid(size);
    const double lmin = lmax * min_ratio;
    const double step = std::log(lmax / lmin) / (size - 1);
    for (int i = 0; i < size; ++i) grid[i] = lmax * std::exp(-step * i);
    return grid;
}

double cv_lambda2(const Eigen::VectorXd& y, const Eigen::MatrixXd& xp,
                  const std::vector<double>& grid, int folds, std::uint64_t seed,
                  const LassoConfig& cfg) {
    if (grid.empty()) throw GridEmptyError("cv_lambda2: empty grid");
    const int n = static_cast<int>(y.size());
    if (folds < 2) throw ConfigError("cv_lambda2: folds must be at least 2");
    if (n < folds) throw ConfigError("cv_lambda2: more folds than samples");

    std::vector<int> fold_of(n);
    {
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(seed);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int i = 0; i < n; ++i) fold_of[perm[i]] = i % folds;
    }

    std::vector<double> lambdas = grid;
    std::sort(lambdas.begin(), lambdas.end(), std::greater<>());

    double best_err = std::numeric_limits<double>::infinity();
    double best_lambda = lambdas.front();
    std::vector<Eigen::VectorXd> warm(folds);

    for (const double lambda : lambdas) {
        double sse = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<int> train, test;
            for (int i = 0; i < n; ++i) (fold_of[i] == f ? test : train).push_back(i);
            Eigen::MatrixXd xt(static_cast<long>(train.size()), xp.cols());
            Eigen::VectorXd yt(static_cast<long>(train.size()));
            for (std::size_t r = 0; r < train.size(); ++r) {
                xt.row(static_cast<long>(r)) = xp.row(train[r]);
                yt[static_cast<long>(r)] = y[train[r]];
            }
            LassoResult fit = lasso_cd_raw(yt, xt, lambda * lambda, cfg, warm[f]);
            warm[f] = fit.coef;
            for (int i : test) {
                const double resid = y[i] - xp.row(i).dot(fit.coef);
                sse += resid * resid;
            }
        }
        if (sse < best_err) {
            best_err = sse;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

std::vector<Dag> FitResult::class_dags() const {
    std::vector<Dag> out;
    out.reserve(per_class.size());
    for (const auto& sem : per_class) out.push_back(sem.dag());
    return out;
}

int FitResult::total_class_edges() const {
    int total = 0;
    for (const auto& sem : per_class) total += sem.dag().edge_count();
    return total;
}

namespace {

void parallel_cells(int count, int jobs, const std::function<void(int)>& work) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || count <= 1) {
        for (int c = 0; c < count; ++c) work(c);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min(jobs, count);
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int c = next.fetch_add(1); c < count; c = next.fetch_add(1)) work(c);
        });
    for (auto& t : pool) t.join();
}

Eigen::MatrixXd parent_columns(const Eigen::MatrixXd& x, const std::vector<int>& parents) {
    Eigen::MatrixXd xs(x.rows(), static_cast<long>(parents.size()));
    for (std::size_t u = 0; u < parents.size(); ++u)
        xs.col(static_cast<long>(u)) = x.col(parents[u]);
    return xs;
}

struct CellFit {
    Eigen::VectorXd coef;
    double omega = 1.0;
    double lambda = std::numeric_limits<double>::quiet_NaN();
};

CellFit fit_cell(const Eigen::VectorXd& y, const Eigen::MatrixXd& xs, double gram_jj,
                 long n_rows, const LassoConfig& cfg, std::uint64_t stream) {
    CellFit cell;
    const double floor = std::max(cfg.rss_floor * gram_jj, kAbsoluteFloor);
    if (xs.cols() == 0) {
        cell.omega = std::max(gram_jj, floor) / static_cast<double>(n_rows);
        return cell;
    }
    double lambda = cfg.lambda2;
    if (lambda < 0.0) {
        const auto grid = lambda2_grid(y, xs, cfg.grid_size, cfg.grid_min_ratio);
        const int folds = static_cast<int>(std::min<long>(cfg.cv_folds, y.size()));
        lambda = cv_lambda2(y, xs, grid, std::max(folds, 2), derive_seed(cfg.seed, stream), cfg);
    }
    const LassoResult fit = lasso_cd(y, xs, lambda, cfg);
    cell.coef = fit.coef;
    cell.lambda = lambda;
    const double rss = (y - xs * fit.coef).squaredNorm();
    cell.omega = std::max(rss, floor) / static_cast<double>(n_rows);
    return cell;
}

}  // namespace

FitResult refit_classes(const MultiDataset& data, const Dag& union_dag, const LassoConfig& cfg,
                        int jobs) {
    cfg.validate();
    const int p = data.node_count();
    const int K = data.class_count();
    if (union_dag.node_count() != p)
        throw SizeMismatchError("refit_classes: union graph node count mismatch");

    std::vector<std::vector<int>> parents(p);
    for (int j = 0; j < p; ++j)
        parents[j].assign(union_dag.parents(j).begin(), union_dag.parents(j).end());

    std::vector<Eigen::MatrixXd> coeffs(K, Eigen::MatrixXd::Zero(p, p));
    std::vector<Eigen::VectorXd> omegas(K, Eigen::VectorXd::Ones(p));
    Eigen::MatrixXd chosen =
        Eigen::MatrixXd::Constant(K, p, std::numeric_limits<double>::quiet_NaN());

    parallel_cells(K * p, jobs, [&](int cell) {
        const int k = cell / p;
        const int j = cell % p;
        const Eigen::VectorXd y = data.data(k).col(j);
        const Eigen::MatrixXd xs = parent_columns(data.data(k), parents[j]);
        const CellFit fit = fit_cell(y, xs, data.gram(k)(j, j), data.rows(k), cfg,
                                     static_cast<std::uint64_t>(cell));
        for (std::size_t u = 0; u < parents[j].size(); ++u)
            coeffs[k](parents[j][u], j) = fit.coef[static_cast<long>(u)];
        omegas[k][j] = fit.omega;
        if (!parents[j].empty()) chosen(k, j) = fit.lambda;
    });

    FitResult out;
    out.union_dag = union_dag;
    out.chosen_lambda2 = std::move(chosen);
    for (int k = 0; k < K; ++k) out.per_class.emplace_back(coeffs[k], omegas[k]);
    return out;
}

FitResult sparsest_extension_refit(const MultiDataset& data, const Pdag& cpdag,
                                   const LassoConfig& cfg, std::size_t cap, bool exact,
                                   int jobs) {
    const auto members = enumerate_class(cpdag, cap);
    if (members.dags.empty())
        throw NoExtensionError("sparsest_extension_refit: the class is empty");
    if (members.truncated && exact)
        throw TooLargeError("sparsest_extension_refit: equivalence class exceeds the cap");

    bool have = false;
    FitResult best;
    int best_edges = 0;
    for (const auto& member : members.dags) {
        FitResult fit = refit_classes(data, member, cfg, jobs);
        const int edges = fit.total_class_edges();
        if (!have || edges < best_edges) {
            have = true;
            best = std::move(fit);
            best_edges = edges;
        }
    }
    return best;
}

FitResult refit_interventional(const MultiDataset& data, const Dag& union_dag,
                               const LassoConfig& cfg, int jobs) {
    cfg.validate();
    const int p = data.node_count();
    const int K = data.class_count();
    if (union_dag.node_count() != p)
        throw SizeMismatchError("refit_interventional: union graph node count mismatch");

    std::vector<std::vector<int>> parents(p);
    for (int j = 0; j < p; ++j)
        parents[j].assign(union_dag.parents(j).begin(), union_dag.parents(j).end());

    std::vector<Eigen::VectorXd> pooled_coef(p);
    Eigen::VectorXd pooled_omega = Eigen::VectorXd::Ones(p);
    Eigen::VectorXd pooled_lambda =
        Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());

    parallel_cells(p, jobs, [&](int j) {
        const auto& obs = data.observational_classes(j);
        pooled_coef[j] = Eigen::VectorXd::Zero(static_cast<long>(parents[j].size()));
        if (obs.empty()) return;
        long rows = 0;
        double gram_jj = 0.0;
        for (int k : obs) {
            rows += data.rows(k);
            gram_jj += data.gram(k)(j, j);
        }
        Eigen::VectorXd y(rows);
        Eigen::MatrixXd xs(rows, static_cast<long>(parents[j].size()));
        long at = 0;
        for (int k : obs) {
            y.segment(at, data.rows(k)) = data.data(k).col(j);
            xs.middleRows(at, data.rows(k)) = parent_columns(data.data(k), parents[j]);
            at += data.rows(k);
        }
        const CellFit fit = fit_cell(y, xs, gram_jj, rows, cfg,
                                     static_cast<std::uint64_t>(K) * p + j);
        pooled_coef[j] = fit.coef;
        pooled_omega[j] = fit.omega;
        pooled_lambda[j] = fit.lambda;
    });

    FitResult out;
    out.union_dag = union_dag;
    out.chosen_lambda2 =
        Eigen::MatrixXd::Constant(K, p, std::numeric_limits<double>::quiet_NaN());
    for (int k = 0; k < K; ++k) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
        Eigen::VectorXd omega(p);
        for (int j = 0; j < p; ++j) {
            if (data.interventions().is_target(k, j)) {
                const double gjj = data.gram(k)(j, j);
                omega[j] = std::max(gjj, std::max(cfg.rss_floor * gjj, kAbsoluteFloor)) /
                           static_cast<double>(data.rows(k));
                continue;  // column stays zero
            }
            for (std::size_t u = 0; u < parents[j].size(); ++u)
                a(parents[j][u], j) = pooled_coef[j][static_cast<long>(u)];
            omega[j] = pooled_omega[j];
            out.chosen_lambda2(k, j) = pooled_lambda[j];
        }
        out.per_class.emplace_back(std::move(a), std::move(omega));
    }
    return out;
}

}  // namespace jointdag
