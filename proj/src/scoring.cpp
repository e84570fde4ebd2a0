#include "jointdag/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "jointdag/errors.hpp"
#include "jointdag/random.hpp"

namespace jointdag {

MultiDataset::MultiDataset(std::vector<Eigen::MatrixXd> classes, InterventionSpec interventions,
                           bool center)
    : classes_(std::move(classes)), interventions_(std::move(interventions)) {
    K_ = static_cast<int>(classes_.size());
    if (K_ == 0) throw Error("MultiDataset: no classes");
    p_ = static_cast<int>(classes_[0].cols());
    for (const auto& x : classes_) {
        if (x.cols() != p_)
            throw SizeMismatchError("MultiDataset: classes disagree on the node count");
        if (x.rows() < 1) throw Error("MultiDataset: empty class");
        n_ += x.rows();
    }
    if (interventions_.targets.empty()) interventions_.targets.resize(K_);
    if (interventions_.class_count() != K_)
        throw SizeMismatchError("MultiDataset: intervention spec class count mismatch");
    for (const auto& cls : interventions_.targets)
        for (int j : cls)
            if (j < 0 || j >= p_)
                throw BadTargetError("MultiDataset: intervention target out of range");

    if (center)
        for (auto& x : classes_) x.rowwise() -= x.colwise().mean();
    gram_.reserve(K_);
    for (const auto& x : classes_) gram_.push_back(x.transpose() * x);

    obs_classes_.assign(p_, {});
    n_minus_.assign(p_, 0);
    for (int j = 0; j < p_; ++j)
        for (int k = 0; k < K_; ++k)
            if (!interventions_.is_target(k, j)) {
                obs_classes_[j].push_back(k);
                n_minus_[j] += rows(k);
            }
}

MultiDataset MultiDataset::single_class(int k) const {
    if (k < 0 || k >= K_) throw Error("MultiDataset: class index out of range");
    // Columns are already centered (or deliberately raw); keep them as-is.
    return MultiDataset({classes_[k]}, InterventionSpec{{interventions_.targets[k]}, p_}, false);
}

MultiDataset MultiDataset::subsample(const std::vector<std::vector<int>>& rows_per_class) const {
    if (static_cast<int>(rows_per_class.size()) != K_)
        throw SizeMismatchError("MultiDataset: subsample spec class count mismatch");
    std::vector<Eigen::MatrixXd> out;
    out.reserve(K_);
    for (int k = 0; k < K_; ++k) {
        const auto& sel = rows_per_class[k];
        if (sel.empty()) throw Error("MultiDataset: empty subsample");
        Eigen::MatrixXd x(static_cast<long>(sel.size()), p_);
        for (std::size_t r = 0; r < sel.size(); ++r) {
            if (sel[r] < 0 || sel[r] >= rows(k))
                throw Error("MultiDataset: subsample row out of range");
            x.row(static_cast<long>(r)) = classes_[k].row(sel[r]);
        }
        out.push_back(std::move(x));
    }
    return MultiDataset(std::move(out), interventions_, true);
}

double ScoreConfig::effective_lambda1_sq(int p, long n) const {
    if (lambda1_sq >= 0.0) return lambda1_sq;
    if (scaling_c < 0.0) throw ConfigError("ScoreConfig: no usable penalty setting");
    return scaling_c * std::log(std::max(p, 2)) / static_cast<double>(n);
}

int ScoreConfig::effective_max_in_degree(int p) const {
    return max_in_degree < 0 ? p - 1 : std::min(max_in_degree, p - 1);
}

void ScoreConfig::validate() const {
    if (lambda1_sq < 0.0 && scaling_c < 0.0)
        throw ConfigError("ScoreConfig: either lambda1_sq or scaling_c must be set");
    if (!(rss_floor > 0.0)) throw ConfigError("ScoreConfig: rss_floor must be positive");
}

double theory_lambda1_sq(int p, long n, long union_edges_guess) {
    if (union_edges_guess < 1) throw ConfigError("theory_lambda1_sq: edge guess must be positive");
    const double ratio = std::max(static_cast<double>(p) / union_edges_guess, 1.0);
    return std::log(std::max(p, 2)) / static_cast<double>(n) * ratio;
}

std::size_t ScoreCache::KeyHash::operator()(const Key& key) const {
    std::uint64_t h = splitmix64(static_cast<std::uint64_t>(key.k + 7) * 0x100000001b3ULL +
                                 static_cast<std::uint64_t>(key.j));
    for (int v : key.parents) h = splitmix64(h ^ static_cast<std::uint64_t>(v + 1));
    return static_cast<std::size_t>(h);
}

std::optional<double> ScoreCache::get(int k, int j, const std::vector<int>& parents) const {
    std::lock_guard<std::mutex> lock(mu_);
    const auto it = map_.find(Key{k, j, parents});
    if (it == map_.end()) return std::nullopt;
    if (cap_ > 0) recency_.splice(recency_.begin(), recency_, it->second.second);
    return it->second.first;
}

void ScoreCache::put(int k, int j, const std::vector<int>& parents, double rss) {
    std::lock_guard<std::mutex> lock(mu_);
    Key key{k, j, parents};
    if (map_.count(key)) return;
    if (cap_ > 0 && map_.size() >= cap_) {
        map_.erase(recency_.back());
        recency_.pop_back();
    }
    recency_.push_front(key);
    map_.emplace(std::move(key), std::make_pair(rss, recency_.begin()));
}

std::size_t ScoreCache::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return map_.size();
}

namespace {

constexpr double kAbsoluteFloor = 1e-300;

std::vector<int> canonical_parents(int j, const std::vector<int>& parents, int p) {
    std::vector<int> s = parents;
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    for (int v : s) {
        if (v < 0 || v >= p) throw Error("scoring: parent index out of range");
        if (v == j) throw Error("scoring: node cannot be its own parent");
    }
    return s;
}

// rss of the normal equations gss a = gsj; rank-deficient systems fall back
// to the minimum-norm solution.
double rss_from_gram(const Eigen::MatrixXd& gss, const Eigen::VectorXd& gsj, double gjj) {
    if (gsj.size() == 0) return std::max(gjj, 0.0);
    Eigen::VectorXd a;
    bool ok = false;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gss);
    if (ldlt.info() == Eigen::Success) {
        a = ldlt.solve(gsj);
        const double scale = gss.cwiseAbs().maxCoeff() * std::max(a.cwiseAbs().maxCoeff(), 1.0) +
                             gsj.cwiseAbs().maxCoeff() + 1.0;
        ok = (gss * a - gsj).cwiseAbs().maxCoeff() <= 1e-9 * scale;
    }
    if (!ok) {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gss);
        a = cod.solve(gsj);
    }
    const double rss = gjj - 2.0 * a.dot(gsj) + a.dot(gss * a);
    return std::max(rss, 0.0);
}

void gram_blocks(const Eigen::MatrixXd& gram, int j, const std::vector<int>& s,
                 Eigen::MatrixXd& gss, Eigen::VectorXd& gsj) {
    const int m = static_cast<int>(s.size());
    gss.resize(m, m);
    gsj.resize(m);
    for (int a = 0; a < m; ++a) {
        gsj(a) = gram(s[a], j);
        for (int b = 0; b < m; ++b) gss(a, b) = gram(s[a], s[b]);
    }
}

}  // namespace

double ols_rss(const MultiDataset& data, int k, int j, const std::vector<int>& parents,
               const ScoreConfig& cfg, ScoreCache* cache) {
    if (k < 0 || k >= data.class_count()) throw Error("ols_rss: class index out of range");
    if (j < 0 || j >= data.node_count()) throw Error("ols_rss: node index out of range");
    const auto s = canonical_parents(j, parents, data.node_count());
    if (static_cast<int>(s.size()) >= data.rows(k))
        throw TooManyParentsError("ols_rss: parent set as large as the sample");

    if (cache)
        if (const auto hit = cache->get(k, j, s)) return *hit;

    const Eigen::MatrixXd& gram = data.gram(k);
    Eigen::MatrixXd gss;
    Eigen::VectorXd gsj;
    gram_blocks(gram, j, s, gss, gsj);
    const double gjj = gram(j, j);
    const double floor = std::max(cfg.rss_floor * gjj, kAbsoluteFloor);
    const double rss = std::max(rss_from_gram(gss, gsj, gjj), floor);

    if (cache) cache->put(k, j, s, rss);
    return rss;
}

ObservationalScorer::ObservationalScorer(const MultiDataset& data, const ScoreConfig& cfg)
    : data_(data), cfg_(cfg), cache_(cfg.cache_cap) {
    cfg_.validate();
    lambda1_sq_ = cfg_.effective_lambda1_sq(data.node_count(), data.total_rows());
}

double ObservationalScorer::local_score(int j, const std::vector<int>& parents) const {
    ScoreCache* cache = cfg_.use_cache ? &cache_ : nullptr;
    double score = 0.0;
    for (int k = 0; k < data_.class_count(); ++k) {
        const double rss = ols_rss(data_, k, j, parents, cfg_, cache);
        score -= data_.weight(k) * std::log(rss / data_.rows(k));
    }
    score -= lambda1_sq_ * static_cast<double>(canonical_parents(j, parents, data_.node_count()).size());
    return score;
}

int ObservationalScorer::max_parents(int j) const {
    (void)j;
    int limit = cfg_.effective_max_in_degree(data_.node_count());
    for (int k = 0; k < data_.class_count(); ++k)
        limit = std::min(limit, data_.rows(k) - 1);
    return limit;
}

InterventionalScorer::InterventionalScorer(const MultiDataset& data, const ScoreConfig& cfg)
    : ObservationalScorer(data, cfg) {}

double InterventionalScorer::local_score(int j, const std::vector<int>& parents) const {
    if (!data_.has_interventions()) return ObservationalScorer::local_score(j, parents);

    const auto s = canonical_parents(j, parents, data_.node_count());
    ScoreCache* cache = cfg_.use_cache ? &cache_ : nullptr;
    const auto& obs = data_.observational_classes(j);
    const double n = static_cast<double>(data_.total_rows());

    // Classes intervening on j contribute their marginal variance: constant in
    // the parent set, kept so scores stay comparable across graphs.
    double score = 0.0;
    for (int k = 0; k < data_.class_count(); ++k) {
        if (!data_.interventions().is_target(k, j)) continue;
        const double gjj = data_.gram(k)(j, j);
        const double clamped = std::max(gjj, std::max(cfg_.rss_floor * gjj, kAbsoluteFloor));
        score -= data_.weight(k) * std::log(clamped / data_.rows(k));
    }
    if (obs.empty()) return score;  // every class intervened on j: constant only

    const long n_minus = data_.rows_not_intervened(j);
    if (static_cast<long>(s.size()) >= n_minus)
        throw TooManyParentsError(
            "interventional score: parent set as large as the pooled sample");

    double pooled = 0.0;
    std::optional<double> hit = cache ? cache->get(-1, j, s) : std::nullopt;
    if (hit) {
        pooled = *hit;
    } else {
        const int m = static_cast<int>(s.size());
        Eigen::MatrixXd gss = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd gsj = Eigen::VectorXd::Zero(m);
        double gjj = 0.0;
        for (int k : obs) {
            Eigen::MatrixXd gk;
            Eigen::VectorXd vk;
            gram_blocks(data_.gram(k), j, s, gk, vk);
            gss += gk;
            gsj += vk;
            gjj += data_.gram(k)(j, j);
        }
        const double floor = std::max(cfg_.rss_floor * gjj, kAbsoluteFloor);
        pooled = std::max(rss_from_gram(gss, gsj, gjj), floor);
        if (cache) cache->put(-1, j, s, pooled);
    }

    score -= (static_cast<double>(n_minus) / n) * std::log(pooled / static_cast<double>(n_minus));
    score -= lambda1_sq_ * static_cast<double>(s.size());
    return score;
}

int InterventionalScorer::max_parents(int j) const {
    if (!data_.has_interventions()) return ObservationalScorer::max_parents(j);
    const long limit = cfg_.effective_max_in_degree(data_.node_count());
    const long pooled = data_.rows_not_intervened(j);
    if (pooled == 0) return 0;
    return static_cast<int>(std::min(limit, pooled - 1));
}

namespace {

double scorer_graph_score(const Scorer& scorer, const Dag& g, int d) {
    double total = 0.0;
    for (int j = 0; j < g.node_count(); ++j) {
        const auto& pa = g.parents(j);
        if (d >= 0 && static_cast<int>(pa.size()) > d)
            throw DegreeExceededError("graph_score: node " + std::to_string(j) +
                                      " exceeds the in-degree bound");
        total += scorer.local_score(j, std::vector<int>(pa.begin(), pa.end()));
    }
    return total;
}

}  // namespace

double graph_score(const Scorer& scorer, const Dag& g, int max_in_degree) {
    return scorer_graph_score(scorer, g, max_in_degree);
}

double local_score(const MultiDataset& data, int j, const std::vector<int>& parents,
                   const ScoreConfig& cfg) {
    return ObservationalScorer(data, cfg).local_score(j, parents);
}

double graph_score(const MultiDataset& data, const Dag& g, const ScoreConfig& cfg) {
    const ObservationalScorer scorer(data, cfg);
    return scorer_graph_score(scorer, g, cfg.effective_max_in_degree(data.node_count()));
}

double interventional_local_score(const MultiDataset& data, int j,
                                  const std::vector<int>& parents, const ScoreConfig& cfg) {
    return InterventionalScorer(data, cfg).local_score(j, parents);
}

double interventional_graph_score(const MultiDataset& data, const Dag& g,
                                  const ScoreConfig& cfg) {
    const InterventionalScorer scorer(data, cfg);
    return scorer_graph_score(scorer, g, cfg.effective_max_in_degree(data.node_count()));
}

double sem_log_likelihood(const Eigen::MatrixXd& data, const SemModel& m) {
    const int p = m.node_count();
    if (data.cols() != p) throw SizeMismatchError("sem_log_likelihood: column count mismatch");
    const double n = static_cast<double>(data.rows());
    const Eigen::MatrixXd ima = Eigen::MatrixXd::Identity(p, p) - m.coeffs;
    const Eigen::MatrixXd theta = ima * m.noise_var.cwiseInverse().asDiagonal() * ima.transpose();
    const Eigen::MatrixXd s = data.transpose() * data / n;
    const double trace = s.cwiseProduct(theta).sum();
    double logdet = 0.0;
    for (int j = 0; j < p; ++j) logdet -= std::log(m.noise_var[j]);
    return -trace + logdet;
}

}  // namespace jointdag
