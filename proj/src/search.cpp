#include "jointdag/search.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "jointdag/errors.hpp"

namespace jointdag {

void SearchConfig::validate() const {
    if (epsilon_improve < 0.0) throw ConfigError("SearchConfig: epsilon_improve must be >= 0");
    if (max_moves < 1) throw ConfigError("SearchConfig: max_moves must be >= 1");
}

namespace {

std::vector<int> set_to_vec(const std::set<int>& s) { return {s.begin(), s.end()}; }

std::vector<int> sorted_union(std::vector<int> a, const std::vector<int>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

std::vector<int> with_element(std::vector<int> a, int v) {
    a.push_back(v);
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

std::vector<int> without_element(std::vector<int> a, int v) {
    a.erase(std::remove(a.begin(), a.end(), v), a.end());
    return a;
}

bool is_clique(const Pdag& g, const std::vector<int>& nodes) {
    for (std::size_t a = 0; a < nodes.size(); ++a)
        for (std::size_t b = a + 1; b < nodes.size(); ++b)
            if (!g.adjacent(nodes[a], nodes[b])) return false;
    return true;
}

// True iff some semi-directed path from y to x avoids every node in blocked.
bool semi_directed_path_avoiding(const Pdag& g, int y, int x, const std::vector<int>& blocked) {
    const int p = g.node_count();
    std::vector<char> stop(p, 0);
    for (int b : blocked) stop[b] = 1;
    std::vector<char> seen(p, 0);
    std::vector<int> stack{y};
    seen[y] = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (const auto* nexts : {&g.dir_children(u), &g.neighbors(u)}) {
            for (int v : *nexts) {
                if (v == x) return true;
                if (!seen[v] && !stop[v]) {
                    seen[v] = 1;
                    stack.push_back(v);
                }
            }
        }
    }
    return false;
}

struct Candidate {
    SearchMove move;
    double delta = -std::numeric_limits<double>::infinity();
};

// Interventional scores are not invariant across a Markov equivalence class,
// so local move deltas stop matching the true score change once the state is
// re-completed to a CPDAG. In verified mode every candidate is ranked by its
// local delta as usual but accepted against the true score of the resulting
// state (best class member, cap-bounded).
constexpr std::size_t kVerifyEnumCap = 256;
constexpr int kVerifyAttempts = 32;

class GesEngine {
public:
    GesEngine(const Scorer& scorer, const SearchConfig& cfg, bool verify)
        : scorer_(scorer), cfg_(cfg), verify_(verify), p_(scorer.data().node_count()),
          state_(p_) {
        cfg_.validate();
        degree_bound_ = cfg_.max_in_degree >= 0 ? cfg_.max_in_degree : p_ - 1;
    }

    GesResult run() {
        double score = 0.0;
        for (int j = 0; j < p_; ++j) score += scorer_.local_score(j, {});
        SearchTrace trace;
        trace.initial_score = score;

        while (true) {
            bool progressed = run_phase(/*forward=*/true, score, trace);
            if (trace.move_limit_hit) break;
            progressed |= run_phase(/*forward=*/false, score, trace);
            if (trace.move_limit_hit) break;
            if (!cfg_.iterate_phases || !progressed) break;
        }
        trace.final_score = score;
        return {state_, std::move(trace)};
    }

private:
    bool accepts(double delta) const { return delta > 0.0 && delta >= cfg_.epsilon_improve; }

    bool run_phase(bool forward, double& score, SearchTrace& trace) {
        bool progressed = false;
        while (true) {
            if (static_cast<long>(trace.moves.size()) >= cfg_.max_moves) {
                trace.move_limit_hit = true;
                return progressed;
            }
            std::vector<Candidate> cands = forward ? collect_inserts() : collect_deletes();
            if (!verify_) {
                const Candidate* best = nullptr;
                for (const auto& c : cands)
                    if (!best || c.delta > best->delta) best = &c;
                if (!best || !accepts(best->delta)) return progressed;
                SearchMove mv = best->move;
                mv.score_before = score;
                mv.score_after = score + best->delta;
                state_ = applied(mv);
                score += best->delta;
                trace.moves.push_back(std::move(mv));
                progressed = true;
                continue;
            }

            // Verified mode: walk candidates in local-delta order and accept
            // the first whose true state score improves enough.
            std::stable_sort(cands.begin(), cands.end(),
                             [](const Candidate& a, const Candidate& b) {
                                 return a.delta > b.delta;
                             });
            bool moved = false;
            int attempts = 0;
            for (const auto& cand : cands) {
                if (++attempts > kVerifyAttempts) break;
                Pdag next = applied(cand.move);
                const double next_score = true_state_score(next);
                if (!accepts(next_score - score)) continue;
                SearchMove mv = cand.move;
                mv.score_before = score;
                mv.score_after = next_score;
                state_ = std::move(next);
                score = next_score;
                trace.moves.push_back(std::move(mv));
                progressed = true;
                moved = true;
                break;
            }
            if (!moved) return progressed;
        }
    }

    // Insert(x, y, T): x, y non-adjacent, T a subset of the undirected
    // neighbors of y that are not adjacent to x. Valid when NA_yx U T is a
    // clique and every semi-directed y~>x path passes through NA_yx U T.
    std::vector<Candidate> collect_inserts() const {
        std::vector<Candidate> out;
        for (int x = 0; x < p_; ++x) {
            for (int y = 0; y < p_; ++y) {
                if (x == y || state_.adjacent(x, y)) continue;
                // Worst case over extensions, every adjacency of y can point
                // into it; inserting must keep that within the degree bound.
                const int potential =
                    static_cast<int>(state_.dir_parents(y).size() + state_.neighbors(y).size()) +
                    1;
                if (potential > degree_bound_) continue;

                std::vector<int> na, t0;
                for (int z : state_.neighbors(y)) {
                    if (z == x) continue;
                    if (state_.adjacent(z, x))
                        na.push_back(z);
                    else
                        t0.push_back(z);
                }
                const std::vector<int> pa_y = set_to_vec(state_.dir_parents(y));
                const int limit = std::min(degree_bound_, scorer_.max_parents(y));

                const std::size_t n_subsets = std::size_t{1} << t0.size();
                for (std::size_t mask = 0; mask < n_subsets; ++mask) {
                    std::vector<int> t;
                    for (std::size_t b = 0; b < t0.size(); ++b)
                        if (mask & (std::size_t{1} << b)) t.push_back(t0[b]);

                    const std::vector<int> na_t = sorted_union(na, t);
                    const std::vector<int> base = sorted_union(na_t, pa_y);
                    if (static_cast<int>(base.size()) + 1 > limit) continue;
                    if (!is_clique(state_, na_t)) continue;
                    if (semi_directed_path_avoiding(state_, y, x, na_t)) continue;

                    const double delta = scorer_.local_score(y, with_element(base, x)) -
                                         scorer_.local_score(y, base);
                    out.push_back({{SearchMove::Kind::insert, x, y, t, 0.0, 0.0}, delta});
                }
            }
        }
        return out;
    }

    // Delete(x, y, H): x -> y or x - y, H a subset of the undirected
    // neighbors of y adjacent to x. Valid when NA_yx \ H is a clique.
    std::vector<Candidate> collect_deletes() const {
        std::vector<Candidate> out;
        for (int x = 0; x < p_; ++x) {
            for (int y = 0; y < p_; ++y) {
                if (x == y) continue;
                if (!state_.has_directed(x, y) && !state_.has_undirected(x, y)) continue;

                std::vector<int> na;
                for (int z : state_.neighbors(y))
                    if (z != x && state_.adjacent(z, x)) na.push_back(z);
                const std::vector<int> pa_y = set_to_vec(state_.dir_parents(y));

                const std::size_t n_subsets = std::size_t{1} << na.size();
                for (std::size_t mask = 0; mask < n_subsets; ++mask) {
                    std::vector<int> h, keep;
                    for (std::size_t b = 0; b < na.size(); ++b) {
                        if (mask & (std::size_t{1} << b))
                            h.push_back(na[b]);
                        else
                            keep.push_back(na[b]);
                    }
                    if (!is_clique(state_, keep)) continue;

                    const std::vector<int> before = with_element(sorted_union(keep, pa_y), x);
                    if (static_cast<int>(before.size()) > scorer_.max_parents(y)) continue;
                    const std::vector<int> after = without_element(before, x);

                    const double delta =
                        scorer_.local_score(y, after) - scorer_.local_score(y, before);
                    out.push_back({{SearchMove::Kind::remove, x, y, h, 0.0, 0.0}, delta});
                }
            }
        }
        return out;
    }

    Pdag applied(const SearchMove& m) const {
        Pdag next = state_;
        if (m.kind == SearchMove::Kind::insert) {
            next.add_directed(m.x, m.y);
            for (int t : m.subset)
                if (next.has_undirected(t, m.y)) next.orient(t, m.y);
        } else {
            next.remove_between(m.x, m.y);
            for (int h : m.subset) {
                if (next.has_undirected(m.y, h)) next.orient(m.y, h);
                if (next.has_undirected(m.x, h)) next.orient(m.x, h);
            }
        }
        return complete_to_cpdag(consistent_extension(next));
    }

    double true_state_score(const Pdag& state) const {
        const auto members = enumerate_class(state, kVerifyEnumCap);
        double best = -std::numeric_limits<double>::infinity();
        std::vector<const Dag*> pool;
        Dag fallback(0);
        if (members.truncated || members.dags.empty()) {
            fallback = consistent_extension(state);
            pool.push_back(&fallback);
        } else {
            for (const auto& d : members.dags) pool.push_back(&d);
        }
        for (const Dag* d : pool) {
            double score = 0.0;
            bool scorable = true;
            for (int j = 0; j < p_ && scorable; ++j) {
                const auto& pa = d->parents(j);
                if (static_cast<int>(pa.size()) > scorer_.max_parents(j)) {
                    scorable = false;
                    break;
                }
                score += scorer_.local_score(j, {pa.begin(), pa.end()});
            }
            if (scorable && score > best) best = score;
        }
        return best;
    }

    const Scorer& scorer_;
    SearchConfig cfg_;
    bool verify_;
    int p_;
    int degree_bound_;
    Pdag state_;
};

}  // namespace

GesResult ges_fit_with_scorer(const Scorer& scorer, const SearchConfig& cfg) {
    return GesEngine(scorer, cfg, /*verify=*/false).run();
}

GesResult ges_fit(const MultiDataset& data, const ScoreConfig& scfg, const SearchConfig& cfg) {
    const ObservationalScorer scorer(data, scfg);
    return ges_fit_with_scorer(scorer, cfg);
}

std::vector<GesResult> separate_fit(const MultiDataset& data, const ScoreConfig& scfg,
                                    const SearchConfig& cfg) {
    std::vector<GesResult> out;
    out.reserve(data.class_count());
    for (int k = 0; k < data.class_count(); ++k) {
        const MultiDataset solo = data.single_class(k);
        const ObservationalScorer scorer(solo, scfg);
        out.push_back(ges_fit_with_scorer(scorer, cfg));
    }
    return out;
}

GesResult gies_fit(const MultiDataset& data, const ScoreConfig& scfg, const SearchConfig& cfg) {
    const InterventionalScorer scorer(data, scfg);
    return GesEngine(scorer, cfg, /*verify=*/data.has_interventions()).run();
}

Dag exhaustive_best_dag_with_scorer(const Scorer& scorer, int p, int max_p) {
    if (p > max_p)
        throw TooLargeError("exhaustive_best_dag: " + std::to_string(p) +
                            " nodes exceed the cap of " + std::to_string(max_p));
    std::vector<Edge> pairs;
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j) pairs.emplace_back(i, j);
    const int m = static_cast<int>(pairs.size());

    bool have_best = false;
    double best_score = 0.0;
    Dag best(p);
    std::vector<Edge> best_edges;

    std::vector<int> assign(m, 0);
    while (true) {
        std::vector<std::vector<int>> parents(p);
        std::vector<std::vector<int>> children(p);
        for (int e = 0; e < m; ++e) {
            if (assign[e] == 1) {
                parents[pairs[e].second].push_back(pairs[e].first);
                children[pairs[e].first].push_back(pairs[e].second);
            } else if (assign[e] == 2) {
                parents[pairs[e].first].push_back(pairs[e].second);
                children[pairs[e].second].push_back(pairs[e].first);
            }
        }
        std::vector<int> indeg(p), stack;
        for (int v = 0; v < p; ++v) {
            indeg[v] = static_cast<int>(parents[v].size());
            if (indeg[v] == 0) stack.push_back(v);
        }
        int done = 0;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            ++done;
            for (int c : children[v])
                if (--indeg[c] == 0) stack.push_back(c);
        }
        if (done == p) {
            bool scorable = true;
            double score = 0.0;
            for (int j = 0; j < p && scorable; ++j) {
                if (static_cast<int>(parents[j].size()) > scorer.max_parents(j)) {
                    scorable = false;
                    break;
                }
                std::sort(parents[j].begin(), parents[j].end());
                score += scorer.local_score(j, parents[j]);
            }
            if (scorable) {
                Dag cand(p);
                for (int j = 0; j < p; ++j)
                    for (int i : parents[j]) cand.add_edge(i, j);
                const auto cand_edges = cand.edges();
                const bool wins =
                    !have_best || score > best_score ||
                    (score == best_score &&
                     (cand.edge_count() < best.edge_count() ||
                      (cand.edge_count() == best.edge_count() && cand_edges < best_edges)));
                if (wins) {
                    have_best = true;
                    best_score = score;
                    best = std::move(cand);
                    best_edges = cand_edges;
                }
            }
        }
        int e = 0;
        while (e < m && assign[e] == 2) assign[e++] = 0;
        if (e == m) break;
        ++assign[e];
    }
    if (!have_best) throw Error("exhaustive_best_dag: no scorable DAG");
    return best;
}

Dag exhaustive_best_dag(const MultiDataset& data, const ScoreConfig& scfg, int max_p) {
    const ObservationalScorer scorer(data, scfg);
    return exhaustive_best_dag_with_scorer(scorer, data.node_count(), max_p);
}

Dag best_scoring_extension(const Pdag& cpdag, const Scorer& scorer, std::size_t cap) {
    const auto members = enumerate_class(cpdag, cap);
    if (members.truncated || members.dags.empty()) return consistent_extension(cpdag);
    bool have = false;
    double best_score = 0.0;
    std::size_t best_at = 0;
    for (std::size_t at = 0; at < members.dags.size(); ++at) {
        double score = 0.0;
        bool scorable = true;
        for (int j = 0; j < cpdag.node_count() && scorable; ++j) {
            const auto& pa = members.dags[at].parents(j);
            if (static_cast<int>(pa.size()) > scorer.max_parents(j)) {
                scorable = false;
                break;
            }
            score += scorer.local_score(j, {pa.begin(), pa.end()});
        }
        if (scorable && (!have || score > best_score)) {
            have = true;
            best_score = score;
            best_at = at;
        }
    }
    return have ? members.dags[best_at] : consistent_extension(cpdag);
}

}  // namespace jointdag
