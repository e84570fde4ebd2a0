#pragma once

#include <cstddef>
#include <vector>

#include "jointdag/graph.hpp"
#include "jointdag/scoring.hpp"

namespace jointdag {

struct SearchConfig {
    /// Extra in-degree bound applied during the search; -1 defers entirely to
    /// the scoring configuration.
    int max_in_degree = -1;
    /// Repeat forward/backward rounds until neither phase accepts a move.
    bool iterate_phases = false;
    /// Minimum score gain for a move to be accepted.
    double epsilon_improve = 1e-9;
    /// Safety cap on accepted moves; hitting it sets a flag on the trace.
    long max_moves = 100000;

    void validate() const;
};

struct SearchMove {
    enum class Kind { insert, remove };
    Kind kind = Kind::insert;
    int x = -1;
    int y = -1;
    /// T for inserts, H for deletions.
    std::vector<int> subset;
    double score_before = 0.0;
    double score_after = 0.0;
};

struct SearchTrace {
    double initial_score = 0.0;
    double final_score = 0.0;
    std::vector<SearchMove> moves;
    bool move_limit_hit = false;
};

struct GesResult {
    Pdag cpdag;
    SearchTrace trace;
};

/// Greedy equivalence search: forward insertions then backward deletions over
/// CPDAG states, driven by the given decomposable scorer.
GesResult ges_fit_with_scorer(const Scorer& scorer, const SearchConfig& cfg = {});

/// GES on the joint observational score.
GesResult ges_fit(const MultiDataset& data, const ScoreConfig& scfg,
                  const SearchConfig& cfg = {});

/// Per-class GES, each class scored on its own rows (so a scaling-constant
/// penalty becomes c log(p) / n_k).
std::vector<GesResult> separate_fit(const MultiDataset& data, const ScoreConfig& scfg,
                                    const SearchConfig& cfg = {});

/// GES driven by the interventional score; identical to ges_fit when the
/// intervention spec is empty.
GesResult gies_fit(const MultiDataset& data, const ScoreConfig& scfg,
                   const SearchConfig& cfg = {});

/// Brute-force score maximizer over every DAG, usable as a test oracle.
/// Ties break toward fewer edges, then the lexicographically smallest edge
/// list. Throws TooLargeError above max_p nodes.
Dag exhaustive_best_dag(const MultiDataset& data, const ScoreConfig& scfg, int max_p = 5);
Dag exhaustive_best_dag_with_scorer(const Scorer& scorer, int p, int max_p = 5);

/// Class member maximizing the scorer's graph score (deterministic
/// enumeration-order tie-break); falls back to the deterministic consistent
/// extension when the class exceeds cap.
Dag best_scoring_extension(const Pdag& cpdag, const Scorer& scorer, std::size_t cap = 256);

}  // namespace jointdag
