#pragma once

#include <array>
#include <cstddef>
#include <set>
#include <utility>
#include <vector>

namespace jointdag {

using Edge = std::pair<int, int>;

/// Node ordering; position(v) is the rank of node v in the causal order.
class Permutation {
public:
    explicit Permutation(std::vector<int> positions);
    static Permutation identity(int p);

    int size() const { return static_cast<int>(positions_.size()); }
    int position(int node) const { return positions_[node]; }
    int node_at(int rank) const { return order_[rank]; }
    const std::vector<int>& positions() const { return positions_; }
    /// Nodes listed from first to last in the order.
    const std::vector<int>& order() const { return order_; }

    bool operator==(const Permutation& o) const { return positions_ == o.positions_; }

private:
    std::vector<int> positions_;  // node -> rank
    std::vector<int> order_;      // rank -> node
};

/// Directed acyclic graph over nodes 0..p-1. Edge (i, j) means i -> j.
class Dag {
public:
    explicit Dag(int p);
    Dag(int p, const std::vector<Edge>& edges);

    int node_count() const { return p_; }
    int edge_count() const { return n_edges_; }
    bool has_edge(int i, int j) const;
    const std::set<int>& parents(int j) const { return parents_[j]; }
    const std::set<int>& children(int i) const { return children_[i]; }
    /// Edges in lexicographic order.
    std::vector<Edge> edges() const;

    /// Adds i -> j; throws CycleError if that would close a directed cycle.
    void add_edge(int i, int j);

    bool operator==(const Dag& o) const;
    bool operator!=(const Dag& o) const { return !(*this == o); }

private:
    void check_node(int v) const;
    bool reaches(int from, int to) const;

    int p_ = 0;
    int n_edges_ = 0;
    std::vector<std::set<int>> parents_;
    std::vector<std::set<int>> children_;
};

/// Partially directed graph: disjoint directed and undirected edge sets over
/// a shared skeleton. Used for CPDAGs and intermediate PDAGs.
class Pdag {
public:
    explicit Pdag(int p);
    Pdag(int p, const std::vector<Edge>& directed, const std::vector<Edge>& undirected);
    static Pdag from_dag(const Dag& d);

    int node_count() const { return p_; }
    int directed_count() const { return n_directed_; }
    int undirected_count() const { return n_undirected_; }
    int edge_count() const { return n_directed_ + n_undirected_; }

    bool has_directed(int i, int j) const;
    bool has_undirected(int i, int j) const;
    bool adjacent(int i, int j) const;

    const std::set<int>& dir_parents(int j) const { return parents_[j]; }
    const std::set<int>& dir_children(int i) const { return children_[i]; }
    const std::set<int>& neighbors(int i) const { return neighbors_[i]; }
    std::set<int> adjacents(int i) const;

    void add_directed(int i, int j);
    void add_undirected(int i, int j);
    void remove_between(int i, int j);
    /// Turns undirected i - j into directed i -> j.
    void orient(int i, int j);

    std::vector<Edge> directed_edges() const;
    /// Undirected edges as (i, j) with i < j, lexicographic.
    std::vector<Edge> undirected_edges() const;

    bool directed_part_acyclic() const;

    bool operator==(const Pdag& o) const;
    bool operator!=(const Pdag& o) const { return !(*this == o); }

private:
    void check_node(int v) const;

    int p_ = 0;
    int n_directed_ = 0;
    int n_undirected_ = 0;
    std::vector<std::set<int>> parents_;
    std::vector<std::set<int>> children_;
    std::vector<std::set<int>> neighbors_;
};

struct SkeletonVstructs {
    /// Unordered pairs (i, j) with i < j.
    std::set<Edge> skeleton;
    /// Triples (a, c, b) with a -> c <- b, a and b non-adjacent, a < b.
    std::set<std::array<int, 3>> vstructures;
};

/// Topological order of d; deterministic, smallest node index first among ties.
Permutation topological_order(const Dag& d);

bool consistent_with(const Dag& d, const Permutation& pi);

SkeletonVstructs skeleton_vstructures(const Dag& d);

/// Applies Meek rules 1-4 until no rule fires.
void meek_closure(Pdag& g);

/// Essential graph of d's Markov equivalence class: skeleton plus v-structure
/// orientations closed under the Meek rules.
Pdag complete_to_cpdag(const Dag& d);

/// One consistent extension of g, deterministic. Sink elimination; among the
/// eligible sinks the largest index is removed first, so lower-indexed nodes
/// come earlier in the causal order where the class leaves a choice.
Dag consistent_extension(const Pdag& g);

struct DagEnumeration {
    std::vector<Dag> dags;
    bool truncated = false;
};

/// All members of the Markov equivalence class represented by CPDAG g, in
/// deterministic order, truncated at cap.
DagEnumeration enumerate_class(const Pdag& g, std::size_t cap);

/// Structural Hamming distance: number of unordered node pairs whose edge
/// state (absent / i->j / j->i / undirected) differs.
int shd(const Pdag& a, const Pdag& b);
int shd(const Dag& a, const Dag& b);
int shd(const Dag& a, const Pdag& b);
int shd(const Pdag& a, const Dag& b);

/// Edge union of the given DAGs; throws CycleError if the union is cyclic.
Dag union_graph(const std::vector<Dag>& ds);

/// True iff g is the essential graph of its own consistent extension.
bool is_valid_cpdag(const Pdag& g);

}  // namespace jointdag
