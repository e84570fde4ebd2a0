#include "jointdag/graph.hpp"

#include <algorithm>
#include <queue>
#include <string>

#include "jointdag/errors.hpp"

namespace jointdag {

// ---------------------------------------------------------------------------
// Permutation

Permutation::Permutation(std::vector<int> positions) : positions_(std::move(positions)) {
    const int p = static_cast<int>(positions_.size());
    order_.assign(p, -1);
    for (int v = 0; v < p; ++v) {
        const int r = positions_[v];
        if (r < 0 || r >= p || order_[r] != -1)
            throw Error("Permutation: positions are not a bijection");
        order_[r] = v;
    }
}

Permutation Permutation::identity(int p) {
    std::vector<int> pos(p);
    for (int v = 0; v < p; ++v) pos[v] = v;
    return Permutation(std::move(pos));
}

// ---------------------------------------------------------------------------
// Dag

Dag::Dag(int p) : p_(p), parents_(p), children_(p) {
    if (p < 0) throw Error("Dag: negative node count");
}

Dag::Dag(int p, const std::vector<Edge>& edges) : Dag(p) {
    for (const auto& [i, j] : edges) add_edge(i, j);
}

void Dag::check_node(int v) const {
    if (v < 0 || v >= p_) throw Error("Dag: node index " + std::to_string(v) + " out of range");
}

bool Dag::has_edge(int i, int j) const {
    check_node(i);
    check_node(j);
    return children_[i].count(j) > 0;
}

bool Dag::reaches(int from, int to) const {
    if (from == to) return true;
    std::vector<char> seen(p_, 0);
    std::vector<int> stack{from};
    seen[from] = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int c : children_[v]) {
            if (c == to) return true;
            if (!seen[c]) {
                seen[c] = 1;
                stack.push_back(c);
            }
        }
    }
    return false;
}

void Dag::add_edge(int i, int j) {
    check_node(i);
    check_node(j);
    if (i == j) throw Error("Dag: self-loop at node " + std::to_string(i));
    if (children_[i].count(j)) return;
    if (children_[j].count(i) || reaches(j, i))
        throw CycleError("Dag: edge " + std::to_string(i) + "->" + std::to_string(j) +
                         " closes a directed cycle");
    children_[i].insert(j);
    parents_[j].insert(i);
    ++n_edges_;
}

std::vector<Edge> Dag::edges() const {
    std::vector<Edge> out;
    out.reserve(n_edges_);
    for (int i = 0; i < p_; ++i)
        for (int j : children_[i]) out.emplace_back(i, j);
    return out;
}

bool Dag::operator==(const Dag& o) const {
    return p_ == o.p_ && children_ == o.children_;
}

// ---------------------------------------------------------------------------
// Pdag

Pdag::Pdag(int p) : p_(p), parents_(p), children_(p), neighbors_(p) {
    if (p < 0) throw Error("Pdag: negative node count");
}

Pdag::Pdag(int p, const std::vector<Edge>& directed, const std::vector<Edge>& undirected)
    : Pdag(p) {
    for (const auto& [i, j] : directed) add_directed(i, j);
    for (const auto& [i, j] : undirected) add_undirected(i, j);
}

Pdag Pdag::from_dag(const Dag& d) {
    Pdag g(d.node_count());
    for (const auto& [i, j] : d.edges()) g.add_directed(i, j);
    return g;
}

void Pdag::check_node(int v) const {
    if (v < 0 || v >= p_) throw Error("Pdag: node index " + std::to_string(v) + " out of range");
}

bool Pdag::has_directed(int i, int j) const {
    check_node(i);
    check_node(j);
    return children_[i].count(j) > 0;
}

bool Pdag::has_undirected(int i, int j) const {
    check_node(i);
    check_node(j);
    return neighbors_[i].count(j) > 0;
}

bool Pdag::adjacent(int i, int j) const {
    return has_directed(i, j) || has_directed(j, i) || has_undirected(i, j);
}

std::set<int> Pdag::adjacents(int i) const {
    check_node(i);
    std::set<int> out = neighbors_[i];
    out.insert(parents_[i].begin(), parents_[i].end());
    out.insert(children_[i].begin(), children_[i].end());
    return out;
}

void Pdag::add_directed(int i, int j) {
    check_node(i);
    check_node(j);
    if (i == j) throw Error("Pdag: self-loop at node " + std::to_string(i));
    if (adjacent(i, j)) throw Error("Pdag: nodes already adjacent");
    children_[i].insert(j);
    parents_[j].insert(i);
    ++n_directed_;
}

void Pdag::add_undirected(int i, int j) {
    check_node(i);
    check_node(j);
    if (i == j) throw Error("Pdag: self-loop at node " + std::to_string(i));
    if (adjacent(i, j)) throw Error("Pdag: nodes already adjacent");
    neighbors_[i].insert(j);
    neighbors_[j].insert(i);
    ++n_undirected_;
}

void Pdag::remove_between(int i, int j) {
    check_node(i);
    check_node(j);
    if (neighbors_[i].erase(j)) {
        neighbors_[j].erase(i);
        --n_undirected_;
        return;
    }
    if (children_[i].erase(j)) {
        parents_[j].erase(i);
        --n_directed_;
        return;
    }
    if (children_[j].erase(i)) {
        parents_[i].erase(j);
        --n_directed_;
        return;
    }
}

void Pdag::orient(int i, int j) {
    check_node(i);
    check_node(j);
    if (!has_undirected(i, j)) throw Error("Pdag: orient on a non-undirected pair");
    neighbors_[i].erase(j);
    neighbors_[j].erase(i);
    --n_undirected_;
    children_[i].insert(j);
    parents_[j].insert(i);
    ++n_directed_;
}

std::vector<Edge> Pdag::directed_edges() const {
    std::vector<Edge> out;
    out.reserve(n_directed_);
    for (int i = 0; i < p_; ++i)
        for (int j : children_[i]) out.emplace_back(i, j);
    return out;
}

std::vector<Edge> Pdag::undirected_edges() const {
    std::vector<Edge> out;
    out.reserve(n_undirected_);
    for (int i = 0; i < p_; ++i)
        for (int j : neighbors_[i])
            if (i < j) out.emplace_back(i, j);
    return out;
}

bool Pdag::directed_part_acyclic() const {
    std::vector<int> indeg(p_, 0);
    for (int j = 0; j < p_; ++j) indeg[j] = static_cast<int>(parents_[j].size());
    std::vector<int> stack;
    for (int v = 0; v < p_; ++v)
        if (indeg[v] == 0) stack.push_back(v);
    int done = 0;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        ++done;
        for (int c : children_[v])
            if (--indeg[c] == 0) stack.push_back(c);
    }
    return done == p_;
}

bool Pdag::operator==(const Pdag& o) const {
    return p_ == o.p_ && children_ == o.children_ && neighbors_ == o.neighbors_;
}

// ---------------------------------------------------------------------------
// Free operations

Permutation topological_order(const Dag& d) {
    const int p = d.node_count();
    std::vector<int> indeg(p);
    for (int j = 0; j < p; ++j) indeg[j] = static_cast<int>(d.parents(j).size());
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (int v = 0; v < p; ++v)
        if (indeg[v] == 0) ready.push(v);
    std::vector<int> positions(p, -1);
    int rank = 0;
    while (!ready.empty()) {
        const int v = ready.top();
        ready.pop();
        positions[v] = rank++;
        for (int c : d.children(v))
            if (--indeg[c] == 0) ready.push(c);
    }
    if (rank != p) throw CycleError("topological_order: graph has a directed cycle");
    return Permutation(std::move(positions));
}

bool consistent_with(const Dag& d, const Permutation& pi) {
    if (pi.size() != d.node_count()) return false;
    for (const auto& [i, j] : d.edges())
        if (pi.position(i) >= pi.position(j)) return false;
    return true;
}

SkeletonVstructs skeleton_vstructures(const Dag& d) {
    SkeletonVstructs out;
    const int p = d.node_count();
    for (const auto& [i, j] : d.edges()) out.skeleton.insert({std::min(i, j), std::max(i, j)});
    for (int c = 0; c < p; ++c) {
        const auto& pa = d.parents(c);
        for (auto it = pa.begin(); it != pa.end(); ++it) {
            for (auto jt = std::next(it); jt != pa.end(); ++jt) {
                const int a = *it, b = *jt;
                if (!d.has_edge(a, b) && !d.has_edge(b, a))
                    out.vstructures.insert({a, c, b});
            }
        }
    }
    return out;
}

namespace {

// Meek rule 1: z -> x - y with z, y non-adjacent  =>  x -> y.
bool meek_rule_1(const Pdag& g, int x, int y) {
    for (int z : g.dir_parents(x))
        if (!g.adjacent(z, y)) return true;
    return false;
}

// Meek rule 2: x -> z -> y with x - y  =>  x -> y.
bool meek_rule_2(const Pdag& g, int x, int y) {
    for (int z : g.dir_children(x))
        if (g.has_directed(z, y)) return true;
    return false;
}

// Meek rule 3: x - z -> y, x - w -> y, z and w non-adjacent, x - y  =>  x -> y.
bool meek_rule_3(const Pdag& g, int x, int y) {
    std::vector<int> cand;
    for (int z : g.neighbors(x))
        if (g.has_directed(z, y)) cand.push_back(z);
    for (std::size_t a = 0; a < cand.size(); ++a)
        for (std::size_t b = a + 1; b < cand.size(); ++b)
            if (!g.adjacent(cand[a], cand[b])) return true;
    return false;
}

// Meek rule 4: w - x, w - y, w -> z... pattern (w - x - y), (w -> z -> y),
// z and x non-adjacent  =>  x -> y.
bool meek_rule_4(const Pdag& g, int x, int y) {
    for (int w : g.neighbors(x)) {
        if (w == y || !g.has_undirected(w, y)) continue;
        for (int z : g.dir_children(w))
            if (g.has_directed(z, y) && !g.adjacent(z, x)) return true;
    }
    return false;
}

bool oriented_by_meek(const Pdag& g, int x, int y) {
    return meek_rule_1(g, x, y) || meek_rule_2(g, x, y) || meek_rule_3(g, x, y) ||
           meek_rule_4(g, x, y);
}

}  // namespace

void meek_closure(Pdag& g) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& [i, j] : g.undirected_edges()) {
            if (oriented_by_meek(g, i, j)) {
                g.orient(i, j);
                changed = true;
            } else if (oriented_by_meek(g, j, i)) {
                g.orient(j, i);
                changed = true;
            }
        }
    }
}

Pdag complete_to_cpdag(const Dag& d) {
    const auto sv = skeleton_vstructures(d);
    Pdag g(d.node_count());
    for (const auto& [i, j] : sv.skeleton) g.add_undirected(i, j);
    for (const auto& [a, c, b] : sv.vstructures) {
        if (g.has_undirected(a, c)) g.orient(a, c);
        if (g.has_undirected(b, c)) g.orient(b, c);
    }
    meek_closure(g);
    return g;
}

Dag consistent_extension(const Pdag& g) {
    const int p = g.node_count();
    std::vector<char> alive(p, 1);
    std::vector<Edge> oriented;

    Pdag work = g;
    for (int remaining = p; remaining > 0; --remaining) {
        int sink = -1;
        for (int x = p - 1; x >= 0; --x) {
            if (!alive[x]) continue;
            if (!work.dir_children(x).empty()) continue;
            // Every undirected neighbor of x must be adjacent to all other
            // vertices adjacent to x (Dor & Tarsi condition).
            bool ok = true;
            const auto adj_x = work.adjacents(x);
            for (int y : work.neighbors(x)) {
                for (int z : adj_x) {
                    if (z != y && !work.adjacent(y, z)) {
                        ok = false;
                        break;
                    }
                }
                if (!ok) break;
            }
            if (ok) {
                sink = x;
                break;
            }
        }
        if (sink < 0)
            throw NoExtensionError("consistent_extension: PDAG admits no consistent extension");
        const auto nb = work.neighbors(sink);
        for (int y : nb) oriented.emplace_back(y, sink);
        for (int z : work.adjacents(sink)) work.remove_between(sink, z);
        alive[sink] = 0;
    }

    Dag out(p);
    for (const auto& [i, j] : g.directed_edges()) out.add_edge(i, j);
    for (const auto& [i, j] : oriented) out.add_edge(i, j);
    return out;
}

namespace {

void enumerate_rec(const Pdag& cpdag, const Pdag& current, std::size_t cap, DagEnumeration& out) {
    if (out.truncated) return;
    const auto und = current.undirected_edges();
    if (und.empty()) {
        if (!current.directed_part_acyclic()) return;
        Dag d(current.node_count());
        for (const auto& [i, j] : current.directed_edges()) d.add_edge(i, j);
        if (complete_to_cpdag(d) == cpdag) {
            if (out.dags.size() == cap) {
                out.truncated = true;
                return;
            }
            out.dags.push_back(std::move(d));
        }
        return;
    }
    const auto [i, j] = und.front();
    for (const auto& [a, b] : {Edge{i, j}, Edge{j, i}}) {
        Pdag next = current;
        next.orient(a, b);
        meek_closure(next);
        if (next.directed_part_acyclic()) enumerate_rec(cpdag, next, cap, out);
        if (out.truncated) return;
    }
}

}  // namespace

DagEnumeration enumerate_class(const Pdag& g, std::size_t cap) {
    DagEnumeration out;
    enumerate_rec(g, g, cap, out);
    return out;
}

namespace {

// Edge state of the unordered pair (i, j), i < j.
int pair_state(const Pdag& g, int i, int j) {
    if (g.has_undirected(i, j)) return 3;
    if (g.has_directed(i, j)) return 1;
    if (g.has_directed(j, i)) return 2;
    return 0;
}

}  // namespace

int shd(const Pdag& a, const Pdag& b) {
    if (a.node_count() != b.node_count())
        throw SizeMismatchError("shd: graphs have different node counts");
    const int p = a.node_count();
    int dist = 0;
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (pair_state(a, i, j) != pair_state(b, i, j)) ++dist;
    return dist;
}

int shd(const Dag& a, const Dag& b) { return shd(Pdag::from_dag(a), Pdag::from_dag(b)); }
int shd(const Dag& a, const Pdag& b) { return shd(Pdag::from_dag(a), b); }
int shd(const Pdag& a, const Dag& b) { return shd(a, Pdag::from_dag(b)); }

Dag union_graph(const std::vector<Dag>& ds) {
    if (ds.empty()) throw Error("union_graph: empty input");
    const int p = ds.front().node_count();
    Dag out(p);
    for (const auto& d : ds) {
        if (d.node_count() != p)
            throw SizeMismatchError("union_graph: graphs have different node counts");
        for (const auto& [i, j] : d.edges()) {
            try {
                out.add_edge(i, j);
            } catch (const CycleError&) {
                throw CycleError("union_graph: union of the graphs contains a cycle");
            }
        }
    }
    return out;
}

bool is_valid_cpdag(const Pdag& g) {
    if (!g.directed_part_acyclic()) return false;
    try {
        return complete_to_cpdag(consistent_extension(g)) == g;
    } catch (const NoExtensionError&) {
        return false;
    }
}

}  // namespace jointdag
