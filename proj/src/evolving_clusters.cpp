#include "comove/evolving_clusters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace comove {

void DetectionParams::validate() const {
    if (c < 2) {
        throw std::invalid_argument("cardinality threshold c must be >= 2");
    }
    if (!(theta_m > 0.0)) {
        throw std::invalid_argument("distance threshold theta must be positive");
    }
    if (d < 1) {
        throw std::invalid_argument("duration threshold d must be >= 1");
    }
    if (!(grid_step_s > 0.0)) {
        throw std::invalid_argument("grid step must be positive");
    }
    if (max_cliques == 0) {
        throw std::invalid_argument("max_cliques must be positive");
    }
}

bool cluster_order(const EvolvingCluster& a, const EvolvingCluster& b) {
    if (a.t_start != b.t_start) return a.t_start < b.t_start;
    if (a.t_end != b.t_end) return a.t_end < b.t_end;
    if (a.tp != b.tp) return a.tp < b.tp;
    return a.members < b.members;
}

void Graph::add_edge(int u, int v) {
    adj[static_cast<std::size_t>(u)].push_back(v);
    adj[static_cast<std::size_t>(v)].push_back(u);
}

bool Graph::has_edge(int u, int v) const {
    const auto& nu = adj[static_cast<std::size_t>(u)];
    return std::find(nu.begin(), nu.end(), v) != nu.end();
}

Graph build_proximity_graph(const TimeSlice& ts, double theta_m, std::vector<std::string>* ids_out) {
    std::vector<const std::pair<const std::string, LonLat>*> entries;
    entries.reserve(ts.positions.size());
    for (const auto& kv : ts.positions) {
        entries.push_back(&kv);
    }
    Graph g(static_cast<int>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        for (std::size_t j = i + 1; j < entries.size(); ++j) {
            const auto& a = entries[i]->second;
            const auto& b = entries[j]->second;
            if (haversine_m(a.lon, a.lat, b.lon, b.lat) <= theta_m) {
                g.add_edge(static_cast<int>(i), static_cast<int>(j));
            }
        }
    }
    if (ids_out) {
        ids_out->clear();
        for (const auto* e : entries) {
            ids_out->push_back(e->first);
        }
    }
    return g;
}

namespace {

// Fixed-capacity bitset for clique enumeration on per-slice graphs.
struct Bits {
    std::vector<std::uint64_t> w;

    explicit Bits(std::size_t n) : w((n + 63) / 64, 0) {}
    void set(int i) { w[static_cast<std::size_t>(i) >> 6] |= 1ULL << (i & 63); }
    void reset(int i) { w[static_cast<std::size_t>(i) >> 6] &= ~(1ULL << (i & 63)); }
    bool test(int i) const { return (w[static_cast<std::size_t>(i) >> 6] >> (i & 63)) & 1ULL; }
    bool any() const {
        for (auto x : w) {
            if (x) return true;
        }
        return false;
    }
    int count_and(const Bits& o) const {
        int n = 0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            n += __builtin_popcountll(w[i] & o.w[i]);
        }
        return n;
    }
    template <typename F>
    void for_each(F&& f) const {
        for (std::size_t i = 0; i < w.size(); ++i) {
            std::uint64_t x = w[i];
            while (x) {
                const int b = __builtin_ctzll(x);
                f(static_cast<int>(i * 64) + b);
                x &= x - 1;
            }
        }
    }
};

Bits and_bits(const Bits& a, const Bits& b) {
    Bits r(a.w.size() * 64);
    r.w.resize(a.w.size());
    for (std::size_t i = 0; i < a.w.size(); ++i) {
        r.w[i] = a.w[i] & b.w[i];
    }
    return r;
}

std::vector<int> degeneracy_order(const Graph& g) {
    const int n = g.n;
    std::vector<int> deg(static_cast<std::size_t>(n));
    std::vector<char> removed(static_cast<std::size_t>(n), 0);
    for (int v = 0; v < n; ++v) {
        deg[static_cast<std::size_t>(v)] = static_cast<int>(g.adj[static_cast<std::size_t>(v)].size());
    }
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n));
    for (int it = 0; it < n; ++it) {
        int best = -1;
        for (int v = 0; v < n; ++v) {
            if (!removed[static_cast<std::size_t>(v)] &&
                (best < 0 || deg[static_cast<std::size_t>(v)] < deg[static_cast<std::size_t>(best)])) {
                best = v;
            }
        }
        removed[static_cast<std::size_t>(best)] = 1;
        order.push_back(best);
        for (int u : g.adj[static_cast<std::size_t>(best)]) {
            if (!removed[static_cast<std::size_t>(u)]) {
                --deg[static_cast<std::size_t>(u)];
            }
        }
    }
    return order;
}

struct CliqueEnumerator {
    const std::vector<Bits>& nbr;
    int n;
    int min_size;
    std::size_t limit;
    std::size_t found = 0;
    std::vector<int> stack;
    std::vector<std::vector<int>>* out;

    void report() {
        if (++found > limit) {
            throw std::runtime_error("clique enumeration exceeded max_cliques limit");
        }
        if (static_cast<int>(stack.size()) >= min_size) {
            std::vector<int> clique(stack);
            std::sort(clique.begin(), clique.end());
            out->push_back(std::move(clique));
        }
    }

    void expand(Bits p, Bits x) {
        if (!p.any() && !x.any()) {
            report();
            return;
        }
        // Pivot: vertex of P | X with the most neighbours inside P.
        int pivot = -1, best = -1;
        auto consider = [&](int v) {
            const int k = p.count_and(nbr[static_cast<std::size_t>(v)]);
            if (k > best) {
                best = k;
                pivot = v;
            }
        };
        p.for_each(consider);
        x.for_each(consider);
        std::vector<int> candidates;
        p.for_each([&](int v) {
            if (!nbr[static_cast<std::size_t>(pivot)].test(v)) {
                candidates.push_back(v);
            }
        });
        for (int v : candidates) {
            stack.push_back(v);
            expand(and_bits(p, nbr[static_cast<std::size_t>(v)]),
                   and_bits(x, nbr[static_cast<std::size_t>(v)]));
            stack.pop_back();
            p.reset(v);
            x.set(v);
        }
    }
};

}  // namespace

GroupExtraction maximal_components(const Graph& g, int c, std::size_t max_cliques) {
    GroupExtraction out;
    const int n = g.n;

    // Connected components via BFS.
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int s = 0; s < n; ++s) {
        if (seen[static_cast<std::size_t>(s)]) continue;
        std::vector<int> comp{s};
        seen[static_cast<std::size_t>(s)] = 1;
        for (std::size_t head = 0; head < comp.size(); ++head) {
            for (int u : g.adj[static_cast<std::size_t>(comp[head])]) {
                if (!seen[static_cast<std::size_t>(u)]) {
                    seen[static_cast<std::size_t>(u)] = 1;
                    comp.push_back(u);
                }
            }
        }
        if (static_cast<int>(comp.size()) >= c) {
            std::sort(comp.begin(), comp.end());
            out.components.push_back(std::move(comp));
        }
    }
    std::sort(out.components.begin(), out.components.end());

    // Maximal cliques: Bron-Kerbosch with pivoting, degeneracy outer order.
    std::vector<Bits> nbr(static_cast<std::size_t>(n), Bits(static_cast<std::size_t>(n)));
    for (int v = 0; v < n; ++v) {
        for (int u : g.adj[static_cast<std::size_t>(v)]) {
            nbr[static_cast<std::size_t>(v)].set(u);
        }
    }
    CliqueEnumerator en{nbr, n, c, max_cliques, 0, {}, &out.cliques};
    const std::vector<int> order = degeneracy_order(g);
    std::vector<int> rank(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        rank[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;
    }
    for (int v : order) {
        Bits p(static_cast<std::size_t>(n)), x(static_cast<std::size_t>(n));
        nbr[static_cast<std::size_t>(v)].for_each([&](int u) {
            if (rank[static_cast<std::size_t>(u)] > rank[static_cast<std::size_t>(v)]) {
                p.set(u);
            } else {
                x.set(u);
            }
        });
        en.stack.assign(1, v);
        en.expand(std::move(p), std::move(x));
    }
    std::sort(out.cliques.begin(), out.cliques.end());
    return out;
}

ClusterDetector::ClusterDetector(DetectionParams params) : params_(params) {
    params_.validate();
}

int ClusterDetector::intern(const std::string& id) {
    auto [it, fresh] = id_index_.emplace(id, static_cast<int>(ids_.size()));
    if (fresh) {
        ids_.push_back(id);
    }
    return it->second;
}

int ClusterDetector::SliceRec::local(int global) const {
    auto it = std::lower_bound(vertices.begin(), vertices.end(), global);
    if (it == vertices.end() || *it != global) {
        return -1;
    }
    return static_cast<int>(it - vertices.begin());
}

bool ClusterDetector::SliceRec::adjacent_local(int lu, int lv) const {
    const std::size_t n = vertices.size();
    const std::size_t bit = static_cast<std::size_t>(lu) * n + static_cast<std::size_t>(lv);
    return (adj_bits[bit >> 6] >> (bit & 63)) & 1ULL;
}

ClusterDetector::SliceRec ClusterDetector::make_slice(const TimeSlice& ts) const {
    SliceRec rec;
    rec.t = ts.t;
    rec.vertices.reserve(ts.positions.size());
    std::vector<LonLat> pos;
    pos.reserve(ts.positions.size());
    for (const auto& [id, ll] : ts.positions) {
        auto it = id_index_.find(id);
        rec.vertices.push_back(it->second);
        (void)ll;
    }
    std::sort(rec.vertices.begin(), rec.vertices.end());
    pos.resize(rec.vertices.size());
    for (const auto& [id, ll] : ts.positions) {
        const int g = id_index_.at(id);
        pos[static_cast<std::size_t>(rec.local(g))] = ll;
    }
    const std::size_t n = rec.vertices.size();
    rec.adj_bits.assign((n * n + 63) / 64, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (haversine_m(pos[i].lon, pos[i].lat, pos[j].lon, pos[j].lat) <= params_.theta_m) {
                const std::size_t b1 = i * n + j;
                const std::size_t b2 = j * n + i;
                rec.adj_bits[b1 >> 6] |= 1ULL << (b1 & 63);
                rec.adj_bits[b2 >> 6] |= 1ULL << (b2 & 63);
            }
        }
    }
    return rec;
}

bool ClusterDetector::valid_set(const std::vector<int>& members, const SliceRec& slice,
                                ClusterKind kind) const {
    std::vector<int> loc;
    loc.reserve(members.size());
    for (int m : members) {
        const int l = slice.local(m);
        if (l < 0) {
            return false;
        }
        loc.push_back(l);
    }
    if (kind == ClusterKind::MC) {
        for (std::size_t i = 0; i < loc.size(); ++i) {
            for (std::size_t j = i + 1; j < loc.size(); ++j) {
                if (!slice.adjacent_local(loc[i], loc[j])) {
                    return false;
                }
            }
        }
        return true;
    }
    // MCS: connectivity of the induced subgraph.
    std::vector<char> seen(loc.size(), 0);
    std::vector<std::size_t> queue{0};
    seen[0] = 1;
    std::size_t visited = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const std::size_t i = queue[head];
        for (std::size_t j = 0; j < loc.size(); ++j) {
            if (!seen[j] && slice.adjacent_local(loc[i], loc[j])) {
                seen[j] = 1;
                ++visited;
                queue.push_back(j);
            }
        }
    }
    return visited == loc.size();
}

std::size_t ClusterDetector::scan_back(const std::vector<int>& members, std::size_t k,
                                       ClusterKind kind) const {
    std::size_t birth = k;
    while (birth > 0 && valid_set(members, history_[birth - 1], kind)) {
        --birth;
    }
    return birth;
}

EvolvingCluster ClusterDetector::to_cluster(const std::vector<int>& members, std::size_t birth_k,
                                            std::size_t end_k, ClusterKind kind) const {
    EvolvingCluster c;
    c.members.reserve(members.size());
    for (int m : members) {
        c.members.push_back(ids_[static_cast<std::size_t>(m)]);
    }
    std::sort(c.members.begin(), c.members.end());
    c.t_start = history_[birth_k].t;
    c.t_end = history_[end_k].t;
    c.tp = static_cast<int>(kind);
    return c;
}

void ClusterDetector::emit_if_durable(const std::vector<int>& members, std::size_t birth_k,
                                      std::size_t end_k, ClusterKind kind,
                                      std::vector<EvolvingCluster>& out) {
    if (end_k - birth_k + 1 >= static_cast<std::size_t>(params_.d)) {
        out.push_back(to_cluster(members, birth_k, end_k, kind));
    }
}

void ClusterDetector::advance_kind(ClusterKind kind, const std::vector<std::vector<int>>& groups,
                                   std::size_t k, std::vector<EvolvingCluster>& out) {
    PatternMap& active = (kind == ClusterKind::MC) ? active_mc_ : active_mcs_;
    PatternMap next;
    for (const auto& g : groups) {
        auto it = active.find(g);
        const bool carried = it != active.end();
        const std::size_t birth = carried ? it->second.birth_k : scan_back(g, k, kind);
        next.emplace(g, PatternMeta{birth, k});
        if (params_.progressive) {
            const std::size_t dur = k - birth + 1;
            if (dur == static_cast<std::size_t>(params_.d) ||
                (!carried && dur > static_cast<std::size_t>(params_.d))) {
                provisional_.push_back(to_cluster(g, birth, k, kind));
            }
        }
    }
    const SliceRec& cur = history_[k];
    for (const auto& [members, meta] : active) {
        if (next.count(members)) {
            continue;
        }
        if (valid_set(members, cur, kind)) {
            // Still valid but no longer maximal: absorbed by a covering group.
            emit_if_durable(members, meta.birth_k, k, kind, out);
        } else {
            emit_if_durable(members, meta.birth_k, meta.last_k, kind, out);
        }
    }
    active = std::move(next);
}

void ClusterDetector::step_one(const SliceRec& slice, std::vector<EvolvingCluster>& out) {
    history_.push_back(slice);
    const std::size_t k = history_.size() - 1;
    const std::size_t n = slice.vertices.size();

    Graph g(static_cast<int>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (slice.adjacent_local(static_cast<int>(i), static_cast<int>(j))) {
                g.add_edge(static_cast<int>(i), static_cast<int>(j));
            }
        }
    }
    GroupExtraction groups = maximal_components(g, params_.c, params_.max_cliques);

    auto to_global = [&](const std::vector<std::vector<int>>& local_groups) {
        std::vector<std::vector<int>> out_groups;
        out_groups.reserve(local_groups.size());
        for (const auto& lg : local_groups) {
            std::vector<int> gg;
            gg.reserve(lg.size());
            for (int l : lg) {
                gg.push_back(slice.vertices[static_cast<std::size_t>(l)]);
            }
            std::sort(gg.begin(), gg.end());
            out_groups.push_back(std::move(gg));
        }
        std::sort(out_groups.begin(), out_groups.end());
        return out_groups;
    };

    if (params_.mode != DetectionMode::MCS) {
        advance_kind(ClusterKind::MC, to_global(groups.cliques), k, out);
    }
    if (params_.mode != DetectionMode::MC) {
        // Connected-set pool for the MCS kind: components plus cliques
        // (a clique is a connected set; this lets a loosening clique
        // pattern live on as a density-connected one).
        std::vector<std::vector<int>> pool = to_global(groups.components);
        for (auto& cl : to_global(groups.cliques)) {
            pool.push_back(std::move(cl));
        }
        std::sort(pool.begin(), pool.end());
        pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
        advance_kind(ClusterKind::MCS, pool, k, out);
    }
}

std::vector<EvolvingCluster> ClusterDetector::step(const TimeSlice& ts) {
    std::vector<EvolvingCluster> out;
    for (const auto& [id, ll] : ts.positions) {
        (void)ll;
        intern(id);
    }
    if (have_prev_) {
        if (!(ts.t > prev_t_)) {
            throw std::invalid_argument("non-monotonic time");
        }
        const double steps = (ts.t - prev_t_) / params_.grid_step_s;
        const auto n = static_cast<long long>(std::llround(steps));
        if (n < 1 || std::abs(steps - static_cast<double>(n)) > 1e-6) {
            throw std::invalid_argument("timeslice off the alignment grid");
        }
        for (long long i = 1; i < n; ++i) {
            SliceRec empty;
            empty.t = prev_t_ + static_cast<double>(i) * params_.grid_step_s;
            step_one(empty, out);
        }
    }
    step_one(make_slice(ts), out);
    prev_t_ = ts.t;
    have_prev_ = true;
    std::sort(out.begin(), out.end(), cluster_order);
    return out;
}

std::vector<EvolvingCluster> ClusterDetector::flush() {
    std::vector<EvolvingCluster> out;
    for (const auto& [members, meta] : active_mc_) {
        emit_if_durable(members, meta.birth_k, meta.last_k, ClusterKind::MC, out);
    }
    for (const auto& [members, meta] : active_mcs_) {
        emit_if_durable(members, meta.birth_k, meta.last_k, ClusterKind::MCS, out);
    }
    active_mc_.clear();
    active_mcs_.clear();
    std::sort(out.begin(), out.end(), cluster_order);
    return out;
}

std::vector<EvolvingCluster> ClusterDetector::take_provisional() {
    return std::exchange(provisional_, {});
}

std::vector<EvolvingCluster> detect_batch(const std::vector<TimeSlice>& slices,
                                          const DetectionParams& params) {
    ClusterDetector det(params);
    std::vector<EvolvingCluster> out;
    for (const auto& ts : slices) {
        auto emitted = det.step(ts);
        out.insert(out.end(), emitted.begin(), emitted.end());
    }
    auto tail = det.flush();
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
}

}  // namespace comove
