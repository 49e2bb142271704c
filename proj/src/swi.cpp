#include "relgraph/error.hpp"
#include "relgraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <stdexcept>

namespace relgraph {

namespace {

using Edge = std::pair<std::size_t, std::size_t>;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

bool adjacent(const UGraph& g, std::size_t a, std::size_t b) {
    return std::ranges::binary_search(g.adj[a], b);
}

std::vector<Edge> edge_list(const UGraph& g) {
    std::vector<Edge> out;
    for (std::size_t v = 0; v < g.size(); ++v) {
        for (std::size_t w : g.adj[v]) {
            if (v < w) out.emplace_back(v, w);
        }
    }
    return out;
}

std::vector<std::size_t> bfs(const UGraph& g, std::size_t src) {
    constexpr auto unseen = static_cast<std::size_t>(-1);
    std::vector<std::size_t> dist(g.size(), unseen);
    std::queue<std::size_t> q;
    dist[src] = 0;
    q.push(src);
    while (!q.empty()) {
        const std::size_t v = q.front();
        q.pop();
        for (std::size_t w : g.adj[v]) {
            if (dist[w] == unseen) {
                dist[w] = dist[v] + 1;
                q.push(w);
            }
        }
    }
    return dist;
}

// Largest component, ties to the one holding the smallest vertex, relabelled
// in increasing vertex order.
UGraph largest_component(const UGraph& g) {
    std::vector<int> comp(g.size(), -1);
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t v = 0; v < g.size(); ++v) {
        if (comp[v] != -1) continue;
        const int id = static_cast<int>(members.size());
        members.emplace_back();
        std::vector<std::size_t> stack{v};
        comp[v] = id;
        while (!stack.empty()) {
            const std::size_t x = stack.back();
            stack.pop_back();
            members[id].push_back(x);
            for (std::size_t w : g.adj[x]) {
                if (comp[w] == -1) {
                    comp[w] = id;
                    stack.push_back(w);
                }
            }
        }
    }
    if (members.empty()) return {};
    std::size_t best = 0;
    for (std::size_t i = 1; i < members.size(); ++i) {
        if (members[i].size() > members[best].size()) best = i;
    }
    auto verts = members[best];
    std::ranges::sort(verts);
    std::vector<std::size_t> relabel(g.size(), 0);
    for (std::size_t i = 0; i < verts.size(); ++i) relabel[verts[i]] = i;
    std::vector<Edge> edges;
    for (const auto& [a, b] : edge_list(g)) {
        if (comp[a] == static_cast<int>(best)) edges.emplace_back(relabel[a], relabel[b]);
    }
    return make_ugraph(verts.size(), edges);
}

} // namespace

std::size_t UGraph::edge_count() const {
    std::size_t sum = 0;
    for (const auto& a : adj) sum += a.size();
    return sum / 2;
}

UGraph make_ugraph(std::size_t n, const std::vector<Edge>& edges) {
    UGraph g;
    g.adj.resize(n);
    for (const auto& [a, b] : edges) {
        if (a >= n || b >= n) throw ValidationError("edge endpoint out of range");
        if (a == b) continue;
        g.adj[a].push_back(b);
        g.adj[b].push_back(a);
    }
    for (auto& a : g.adj) {
        std::ranges::sort(a);
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }
    return g;
}

double clustering(const UGraph& g) {
    if (g.size() == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t v = 0; v < g.size(); ++v) {
        const auto& nb = g.adj[v];
        const std::size_t k = nb.size();
        if (k < 2) continue;
        std::size_t links = 0;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) links += adjacent(g, nb[i], nb[j]) ? 1 : 0;
        }
        sum += 2.0 * static_cast<double>(links) / static_cast<double>(k * (k - 1));
    }
    return sum / static_cast<double>(g.size());
}

double path_length(const UGraph& g) {
    const std::size_t n = g.size();
    if (n < 2) return 0.0;
    double total = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t d : bfs(g, v)) {
            if (d == static_cast<std::size_t>(-1)) throw ValidationError("graph is not connected");
            total += static_cast<double>(d);
        }
    }
    return total / static_cast<double>(n * (n - 1));
}

bool is_connected(const UGraph& g) {
    if (g.size() == 0) return true;
    return std::ranges::none_of(bfs(g, 0), [](std::size_t d) { return d == static_cast<std::size_t>(-1); });
}

std::vector<std::size_t> degrees(const UGraph& g) {
    std::vector<std::size_t> out;
    for (const auto& a : g.adj) out.push_back(a.size());
    return out;
}

UGraph ring_lattice(std::size_t n, std::size_t k) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 1; j <= k / 2; ++j) edges.emplace_back(i, (i + j) % n);
    }
    return make_ugraph(n, edges);
}

UGraph rewire(const UGraph& g, std::uint64_t seed, std::size_t swaps_per_edge) {
    auto edges = edge_list(g);
    const std::size_t m = edges.size();
    if (m < 2) return g;
    std::set<Edge> present(edges.begin(), edges.end());
    const auto has = [&](std::size_t a, std::size_t b) {
        return present.contains({std::min(a, b), std::max(a, b)});
    };
    std::mt19937_64 rng(seed);
    const std::size_t target = swaps_per_edge * m;
    const std::size_t max_tries = 10 * target;
    std::size_t done = 0;
    UGraph cur = g;
    for (std::size_t tries = 0; tries < max_tries && done < target; ++tries) {
        const std::size_t i = rng() % m;
        const std::size_t j = rng() % m;
        if (i == j) continue;
        auto [a, b] = edges[i];
        auto [c, d] = edges[j];
        if ((rng() & 1U) != 0) std::swap(c, d);
        // (a,b),(c,d) -> (a,d),(c,b)
        if (a == d || c == b || has(a, d) || has(c, b)) continue;
        const Edge e1{std::min(a, d), std::max(a, d)};
        const Edge e2{std::min(c, b), std::max(c, b)};
        UGraph next = cur;
        const auto drop = [&](std::size_t x, std::size_t y) {
            auto& v = next.adj[x];
            v.erase(std::ranges::find(v, y));
        };
        const auto add = [&](std::size_t x, std::size_t y) {
            auto& v = next.adj[x];
            v.insert(std::ranges::upper_bound(v, y), y);
        };
        drop(a, b), drop(b, a), drop(c, d), drop(d, c);
        add(a, d), add(d, a), add(c, b), add(b, c);
        if (!is_connected(next)) continue;
        present.erase({std::min(a, b), std::max(a, b)});
        present.erase({std::min(c, d), std::max(c, d)});
        present.insert(e1);
        present.insert(e2);
        edges[i] = e1;
        edges[j] = e2;
        cur = std::move(next);
        ++done;
    }
    return cur;
}

SwiReport small_world_index(const UGraph& full, int samples, std::uint64_t seed) {
    if (samples < 1) throw ValidationError("samples must be at least 1");
    SwiReport r;
    r.samples = samples;
    r.seed = seed;
    const UGraph g = largest_component(full);
    r.n_nodes = g.size();
    r.n_edges = g.edge_count();
    if (r.n_nodes < 4) {
        r.note = "fewer than 4 nodes in the largest component";
        if (r.n_nodes > 0) {
            r.C = clustering(g);
            r.L = path_length(g);
        }
        return r;
    }
    r.C = clustering(g);
    r.L = path_length(g);

    const auto deg = degrees(g);
    double c_sum = 0.0, l_sum = 0.0;
    for (int s = 0; s < samples; ++s) {
        const UGraph rnd = rewire(g, splitmix64(seed + static_cast<std::uint64_t>(s)));
        if (degrees(rnd) != deg) throw std::logic_error("rewiring changed the degree sequence");
        c_sum += clustering(rnd);
        l_sum += path_length(rnd);
    }
    r.C_rand = c_sum / samples;
    r.L_rand = l_sum / samples;

    const double mean_deg = 2.0 * static_cast<double>(r.n_edges) / static_cast<double>(r.n_nodes);
    auto k = static_cast<std::size_t>(std::llround(mean_deg / 2.0)) * 2;
    k = std::max<std::size_t>(k, 2);
    const std::size_t max_even = (r.n_nodes - 1) % 2 == 0 ? r.n_nodes - 1 : r.n_nodes - 2;
    k = std::min(k, max_even);
    const UGraph latt = ring_lattice(r.n_nodes, k);
    r.C_latt = clustering(latt);
    r.L_latt = path_length(latt);

    constexpr double eps = 1e-12;
    const double l_den = r.L_rand - r.L_latt;
    const double c_den = r.C_latt - r.C_rand;
    if (std::abs(l_den) < eps || std::abs(c_den) < eps) {
        r.note = "degenerate reference graphs";
    } else {
        const double v = ((r.L - r.L_latt) / l_den) * ((r.C - r.C_rand) / c_den);
        r.swi = std::clamp(v, 0.0, 1.0);
    }
    if (r.L > 0.0 && r.C_latt > 0.0) r.omega = r.L_rand / r.L - r.C / r.C_latt;
    return r;
}

SwiReport small_world_index(const Graph& g, int samples, std::uint64_t seed) {
    std::map<std::string, std::size_t> index;
    for (const auto& [id, _] : g.entities) index.emplace(id, index.size());
    std::vector<Edge> edges;
    for (const auto& [k, t] : g.triples) {
        if (t.status == TripleStatus::rejected) continue;
        const auto a = index.find(k.src);
        const auto b = index.find(k.dst);
        if (a != index.end() && b != index.end()) edges.emplace_back(a->second, b->second);
    }
    return small_world_index(make_ugraph(index.size(), edges), samples, seed);
}

Json to_json(const SwiReport& r) {
    const auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    Json j{{"n_nodes", r.n_nodes}, {"n_edges", r.n_edges}, {"C", r.C},
           {"L", r.L},             {"C_rand", r.C_rand},   {"L_rand", r.L_rand},
           {"C_latt", r.C_latt},   {"L_latt", r.L_latt},   {"swi", opt(r.swi)},
           {"omega", opt(r.omega)}, {"defined", r.swi.has_value()},
           {"variant", "normalized (lattice/random)"},
           {"samples", r.samples}, {"seed", r.seed}};
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

} // namespace relgraph
