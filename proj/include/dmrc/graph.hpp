// Directed, relation-typed dialogue graph over utterance indices, plus the
// per-relation in-neighbor index consumed by the graph convolution.
//
// Three construction modes:
//   GoldDiscourse  - one edge head->dependent per annotated link, typed over
//                    the full 16-relation vocabulary
//   LinksOnly      - same edges, relation collapsed to same-speaker /
//                    different-speaker
//   FullyConnected - both directions between every pair within an optional
//                    window, single "connected" relation
// No mode emits self-edges; the convolution's self transform covers those.
// Edges are kept sorted by (dst, src, relation) and deduplicated, so equal
// inputs build bit-identical graphs.
#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmrc/corpus.hpp"

namespace dmrc {

struct GraphMode {
    enum class Kind { GoldDiscourse, LinksOnly, FullyConnected };
    Kind kind = Kind::GoldDiscourse;
    std::optional<int> window;  // FullyConnected only; absent = all pairs

    static GraphMode gold() { return {Kind::GoldDiscourse, std::nullopt}; }
    static GraphMode links_only() { return {Kind::LinksOnly, std::nullopt}; }
    static GraphMode fully_connected(std::optional<int> window = std::nullopt) {
        return {Kind::FullyConnected, window};
    }
};

inline std::string to_string(const GraphMode& m) {
    switch (m.kind) {
        case GraphMode::Kind::GoldDiscourse: return "gold";
        case GraphMode::Kind::LinksOnly: return "links-only";
        case GraphMode::Kind::FullyConnected: return "fully-connected";
    }
    return "?";
}

inline GraphMode parse_graph_mode(const std::string& name, std::optional<int> window = std::nullopt) {
    if (name == "gold") return GraphMode::gold();
    if (name == "links-only") return GraphMode::links_only();
    if (name == "fully-connected") return GraphMode::fully_connected(window);
    throw std::invalid_argument("unknown graph mode: " + name +
                                " (expected gold | links-only | fully-connected)");
}

struct GraphEdge {
    int src = 0;
    int dst = 0;
    int relation = 0;  // index into relation_vocab
    friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

struct DialogueGraph {
    int num_nodes = 0;
    std::vector<GraphEdge> edges;  // canonical order: ascending (dst, src, relation)
    std::vector<std::string> relation_vocab;
};

namespace detail {
inline void canonicalize_edges(std::vector<GraphEdge>& edges) {
    std::sort(edges.begin(), edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
        return std::tie(a.dst, a.src, a.relation) < std::tie(b.dst, b.src, b.relation);
    });
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}
}  // namespace detail

inline DialogueGraph build_graph(const Dialogue& d, const GraphMode& mode) {
    const int n = static_cast<int>(d.utterances.size());
    DialogueGraph g;
    g.num_nodes = n;
    for (const DiscourseLink& l : d.links) {
        if (l.head < 0 || l.head >= n || l.dependent < 0 || l.dependent >= n)
            throw CorpusError("dialogue " + d.id + ": link references utterance out of range");
        if (l.head == l.dependent)
            throw CorpusError("dialogue " + d.id + ": self-loop link at utterance " + std::to_string(l.head));
    }

    switch (mode.kind) {
        case GraphMode::Kind::GoldDiscourse: {
            g.relation_vocab.assign(relation_names().begin(), relation_names().end());
            for (const DiscourseLink& l : d.links)
                g.edges.push_back({l.head, l.dependent, static_cast<int>(l.relation)});
            break;
        }
        case GraphMode::Kind::LinksOnly: {
            g.relation_vocab = {"same-speaker", "different-speaker"};
            for (const DiscourseLink& l : d.links) {
                const bool same = d.utterances[l.head].speaker == d.utterances[l.dependent].speaker;
                g.edges.push_back({l.head, l.dependent, same ? 0 : 1});
            }
            break;
        }
        case GraphMode::Kind::FullyConnected: {
            g.relation_vocab = {"connected"};
            if (mode.window && *mode.window < 1)
                throw std::invalid_argument("fully-connected window must be >= 1");
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    if (i == j) continue;
                    if (mode.window && std::abs(i - j) > *mode.window) continue;
                    g.edges.push_back({i, j, 0});
                }
            break;
        }
    }
    detail::canonicalize_edges(g.edges);
    return g;
}

// In-neighbor sets per (node, relation). |in[i][r]| is the normalization
// denominator of the convolution's relation-r sum at node i.
struct NeighborIndex {
    std::vector<std::vector<std::vector<int>>> in;  // [node][relation] -> ascending sources

    const std::vector<int>& of(int node, int relation) const { return in[node][relation]; }
};

inline NeighborIndex neighbor_index(const DialogueGraph& g) {
    NeighborIndex idx;
    idx.in.assign(g.num_nodes, std::vector<std::vector<int>>(g.relation_vocab.size()));
    for (const GraphEdge& e : g.edges) {
        if (e.relation < 0 || e.relation >= static_cast<int>(g.relation_vocab.size()))
            throw std::invalid_argument("edge relation id " + std::to_string(e.relation) +
                                        " outside vocabulary of size " + std::to_string(g.relation_vocab.size()));
        idx.in[e.dst][e.relation].push_back(e.src);
    }
    // canonical edge order already yields ascending sources per (dst, relation)
    return idx;
}

struct GraphStats {
    int nodes = 0;
    int edges = 0;
    double mean_in_degree = 0.0;
    double mean_out_degree = 0.0;
    int weak_components = 0;
    std::vector<std::pair<std::string, int>> relation_histogram;
    std::vector<std::string> warnings;
};

inline GraphStats graph_stats(const DialogueGraph& g) {
    GraphStats st;
    st.nodes = g.num_nodes;
    st.edges = static_cast<int>(g.edges.size());
    if (g.num_nodes > 0) {
        st.mean_in_degree = static_cast<double>(st.edges) / g.num_nodes;
        st.mean_out_degree = st.mean_in_degree;
    }
    std::vector<int> hist(g.relation_vocab.size(), 0);
    std::vector<int> parent(g.num_nodes);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    for (const GraphEdge& e : g.edges) {
        hist[e.relation] += 1;
        parent[find(e.src)] = find(e.dst);
    }
    std::set<int> roots;
    for (int i = 0; i < g.num_nodes; ++i) roots.insert(find(i));
    st.weak_components = static_cast<int>(roots.size());
    for (std::size_t r = 0; r < hist.size(); ++r)
        if (hist[r] > 0) st.relation_histogram.emplace_back(g.relation_vocab[r], hist[r]);
    if (st.weak_components > 1)
        st.warnings.push_back("graph has " + std::to_string(st.weak_components) +
                              " weakly-connected components; downstream aggregation assumes one");
    return st;
}

inline json to_json(const GraphStats& st) {
    json j;
    j["nodes"] = st.nodes;
    j["edges"] = st.edges;
    j["mean_in_degree"] = st.mean_in_degree;
    j["mean_out_degree"] = st.mean_out_degree;
    j["weak_components"] = st.weak_components;
    j["relation_histogram"] = json::object();
    for (const auto& [name, count] : st.relation_histogram) j["relation_histogram"][name] = count;
    j["warnings"] = st.warnings;
    return j;
}

// one "src dst relation" line per edge, canonical order
inline std::string edge_list_text(const DialogueGraph& g) {
    std::ostringstream os;
    for (const GraphEdge& e : g.edges)
        os << e.src << ' ' << e.dst << ' ' << g.relation_vocab[e.relation] << '\n';
    return os.str();
}

}  // namespace dmrc
