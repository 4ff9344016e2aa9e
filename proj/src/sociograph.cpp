#include "collabsim/sociograph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "collabsim/common.hpp"

namespace collabsim {

std::string to_string(GraphKind kind) {
    switch (kind) {
        case GraphKind::conversation: return "conversation";
        case GraphKind::proximity: return "proximity";
        case GraphKind::shared_attention: return "shared_attention";
    }
    throw InvalidInput("unknown graph kind");
}

GraphKind graph_kind_from_string(const std::string& name) {
    if (name == "conversation") return GraphKind::conversation;
    if (name == "proximity") return GraphKind::proximity;
    if (name == "shared_attention") return GraphKind::shared_attention;
    throw InvalidInput("unknown graph kind '" + name + "'");
}

double Sociogram::total_weight() const {
    double s = 0.0;
    for (const auto& [e, w] : edges) s += w;
    return s;
}

Sociogram normalized(const Sociogram& g) {
    Sociogram out = g;
    const double total = g.total_weight();
    if (total > 0.0)
        for (auto& [e, w] : out.edges) w /= total;
    return out;
}

namespace {

Sociogram empty_graph(const GroupSession& session, GraphKind kind, bool directed) {
    Sociogram g;
    g.kind = kind;
    g.directed = directed;
    for (const auto& p : session.participants) g.nodes.push_back(p.participant_id);
    std::sort(g.nodes.begin(), g.nodes.end());
    return g;
}

std::pair<std::string, std::string> undirected_key(const std::string& a, const std::string& b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

void drop_non_positive(Sociogram& g) {
    std::erase_if(g.edges, [](const auto& e) { return !(e.second > 0.0); });
}

}  // namespace

Sociogram conversation_graph(const GroupSession& session, double tau_turn) {
    if (!(tau_turn > 0.0)) throw InvalidInput("conversation_graph: tau_turn must be > 0");
    Sociogram g = empty_graph(session, GraphKind::conversation, true);
    std::vector<SpeakingEvent> all;
    for (const auto& p : session.participants) all.insert(all.end(), p.speaking.begin(), p.speaking.end());
    std::sort(all.begin(), all.end(), [](const SpeakingEvent& a, const SpeakingEvent& b) {
        if (a.start != b.start) return a.start < b.start;
        if (a.participant_id != b.participant_id) return a.participant_id < b.participant_id;
        return a.duration < b.duration;
    });
    for (std::size_t i = 0; i + 1 < all.size(); ++i) {
        const auto& a = all[i];
        const auto& b = all[i + 1];
        if (a.participant_id == b.participant_id) continue;
        const double gap = b.start - a.end();
        if (gap > 0.0 && gap <= tau_turn) g.edges[{a.participant_id, b.participant_id}] += b.duration;
    }
    drop_non_positive(g);
    return normalized(g);
}

Sociogram proximity_graph(const GroupSession& session, double d_thresh, double grid_dt) {
    if (!(d_thresh > 0.0) || !(grid_dt > 0.0)) throw InvalidInput("proximity_graph: thresholds must be > 0");
    Sociogram g = empty_graph(session, GraphKind::proximity, false);

    const auto n_grid = static_cast<std::size_t>(std::floor(session.duration / grid_dt)) + 1;
    struct Track {
        const std::string* id;
        std::vector<int> held;  // sample index per grid instant, -1 before the first sample
        std::vector<LocationSample> samples;
    };
    std::vector<Track> tracks;
    for (const auto& p : session.participants) {
        Track tr{&p.participant_id, std::vector<int>(n_grid, -1), p.locations};
        std::stable_sort(tr.samples.begin(), tr.samples.end(),
                         [](const LocationSample& a, const LocationSample& b) { return a.t < b.t; });
        std::size_t j = 0;
        int last = -1;
        for (std::size_t k = 0; k < n_grid; ++k) {
            const double t = static_cast<double>(k) * grid_dt;
            while (j < tr.samples.size() && tr.samples[j].t <= t) last = static_cast<int>(j++);
            tr.held[k] = last;
        }
        tracks.push_back(std::move(tr));
    }
    for (std::size_t a = 0; a < tracks.size(); ++a)
        for (std::size_t b = a + 1; b < tracks.size(); ++b) {
            long shared = 0, close = 0;
            for (std::size_t k = 0; k < n_grid; ++k) {
                const int ia = tracks[a].held[k], ib = tracks[b].held[k];
                if (ia < 0 || ib < 0) continue;
                ++shared;
                const auto& p = tracks[a].samples[static_cast<std::size_t>(ia)];
                const auto& q = tracks[b].samples[static_cast<std::size_t>(ib)];
                const double d = std::hypot(p.x - q.x, p.y - q.y, p.z - q.z);
                if (d < d_thresh) ++close;
            }
            if (shared > 0 && close > 0)
                g.edges[undirected_key(*tracks[a].id, *tracks[b].id)] =
                    static_cast<double>(close) / static_cast<double>(shared);
        }
    return normalized(g);
}

Sociogram shared_attention_graph(const GroupSession& session) {
    Sociogram g = empty_graph(session, GraphKind::shared_attention, false);
    using Spans = std::map<std::string, std::vector<std::pair<double, double>>>;
    std::vector<Spans> by_object(session.participants.size());
    for (std::size_t i = 0; i < session.participants.size(); ++i) {
        for (const auto& e : session.participants[i].gaze) by_object[i][e.target_object_id].emplace_back(e.start, e.end());
        for (auto& [obj, spans] : by_object[i]) std::sort(spans.begin(), spans.end());
    }
    for (std::size_t a = 0; a < by_object.size(); ++a)
        for (std::size_t b = a + 1; b < by_object.size(); ++b) {
            double overlap = 0.0;
            for (const auto& [obj, sa] : by_object[a]) {
                const auto it = by_object[b].find(obj);
                if (it == by_object[b].end()) continue;
                for (const auto& [s1, e1] : sa)
                    for (const auto& [s2, e2] : it->second) {
                        if (s2 >= e1) break;
                        overlap += std::max(0.0, std::min(e1, e2) - std::max(s1, s2));
                    }
            }
            if (overlap > 0.0)
                g.edges[undirected_key(session.participants[a].participant_id,
                                       session.participants[b].participant_id)] = overlap;
        }
    return normalized(g);
}

Sociogram build_sociogram(const GroupSession& session, GraphKind kind, const SociogramOptions& options) {
    switch (kind) {
        case GraphKind::conversation: return conversation_graph(session, options.tau_turn);
        case GraphKind::proximity: return proximity_graph(session, options.d_thresh, options.grid_dt);
        case GraphKind::shared_attention: return shared_attention_graph(session);
    }
    throw InvalidInput("unknown graph kind");
}

GraphFidelity compare_graphs(const Sociogram& real, const Sociogram& sim) {
    if (real.kind != sim.kind || real.directed != sim.directed) throw InvalidInput("compare_graphs: kind mismatch");
    auto sorted_nodes = [](std::vector<std::string> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    const auto nodes = sorted_nodes(real.nodes);
    if (nodes != sorted_nodes(sim.nodes)) throw InvalidInput("compare_graphs: node sets differ");

    const Sociogram a = normalized(real), b = normalized(sim);
    std::set<std::pair<std::string, std::string>> union_edges;
    long shared = 0;
    for (const auto& [e, w] : a.edges) union_edges.insert(e);
    for (const auto& [e, w] : b.edges) {
        if (a.edges.count(e)) ++shared;
        union_edges.insert(e);
    }
    auto weight = [](const Sociogram& g, const std::pair<std::string, std::string>& e) {
        const auto it = g.edges.find(e);
        return it == g.edges.end() ? 0.0 : it->second;
    };

    GraphFidelity f;
    if (!union_edges.empty()) {
        f.jaccard_edges = static_cast<double>(shared) / static_cast<double>(union_edges.size());
        double dot = 0.0, na = 0.0, nb = 0.0, diff = 0.0;
        for (const auto& e : union_edges) {
            const double wa = weight(a, e), wb = weight(b, e);
            dot += wa * wb;
            na += wa * wa;
            nb += wb * wb;
            diff += std::abs(wa - wb);
        }
        f.mean_weight_diff = diff / static_cast<double>(union_edges.size());
        f.cosine_similarity = (na > 0.0 && nb > 0.0) ? std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0)
                              : (na == 0.0 && nb == 0.0) ? 1.0
                                                         : 0.0;
    }

    auto strengths = [&](const Sociogram& g) {
        std::map<std::string, double> s;
        for (const auto& n : nodes) s[n] = 0.0;
        for (const auto& [e, w] : g.edges) {
            s[e.first] += w;
            s[e.second] += w;
        }
        double total = 0.0;
        for (const auto& [n, v] : s) total += v;
        if (total > 0.0)
            for (auto& [n, v] : s) v /= total;
        return s;
    };
    if (!nodes.empty()) {
        const auto sa = strengths(a), sb = strengths(b);
        double diff = 0.0;
        for (const auto& n : nodes) diff += std::abs(sa.at(n) - sb.at(n));
        f.mean_node_interaction_diff = diff / static_cast<double>(nodes.size());
    }

    auto binarize = [](const Sociogram& g) {
        double max_w = 0.0;
        for (const auto& [e, w] : g.edges) max_w = std::max(max_w, w);
        std::set<std::pair<std::string, std::string>> on;
        for (const auto& [e, w] : g.edges)
            if (w > 0.0 && w >= kIsomorphismThreshold * max_w) on.insert(e);
        return on;
    };
    const auto ba = binarize(a), bb = binarize(b);
    const auto n = static_cast<double>(nodes.size());
    const double possible = real.directed ? n * (n - 1.0) : n * (n - 1.0) / 2.0;
    if (possible > 0.0) {
        long hamming = 0;
        for (const auto& e : ba) hamming += bb.count(e) ? 0 : 1;
        for (const auto& e : bb) hamming += ba.count(e) ? 0 : 1;
        f.isomorphism_score = std::clamp(1.0 - static_cast<double>(hamming) / possible, 0.0, 1.0);
    }
    return f;
}

std::string to_dot(const Sociogram& g) {
    std::ostringstream out;
    const char* arrow = g.directed ? " -> " : " -- ";
    out << (g.directed ? "digraph" : "graph") << " sociogram {\n";
    out << "  kind=\"" << to_string(g.kind) << "\";\n";
    for (const auto& n : g.nodes) out << "  \"" << n << "\";\n";
    for (const auto& [e, w] : g.edges)
        out << "  \"" << e.first << '"' << arrow << '"' << e.second << "\" [weight=" << format_real(w) << "];\n";
    out << "}\n";
    return out.str();
}

std::string to_edge_csv(const Sociogram& g) {
    std::string out = "source,target,weight\n";
    for (const auto& [e, w] : g.edges) out += e.first + "," + e.second + "," + format_real(w) + "\n";
    return out;
}

void to_json(nlohmann::json& j, const Sociogram& g) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [e, w] : g.edges) edges.push_back({{"source", e.first}, {"target", e.second}, {"weight", w}});
    j = {{"kind", to_string(g.kind)}, {"directed", g.directed}, {"nodes", g.nodes}, {"edges", edges}};
}

void from_json(const nlohmann::json& j, Sociogram& g) {
    g = {};
    g.kind = graph_kind_from_string(j.at("kind").get<std::string>());
    g.directed = j.at("directed").get<bool>();
    g.nodes = j.at("nodes").get<std::vector<std::string>>();
    for (const auto& e : j.at("edges")) {
        auto u = e.at("source").get<std::string>(), v = e.at("target").get<std::string>();
        const double w = e.at("weight").get<double>();
        if (u == v) throw InvalidInput("sociogram json: self-loop");
        if (!std::isfinite(w) || w < 0.0) throw InvalidInput("sociogram json: invalid weight");
        if (!g.directed && v < u) std::swap(u, v);
        if (w > 0.0) g.edges[{u, v}] = w;
    }
}

void to_json(nlohmann::json& j, const GraphFidelity& f) {
    j = {{"mean_weight_diff", f.mean_weight_diff},
         {"mean_node_interaction_diff", f.mean_node_interaction_diff},
         {"jaccard_edges", f.jaccard_edges},
         {"cosine_similarity", f.cosine_similarity},
         {"isomorphism_score", f.isomorphism_score}};
}

}  // namespace collabsim
