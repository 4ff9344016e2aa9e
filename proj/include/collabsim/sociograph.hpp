#ifndef COLLABSIM_SOCIOGRAPH_HPP
#define COLLABSIM_SOCIOGRAPH_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "collabsim/logmodel.hpp"

namespace collabsim {

enum class GraphKind { conversation, proximity, shared_attention };
std::string to_string(GraphKind kind);
GraphKind graph_kind_from_string(const std::string& name);

struct Sociogram {
    GraphKind kind = GraphKind::conversation;
    bool directed = false;
    std::vector<std::string> nodes;
    /// Positive weights only. Undirected edges are stored once with u < v.
    std::map<std::pair<std::string, std::string>, double> edges;

    double total_weight() const;
    bool operator==(const Sociogram&) const = default;
};

struct SociogramOptions {
    double tau_turn = 2.0;   // seconds between one utterance ending and the reply starting
    double d_thresh = 1.5;   // location units
    double grid_dt = 0.5;    // seconds
};

/// Directed. Edge A->B accumulates the duration of B's utterances that start
/// within (0, tau_turn] after A's preceding utterance ends. Normalised to sum 1.
Sociogram conversation_graph(const GroupSession& session, double tau_turn = 2.0);

/// Undirected. Zero-order hold onto a grid_dt grid; weight is the fraction of
/// shared grid instants closer than d_thresh. Normalised to sum 1.
Sociogram proximity_graph(const GroupSession& session, double d_thresh = 1.5, double grid_dt = 0.5);

/// Undirected. Summed overlap seconds of fixations on the same object. Normalised to sum 1.
Sociogram shared_attention_graph(const GroupSession& session);

Sociogram build_sociogram(const GroupSession& session, GraphKind kind, const SociogramOptions& options = {});

/// Copy with weights scaled to sum 1 (unchanged when there are no edges).
Sociogram normalized(const Sociogram& g);

struct GraphFidelity {
    double mean_weight_diff = 0.0;
    double mean_node_interaction_diff = 0.0;
    double jaccard_edges = 1.0;
    double cosine_similarity = 1.0;
    double isomorphism_score = 1.0;
};

inline constexpr double kIsomorphismThreshold = 0.05;  // fraction of the max edge weight

GraphFidelity compare_graphs(const Sociogram& real, const Sociogram& sim);

std::string to_dot(const Sociogram& g);
std::string to_edge_csv(const Sociogram& g);
void to_json(nlohmann::json& j, const Sociogram& g);
void from_json(const nlohmann::json& j, Sociogram& g);
void to_json(nlohmann::json& j, const GraphFidelity& f);

}  // namespace collabsim

#endif  // COLLABSIM_SOCIOGRAPH_HPP
