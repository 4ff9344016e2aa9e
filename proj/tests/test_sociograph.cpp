#include <doctest.h>

#include <cmath>

#include "collabsim/sociograph.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace collabsim;

namespace {

GroupSession people(std::initializer_list<const char*> ids, double duration = 100.0) {
    GroupSession s;
    s.group_id = "g";
    s.duration = duration;
    s.object_catalog = {"X", "Y"};
    for (const char* id : ids) s.participants.push_back({id, {}, {}, {}, {}});
    return s;
}

ParticipantLog& who(GroupSession& s, const std::string& id) {
    for (auto& p : s.participants)
        if (p.participant_id == id) return p;
    throw std::runtime_error("no participant " + id);
}

Sociogram graph(bool directed, std::vector<std::string> nodes,
                std::map<std::pair<std::string, std::string>, double> edges) {
    Sociogram g;
    g.kind = directed ? GraphKind::conversation : GraphKind::proximity;
    g.directed = directed;
    g.nodes = std::move(nodes);
    g.edges = std::move(edges);
    return g;
}

Sociogram random_graph(Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool directed = rng() % 2 == 0;
    const int n = 1 + static_cast<int>(rng() % 6);
    Sociogram g = graph(directed, {}, {});
    for (int i = 0; i < n; ++i) g.nodes.push_back("n" + std::to_string(i));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j || (!directed && j < i) || u(rng) < 0.4) continue;
            g.edges[{g.nodes[static_cast<std::size_t>(i)], g.nodes[static_cast<std::size_t>(j)]}] = u(rng) + 1e-3;
        }
    return g;
}

void check_same(const GraphFidelity& a, const GraphFidelity& b) {
    CHECK(std::abs(a.mean_weight_diff - b.mean_weight_diff) < 1e-12);
    CHECK(std::abs(a.mean_node_interaction_diff - b.mean_node_interaction_diff) < 1e-12);
    CHECK(std::abs(a.jaccard_edges - b.jaccard_edges) < 1e-12);
    CHECK(std::abs(a.cosine_similarity - b.cosine_similarity) < 1e-12);
    CHECK(std::abs(a.isomorphism_score - b.isomorphism_score) < 1e-12);
}

}  // namespace

TEST_CASE("conversation graph") {
    auto s = people({"A", "B", "C"});
    who(s, "A").speaking = {{"A", 0, 2}, {"A", 10, 1}, {"A", 20, 2}};
    CHECK(conversation_graph(s).edges.empty());

    who(s, "A").speaking = {{"A", 0, 2}};
    who(s, "B").speaking = {{"B", 3, 2}};
    const auto g = conversation_graph(s, 2.0);
    CHECK(g.directed);
    CHECK(g.nodes == std::vector<std::string>{"A", "B", "C"});
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges.at({"A", "B"}) == doctest::Approx(1.0));

    who(s, "B").speaking = {{"B", 10, 2}};
    CHECK(conversation_graph(s, 2.0).edges.empty());

    // A->B gets B's 3 s reply, B->C gets C's 1 s reply, overlap (gap <= 0) does not count
    who(s, "A").speaking = {{"A", 0, 2}, {"A", 7.5, 2}};
    who(s, "B").speaking = {{"B", 3, 3}};
    who(s, "C").speaking = {{"C", 7, 1}};
    const auto h = conversation_graph(s, 2.0);
    REQUIRE(h.edges.size() == 2);
    CHECK(h.edges.at({"A", "B"}) == doctest::Approx(0.75));
    CHECK(h.edges.at({"B", "C"}) == doctest::Approx(0.25));
    CHECK_THROWS_AS(conversation_graph(s, 0.0), InvalidInput);
}

TEST_CASE("proximity graph") {
    auto s = people({"A", "B"}, 10.0);
    who(s, "A").locations = {{"A", 0, 0, 1.6, 0}};
    who(s, "B").locations = {{"B", 0, 0.1, 1.6, 0}};
    auto g = proximity_graph(s, 1.5, 0.5);
    CHECK_FALSE(g.directed);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges.at({"A", "B"}) == 1.0);

    who(s, "B").locations = {{"B", 0, 10, 1.6, 0}};
    CHECK(proximity_graph(s, 1.5, 0.5).edges.empty());
}

TEST_CASE("proximity hand trace with crossing tracks") {
    // grid t = 0..4, d_thresh 1.5
    //        t=0       1        2       3       4
    // A   (0,0,0) held throughout
    // B   x = -3      -1        0       1       3
    // C   none     (0,0,5)  (0,0,5) (0,0,1) (0,0,1)    first sample at t = 0.5, moved at 2.5
    // A-B close at t=1,2,3 of 5 shared -> 0.6
    // A-C close at t=3,4 of 4 shared   -> 0.5
    // B-C close at t=3 (sqrt 2) of 4   -> 0.25
    auto s = people({"A", "B", "C"}, 4.0);
    who(s, "A").locations = {{"A", 0, 0, 0, 0}};
    who(s, "B").locations = {{"B", 0, -3, 0, 0}, {"B", 1, -1, 0, 0}, {"B", 2, 0, 0, 0}, {"B", 3, 1, 0, 0},
                             {"B", 4, 3, 0, 0}};
    who(s, "C").locations = {{"C", 0.5, 0, 0, 5}, {"C", 2.5, 0, 0, 1}};
    const auto g = proximity_graph(s, 1.5, 1.0);
    const double total = 0.6 + 0.5 + 0.25;
    REQUIRE(g.edges.size() == 3);
    CHECK(g.edges.at({"A", "B"}) == doctest::Approx(0.6 / total).epsilon(1e-12));
    CHECK(g.edges.at({"A", "C"}) == doctest::Approx(0.5 / total).epsilon(1e-12));
    CHECK(g.edges.at({"B", "C"}) == doctest::Approx(0.25 / total).epsilon(1e-12));
}

TEST_CASE("shared attention graph") {
    auto s = people({"A", "B", "C"});
    who(s, "A").gaze = {{"A", 0, 10, "X"}};
    who(s, "B").gaze = {{"B", 0, 10, "Y"}};
    CHECK(shared_attention_graph(s).edges.empty());

    who(s, "B").gaze = {{"B", 5, 10, "X"}};
    who(s, "C").gaze = {{"C", 12, 2, "X"}, {"C", 0, 3, "Y"}};
    // A-B overlap 5 s, B-C 2 s
    const auto g = shared_attention_graph(s);
    REQUIRE(g.edges.size() == 2);
    CHECK(g.edges.at({"A", "B"}) == doctest::Approx(5.0 / 7.0).epsilon(1e-12));
    CHECK(g.edges.at({"B", "C"}) == doctest::Approx(2.0 / 7.0).epsilon(1e-12));

    auto twin = people({"A", "B", "C"});
    const std::vector<GazeEvent> same{{"", 0, 4, "X"}, {"", 6, 2, "Y"}};
    for (const char* id : {"A", "B"}) {
        for (auto e : same) {
            e.participant_id = id;
            who(twin, id).gaze.push_back(e);
        }
    }
    who(twin, "C").gaze = {{"C", 1, 1, "X"}};
    const auto t = shared_attention_graph(twin);
    double max_w = 0.0;
    for (const auto& [e, w] : t.edges) max_w = std::max(max_w, w);
    CHECK(t.edges.at({"A", "B"}) == max_w);
}

TEST_CASE("compare_graphs identities on random graphs") {
    Rng rng(12);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto g = random_graph(rng);
        const auto f = compare_graphs(g, g);
        CHECK(f.mean_weight_diff == 0.0);
        CHECK(f.mean_node_interaction_diff == 0.0);
        CHECK(f.jaccard_edges == 1.0);
        CHECK(f.cosine_similarity == 1.0);
        CHECK(f.isomorphism_score == 1.0);

        // a perturbed copy on the same node set
        auto h = g;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::erase_if(h.edges, [&](const auto&) { return u(rng) < 0.3; });
        for (auto& [e, w] : h.edges) w *= 0.5 + u(rng);
        if (h.nodes.size() >= 2) h.edges[{h.nodes[0], h.nodes[1]}] = u(rng) + 0.1;
        auto gs = g, hs = h;
        const double a = scale(rng), b = scale(rng);
        for (auto& [e, w] : gs.edges) w *= a;
        for (auto& [e, w] : hs.edges) w *= b;
        check_same(compare_graphs(g, h), compare_graphs(gs, hs));
    }
}

TEST_CASE("compare_graphs hand examples") {
    const std::vector<std::string> n4{"a", "b", "c", "d"};
    std::map<std::pair<std::string, std::string>, double> complete;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j) complete[{n4[i], n4[j]}] = 1.0;
    const auto f0 = compare_graphs(graph(false, n4, {}), graph(false, n4, complete));
    CHECK(f0.jaccard_edges == 0.0);
    CHECK(f0.isomorphism_score == 0.0);
    CHECK(f0.cosine_similarity == 0.0);
    CHECK(f0.mean_weight_diff == doctest::Approx(1.0 / 6.0));

    // G1: ab .4, bc .3, cd .3 ; G2: ab, bc, cd, ad at .25
    const auto g1 = graph(false, n4, {{{"a", "b"}, 0.4}, {{"b", "c"}, 0.3}, {{"c", "d"}, 0.3}});
    const auto g2 = graph(false, n4, {{{"a", "b"}, 1}, {{"b", "c"}, 1}, {{"c", "d"}, 1}, {{"a", "d"}, 1}});
    const auto f = compare_graphs(g1, g2);
    CHECK(f.jaccard_edges == doctest::Approx(0.75).epsilon(1e-12));
    // |.4-.25| + |.3-.25| + |.3-.25| + |0-.25| over 4 union edges
    CHECK(f.mean_weight_diff == doctest::Approx(0.125).epsilon(1e-12));
    // dot .25, norms sqrt(.34) and .5
    CHECK(f.cosine_similarity == doctest::Approx(0.5 / std::sqrt(0.34)).epsilon(1e-12));
    // strengths: G1 (.4,.7,.6,.3)/2, G2 all .25
    CHECK(f.mean_node_interaction_diff == doctest::Approx(0.3 / 4.0).epsilon(1e-12));
    // one edge of six differs
    CHECK(f.isomorphism_score == doctest::Approx(5.0 / 6.0).epsilon(1e-12));

    // weights below 5% of the max are ignored by the isomorphism score only
    const auto tiny = graph(false, n4, {{{"a", "b"}, 1.0}, {{"c", "d"}, 0.01}});
    const auto plain = graph(false, n4, {{{"a", "b"}, 1.0}});
    CHECK(compare_graphs(tiny, plain).isomorphism_score == 1.0);
    CHECK(compare_graphs(tiny, plain).jaccard_edges == 0.5);

    CHECK_THROWS_AS(compare_graphs(g1, graph(true, n4, {})), InvalidInput);
    CHECK_THROWS_AS(compare_graphs(g1, graph(false, {"a", "b", "c"}, {})), InvalidInput);
    const auto empty_pair = compare_graphs(graph(false, n4, {}), graph(false, n4, {}));
    CHECK(empty_pair.jaccard_edges == 1.0);
    CHECK(empty_pair.cosine_similarity == 1.0);
}

TEST_CASE("exports") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto s = testing::random_session(seed, 4, 200.0);
        for (auto kind : {GraphKind::conversation, GraphKind::proximity, GraphKind::shared_attention}) {
            const auto g = build_sociogram(s, kind);
            CHECK(oracle::valid_dot(to_dot(g)));
            const auto csv = to_edge_csv(g);
            CHECK(csv.rfind("source,target,weight\n", 0) == 0);
            CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == g.edges.size() + 1);
            nlohmann::json j = g;
            CHECK(j.get<Sociogram>() == g);
            if (!g.edges.empty()) CHECK(g.total_weight() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    CHECK_FALSE(oracle::valid_dot("graph {"));
    CHECK_FALSE(oracle::valid_dot("graph g { \"a\" -> \"b\"; }"));

    nlohmann::json bad = graph(false, {"a", "b"}, {{{"a", "b"}, 1.0}});
    bad["edges"][0]["target"] = "a";
    CHECK_THROWS(bad.get<Sociogram>());
    for (auto k : {GraphKind::conversation, GraphKind::proximity, GraphKind::shared_attention})
        CHECK(graph_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(graph_kind_from_string("telepathy"), InvalidInput);
}
