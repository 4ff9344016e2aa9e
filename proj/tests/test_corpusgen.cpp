#include <doctest.h>

#include <cmath>
#include <numeric>

#include "collabsim/corpusgen.hpp"
#include "support.hpp"

using namespace collabsim;

namespace {

template <class F>
double mean_over(const std::vector<GroupSession>& sessions, F f) {
    double s = 0.0;
    int n = 0;
    for (const auto& g : sessions)
        for (const auto& p : g.participants) {
            s += f(p);
            ++n;
        }
    return s / n;
}

CorpusConfig uniform_corpus(int n_participants, ArchetypeAssignment a, std::uint64_t seed) {
    CorpusConfig c;
    c.group_size = 4;
    c.n_groups = n_participants / 4;
    c.seed = seed;
    c.explicit_assignments.assign(static_cast<std::size_t>(n_participants), a);
    return c;
}

}  // namespace

TEST_CASE("builtin archetypes carry the reference cluster statistics") {
    const auto c = builtin_archetypes();
    REQUIRE(c.speaking.size() == 3);
    REQUIRE(c.gaze.size() == 3);
    REQUIRE(c.locomotion.size() == 4);

    const auto& frequent = c.speaking[0];
    CHECK(frequent.name == "frequent");
    CHECK(frequent.mean_instances == 119.29);
    CHECK(frequent.duration_mean == 1.7);
    CHECK(c.speaking[1].mean_instances == 14.35);
    CHECK(c.speaking[2].mean_instances == 48.63);

    const auto& high = c.gaze[2];
    CHECK(high.name == "high");
    CHECK(high.mean_instances == 2014.00);
    CHECK(high.duration_mean == 0.18);
    CHECK(high.duration_std == 0.25);

    const auto& dynamic = c.locomotion[2];
    CHECK(dynamic.name == "dynamic");
    CHECK(dynamic.mean_samples == 1140.2);
    CHECK(dynamic.idle_prob == 0.14);
    CHECK_NOTHROW(validate_archetypes(c, 28));
}

TEST_CASE("empty and deterministic corpora") {
    CorpusConfig c;
    c.n_groups = 0;
    CHECK(generate_corpus(c, builtin_archetypes()).sessions.empty());

    c.n_groups = 2;
    c.seed = 5;
    const auto a = generate_corpus(c, builtin_archetypes());
    const auto b = generate_corpus(c, builtin_archetypes());
    CHECK(a.sessions == b.sessions);
    CHECK(a.assignments == b.assignments);

    testing::TempDir da("cg_a"), db("cg_b");
    write_corpus(a.sessions, da.path());
    write_corpus(b.sessions, db.path());
    CHECK(testing::read_tree(da.path()) == testing::read_tree(db.path()));

    c.seed = 6;
    CHECK_FALSE(generate_corpus(c, builtin_archetypes()).sessions == a.sessions);
}

TEST_CASE("generated sessions respect logmodel invariants and round-trip") {
    CorpusConfig c;
    c.n_groups = 3;
    c.seed = 9;
    const auto g = generate_corpus(c, builtin_archetypes());
    REQUIRE(g.sessions.size() == 3);
    REQUIRE(g.assignments.size() == 12);
    testing::TempDir dir("cg_rt");
    for (const auto& s : g.sessions) {
        CHECK(s.group_size() == 4);
        CHECK_NOTHROW(validate_session(s));
        CHECK(s.task_metrics.has_value());
    }
    write_corpus(g.sessions, dir.path());
    CHECK(parse_corpus(dir.path()) == g.sessions);
}

TEST_CASE("balanced shuffled assignment") {
    CorpusConfig c;
    c.seed = 3;
    const auto a = assign_archetypes(c, builtin_archetypes());
    REQUIRE(a.size() == 48);
    std::array<int, 3> sp{}, gz{};
    std::array<int, 4> lc{};
    for (const auto& x : a) {
        ++sp[static_cast<std::size_t>(x.speaking)];
        ++gz[static_cast<std::size_t>(x.gaze)];
        ++lc[static_cast<std::size_t>(x.locomotion)];
    }
    CHECK(sp == std::array<int, 3>{16, 16, 16});
    CHECK(gz == std::array<int, 3>{16, 16, 16});
    CHECK(lc == std::array<int, 4>{12, 12, 12, 12});

    c.archetype_mix = ArchetypeMix::cyclic;
    const auto cyc = assign_archetypes(c, builtin_archetypes());
    CHECK(cyc[5] == ArchetypeAssignment{2, 2, 1});
}

TEST_CASE("infeasible configurations are rejected before generation") {
    CorpusConfig c;
    c.session_duration = 100.0;  // 119.29 * 1.7 s of speech does not fit
    c.explicit_assignments.assign(48, ArchetypeAssignment{0, 0, 0});
    CHECK_THROWS_AS(generate_corpus(c, builtin_archetypes()), InvalidInput);

    CorpusConfig bad;
    bad.group_size = 0;
    CHECK_THROWS_AS(generate_corpus(bad, builtin_archetypes()), InvalidInput);

    CorpusConfig wrong_len;
    wrong_len.explicit_assignments.assign(3, ArchetypeAssignment{});
    CHECK_THROWS_AS(generate_corpus(wrong_len, builtin_archetypes()), InvalidInput);

    auto cat = builtin_archetypes();
    cat.gaze[0].object_preference = {0.5, 0.5};
    CHECK_THROWS_AS(validate_archetypes(cat, 28), InvalidInput);
}

TEST_CASE("frequent-talker counts converge to the archetype mean") {
    const auto cat = builtin_archetypes();
    const auto g = generate_corpus(uniform_corpus(100, {0, 0, 0}, 17), cat);
    const double mean = mean_over(g.sessions, [](const ParticipantLog& p) { return double(p.speaking.size()); });
    CHECK(std::abs(mean - 119.29) / 119.29 < 0.05);
    // gamma-Poisson standard error with variance 1.5 * mean
    CHECK(std::abs(mean - 119.29) < 3.0 * std::sqrt(1.5 * 119.29 / 100.0));
}

TEST_CASE("instance counts and durations within 3 standard errors per archetype") {
    const auto cat = builtin_archetypes();
    for (int a = 0; a < 3; ++a) {
        const auto g = generate_corpus(uniform_corpus(52, {a, a, a}, 100 + static_cast<std::uint64_t>(a)), cat);
        const auto& sp = cat.speaking[static_cast<std::size_t>(a)];
        const auto& gz = cat.gaze[static_cast<std::size_t>(a)];
        const double n = 52.0;

        const double sp_count = mean_over(g.sessions, [](const ParticipantLog& p) { return double(p.speaking.size()); });
        CHECK(std::abs(sp_count - sp.mean_instances) < 3.0 * std::sqrt(sp.instance_dispersion * sp.mean_instances / n));
        const double gz_count = mean_over(g.sessions, [](const ParticipantLog& p) { return double(p.gaze.size()); });
        CHECK(std::abs(gz_count - gz.mean_instances) < 3.0 * std::sqrt(gz.instance_dispersion * gz.mean_instances / n));

        std::vector<double> sd, gd;
        for (const auto& s : g.sessions)
            for (const auto& p : s.participants) {
                for (const auto& e : p.speaking) sd.push_back(e.duration);
                for (const auto& e : p.gaze) gd.push_back(e.duration);
            }
        const double sdm = std::accumulate(sd.begin(), sd.end(), 0.0) / double(sd.size());
        const double gdm = std::accumulate(gd.begin(), gd.end(), 0.0) / double(gd.size());
        CHECK(std::abs(sdm - sp.duration_mean) < 3.0 * sp.duration_std / std::sqrt(double(sd.size())));
        CHECK(std::abs(gdm - gz.duration_mean) < 3.0 * gz.duration_std / std::sqrt(double(gd.size())));
    }
}

TEST_CASE("overdispersed counts and shifted log-normal moments") {
    Rng rng(4);
    const int n = 20000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = static_cast<double>(sample_overdispersed_count(40.0, 2.0, rng));
        s += x;
        s2 += x * x;
    }
    const double m = s / n, var = s2 / n - m * m;
    CHECK(std::abs(m - 40.0) < 3.0 * std::sqrt(80.0 / n));
    CHECK(var / m == doctest::Approx(2.0).epsilon(0.08));

    s = s2 = 0;
    double lo = 1e9;
    for (int i = 0; i < n; ++i) {
        const double x = sample_shifted_lognormal(1.7, 0.9, kMinEventDuration, rng);
        lo = std::min(lo, x);
        s += x;
        s2 += x * x;
    }
    CHECK(lo > kMinEventDuration);
    CHECK(std::abs(s / n - 1.7) < 3.0 * 0.9 / std::sqrt(double(n)));
    CHECK(std::sqrt(s2 / n - (s / n) * (s / n)) == doctest::Approx(0.9).epsilon(0.08));
}
