#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "collabsim/corpusgen.hpp"
#include "collabsim/features.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace collabsim;

namespace {

ParticipantLog with_speech(std::initializer_list<std::pair<double, double>> spans) {
    ParticipantLog p;
    p.participant_id = "a";
    for (auto [s, d] : spans) p.speaking.push_back({"a", s, d});
    return p;
}

ParticipantLog with_path(std::initializer_list<std::array<double, 4>> pts) {
    ParticipantLog p;
    p.participant_id = "a";
    for (const auto& q : pts) p.locations.push_back({"a", q[0], q[1], q[2], q[3]});
    return p;
}

std::vector<LocationSample> as_samples(std::initializer_list<std::array<double, 2>> xy) {
    std::vector<LocationSample> out;
    double t = 0.0;
    for (const auto& q : xy) out.push_back({"a", t++, q[0], q[1], 0.0});
    return out;
}

}  // namespace

TEST_CASE("bin_event_series") {
    CHECK(bin_event_series({}, 10.0, 8) == Eigen::VectorXd::Zero(8));
    const std::vector<double> one{0.0};
    CHECK(bin_event_series(one, 10.0, 4) == Eigen::Vector4d(1, 0, 0, 0));
    const std::vector<double> edge{10.0, 2.5, 2.4999};
    CHECK(bin_event_series(edge, 10.0, 4) == Eigen::Vector4d(1, 1, 0, 1));

    // binomial oracle: bin count ~ Bin(100, 0.1), sigma = 3
    Rng rng(8);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> t(100);
        for (auto& x : t) x = u(rng);
        const auto h = bin_event_series(t, 50.0, 10);
        CHECK(h.sum() == 100.0);
        for (Eigen::Index i = 0; i < h.size(); ++i) CHECK(std::abs(h(i) - 10.0) <= 9.0);
    }
}

TEST_CASE("dft magnitudes") {
    CHECK(dft_magnitudes(Eigen::VectorXd::Constant(16, 3.0)).norm() < 1e-12);

    const int N = 64;
    Eigen::VectorXd c(N);
    for (int n = 0; n < N; ++n) c(n) = std::cos(2.0 * std::numbers::pi * 2.0 * n / N);
    const auto m = dft_magnitudes(c);
    CHECK(std::abs(m(1) - 32.0) <= 1e-9);
    CHECK(m(0) <= 1e-9);
    CHECK(m(2) <= 1e-9);

    CHECK_THROWS_AS(dft_magnitudes(Eigen::VectorXd::Zero(6)), InvalidInput);

    Rng rng(2);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 7 + static_cast<int>(rng() % 90);
        std::vector<double> x(static_cast<std::size_t>(n));
        for (auto& v : x) v = g(rng);
        const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
        const auto ref = oracle::naive_dft(x);
        const auto mags = dft_magnitudes(xv);
        for (int k = 1; k <= 3; ++k) CHECK(std::abs(mags(k - 1) - std::abs(ref[static_cast<std::size_t>(k)])) < 1e-9);
        const auto full = dft_spectrum(xv);
        double energy_t = xv.squaredNorm(), energy_f = 0.0;
        for (Eigen::Index k = 0; k < full.size(); ++k) {
            CHECK(std::abs(full(k) - ref[static_cast<std::size_t>(k)]) < 1e-9);
            energy_f += std::norm(full(k));
        }
        CHECK(std::abs(energy_t - energy_f / n) <= 1e-9 * energy_t);
        CHECK((inverse_dft_real(full) - xv).norm() < 1e-9);
    }
}

TEST_CASE("speaking features") {
    const auto zero = extract_speaking_features(ParticipantLog{}, 100.0);
    CHECK(zero.to_vector() == Eigen::VectorXd::Zero(8));

    const auto f = extract_speaking_features(with_speech({{10, 2}, {20, 2}, {30, 2}}), 100.0);
    CHECK(f.instance_count == 3);
    CHECK(f.ts_mean == doctest::Approx(20.0));
    CHECK(f.ts_std == doctest::Approx(std::sqrt(200.0 / 3.0)).epsilon(1e-12));
    CHECK(f.ts_std == doctest::Approx(8.1650).epsilon(1e-4));
    CHECK(f.dur_mean == doctest::Approx(2.0));
    CHECK(f.dur_std == doctest::Approx(0.0));

    // statistics are over merged events
    const auto merged = extract_speaking_features(with_speech({{0, 2}, {1, 2}}), 10.0);
    CHECK(merged.instance_count == 1);
    CHECK(merged.dur_mean == doctest::Approx(3.0));
    CHECK(SpeakingFeatures::columns().size() == 8);
}

TEST_CASE("gaze entropy") {
    ParticipantLog p;
    p.participant_id = "a";
    const auto cat = default_object_catalog(4);
    for (int i = 0; i < 8; ++i) p.gaze.push_back({"a", double(i), 0.5, cat[0]});
    CHECK(extract_gaze_features(p, 20.0, cat).object_entropy == 0.0);
    p.gaze.clear();
    for (int i = 0; i < 8; ++i) p.gaze.push_back({"a", double(i), 0.5, cat[static_cast<std::size_t>(i % 4)]});
    const auto f = extract_gaze_features(p, 20.0, cat);
    CHECK(f.object_entropy == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(f.instance_count == 8);
    CHECK(GazeFeatures::columns().size() == 9);
}

TEST_CASE("location features") {
    // straight line at constant speed
    const auto line = extract_location_features(
        with_path({{0, 0, 1.6, 0}, {1, 0.5, 1.6, 0}, {2, 1.0, 1.6, 0}, {3, 1.5, 1.6, 0}, {4, 2.0, 1.6, 0}}), 10.0);
    CHECK(line.tortuosity == doctest::Approx(1.0));
    CHECK(line.accel_mean == doctest::Approx(0.0));
    CHECK(line.jerk_mean == doctest::Approx(0.0));
    CHECK(line.speed_mean == doctest::Approx(0.5));
    CHECK(line.total_distance == doctest::Approx(2.0));
    CHECK(line.total_time == doctest::Approx(4.0));
    CHECK(line.idle_fraction == 0.0);

    // square back to the start
    const auto sq = extract_location_features(
        with_path({{0, 0, 0, 0}, {1, 1, 0, 0}, {2, 1, 0, 1}, {3, 0, 0, 1}, {4, 0, 0, 0}}), 10.0);
    CHECK(sq.tortuosity == kTortuosityCap);

    const auto single = extract_location_features(with_path({{1, 0, 0, 0}}), 10.0);
    CHECK(single.instance_count == 1);
    CHECK(single.tortuosity == 1.0);
    CHECK(single.speed_mean == 0.0);

    CHECK_THROWS_AS(extract_location_features(with_path({{1, 0, 0, 0}, {1, 1, 0, 0}}), 10.0), InvalidInput);
    CHECK(LocationFeatures::columns().size() == 24);
}

TEST_CASE("random walk features match a single-pass reference") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto s = testing::random_session(seed, 1, 200.0);
        auto log = s.participants[0];
        // make some intervals idle
        for (std::size_t i = 2; i < log.locations.size(); i += 7) {
            log.locations[i].x = log.locations[i - 1].x;
            log.locations[i].y = log.locations[i - 1].y;
            log.locations[i].z = log.locations[i - 1].z;
        }
        const auto f = extract_location_features(log, 200.0);
        const auto r = oracle::kinematics(log.locations, 0.05);
        CHECK(std::abs(f.total_distance - r.total_distance) < 1e-9);
        CHECK(std::abs(f.total_time - r.total_time) < 1e-9);
        CHECK(std::abs(f.speed_mean - r.speed_mean) < 1e-9);
        CHECK(std::abs(f.speed_max - r.speed_max) < 1e-9);
        CHECK(std::abs(f.accel_mean - r.accel_mean) < 1e-9);
        CHECK(std::abs(f.accel_max - r.accel_max) < 1e-9);
        CHECK(std::abs(f.jerk_mean - r.jerk_mean) < 1e-9);
        CHECK(std::abs(f.idle_fraction - r.idle_fraction) < 1e-9);
        CHECK(std::abs(f.tortuosity - r.tortuosity) < 1e-9 * r.tortuosity);
        CHECK(f.idle_fraction > 0.0);
    }
}

TEST_CASE("path tortuosity") {
    CHECK(path_tortuosity(as_samples({{0, 0}, {3, 4}})) == 1.0);
    CHECK(path_tortuosity(as_samples({{0, 0}, {1, 0}, {1, 1}, {0, 1}})) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(path_tortuosity(as_samples({{0, 0}, {1, 0}, {1, 1}, {0, 0}})) == kTortuosityCap);
    CHECK_THROWS_AS(path_tortuosity(as_samples({{0, 0}})), InvalidInput);
}

TEST_CASE("standardize") {
    FeatureMatrix m;
    m.columns = {"a", "b", "c"};
    m.row_ids = {"g/p0", "g/p1", "g/p2"};
    m.values.resize(3, 3);
    m.values << 1, 5, 2, 2, 5, 4, 3, 5, 9;
    const auto z = standardize(m);
    const double s = std::sqrt(1.5);
    CHECK(std::abs(z.values(0, 0) + s) < 1e-12);
    CHECK(std::abs(z.values(1, 0)) < 1e-12);
    CHECK(std::abs(z.values(2, 0) - s) < 1e-12);
    CHECK(z.values(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(z.values.col(1).isZero());
    CHECK(std::abs(z.values.col(2).mean()) < 1e-12);
    CHECK(std::abs(std::sqrt(z.values.col(2).array().square().mean()) - 1.0) < 1e-12);

    const auto zz = standardize(z);
    CHECK((zz.values - z.values).cwiseAbs().maxCoeff() < 1e-12);

    CHECK((inverse_standardization(z, z.values) - m.values).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((apply_standardization(z, m.values) - z.values).cwiseAbs().maxCoeff() < 1e-12);

    FeatureMatrix one = m;
    one.values = m.values.topRows(1);
    one.row_ids.resize(1);
    CHECK_THROWS_AS(standardize(one), InvalidInput);
}

TEST_CASE("feature matrix and imputation") {
    std::vector<GroupSession> sessions{testing::random_session(1), testing::random_session(2)};
    for (auto m : kModalities) {
        const auto fm = build_feature_matrix(sessions, m);
        CHECK(fm.rows() == 6);
        CHECK(fm.columns == feature_columns(m));
        CHECK(fm.row_ids[4] == "g2/p1");
        CHECK(fm.values.allFinite());
        const auto csv = feature_matrix_csv(fm);
        const auto header = csv.substr(0, csv.find('\n'));
        CHECK(static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) == fm.columns.size());
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    }

    FeatureMatrix m;
    m.values.resize(3, 2);
    m.values << 1, NAN, 3, INFINITY, 5, NAN;
    m.columns = {"a", "b"};
    m.row_ids = {"1", "2", "3"};
    impute_non_finite(m);
    CHECK(m.values(0, 1) == 0.0);
    CHECK(m.values(0, 0) == 1.0);
    m.values(1, 0) = NAN;
    impute_non_finite(m);
    CHECK(m.values(1, 0) == 3.0);
}

TEST_CASE("corpus-level feature means follow the archetypes") {
    CorpusConfig c;
    c.group_size = 4;
    c.n_groups = 6;
    c.seed = 21;
    c.explicit_assignments.assign(24, ArchetypeAssignment{0, 2, 0});
    const auto g = generate_corpus(c, builtin_archetypes());
    const auto sp = build_feature_matrix(g.sessions, Modality::speaking);
    const auto gz = build_feature_matrix(g.sessions, Modality::gaze);
    CHECK(sp.values.col(3).mean() == doctest::Approx(1.7).epsilon(0.05));
    CHECK(gz.values.col(0).mean() == doctest::Approx(2014.0).epsilon(0.05));
}

TEST_CASE("modality names") {
    for (auto m : kModalities) CHECK(modality_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(modality_from_string("smell"), InvalidInput);
}
