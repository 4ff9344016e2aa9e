#ifndef COLLABSIM_TESTS_SUPPORT_HPP
#define COLLABSIM_TESTS_SUPPORT_HPP

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "collabsim/common.hpp"
#include "collabsim/logmodel.hpp"

namespace testing {

namespace fs = std::filesystem;

// Scratch directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("collabsim_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

// Relative path -> bytes for every regular file under root.
inline std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = collabsim::read_file(e.path());
    return out;
}

// An arbitrary session that satisfies every logmodel invariant.
inline collabsim::GroupSession random_session(std::uint64_t seed, int n_participants = 3, double duration = 120.0) {
    collabsim::Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    collabsim::GroupSession s;
    s.group_id = "g" + std::to_string(seed);
    s.duration = duration;
    s.object_catalog = collabsim::default_object_catalog(6);
    for (int k = 0; k < n_participants; ++k) {
        collabsim::ParticipantLog p;
        p.participant_id = "p" + std::to_string(k);
        double t = u(rng) * 3.0;
        while (true) {
            const double d = 0.1 + u(rng) * 3.0;
            if (t + d > duration) break;
            p.speaking.push_back({p.participant_id, t, d});
            t += d + 0.01 + u(rng) * 6.0;
        }
        t = 0.0;
        while (true) {
            const double d = u(rng) * 2.0;
            if (t + d > duration) break;
            const auto obj = s.object_catalog[static_cast<std::size_t>(u(rng) * 6.0) % 6];
            p.gaze.push_back({p.participant_id, t, d, obj});
            t += 0.2 + u(rng) * 4.0;
        }
        t = u(rng);
        double x = 0, y = 1.6, z = 0;
        while (t <= duration) {
            p.locations.push_back({p.participant_id, t, x, y, z});
            x += (u(rng) - 0.5) * 0.4;
            y += (u(rng) - 0.5) * 0.02;
            z += (u(rng) - 0.5) * 0.4;
            t += 0.2 + u(rng) * 1.5;
        }
        for (std::size_t i = 0; i + 1 < p.gaze.size(); i += 5) {
            p.interactions.push_back({p.participant_id, p.gaze[i].start, p.gaze[i].target_object_id,
                                      collabsim::InteractionKind::grab});
            p.interactions.push_back({p.participant_id, std::min(p.gaze[i].start + 0.1, duration), p.gaze[i].target_object_id,
                                      collabsim::InteractionKind::release});
        }
        s.participants.push_back(std::move(p));
    }
    if (seed % 2 == 0) s.task_metrics = collabsim::TaskMetrics{3, 7, 1, 5, 300.5, 66.25, 4};
    collabsim::normalize_session(s);
    return s;
}

}  // namespace testing

#endif  // COLLABSIM_TESTS_SUPPORT_HPP
