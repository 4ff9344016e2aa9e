#include "collabsim/logmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "collabsim/common.hpp"

namespace collabsim {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(InteractionKind kind) {
    switch (kind) {
        case InteractionKind::grab: return "grab";
        case InteractionKind::release: return "release";
        case InteractionKind::label_change: return "label_change";
        case InteractionKind::label_override: return "label_override";
        case InteractionKind::look: return "look";
    }
    return "look";
}

InteractionKind interaction_kind_from_string(const std::string& name) {
    if (name == "grab") return InteractionKind::grab;
    if (name == "release") return InteractionKind::release;
    if (name == "label_change") return InteractionKind::label_change;
    if (name == "label_override") return InteractionKind::label_override;
    if (name == "look") return InteractionKind::look;
    throw InvalidInput("unknown interaction kind '" + name + "'");
}

const ParticipantLog* GroupSession::find(const std::string& participant_id) const {
    for (const auto& p : participants)
        if (p.participant_id == participant_id) return &p;
    return nullptr;
}

std::vector<std::string> default_object_catalog(std::size_t n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string id = std::to_string(i);
        if (id.size() < 2) id.insert(0, 2 - id.size(), '0');
        out.push_back("img_" + id);
    }
    return out;
}

std::vector<SpeakingEvent> merge_overlapping_events(std::vector<SpeakingEvent> events) {
    std::sort(events.begin(), events.end(), [](const SpeakingEvent& a, const SpeakingEvent& b) {
        if (a.start != b.start) return a.start < b.start;
        return a.duration < b.duration;
    });
    std::vector<SpeakingEvent> out;
    out.reserve(events.size());
    double current_end = 0.0;
    for (auto& e : events) {
        if (!out.empty() && e.start <= current_end) {
            if (e.end() > current_end) {
                current_end = e.end();
                out.back().duration = current_end - out.back().start;
            }
            continue;
        }
        current_end = e.end();
        out.push_back(std::move(e));
    }
    return out;
}

void normalize_session(GroupSession& session) {
    std::sort(session.object_catalog.begin(), session.object_catalog.end());
    session.object_catalog.erase(std::unique(session.object_catalog.begin(), session.object_catalog.end()),
                                 session.object_catalog.end());
    for (auto& p : session.participants) {
        p.speaking = merge_overlapping_events(std::move(p.speaking));
        std::sort(p.gaze.begin(), p.gaze.end(), [](const GazeEvent& a, const GazeEvent& b) {
            if (a.start != b.start) return a.start < b.start;
            if (a.duration != b.duration) return a.duration < b.duration;
            return a.target_object_id < b.target_object_id;
        });
        std::stable_sort(p.interactions.begin(), p.interactions.end(),
                         [](const ObjectInteractionEvent& a, const ObjectInteractionEvent& b) { return a.t < b.t; });
    }
}

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw InvalidInput(message);
}

bool finite_all(std::initializer_list<double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

void validate_session(const GroupSession& s) {
    require(std::isfinite(s.duration) && s.duration > 0.0, "session '" + s.group_id + "': duration must be > 0");
    require(!s.group_id.empty(), "session group_id is empty");
    const double horizon = s.duration + 1e-9 * std::max(1.0, s.duration);
    const std::set<std::string> catalog(s.object_catalog.begin(), s.object_catalog.end());
    require(catalog.size() == s.object_catalog.size(), "object catalog contains duplicates");

    std::set<std::string> ids;
    for (const auto& p : s.participants) {
        const std::string where = "participant '" + p.participant_id + "'";
        require(!p.participant_id.empty(), "participant id is empty");
        require(ids.insert(p.participant_id).second, "duplicate participant_id '" + p.participant_id + "'");

        for (std::size_t i = 0; i < p.speaking.size(); ++i) {
            const auto& e = p.speaking[i];
            require(e.participant_id == p.participant_id, where + ": speaking event carries foreign id");
            require(finite_all({e.start, e.duration}) && e.start >= 0.0 && e.duration > 0.0,
                    where + ": speaking event needs start >= 0 and duration > 0");
            require(e.end() <= horizon, where + ": speaking event ends after session");
            if (i > 0)
                require(e.start > p.speaking[i - 1].end(), where + ": speaking events overlap or are unsorted");
        }
        for (const auto& e : p.gaze) {
            require(e.participant_id == p.participant_id, where + ": gaze event carries foreign id");
            require(finite_all({e.start, e.duration}) && e.start >= 0.0 && e.duration >= 0.0,
                    where + ": gaze event needs start >= 0 and duration >= 0");
            require(e.end() <= horizon, where + ": gaze event ends after session");
            require(catalog.count(e.target_object_id) == 1,
                    where + ": gaze target '" + e.target_object_id + "' not in catalog");
        }
        for (std::size_t i = 0; i < p.locations.size(); ++i) {
            const auto& l = p.locations[i];
            require(l.participant_id == p.participant_id, where + ": location sample carries foreign id");
            require(finite_all({l.t, l.x, l.y, l.z}), where + ": non-finite location sample");
            require(l.t >= 0.0 && l.t <= horizon, where + ": location sample outside session");
            if (i > 0) require(l.t > p.locations[i - 1].t, where + ": location timestamps not strictly increasing");
        }
        std::map<std::string, bool> held;
        for (std::size_t i = 0; i < p.interactions.size(); ++i) {
            const auto& e = p.interactions[i];
            require(e.participant_id == p.participant_id, where + ": interaction carries foreign id");
            require(std::isfinite(e.t) && e.t >= 0.0 && e.t <= horizon, where + ": interaction outside session");
            require(catalog.count(e.object_id) == 1, where + ": interaction object '" + e.object_id + "' not in catalog");
            if (i > 0) require(e.t >= p.interactions[i - 1].t, where + ": interactions unsorted");
            if (e.kind == InteractionKind::grab) {
                require(!held[e.object_id], where + ": grab of '" + e.object_id + "' while already held");
                held[e.object_id] = true;
            } else if (e.kind == InteractionKind::release) {
                require(held[e.object_id], where + ": release of '" + e.object_id + "' without grab");
                held[e.object_id] = false;
            }
        }
    }
    if (s.task_metrics) {
        const auto& m = *s.task_metrics;
        require(m.images_grabbed >= 0 && m.total_grabs >= 0 && m.labels_overridden >= 0 && m.images_looked_at >= 0 &&
                    m.label_changes >= 0,
                "task metrics: counts must be >= 0");
        require(m.images_grabbed <= static_cast<long>(catalog.size()), "task metrics: images_grabbed exceeds catalog");
        require(m.images_looked_at <= static_cast<long>(catalog.size()),
                "task metrics: images_looked_at exceeds catalog");
        require(std::isfinite(m.completion_time) && m.completion_time >= 0.0, "task metrics: bad completion_time");
        require(std::isfinite(m.accuracy) && m.accuracy >= 0.0 && m.accuracy <= 100.0,
                "task metrics: accuracy outside [0,100]");
    }
}

// ---------------------------------------------------------------------------
// Serialisation

namespace {

std::string quoted(const std::string& s) { return json(s).dump(); }

std::string task_metrics_json(const TaskMetrics& m) {
    std::ostringstream o;
    o << "{\"images_grabbed\": " << m.images_grabbed << ", \"total_grabs\": " << m.total_grabs
      << ", \"labels_overridden\": " << m.labels_overridden << ", \"images_looked_at\": " << m.images_looked_at
      << ", \"completion_time\": " << format_real(m.completion_time) << ", \"accuracy\": " << format_real(m.accuracy)
      << ", \"label_changes\": " << m.label_changes << "}";
    return o.str();
}

std::string manifest_json(const GroupSession& s) {
    std::ostringstream o;
    o << "{\n";
    o << "  \"group_id\": " << quoted(s.group_id) << ",\n";
    o << "  \"duration\": " << format_real(s.duration) << ",\n";
    o << "  \"group_size\": " << s.participants.size() << ",\n";
    o << "  \"participant_ids\": [";
    for (std::size_t i = 0; i < s.participants.size(); ++i)
        o << (i ? ", " : "") << quoted(s.participants[i].participant_id);
    o << "],\n";
    o << "  \"object_catalog\": [";
    for (std::size_t i = 0; i < s.object_catalog.size(); ++i) o << (i ? ", " : "") << quoted(s.object_catalog[i]);
    o << "]";
    if (s.task_metrics) o << ",\n  \"task_metrics\": " << task_metrics_json(*s.task_metrics);
    o << "\n}\n";
    return o.str();
}

std::string modality_path(std::size_t k, const char* modality) {
    return "p" + std::to_string(k) + "_" + modality + ".jsonl";
}

// Record parsing helpers: each record must carry exactly the expected keys.
struct RecordReader {
    const std::string& file;
    std::size_t line;
    const json& obj;

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(file, line, what); }

    void expect_keys(std::initializer_list<const char*> keys) const {
        if (!obj.is_object()) fail("record is not a JSON object");
        if (obj.size() != keys.size()) fail("record must have exactly " + std::to_string(keys.size()) + " fields");
        for (const char* k : keys)
            if (!obj.contains(k)) fail(std::string("missing field '") + k + "'");
    }
    double real(const char* key) const {
        const auto& v = obj.at(key);
        if (!v.is_number()) fail(std::string("field '") + key + "' must be a number");
        return v.get<double>();
    }
    std::string str(const char* key) const {
        const auto& v = obj.at(key);
        if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
        return v.get<std::string>();
    }
};

template <typename Fn>
void for_each_record(const fs::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "missing modality file");
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(path.string(), line_no, std::string("malformed JSON: ") + e.what());
        }
        RecordReader r{path.string(), line_no, obj};
        fn(r);
    }
}

long integer_field(const json& obj, const char* key, const std::string& file) {
    if (!obj.contains(key) || !obj.at(key).is_number_integer())
        throw ParseError(file, 0, std::string("task_metrics field '") + key + "' must be an integer");
    return obj.at(key).get<long>();
}

double real_field(const json& obj, const char* key, const std::string& file) {
    if (!obj.contains(key) || !obj.at(key).is_number())
        throw ParseError(file, 0, std::string("field '") + key + "' must be a number");
    return obj.at(key).get<double>();
}

}  // namespace

void write_group_session(const GroupSession& session, const fs::path& root) {
    validate_session(session);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec || !fs::is_directory(root)) throw IoError("cannot create session directory " + root.string());

    atomic_write_file(root / "session.json", manifest_json(session));
    for (std::size_t k = 0; k < session.participants.size(); ++k) {
        const auto& p = session.participants[k];
        const std::string pid = quoted(p.participant_id);
        std::ostringstream sp, gz, lc, ia;
        for (const auto& e : p.speaking)
            sp << "{\"participant_id\": " << pid << ", \"start\": " << format_real(e.start)
               << ", \"duration\": " << format_real(e.duration) << "}\n";
        for (const auto& e : p.gaze)
            gz << "{\"participant_id\": " << pid << ", \"start\": " << format_real(e.start)
               << ", \"duration\": " << format_real(e.duration)
               << ", \"target_object_id\": " << quoted(e.target_object_id) << "}\n";
        for (const auto& l : p.locations)
            lc << "{\"participant_id\": " << pid << ", \"t\": " << format_real(l.t) << ", \"x\": " << format_real(l.x)
               << ", \"y\": " << format_real(l.y) << ", \"z\": " << format_real(l.z) << "}\n";
        for (const auto& e : p.interactions)
            ia << "{\"participant_id\": " << pid << ", \"t\": " << format_real(e.t)
               << ", \"object_id\": " << quoted(e.object_id) << ", \"kind\": " << quoted(to_string(e.kind)) << "}\n";
        atomic_write_file(root / modality_path(k, "speaking"), sp.str());
        atomic_write_file(root / modality_path(k, "gaze"), gz.str());
        atomic_write_file(root / modality_path(k, "location"), lc.str());
        atomic_write_file(root / modality_path(k, "interactions"), ia.str());
    }
}

GroupSession parse_group_session(const fs::path& root) {
    const fs::path manifest_path = root / "session.json";
    const std::string manifest_file = manifest_path.string();
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path));
    } catch (const IoError&) {
        throw ParseError(manifest_file, 0, "missing session manifest");
    } catch (const json::parse_error& e) {
        throw ParseError(manifest_file, 0, std::string("malformed manifest: ") + e.what());
    }
    static const std::set<std::string> known{"group_id",       "duration",     "group_size", "participant_ids",
                                             "object_catalog", "task_metrics"};
    for (const auto& item : manifest.items())
        if (!known.count(item.key())) throw ParseError(manifest_file, 0, "unknown manifest key '" + item.key() + "'");

    GroupSession s;
    try {
        s.group_id = manifest.at("group_id").get<std::string>();
        s.duration = real_field(manifest, "duration", manifest_file);
        const auto group_size = manifest.at("group_size").get<std::size_t>();
        const auto ids = manifest.at("participant_ids").get<std::vector<std::string>>();
        if (ids.size() != group_size) throw ParseError(manifest_file, 0, "participant_ids length != group_size");
        s.object_catalog = manifest.at("object_catalog").get<std::vector<std::string>>();
        for (const auto& id : ids) {
            for (const auto& p : s.participants)
                if (p.participant_id == id) throw InvalidInput("duplicate participant_id '" + id + "'");
            ParticipantLog log;
            log.participant_id = id;
            s.participants.push_back(std::move(log));
        }
        if (manifest.contains("task_metrics")) {
            const auto& m = manifest.at("task_metrics");
            TaskMetrics tm;
            tm.images_grabbed = integer_field(m, "images_grabbed", manifest_file);
            tm.total_grabs = integer_field(m, "total_grabs", manifest_file);
            tm.labels_overridden = integer_field(m, "labels_overridden", manifest_file);
            tm.images_looked_at = integer_field(m, "images_looked_at", manifest_file);
            tm.completion_time = real_field(m, "completion_time", manifest_file);
            tm.accuracy = real_field(m, "accuracy", manifest_file);
            tm.label_changes = integer_field(m, "label_changes", manifest_file);
            s.task_metrics = tm;
        }
    } catch (const json::exception& e) {
        throw ParseError(manifest_file, 0, std::string("bad manifest field: ") + e.what());
    }

    for (std::size_t k = 0; k < s.participants.size(); ++k) {
        auto& p = s.participants[k];
        auto check_id = [&](const RecordReader& r) {
            if (r.str("participant_id") != p.participant_id)
                r.fail("participant_id does not match manifest entry '" + p.participant_id + "'");
        };
        for_each_record(root / modality_path(k, "speaking"), [&](const RecordReader& r) {
            r.expect_keys({"participant_id", "start", "duration"});
            check_id(r);
            SpeakingEvent e{p.participant_id, r.real("start"), r.real("duration")};
            if (!(e.duration > 0.0) || !(e.start >= 0.0)) r.fail("speaking event needs start >= 0 and duration > 0");
            p.speaking.push_back(std::move(e));
        });
        for_each_record(root / modality_path(k, "gaze"), [&](const RecordReader& r) {
            r.expect_keys({"participant_id", "start", "duration", "target_object_id"});
            check_id(r);
            p.gaze.push_back({p.participant_id, r.real("start"), r.real("duration"), r.str("target_object_id")});
        });
        for_each_record(root / modality_path(k, "location"), [&](const RecordReader& r) {
            r.expect_keys({"participant_id", "t", "x", "y", "z"});
            check_id(r);
            LocationSample l{p.participant_id, r.real("t"), r.real("x"), r.real("y"), r.real("z")};
            if (!p.locations.empty() && !(l.t > p.locations.back().t))
                r.fail("non-monotonic location timestamp");
            p.locations.push_back(std::move(l));
        });
        for_each_record(root / modality_path(k, "interactions"), [&](const RecordReader& r) {
            r.expect_keys({"participant_id", "t", "object_id", "kind"});
            check_id(r);
            InteractionKind kind;
            try {
                kind = interaction_kind_from_string(r.str("kind"));
            } catch (const InvalidInput& e) {
                r.fail(e.what());
            }
            p.interactions.push_back({p.participant_id, r.real("t"), r.str("object_id"), kind});
        });
    }
    normalize_session(s);
    validate_session(s);
    return s;
}

std::vector<GroupSession> parse_corpus(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError("corpus directory not found: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory() && fs::exists(entry.path() / "session.json")) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<GroupSession> out;
    out.reserve(dirs.size());
    for (const auto& d : dirs) out.push_back(parse_group_session(d));
    return out;
}

void write_corpus(const std::vector<GroupSession>& sessions, const fs::path& root) {
    std::set<std::string> seen;
    for (const auto& s : sessions) {
        const bool safe = !s.group_id.empty() && std::all_of(s.group_id.begin(), s.group_id.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
        }) && s.group_id != "." && s.group_id != "..";
        if (!safe) throw InvalidInput("group_id '" + s.group_id + "' is not a safe directory name");
        if (!seen.insert(s.group_id).second) throw InvalidInput("duplicate group_id '" + s.group_id + "'");
    }
    for (const auto& s : sessions) write_group_session(s, root / s.group_id);
}

}  // namespace collabsim
