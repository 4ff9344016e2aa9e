#ifndef COLLABSIM_LOGMODEL_HPP
#define COLLABSIM_LOGMODEL_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace collabsim {

struct SpeakingEvent {
    std::string participant_id;
    double start = 0.0;
    double duration = 0.0;

    double end() const noexcept { return start + duration; }
    bool operator==(const SpeakingEvent&) const = default;
};

struct GazeEvent {
    std::string participant_id;
    double start = 0.0;
    double duration = 0.0;
    std::string target_object_id;

    double end() const noexcept { return start + duration; }
    bool operator==(const GazeEvent&) const = default;
};

struct LocationSample {
    std::string participant_id;
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool operator==(const LocationSample&) const = default;
};

enum class InteractionKind { grab, release, label_change, label_override, look };

std::string to_string(InteractionKind kind);
InteractionKind interaction_kind_from_string(const std::string& name);

struct ObjectInteractionEvent {
    std::string participant_id;
    double t = 0.0;
    std::string object_id;
    InteractionKind kind = InteractionKind::look;

    bool operator==(const ObjectInteractionEvent&) const = default;
};

struct ParticipantLog {
    std::string participant_id;
    std::vector<SpeakingEvent> speaking;
    std::vector<GazeEvent> gaze;
    std::vector<LocationSample> locations;
    std::vector<ObjectInteractionEvent> interactions;

    bool operator==(const ParticipantLog&) const = default;
};

/// Group-level task outcome. Field order matches the task-metric target order
/// used by the regression forest.
struct TaskMetrics {
    long images_grabbed = 0;
    long total_grabs = 0;
    long labels_overridden = 0;
    long images_looked_at = 0;
    double completion_time = 0.0;
    double accuracy = 0.0;  // percent
    long label_changes = 0;

    bool operator==(const TaskMetrics&) const = default;
};

struct GroupSession {
    std::string group_id;
    double duration = 0.0;
    std::vector<ParticipantLog> participants;
    std::vector<std::string> object_catalog;  // sorted, unique
    std::optional<TaskMetrics> task_metrics;

    std::size_t group_size() const noexcept { return participants.size(); }
    const ParticipantLog* find(const std::string& participant_id) const;
    bool operator==(const GroupSession&) const = default;
};

/// Default catalog of `n` image identifiers: img_00, img_01, ...
std::vector<std::string> default_object_catalog(std::size_t n = 28);

/// Sorts by start and unions overlapping or touching intervals.
std::vector<SpeakingEvent> merge_overlapping_events(std::vector<SpeakingEvent> events);

/// Sorts event streams, merges self-overlapping speech and canonicalises the
/// catalog. Location samples are left in their given order.
void normalize_session(GroupSession& session);

/// Throws InvalidInput naming the first violated invariant.
void validate_session(const GroupSession& session);

/// Reads `<root>/session.json` and the per-participant JSONL files.
GroupSession parse_group_session(const std::filesystem::path& root);

/// Writes the session layout. Output bytes depend only on the session value.
void write_group_session(const GroupSession& session, const std::filesystem::path& root);

/// A corpus directory holds one session directory per group.
std::vector<GroupSession> parse_corpus(const std::filesystem::path& root);
void write_corpus(const std::vector<GroupSession>& sessions, const std::filesystem::path& root);

}  // namespace collabsim

#endif  // COLLABSIM_LOGMODEL_HPP
