#ifndef COLLABSIM_PROFILE_HPP
#define COLLABSIM_PROFILE_HPP

namespace collabsim {

/// A participant's cluster per modality.
struct BehaviorProfile {
    int speaking_cluster = 0;
    int gaze_cluster = 0;
    int location_cluster = 0;
    bool operator==(const BehaviorProfile&) const = default;
};

/// Number of clusters per modality.
struct ClusterCounts {
    int speaking = 0;
    int gaze = 0;
    int location = 0;

    int total() const noexcept { return speaking + gaze + location; }
    bool operator==(const ClusterCounts&) const = default;
};

}  // namespace collabsim

#endif  // COLLABSIM_PROFILE_HPP
