#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rtmocap/errors.hpp"

namespace rtmocap {

// Kinect-v2 joint set. The enumerator order is the canonical serialization
// order for sequence CSV columns and for the POS input channels.
enum class JointId : int {
    spine_base = 0,
    spine_mid,
    spine_shoulder,
    neck,
    head,
    l_shoulder,
    l_elbow,
    l_wrist,
    l_hand,
    r_shoulder,
    r_elbow,
    r_wrist,
    r_hand,
    l_hip,
    l_knee,
    l_ankle,
    l_foot,
    r_hip,
    r_knee,
    r_ankle,
    r_foot,
    l_hand_tip,
    l_thumb,
    r_hand_tip,
    r_thumb,
};

inline constexpr int joint_count = 25;
inline constexpr int major_joint_count = 17;

const std::array<std::string, joint_count>& joint_names();
JointId joint_from_name(const std::string& name);

// The 17 joints used for the POS input form, in canonical order. Hand tips,
// thumbs, feet and ankles are excluded as extremity joints; the exclusion
// applies to POS only (knee-angle features still read the ankles).
const std::array<JointId, major_joint_count>& major_joints();

enum class Setting { A, B };
enum class Task {
    forming_angles,
    sums_rotating,
    differences_rotating,
    symmetry_reflections,
};

std::string to_string(Setting s);
std::string to_string(Task t);
Setting setting_from_string(const std::string& s);
Task task_from_string(const std::string& s);

struct Frame {
    double time_s = 0.0;
    std::array<Eigen::Vector3d, joint_count> positions{};

    const Eigen::Vector3d& at(JointId j) const { return positions[static_cast<int>(j)]; }
    Eigen::Vector3d& at(JointId j) { return positions[static_cast<int>(j)]; }
};

struct SkeletonSequence {
    std::string child_id;
    Setting setting = Setting::A;
    Task task = Task::forming_angles;
    std::vector<Frame> frames;
    double nominal_rate = 30.0;  // frames/second; metadata, spacing not enforced
};

// One rater-marked reflective-thinking span, half-open [onset, offset).
struct AnnotationInterval {
    double onset_s = 0.0;
    double offset_s = 0.0;
};

struct AnnotationTrack {
    std::string rater_id;
    std::vector<AnnotationInterval> intervals;  // sorted, non-overlapping
};

// Throws ValidationError on non-finite coordinates, non-increasing timestamps
// or fewer than 2 frames.
void validate_sequence(const SkeletonSequence& seq);

// Throws ValidationError on onset >= offset or overlapping intervals,
// naming the offending interval indices.
void validate_track(const AnnotationTrack& track);

// Per-frame boolean labels: frame positive iff its timestamp lies in
// [onset, offset) of some interval. Intervals must fall within the sequence
// span, with a tolerance of one nominal frame.
std::vector<bool> labels_per_frame(const SkeletonSequence& seq, const AnnotationTrack& track);

// Projects a frame onto the 17 major joints (51 scalars, canonical order).
Eigen::Matrix<double, major_joint_count, 3> select_major_joints(const Frame& frame);

}  // namespace rtmocap
