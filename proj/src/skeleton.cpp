#include "rtmocap/skeleton.hpp"

#include <cmath>
#include <sstream>

namespace rtmocap {

const std::array<std::string, joint_count>& joint_names() {
    static const std::array<std::string, joint_count> names = {
        "spine_base", "spine_mid", "spine_shoulder", "neck",      "head",
        "l_shoulder", "l_elbow",   "l_wrist",        "l_hand",    "r_shoulder",
        "r_elbow",    "r_wrist",   "r_hand",         "l_hip",     "l_knee",
        "l_ankle",    "l_foot",    "r_hip",          "r_knee",    "r_ankle",
        "r_foot",     "l_hand_tip", "l_thumb",       "r_hand_tip", "r_thumb",
    };
    return names;
}

JointId joint_from_name(const std::string& name) {
    const auto& names = joint_names();
    for (int i = 0; i < joint_count; ++i) {
        if (names[i] == name) return static_cast<JointId>(i);
    }
    throw ValidationError("unknown joint name: " + name);
}

const std::array<JointId, major_joint_count>& major_joints() {
    static const std::array<JointId, major_joint_count> joints = {
        JointId::spine_base, JointId::spine_mid, JointId::spine_shoulder,
        JointId::neck,       JointId::head,      JointId::l_shoulder,
        JointId::l_elbow,    JointId::l_wrist,   JointId::l_hand,
        JointId::r_shoulder, JointId::r_elbow,   JointId::r_wrist,
        JointId::r_hand,     JointId::l_hip,     JointId::l_knee,
        JointId::r_hip,      JointId::r_knee,
    };
    return joints;
}

std::string to_string(Setting s) { return s == Setting::A ? "A" : "B"; }

std::string to_string(Task t) {
    switch (t) {
        case Task::forming_angles: return "forming_angles";
        case Task::sums_rotating: return "sums_rotating";
        case Task::differences_rotating: return "differences_rotating";
        case Task::symmetry_reflections: return "symmetry_reflections";
    }
    return "forming_angles";
}

Setting setting_from_string(const std::string& s) {
    if (s == "A") return Setting::A;
    if (s == "B") return Setting::B;
    throw ValidationError("unknown setting: " + s + " (expected A or B)");
}

Task task_from_string(const std::string& s) {
    if (s == "forming_angles") return Task::forming_angles;
    if (s == "sums_rotating") return Task::sums_rotating;
    if (s == "differences_rotating") return Task::differences_rotating;
    if (s == "symmetry_reflections") return Task::symmetry_reflections;
    throw ValidationError("unknown task: " + s);
}

void validate_sequence(const SkeletonSequence& seq) {
    if (seq.frames.size() < 2) {
        throw ValidationError("sequence must have at least 2 frames, got " +
                              std::to_string(seq.frames.size()));
    }
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        const Frame& f = seq.frames[t];
        if (!std::isfinite(f.time_s) || f.time_s < 0.0) {
            throw ValidationError("frame " + std::to_string(t) + ": bad timestamp");
        }
        if (t > 0 && !(f.time_s > seq.frames[t - 1].time_s)) {
            throw ValidationError("frame " + std::to_string(t) +
                                  ": timestamps not strictly increasing");
        }
        for (int j = 0; j < joint_count; ++j) {
            if (!f.positions[j].allFinite()) {
                throw ValidationError("frame " + std::to_string(t) + ": non-finite position for " +
                                      joint_names()[j]);
            }
        }
    }
}

void validate_track(const AnnotationTrack& track) {
    for (std::size_t i = 0; i < track.intervals.size(); ++i) {
        const auto& iv = track.intervals[i];
        if (!(iv.onset_s < iv.offset_s)) {
            std::ostringstream os;
            os << "interval " << i << ": onset " << iv.onset_s << " >= offset " << iv.offset_s;
            throw ValidationError(os.str());
        }
        if (i > 0 && track.intervals[i - 1].offset_s > iv.onset_s) {
            std::ostringstream os;
            os << "intervals " << i - 1 << " and " << i << " overlap";
            throw ValidationError(os.str());
        }
    }
}

std::vector<bool> labels_per_frame(const SkeletonSequence& seq, const AnnotationTrack& track) {
    validate_sequence(seq);
    validate_track(track);
    const double first = seq.frames.front().time_s;
    const double last = seq.frames.back().time_s;
    const double tol = 1.0 / seq.nominal_rate;
    for (std::size_t i = 0; i < track.intervals.size(); ++i) {
        const auto& iv = track.intervals[i];
        if (iv.onset_s < first - tol || iv.offset_s > last + tol) {
            std::ostringstream os;
            os << "interval " << i << " [" << iv.onset_s << ", " << iv.offset_s
               << ") outside sequence span [" << first << ", " << last << "] beyond tolerance";
            throw ValidationError(os.str());
        }
    }
    std::vector<bool> labels(seq.frames.size(), false);
    std::size_t k = 0;  // intervals are sorted; sweep once
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        const double ts = seq.frames[t].time_s;
        while (k < track.intervals.size() && track.intervals[k].offset_s <= ts) ++k;
        if (k < track.intervals.size() && track.intervals[k].onset_s <= ts) {
            labels[t] = true;
        }
    }
    return labels;
}

Eigen::Matrix<double, major_joint_count, 3> select_major_joints(const Frame& frame) {
    Eigen::Matrix<double, major_joint_count, 3> out;
    const auto& joints = major_joints();
    for (int i = 0; i < major_joint_count; ++i) {
        out.row(i) = frame.at(joints[i]).transpose();
    }
    return out;
}

}  // namespace rtmocap
