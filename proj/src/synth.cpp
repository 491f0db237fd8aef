#include "rtmocap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "rtmocap/rng.hpp"

namespace rtmocap {

namespace {

constexpr double two_pi = 6.283185307179586476925286766559;

// Standing child-sized pose, metres, y up.
std::array<Eigen::Vector3d, joint_count> base_pose() {
    std::array<Eigen::Vector3d, joint_count> p{};
    auto set = [&p](JointId j, double x, double y, double z) {
        p[static_cast<int>(j)] = Eigen::Vector3d(x, y, z);
    };
    set(JointId::spine_base, 0.00, 0.85, 0.00);
    set(JointId::spine_mid, 0.00, 1.05, 0.00);
    set(JointId::spine_shoulder, 0.00, 1.25, 0.00);
    set(JointId::neck, 0.00, 1.30, 0.00);
    set(JointId::head, 0.00, 1.42, 0.00);
    set(JointId::l_shoulder, -0.16, 1.25, 0.00);
    set(JointId::l_elbow, -0.22, 1.02, 0.02);
    set(JointId::l_wrist, -0.25, 0.82, 0.05);
    set(JointId::l_hand, -0.26, 0.77, 0.06);
    set(JointId::r_shoulder, 0.16, 1.25, 0.00);
    set(JointId::r_elbow, 0.22, 1.02, 0.02);
    set(JointId::r_wrist, 0.25, 0.82, 0.05);
    set(JointId::r_hand, 0.26, 0.77, 0.06);
    set(JointId::l_hip, -0.09, 0.82, 0.00);
    set(JointId::l_knee, -0.10, 0.45, 0.01);
    set(JointId::l_ankle, -0.10, 0.08, 0.00);
    set(JointId::l_foot, -0.10, 0.02, 0.08);
    set(JointId::r_hip, 0.09, 0.82, 0.00);
    set(JointId::r_knee, 0.10, 0.45, 0.01);
    set(JointId::r_ankle, 0.10, 0.08, 0.00);
    set(JointId::r_foot, 0.10, 0.02, 0.08);
    set(JointId::l_hand_tip, -0.27, 0.72, 0.07);
    set(JointId::l_thumb, -0.23, 0.75, 0.08);
    set(JointId::r_hand_tip, 0.27, 0.72, 0.07);
    set(JointId::r_thumb, 0.23, 0.75, 0.08);
    return p;
}

// Smooth 0->1->0 bump over [0,1].
double bump(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return 0.5 * (1.0 - std::cos(two_pi * u));
}

void add_jitter(std::array<Eigen::Vector3d, joint_count>& pose, Rng& rng, double sigma) {
    for (auto& p : pose) {
        p.x() += sigma * rng.gaussian();
        p.y() += sigma * rng.gaussian();
        p.z() += sigma * rng.gaussian();
    }
}

}  // namespace

SynthResult synth_sequence(SynthClass cls, double duration_s, std::uint64_t seed,
                           const std::string& child_id, Setting setting, Task task) {
    if (duration_s < 2.0) {
        throw ValidationError("synthetic duration must be at least 2 s");
    }
    const double rate = 30.0;
    const int n_frames = std::max(2, static_cast<int>(std::llround(duration_s * rate)));

    Rng rng(Rng::mix(seed, 0x53594e5448ULL));  // "SYNTH"
    const auto base = base_pose();

    // Per-sequence body placement and anthropometric wobble.
    const double offset_x = 0.5 * (rng.uniform() - 0.5);
    const double offset_z = 0.5 * (rng.uniform() - 0.5);
    const double phase = two_pi * rng.uniform();
    const double freq = 0.8 + 0.4 * rng.uniform();  // Hz, motion class

    SynthResult result;
    result.sequence.child_id = child_id;
    result.sequence.setting = setting;
    result.sequence.task = task;
    result.sequence.nominal_rate = rate;
    result.sequence.frames.reserve(static_cast<std::size_t>(n_frames));

    // Hand-to-head approach window for the pause class: one 2 s reach
    // somewhere in the middle of the span.
    const double reach_start =
        0.2 * duration_s + 0.4 * duration_s * rng.uniform();
    const double reach_len = 2.0;
    const Eigen::Vector3d head = base[static_cast<int>(JointId::head)];

    for (int t = 0; t < n_frames; ++t) {
        const double time = static_cast<double>(t) / rate;
        Frame frame;
        frame.time_s = time;
        auto pose = base;

        if (cls == SynthClass::motion_rich) {
            const double s = std::sin(two_pi * freq * time + phase);
            const double c = std::cos(two_pi * freq * time + phase);
            auto swing = [&pose](JointId j, const Eigen::Vector3d& d) {
                pose[static_cast<int>(j)] += d;
            };
            // Arms swing in opposition, forearms lead.
            swing(JointId::l_hand, Eigen::Vector3d(0.0, 0.18 * s, 0.25 * s));
            swing(JointId::l_hand_tip, Eigen::Vector3d(0.0, 0.18 * s, 0.25 * s));
            swing(JointId::l_thumb, Eigen::Vector3d(0.0, 0.18 * s, 0.25 * s));
            swing(JointId::l_wrist, Eigen::Vector3d(0.0, 0.16 * s, 0.22 * s));
            swing(JointId::l_elbow, Eigen::Vector3d(0.0, 0.08 * s, 0.10 * s));
            swing(JointId::r_hand, Eigen::Vector3d(0.0, -0.18 * s, -0.25 * s));
            swing(JointId::r_hand_tip, Eigen::Vector3d(0.0, -0.18 * s, -0.25 * s));
            swing(JointId::r_thumb, Eigen::Vector3d(0.0, -0.18 * s, -0.25 * s));
            swing(JointId::r_wrist, Eigen::Vector3d(0.0, -0.16 * s, -0.22 * s));
            swing(JointId::r_elbow, Eigen::Vector3d(0.0, -0.08 * s, -0.10 * s));
            // Knees and trunk sway gently.
            swing(JointId::l_knee, Eigen::Vector3d(0.04 * c, 0.0, 0.05 * s));
            swing(JointId::r_knee, Eigen::Vector3d(-0.04 * c, 0.0, -0.05 * s));
            swing(JointId::spine_mid, Eigen::Vector3d(0.02 * s, 0.0, 0.0));
            swing(JointId::spine_shoulder, Eigen::Vector3d(0.03 * s, 0.0, 0.0));
            swing(JointId::neck, Eigen::Vector3d(0.03 * s, 0.0, 0.0));
            swing(JointId::head, Eigen::Vector3d(0.035 * s, 0.0, 0.01 * c));
            add_jitter(pose, rng, 2e-4);
        } else {
            // Near-still: only sensor-scale jitter, except one slow reach of
            // the right hand toward the head.
            const double u = (time - reach_start) / reach_len;
            const double b = bump(u);
            if (b > 0.0) {
                const Eigen::Vector3d target = head + Eigen::Vector3d(0.05, -0.05, 0.04);
                for (JointId j : {JointId::r_hand, JointId::r_hand_tip, JointId::r_thumb}) {
                    auto& p = pose[static_cast<int>(j)];
                    p = p + b * (target - p);
                }
                auto& wrist = pose[static_cast<int>(JointId::r_wrist)];
                wrist = wrist + 0.9 * b * (target + Eigen::Vector3d(0.0, -0.06, 0.0) - wrist);
                auto& elbow = pose[static_cast<int>(JointId::r_elbow)];
                elbow = elbow + 0.4 * b * (target + Eigen::Vector3d(0.08, -0.25, 0.0) - elbow);
            }
            add_jitter(pose, rng, 1e-4);
        }

        for (auto& p : pose) {
            p.x() += offset_x;
            p.z() += offset_z;
        }
        frame.positions = pose;
        result.sequence.frames.push_back(std::move(frame));
    }

    if (cls == SynthClass::pause_rich) {
        // Whole span is reflective thinking; offset just past the last frame
        // keeps every frame inside the half-open interval.
        AnnotationInterval iv;
        iv.onset_s = result.sequence.frames.front().time_s;
        iv.offset_s = result.sequence.frames.back().time_s + 0.5 / rate;
        result.track.intervals.push_back(iv);
    }
    result.track.rater_id = "r1";
    return result;
}

DatasetManifest synth_dataset(const SynthDatasetConfig& config,
                              const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    DatasetManifest manifest;
    const std::array<Task, 4> tasks = {Task::forming_angles, Task::sums_rotating,
                                       Task::differences_rotating, Task::symmetry_reflections};

    int child_index = 0;
    auto emit_child = [&](Setting setting) {
        char name[16];
        std::snprintf(name, sizeof(name), "child%02d", child_index);
        const std::string child_id = name;
        for (int s = 0; s < config.sequences_per_child; ++s) {
            const SynthClass cls = (s % 2 == 0) ? SynthClass::motion_rich : SynthClass::pause_rich;
            const Task task = tasks[static_cast<std::size_t>(s) % tasks.size()];
            const std::uint64_t seq_seed =
                Rng::mix(config.seed, Rng::mix(static_cast<std::uint64_t>(child_index),
                                               static_cast<std::uint64_t>(s)));
            SynthResult r =
                synth_sequence(cls, config.duration_s, seq_seed, child_id, setting, task);

            const std::string stem = child_id + "_seq" + std::to_string(s);
            ManifestEntry entry;
            entry.sequence = out_dir / (stem + ".csv");
            entry.child_id = child_id;
            entry.setting = setting;
            entry.task = task;
            write_sequence(r.sequence, entry.sequence);

            const auto ann_path = out_dir / (stem + "_r1.csv");
            write_annotations(r.track, ann_path);
            entry.annotations.push_back(ann_path);

            if (config.two_raters) {
                // Second rater agrees on every episode but marks edges late/early.
                AnnotationTrack r2;
                r2.rater_id = "r2";
                Rng jitter(Rng::mix(seq_seed, 0x5232ULL));
                const double first = r.sequence.frames.front().time_s;
                const double last = r.sequence.frames.back().time_s;
                for (const auto& iv : r.track.intervals) {
                    AnnotationInterval jv = iv;
                    jv.onset_s = std::clamp(iv.onset_s + 0.4 * jitter.uniform(), first, last - 0.2);
                    const double lo = jv.onset_s + 0.1;
                    jv.offset_s = std::clamp(iv.offset_s - 0.4 * jitter.uniform(), lo, last);
                    r2.intervals.push_back(jv);
                }
                const auto r2_path = out_dir / (stem + "_r2.csv");
                write_annotations(r2, r2_path);
                entry.annotations.push_back(r2_path);
            }
            manifest.entries.push_back(std::move(entry));
        }
        ++child_index;
    };

    for (int c = 0; c < config.children_a; ++c) emit_child(Setting::A);
    for (int c = 0; c < config.children_b; ++c) emit_child(Setting::B);

    save_manifest(manifest, out_dir / "manifest.json");
    return load_manifest(out_dir / "manifest.json");
}

}  // namespace rtmocap
