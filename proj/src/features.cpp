#include "rtmocap/features.hpp"

#include <algorithm>
#include <cmath>

#include "rtmocap/errors.hpp"

namespace rtmocap {

const std::array<std::string, feature_count>& feature_names() {
    static const std::array<std::string, feature_count> names = {
        "head_twist",
        "head_flexion",
        "trunk_flexion_left",
        "trunk_flexion_right",
        "pos_energy_head",
        "pos_energy_l_hand",
        "pos_energy_r_hand",
        "pos_energy_l_knee",
        "pos_energy_r_knee",
        "ang_energy_neck",
        "ang_energy_l_shoulder",
        "ang_energy_r_shoulder",
        "ang_energy_l_elbow",
        "ang_energy_r_elbow",
        "ang_energy_l_hip",
        "ang_energy_r_hip",
        "ang_energy_l_knee",
        "ang_energy_r_knee",
        "hand_head_distance",
        "range_neck",
        "range_shoulder",
        "range_elbow",
        "range_hip",
        "range_knee",
        "amount_head",
        "amount_l_hand",
        "amount_r_hand",
        "amount_l_knee",
        "amount_r_knee",
    };
    return names;
}

const std::array<AngleTriplet, 9>& angle_triplets() {
    static const std::array<AngleTriplet, 9> triplets = {{
        {JointId::head, JointId::neck, JointId::spine_shoulder},       // neck
        {JointId::spine_shoulder, JointId::l_shoulder, JointId::l_elbow},
        {JointId::spine_shoulder, JointId::r_shoulder, JointId::r_elbow},
        {JointId::l_shoulder, JointId::l_elbow, JointId::l_hand},
        {JointId::r_shoulder, JointId::r_elbow, JointId::r_hand},
        {JointId::spine_base, JointId::l_hip, JointId::l_knee},
        {JointId::spine_base, JointId::r_hip, JointId::r_knee},
        {JointId::l_hip, JointId::l_knee, JointId::l_ankle},
        {JointId::r_hip, JointId::r_knee, JointId::r_ankle},
    }};
    return triplets;
}

double angle_between(const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu <= geometry_epsilon || nv <= geometry_epsilon) {
        throw DegenerateGeometryError("degenerate bone vector (norm " +
                                      std::to_string(std::min(nu, nv)) + " m)");
    }
    return std::atan2(u.cross(v).norm(), u.dot(v));
}

double joint_angle(const Frame& frame, const AngleTriplet& t) {
    const Eigen::Vector3d a = frame.at(t.ray_a) - frame.at(t.vertex);
    const Eigen::Vector3d b = frame.at(t.ray_b) - frame.at(t.vertex);
    try {
        return angle_between(a, b);
    } catch (const DegenerateGeometryError&) {
        throw DegenerateGeometryError(
            "degenerate joint angle at vertex " +
            joint_names()[static_cast<int>(t.vertex)] + " (rays " +
            joint_names()[static_cast<int>(t.ray_a)] + ", " +
            joint_names()[static_cast<int>(t.ray_b)] + ")");
    }
}

Eigen::Vector4d posture_angles(const Frame& f) {
    const Eigen::Vector3d head_neck = f.at(JointId::head) - f.at(JointId::neck);
    const Eigen::Vector3d shoulders = f.at(JointId::l_shoulder) - f.at(JointId::r_shoulder);
    const Eigen::Vector3d spine = f.at(JointId::spine_mid) - f.at(JointId::spine_base);
    const Eigen::Vector3d upper_spine = f.at(JointId::spine_shoulder) - f.at(JointId::spine_mid);
    const Eigen::Vector3d base_lhip = f.at(JointId::spine_base) - f.at(JointId::l_hip);
    const Eigen::Vector3d base_rhip = f.at(JointId::spine_base) - f.at(JointId::r_hip);
    Eigen::Vector4d out;
    out[0] = angle_between(head_neck, shoulders);
    out[1] = angle_between(head_neck, spine);
    out[2] = angle_between(upper_spine, base_lhip);
    out[3] = angle_between(upper_spine, base_rhip);
    return out;
}

double positional_energy(const Frame& prev, const Frame& cur, JointId joint) {
    return 0.5 * (cur.at(joint) - prev.at(joint)).squaredNorm();
}

double angular_energy(const Frame& prev, const Frame& cur, const AngleTriplet& t) {
    const double da = joint_angle(cur, t) - joint_angle(prev, t);
    return 0.5 * da * da;
}

double hand_head_distance(const Frame& f) {
    const double dl = (f.at(JointId::head) - f.at(JointId::l_hand)).norm();
    const double dr = (f.at(JointId::head) - f.at(JointId::r_hand)).norm();
    return std::min(dl, dr);
}

namespace {
void check_window(const WindowParams& w) {
    if (w.k < 2 || w.k % 2 != 0) {
        throw ValidationError("window k must be even and >= 2, got " + std::to_string(w.k));
    }
}
}  // namespace

double range_of_movement(std::span<const double> angles, int t, const WindowParams& w) {
    check_window(w);
    const int last = static_cast<int>(angles.size()) - 1;
    const int lo = std::max(0, t - w.k / 2);
    const int hi = std::min(last, t + w.k / 2);
    return angles[static_cast<std::size_t>(hi)] - angles[static_cast<std::size_t>(lo)];
}

double amount_of_movement(std::span<const Eigen::Vector3d> positions, int t,
                          const WindowParams& w) {
    check_window(w);
    const int last = static_cast<int>(positions.size()) - 1;
    const int lo = std::max(0, t - w.k / 2);
    const int hi = std::min(last, t + w.k / 2);
    double path = 0.0;
    for (int l = lo + 1; l <= hi; ++l) {
        path += (positions[static_cast<std::size_t>(l)] -
                 positions[static_cast<std::size_t>(l - 1)])
                    .norm();
    }
    return path;
}

Eigen::MatrixXd extract_features(std::span<const Frame> frames, const WindowParams& w) {
    check_window(w);
    const int n = static_cast<int>(frames.size());
    if (n < 2) {
        throw ValidationError("feature extraction requires a period of at least 2 frames");
    }

    // Joints tracked positionally (energy and amount of movement).
    static constexpr std::array<JointId, 5> tracked = {
        JointId::head, JointId::l_hand, JointId::r_hand, JointId::l_knee, JointId::r_knee};

    const auto& triplets = angle_triplets();

    // Per-frame angle series for the 9 triplets, and step norms + prefix path
    // lengths for the 5 tracked joints.
    std::vector<std::array<double, 9>> angles(static_cast<std::size_t>(n));
    std::vector<std::array<double, 5>> path_prefix(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
        const Frame& f = frames[static_cast<std::size_t>(t)];
        for (std::size_t a = 0; a < triplets.size(); ++a) {
            try {
                angles[static_cast<std::size_t>(t)][a] = joint_angle(f, triplets[a]);
            } catch (const DegenerateGeometryError& e) {
                throw DegenerateGeometryError("frame " + std::to_string(t) + ": " + e.what());
            }
        }
        for (std::size_t j = 0; j < tracked.size(); ++j) {
            double step = 0.0;
            if (t > 0) {
                step = (f.at(tracked[j]) -
                        frames[static_cast<std::size_t>(t - 1)].at(tracked[j]))
                           .norm();
            }
            path_prefix[static_cast<std::size_t>(t)][j] =
                (t > 0 ? path_prefix[static_cast<std::size_t>(t - 1)][j] : 0.0) + step;
        }
    }

    const int half = w.k / 2;
    Eigen::MatrixXd out(n, feature_count);
    for (int t = 0; t < n; ++t) {
        const Frame& f = frames[static_cast<std::size_t>(t)];
        Eigen::Vector4d posture;
        try {
            posture = posture_angles(f);
        } catch (const DegenerateGeometryError& e) {
            throw DegenerateGeometryError("frame " + std::to_string(t) + ": " + e.what());
        }
        out(t, 0) = posture[0];
        out(t, 1) = posture[1];
        out(t, 2) = posture[2];
        out(t, 3) = posture[3];

        for (std::size_t j = 0; j < tracked.size(); ++j) {
            double e = 0.0;
            if (t > 0) {
                e = positional_energy(frames[static_cast<std::size_t>(t - 1)], f, tracked[j]);
            }
            out(t, 4 + static_cast<int>(j)) = e;
        }

        for (std::size_t a = 0; a < triplets.size(); ++a) {
            double e = 0.0;
            if (t > 0) {
                const double da = angles[static_cast<std::size_t>(t)][a] -
                                  angles[static_cast<std::size_t>(t - 1)][a];
                e = 0.5 * da * da;
            }
            out(t, 9 + static_cast<int>(a)) = e;
        }

        out(t, 18) = hand_head_distance(f);

        const int lo = std::max(0, t - half);
        const int hi = std::min(n - 1, t + half);
        auto range_of = [&](int a) {
            return angles[static_cast<std::size_t>(hi)][static_cast<std::size_t>(a)] -
                   angles[static_cast<std::size_t>(lo)][static_cast<std::size_t>(a)];
        };
        out(t, 19) = range_of(0);                            // neck
        out(t, 20) = 0.5 * (range_of(1) + range_of(2));      // shoulders
        out(t, 21) = 0.5 * (range_of(3) + range_of(4));      // elbows
        out(t, 22) = 0.5 * (range_of(5) + range_of(6));      // hips
        out(t, 23) = 0.5 * (range_of(7) + range_of(8));      // knees

        for (std::size_t j = 0; j < tracked.size(); ++j) {
            out(t, 24 + static_cast<int>(j)) =
                path_prefix[static_cast<std::size_t>(hi)][j] -
                path_prefix[static_cast<std::size_t>(lo)][j];
        }
    }
    return out;
}

}  // namespace rtmocap
