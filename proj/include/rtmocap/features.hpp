#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rtmocap/skeleton.hpp"

namespace rtmocap {

inline constexpr int feature_count = 29;
inline constexpr double geometry_epsilon = 1e-9;  // metres, bone-norm threshold

// Canonical column names for the 29-feature matrix, frozen for serialization.
const std::array<std::string, feature_count>& feature_names();

// (ray_a - vertex) and (ray_b - vertex) span the inter-bone angle.
struct AngleTriplet {
    JointId ray_a;
    JointId vertex;
    JointId ray_b;
};

// The nine joint-angle triplets used by the angular-energy and
// range-of-movement features: neck, l/r shoulder, l/r elbow, l/r hip,
// l/r knee, in that order.
const std::array<AngleTriplet, 9>& angle_triplets();

struct WindowParams {
    int k = 120;  // frames, even, >= 2; indices clamp to the period bounds
};

// Inter-bone angle in [0, pi] as atan2(|u x v|, u . v). Symmetric and
// scale-invariant; the two-argument form keeps anti-parallel bones at pi.
// Throws DegenerateGeometryError when either norm is below the threshold.
double angle_between(const Eigen::Vector3d& u, const Eigen::Vector3d& v);

double joint_angle(const Frame& frame, const AngleTriplet& triplet);

// Features 1-4: head twist, head flexion, trunk flexion left/right.
Eigen::Vector4d posture_angles(const Frame& frame);

// Squared displacement halved; 0 by definition at the first frame of a period.
double positional_energy(const Frame& prev, const Frame& cur, JointId joint);

// Squared angle change halved.
double angular_energy(const Frame& prev, const Frame& cur, const AngleTriplet& triplet);

// Feature 19: min distance from head to either hand.
double hand_head_distance(const Frame& frame);

// Signed angle difference across the (clamped) window centred at t.
double range_of_movement(std::span<const double> angles, int t, const WindowParams& w);

// Path length of the joint over the (clamped) window centred at t.
double amount_of_movement(std::span<const Eigen::Vector3d> positions, int t,
                          const WindowParams& w);

// T x 29 matrix, one row per frame, columns in canonical order. Windowed
// features see only frames inside the period. Requires >= 2 frames.
Eigen::MatrixXd extract_features(std::span<const Frame> frames, const WindowParams& w = {});

}  // namespace rtmocap
