// Three-finger precision-grasp hand: planar two-link fingers on a palm
// circle, fingertip forward kinematics, a damped-least-squares wrist pose
// solver, and the sweep-until-contact closing routine.
//
// Geometry (gripper frame, +Z = palm normal / approach axis): finger k mounts
// at radius palm_radius, azimuth base_angles[k], elevated knuckle_height off
// the palm plane. The proximal joint curls the chain from +Z toward the palm
// axis; the distal link keeps a fixed relative angle during closing. With
// everything at zero the fingertip sits knuckle_height + proximal + distal
// ahead of the palm (0.145 m for the defaults).
#pragma once

#include <array>
#include <optional>

#include "graspgen/mesh.hpp"
#include "graspgen/transform.hpp"

namespace graspgen {

struct HandModel {
    double palm_radius = 0.025;
    double proximal_length = 0.070;
    double distal_length = 0.058;
    double knuckle_height = 0.017;
    std::array<double, 3> base_angles = {deg_to_rad(90.0), deg_to_rad(210.0),
                                         deg_to_rad(330.0)};
    double open_angle = 0.0;                  // proximal angle at the start of a close
    double max_close_angle = deg_to_rad(140.0);
    double distal_angle = deg_to_rad(20.0);   // fixed distal curl during closing
    double close_step = deg_to_rad(0.5);
    double finger_thickness = 0.005;          // capsule radius for collision margins

    double palm_to_fingertip_reach() const {
        return knuckle_height + proximal_length + distal_length;
    }
    void validate() const;  // throws on non-positive links or duplicate mounts
};

struct FingerState {
    std::array<double, 3> proximal = {0.0, 0.0, 0.0};
    std::array<double, 3> distal = {0.0, 0.0, 0.0};
    double spread = 0.0;  // fixed at 0: cylindrical configuration

    static FingerState open_state(const HandModel& hand) {
        FingerState s;
        s.proximal = {hand.open_angle, hand.open_angle, hand.open_angle};
        s.distal = {hand.distal_angle, hand.distal_angle, hand.distal_angle};
        return s;
    }
};

enum class ContactFrame { object, world, camera };

// Fingertip contact positions and outward surface normals; the entire grasp
// description (no joint state is carried forward).
struct ContactSet {
    std::array<Vec3, 3> position{};
    std::array<Vec3, 3> normal{};
    int count = 0;
    ContactFrame frame = ContactFrame::object;
};

struct FingerSegments {
    Vec3 knuckle;
    Vec3 elbow;
    Vec3 tip;
};

// Chain points for finger k in the gripper frame. Spread swings fingers 0/1
// symmetrically about the palm normal; zero in the cylindrical configuration.
FingerSegments finger_points_local(const HandModel& hand, int finger, double proximal,
                                   double distal, double spread = 0.0);

// Fingertip positions in the wrist's parent frame. Throws when a joint is
// outside [open-2.5rad, max] limits.
std::array<Vec3, 3> fingertip_fk(const Transform& wrist, const FingerState& state,
                                 const HandModel& hand);

// --- Wrist-pose least squares -------------------------------------------

// Pose parameterization used by the solver: (alpha, beta, gamma, tx, ty, tz)
// with the rotation built as R_X R_Y R_Z.
using PoseParams = std::array<double, 6>;

Transform pose_from_params(const PoseParams& p);

struct IkResult {
    Transform pose;
    PoseParams params{};
    double residual = 0.0;  // sum of squared fingertip-to-target distances, m^2
    bool converged = false;
    int iterations = 0;
};

double ik_objective(const std::array<Vec3, 3>& targets, const HandModel& hand,
                    const FingerState& state, const PoseParams& p);

// Gradient of the objective assembled from the solver's numeric residual
// Jacobian (central differences, h = 1e-6); exposed so the Jacobian path can
// be validated against direct finite differences of the objective.
std::array<double, 6> ik_gradient(const std::array<Vec3, 3>& targets, const HandModel& hand,
                                  const FingerState& state, const PoseParams& p);

// Damped least squares (Levenberg-Marquardt) over the 6 pose parameters.
// Accepted steps never increase the objective; stops when the step norm
// drops below 1e-10 or after 200 iterations, whichever first.
IkResult solve_wrist_ik(const std::array<Vec3, 3>& targets, const HandModel& hand,
                        const FingerState& state, const PoseParams& init);

// --- Closing ---------------------------------------------------------------

enum class CloseStatus { ok, palm_collision, missed_contact };

struct CloseResult {
    CloseStatus status = CloseStatus::missed_contact;
    ContactSet contacts;
    std::array<double, 3> contact_angles{};  // proximal angle at first contact
};

// Sweeps each proximal joint from open toward closed in fixed steps, testing
// the distal segment against the mesh. Contact normal is the triangle normal
// oriented against the fingertip motion. Fails fast when the palm starts
// inside or across the mesh.
CloseResult close_fingers(const Transform& wrist, const HandModel& hand, const TriMesh& mesh,
                          ContactFrame frame_tag = ContactFrame::object);

}  // namespace graspgen
