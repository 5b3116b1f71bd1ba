// Per-candidate grasp evaluation: proximity ray, standoff poses, camera
// placement for both image/grasp mappings, finger closing, and the
// force-closure stability proxy. Emits attempt outcomes plus the grasp
// records (contacts in camera frame, frame set, object properties) for every
// success.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graspgen/candidates.hpp"
#include "graspgen/hand.hpp"
#include "graspgen/mesh.hpp"
#include "graspgen/scene.hpp"
#include "graspgen/transform.hpp"

namespace graspgen {

enum class CameraMapping { one_to_one, one_to_many };

const char* mapping_name(CameraMapping m);  // "oto" / "otm"
CameraMapping mapping_from_name(const std::string& name);

struct CameraPoseResult {
    Transform pose;
    bool degenerate_roll_fallback = false;  // otm axis within 1 deg of vertical
};

// Camera origin 0.25 m behind the palm along the approach axis. one_to_one
// copies the gripper orientation bitwise; one_to_many keeps the optical axis
// and rolls so the image up-vector is the world +Z projected into the image
// plane.
CameraPoseResult camera_pose(const Transform& gripper, CameraMapping mapping,
                             double offset = 0.25);

struct ProximityHit {
    Vec3 point;
    Vec3 normal;
    double distance;
};

// Palm-normal ray against the real mesh, nearest hit within max_range.
std::optional<ProximityHit> proximity_ray(const Transform& pose, const TriMesh& mesh,
                                          double max_range = 0.5);

// Grasp poses at the standoff distances, same orientation, origins backed off
// from the detected surface point along the approach vector.
std::array<Transform, 3> standoff_poses(const Vec3& hit_point, const Vec3& palm_normal,
                                        const Rotation& base_orientation,
                                        const std::array<double, 3>& distances = {0.06, 0.09,
                                                                                  0.12});

struct ForceClosureResult {
    bool closure = false;
    bool degenerate = false;  // coincident contacts or missing fingers
};

// Friction cones linearized into `facets` edge wrenches (torque normalized by
// the largest contact radius about the COM); closure iff the origin is
// strictly interior to the wrench hull, tested as rank 6 plus a strictly
// positive zero combination found by LP.
ForceClosureResult force_closure(const ContactSet& contacts, double mu, int facets,
                                 const Vec3& com);

enum class AttemptOutcome { collision, missed_proximity, missed_contact, unstable, success };

const char* outcome_name(AttemptOutcome o);

struct GraspAttempt {
    std::uint64_t candidate_id = 0;
    int attempt_index = 0;  // 0 = proximity pose, 1..3 = standoffs
    Transform gripper_in_world;
    Transform camera_oto_in_world;
    Transform camera_otm_in_world;
    bool otm_roll_fallback = false;
    AttemptOutcome outcome = AttemptOutcome::collision;
};

// The seven dataset reference frames (workspace == table-top frame {T}).
struct FrameSet {
    Transform cam2img_otm;   // image-plane frame in otm camera coordinates
    Transform cam2work_otm;  // workspace frame in camera coordinates
    Transform cam2work_oto;
    Transform work2cam_otm;  // camera frame in workspace coordinates
    Transform work2cam_oto;
    Transform world2obj;     // object frame in world coordinates
    Transform world2work;    // workspace frame in world coordinates
};

struct ObjectProps {
    std::string object_name;
    Vec3 work2com{};                  // COM in {T}
    Mat3 work2inertia{};              // inertia about the COM, {T} axes
    double work2mass = 1.0;
};

// One dataset row (geometry only; images are rendered by the pipeline).
struct GraspRecord {
    std::string object_name;
    std::uint64_t candidate_id = 0;
    int attempt_index = 0;
    CameraMapping mapping = CameraMapping::one_to_one;
    std::array<double, 18> grasp{};  // [p1 p2 p3 n1 n2 n3], camera frame
    bool success = true;
    FrameSet frames;
    ObjectProps props;
    Transform gripper_in_world;   // grasp-time wrist pose (metadata)
    Transform camera_in_world;    // the mapping's camera pose
};

struct SimParams {
    double friction = 0.71;
    int cone_facets = 8;
    std::array<double, 3> standoff_distances = {0.06, 0.09, 0.12};
    double proximity_range = 0.5;
    double camera_offset = 0.25;
    double camera_fov_deg = 50.0;
    std::vector<CameraMapping> mappings = {CameraMapping::one_to_many,
                                           CameraMapping::one_to_one};
};

struct CandidateEvaluation {
    std::vector<GraspAttempt> attempts;
    std::vector<GraspRecord> records;  // one per success per mapping
};

// Full flow for one candidate: collision prefilter, proximity ray, up to four
// attempts (ray pose + three standoffs), closing, stability. Geometry errors
// inside one attempt mark that attempt and do not abort the rest.
CandidateEvaluation evaluate_candidate(const GraspCandidate& candidate,
                                       const TriMesh& mesh_in_object, const ObjectPose& pose,
                                       const SceneConfig& scene, const HandModel& hand,
                                       const MassProperties& mass, const SimParams& params);

}  // namespace graspgen
