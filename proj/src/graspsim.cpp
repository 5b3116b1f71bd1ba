#include "graspgen/graspsim.hpp"

#include <cmath>
#include <stdexcept>

#include "graspgen/lp.hpp"

namespace graspgen {

const char* mapping_name(CameraMapping m) {
    return m == CameraMapping::one_to_one ? "oto" : "otm";
}

CameraMapping mapping_from_name(const std::string& name) {
    if (name == "oto") return CameraMapping::one_to_one;
    if (name == "otm") return CameraMapping::one_to_many;
    throw std::runtime_error("unknown camera mapping '" + name + "' (expected oto/otm)");
}

const char* outcome_name(AttemptOutcome o) {
    switch (o) {
        case AttemptOutcome::collision: return "collision";
        case AttemptOutcome::missed_proximity: return "missed_proximity";
        case AttemptOutcome::missed_contact: return "missed_contact";
        case AttemptOutcome::unstable: return "unstable";
        case AttemptOutcome::success: return "success";
    }
    return "?";
}

CameraPoseResult camera_pose(const Transform& gripper, CameraMapping mapping, double offset) {
    static const Vec3 axis_local{0.0, 0.0, 1.0};
    const Vec3 approach = gripper.rotation.apply(axis_local);

    CameraPoseResult out;
    out.pose.translation = gripper.translation - approach * offset;

    if (mapping == CameraMapping::one_to_one) {
        out.pose.rotation = gripper.rotation;  // bitwise copy
        return out;
    }

    // one-to-many: same optical axis, roll fixed so the image up-vector (-Y
    // of the camera frame) is world +Z projected into the image plane.
    const Vec3 world_up{0.0, 0.0, 1.0};
    const Vec3 up_in_plane = world_up - approach * dot(world_up, approach);
    const double sin_1deg = std::sin(deg_to_rad(1.0));
    if (norm(up_in_plane) < sin_1deg) {
        out.pose.rotation = gripper.rotation;
        out.degenerate_roll_fallback = true;
        return out;
    }
    const Vec3 y_cam = -normalized(up_in_plane);
    const Vec3 x_cam = cross(y_cam, approach);
    Rotation r;
    for (int i = 0; i < 3; ++i) {
        r.m(i, 0) = x_cam[i];
        r.m(i, 1) = y_cam[i];
        r.m(i, 2) = approach[i];
    }
    out.pose.rotation = r;
    return out;
}

std::optional<ProximityHit> proximity_ray(const Transform& pose, const TriMesh& mesh,
                                          double max_range) {
    static const Vec3 axis_local{0.0, 0.0, 1.0};
    const Vec3 dir = pose.rotation.apply(axis_local);
    const auto hit = raycast(mesh, pose.translation, dir, max_range);
    if (!hit) return std::nullopt;
    Vec3 n = hit->normal;
    if (dot(n, dir) > 0.0) n = -n;  // surface normal facing the sensor
    return ProximityHit{hit->point, n, hit->t};
}

std::array<Transform, 3> standoff_poses(const Vec3& hit_point, const Vec3& palm_normal,
                                        const Rotation& base_orientation,
                                        const std::array<double, 3>& distances) {
    std::array<Transform, 3> out;
    for (int i = 0; i < 3; ++i) {
        out[size_t(i)].rotation = base_orientation;
        out[size_t(i)].translation = hit_point - palm_normal * distances[size_t(i)];
    }
    return out;
}

namespace {

// Orthonormal tangent basis for a unit normal, deterministic branch.
void tangent_basis(const Vec3& n, Vec3& t1, Vec3& t2) {
    const Vec3 ref = std::fabs(n.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    t1 = normalized(cross(n, ref));
    t2 = cross(n, t1);
}

int matrix_rank(std::vector<double> m, int rows, int cols, double tol = 1e-9) {
    int rank = 0;
    for (int col = 0; col < cols && rank < rows; ++col) {
        int piv = -1;
        double best = tol;
        for (int r = rank; r < rows; ++r) {
            const double v = std::fabs(m[size_t(r) * size_t(cols) + size_t(col)]);
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (piv < 0) continue;
        for (int c = 0; c < cols; ++c)
            std::swap(m[size_t(rank) * size_t(cols) + size_t(c)],
                      m[size_t(piv) * size_t(cols) + size_t(c)]);
        const double d = m[size_t(rank) * size_t(cols) + size_t(col)];
        for (int r = rank + 1; r < rows; ++r) {
            const double f = m[size_t(r) * size_t(cols) + size_t(col)] / d;
            for (int c = col; c < cols; ++c)
                m[size_t(r) * size_t(cols) + size_t(c)] -= f * m[size_t(rank) * size_t(cols) + size_t(c)];
        }
        ++rank;
    }
    return rank;
}

}  // namespace

ForceClosureResult force_closure(const ContactSet& contacts, double mu, int facets,
                                 const Vec3& com) {
    ForceClosureResult out;
    if (contacts.count < 3 || mu <= 0.0 || facets < 4) {
        out.degenerate = contacts.count < 3;
        return out;
    }
    for (int i = 0; i < contacts.count; ++i) {
        for (int j = i + 1; j < contacts.count; ++j) {
            if (norm(contacts.position[size_t(i)] - contacts.position[size_t(j)]) < 1e-9) {
                out.degenerate = true;
                return out;
            }
        }
    }

    double torque_scale = 0.0;
    for (int i = 0; i < contacts.count; ++i)
        torque_scale = std::fmax(torque_scale, norm(contacts.position[size_t(i)] - com));
    if (torque_scale < 1e-12) {
        out.degenerate = true;
        return out;
    }

    // Edge wrenches of the linearized friction cones. Grasp forces push into
    // the surface, i.e. along the negated (outward) contact normal.
    const int m = contacts.count * facets;
    std::vector<double> w(size_t(6) * size_t(m));
    int idx = 0;
    for (int i = 0; i < contacts.count; ++i) {
        const Vec3 n_in = -normalized(contacts.normal[size_t(i)]);
        Vec3 t1, t2;
        tangent_basis(n_in, t1, t2);
        const Vec3 r = contacts.position[size_t(i)] - com;
        for (int k = 0; k < facets; ++k, ++idx) {
            const double phi = 2.0 * kPi * k / facets;
            const Vec3 f = normalized(n_in + (t1 * std::cos(phi) + t2 * std::sin(phi)) * mu);
            const Vec3 tau = cross(r, f) / torque_scale;
            w[size_t(0) * size_t(m) + size_t(idx)] = f.x;
            w[size_t(1) * size_t(m) + size_t(idx)] = f.y;
            w[size_t(2) * size_t(m) + size_t(idx)] = f.z;
            w[size_t(3) * size_t(m) + size_t(idx)] = tau.x;
            w[size_t(4) * size_t(m) + size_t(idx)] = tau.y;
            w[size_t(5) * size_t(m) + size_t(idx)] = tau.z;
        }
    }

    // A flat wrench set cannot contain the origin in its hull interior.
    if (matrix_rank(w, 6, m) < 6) return out;

    // LP: max eps  s.t.  sum_i lambda_i w_i = 0, sum lambda = 1,
    // lambda_i >= eps >= 0. Substituting mu_i = lambda_i - eps gives an
    // equality-form program over (mu, eps) >= 0.
    const int cols = m + 1;
    const int rows = 7;
    std::vector<double> a(size_t(rows) * size_t(cols), 0.0);
    std::vector<double> b(size_t(rows), 0.0);
    std::vector<double> c(size_t(cols), 0.0);
    for (int r = 0; r < 6; ++r) {
        double row_sum = 0.0;
        for (int j = 0; j < m; ++j) {
            const double v = w[size_t(r) * size_t(m) + size_t(j)];
            a[size_t(r) * size_t(cols) + size_t(j)] = v;
            row_sum += v;
        }
        a[size_t(r) * size_t(cols) + size_t(m)] = row_sum;
    }
    for (int j = 0; j < m; ++j) a[size_t(6) * size_t(cols) + size_t(j)] = 1.0;
    a[size_t(6) * size_t(cols) + size_t(m)] = double(m);
    b[6] = 1.0;
    c[size_t(m)] = 1.0;

    const LpResult lp = solve_lp_max(a, rows, cols, b, c);
    out.closure = lp.status == LpStatus::optimal && lp.objective > 1e-9;
    return out;
}

namespace {

// Conservative open-hand clearance test against the table plane: palm rim,
// knuckles, elbows and fingertips, padded by the finger thickness.
bool hand_hits_table(const Transform& gripper_w, const HandModel& hand, double table_z) {
    double min_z = gripper_w.translation.z;
    for (int s = 0; s < 8; ++s) {
        const double az = 2.0 * kPi * s / 8.0;
        const Vec3 rim = gripper_w.apply(
            Vec3{hand.palm_radius * std::cos(az), hand.palm_radius * std::sin(az), 0.0});
        min_z = std::fmin(min_z, rim.z);
    }
    for (int f = 0; f < 3; ++f) {
        const FingerSegments seg =
            finger_points_local(hand, f, hand.open_angle, hand.distal_angle);
        min_z = std::fmin(min_z, gripper_w.apply(seg.knuckle).z);
        min_z = std::fmin(min_z, gripper_w.apply(seg.elbow).z);
        min_z = std::fmin(min_z, gripper_w.apply(seg.tip).z);
    }
    return min_z < table_z + hand.finger_thickness;
}

// Palm disc vs mesh, same test close_fingers applies before sweeping.
bool palm_hits_mesh(const Transform& gripper, const HandModel& hand, const TriMesh& mesh) {
    if (point_inside(mesh, gripper.translation)) return true;
    for (int s = 0; s < 8; ++s) {
        const double az = 2.0 * kPi * s / 8.0;
        const Vec3 rim = gripper.apply(
            Vec3{hand.palm_radius * std::cos(az), hand.palm_radius * std::sin(az), 0.0});
        if (segment_hit(mesh, gripper.translation, rim)) return true;
    }
    return false;
}

Transform image_frame_in_camera(double fov_deg) {
    // Image-plane frame on the optical axis at the distance where the field
    // of view spans one meter; axes follow the camera.
    const double focal = 0.5 / std::tan(deg_to_rad(fov_deg) * 0.5);
    return Transform{Rotation::identity(), Vec3{0.0, 0.0, focal}};
}

}  // namespace

CandidateEvaluation evaluate_candidate(const GraspCandidate& candidate,
                                       const TriMesh& mesh_in_object, const ObjectPose& pose,
                                       const SceneConfig& scene, const HandModel& hand,
                                       const MassProperties& mass, const SimParams& params) {
    CandidateEvaluation out;

    const Transform& world_to_object = pose.world_to_object;
    const Transform& world_to_table = scene.world_to_table;
    const Transform table_to_world = invert(world_to_table);
    const double table_z = scene.table_z();

    // COM of the object expressed in {O} (mesh vertices are already there).
    const Vec3 com_o = mass.center_of_mass;

    const auto make_attempt = [&](int index, const Transform& gripper_o) {
        GraspAttempt att;
        att.candidate_id = candidate.candidate_id;
        att.attempt_index = index;
        att.gripper_in_world = compose(world_to_object, gripper_o);
        att.camera_oto_in_world =
            camera_pose(att.gripper_in_world, CameraMapping::one_to_one, params.camera_offset)
                .pose;
        const CameraPoseResult otm =
            camera_pose(att.gripper_in_world, CameraMapping::one_to_many, params.camera_offset);
        att.camera_otm_in_world = otm.pose;
        att.otm_roll_fallback = otm.degenerate_roll_fallback;
        return att;
    };

    // (1) Feasibility prefilter at the candidate pose.
    const Transform& cand_o = candidate.object_to_gripper;
    {
        GraspAttempt att = make_attempt(0, cand_o);
        if (hand_hits_table(att.gripper_in_world, hand, table_z) ||
            palm_hits_mesh(cand_o, hand, mesh_in_object)) {
            att.outcome = AttemptOutcome::collision;
            out.attempts.push_back(att);
            return out;
        }
    }

    // (2) Proximity ray: the palm must face the object.
    const auto prox = proximity_ray(cand_o, mesh_in_object, params.proximity_range);
    if (!prox) {
        GraspAttempt att = make_attempt(0, cand_o);
        att.outcome = AttemptOutcome::missed_proximity;
        out.attempts.push_back(att);
        return out;
    }

    // (3) The ray pose plus the three standoff poses.
    static const Vec3 axis_local{0.0, 0.0, 1.0};
    const Vec3 approach_o = cand_o.rotation.apply(axis_local);
    const auto standoffs =
        standoff_poses(prox->point, approach_o, cand_o.rotation, params.standoff_distances);
    std::array<Transform, 4> poses_o = {cand_o, standoffs[0], standoffs[1], standoffs[2]};

    for (int k = 0; k < 4; ++k) {
        GraspAttempt att = make_attempt(k, poses_o[size_t(k)]);
        try {
            if (hand_hits_table(att.gripper_in_world, hand, table_z)) {
                att.outcome = AttemptOutcome::collision;
                out.attempts.push_back(att);
                continue;
            }
            const CloseResult close =
                close_fingers(poses_o[size_t(k)], hand, mesh_in_object, ContactFrame::object);
            if (close.status == CloseStatus::palm_collision) {
                att.outcome = AttemptOutcome::collision;
                out.attempts.push_back(att);
                continue;
            }
            if (close.status == CloseStatus::missed_contact) {
                att.outcome = AttemptOutcome::missed_contact;
                out.attempts.push_back(att);
                continue;
            }
            const ForceClosureResult fc =
                force_closure(close.contacts, params.friction, params.cone_facets, com_o);
            if (!fc.closure) {
                att.outcome = AttemptOutcome::unstable;
                out.attempts.push_back(att);
                continue;
            }
            att.outcome = AttemptOutcome::success;
            out.attempts.push_back(att);

            // Shared per-sample frames and properties.
            FrameSet frames;
            frames.world2work = world_to_table;
            frames.world2obj = world_to_object;
            frames.work2cam_oto = compose(table_to_world, att.camera_oto_in_world);
            frames.work2cam_otm = compose(table_to_world, att.camera_otm_in_world);
            frames.cam2work_oto = invert(frames.work2cam_oto);
            frames.cam2work_otm = invert(frames.work2cam_otm);
            frames.cam2img_otm = image_frame_in_camera(params.camera_fov_deg);

            ObjectProps props;
            props.object_name = mesh_in_object.name;
            const Vec3 com_w = world_to_object.apply(com_o);
            props.work2com = table_to_world.apply(com_w);
            // {T} axes equal {W} axes here, but stay general: I_T = R I R^T.
            const Mat3 r_to = compose(table_to_world, world_to_object).rotation.m;
            props.work2inertia = r_to * mass.inertia * r_to.transposed();
            props.work2mass = mass.mass;

            for (const CameraMapping mapping : params.mappings) {
                const Transform& cam_w = mapping == CameraMapping::one_to_one
                                             ? att.camera_oto_in_world
                                             : att.camera_otm_in_world;
                const Transform cam_from_world = invert(cam_w);
                GraspRecord rec;
                rec.object_name = mesh_in_object.name;
                rec.candidate_id = candidate.candidate_id;
                rec.attempt_index = k;
                rec.mapping = mapping;
                rec.success = true;
                rec.frames = frames;
                rec.props = props;
                rec.gripper_in_world = att.gripper_in_world;
                rec.camera_in_world = cam_w;
                for (int f = 0; f < 3; ++f) {
                    const Vec3 p_w = world_to_object.apply(close.contacts.position[size_t(f)]);
                    const Vec3 p_c = cam_from_world.apply(p_w);
                    const Vec3 n_w = world_to_object.apply_dir(close.contacts.normal[size_t(f)]);
                    const Vec3 n_c = cam_from_world.apply_dir(n_w);
                    for (int d = 0; d < 3; ++d) {
                        rec.grasp[size_t(3 * f + d)] = p_c[d];
                        rec.grasp[size_t(9 + 3 * f + d)] = n_c[d];
                    }
                }
                out.records.push_back(rec);
            }
        } catch (const std::exception&) {
            // Geometry failure inside one attempt: mark it and keep going.
            att.outcome = AttemptOutcome::collision;
            out.attempts.push_back(att);
        }
    }
    return out;
}

}  // namespace graspgen
