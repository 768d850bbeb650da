/*
 * residuum - residual-limb termination for articulated body meshes.
 *
 * Copyright 2026 The residuum Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#ifndef RESIDUUM_SYNTH_HPP_
#define RESIDUUM_SYNTH_HPP_

#include "residuum/body_model.hpp"
#include "residuum/core_types.hpp"
#include "residuum/error.hpp"
#include "residuum/layout.hpp"
#include "residuum/meshedit.hpp"
#include "residuum/metrics.hpp"
#include "residuum/rafo.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace residuum {

// COCO-17 joint order of the synthetic skeleton.
enum SynthJoint : int {
    kNose = 0,
    kLeftEye,
    kRightEye,
    kLeftEar,
    kRightEar,
    kLeftShoulder,
    kRightShoulder,
    kLeftElbow,
    kRightElbow,
    kLeftWrist,
    kRightWrist,
    kLeftHip,
    kRightHip,
    kLeftKnee,
    kRightKnee,
    kLeftAnkle,
    kRightAnkle,
    kSynthJointCount
};

// Part labels of the synthetic body.
enum SynthPart : int {
    kTorso = 0,
    kHead,
    kLeftUpperArmPart,
    kLeftForearmPart,
    kLeftHand,
    kRightUpperArmPart,
    kRightForearmPart,
    kRightHand,
    kLeftThighPart,
    kLeftShankPart,
    kLeftFoot,
    kRightThighPart,
    kRightShankPart,
    kRightFoot,
    kSynthPartCount
};

inline const std::map<int, std::string>& synth_part_names()
{
    static const std::map<int, std::string> names = {
        {kTorso, "torso"},
        {kHead, "head"},
        {kLeftUpperArmPart, "left_upper_arm"},
        {kLeftForearmPart, "left_forearm"},
        {kLeftHand, "left_hand"},
        {kRightUpperArmPart, "right_upper_arm"},
        {kRightForearmPart, "right_forearm"},
        {kRightHand, "right_hand"},
        {kLeftThighPart, "left_thigh"},
        {kLeftShankPart, "left_shank"},
        {kLeftFoot, "left_foot"},
        {kRightThighPart, "right_thigh"},
        {kRightShankPart, "right_shank"},
        {kRightFoot, "right_foot"},
    };
    return names;
}

// BODY_25 slot of each COCO joint.
inline constexpr std::array<int, kSynthJointCount> kSynthBody25Slot = {0, 16, 15, 18, 17, 5, 2, 6, 3,
                                                                     7, 4,  12, 9,  13, 10, 14, 11};

// Anchor = distal joint of the segment, target = its upstream joint.
inline LimbTable synth_limb_table()
{
    auto entry = [](LimbId limb, int anchor, int target) {
        return std::pair<const LimbId, LimbJoints>(limb, LimbJoints{anchor, target, residual_slot(limb)});
    };
    return {
        entry(LimbId::LeftUpperArm, kLeftElbow, kLeftShoulder), entry(LimbId::LeftForearm, kLeftWrist, kLeftElbow),
        entry(LimbId::RightUpperArm, kRightElbow, kRightShoulder),
        entry(LimbId::RightForearm, kRightWrist, kRightElbow), entry(LimbId::LeftThigh, kLeftKnee, kLeftHip),
        entry(LimbId::LeftShank, kLeftAnkle, kLeftKnee), entry(LimbId::RightThigh, kRightKnee, kRightHip),
        entry(LimbId::RightShank, kRightAnkle, kRightKnee),
    };
}

inline LimbPartTable synth_limb_parts()
{
    return {
        {LimbId::LeftUpperArm, {{kLeftUpperArmPart}, {kLeftForearmPart, kLeftHand}}},
        {LimbId::LeftForearm, {{kLeftForearmPart}, {kLeftHand}}},
        {LimbId::RightUpperArm, {{kRightUpperArmPart}, {kRightForearmPart, kRightHand}}},
        {LimbId::RightForearm, {{kRightForearmPart}, {kRightHand}}},
        {LimbId::LeftThigh, {{kLeftThighPart}, {kLeftShankPart, kLeftFoot}}},
        {LimbId::LeftShank, {{kLeftShankPart}, {kLeftFoot}}},
        {LimbId::RightThigh, {{kRightThighPart}, {kRightShankPart, kRightFoot}}},
        {LimbId::RightShank, {{kRightShankPart}, {kRightFoot}}},
    };
}

/// Direction of one limb segment: in-plane angle away from straight down
/// (toward the body's own side) and out-of-plane angle toward the camera.
struct SegmentAngles {
    double in_plane = 0.0;
    double toward_camera = 0.0;
};

struct SynthBodySpec {
    // Bone lengths and radii, indexed by LimbId (the eight limb segments).
    std::array<double, kResidualSlots> segment_lengths = {0.30, 0.26, 0.30, 0.26, 0.44, 0.42, 0.44, 0.42};
    std::array<double, kResidualSlots> segment_radii = {0.05, 0.04, 0.05, 0.04, 0.08, 0.055, 0.08, 0.055};
    double hand_length = 0.18;
    double hand_radius = 0.035;
    double foot_length = 0.20;
    double foot_radius = 0.045;
    double head_radius = 0.09;
    int ring_resolution = 32;  // vertices per ring
    int axial_resolution = 24; // segments along each limb (rings - 1)
    std::array<SegmentAngles, kResidualSlots> pose_angles = {
        SegmentAngles{0.35, 0.10}, SegmentAngles{0.60, 0.30}, SegmentAngles{0.35, 0.10}, SegmentAngles{0.60, 0.30},
        SegmentAngles{0.10, 0.05}, SegmentAngles{0.05, -0.10}, SegmentAngles{0.10, 0.05}, SegmentAngles{0.05, -0.10},
    };
    double pose_jitter = 0.15; // uniform +- radians added to every angle, drawn from `seed`
    std::uint64_t seed = 0;

    void validate() const
    {
        auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
        for (std::size_t i = 0; i < kResidualSlots; ++i) {
            if (!positive(segment_lengths[i]) || !positive(segment_radii[i])) {
                throw Error(ErrorCode::InvalidArgument, "segment lengths and radii must be positive");
            }
        }
        if (!positive(hand_length) || !positive(hand_radius) || !positive(foot_length) || !positive(foot_radius) ||
            !positive(head_radius)) {
            throw Error(ErrorCode::InvalidArgument, "hand, foot and head sizes must be positive");
        }
        if (ring_resolution < 8 || axial_resolution < 4) {
            throw Error(ErrorCode::InvalidArgument, "ring_resolution >= 8 and axial_resolution >= 4 required");
        }
        if (!(pose_jitter >= 0.0) || !std::isfinite(pose_jitter)) {
            throw Error(ErrorCode::InvalidArgument, "pose_jitter must be non-negative");
        }
    }
};

namespace detail {

// Closed tube from p0 to p1: `rings` rings plus an apex at each end.
// Appends rings * segments + 2 vertices and 2 * segments * rings faces.
inline void append_capsule(std::vector<Vec3>& verts, std::vector<Face>& faces, std::vector<int>& labels, int label,
                           const Vec3& p0, const Vec3& p1, double radius, int segments, int rings)
{
    const int base = static_cast<int>(verts.size());
    const Vec3 axis = (p1 - p0).normalized();
    const Vec3 u = axis.unitOrthogonal();
    const Vec3 w = axis.cross(u);
    for (int k = 0; k < rings; ++k) {
        const Vec3 centre = p0 + (p1 - p0) * (static_cast<double>(k) / (rings - 1));
        for (int j = 0; j < segments; ++j) {
            const double a = 2.0 * std::numbers::pi * j / segments;
            verts.push_back(centre + radius * (std::cos(a) * u + std::sin(a) * w));
        }
    }
    const int apex0 = base + rings * segments;
    const int apex1 = apex0 + 1;
    verts.push_back(p0);
    verts.push_back(p1);
    auto at = [&](int k, int j) { return base + k * segments + (j % segments); };
    for (int k = 0; k + 1 < rings; ++k) {
        for (int j = 0; j < segments; ++j) {
            faces.push_back({at(k, j), at(k, j + 1), at(k + 1, j + 1)});
            faces.push_back({at(k, j), at(k + 1, j + 1), at(k + 1, j)});
        }
    }
    for (int j = 0; j < segments; ++j) {
        faces.push_back({apex0, at(0, j + 1), at(0, j)});
        faces.push_back({apex1, at(rings - 1, j), at(rings - 1, j + 1)});
    }
    labels.resize(verts.size(), label);
}

inline void append_box(std::vector<Vec3>& verts, std::vector<Face>& faces, std::vector<int>& labels, int label,
                       const Vec3& lo, const Vec3& hi)
{
    const int b = static_cast<int>(verts.size());
    for (int i = 0; i < 8; ++i) {
        verts.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
    }
    const std::array<Face, 12> f = {Face{0, 2, 1}, Face{1, 2, 3}, Face{4, 5, 6}, Face{5, 7, 6},
                                    Face{0, 1, 4}, Face{1, 5, 4}, Face{2, 6, 3}, Face{3, 6, 7},
                                    Face{0, 4, 2}, Face{2, 4, 6}, Face{1, 3, 5}, Face{3, 7, 5}};
    for (Face face : f) {
        for (int& v : face) {
            v += b;
        }
        faces.push_back(face);
    }
    labels.resize(verts.size(), label);
}

// World frame: y down, person's left at +x, camera looking along +z.
inline Vec3 segment_direction(const SegmentAngles& a, double side)
{
    return Vec3(side * std::sin(a.in_plane) * std::cos(a.toward_camera), std::cos(a.in_plane) * std::cos(a.toward_camera),
                -std::sin(a.toward_camera));
}

} // namespace detail

/// Body of capped cylinders on a torso box, 17-joint skeleton, deterministic in spec.seed.
inline BodyModel generate_body_model(const SynthBodySpec& spec)
{
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> jitter(-spec.pose_jitter, spec.pose_jitter);
    std::array<SegmentAngles, kResidualSlots> pose = spec.pose_angles;
    for (SegmentAngles& a : pose) {
        a.in_plane += jitter(rng);
        a.toward_camera += jitter(rng);
    }

    std::vector<Vec3> j(kSynthJointCount, Vec3::Zero());
    j[kNose] = Vec3(0, -0.20, -0.09);
    j[kLeftEye] = Vec3(0.035, -0.23, -0.075);
    j[kRightEye] = Vec3(-0.035, -0.23, -0.075);
    j[kLeftEar] = Vec3(0.08, -0.21, 0);
    j[kRightEar] = Vec3(-0.08, -0.21, 0);
    j[kLeftShoulder] = Vec3(0.2, 0, 0);
    j[kRightShoulder] = Vec3(-0.2, 0, 0);
    j[kLeftHip] = Vec3(0.1, 0.5, 0);
    j[kRightHip] = Vec3(-0.1, 0.5, 0);
    auto chain = [&](LimbId upper, LimbId lower, int root, int mid, int end, double side) {
        const int u = static_cast<int>(upper);
        const int l = static_cast<int>(lower);
        j[mid] = j[root] + spec.segment_lengths[u] * detail::segment_direction(pose[u], side);
        j[end] = j[mid] + spec.segment_lengths[l] * detail::segment_direction(pose[l], side);
    };
    chain(LimbId::LeftUpperArm, LimbId::LeftForearm, kLeftShoulder, kLeftElbow, kLeftWrist, 1.0);
    chain(LimbId::RightUpperArm, LimbId::RightForearm, kRightShoulder, kRightElbow, kRightWrist, -1.0);
    chain(LimbId::LeftThigh, LimbId::LeftShank, kLeftHip, kLeftKnee, kLeftAnkle, 1.0);
    chain(LimbId::RightThigh, LimbId::RightShank, kRightHip, kRightKnee, kRightAnkle, -1.0);

    const std::vector<int> parents = {-1,           kNose,         kNose,        kLeftEye,      kRightEye,
                                      kNose,        kNose,         kLeftShoulder, kRightShoulder, kLeftElbow,
                                      kRightElbow,  kLeftShoulder, kRightShoulder, kLeftHip,    kRightHip,
                                      kLeftKnee,    kRightKnee};

    std::vector<Vec3> verts;
    std::vector<Face> faces;
    std::vector<int> labels;
    const int seg = spec.ring_resolution;
    const int rings = spec.axial_resolution + 1;
    detail::append_box(verts, faces, labels, kTorso, Vec3(-0.17, -0.05, -0.1), Vec3(0.17, 0.55, 0.1));
    detail::append_capsule(verts, faces, labels, kHead, Vec3(0, -0.34, 0), Vec3(0, -0.08, 0), spec.head_radius, seg,
                           rings);
    auto limb = [&](int part, LimbId id, int from, int to) {
        const auto i = static_cast<std::size_t>(id);
        detail::append_capsule(verts, faces, labels, part, j[from], j[to], spec.segment_radii[i], seg, rings);
    };
    auto extremity = [&](int part, const Vec3& from, const Vec3& dir, double length, double radius) {
        detail::append_capsule(verts, faces, labels, part, from, from + length * dir.normalized(), radius, seg, rings);
    };
    limb(kLeftUpperArmPart, LimbId::LeftUpperArm, kLeftShoulder, kLeftElbow);
    limb(kLeftForearmPart, LimbId::LeftForearm, kLeftElbow, kLeftWrist);
    extremity(kLeftHand, j[kLeftWrist], j[kLeftWrist] - j[kLeftElbow], spec.hand_length, spec.hand_radius);
    limb(kRightUpperArmPart, LimbId::RightUpperArm, kRightShoulder, kRightElbow);
    limb(kRightForearmPart, LimbId::RightForearm, kRightElbow, kRightWrist);
    extremity(kRightHand, j[kRightWrist], j[kRightWrist] - j[kRightElbow], spec.hand_length, spec.hand_radius);
    limb(kLeftThighPart, LimbId::LeftThigh, kLeftHip, kLeftKnee);
    limb(kLeftShankPart, LimbId::LeftShank, kLeftKnee, kLeftAnkle);
    extremity(kLeftFoot, j[kLeftAnkle], Vec3(0, 0.2, -1), spec.foot_length, spec.foot_radius);
    limb(kRightThighPart, LimbId::RightThigh, kRightHip, kRightKnee);
    limb(kRightShankPart, LimbId::RightShank, kRightKnee, kRightAnkle);
    extremity(kRightFoot, j[kRightAnkle], Vec3(0, 0.2, -1), spec.foot_length, spec.foot_radius);

    BodyModel model;
    model.body = ArticulatedBody(TriangleMesh(std::move(verts), std::move(faces)),
                                 KinematicTree(std::move(j), parents), std::move(labels), synth_part_names());
    model.limb_table = synth_limb_table();
    model.limb_parts = synth_limb_parts();
    model.body25_slot.assign(kSynthBody25Slot.begin(), kSynthBody25Slot.end());
    model.validate();
    return model;
}

inline ArticulatedBody generate_body(const SynthBodySpec& spec) { return generate_body_model(spec).body; }

struct SynthCameraParams {
    double focal_px = 1000.0;
    int width = 512;
    int height = 512;
    double distance = 4.0; // camera-to-body-centre depth, meters
};

// How much of a scene to build; the cuts and the rasterization dominate the cost.
enum class SceneDetail { KeypointsOnly, Body, Full };

struct SynthScene {
    BodyModel model;                 // intact fitted body (the pipeline input)
    ArticulatedBody amputated_body;  // ground-truth body with the true cuts applied (intact for KeypointsOnly)
    PinholeCamera camera;
    std::map<LimbId, double> true_lambda;
    KeypointSet2D gt_keypoints;
    BinaryMask gt_mask; // empty (0x0) unless rendered
};

/// Camera looking along +z at the centre of the skeleton's bounding box.
inline PinholeCamera synth_camera(const KinematicTree& skeleton, const SynthCameraParams& params)
{
    Eigen::AlignedBox3d box;
    for (const Vec3& p : skeleton.joints()) {
        box.extend(p);
    }
    const Vec3 c = box.center();
    return PinholeCamera(params.focal_px, params.focal_px, 0.5 * params.width, 0.5 * params.height,
                         Mat3::Identity(), Vec3(-c.x(), -c.y(), params.distance), params.width, params.height);
}

/**
 * Builds a scene: ground-truth keypoints are projected joints (joints at or
 * below an amputation hidden) plus projected true residual endpoints, then
 * isotropic Gaussian pixel noise. With SceneDetail::Full the mask is
 * rendered from the body with the true cuts applied.
 */
inline SynthScene generate_scene(const SynthBodySpec& spec, const std::map<LimbId, double>& amputations,
                                 const SynthCameraParams& camera_params, double noise_px, std::uint64_t seed,
                                 SceneDetail detail = SceneDetail::Full)
{
    if (!(noise_px >= 0.0) || !std::isfinite(noise_px)) {
        throw Error(ErrorCode::InvalidArgument, "noise_px must be non-negative");
    }
    SynthScene scene;
    scene.model = generate_body_model(spec);
    const BodyModel& m = scene.model;
    const KinematicTree& sk = m.body.skeleton();
    scene.camera = synth_camera(sk, camera_params);

    std::vector<bool> hidden(sk.size(), false);
    for (const auto& [limb, lambda] : amputations) {
        if (!(lambda > 0.0 && lambda < 1.0)) {
            throw Error(ErrorCode::LambdaOutOfRange,
                        std::string(to_string(limb)) + " lambda must lie in (0, 1), got " + std::to_string(lambda));
        }
        const int anchor = m.limb_table.at(limb).anchor_joint;
        for (std::size_t q = 0; q < sk.size(); ++q) {
            if (sk.is_ancestor(anchor, static_cast<int>(q))) {
                hidden[q] = true;
            }
        }
    }
    // Two cuts on one chain (e.g. thigh and shank) cannot both be observed.
    for (const auto& [limb, lambda] : amputations) {
        const int target = m.limb_table.at(limb).target_joint;
        if (hidden[target]) {
            throw Error(ErrorCode::InvalidArgument,
                        std::string(to_string(limb)) + " lies below another amputation on the same chain");
        }
    }

    for (std::size_t q = 0; q < sk.size(); ++q) {
        const int slot = m.body25_slot[q];
        if (slot >= 0 && !hidden[q]) {
            scene.gt_keypoints.intact[slot] = Keypoint2D(project(sk.joints()[q], scene.camera), 1.0);
        }
    }
    for (const auto& [limb, lambda] : amputations) {
        const LimbJoints& lj = m.limb_table.at(limb);
        const Vec3 endpoint = residual_endpoint(sk.joints()[lj.anchor_joint], sk.joints()[lj.target_joint], lambda);
        scene.gt_keypoints.residual[lj.residual_slot] = Keypoint2D(project(endpoint, scene.camera), 1.0);
        scene.true_lambda[limb] = lambda;
    }

    if (noise_px > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, noise_px);
        for (std::size_t i = 0; i < kEvalSlots; ++i) {
            Keypoint2D& kp = i < kBodySlots ? scene.gt_keypoints.intact[i] : scene.gt_keypoints.residual[i - kBodySlots];
            if (kp.visible()) {
                const double dx = noise(rng);
                const double dy = noise(rng);
                kp.position += Vec2(dx, dy);
            }
        }
    }

    ArticulatedBody body = m.body;
    if (detail == SceneDetail::KeypointsOnly) {
        scene.amputated_body = std::move(body);
        return scene;
    }
    // Ground-truth amputated body: apply each true cut in limb order.
    for (const auto& [limb, lambda] : amputations) {
        const LimbJoints& lj = m.limb_table.at(limb);
        RafoResult truth;
        truth.anchor_opt = sk.joints()[lj.anchor_joint];
        truth.lambda_opt = lambda;
        truth.endpoint_3d = residual_endpoint(truth.anchor_opt, sk.joints()[lj.target_joint], lambda);
        truth.accepted = true;
        body = reconstruct_residual_limb(body, truth, limb, sk.joints()[lj.target_joint], m.limb_parts).body;
    }
    scene.amputated_body = std::move(body);
    if (detail == SceneDetail::Full) {
        scene.gt_mask = rasterize_silhouette(scene.amputated_body.mesh(), scene.camera);
    }
    return scene;
}

} // namespace residuum

#endif // RESIDUUM_SYNTH_HPP_
