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

#ifndef RESIDUUM_CORE_TYPES_HPP_
#define RESIDUUM_CORE_TYPES_HPP_

#include "residuum/error.hpp"

#include "Eigen/Core"

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace residuum {

// 3D quantities are in meters, 2D quantities in pixels.
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

using Face = std::array<int, 3>;

inline constexpr std::size_t kBodySlots = 25;
inline constexpr std::size_t kResidualSlots = 8;
inline constexpr std::size_t kEvalSlots = kBodySlots + kResidualSlots;

// Camera-frame depth below which a point counts as on or behind the camera.
inline constexpr double kMinDepth = 1e-6;

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m)
{
    return m.allFinite();
}

/**
 * Indexed triangle mesh. Construction validates that every face references
 * existing vertices, that no face repeats a vertex, and that all coordinates
 * are finite. Instances are immutable afterwards.
 */
class TriangleMesh {
public:
    TriangleMesh() = default;
    TriangleMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
        : vertices_(std::move(vertices)), faces_(std::move(faces))
    {
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
            if (!all_finite(vertices_[i])) {
                throw Error(ErrorCode::InvalidArgument, "mesh vertex " + std::to_string(i) + " is not finite",
                            {static_cast<int>(i)});
            }
        }
        const int n = static_cast<int>(vertices_.size());
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            const Face& face = faces_[f];
            for (int idx : face) {
                if (idx < 0 || idx >= n) {
                    throw Error(ErrorCode::InvalidArgument,
                                "face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                                    " outside [0, " + std::to_string(n) + ")",
                                {static_cast<int>(f)});
                }
            }
            if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
                throw Error(ErrorCode::InvalidArgument, "face " + std::to_string(f) + " repeats a vertex index",
                            {static_cast<int>(f)});
            }
        }
    }

    const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
    const std::vector<Face>& faces() const noexcept { return faces_; }
    std::size_t num_vertices() const noexcept { return vertices_.size(); }
    std::size_t num_faces() const noexcept { return faces_.size(); }
    bool empty() const noexcept { return faces_.empty(); }

private:
    std::vector<Vec3> vertices_;
    std::vector<Face> faces_;
};

/**
 * Joint positions plus parent links. Exactly one root (parent -1) and every
 * parent chain terminates at it.
 */
class KinematicTree {
public:
    KinematicTree() = default;
    KinematicTree(std::vector<Vec3> joints, std::vector<int> parents)
        : joints_(std::move(joints)), parents_(std::move(parents))
    {
        if (joints_.size() != parents_.size()) {
            throw Error(ErrorCode::InvalidArgument, "joint and parent counts differ");
        }
        const int n = static_cast<int>(joints_.size());
        int roots = 0;
        for (int j = 0; j < n; ++j) {
            if (!all_finite(joints_[j])) {
                throw Error(ErrorCode::InvalidArgument, "joint " + std::to_string(j) + " is not finite", {j});
            }
            const int p = parents_[j];
            if (p == -1) {
                ++roots;
            } else if (p < 0 || p >= n || p == j) {
                throw Error(ErrorCode::InvalidArgument, "joint " + std::to_string(j) + " has invalid parent", {j});
            }
        }
        if (n > 0 && roots != 1) {
            throw Error(ErrorCode::InvalidArgument,
                        "kinematic tree needs exactly one root, found " + std::to_string(roots));
        }
        for (int j = 0; j < n; ++j) {
            int steps = 0;
            for (int k = j; k != -1; k = parents_[k]) {
                if (++steps > n) {
                    throw Error(ErrorCode::InvalidArgument, "parent chain of joint " + std::to_string(j) + " cycles",
                                {j});
                }
            }
        }
    }

    const std::vector<Vec3>& joints() const noexcept { return joints_; }
    const std::vector<int>& parents() const noexcept { return parents_; }
    std::size_t size() const noexcept { return joints_.size(); }

    // Number of nodes visited walking from joint to the root, inclusive.
    int chain_length(int joint) const
    {
        int steps = 0;
        for (int k = joint; k != -1; k = parents_[k]) {
            ++steps;
        }
        return steps;
    }

    // True if `ancestor` lies on the parent chain of `joint` (a joint is its own ancestor).
    bool is_ancestor(int ancestor, int joint) const
    {
        for (int k = joint; k != -1; k = parents_[k]) {
            if (k == ancestor) {
                return true;
            }
        }
        return false;
    }

private:
    std::vector<Vec3> joints_;
    std::vector<int> parents_;
};

/**
 * A fitted body: mesh, skeleton and per-vertex part segmentation.
 */
class ArticulatedBody {
public:
    ArticulatedBody() = default;
    ArticulatedBody(TriangleMesh mesh, KinematicTree skeleton, std::vector<int> part_labels,
                    std::map<int, std::string> part_names)
        : mesh_(std::move(mesh)), skeleton_(std::move(skeleton)), part_labels_(std::move(part_labels)),
          part_names_(std::move(part_names))
    {
        if (part_labels_.size() != mesh_.num_vertices()) {
            throw Error(ErrorCode::InvalidArgument,
                        "part_labels has " + std::to_string(part_labels_.size()) + " entries for " +
                            std::to_string(mesh_.num_vertices()) + " vertices");
        }
        for (std::size_t i = 0; i < part_labels_.size(); ++i) {
            if (!part_names_.contains(part_labels_[i])) {
                throw Error(ErrorCode::UnknownPartId,
                            "vertex " + std::to_string(i) + " has unnamed part " + std::to_string(part_labels_[i]),
                            {static_cast<int>(i)});
            }
        }
    }

    const TriangleMesh& mesh() const noexcept { return mesh_; }
    const KinematicTree& skeleton() const noexcept { return skeleton_; }
    const std::vector<int>& part_labels() const noexcept { return part_labels_; }
    const std::map<int, std::string>& part_names() const noexcept { return part_names_; }

    // Part id for a name, or -1.
    int part_id(const std::string& name) const
    {
        for (const auto& [id, n] : part_names_) {
            if (n == name) {
                return id;
            }
        }
        return -1;
    }

private:
    TriangleMesh mesh_;
    KinematicTree skeleton_;
    std::vector<int> part_labels_;
    std::map<int, std::string> part_names_;
};

/**
 * Full-perspective pinhole camera. The extrinsics map world points into the
 * camera frame: Xc = rotation * p + translation.
 */
class PinholeCamera {
public:
    PinholeCamera() = default;
    PinholeCamera(double fx, double fy, double cx, double cy, const Mat3& rotation, const Vec3& translation,
                  int image_width, int image_height)
        : fx_(fx), fy_(fy), cx_(cx), cy_(cy), rotation_(rotation), translation_(translation),
          width_(image_width), height_(image_height)
    {
        if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
            throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive and finite");
        }
        if (!std::isfinite(cx) || !std::isfinite(cy) || !all_finite(rotation) || !all_finite(translation)) {
            throw Error(ErrorCode::InvalidArgument, "camera parameters must be finite");
        }
        if (image_width <= 0 || image_height <= 0) {
            throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
        }
        if (!is_rotation(rotation)) {
            throw Error(ErrorCode::NonOrthonormalRotation, "rotation is not orthonormal with determinant +1");
        }
    }

    // Orthonormal within 1e-9 and proper (det = +1).
    static bool is_rotation(const Mat3& r)
    {
        const double err = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
        return err <= 1e-9 && r.determinant() > 0.0;
    }

    static PinholeCamera identity_extrinsics(double f, double cx, double cy, int width, int height)
    {
        return PinholeCamera(f, f, cx, cy, Mat3::Identity(), Vec3::Zero(), width, height);
    }

    double fx() const noexcept { return fx_; }
    double fy() const noexcept { return fy_; }
    double cx() const noexcept { return cx_; }
    double cy() const noexcept { return cy_; }
    const Mat3& rotation() const noexcept { return rotation_; }
    const Vec3& translation() const noexcept { return translation_; }
    int image_width() const noexcept { return width_; }
    int image_height() const noexcept { return height_; }

    Vec3 to_camera(const Vec3& p) const { return rotation_ * p + translation_; }

private:
    double fx_ = 1.0;
    double fy_ = 1.0;
    double cx_ = 0.0;
    double cy_ = 0.0;
    Mat3 rotation_ = Mat3::Identity();
    Vec3 translation_ = Vec3::Zero();
    int width_ = 1;
    int height_ = 1;
};

struct Keypoint2D {
    Vec2 position = Vec2::Zero();
    double confidence = 0.0; // 0 marks an absent observation

    Keypoint2D() = default;
    Keypoint2D(const Vec2& p, double c) : position(p), confidence(c)
    {
        if (!all_finite(p)) {
            throw Error(ErrorCode::InvalidArgument, "keypoint position is not finite");
        }
        if (!(c >= 0.0 && c <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "keypoint confidence must lie in [0,1]");
        }
    }

    bool visible() const noexcept { return confidence > 0.0; }
};

// 25 intact-body slots (OpenPose BODY_25 order) plus 8 residual-limb endpoint slots.
struct KeypointSet2D {
    std::array<Keypoint2D, kBodySlots> intact{};
    std::array<Keypoint2D, kResidualSlots> residual{};

    const Keypoint2D& slot(std::size_t i) const { return i < kBodySlots ? intact[i] : residual[i - kBodySlots]; }
};

/// Projects a world point to pixel coordinates.
inline Vec2 project(const Vec3& p, const PinholeCamera& cam)
{
    const Vec3 c = cam.to_camera(p);
    if (!(c.z() > kMinDepth)) {
        throw Error(ErrorCode::DepthNonPositive, "camera-frame depth " + std::to_string(c.z()) + " <= 1e-6");
    }
    return {cam.fx() * c.x() / c.z() + cam.cx(), cam.fy() * c.y() / c.z() + cam.cy()};
}

/// d(project)/d(p), a 2x3 matrix.
inline Mat23 project_jacobian(const Vec3& p, const PinholeCamera& cam)
{
    const Vec3 c = cam.to_camera(p);
    if (!(c.z() > kMinDepth)) {
        throw Error(ErrorCode::DepthNonPositive, "camera-frame depth " + std::to_string(c.z()) + " <= 1e-6");
    }
    const double iz = 1.0 / c.z();
    Mat23 d_cam;
    d_cam << cam.fx() * iz, 0.0, -cam.fx() * c.x() * iz * iz,
             0.0, cam.fy() * iz, -cam.fy() * c.y() * iz * iz;
    return d_cam * cam.rotation();
}

} // namespace residuum

#endif // RESIDUUM_CORE_TYPES_HPP_
