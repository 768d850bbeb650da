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

#ifndef RESIDUUM_METRICS_HPP_
#define RESIDUUM_METRICS_HPP_

#include "residuum/core_types.hpp"
#include "residuum/error.hpp"
#include "residuum/layout.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace residuum {

/// Row-major binary image.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height) : width_(width), height_(height)
    {
        if (width <= 0 || height <= 0) {
            throw Error(ErrorCode::InvalidArgument, "mask dimensions must be positive");
        }
        bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
    }
    BinaryMask(int width, int height, std::vector<std::uint8_t> bits) : BinaryMask(width, height)
    {
        if (bits.size() != bits_.size()) {
            throw Error(ErrorCode::DimensionMismatch, "mask has " + std::to_string(bits.size()) + " bits for " +
                                                          std::to_string(width) + "x" + std::to_string(height));
        }
        for (std::size_t i = 0; i < bits.size(); ++i) {
            bits_[i] = bits[i] != 0 ? 1 : 0;
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool value = true) { bits_[index(x, y)] = value ? 1 : 0; }

    std::size_t count() const
    {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }

    bool operator==(const BinaryMask&) const = default;

private:
    std::size_t index(int x, int y) const
    {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct EvalReport {
    std::optional<double> mpjpe_body_px;     // 25 intact slots
    std::optional<double> mpjpe_residual_px; // 8 residual endpoints
    std::optional<double> mpjpe_full_px;     // all 33
    double miou = 0.0;
    std::vector<double> per_joint_errors_px; // 33 entries, NaN where not visible
};

/// Mean pixel error over slots with confidence > 0.
inline double mpjpe_2d(const std::vector<Vec2>& predicted, const std::vector<Keypoint2D>& observed)
{
    if (predicted.size() != observed.size()) {
        throw Error(ErrorCode::DimensionMismatch, std::to_string(predicted.size()) + " predictions for " +
                                                      std::to_string(observed.size()) + " observations");
    }
    double sum = 0.0;
    int visible = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (observed[i].visible()) {
            sum += (predicted[i] - observed[i].position).norm();
            ++visible;
        }
    }
    if (visible == 0) {
        throw Error(ErrorCode::NoVisibleKeypoints, "no keypoint has confidence > 0");
    }
    return sum / visible;
}

namespace detail {

// Twice the signed area of (a, b, p); positive when p lies clockwise of a->b
// in y-down image coordinates.
inline double edge_function(const Vec2& a, const Vec2& b, const Vec2& p)
{
    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

// Top-left rule for triangles with positive edge functions inside: a top
// edge is horizontal and runs in +x, a left edge runs in -y.
inline bool top_left(const Vec2& a, const Vec2& b)
{
    const double dx = b.x() - a.x();
    const double dy = b.y() - a.y();
    return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

inline void fill_triangle(BinaryMask& mask, Vec2 a, Vec2 b, Vec2 c)
{
    double area = edge_function(a, b, c);
    if (area == 0.0 || !std::isfinite(area)) {
        return;
    }
    if (area < 0.0) {
        std::swap(b, c);
    }
    const double min_x = std::min({a.x(), b.x(), c.x()});
    const double max_x = std::max({a.x(), b.x(), c.x()});
    const double min_y = std::min({a.y(), b.y(), c.y()});
    const double max_y = std::max({a.y(), b.y(), c.y()});
    // Pixel (x, y) has its centre at (x + 0.5, y + 0.5).
    const int x0 = std::max(0, static_cast<int>(std::ceil(std::max(min_x - 0.5, -1.0))));
    const int x1 = std::min(mask.width() - 1, static_cast<int>(std::floor(std::min(max_x - 0.5, 1e9))));
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::max(min_y - 0.5, -1.0))));
    const int y1 = std::min(mask.height() - 1, static_cast<int>(std::floor(std::min(max_y - 0.5, 1e9))));
    const bool tl_ab = top_left(a, b);
    const bool tl_bc = top_left(b, c);
    const bool tl_ca = top_left(c, a);
    auto covers = [](double w, bool tl) { return w > 0.0 || (w == 0.0 && tl); };
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const Vec2 p(x + 0.5, y + 0.5);
            if (covers(edge_function(a, b, p), tl_ab) && covers(edge_function(b, c, p), tl_bc) &&
                covers(edge_function(c, a, p), tl_ca)) {
                mask.set(x, y);
            }
        }
    }
}

} // namespace detail

/**
 * Binary silhouette: a pixel is set iff its centre lies inside the
 * projection of at least one triangle (edge functions, top-left rule,
 * either winding).
 */
inline BinaryMask rasterize_silhouette(const TriangleMesh& mesh, const PinholeCamera& cam)
{
    BinaryMask mask(cam.image_width(), cam.image_height());
    std::vector<Vec2> px(mesh.num_vertices());
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
        const Vec3 pc = cam.to_camera(mesh.vertices()[i]);
        if (!(pc.z() > kMinDepth)) {
            throw Error(ErrorCode::VertexBehindCamera, "vertex " + std::to_string(i) + " is not in front of the camera",
                        {static_cast<int>(i)});
        }
        px[i] = Vec2(cam.fx() * pc.x() / pc.z() + cam.cx(), cam.fy() * pc.y() / pc.z() + cam.cy());
    }
    for (const Face& f : mesh.faces()) {
        detail::fill_triangle(mask, px[f[0]], px[f[1]], px[f[2]]);
    }
    return mask;
}

/// |a & b| / |a | b|, 1 when both masks are empty.
inline double miou(const BinaryMask& a, const BinaryMask& b)
{
    if (a.width() != b.width() || a.height() != b.height()) {
        throw Error(ErrorCode::DimensionMismatch, "masks are " + std::to_string(a.width()) + "x" +
                                                      std::to_string(a.height()) + " and " +
                                                      std::to_string(b.width()) + "x" + std::to_string(b.height()));
    }
    std::size_t inter = 0;
    std::size_t uni = 0;
    const auto& x = a.bits();
    const auto& y = b.bits();
    for (std::size_t i = 0; i < x.size(); ++i) {
        inter += (x[i] & y[i]);
        uni += (x[i] | y[i]);
    }
    if (uni == 0) {
        return 1.0;
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Baseline residual prediction: midpoint of each limb's two projected intact joints.
inline std::array<Vec2, kResidualSlots> midpoint_proxy(const std::array<Vec2, kBodySlots>& body)
{
    std::array<Vec2, kResidualSlots> out;
    for (LimbId limb : kAllLimbs) {
        const auto slots = body25_slots(limb);
        out[residual_slot(limb)] = 0.5 * (body[slots.anchor] + body[slots.target]);
    }
    return out;
}

/**
 * Full report: MPJPE over the body (first 25), residual (last 8) and full
 * (33) slot subsets plus silhouette IoU. A subset with no visible keypoint
 * is reported as absent.
 */
inline EvalReport evaluate(const TriangleMesh& body_mesh, const std::vector<Vec2>& joint_projections,
                           const KeypointSet2D& gt_keypoints, const BinaryMask& gt_mask, const PinholeCamera& cam)
{
    if (joint_projections.size() != kEvalSlots) {
        throw Error(ErrorCode::DimensionMismatch,
                    "expected " + std::to_string(kEvalSlots) + " joint projections, got " +
                        std::to_string(joint_projections.size()));
    }
    EvalReport report;
    report.per_joint_errors_px.assign(kEvalSlots, std::numeric_limits<double>::quiet_NaN());
    double sum_body = 0.0;
    double sum_res = 0.0;
    int n_body = 0;
    int n_res = 0;
    for (std::size_t i = 0; i < kEvalSlots; ++i) {
        const Keypoint2D& kp = gt_keypoints.slot(i);
        if (!kp.visible()) {
            continue;
        }
        const double e = (joint_projections[i] - kp.position).norm();
        report.per_joint_errors_px[i] = e;
        if (i < kBodySlots) {
            sum_body += e;
            ++n_body;
        } else {
            sum_res += e;
            ++n_res;
        }
    }
    if (n_body > 0) {
        report.mpjpe_body_px = sum_body / n_body;
    }
    if (n_res > 0) {
        report.mpjpe_residual_px = sum_res / n_res;
    }
    if (n_body + n_res > 0) {
        report.mpjpe_full_px = (sum_body + sum_res) / (n_body + n_res);
    }
    report.miou = miou(rasterize_silhouette(body_mesh, cam), gt_mask);
    return report;
}

} // namespace residuum

#endif // RESIDUUM_METRICS_HPP_
