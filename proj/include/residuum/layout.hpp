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

#ifndef RESIDUUM_LAYOUT_HPP_
#define RESIDUUM_LAYOUT_HPP_

#include "residuum/core_types.hpp"
#include "residuum/error.hpp"

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace residuum {

// The eight residual-limb endpoints. The enumerator value is the residual
// keypoint slot: left/right x upper/lower limb, each with a proximal
// (upper arm, thigh) and distal (forearm, shank) segment.
enum class LimbId {
    LeftUpperArm = 0,
    LeftForearm = 1,
    RightUpperArm = 2,
    RightForearm = 3,
    LeftThigh = 4,
    LeftShank = 5,
    RightThigh = 6,
    RightShank = 7,
};

inline constexpr std::array<LimbId, kResidualSlots> kAllLimbs = {
    LimbId::LeftUpperArm, LimbId::LeftForearm, LimbId::RightUpperArm, LimbId::RightForearm,
    LimbId::LeftThigh,    LimbId::LeftShank,   LimbId::RightThigh,    LimbId::RightShank,
};

inline std::string_view to_string(LimbId limb)
{
    switch (limb) {
    case LimbId::LeftUpperArm: return "LeftUpperArm";
    case LimbId::LeftForearm: return "LeftForearm";
    case LimbId::RightUpperArm: return "RightUpperArm";
    case LimbId::RightForearm: return "RightForearm";
    case LimbId::LeftThigh: return "LeftThigh";
    case LimbId::LeftShank: return "LeftShank";
    case LimbId::RightThigh: return "RightThigh";
    case LimbId::RightShank: return "RightShank";
    }
    return "Unknown";
}

inline std::optional<LimbId> limb_from_string(std::string_view name)
{
    for (LimbId limb : kAllLimbs) {
        if (to_string(limb) == name) {
            return limb;
        }
    }
    return std::nullopt;
}

inline int residual_slot(LimbId limb) { return static_cast<int>(limb); }

// OpenPose BODY_25 slot names, in slot order.
inline constexpr std::array<std::string_view, kBodySlots> kBody25Names = {
    "Nose",     "Neck",      "RShoulder", "RElbow", "RWrist",    "LShoulder", "LElbow",
    "LWrist",   "MidHip",    "RHip",      "RKnee",  "RAnkle",    "LHip",      "LKnee",
    "LAnkle",   "REye",      "LEye",      "REar",   "LEar",      "LBigToe",   "LSmallToe",
    "LHeel",    "RBigToe",   "RSmallToe", "RHeel",
};

// BODY_25 slots of the anchor (distal) and upstream joints bounding each limb segment.
struct LimbBody25Slots {
    int anchor;
    int target;
};

inline LimbBody25Slots body25_slots(LimbId limb)
{
    switch (limb) {
    case LimbId::LeftUpperArm: return {6, 5};   // LElbow -> LShoulder
    case LimbId::LeftForearm: return {7, 6};    // LWrist -> LElbow
    case LimbId::RightUpperArm: return {3, 2};  // RElbow -> RShoulder
    case LimbId::RightForearm: return {4, 3};   // RWrist -> RElbow
    case LimbId::LeftThigh: return {13, 12};    // LKnee -> LHip
    case LimbId::LeftShank: return {14, 13};    // LAnkle -> LKnee
    case LimbId::RightThigh: return {10, 9};    // RKnee -> RHip
    case LimbId::RightShank: return {11, 10};   // RAnkle -> RKnee
    }
    throw Error(ErrorCode::InvalidArgument, "unknown limb");
}

/// Skeleton joints and residual slot used to optimize one limb.
struct LimbJoints {
    int anchor_joint = -1;
    int target_joint = -1;
    int residual_slot = -1;
};

using LimbTable = std::map<LimbId, LimbJoints>;

/// Part labels kept (the residual segment) and coarse-pruned (distal) for one limb.
struct LimbParts {
    std::set<int> kept;
    std::set<int> distal;
};

using LimbPartTable = std::map<LimbId, LimbParts>;

/// Validates a limb table against a skeleton; throws InvalidLimbTable.
inline void validate_limb_table(const LimbTable& table, const KinematicTree& skeleton)
{
    const int n = static_cast<int>(skeleton.size());
    std::set<int> slots;
    for (const auto& [limb, lj] : table) {
        const std::string name(to_string(limb));
        if (lj.anchor_joint < 0 || lj.anchor_joint >= n || lj.target_joint < 0 || lj.target_joint >= n) {
            throw Error(ErrorCode::InvalidLimbTable, name + " references a joint outside the skeleton");
        }
        if (lj.anchor_joint == lj.target_joint) {
            throw Error(ErrorCode::InvalidLimbTable, name + " uses the same joint as anchor and target");
        }
        if (lj.residual_slot < 0 || lj.residual_slot >= static_cast<int>(kResidualSlots)) {
            throw Error(ErrorCode::InvalidLimbTable, name + " residual slot outside [0,8)");
        }
        if (!slots.insert(lj.residual_slot).second) {
            throw Error(ErrorCode::InvalidLimbTable, name + " shares residual slot " +
                                                         std::to_string(lj.residual_slot) + " with another limb");
        }
    }
}

} // namespace residuum

#endif // RESIDUUM_LAYOUT_HPP_
