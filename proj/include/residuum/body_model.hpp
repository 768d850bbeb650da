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

#ifndef RESIDUUM_BODY_MODEL_HPP_
#define RESIDUUM_BODY_MODEL_HPP_

#include "residuum/core_types.hpp"
#include "residuum/error.hpp"
#include "residuum/layout.hpp"

#include <array>
#include <string>
#include <vector>

namespace residuum {

/**
 * Everything the pipeline needs to know about a fitted body: the body
 * itself, which joints each residual limb uses, which part labels each cut
 * keeps and prunes, and the BODY_25 slot of every skeleton joint (-1 if the
 * joint has none).
 */
struct BodyModel {
    ArticulatedBody body;
    LimbTable limb_table;
    LimbPartTable limb_parts;
    std::vector<int> body25_slot;

    void validate() const
    {
        validate_limb_table(limb_table, body.skeleton());
        if (body25_slot.size() != body.skeleton().size()) {
            throw Error(ErrorCode::InvalidArgument, "body25_slot needs one entry per skeleton joint");
        }
        std::array<bool, kBodySlots> used{};
        for (std::size_t j = 0; j < body25_slot.size(); ++j) {
            const int s = body25_slot[j];
            if (s == -1) {
                continue;
            }
            if (s < 0 || s >= static_cast<int>(kBodySlots) || used[s]) {
                throw Error(ErrorCode::InvalidArgument,
                            "joint " + std::to_string(j) + " has an invalid or repeated BODY_25 slot",
                            {static_cast<int>(j)});
            }
            used[s] = true;
        }
        for (const auto& [limb, parts] : limb_parts) {
            for (const std::set<int>* ids : {&parts.kept, &parts.distal}) {
                for (int id : *ids) {
                    if (!body.part_names().contains(id)) {
                        throw Error(ErrorCode::UnknownPartId,
                                    std::string(to_string(limb)) + " references unknown part " + std::to_string(id),
                                    {id});
                    }
                }
            }
            for (int id : parts.kept) {
                if (parts.distal.contains(id)) {
                    throw Error(ErrorCode::InvalidArgument,
                                std::string(to_string(limb)) + " keeps and prunes part " + std::to_string(id), {id});
                }
            }
        }
    }
};

/// Projects every skeleton joint into its BODY_25 slot and the residual
/// endpoints into slots 25..32; slots without a source are left at (0, 0).
inline std::vector<Vec2> body25_projection(const BodyModel& model, const PinholeCamera& cam)
{
    std::vector<Vec2> out(kEvalSlots, Vec2::Zero());
    const auto& joints = model.body.skeleton().joints();
    for (std::size_t j = 0; j < joints.size(); ++j) {
        if (model.body25_slot[j] >= 0) {
            out[model.body25_slot[j]] = project(joints[j], cam);
        }
    }
    return out;
}

} // namespace residuum

#endif // RESIDUUM_BODY_MODEL_HPP_
