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

#ifndef RESIDUUM_ERROR_HPP_
#define RESIDUUM_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace residuum {

enum class ErrorCode {
    InvalidArgument,
    DepthNonPositive,
    NonFiniteObjective,
    EmptyParameterVector,
    LambdaOutOfRange,
    OptimizationDiverged,
    InvalidLimbTable,
    RejectedRafoResult,
    DegenerateSegment,
    UnknownPartId,
    NoBandVertices,
    MultipleBoundaryComponents,
    NonManifoldBoundary,
    LoopCollapsed,
    DegenerateLoop,
    SelfIntersectingSeal,
    NoVisibleKeypoints,
    VertexBehindCamera,
    DimensionMismatch,
    ParseError,
    SchemaVersionMismatch,
    WrongSlotCount,
    NonOrthonormalRotation,
    UnsupportedImageFormat,
    DimensionOverflow,
    IoError,
};

inline std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DepthNonPositive: return "DepthNonPositive";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::EmptyParameterVector: return "EmptyParameterVector";
    case ErrorCode::LambdaOutOfRange: return "LambdaOutOfRange";
    case ErrorCode::OptimizationDiverged: return "OptimizationDiverged";
    case ErrorCode::InvalidLimbTable: return "InvalidLimbTable";
    case ErrorCode::RejectedRafoResult: return "RejectedRafoResult";
    case ErrorCode::DegenerateSegment: return "DegenerateSegment";
    case ErrorCode::UnknownPartId: return "UnknownPartId";
    case ErrorCode::NoBandVertices: return "NoBandVertices";
    case ErrorCode::MultipleBoundaryComponents: return "MultipleBoundaryComponents";
    case ErrorCode::NonManifoldBoundary: return "NonManifoldBoundary";
    case ErrorCode::LoopCollapsed: return "LoopCollapsed";
    case ErrorCode::DegenerateLoop: return "DegenerateLoop";
    case ErrorCode::SelfIntersectingSeal: return "SelfIntersectingSeal";
    case ErrorCode::NoVisibleKeypoints: return "NoVisibleKeypoints";
    case ErrorCode::VertexBehindCamera: return "VertexBehindCamera";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::WrongSlotCount: return "WrongSlotCount";
    case ErrorCode::NonOrthonormalRotation: return "NonOrthonormalRotation";
    case ErrorCode::UnsupportedImageFormat: return "UnsupportedImageFormat";
    case ErrorCode::DimensionOverflow: return "DimensionOverflow";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/**
 * The single exception type thrown by the library.
 *
 * Carries a machine-readable code, an optional pipeline stage tag (set by
 * composite operations such as the limb reconstruction pipeline) and an
 * optional list of offending indices (vertex ids, joint ids, ...).
 */
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::vector<int> indices = {})
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code),
          detail_(message), indices_(std::move(indices))
    {
    }

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }
    const std::string& stage() const noexcept { return stage_; }
    const std::vector<int>& indices() const noexcept { return indices_; }

    // Returns a copy tagged with the stage that raised it.
    Error with_stage(std::string stage) const
    {
        Error tagged(code_, "[" + stage + "] " + detail_, indices_);
        tagged.stage_ = std::move(stage);
        return tagged;
    }

private:
    ErrorCode code_;
    std::string detail_;
    std::string stage_;
    std::vector<int> indices_;
};

} // namespace residuum

#endif // RESIDUUM_ERROR_HPP_
