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

#ifndef RESIDUUM_PIPELINE_HPP_
#define RESIDUUM_PIPELINE_HPP_

#include "residuum/body_model.hpp"
#include "residuum/io.hpp"
#include "residuum/meshedit.hpp"
#include "residuum/metrics.hpp"
#include "residuum/rafo.hpp"

#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace residuum {

struct FitOptions {
    RafoOptions rafo;
    ReconstructionParams reconstruction;
    std::uint64_t seed = 0; // recorded only; fitting draws no random numbers
};

enum class LimbStatus { Accepted, Rejected, Failed };

inline std::string_view to_string(LimbStatus s)
{
    switch (s) {
    case LimbStatus::Accepted: return "accepted";
    case LimbStatus::Rejected: return "rejected";
    case LimbStatus::Failed: return "failed";
    }
    return "unknown";
}

struct LimbOutcome {
    LimbId limb = LimbId::LeftShank;
    LimbStatus status = LimbStatus::Rejected;
    RafoResult rafo;
    std::optional<CutPlan> plan;
    std::optional<double> h;
    int spike_iterations = 0;
    int added_vertices = 0;
    int added_faces = 0;
    bool watertight = false; // the sealed component has every edge on exactly two faces
    std::optional<Error> error;
};

struct PipelineReport {
    std::vector<LimbOutcome> limbs; // limb-id order; unobserved limbs are absent
    std::vector<std::pair<std::string, double>> timings_ms;
    bool mesh_watertight = false;
    std::size_t num_vertices = 0;
    std::size_t num_faces = 0;

    /// 0 when every observed limb was accepted and sealed, 2 otherwise.
    int exit_code() const
    {
        for (const LimbOutcome& o : limbs) {
            if (o.status != LimbStatus::Accepted) {
                return 2;
            }
        }
        return 0;
    }
};

struct FitResult {
    BodyModel model;        // edited body; accepted anchors moved to their refined positions
    KeypointSet2D joints;   // predicted 2D joints in the 33-slot layout
    BinaryMask silhouette;
    PipelineReport report;
};

namespace detail {

inline bool component_closed(const TriangleMesh& mesh, int seed_vertex)
{
    const std::vector<int> comp = vertex_components(mesh);
    std::vector<Face> faces;
    for (const Face& f : mesh.faces()) {
        if (comp[f[0]] == comp[seed_vertex]) {
            faces.push_back(f);
        }
    }
    for (const auto& [key, use] : edge_uses(faces)) {
        if (use.count != 2) {
            return false;
        }
    }
    return !faces.empty();
}

inline bool mesh_closed(const TriangleMesh& mesh)
{
    for (const auto& [key, use] : edge_uses(mesh.faces())) {
        if (use.count != 2) {
            return false;
        }
    }
    return true;
}

class StageClock {
public:
    explicit StageClock(std::vector<std::pair<std::string, double>>& sink) : sink_(sink) {}

    template <class F>
    decltype(auto) time(const std::string& stage, F&& f)
    {
        const auto t0 = std::chrono::steady_clock::now();
        struct Record {
            StageClock& self;
            const std::string& stage;
            std::chrono::steady_clock::time_point t0;
            ~Record()
            {
                const std::chrono::duration<double, std::milli> dt = std::chrono::steady_clock::now() - t0;
                self.sink_.emplace_back(stage, dt.count());
            }
        } record{*this, stage, t0};
        return f();
    }

private:
    std::vector<std::pair<std::string, double>>& sink_;
};

} // namespace detail

/**
 * Post-initialization pipeline: RAFO on every observed limb (optionally in
 * parallel), then, in limb-id order, cut and seal each accepted limb.
 * Per-limb failures are recorded and the remaining limbs carry on.
 */
inline FitResult run_fit(const BodyModel& input, const KeypointSet2D& keypoints, const PinholeCamera& camera,
                         const FitOptions& options = {})
{
    input.validate();
    FitResult out;
    detail::StageClock clock(out.report.timings_ms);

    const auto rafo = clock.time("rafo", [&] {
        return optimize_all_limbs(input.body, keypoints, camera, input.limb_table, options.rafo);
    });

    const KinematicTree& sk0 = input.body.skeleton();
    ArticulatedBody body = input.body;
    std::vector<Vec3> joints = sk0.joints();
    for (const auto& [limb, result] : rafo) {
        LimbOutcome o;
        o.limb = limb;
        o.rafo = result;
        if (!result.accepted) {
            o.status = LimbStatus::Rejected;
            out.report.limbs.push_back(std::move(o));
            continue;
        }
        const LimbJoints& lj = input.limb_table.at(limb);
        try {
            const LimbReconstruction rec = clock.time("reconstruct:" + std::string(to_string(limb)), [&] {
                return reconstruct_residual_limb(body, result, limb, sk0.joints()[lj.target_joint], input.limb_parts,
                                                 options.reconstruction);
            });
            o.plan = rec.plan;
            o.h = rec.stump.ring_offset_h;
            o.spike_iterations = rec.spike_iterations;
            o.added_vertices = rec.stump.new_vertex_range.second - rec.stump.new_vertex_range.first;
            o.added_faces = rec.stump.new_face_range.second - rec.stump.new_face_range.first;
            o.watertight = detail::component_closed(rec.stump.mesh, rec.stump.new_vertex_range.first);
            o.status = LimbStatus::Accepted;
            body = rec.body;
            joints[lj.anchor_joint] = result.anchor_opt;
        } catch (const Error& e) {
            o.status = LimbStatus::Failed;
            o.error = e;
        }
        out.report.limbs.push_back(std::move(o));
    }

    out.model.body = ArticulatedBody(body.mesh(), KinematicTree(joints, sk0.parents()), body.part_labels(),
                                     body.part_names());
    out.model.limb_table = input.limb_table;
    out.model.limb_parts = input.limb_parts;
    out.model.body25_slot = input.body25_slot;

    for (std::size_t q = 0; q < joints.size(); ++q) {
        const int slot = input.body25_slot[q];
        if (slot >= 0) {
            out.joints.intact[slot] = Keypoint2D(project(joints[q], camera), 1.0);
        }
    }
    // Rejected limbs still report their best estimate, flagged with confidence 0.
    for (const LimbOutcome& o : out.report.limbs) {
        const int slot = input.limb_table.at(o.limb).residual_slot;
        out.joints.residual[slot] =
            Keypoint2D(project(o.rafo.endpoint_3d, camera), o.status == LimbStatus::Accepted ? 1.0 : 0.0);
    }

    out.silhouette = clock.time("rasterize", [&] { return rasterize_silhouette(out.model.body.mesh(), camera); });
    out.report.mesh_watertight = detail::mesh_closed(out.model.body.mesh());
    out.report.num_vertices = out.model.body.mesh().num_vertices();
    out.report.num_faces = out.model.body.mesh().num_faces();
    return out;
}

/// 33 predicted positions from a joints file; `midpoint` swaps the residual
/// slots for the midpoint proxy of the predicted body joints.
inline std::vector<Vec2> prediction_vector(const KeypointSet2D& predicted, bool midpoint)
{
    std::vector<Vec2> out(kEvalSlots);
    std::array<Vec2, kBodySlots> body;
    for (std::size_t i = 0; i < kBodySlots; ++i) {
        body[i] = predicted.intact[i].position;
        out[i] = body[i];
    }
    const auto proxy = midpoint_proxy(body);
    for (std::size_t i = 0; i < kResidualSlots; ++i) {
        out[kBodySlots + i] = midpoint ? proxy[i] : predicted.residual[i].position;
    }
    return out;
}

// ------------------------------------------------------------ reports ----

namespace detail {

inline io::json vec_json(const Vec3& v) { return io::json::array({v.x(), v.y(), v.z()}); }

inline io::json error_json(const Error& e)
{
    io::json j;
    j["code"] = std::string(to_string(e.code()));
    j["stage"] = e.stage();
    j["message"] = e.detail();
    j["indices"] = e.indices();
    return j;
}

inline std::string fixed(double v, int decimals)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

} // namespace detail

inline io::json report_to_json(const PipelineReport& report, const FitOptions& options)
{
    using io::json;
    json doc;
    doc["schema_version"] = io::kSchemaVersion;
    doc["kind"] = "residuum.fit_report";
    doc["exit_code"] = report.exit_code();
    json opts;
    opts["lambda_min"] = options.rafo.lambda_min;
    opts["lambda_max"] = options.rafo.lambda_max;
    opts["accept_px"] = options.rafo.acceptance_threshold_px;
    opts["alpha"] = options.rafo.alpha ? json(*options.rafo.alpha) : json("adaptive");
    opts["mu"] = options.rafo.mu ? json(*options.rafo.mu) : json("adaptive");
    opts["margin"] = options.reconstruction.margin ? json(*options.reconstruction.margin) : json("auto");
    opts["h"] = options.reconstruction.h ? json(*options.reconstruction.h) : json("auto");
    opts["shrink"] = options.reconstruction.shrink;
    opts["seed"] = options.seed;
    doc["options"] = std::move(opts);

    json limbs = json::array();
    for (const LimbOutcome& o : report.limbs) {
        json l;
        l["limb"] = std::string(to_string(o.limb));
        l["status"] = std::string(to_string(o.status));
        json r;
        r["lambda"] = o.rafo.lambda_opt;
        r["anchor"] = detail::vec_json(o.rafo.anchor_opt);
        r["endpoint"] = detail::vec_json(o.rafo.endpoint_3d);
        r["reprojection_error_px"] = o.rafo.reprojection_error_px;
        r["initial_error_px"] = o.rafo.initial_error_px;
        r["alpha"] = o.rafo.weights.alpha;
        r["mu"] = o.rafo.weights.mu;
        r["iterations"] = o.rafo.trace.iterations;
        r["termination"] = std::string(to_string(o.rafo.trace.termination_reason));
        l["rafo"] = std::move(r);
        if (o.plan) {
            json c;
            c["cut_point"] = detail::vec_json(o.plan->cut_point);
            c["normal"] = detail::vec_json(o.plan->normal);
            c["margin"] = o.plan->margin;
            c["h"] = o.h ? json(*o.h) : json(nullptr);
            c["shrink"] = options.reconstruction.shrink;
            c["spike_iterations"] = o.spike_iterations;
            c["added_vertices"] = o.added_vertices;
            c["added_faces"] = o.added_faces;
            l["cut"] = std::move(c);
        } else {
            l["cut"] = nullptr;
        }
        l["watertight"] = o.watertight;
        l["error"] = o.error ? detail::error_json(*o.error) : json(nullptr);
        limbs.push_back(std::move(l));
    }
    doc["limbs"] = std::move(limbs);
    doc["mesh"] = {{"vertices", report.num_vertices},
                   {"faces", report.num_faces},
                   {"watertight", report.mesh_watertight}};
    return doc;
}

inline io::json timings_to_json(const PipelineReport& report)
{
    io::json doc;
    doc["schema_version"] = io::kSchemaVersion;
    doc["kind"] = "residuum.timings";
    io::json stages = io::json::array();
    for (const auto& [stage, ms] : report.timings_ms) {
        stages.push_back({{"stage", stage}, {"ms", ms}});
    }
    doc["stages"] = std::move(stages);
    return doc;
}

/// Fixed-point evaluation text: MPJPE with 2 decimals, mIoU with 3, null when absent.
inline std::string format_eval_report(const EvalReport& r, bool midpoint)
{
    auto opt = [](const std::optional<double>& v) { return v ? detail::fixed(*v, 2) : std::string("null"); };
    std::string s = "{\n";
    s += "  \"schema_version\": " + std::to_string(io::kSchemaVersion) + ",\n";
    s += "  \"kind\": \"residuum.eval\",\n";
    s += std::string("  \"residual_prediction\": \"") + (midpoint ? "midpoint" : "explicit") + "\",\n";
    s += "  \"mpjpe_body_px\": " + opt(r.mpjpe_body_px) + ",\n";
    s += "  \"mpjpe_residual_px\": " + opt(r.mpjpe_residual_px) + ",\n";
    s += "  \"mpjpe_full_px\": " + opt(r.mpjpe_full_px) + ",\n";
    s += "  \"miou\": " + detail::fixed(r.miou, 3) + ",\n";
    s += "  \"per_joint_errors_px\": [";
    for (std::size_t i = 0; i < r.per_joint_errors_px.size(); ++i) {
        const double e = r.per_joint_errors_px[i];
        s += (i == 0 ? "" : ", ") + (std::isnan(e) ? std::string("null") : detail::fixed(e, 2));
    }
    s += "]\n}\n";
    return s;
}

} // namespace residuum

#endif // RESIDUUM_PIPELINE_HPP_
