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

#ifndef RESIDUUM_MESHEDIT_HPP_
#define RESIDUUM_MESHEDIT_HPP_

#include "residuum/core_types.hpp"
#include "residuum/error.hpp"
#include "residuum/layout.hpp"
#include "residuum/mesh_topology.hpp"
#include "residuum/rafo.hpp"

#include "Eigen/Eigenvalues"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace residuum {

// Ring shrink factor. 0.55 keeps the second ring (shrink^2) inside the cone
// spanned by the rim and the apex at 3h; anything above 1/sqrt(3) does not.
inline constexpr double kDefaultShrink = 0.55;

/// Plane cut for one residual limb. `normal` points distally (toward the
/// geometry that is removed).
struct CutPlan {
    Vec3 cut_point = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    double margin = 0.0;
    std::set<int> limb_part_ids;
    std::set<int> distal_part_ids;

    void validate() const
    {
        if (!all_finite(cut_point) || std::abs(normal.norm() - 1.0) > 1e-9) {
            throw Error(ErrorCode::InvalidArgument, "cut plane needs a finite point and unit normal");
        }
        if (!(margin > 0.0) || !std::isfinite(margin)) {
            throw Error(ErrorCode::InvalidArgument, "cut margin must be positive");
        }
        for (int id : limb_part_ids) {
            if (distal_part_ids.contains(id)) {
                throw Error(ErrorCode::InvalidArgument,
                            "part " + std::to_string(id) + " is both kept and distal", {id});
            }
        }
    }

    // Signed distance along the normal; positive on the removed side.
    double phi(const Vec3& v) const { return (v - cut_point).dot(normal); }
};

struct SealedStump {
    TriangleMesh mesh;
    std::pair<int, int> new_vertex_range{0, 0}; // [begin, end)
    std::pair<int, int> new_face_range{0, 0};
    double ring_offset_h = 0.0;
};

struct BoundaryPlane {
    Vec3 centroid = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
};

struct PruneResult {
    TriangleMesh mesh;
    std::vector<bool> kept_vertex_mask; // over the input vertices
    std::vector<int> old_to_new;
    std::vector<int> part_labels; // over the output vertices
};

struct CutResult {
    TriangleMesh mesh;
    BoundaryLoop raw_boundary;
    std::vector<int> old_to_new;
    std::vector<bool> region_mask; // over the output vertices
    std::vector<int> protective_ring; // output indices
};

struct SpikePruneResult {
    TriangleMesh mesh;
    BoundaryLoop loop;
    std::vector<int> old_to_new;
    int iterations = 0;
};

namespace detail {

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const Error& e) {
        if (!e.stage().empty()) {
            throw;
        }
        throw e.with_stage(stage);
    }
}

inline void check_parts_known(const std::set<int>& ids, const std::map<int, std::string>& names)
{
    for (int id : ids) {
        if (!names.contains(id)) {
            throw Error(ErrorCode::UnknownPartId, "part id " + std::to_string(id) + " is not defined by the body",
                        {id});
        }
    }
}

} // namespace detail

/**
 * Cut point p_r = a* + lambda* (t - a*) and distal normal (a* - t)/|a* - t|.
 *
 * The margin defaults to twice the median edge length of the kept limb
 * submesh, capped at half the distance from the cut plane to the farthest
 * kept vertex on the distal side.
 */
inline CutPlan compute_cut_plan(const RafoResult& rafo, const Vec3& target_init, const ArticulatedBody& body,
                                LimbId limb, const LimbPartTable& parts, std::optional<double> margin = {})
{
    if (!rafo.accepted) {
        throw Error(ErrorCode::RejectedRafoResult,
                    std::string(to_string(limb)) + " fit was rejected; no mesh edit is performed");
    }
    const Vec3 seg = rafo.anchor_opt - target_init;
    if (!(seg.norm() >= 1e-6)) {
        throw Error(ErrorCode::DegenerateSegment, "anchor and target coincide");
    }
    const auto it = parts.find(limb);
    if (it == parts.end()) {
        throw Error(ErrorCode::UnknownPartId, "no part table entry for " + std::string(to_string(limb)));
    }
    detail::check_parts_known(it->second.kept, body.part_names());
    detail::check_parts_known(it->second.distal, body.part_names());

    CutPlan plan;
    plan.cut_point = rafo.anchor_opt + rafo.lambda_opt * (target_init - rafo.anchor_opt);
    plan.normal = seg.normalized();
    plan.limb_part_ids = it->second.kept;
    plan.distal_part_ids = it->second.distal;
    if (margin) {
        plan.margin = *margin;
    } else {
        const auto& labels = body.part_labels();
        auto kept = [&](int v) { return plan.limb_part_ids.contains(labels[v]); };
        plan.margin = 2.0 * median_edge_length(body.mesh(), kept);
        if (!(plan.margin > 0.0)) {
            throw Error(ErrorCode::UnknownPartId,
                        "kept parts of " + std::string(to_string(limb)) + " have no edges in the mesh");
        }
        // Leave some kept geometry beyond the band, or nothing would be cut.
        double phi_max = -std::numeric_limits<double>::infinity();
        for (std::size_t v = 0; v < labels.size(); ++v) {
            if (kept(static_cast<int>(v))) {
                phi_max = std::max(phi_max, plan.phi(body.mesh().vertices()[v]));
            }
        }
        if (phi_max > 0.0) {
            plan.margin = std::min(plan.margin, 0.5 * phi_max);
        }
    }
    plan.validate();
    return plan;
}

/// Removes every vertex labelled with a distal part, with its faces.
inline PruneResult coarse_prune(const ArticulatedBody& body, const CutPlan& plan)
{
    detail::check_parts_known(plan.distal_part_ids, body.part_names());
    detail::check_parts_known(plan.limb_part_ids, body.part_names());
    const auto& labels = body.part_labels();
    std::vector<bool> remove(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        remove[i] = plan.distal_part_ids.contains(labels[i]);
    }
    VertexRemoval r = remove_vertices(body.mesh(), remove);
    PruneResult out;
    out.kept_vertex_mask.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out.kept_vertex_mask[i] = r.old_to_new[i] >= 0;
    }
    out.part_labels = remap(labels, r.old_to_new, r.mesh.num_vertices());
    out.old_to_new = std::move(r.old_to_new);
    out.mesh = std::move(r.mesh);
    return out;
}

/**
 * Band-limited plane cut restricted to `region_mask`.
 *
 * A protective ring is grown over vertex adjacency inside |phi| < margin,
 * seeded from the face nearest to the cut point. Region vertices with
 * phi > margin outside the ring are removed; the largest boundary loop the
 * cut creates is returned. Small loops on detached slivers are dropped with
 * their component.
 */
inline CutResult fine_cut(const TriangleMesh& mesh, const CutPlan& plan, const std::vector<bool>& region_mask)
{
    plan.validate();
    const std::size_t n = mesh.num_vertices();
    if (region_mask.size() != n) {
        throw Error(ErrorCode::InvalidArgument, "region mask size differs from vertex count");
    }
    const auto& verts = mesh.vertices();
    std::vector<double> phi(n);
    for (std::size_t i = 0; i < n; ++i) {
        phi[i] = plan.phi(verts[i]);
    }
    auto in_band = [&](int v) { return region_mask[v] && std::abs(phi[v]) < plan.margin; };

    // Seed: band vertices of the region face nearest to p_r, else the nearest band vertex.
    int nearest_face = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t fi = 0; fi < mesh.num_faces(); ++fi) {
        const Face& f = mesh.faces()[fi];
        if (!region_mask[f[0]] || !region_mask[f[1]] || !region_mask[f[2]]) {
            continue;
        }
        const double d =
            (closest_point_on_triangle(plan.cut_point, verts[f[0]], verts[f[1]], verts[f[2]]) - plan.cut_point)
                .squaredNorm();
        if (d < best) {
            best = d;
            nearest_face = static_cast<int>(fi);
        }
    }
    std::vector<int> seeds;
    if (nearest_face >= 0) {
        for (int v : mesh.faces()[nearest_face]) {
            if (in_band(v)) {
                seeds.push_back(v);
            }
        }
    }
    if (seeds.empty()) {
        int nearest = -1;
        double dn = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const double d = (verts[i] - plan.cut_point).squaredNorm();
            if (in_band(static_cast<int>(i)) && d < dn) {
                dn = d;
                nearest = static_cast<int>(i);
            }
        }
        if (nearest < 0) {
            throw Error(ErrorCode::NoBandVertices, "no limb vertex lies within the cut band");
        }
        seeds.push_back(nearest);
    }

    const auto nbrs = vertex_neighbors(mesh);
    std::vector<bool> ring(n, false);
    std::deque<int> queue;
    for (int s : seeds) {
        ring[s] = true;
        queue.push_back(s);
    }
    while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        for (int w : nbrs[v]) {
            if (!ring[w] && in_band(w)) {
                ring[w] = true;
                queue.push_back(w);
            }
        }
    }

    std::vector<bool> remove(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        remove[i] = region_mask[i] && phi[i] > plan.margin && !ring[i];
    }

    // Boundary edges already open before the cut are not part of it.
    std::unordered_set<std::uint64_t> pre_boundary;
    for (const auto& [key, use] : detail::edge_uses(mesh.faces())) {
        if (use.count == 1) {
            pre_boundary.insert(key);
        }
    }

    CutResult out;
    out.old_to_new.resize(n);
    std::iota(out.old_to_new.begin(), out.old_to_new.end(), 0);
    TriangleMesh current = mesh;
    std::vector<bool> region = region_mask;
    std::vector<bool> drop = remove;

    auto apply = [&](const std::vector<bool>& del) {
        VertexRemoval r = remove_vertices(current, del, region);
        region = remap(region, r.old_to_new, r.mesh.num_vertices());
        out.old_to_new = compose(out.old_to_new, r.old_to_new);
        current = std::move(r.mesh);
    };
    apply(drop);

    auto is_region = [&](int v) { return static_cast<bool>(region[v]); };
    std::vector<int> new_to_old(current.num_vertices(), -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (out.old_to_new[i] >= 0) {
            new_to_old[out.old_to_new[i]] = static_cast<int>(i);
        }
    }
    auto created_by_cut = [&](const BoundaryLoop& loop) {
        const auto& vi = loop.vertex_indices;
        for (std::size_t k = 0; k < vi.size(); ++k) {
            const int a = vi[k];
            const int b = vi[(k + 1) % vi.size()];
            if (!loop.is_closed && k + 1 == vi.size()) {
                break;
            }
            if (!pre_boundary.contains(detail::edge_key(new_to_old[a], new_to_old[b]))) {
                return true;
            }
        }
        return false;
    };

    // Removing a vertex can leave a bow-tie on the new boundary; shave those
    // region vertices off until the boundary is a set of simple loops.
    std::vector<BoundaryLoop> loops;
    for (int attempt = 0;; ++attempt) {
        try {
            loops = extract_boundary_loops(current, is_region);
            break;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NonManifoldBoundary || attempt >= 16) {
                throw;
            }
            std::vector<bool> del(current.num_vertices(), false);
            for (int v : e.indices()) {
                if (!region[v]) {
                    throw;
                }
                del[v] = true;
            }
            apply(del);
            new_to_old.assign(current.num_vertices(), -1);
            for (std::size_t i = 0; i < n; ++i) {
                if (out.old_to_new[i] >= 0) {
                    new_to_old[out.old_to_new[i]] = static_cast<int>(i);
                }
            }
        }
    }

    std::vector<BoundaryLoop> cut_loops;
    for (auto& l : loops) {
        if (created_by_cut(l)) {
            cut_loops.push_back(std::move(l));
        }
    }
    if (cut_loops.empty()) {
        throw Error(ErrorCode::NoBandVertices, "the cut band does not separate any geometry");
    }
    std::stable_sort(cut_loops.begin(), cut_loops.end(),
                     [](const BoundaryLoop& a, const BoundaryLoop& b) { return a.size() > b.size(); });
    const BoundaryLoop& main = cut_loops.front();
    if (!main.is_closed) {
        throw Error(ErrorCode::NonManifoldBoundary, "the cut boundary is an open chain", main.vertex_indices);
    }
    if (cut_loops.size() > 1) {
        const auto comp = vertex_components(current);
        const int main_comp = comp[main.vertex_indices.front()];
        std::vector<bool> del(current.num_vertices(), false);
        bool any = false;
        for (std::size_t k = 1; k < cut_loops.size(); ++k) {
            const auto& l = cut_loops[k];
            const int c = comp[l.vertex_indices.front()];
            if (10 * l.size() >= main.size() || c == main_comp) {
                std::vector<int> sizes;
                for (const auto& cl : cut_loops) {
                    sizes.push_back(static_cast<int>(cl.size()));
                }
                throw Error(ErrorCode::MultipleBoundaryComponents,
                            "cut produced " + std::to_string(cut_loops.size()) + " boundary loops", sizes);
            }
            for (std::size_t v = 0; v < current.num_vertices(); ++v) {
                if (comp[v] == c && region[v]) {
                    del[v] = true;
                    any = true;
                }
            }
        }
        BoundaryLoop kept = main;
        if (any) {
            VertexRemoval r = remove_vertices(current, del, region);
            region = remap(region, r.old_to_new, r.mesh.num_vertices());
            out.old_to_new = compose(out.old_to_new, r.old_to_new);
            for (int& v : kept.vertex_indices) {
                v = r.old_to_new[v];
            }
            current = std::move(r.mesh);
        }
        out.raw_boundary = std::move(kept);
    } else {
        out.raw_boundary = main;
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (ring[i] && out.old_to_new[i] >= 0) {
            out.protective_ring.push_back(out.old_to_new[i]);
        }
    }
    out.region_mask = std::move(region);
    out.mesh = std::move(current);
    return out;
}

/**
 * Iteratively removes loop vertices of mesh degree <= 2 (single-face spikes)
 * and re-extracts the loop until none remain.
 */
inline SpikePruneResult prune_boundary_spikes(const TriangleMesh& mesh, const BoundaryLoop& loop)
{
    for (int v : loop.vertex_indices) {
        if (v < 0 || v >= static_cast<int>(mesh.num_vertices())) {
            throw Error(ErrorCode::InvalidArgument, "loop vertex " + std::to_string(v) + " is out of range", {v});
        }
    }
    SpikePruneResult out;
    out.mesh = mesh;
    out.loop = loop;
    out.old_to_new.resize(mesh.num_vertices());
    std::iota(out.old_to_new.begin(), out.old_to_new.end(), 0);

    while (true) {
        if (out.loop.size() < 3) {
            throw Error(ErrorCode::LoopCollapsed,
                        "boundary loop has " + std::to_string(out.loop.size()) + " vertices after spike pruning");
        }
        const auto nbrs = vertex_neighbors(out.mesh);
        std::vector<bool> del(out.mesh.num_vertices(), false);
        std::vector<bool> on_loop(out.mesh.num_vertices(), false);
        bool any = false;
        for (int v : out.loop.vertex_indices) {
            on_loop[v] = true;
            if (nbrs[v].size() <= 2) {
                del[v] = true;
                any = true;
            }
        }
        if (!any) {
            return out;
        }
        ++out.iterations;
        VertexRemoval r = remove_vertices(out.mesh, del, on_loop);
        out.old_to_new = compose(out.old_to_new, r.old_to_new);
        std::vector<bool> was_on_loop(r.mesh.num_vertices(), false);
        for (int v : out.loop.vertex_indices) {
            if (r.old_to_new[v] >= 0) {
                was_on_loop[r.old_to_new[v]] = true;
            }
        }
        out.mesh = std::move(r.mesh);
        const auto loops = extract_boundary_loops(out.mesh, [&](int v) { return static_cast<bool>(was_on_loop[v]); });
        // Continue with the loop sharing the most vertices with the previous one.
        const BoundaryLoop* pick = nullptr;
        std::size_t overlap = 0;
        for (const auto& l : loops) {
            std::size_t c = 0;
            for (int v : l.vertex_indices) {
                c += was_on_loop[v] ? 1 : 0;
            }
            if (c > overlap) {
                overlap = c;
                pick = &l;
            }
        }
        if (pick == nullptr) {
            throw Error(ErrorCode::LoopCollapsed, "boundary loop vanished during spike pruning");
        }
        out.loop = *pick;
    }
}

/// Least-squares plane through the points; the normal is flipped to agree
/// with `reference` when one is given.
inline BoundaryPlane fit_boundary_plane(const std::vector<Vec3>& points, const Vec3& reference = Vec3::Zero())
{
    if (points.size() < 3) {
        throw Error(ErrorCode::DegenerateLoop, "a plane needs at least 3 points");
    }
    BoundaryPlane plane;
    for (const Vec3& p : points) {
        plane.centroid += p;
    }
    plane.centroid /= static_cast<double>(points.size());
    Mat3 cov = Mat3::Zero();
    for (const Vec3& p : points) {
        const Vec3 d = p - plane.centroid;
        cov += d * d.transpose();
    }
    cov /= static_cast<double>(points.size());
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 ev = eig.eigenvalues(); // ascending
    if (ev[1] - ev[0] <= 1e-12) {
        throw Error(ErrorCode::DegenerateLoop, "boundary points are collinear or coincident");
    }
    plane.normal = eig.eigenvectors().col(0).normalized();
    if (plane.normal.dot(reference) < 0.0) {
        plane.normal = -plane.normal;
    }
    return plane;
}

/**
 * Closes a boundary loop with two shrinking rings offset by h and 2h along
 * the plane normal and an apex at 3h.
 *
 * Adds 2n + 1 vertices and 5n faces (two quad strips and a fan). Throws
 * SelfIntersectingSeal if an added face crosses a face whose vertices all lie
 * in `kept_region` (every face when the mask is empty) without sharing a
 * vertex with it.
 */
inline SealedStump seal_stump(const TriangleMesh& mesh, const BoundaryLoop& loop, const BoundaryPlane& plane,
                              double h, double shrink = kDefaultShrink, const std::vector<bool>& kept_region = {})
{
    const int n = static_cast<int>(loop.size());
    if (!loop.is_closed || n < 3) {
        throw Error(ErrorCode::DegenerateLoop, "sealing needs a closed loop of at least 3 vertices");
    }
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw Error(ErrorCode::InvalidArgument, "ring offset h must be positive");
    }
    if (!(shrink > 0.0 && shrink < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "shrink must lie in (0, 1)");
    }
    const int nv = static_cast<int>(mesh.num_vertices());
    for (int v : loop.vertex_indices) {
        if (v < 0 || v >= nv) {
            throw Error(ErrorCode::InvalidArgument, "loop vertex " + std::to_string(v) + " is out of range", {v});
        }
    }

    // Walk the loop along the winding of its incident faces so that the new
    // faces traverse each rim edge in the opposite direction.
    std::vector<int> b = loop.vertex_indices;
    {
        const auto uses = detail::edge_uses(mesh.faces());
        const auto it = uses.find(detail::edge_key(b[0], b[1]));
        if (it == uses.end() || it->second.count != 1) {
            throw Error(ErrorCode::InvalidArgument, "loop edge is not a boundary edge of the mesh", {b[0], b[1]});
        }
        if (it->second.from != b[0]) {
            std::reverse(b.begin() + 1, b.end());
        }
    }

    const auto& verts = mesh.vertices();
    const Vec3& c = plane.centroid;
    const Vec3& nrm = plane.normal;
    std::vector<Vec3> out_v = verts;
    out_v.reserve(verts.size() + 2 * n + 1);
    const int r0 = nv;
    const int s0 = nv + n;
    const int apex = nv + 2 * n;
    for (int i = 0; i < n; ++i) {
        out_v.push_back(c + shrink * (verts[b[i]] - c) + h * nrm);
    }
    for (int i = 0; i < n; ++i) {
        out_v.push_back(c + shrink * shrink * (verts[b[i]] - c) + 2.0 * h * nrm);
    }
    out_v.push_back(c + 3.0 * h * nrm);

    std::vector<Face> added;
    added.reserve(5 * n);
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        added.push_back({b[j], b[i], r0 + i});
        added.push_back({b[j], r0 + i, r0 + j});
    }
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        added.push_back({r0 + j, r0 + i, s0 + i});
        added.push_back({r0 + j, s0 + i, s0 + j});
    }
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        added.push_back({s0 + j, s0 + i, apex});
    }

    // Self-intersection against the kept surface near the cap.
    Eigen::AlignedBox3d cap_box;
    for (const Face& f : added) {
        for (int v : f) {
            cap_box.extend(out_v[v]);
        }
    }
    for (const Face& f : mesh.faces()) {
        if (!kept_region.empty() && !(kept_region[f[0]] && kept_region[f[1]] && kept_region[f[2]])) {
            continue;
        }
        Eigen::AlignedBox3d fb;
        for (int v : f) {
            fb.extend(verts[v]);
        }
        if (!fb.intersects(cap_box)) {
            continue;
        }
        const std::array<Vec3, 3> tf{verts[f[0]], verts[f[1]], verts[f[2]]};
        for (const Face& a : added) {
            bool shares = false;
            for (int u : a) {
                shares = shares || u == f[0] || u == f[1] || u == f[2];
            }
            if (shares) {
                continue;
            }
            if (triangles_intersect({out_v[a[0]], out_v[a[1]], out_v[a[2]]}, tf)) {
                throw Error(ErrorCode::SelfIntersectingSeal, "stump cap intersects the kept surface",
                            {f[0], f[1], f[2]});
            }
        }
    }

    std::vector<Face> out_f = mesh.faces();
    const int f0 = static_cast<int>(out_f.size());
    out_f.insert(out_f.end(), added.begin(), added.end());
    SealedStump out;
    out.mesh = TriangleMesh(std::move(out_v), std::move(out_f));
    out.new_vertex_range = {nv, nv + 2 * n + 1};
    out.new_face_range = {f0, f0 + 5 * n};
    out.ring_offset_h = h;
    return out;
}

struct ReconstructionParams {
    std::optional<double> margin; // default: 2x median limb edge length
    std::optional<double> h;      // default: 0.25x mean loop radius
    double shrink = kDefaultShrink;
};

struct LimbReconstruction {
    SealedStump stump;
    ArticulatedBody body; // edited body; added vertices carry the kept part label
    CutPlan plan;
    BoundaryLoop boundary; // cleaned loop the cap was attached to
    BoundaryPlane boundary_plane;
    std::vector<int> old_to_new; // input vertex -> output vertex, -1 if removed
    int spike_iterations = 0;
};

/**
 * coarse_prune -> fine_cut -> prune_boundary_spikes -> fit_boundary_plane ->
 * seal_stump. Errors carry the stage that raised them.
 */
inline LimbReconstruction reconstruct_residual_limb(const ArticulatedBody& body, const RafoResult& rafo, LimbId limb,
                                                    const Vec3& target_init, const LimbPartTable& parts,
                                                    const ReconstructionParams& params = {})
{
    LimbReconstruction out;
    out.plan = detail::staged("compute_cut_plan",
                              [&] { return compute_cut_plan(rafo, target_init, body, limb, parts, params.margin); });
    const PruneResult pruned = detail::staged("coarse_prune", [&] { return coarse_prune(body, out.plan); });

    std::vector<bool> region(pruned.mesh.num_vertices());
    for (std::size_t i = 0; i < region.size(); ++i) {
        region[i] = out.plan.limb_part_ids.contains(pruned.part_labels[i]);
    }
    const CutResult cut = detail::staged("fine_cut", [&] { return fine_cut(pruned.mesh, out.plan, region); });
    std::vector<int> labels = remap(pruned.part_labels, cut.old_to_new, cut.mesh.num_vertices());
    region = cut.region_mask;

    const SpikePruneResult clean =
        detail::staged("prune_boundary_spikes", [&] { return prune_boundary_spikes(cut.mesh, cut.raw_boundary); });
    labels = remap(labels, clean.old_to_new, clean.mesh.num_vertices());
    region = remap(region, clean.old_to_new, clean.mesh.num_vertices());
    out.spike_iterations = clean.iterations;
    out.boundary = clean.loop;

    std::vector<Vec3> rim;
    rim.reserve(clean.loop.size());
    for (int v : clean.loop.vertex_indices) {
        rim.push_back(clean.mesh.vertices()[v]);
    }
    out.boundary_plane =
        detail::staged("fit_boundary_plane", [&] { return fit_boundary_plane(rim, out.plan.normal); });

    double h = 0.0;
    if (params.h) {
        h = *params.h;
    } else {
        double radius = 0.0;
        for (const Vec3& p : rim) {
            radius += (p - out.boundary_plane.centroid).norm();
        }
        h = 0.25 * radius / static_cast<double>(rim.size());
    }
    out.stump = detail::staged("seal_stump", [&] {
        return seal_stump(clean.mesh, clean.loop, out.boundary_plane, h, params.shrink, region);
    });

    // Cap vertices take the most common kept label on the rim.
    std::map<int, int> votes;
    for (int v : clean.loop.vertex_indices) {
        ++votes[labels[v]];
    }
    const int cap_label =
        std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) { return a.second < b.second; })
            ->first;
    labels.resize(out.stump.mesh.num_vertices(), cap_label);

    out.old_to_new = compose(compose(pruned.old_to_new, cut.old_to_new), clean.old_to_new);
    out.body = ArticulatedBody(out.stump.mesh, body.skeleton(), std::move(labels), body.part_names());
    return out;
}

} // namespace residuum

#endif // RESIDUUM_MESHEDIT_HPP_
