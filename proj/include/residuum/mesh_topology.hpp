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

#ifndef RESIDUUM_MESH_TOPOLOGY_HPP_
#define RESIDUUM_MESH_TOPOLOGY_HPP_

#include "residuum/core_types.hpp"
#include "residuum/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <unordered_map>
#include <utility>
#include <vector>

namespace residuum {

/// A maximal chain of boundary edges (edges used by exactly one face).
/// Closed loops follow the winding of their incident faces.
struct BoundaryLoop {
    std::vector<int> vertex_indices;
    bool is_closed = false;

    std::size_t size() const noexcept { return vertex_indices.size(); }
};

namespace detail {

inline std::uint64_t edge_key(int a, int b)
{
    const auto lo = static_cast<std::uint32_t>(std::min(a, b));
    const auto hi = static_cast<std::uint32_t>(std::max(a, b));
    return (static_cast<std::uint64_t>(lo) << 32) | hi;
}

struct EdgeUse {
    int count = 0;
    int from = -1; // direction of the first face using the edge
    int to = -1;
};

inline std::unordered_map<std::uint64_t, EdgeUse> edge_uses(const std::vector<Face>& faces)
{
    std::unordered_map<std::uint64_t, EdgeUse> uses;
    uses.reserve(faces.size() * 2);
    for (const Face& f : faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k];
            const int b = f[(k + 1) % 3];
            EdgeUse& u = uses[edge_key(a, b)];
            if (u.count++ == 0) {
                u.from = a;
                u.to = b;
            }
        }
    }
    return uses;
}

} // namespace detail

/// Sorted, de-duplicated vertex neighbours.
inline std::vector<std::vector<int>> vertex_neighbors(const TriangleMesh& mesh)
{
    std::vector<std::vector<int>> nbrs(mesh.num_vertices());
    for (const Face& f : mesh.faces()) {
        for (int k = 0; k < 3; ++k) {
            nbrs[f[k]].push_back(f[(k + 1) % 3]);
            nbrs[f[k]].push_back(f[(k + 2) % 3]);
        }
    }
    for (auto& n : nbrs) {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    return nbrs;
}

inline double median_edge_length(const TriangleMesh& mesh, const std::function<bool(int)>& in_region)
{
    std::vector<double> lengths;
    const auto uses = detail::edge_uses(mesh.faces());
    lengths.reserve(uses.size());
    for (const auto& [key, use] : uses) {
        if (in_region(use.from) && in_region(use.to)) {
            lengths.push_back((mesh.vertices()[use.from] - mesh.vertices()[use.to]).norm());
        }
    }
    if (lengths.empty()) {
        return 0.0;
    }
    const auto mid = lengths.begin() + static_cast<std::ptrdiff_t>(lengths.size() / 2);
    std::nth_element(lengths.begin(), mid, lengths.end());
    return *mid;
}

/**
 * Extracts the boundary loops of a mesh.
 *
 * When `touches` is given only boundary edges with at least one endpoint
 * satisfying it are considered. Throws NonManifoldBoundary, listing the
 * offending vertices, when a vertex has more than two incident boundary edges.
 */
inline std::vector<BoundaryLoop> extract_boundary_loops(const TriangleMesh& mesh,
                                                        const std::function<bool(int)>& touches = {})
{
    const auto uses = detail::edge_uses(mesh.faces());

    // Boundary edges as (from, to) in face winding order.
    std::vector<std::pair<int, int>> edges;
    for (const auto& [key, use] : uses) {
        if (use.count == 1 && (!touches || touches(use.from) || touches(use.to))) {
            edges.emplace_back(use.from, use.to);
        }
    }
    std::sort(edges.begin(), edges.end());

    std::unordered_map<int, std::vector<int>> incident; // vertex -> edge ids
    for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
        incident[edges[e].first].push_back(e);
        incident[edges[e].second].push_back(e);
    }
    std::vector<int> offending;
    for (const auto& [v, es] : incident) {
        if (es.size() > 2) {
            offending.push_back(v);
        }
    }
    if (!offending.empty()) {
        std::sort(offending.begin(), offending.end());
        throw Error(ErrorCode::NonManifoldBoundary,
                    std::to_string(offending.size()) + " vertices have more than two boundary edges", offending);
    }

    std::vector<int> starts;
    starts.reserve(incident.size());
    for (const auto& [v, es] : incident) {
        starts.push_back(v);
    }
    // Open chains first (start at a dangling end), then closed loops, each by vertex id.
    std::sort(starts.begin(), starts.end(), [&](int a, int b) {
        const bool da = incident[a].size() == 1;
        const bool db = incident[b].size() == 1;
        return da != db ? da : a < b;
    });

    std::vector<bool> used(edges.size(), false);
    std::vector<BoundaryLoop> loops;
    for (int start : starts) {
        for (int first_edge : incident[start]) {
            if (used[first_edge]) {
                continue;
            }
            BoundaryLoop loop;
            loop.vertex_indices.push_back(start);
            int v = start;
            int e = first_edge;
            while (e >= 0 && !used[e]) {
                used[e] = true;
                const int w = edges[e].first == v ? edges[e].second : edges[e].first;
                if (w == start) {
                    loop.is_closed = true;
                    break;
                }
                loop.vertex_indices.push_back(w);
                v = w;
                e = -1;
                for (int cand : incident[v]) {
                    if (!used[cand]) {
                        e = cand;
                        break;
                    }
                }
            }
            // Orient along the winding of the first edge.
            if (loop.vertex_indices.size() >= 2) {
                const auto& fe = edges[first_edge];
                if (fe.first != loop.vertex_indices[0]) {
                    if (loop.is_closed) {
                        std::reverse(loop.vertex_indices.begin() + 1, loop.vertex_indices.end());
                    } else {
                        std::reverse(loop.vertex_indices.begin(), loop.vertex_indices.end());
                    }
                }
            }
            loops.push_back(std::move(loop));
        }
    }
    return loops;
}

/// Result of deleting vertices: the compacted mesh and the index map
/// (old index -> new index, -1 for removed).
struct VertexRemoval {
    TriangleMesh mesh;
    std::vector<int> old_to_new;
    std::size_t removed = 0;
};

/**
 * Removes the flagged vertices together with every incident face and
 * compacts the remaining vertices in their original order. Vertices flagged
 * in `drop_if_orphaned` are additionally removed when no surviving face
 * references them.
 */
inline VertexRemoval remove_vertices(const TriangleMesh& mesh, const std::vector<bool>& remove,
                                     const std::vector<bool>& drop_if_orphaned = {})
{
    const std::size_t n = mesh.num_vertices();
    std::vector<bool> gone = remove;
    gone.resize(n, false);

    std::vector<Face> kept_faces;
    kept_faces.reserve(mesh.num_faces());
    std::vector<bool> referenced(n, false);
    for (const Face& f : mesh.faces()) {
        if (!gone[f[0]] && !gone[f[1]] && !gone[f[2]]) {
            kept_faces.push_back(f);
            referenced[f[0]] = referenced[f[1]] = referenced[f[2]] = true;
        }
    }
    for (std::size_t i = 0; i < drop_if_orphaned.size() && i < n; ++i) {
        if (drop_if_orphaned[i] && !referenced[i]) {
            gone[i] = true;
        }
    }

    VertexRemoval out;
    out.old_to_new.assign(n, -1);
    std::vector<Vec3> verts;
    verts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (gone[i]) {
            ++out.removed;
        } else {
            out.old_to_new[i] = static_cast<int>(verts.size());
            verts.push_back(mesh.vertices()[i]);
        }
    }
    for (Face& f : kept_faces) {
        for (int& idx : f) {
            idx = out.old_to_new[idx];
        }
    }
    out.mesh = TriangleMesh(std::move(verts), std::move(kept_faces));
    return out;
}

/// Carries a per-vertex attribute through an index map.
template <class T>
std::vector<T> remap(const std::vector<T>& values, const std::vector<int>& old_to_new, std::size_t new_size)
{
    std::vector<T> out(new_size);
    for (std::size_t i = 0; i < old_to_new.size() && i < values.size(); ++i) {
        if (old_to_new[i] >= 0) {
            out[old_to_new[i]] = values[i];
        }
    }
    return out;
}

/// Composes two index maps: first a, then b.
inline std::vector<int> compose(const std::vector<int>& a, const std::vector<int>& b)
{
    std::vector<int> out(a.size(), -1);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] >= 0 && a[i] < static_cast<int>(b.size())) {
            out[i] = b[a[i]];
        }
    }
    return out;
}

/// Connected component id per vertex (vertices linked by faces); isolated
/// vertices get their own component.
inline std::vector<int> vertex_components(const TriangleMesh& mesh)
{
    std::vector<int> parent(mesh.num_vertices());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    };
    for (const Face& f : mesh.faces()) {
        const int a = find(f[0]);
        const int b = find(f[1]);
        const int c = find(f[2]);
        parent[b] = a;
        parent[find(c)] = a;
    }
    for (std::size_t v = 0; v < parent.size(); ++v) {
        parent[v] = find(static_cast<int>(v));
    }
    return parent;
}

/// Closest point to p on triangle (a, b, c) (Ericson, Real-Time Collision Detection).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) {
        return a;
    }
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) {
        return b;
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        return a + (d1 / (d1 - d3)) * ab;
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) {
        return c;
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        return a + (d2 / (d2 - d6)) * ac;
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    }
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

namespace detail {

// Segment p->q crosses the interior of triangle (a, b, c) (Moller-Trumbore).
inline bool segment_hits_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c)
{
    constexpr double eps = 1e-12;
    const Vec3 dir = q - p;
    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    const Vec3 h = dir.cross(e2);
    const double det = e1.dot(h);
    if (std::abs(det) < eps * e1.norm() * e2.norm() * dir.norm()) {
        return false; // parallel or coplanar
    }
    const double inv = 1.0 / det;
    const Vec3 s = p - a;
    const double u = inv * s.dot(h);
    if (u <= eps || u >= 1.0 - eps) {
        return false;
    }
    const Vec3 qv = s.cross(e1);
    const double v = inv * dir.dot(qv);
    if (v <= eps || u + v >= 1.0 - eps) {
        return false;
    }
    const double t = inv * e2.dot(qv);
    return t > eps && t < 1.0 - eps;
}

} // namespace detail

/// Proper (non-touching) intersection between two triangles. Coplanar
/// overlaps are not reported.
inline bool triangles_intersect(const std::array<Vec3, 3>& t1, const std::array<Vec3, 3>& t2)
{
    for (int k = 0; k < 3; ++k) {
        if (detail::segment_hits_triangle(t1[k], t1[(k + 1) % 3], t2[0], t2[1], t2[2]) ||
            detail::segment_hits_triangle(t2[k], t2[(k + 1) % 3], t1[0], t1[1], t1[2])) {
            return true;
        }
    }
    return false;
}

} // namespace residuum

#endif // RESIDUUM_MESH_TOPOLOGY_HPP_
