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
#include "residuum/meshedit.hpp"
#include "test_support.hpp"

#include "catch_amalgamated.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

using namespace residuum;
using Catch::Matchers::WithinAbs;

namespace {

template <class F>
Error capture(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e;
    }
    FAIL("expected an Error");
    return Error(ErrorCode::InvalidArgument, "unreachable");
}

constexpr int kUpper = 1;
constexpr int kFore = 2;
constexpr int kOther = 3;

// Right-hand-side reference arm (part 3) first, then upper arm (1) from the
// shoulder at the origin to the elbow at y = 0.3, then forearm (2) to y = 0.56.
struct Arm {
    ArticulatedBody body;
    int other_vertices = 0;
    int fore_vertices = 0;
    Vec3 shoulder{0, 0, 0};
    Vec3 elbow{0, 0.3, 0};
};

Arm make_arm(int segments = 32, int upper_rings = 31)
{
    std::vector<Vec3> v;
    std::vector<Face> f;
    std::vector<int> labels;
    auto add = [&](const std::pair<std::vector<Vec3>, std::vector<Face>>& part, int label) {
        v.insert(v.end(), part.first.begin(), part.first.end());
        f.insert(f.end(), part.second.begin(), part.second.end());
        labels.insert(labels.end(), part.first.size(), label);
    };
    Arm arm;
    add(testing::capped_cylinder(32, 31, 0.05, Vec3(0.5, 0, 0), Vec3(0.5, 0.3, 0)), kOther);
    arm.other_vertices = static_cast<int>(v.size());
    add(testing::capped_cylinder(segments, upper_rings, 0.05, arm.shoulder, arm.elbow, static_cast<int>(v.size())),
        kUpper);
    const std::size_t before = v.size();
    add(testing::capped_cylinder(32, 27, 0.04, Vec3(0, 0.305, 0), Vec3(0, 0.56, 0), static_cast<int>(v.size())),
        kFore);
    arm.fore_vertices = static_cast<int>(v.size() - before);
    const KinematicTree tree({arm.shoulder, arm.elbow, Vec3(0, 0.56, 0)}, {-1, 0, 1});
    arm.body = ArticulatedBody(TriangleMesh(std::move(v), std::move(f)), tree, std::move(labels),
                               {{kUpper, "upper_arm"}, {kFore, "forearm"}, {kOther, "other_arm"}});
    return arm;
}

LimbPartTable arm_parts()
{
    return {{LimbId::LeftUpperArm, LimbParts{{kUpper}, {kFore}}}};
}

// Accepted fit with the elbow as anchor (distal joint) at lambda.
RafoResult arm_fit(const Arm& arm, double lambda)
{
    RafoResult r;
    r.anchor_opt = arm.elbow;
    r.lambda_opt = lambda;
    r.accepted = true;
    return r;
}

// Tube along +z, closed at the bottom, open rim at the top.
TriangleMesh open_top_tube(int segments)
{
    auto [v, f] = testing::capped_cylinder(segments, 12, 0.05, Vec3(0, 0, 0), Vec3(0, 0, 0.3));
    std::vector<bool> remove(v.size(), false);
    remove.back() = true; // top apex
    return remove_vertices(TriangleMesh(std::move(v), std::move(f)), remove).mesh;
}

TriangleMesh cube()
{
    std::vector<Vec3> v;
    for (int i = 0; i < 8; ++i) {
        v.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    }
    std::vector<Face> f = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                           {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    return TriangleMesh(std::move(v), std::move(f));
}

bool loop_edges_are_boundary(const TriangleMesh& mesh, const BoundaryLoop& loop)
{
    const auto mult = testing::edge_multiplicity(mesh.faces());
    const auto& vi = loop.vertex_indices;
    std::set<int> seen(vi.begin(), vi.end());
    if (seen.size() != vi.size()) {
        return false;
    }
    for (std::size_t k = 0; k < vi.size(); ++k) {
        const auto it = mult.find(testing::edge_key(vi[k], vi[(k + 1) % vi.size()]));
        if (it == mult.end() || it->second != 1) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("compute_cut_plan: cut point and distal normal")
{
    const Arm arm = make_arm();
    RafoResult r;
    r.anchor_opt = Vec3(0, 0, 0);
    r.lambda_opt = 0.5;
    r.accepted = true;
    const CutPlan plan = compute_cut_plan(r, Vec3(0, 1, 0), arm.body, LimbId::LeftUpperArm, arm_parts());
    REQUIRE((plan.cut_point - Vec3(0, 0.5, 0)).norm() < 1e-15);
    REQUIRE((plan.normal - Vec3(0, -1, 0)).norm() < 1e-15);
    REQUIRE(plan.margin > 0.0);
    REQUIRE(plan.phi(plan.cut_point) == 0.0);
    REQUIRE(plan.limb_part_ids == std::set<int>{kUpper});
    REQUIRE(plan.distal_part_ids == std::set<int>{kFore});

    // Margin: twice the median edge length of the kept submesh.
    const double med = median_edge_length(arm.body.mesh(), [&](int v) { return arm.body.part_labels()[v] == kUpper; });
    REQUIRE_THAT(plan.margin, WithinAbs(2.0 * med, 1e-15));
}

TEST_CASE("compute_cut_plan: lambda_min stays next to the anchor")
{
    const Arm arm = make_arm();
    const CutPlan plan =
        compute_cut_plan(arm_fit(arm, 0.02), arm.shoulder, arm.body, LimbId::LeftUpperArm, arm_parts());
    REQUIRE((plan.cut_point - arm.elbow).norm() <= 0.02 * 0.3 + 1e-12);
}

TEST_CASE("compute_cut_plan: preconditions")
{
    const Arm arm = make_arm();
    RafoResult rejected = arm_fit(arm, 0.5);
    rejected.accepted = false;
    REQUIRE(capture([&] { compute_cut_plan(rejected, arm.shoulder, arm.body, LimbId::LeftUpperArm, arm_parts()); })
                .code() == ErrorCode::RejectedRafoResult);
    REQUIRE(capture([&] {
                compute_cut_plan(arm_fit(arm, 0.5), arm.elbow + Vec3(1e-7, 0, 0), arm.body, LimbId::LeftUpperArm,
                                 arm_parts());
            }).code() == ErrorCode::DegenerateSegment);
    LimbPartTable bad = {{LimbId::LeftUpperArm, LimbParts{{kUpper}, {42}}}};
    REQUIRE(capture([&] { compute_cut_plan(arm_fit(arm, 0.5), arm.shoulder, arm.body, LimbId::LeftUpperArm, bad); })
                .code() == ErrorCode::UnknownPartId);
    REQUIRE(capture([&] {
                compute_cut_plan(arm_fit(arm, 0.5), arm.shoulder, arm.body, LimbId::RightShank, arm_parts());
            }).code() == ErrorCode::UnknownPartId);
}

TEST_CASE("coarse_prune")
{
    const Arm arm = make_arm();
    CutPlan plan = compute_cut_plan(arm_fit(arm, 0.5), arm.shoulder, arm.body, LimbId::LeftUpperArm, arm_parts());

    SECTION("empty distal set leaves the mesh unchanged")
    {
        CutPlan none = plan;
        none.distal_part_ids.clear();
        const PruneResult r = coarse_prune(arm.body, none);
        REQUIRE(r.mesh.vertices() == arm.body.mesh().vertices());
        REQUIRE(r.mesh.faces() == arm.body.mesh().faces());
    }
    SECTION("removes exactly the labelled vertices and their faces")
    {
        const PruneResult r = coarse_prune(arm.body, plan);
        REQUIRE(r.mesh.num_vertices() == arm.body.mesh().num_vertices() - arm.fore_vertices);
        const auto touching = testing::faces_touching(arm.body.mesh(), [&](int v) {
            return arm.body.part_labels()[v] == kFore;
        });
        REQUIRE(r.mesh.num_faces() == arm.body.mesh().num_faces() - touching.size());
        for (int label : r.part_labels) {
            REQUIRE(label != kFore);
        }
        for (std::size_t i = 0; i < r.kept_vertex_mask.size(); ++i) {
            REQUIRE(r.kept_vertex_mask[i] == (arm.body.part_labels()[i] != kFore));
        }
    }
    SECTION("unknown part id")
    {
        CutPlan bad = plan;
        bad.distal_part_ids = {99};
        REQUIRE(capture([&] { coarse_prune(arm.body, bad); }).code() == ErrorCode::UnknownPartId);
    }
}

TEST_CASE("extract_boundary_loops")
{
    REQUIRE(extract_boundary_loops(cube()).empty());

    const TriangleMesh tri({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}});
    const auto one = extract_boundary_loops(tri);
    REQUIRE(one.size() == 1);
    REQUIRE(one[0].is_closed);
    REQUIRE(one[0].size() == 3);
    REQUIRE(one[0].vertex_indices == std::vector<int>{0, 1, 2}); // face winding

    const TriangleMesh tube = testing::open_cylinder(64, 10, 0.05, 0.0, 1.0);
    const auto rims = extract_boundary_loops(tube);
    REQUIRE(rims.size() == 2);
    for (const auto& l : rims) {
        REQUIRE(l.is_closed);
        REQUIRE(l.size() == 64);
        REQUIRE(loop_edges_are_boundary(tube, l));
    }

    // Two triangles touching at one vertex: a bow-tie boundary.
    const TriangleMesh bowtie({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(-1, 0, 0), Vec3(0, -1, 0)},
                              {{0, 1, 2}, {0, 3, 4}});
    const Error e = capture([&] { extract_boundary_loops(bowtie); });
    REQUIRE(e.code() == ErrorCode::NonManifoldBoundary);
    REQUIRE(e.indices() == std::vector<int>{0});
}

TEST_CASE("fine_cut: cylinder cut at mid-height")
{
    const TriangleMesh tube = testing::open_cylinder(64, 100, 0.05, 0.0, 1.0);
    CutPlan plan;
    plan.cut_point = Vec3(0, 0, 0.5);
    plan.normal = Vec3(0, 0, 1);
    plan.margin = 2.0 * median_edge_length(tube, [](int) { return true; });
    const std::vector<bool> region(tube.num_vertices(), true);

    const CutResult cut = fine_cut(tube, plan, region);
    REQUIRE(cut.raw_boundary.is_closed);
    REQUIRE(cut.raw_boundary.size() == 64);
    REQUIRE(loop_edges_are_boundary(cut.mesh, cut.raw_boundary));
    for (int v : cut.raw_boundary.vertex_indices) {
        REQUIRE(plan.phi(cut.mesh.vertices()[v]) <= plan.margin);
    }
    std::set<int> ring(cut.protective_ring.begin(), cut.protective_ring.end());
    REQUIRE_FALSE(ring.empty());
    for (std::size_t i = 0; i < tube.num_vertices(); ++i) {
        const double phi = plan.phi(tube.vertices()[i]);
        if (cut.old_to_new[i] < 0) {
            REQUIRE(phi > plan.margin);
        } else {
            REQUIRE((phi <= plan.margin || ring.contains(cut.old_to_new[i])));
            REQUIRE(cut.mesh.vertices()[cut.old_to_new[i]] == tube.vertices()[i]);
        }
    }
    // The untouched bottom rim is not reported as the cut boundary.
    REQUIRE(extract_boundary_loops(cut.mesh).size() == 2);
}

TEST_CASE("fine_cut: cut point outside the mesh")
{
    const TriangleMesh tube = testing::open_cylinder(64, 100, 0.05, 0.0, 1.0);
    CutPlan plan;
    plan.cut_point = Vec3(0, 0, 1.5);
    plan.normal = Vec3(0, 0, 1);
    plan.margin = 0.02;
    REQUIRE(capture([&] { fine_cut(tube, plan, std::vector<bool>(tube.num_vertices(), true)); }).code() ==
            ErrorCode::NoBandVertices);
}

TEST_CASE("fine_cut: only the kept region is cut")
{
    const Arm arm = make_arm();
    CutPlan plan = compute_cut_plan(arm_fit(arm, 0.5), arm.shoulder, arm.body, LimbId::LeftUpperArm, arm_parts());
    // Push the reference arm into the removed half-space: it must survive.
    std::vector<bool> region(arm.body.mesh().num_vertices());
    for (std::size_t i = 0; i < region.size(); ++i) {
        region[i] = arm.body.part_labels()[i] == kUpper;
    }
    const CutResult cut = fine_cut(arm.body.mesh(), plan, region);
    for (int i = 0; i < arm.other_vertices; ++i) {
        REQUIRE(cut.old_to_new[i] == i);
    }
    for (std::size_t i = 0; i < region.size(); ++i) {
        if (arm.body.part_labels()[i] == kFore) {
            REQUIRE(cut.old_to_new[i] >= 0);
        }
    }
}

TEST_CASE("prune_boundary_spikes")
{
    const TriangleMesh tube = testing::open_cylinder(64, 10, 0.05, 0.0, 1.0);
    const auto rims = extract_boundary_loops(tube);
    // Rim at z = 1 (vertices 576..639).
    const BoundaryLoop top = rims[0].vertex_indices.front() >= 576 ? rims[0] : rims[1];
    REQUIRE(top.vertex_indices.front() >= 576);

    SECTION("clean rim is a fixed point")
    {
        const auto r = prune_boundary_spikes(tube, top);
        REQUIRE(r.iterations == 0);
        REQUIRE(r.loop.vertex_indices == top.vertex_indices);
        REQUIRE(r.mesh.num_vertices() == tube.num_vertices());
    }

    // Dangling triangle on the rim edge (a -> b), oriented with the tube.
    const int a = top.vertex_indices[0];
    const int b = top.vertex_indices[1];
    std::vector<Vec3> v = tube.vertices();
    std::vector<Face> f = tube.faces();
    const Vec3 mid = 0.5 * (v[a] + v[b]);
    v.push_back(mid + Vec3(0, 0, 0.02));
    const int q1 = static_cast<int>(v.size()) - 1;
    f.push_back({b, a, q1});

    SECTION("single spike")
    {
        const TriangleMesh spiky(v, f);
        const auto loops = extract_boundary_loops(spiky, [&](int x) { return x >= 576; });
        REQUIRE(loops.size() == 1);
        REQUIRE(loops[0].size() == 65);
        const auto r = prune_boundary_spikes(spiky, loops[0]);
        REQUIRE(r.iterations == 1);
        REQUIRE(r.loop.size() == 64);
        REQUIRE(r.old_to_new[q1] == -1);
        REQUIRE(r.mesh.num_vertices() == tube.num_vertices());
        REQUIRE(r.mesh.num_faces() == tube.num_faces());
    }
    SECTION("two stacked spikes")
    {
        v.push_back(0.5 * (v[a] + v[q1]) + Vec3(0, 0, 0.02));
        const int q2 = static_cast<int>(v.size()) - 1;
        f.push_back({q1, a, q2});
        const TriangleMesh spiky(v, f);
        const auto loops = extract_boundary_loops(spiky, [&](int x) { return x >= 576; });
        REQUIRE(loops[0].size() == 66);
        const auto r = prune_boundary_spikes(spiky, loops[0]);
        REQUIRE(r.iterations == 2);
        REQUIRE(r.loop.size() == 64);
        REQUIRE(r.old_to_new[q1] == -1);
        REQUIRE(r.old_to_new[q2] == -1);
        const auto nbrs = vertex_neighbors(r.mesh);
        for (int x : r.loop.vertex_indices) {
            REQUIRE(nbrs[x].size() >= 3);
        }
    }
    SECTION("a lone triangle collapses")
    {
        const TriangleMesh tri({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}});
        REQUIRE(capture([&] { prune_boundary_spikes(tri, extract_boundary_loops(tri)[0]); }).code() ==
                ErrorCode::LoopCollapsed);
    }
}

TEST_CASE("fit_boundary_plane")
{
    std::vector<Vec3> ring;
    for (int i = 0; i < 64; ++i) {
        const double t = 2.0 * std::numbers::pi * i / 64;
        ring.emplace_back(0.05 * std::cos(t), 0.05 * std::sin(t), 0.5);
    }
    const BoundaryPlane p = fit_boundary_plane(ring, Vec3(0, 0, 1));
    REQUIRE_THAT(p.centroid.z(), WithinAbs(0.5, 1e-12));
    REQUIRE((p.normal - Vec3(0, 0, 1)).norm() < 1e-9);
    REQUIRE(fit_boundary_plane(ring, Vec3(0, 0, -1)).normal.z() < 0.0);

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> noise(-1e-4, 1e-4);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Vec3> noisy = ring;
        for (Vec3& x : noisy) {
            x += Vec3(noise(rng), noise(rng), noise(rng));
        }
        const BoundaryPlane np = fit_boundary_plane(noisy, Vec3(0, 0, 1));
        REQUIRE(std::acos(std::min(1.0, np.normal.dot(Vec3(0, 0, 1)))) < 0.01);
    }

    REQUIRE(capture([] { fit_boundary_plane({Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(2, 2, 2)}); }).code() ==
            ErrorCode::DegenerateLoop);
    REQUIRE(capture([] { fit_boundary_plane({Vec3(0, 0, 0), Vec3(1, 1, 1)}); }).code() == ErrorCode::DegenerateLoop);
}

TEST_CASE("seal_stump: 64-vertex rim")
{
    const TriangleMesh tube = open_top_tube(64);
    REQUIRE_FALSE(testing::closed_surface(tube.faces()));
    const auto loops = extract_boundary_loops(tube);
    REQUIRE(loops.size() == 1);
    std::vector<Vec3> rim;
    for (int v : loops[0].vertex_indices) {
        rim.push_back(tube.vertices()[v]);
    }
    const BoundaryPlane plane = fit_boundary_plane(rim, Vec3(0, 0, 1));

    for (double shrink : {0.6, kDefaultShrink}) {
        const SealedStump s = seal_stump(tube, loops[0], plane, 0.005, shrink);
        // Two rings and an apex: 2n + 1 vertices; two quad strips and a fan: 2n + 2n + n faces.
        REQUIRE(s.mesh.num_vertices() == tube.num_vertices() + 129);
        REQUIRE(s.mesh.num_faces() == tube.num_faces() + 320);
        REQUIRE(s.new_vertex_range == std::pair<int, int>(static_cast<int>(tube.num_vertices()),
                                                           static_cast<int>(tube.num_vertices()) + 129));
        REQUIRE(s.new_face_range.second - s.new_face_range.first == 320);
        REQUIRE(s.ring_offset_h == 0.005);
        REQUIRE(testing::closed_surface(s.mesh.faces()));
        REQUIRE(testing::coherent_orientation(s.mesh.faces()));
        REQUIRE(testing::euler_characteristic(s.mesh.faces()) == 2);
        REQUIRE(extract_boundary_loops(s.mesh).empty());
        // Original vertices and faces are untouched.
        for (std::size_t i = 0; i < tube.num_vertices(); ++i) {
            REQUIRE(s.mesh.vertices()[i] == tube.vertices()[i]);
        }
    }
}

TEST_CASE("seal_stump: cap stays inside the hull of rim and apex")
{
    const TriangleMesh tube = open_top_tube(64);
    const auto loop = extract_boundary_loops(tube)[0];
    std::vector<Vec3> rim;
    for (int v : loop.vertex_indices) {
        rim.push_back(tube.vertices()[v]);
    }
    const BoundaryPlane plane = fit_boundary_plane(rim, Vec3(0, 0, 1));
    const SealedStump s = seal_stump(tube, loop, plane, 0.005);
    const Vec3 apex = s.mesh.vertices()[s.new_vertex_range.second - 1];
    REQUIRE((apex - (plane.centroid + 0.015 * plane.normal)).norm() < 1e-15);
    for (int v = s.new_vertex_range.first; v < s.new_vertex_range.second; ++v) {
        REQUIRE(testing::inside_cone_hull(s.mesh.vertices()[v], rim, apex, 1e-9));
    }
    // Small rim: cross-check the cone oracle against the brute-force facet test.
    const TriangleMesh small = open_top_tube(6);
    const auto small_loop = extract_boundary_loops(small)[0];
    std::vector<Vec3> srim;
    for (int v : small_loop.vertex_indices) {
        srim.push_back(small.vertices()[v]);
    }
    const BoundaryPlane sp = fit_boundary_plane(srim, Vec3(0, 0, 1));
    const SealedStump ss = seal_stump(small, small_loop, sp, 0.01);
    std::vector<Vec3> hull = srim;
    hull.push_back(ss.mesh.vertices()[ss.new_vertex_range.second - 1]);
    for (int v = ss.new_vertex_range.first; v < ss.new_vertex_range.second; ++v) {
        REQUIRE(testing::inside_hull_bruteforce(ss.mesh.vertices()[v], hull, 1e-9));
        REQUIRE(testing::inside_cone_hull(ss.mesh.vertices()[v], srim, hull.back(), 1e-9));
    }
    // Above 1/sqrt(3) the second ring pokes out of the cone.
    const SealedStump wide = seal_stump(tube, loop, plane, 0.005, 0.6);
    bool outside = false;
    for (int v = wide.new_vertex_range.first; v < wide.new_vertex_range.second; ++v) {
        outside = outside || !testing::inside_cone_hull(wide.mesh.vertices()[v], rim, apex, 1e-9);
    }
    REQUIRE(outside);
}

TEST_CASE("seal_stump: triangle rim")
{
    // Tetrahedron without its top face.
    const TriangleMesh open({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0.3, 0.3, -1)},
                            {{0, 3, 1}, {1, 3, 2}, {2, 3, 0}});
    const auto loops = extract_boundary_loops(open);
    REQUIRE(loops.size() == 1);
    REQUIRE(loops[0].size() == 3);
    std::vector<Vec3> rim;
    for (int v : loops[0].vertex_indices) {
        rim.push_back(open.vertices()[v]);
    }
    const BoundaryPlane plane = fit_boundary_plane(rim, Vec3(0, 0, 1));
    const SealedStump s = seal_stump(open, loops[0], plane, 0.05);
    REQUIRE(s.mesh.num_vertices() == 4 + 7);
    REQUIRE(s.mesh.num_faces() == 3 + 15);
    REQUIRE(testing::closed_surface(s.mesh.faces()));
    REQUIRE(testing::coherent_orientation(s.mesh.faces()));
    REQUIRE(testing::euler_characteristic(s.mesh.faces()) == 2);

    // A loop handed over against the face winding is re-oriented.
    BoundaryLoop reversed = loops[0];
    std::reverse(reversed.vertex_indices.begin(), reversed.vertex_indices.end());
    REQUIRE(testing::coherent_orientation(seal_stump(open, reversed, plane, 0.05).mesh.faces()));
}

TEST_CASE("seal_stump: errors")
{
    const TriangleMesh tube = open_top_tube(32);
    const auto loop = extract_boundary_loops(tube)[0];
    std::vector<Vec3> rim;
    for (int v : loop.vertex_indices) {
        rim.push_back(tube.vertices()[v]);
    }
    const BoundaryPlane plane = fit_boundary_plane(rim, Vec3(0, 0, 1));
    REQUIRE(capture([&] { seal_stump(tube, loop, plane, 0.0); }).code() == ErrorCode::InvalidArgument);
    REQUIRE(capture([&] { seal_stump(tube, loop, plane, 0.01, 1.0); }).code() == ErrorCode::InvalidArgument);
    BoundaryLoop open_chain = loop;
    open_chain.is_closed = false;
    REQUIRE(capture([&] { seal_stump(tube, open_chain, plane, 0.01); }).code() == ErrorCode::DegenerateLoop);

    // A kept plate across the cap.
    std::vector<Vec3> v = tube.vertices();
    std::vector<Face> f = tube.faces();
    const int base = static_cast<int>(v.size());
    v.emplace_back(-1, -1, 0.315);
    v.emplace_back(1, -1, 0.315);
    v.emplace_back(0, 1, 0.315);
    f.push_back({base, base + 1, base + 2});
    const TriangleMesh blocked(v, f);
    REQUIRE(capture([&] { seal_stump(blocked, loop, plane, 0.01); }).code() == ErrorCode::SelfIntersectingSeal);
    // Outside the kept region it is ignored.
    std::vector<bool> kept(v.size(), true);
    kept[base] = false;
    REQUIRE_NOTHROW(seal_stump(blocked, loop, plane, 0.01, kDefaultShrink, kept));
}

TEST_CASE("reconstruct_residual_limb: mid upper-arm cut")
{
    const Arm arm = make_arm();
    const LimbReconstruction rec =
        reconstruct_residual_limb(arm.body, arm_fit(arm, 0.5), LimbId::LeftUpperArm, arm.shoulder, arm_parts());
    const TriangleMesh& mesh = rec.stump.mesh;

    for (int label : rec.body.part_labels()) {
        REQUIRE(label != kFore);
    }
    REQUIRE((rec.boundary_plane.centroid - rec.plan.cut_point).norm() <= rec.plan.margin);
    REQUIRE(testing::closed_surface(mesh.faces()));
    REQUIRE(testing::coherent_orientation(mesh.faces()));
    REQUIRE(extract_boundary_loops(mesh).empty());

    // The edited limb is one closed component with V - E + F = 2.
    const auto comps = testing::face_components(mesh.faces());
    REQUIRE(comps.size() == 2);
    for (const auto& c : comps) {
        REQUIRE(testing::euler_characteristic(c) == 2);
    }

    // Locality: the other arm is bit-identical and keeps its indices.
    for (int i = 0; i < arm.other_vertices; ++i) {
        REQUIRE(rec.old_to_new[i] == i);
        REQUIRE(mesh.vertices()[i] == arm.body.mesh().vertices()[i]);
        REQUIRE(rec.body.part_labels()[i] == kOther);
    }
    // Signed-distance partition for the original upper-arm vertices.
    for (std::size_t i = 0; i < arm.body.mesh().num_vertices(); ++i) {
        if (arm.body.part_labels()[i] == kUpper && rec.old_to_new[i] >= 0) {
            REQUIRE(rec.plan.phi(arm.body.mesh().vertices()[i]) <= rec.plan.margin);
        }
    }
    // Cap vertices are labelled with the kept part.
    for (int v = rec.stump.new_vertex_range.first; v < rec.stump.new_vertex_range.second; ++v) {
        REQUIRE(rec.body.part_labels()[v] == kUpper);
    }
}

TEST_CASE("reconstruct_residual_limb: short stump near the upstream joint")
{
    const Arm arm = make_arm(96, 301);
    const LimbReconstruction rec =
        reconstruct_residual_limb(arm.body, arm_fit(arm, 0.98), LimbId::LeftUpperArm, arm.shoulder, arm_parts());
    REQUIRE(testing::closed_surface(rec.stump.mesh.faces()));
    REQUIRE(testing::coherent_orientation(rec.stump.mesh.faces()));
    // Tube length (shoulder to rim), without the dome.
    double length = 0.0;
    for (int v : rec.boundary.vertex_indices) {
        length = std::max(length, rec.stump.mesh.vertices()[v].y() - arm.shoulder.y());
    }
    REQUIRE(length < 0.05 * 0.3);
}

TEST_CASE("reconstruct_residual_limb: errors carry their stage")
{
    const Arm arm = make_arm();
    RafoResult rejected = arm_fit(arm, 0.5);
    rejected.accepted = false;
    Error e = capture(
        [&] { reconstruct_residual_limb(arm.body, rejected, LimbId::LeftUpperArm, arm.shoulder, arm_parts()); });
    REQUIRE(e.code() == ErrorCode::RejectedRafoResult);
    REQUIRE(e.stage() == "compute_cut_plan");

    RafoResult far = arm_fit(arm, 0.5);
    far.anchor_opt = Vec3(0, 5, 0);
    e = capture([&] { reconstruct_residual_limb(arm.body, far, LimbId::LeftUpperArm, arm.shoulder, arm_parts()); });
    REQUIRE(e.code() == ErrorCode::NoBandVertices);
    REQUIRE(e.stage() == "fine_cut");
}
