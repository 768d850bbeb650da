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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Every threshold below is a fixed contract value.

#include "residuum/io.hpp"
#include "residuum/meshedit.hpp"
#include "residuum/metrics.hpp"
#include "residuum/optimizer.hpp"
#include "residuum/pipeline.hpp"
#include "residuum/rafo.hpp"
#include "residuum/synth.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#ifndef RESIDUUM_CLI_PATH
#error "RESIDUUM_CLI_PATH must name the residuum executable"
#endif

using namespace residuum;
namespace fs = std::filesystem;

namespace {

// Contract values.
constexpr int kRecoveryScenes = 200;
constexpr double kLambdaTol = 0.02;
constexpr double kAnchorTolM = 1e-3;
constexpr double kNoiseFreeRate = 0.95;
constexpr double kNoisyPx = 2.0;
constexpr double kAcceptPx = 15.0;
constexpr double kNoisyRate = 0.90;
constexpr double kRecoveryBudgetS = 5.0;

constexpr int kGradientInstances = 1000;
constexpr double kGradientRelTol = 1e-5;
constexpr double kGradientBudgetS = 2.0;

constexpr double kQuadraticGradTol = 1e-10;
constexpr double kRosenbrockTol = 1e-5;

constexpr int kSealCuts = 100;
constexpr double kHullSlack = 1e-9;
constexpr double kSealBudgetS = 10.0;

constexpr int kCutTriples = 50;
constexpr double kCutTol = 1e-12;

constexpr int kProtocolScenes = 50;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Random amputation set: 1-2 limbs, never two on one chain.
std::map<LimbId, double> random_amputations(std::mt19937_64& rng, int max_limbs)
{
    std::uniform_real_distribution<double> lam(0.05, 0.95);
    std::map<LimbId, double> out;
    std::set<int> chains;
    const int n = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_limbs));
    while (static_cast<int>(out.size()) < n) {
        const LimbId limb = kAllLimbs[rng() % kAllLimbs.size()];
        // Limb ids pair up as (upper, lower) per chain.
        const int chain = static_cast<int>(limb) / 2;
        if (chains.insert(chain).second) {
            out[limb] = lam(rng);
        }
    }
    return out;
}

// ------------------------------------------------------------------ 1 ----

Outcome criterion_recovery()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20260101);
    int clean_total = 0, clean_ok = 0, noisy_total = 0, noisy_ok = 0;
    double worst_lambda = 0.0;
    for (int i = 0; i < kRecoveryScenes; ++i) {
        SynthBodySpec spec;
        spec.seed = static_cast<std::uint64_t>(i);
        const auto amputations = random_amputations(rng, 2);
        for (double noise : {0.0, kNoisyPx}) {
            const SynthScene s = generate_scene(spec, amputations, {}, noise, 1000 + static_cast<std::uint64_t>(i),
                                                SceneDetail::KeypointsOnly);
            RafoOptions opt;
            opt.acceptance_threshold_px = kAcceptPx;
            const auto results = optimize_all_limbs(s.model.body, s.gt_keypoints, s.camera, s.model.limb_table, opt);
            for (const auto& [limb, r] : results) {
                const LimbJoints& lj = s.model.limb_table.at(limb);
                if (noise == 0.0) {
                    const Vec3 anchor = s.model.body.skeleton().joints()[lj.anchor_joint];
                    const double dl = std::abs(r.lambda_opt - s.true_lambda.at(limb));
                    worst_lambda = std::max(worst_lambda, dl);
                    ++clean_total;
                    clean_ok += (dl <= kLambdaTol && (r.anchor_opt - anchor).norm() <= kAnchorTolM) ? 1 : 0;
                } else {
                    // Independent reprojection of the recovered endpoint.
                    const Vec3 end = r.anchor_opt + r.lambda_opt * (s.model.body.skeleton().joints()[lj.target_joint] -
                                                                    r.anchor_opt);
                    const Vec3 c = s.camera.rotation() * end + s.camera.translation();
                    const Vec2 px(s.camera.fx() * c.x() / c.z() + s.camera.cx(),
                                  s.camera.fy() * c.y() / c.z() + s.camera.cy());
                    const double e = (px - s.gt_keypoints.residual[lj.residual_slot].position).norm();
                    ++noisy_total;
                    noisy_ok += e <= kAcceptPx ? 1 : 0;
                }
            }
        }
    }
    const double dt = seconds_since(t0);
    const double clean_rate = static_cast<double>(clean_ok) / clean_total;
    const double noisy_rate = static_cast<double>(noisy_ok) / noisy_total;
    return {clean_rate >= kNoiseFreeRate && noisy_rate >= kNoisyRate && dt < kRecoveryBudgetS,
            fmt("noise 0: %d/%d limbs (%.1f%%, max |dlambda| %.2e); noise 2px: %d/%d within %.0f px (%.1f%%); %.2f s",
                clean_ok, clean_total, 100 * clean_rate, worst_lambda, noisy_ok, noisy_total, kAcceptPx,
                100 * noisy_rate, dt)};
}

// ------------------------------------------------------------------ 2 ----

Outcome criterion_gradient()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> lam(0.05, 0.95);
    std::uniform_real_distribution<double> weight(0.0, 1e5);
    std::uniform_real_distribution<double> len(0.2, 0.5);
    std::uniform_real_distribution<double> px(-40.0, 40.0);
    double worst = 0.0;
    int bad = 0;
    for (int i = 0; i < kGradientInstances; ++i) {
        ResidualLimbProblem p;
        p.camera = testing::random_camera(rng);
        p.anchor_init = testing::random_point(rng, 0.5);
        p.target = p.anchor_init + len(rng) * testing::random_point(rng, 1.0).normalized();
        p.observed_endpoint =
            Keypoint2D(project(0.5 * (p.anchor_init + p.target), p.camera) + Vec2(px(rng), px(rng)), 1.0);
        RafoWeights w;
        w.alpha = weight(rng);
        w.mu = weight(rng);
        const Vec3 anchor = p.anchor_init + testing::random_point(rng, 0.05);
        const double lambda = lam(rng);
        const LossValue l = rafo_loss(anchor, lambda, p, w);

        // Central differences, step 1e-6 in every coordinate.
        Eigen::Vector4d x(anchor.x(), anchor.y(), anchor.z(), lambda);
        Eigen::Vector4d fd;
        for (int k = 0; k < 4; ++k) {
            const double h = 1e-6;
            Eigen::Vector4d xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            const double fp = rafo_loss(xp.head<3>(), xp[3], p, w).value;
            const double fm = rafo_loss(xm.head<3>(), xm[3], p, w).value;
            fd[k] = (fp - fm) / (2 * h);
        }
        const double rel = (fd - l.gradient).norm() / l.gradient.norm();
        worst = std::max(worst, rel);
        bad += rel < kGradientRelTol ? 0 : 1;
    }
    const double dt = seconds_since(t0);
    return {bad == 0 && dt < kGradientBudgetS,
            fmt("%d instances, max relative error %.2e (< %.0e), %d failures; %.2f s", kGradientInstances, worst,
                kGradientRelTol, bad, dt)};
}

// ------------------------------------------------------------------ 3 ----

Outcome criterion_optimizer()
{
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> eig(1.0, 10.0);
    int quad_runs = 0, quad_ok = 0, wolfe_steps = 0, wolfe_bad = 0;
    int worst_excess = -100;
    auto check_steps = [&](const OptimizationTrace& t, const LbfgsConfig& cfg) {
        for (const StepRecord& s : t.steps) {
            ++wolfe_steps;
            const bool armijo = s.value <= s.value0 + cfg.wolfe_c1 * s.step * s.slope0;
            const bool curvature = std::abs(s.slope) <= cfg.wolfe_c2 * std::abs(s.slope0);
            wolfe_bad += (armijo && curvature) ? 0 : 1;
        }
    };
    for (int d = 1; d <= 10; ++d) {
        for (int rep = 0; rep < 10; ++rep) {
            Eigen::MatrixXd m(d, d);
            for (int i = 0; i < d; ++i) {
                for (int j = 0; j < d; ++j) {
                    m(i, j) = n(rng);
                }
            }
            const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
            Eigen::VectorXd ev(d), c(d);
            for (int i = 0; i < d; ++i) {
                ev[i] = eig(rng);
                c[i] = n(rng);
            }
            Eigen::MatrixXd a = q * ev.asDiagonal() * q.transpose();
            a = 0.5 * (a + a.transpose());
            auto f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
                const Eigen::VectorXd r = x - c;
                g = a * r;
                return 0.5 * r.dot(g);
            };
            LbfgsConfig cfg;
            cfg.gradient_tolerance = 1e-11;
            cfg.max_iterations = d + 2;
            const auto res = minimize(f, Eigen::VectorXd::Constant(d, 3.0), cfg);
            const double gnorm = (a * (res.x - c)).norm();
            ++quad_runs;
            quad_ok += (gnorm < kQuadraticGradTol && res.trace.iterations <= d + 2) ? 1 : 0;
            worst_excess = std::max(worst_excess, res.trace.iterations - (d + 2));
            check_steps(res.trace, cfg);
        }
    }
    LbfgsConfig cfg;
    cfg.max_iterations = 200;
    const auto ros = minimize(
        [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
            const double a = 1.0 - x[0];
            const double b = x[1] - x[0] * x[0];
            g.resize(2);
            g[0] = -2.0 * a - 400.0 * x[0] * b;
            g[1] = 200.0 * b;
            return a * a + 100.0 * b * b;
        },
        Eigen::Vector2d(-1.2, 1.0), cfg);
    const double ros_err = (ros.x - Eigen::Vector2d(1, 1)).norm();
    check_steps(ros.trace, cfg);
    return {quad_ok == quad_runs && ros_err < kRosenbrockTol && wolfe_bad == 0,
            fmt("quadratics d<=10: %d/%d reach |g|<1e-10 within d+2 iterations; Rosenbrock |x-(1,1)| = %.1e in %d "
                "iterations; strong Wolfe violated on %d of %d steps",
                quad_ok, quad_runs, ros_err, ros.trace.iterations, wolfe_bad, wolfe_steps)};
}

// ------------------------------------------------------------------ 4 ----

// Two coaxial capsules: the kept segment (target -> anchor) and a distal one.
struct CapsuleLimb {
    BodyModel model;
    Vec3 anchor, target;
};

CapsuleLimb capsule_limb(std::mt19937_64& rng, int segments)
{
    std::uniform_real_distribution<double> radius(0.03, 0.08);
    std::uniform_real_distribution<double> length(0.25, 0.5);
    CapsuleLimb limb;
    limb.target = testing::random_point(rng, 0.3);
    const Vec3 dir = testing::random_point(rng, 1.0).normalized();
    limb.anchor = limb.target + length(rng) * dir;
    const Vec3 tip = limb.anchor + 0.5 * length(rng) * dir;
    const double r = radius(rng);
    std::vector<Vec3> verts;
    std::vector<Face> faces;
    std::vector<int> labels;
    detail::append_capsule(verts, faces, labels, 0, limb.target, limb.anchor, r, segments, 24);
    detail::append_capsule(verts, faces, labels, 1, limb.anchor, tip, 0.8 * r, segments, 12);
    limb.model.body = ArticulatedBody(TriangleMesh(std::move(verts), std::move(faces)), KinematicTree({limb.target, limb.anchor}, {-1, 0}),
                                      std::move(labels), {{0, "segment"}, {1, "distal"}});
    limb.model.limb_table = {{LimbId::LeftShank, LimbJoints{1, 0, residual_slot(LimbId::LeftShank)}}};
    limb.model.limb_parts = {{LimbId::LeftShank, LimbParts{{0}, {1}}}};
    limb.model.body25_slot = {-1, -1};
    return limb;
}

Outcome criterion_sealing()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> lam(0.05, 0.95);
    int ok = 0, errors = 0, hull_bad = 0, open_edges = 0, chi_bad = 0;
    std::string first_error;
    for (int i = 0; i < kSealCuts; ++i) {
        const int segments = 16 + static_cast<int>(rng() % 113); // 16..128
        const CapsuleLimb limb = capsule_limb(rng, segments);
        RafoResult truth;
        truth.anchor_opt = limb.anchor;
        truth.lambda_opt = lam(rng);
        truth.endpoint_3d = limb.anchor + truth.lambda_opt * (limb.target - limb.anchor);
        truth.accepted = true;
        try {
            const LimbReconstruction rec = reconstruct_residual_limb(limb.model.body, truth, LimbId::LeftShank,
                                                                     limb.target, limb.model.limb_parts);
            const TriangleMesh& mesh = rec.stump.mesh;
            // Component containing the cap.
            const int apex = rec.stump.new_vertex_range.second - 1;
            std::vector<Face> comp_faces = testing::faces_touching(mesh, [&](int) { return true; });
            {
                std::vector<int> comp = vertex_components(mesh);
                std::erase_if(comp_faces, [&](const Face& f) { return comp[f[0]] != comp[apex]; });
            }
            bool closed = true;
            for (const auto& [edge, count] : testing::edge_multiplicity(comp_faces)) {
                if (count != 2) {
                    closed = false;
                    ++open_edges;
                }
            }
            const bool chi = testing::euler_characteristic(comp_faces) == 2;
            chi_bad += chi ? 0 : 1;
            std::vector<Vec3> rim;
            for (int v : rec.boundary.vertex_indices) {
                rim.push_back(mesh.vertices()[v]);
            }
            bool inside = true;
            for (int v = rec.stump.new_vertex_range.first; v < rec.stump.new_vertex_range.second; ++v) {
                inside = inside && testing::inside_cone_hull(mesh.vertices()[v], rim, mesh.vertices()[apex], kHullSlack);
            }
            hull_bad += inside ? 0 : 1;
            ok += (closed && chi && inside) ? 1 : 0;
        } catch (const Error& e) {
            ++errors;
            if (first_error.empty()) {
                first_error = e.what();
            }
        }
    }
    const double dt = seconds_since(t0);
    return {ok == kSealCuts && dt < kSealBudgetS,
            fmt("%d/%d cuts sealed closed with V-E+F=2 and cap inside hull(rim, apex); %d open edges, %d chi "
                "failures, %d hull failures, %d errors%s%s; %.2f s",
                ok, kSealCuts, open_edges, chi_bad, hull_bad, errors, first_error.empty() ? "" : " first: ",
                first_error.c_str(), dt)};
}

// ------------------------------------------------------------------ 5 ----

Outcome criterion_cut_equations()
{
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> lam(0.02, 0.98);
    const BodyModel m = generate_body_model(SynthBodySpec{});
    double worst = 0.0;
    for (int i = 0; i < kCutTriples; ++i) {
        const Vec3 a = testing::random_point(rng, 1.0);
        Vec3 t = testing::random_point(rng, 1.0);
        while ((t - a).norm() < 0.05) {
            t = testing::random_point(rng, 1.0);
        }
        RafoResult r;
        r.anchor_opt = a;
        r.lambda_opt = lam(rng);
        r.accepted = true;
        const LimbId limb = kAllLimbs[rng() % kAllLimbs.size()];
        const CutPlan plan = compute_cut_plan(r, t, m.body, limb, m.limb_parts, 0.01);
        // Hand substitution, component by component.
        const double l = r.lambda_opt;
        const double cx = a.x() + l * (t.x() - a.x());
        const double cy = a.y() + l * (t.y() - a.y());
        const double cz = a.z() + l * (t.z() - a.z());
        const double dx = a.x() - t.x(), dy = a.y() - t.y(), dz = a.z() - t.z();
        const double len = std::sqrt(dx * dx + dy * dy + dz * dz);
        const double err = std::max({std::abs(plan.cut_point.x() - cx), std::abs(plan.cut_point.y() - cy),
                                     std::abs(plan.cut_point.z() - cz), std::abs(plan.normal.x() - dx / len),
                                     std::abs(plan.normal.y() - dy / len), std::abs(plan.normal.z() - dz / len)});
        worst = std::max(worst, err);
    }
    return {worst <= kCutTol, fmt("%d random triples, max deviation %.2e (<= %.0e)", kCutTriples, worst, kCutTol)};
}

// ------------------------------------------------------------------ 6 ----

Outcome criterion_metrics()
{
    std::vector<std::string> failures;
    // 3-4-5 triangle.
    const double e345 = mpjpe_2d({Vec2(3, 4), Vec2(0, 0)}, {Keypoint2D(Vec2(0, 0), 1.0), Keypoint2D(Vec2(3, 4), 1.0)});
    if (fmt("%.2f", e345) != "5.00") {
        failures.push_back("3-4-5 mean " + fmt("%.4f", e345));
    }
    // IoU identity, symmetry, half-plane.
    std::mt19937_64 rng(6);
    BinaryMask a(64, 48), b(64, 48), full(64, 48), half(64, 48);
    for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 64; ++x) {
            a.set(x, y, rng() % 3 == 0);
            b.set(x, y, rng() % 2 == 0);
            full.set(x, y, true);
            half.set(x, y, x < 32);
        }
    }
    if (miou(a, a) != 1.0) {
        failures.push_back("identity");
    }
    if (miou(a, b) != miou(b, a)) {
        failures.push_back("symmetry");
    }
    if (miou(full, half) != 0.5) {
        failures.push_back("half-plane " + fmt("%.6f", miou(full, half)));
    }
    // Unit cube at depth 2: rasterized area vs analytic hull area.
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const Mat3 rot = rep == 0 ? Mat3::Identity() : testing::random_rotation(rng);
        std::vector<Vec3> v;
        for (int k = 0; k < 8; ++k) {
            v.push_back(rot * Vec3((k & 1) - 0.5, ((k >> 1) & 1) - 0.5, ((k >> 2) & 1) - 0.5));
        }
        const std::vector<Face> f = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                                     {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
        const PinholeCamera cam(300, 300, 256, 256, Mat3::Identity(), Vec3(0, 0, 2), 512, 512);
        std::vector<Vec2> pts;
        for (const Vec3& p : v) {
            pts.emplace_back(300 * p.x() / (p.z() + 2) + 256, 300 * p.y() / (p.z() + 2) + 256);
        }
        const double hull = testing::convex_hull_area(pts);
        const double raster = static_cast<double>(rasterize_silhouette(TriangleMesh(v, f), cam).count());
        worst = std::max(worst, std::abs(raster - hull) / hull);
    }
    if (worst >= 0.01) {
        failures.push_back("cube area off by " + fmt("%.3f%%", 100 * worst));
    }
    std::string detail = fmt("3-4-5 mean %.2f; IoU identity/symmetry/half-plane; cube area max deviation %.3f%%",
                             e345, 100 * worst);
    for (const std::string& s : failures) {
        detail += "; FAILED " + s;
    }
    return {failures.empty(), detail};
}

// ------------------------------------------------------------------ 7 ----

Outcome criterion_protocol()
{
    std::mt19937_64 rng(7007);
    std::uniform_real_distribution<double> lam(0.05, 0.95);
    int checked = 0, proxy_worse = 0, skipped = 0;
    double min_gap = std::numeric_limits<double>::infinity();
    std::string first_fail;
    for (int i = 0; i < kProtocolScenes; ++i) {
        SynthBodySpec spec;
        spec.seed = 500 + static_cast<std::uint64_t>(i);
        const LimbId limb = kAllLimbs[rng() % kAllLimbs.size()];
        const double lambda = lam(rng);
        const SynthScene s = generate_scene(spec, {{limb, lambda}}, {}, kNoisyPx, 9000 + static_cast<std::uint64_t>(i),
                                            SceneDetail::KeypointsOnly);
        if (lambda >= 0.45 && lambda <= 0.55) {
            ++skipped;
            continue;
        }
        const FitResult fit = run_fit(s.model, s.gt_keypoints, s.camera);
        auto residual_mpjpe = [&](bool midpoint) {
            const std::vector<Vec2> pred = prediction_vector(fit.joints, midpoint);
            std::vector<Vec2> p(pred.begin() + kBodySlots, pred.end());
            std::vector<Keypoint2D> gt(s.gt_keypoints.residual.begin(), s.gt_keypoints.residual.end());
            return mpjpe_2d(p, gt);
        };
        const double explicit_err = residual_mpjpe(false);
        const double proxy_err = residual_mpjpe(true);
        ++checked;
        min_gap = std::min(min_gap, proxy_err - explicit_err);
        if (proxy_err > explicit_err) {
            ++proxy_worse;
        } else if (first_fail.empty()) {
            first_fail = fmt(" first failure: %s lambda %.3f proxy %.2f px vs RAFO %.2f px",
                             std::string(to_string(limb)).c_str(), lambda, proxy_err, explicit_err);
        }
    }
    return {proxy_worse == checked && checked > 0,
            fmt("%d scenes with lambda outside [0.45, 0.55] (%d inside skipped): midpoint proxy worse on %d/%d, "
                "smallest gap %.2f px%s",
                checked, skipped, proxy_worse, checked, min_gap, first_fail.c_str())};
}

// ------------------------------------------------------------------ 8 ----

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run(const fs::path& dir, const std::string& args, const std::string& stdout_file)
{
    const std::string cmd = "cd '" + dir.string() + "' && '" RESIDUUM_CLI_PATH "' " + args + " > '" + stdout_file +
                            "' 2> /dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_determinism()
{
    const fs::path dir = fs::temp_directory_path() / ("residuum_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream(dir / "spec.json") << "{\"schema_version\": 1, \"seed\": 4}\n";
        std::ofstream(dir / "amp.json")
            << "{\"schema_version\": 1, \"amputations\": {\"LeftShank\": 0.3, \"RightForearm\": 0.65, "
               "\"RightThigh\": 0.8}}\n";
    }
    std::vector<std::string> diffs;
    int codes_bad = 0;
    auto pipeline = [&](const std::string& tag, int threads) {
        codes_bad += run(dir, "synth spec.json amp.json " + tag + "_scene --seed 7 --noise-px 2", "/dev/null") != 0;
        const std::string s = tag + "_scene/";
        const int fit = run(dir,
                            "fit " + s + "body.json " + s + "keypoints.json " + s + "camera.json " + tag +
                                "_fit --threads " + std::to_string(threads),
                            "/dev/null");
        codes_bad += (fit != 0 && fit != 2);
        codes_bad += run(dir,
                         "eval " + tag + "_fit/mesh.obj " + tag + "_fit/joints.json " + s + "keypoints.json " + s +
                             "mask.pgm " + s + "camera.json",
                         (dir / (tag + "_eval.json")).string()) != 0;
    };
    pipeline("a", 1);
    pipeline("b", 1);
    pipeline("c", 4);
    const std::vector<std::string> files = {"_scene/body.json",     "_scene/keypoints.json", "_scene/camera.json",
                                            "_scene/mask.pgm",      "_scene/truth.json",     "_scene/truth_mesh.obj",
                                            "_fit/mesh.obj",        "_fit/body.json",        "_fit/joints.json",
                                            "_fit/silhouette.pgm",  "_fit/report.json",      "_eval.json"};
    int compared = 0;
    for (const std::string& f : files) {
        const std::string a = slurp(dir / ("a" + f));
        if (a.empty()) {
            diffs.push_back("a" + f + " missing");
            continue;
        }
        if (a != slurp(dir / ("b" + f))) {
            diffs.push_back(f + " (run 2)");
        }
        if (a != slurp(dir / ("c" + f))) {
            diffs.push_back(f + " (4 threads)");
        }
        compared += 2;
    }
    fs::remove_all(dir);
    std::string detail = fmt("synth->fit->eval x3 (threads 1, 1, 4): %zu of %d artifact comparisons differ, %d bad "
                             "exit codes (timings.json excluded: wall-clock only)",
                             diffs.size(), compared, codes_bad);
    for (const std::string& d : diffs) {
        detail += "; differs: " + d;
    }
    return {diffs.empty() && codes_bad == 0, detail};
}

} // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "lambda-recovery", criterion_recovery},     {2, "gradient-correctness", criterion_gradient},
        {3, "optimizer-soundness", criterion_optimizer}, {4, "watertight-sealing", criterion_sealing},
        {5, "cut-equation-fidelity", criterion_cut_equations}, {6, "metrics-exactness", criterion_metrics},
        {7, "protocol-directional-check", criterion_protocol}, {8, "determinism", criterion_determinism},
    };
    int failed = 0;
    for (const Criterion& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("[%s] criterion %d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
