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

#ifndef RESIDUUM_RAFO_HPP_
#define RESIDUUM_RAFO_HPP_

#include "residuum/core_types.hpp"
#include "residuum/error.hpp"
#include "residuum/layout.hpp"
#include "residuum/optimizer.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <optional>
#include <vector>

/*
 * Residual anchor-factor optimization: for one amputated limb, jointly refine
 * the anchor joint position and the residual length factor lambda so that the
 * residual endpoint
 *
 *     R = anchor + lambda * (target - anchor)
 *
 * reprojects onto the observed residual keypoint, while staying close to the
 * fitted anchor and preserving the fitted segment length.
 */
namespace residuum {

struct ResidualLimbProblem {
    Vec3 anchor_init = Vec3::Zero();
    Vec3 target = Vec3::Zero();
    Keypoint2D observed_endpoint;
    PinholeCamera camera;
    LimbId limb_id = LimbId::LeftShank;

    void validate() const
    {
        if (!((target - anchor_init).norm() > 1e-4)) {
            throw Error(ErrorCode::InvalidArgument, "anchor and target closer than 1e-4 m");
        }
        if (!observed_endpoint.visible()) {
            throw Error(ErrorCode::InvalidArgument, "residual observation has zero confidence");
        }
    }
};

// alpha and mu carry px^2/m^2 so that the pixel and metric terms add up.
struct RafoWeights {
    double alpha = 1e4;
    double mu = 1e4;
    double lambda_min = 0.02;
    double lambda_max = 0.98;
    double acceptance_threshold_px = 15.0;

    void validate() const
    {
        if (!(alpha >= 0.0) || !(mu >= 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "alpha and mu must be non-negative");
        }
        if (!(lambda_min >= 0.0 && lambda_min < lambda_max && lambda_max <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "need 0 <= lambda_min < lambda_max <= 1");
        }
        if (!(acceptance_threshold_px > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "acceptance threshold must be positive");
        }
    }
};

struct RafoResult {
    Vec3 anchor_opt = Vec3::Zero();
    double lambda_opt = 0.0;
    Vec3 endpoint_3d = Vec3::Zero();
    double reprojection_error_px = 0.0;
    bool accepted = false;
    OptimizationTrace trace;
    double initial_error_px = 0.0;
    RafoWeights weights;
};

struct LossValue {
    double value = 0.0;
    Eigen::Vector4d gradient = Eigen::Vector4d::Zero(); // d/d(anchor_x, anchor_y, anchor_z, lambda)
};

inline Vec3 residual_endpoint(const Vec3& anchor, const Vec3& target, double lambda)
{
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw Error(ErrorCode::LambdaOutOfRange, "lambda " + std::to_string(lambda) + " outside [0,1]");
    }
    // Convex-combination form, exact at both ends.
    return (1.0 - lambda) * anchor + lambda * target;
}

namespace detail {

// Loss and analytic gradient without the lambda range check, so the inner
// unconstrained rounds may probe slightly outside the clip interval.
inline LossValue rafo_loss_unchecked(const Vec3& anchor, double lambda, const ResidualLimbProblem& problem,
                                     const RafoWeights& weights)
{
    const Vec3 seg = problem.target - anchor;
    const Vec3 endpoint = anchor + lambda * seg;
    const Vec2 residual = project(endpoint, problem.camera) - problem.observed_endpoint.position;
    const Mat23 jac = project_jacobian(endpoint, problem.camera);

    // d L_reproj / d endpoint
    const Vec3 d_endpoint = 2.0 * jac.transpose() * residual;

    const Vec3 reg = anchor - problem.anchor_init;
    const double rest_length = (problem.target - problem.anchor_init).norm();
    const double length = seg.norm();
    const double stretch = length - rest_length;

    LossValue out;
    out.value = residual.squaredNorm() + weights.alpha * reg.squaredNorm() + weights.mu * stretch * stretch;

    Vec3 d_anchor = (1.0 - lambda) * d_endpoint + 2.0 * weights.alpha * reg;
    if (length > 0.0) {
        // d|target - anchor| / d anchor = -(target - anchor) / |target - anchor|
        d_anchor -= 2.0 * weights.mu * stretch * seg / length;
    }
    out.gradient.head<3>() = d_anchor;
    out.gradient[3] = d_endpoint.dot(seg);
    return out;
}

inline double reprojection_error(const Vec3& endpoint, const ResidualLimbProblem& problem)
{
    return (project(endpoint, problem.camera) - problem.observed_endpoint.position).norm();
}

} // namespace detail

/// L = L_reproj + alpha * L_reg + mu * L_len with its analytic gradient.
inline LossValue rafo_loss(const Vec3& anchor, double lambda, const ResidualLimbProblem& problem,
                           const RafoWeights& weights)
{
    if (!(lambda >= weights.lambda_min && lambda <= weights.lambda_max)) {
        throw Error(ErrorCode::LambdaOutOfRange, "lambda " + std::to_string(lambda) + " outside the clip interval");
    }
    return detail::rafo_loss_unchecked(anchor, lambda, problem, weights);
}

/// Regularization weights shrink as the initial reprojection error grows,
/// scaled by tau / (tau + error).
inline RafoWeights adaptive_weights(double initial_error_px, double base_alpha = 1e4, double base_mu = 1e4,
                                    double tau_px = 15.0)
{
    if (!(initial_error_px >= 0.0) || !(tau_px > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "need initial error >= 0 and tau > 0");
    }
    RafoWeights w;
    const double scale = std::isinf(initial_error_px) ? 0.0 : tau_px / (tau_px + initial_error_px);
    w.alpha = base_alpha * scale;
    w.mu = base_mu * scale;
    return w;
}

/// Inner-round length of the projected outer loop.
inline constexpr int kRafoInnerIterations = 20;

/**
 * Projected L-BFGS over (anchor, lambda), starting from (anchor_init, 0.5).
 *
 * Each outer round clips lambda into [lambda_min, lambda_max] and runs a fresh
 * (memory-reset) inner L-BFGS round. While lambda sits on a bound with the
 * gradient pointing outward, the round optimizes the anchor alone. The total
 * number of inner iterations is capped by config.max_iterations.
 */
inline RafoResult optimize_residual_limb(const ResidualLimbProblem& problem, const RafoWeights& weights,
                                         const LbfgsConfig& config = {})
{
    problem.validate();
    weights.validate();
    config.validate();

    Vec3 anchor = problem.anchor_init;
    double lambda = 0.5;

    RafoResult result;
    result.weights = weights;
    result.initial_error_px =
        detail::reprojection_error(residual_endpoint(anchor, problem.target, lambda), problem);

    const double initial_value = detail::rafo_loss_unchecked(anchor, lambda, problem, weights).value;
    OptimizationTrace& trace = result.trace;
    trace.termination_reason = Termination::MaxIterations;

    int rounds = 0;
    while (trace.iterations < config.max_iterations) {
        lambda = std::clamp(lambda, weights.lambda_min, weights.lambda_max);
        const LossValue here = detail::rafo_loss_unchecked(anchor, lambda, problem, weights);
        const bool at_min = lambda <= weights.lambda_min && here.gradient[3] > 0.0;
        const bool at_max = lambda >= weights.lambda_max && here.gradient[3] < 0.0;
        const bool lambda_free = !at_min && !at_max;

        Eigen::Vector4d projected = here.gradient;
        if (!lambda_free) {
            projected[3] = 0.0;
        }
        trace.final_value = here.value;
        trace.final_gradient_norm = projected.cwiseAbs().maxCoeff();
        if (trace.final_gradient_norm <= config.gradient_tolerance) {
            trace.termination_reason = Termination::GradientTolerance;
            break;
        }

        LbfgsConfig inner = config;
        inner.max_iterations = std::min(kRafoInnerIterations, config.max_iterations - trace.iterations);
        // Keep trial endpoints in front of the camera.
        const double depth = problem.camera.to_camera(anchor + lambda * (problem.target - anchor)).z();
        const double reach = 3.0 + (problem.target - anchor).norm();
        inner.max_step = std::min(config.max_step, 0.5 * depth / reach);

        const double fixed_lambda = lambda;
        std::optional<MinimizeResult> round;
        for (int shrink = 0; shrink < 6 && !round; ++shrink) {
            try {
                if (lambda_free) {
                    Eigen::VectorXd x0(4);
                    x0 << anchor, lambda;
                    round = minimize(
                        [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
                            const LossValue l =
                                detail::rafo_loss_unchecked(x.head<3>(), x[3], problem, weights);
                            grad = l.gradient;
                            return l.value;
                        },
                        x0, inner);
                } else {
                    Eigen::VectorXd x0 = anchor;
                    round = minimize(
                        [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
                            const LossValue l =
                                detail::rafo_loss_unchecked(x.head<3>(), fixed_lambda, problem, weights);
                            grad = l.gradient.head<3>();
                            return l.value;
                        },
                        x0, inner);
                }
            } catch (const Error& e) {
                if (e.code() != ErrorCode::DepthNonPositive) {
                    throw;
                }
                inner.max_step *= 0.25;
            }
        }
        if (!round) {
            throw Error(ErrorCode::OptimizationDiverged, "residual endpoint repeatedly left the camera frustum");
        }

        anchor = round->x.head<3>();
        if (lambda_free) {
            lambda = round->x[3];
        }
        trace.iterations += round->trace.iterations;
        trace.steps.insert(trace.steps.end(), round->trace.steps.begin(), round->trace.steps.end());
        trace.final_value = round->trace.final_value;

        const bool inside = lambda >= weights.lambda_min && lambda <= weights.lambda_max;
        if (round->trace.termination_reason == Termination::LineSearchFailure) {
            if (rounds == 0 && !(round->trace.final_value < initial_value)) {
                throw Error(ErrorCode::OptimizationDiverged, "line search failed without decreasing the loss");
            }
            if (inside || round->trace.iterations == 0) {
                trace.termination_reason = Termination::LineSearchFailure;
                break;
            }
        }
        if (round->trace.converged && inside) {
            trace.termination_reason = Termination::GradientTolerance;
            trace.final_gradient_norm = round->trace.final_gradient_norm;
            break;
        }
        ++rounds;
    }

    lambda = std::clamp(lambda, weights.lambda_min, weights.lambda_max);
    trace.converged = trace.termination_reason == Termination::GradientTolerance;
    result.anchor_opt = anchor;
    result.lambda_opt = lambda;
    result.endpoint_3d = residual_endpoint(anchor, problem.target, lambda);
    result.reprojection_error_px = detail::reprojection_error(result.endpoint_3d, problem);
    result.accepted = result.reprojection_error_px < weights.acceptance_threshold_px;
    trace.final_value = detail::rafo_loss_unchecked(anchor, lambda, problem, weights).value;
    return result;
}

/// How optimize_all_limbs picks per-limb weights and runs.
struct RafoOptions {
    double base_alpha = 1e4;
    double base_mu = 1e4;
    double tau_px = 15.0;
    // Fixed weights override the adaptive schedule when set.
    std::optional<double> alpha;
    std::optional<double> mu;
    double lambda_min = 0.02;
    double lambda_max = 0.98;
    double acceptance_threshold_px = 15.0;
    LbfgsConfig lbfgs;
    int threads = 1;
};

/// Builds the single-limb problem for `limb` from a body and its observations.
inline ResidualLimbProblem make_problem(const KinematicTree& skeleton, const KeypointSet2D& keypoints,
                                        const PinholeCamera& camera, LimbId limb, const LimbJoints& joints)
{
    ResidualLimbProblem p;
    p.anchor_init = skeleton.joints()[joints.anchor_joint];
    p.target = skeleton.joints()[joints.target_joint];
    p.observed_endpoint = keypoints.residual[joints.residual_slot];
    p.camera = camera;
    p.limb_id = limb;
    return p;
}

inline RafoWeights weights_for(const ResidualLimbProblem& problem, const RafoOptions& options)
{
    const double init_err =
        detail::reprojection_error(residual_endpoint(problem.anchor_init, problem.target, 0.5), problem);
    RafoWeights w = adaptive_weights(init_err, options.base_alpha, options.base_mu, options.tau_px);
    if (options.alpha) {
        w.alpha = *options.alpha;
    }
    if (options.mu) {
        w.mu = *options.mu;
    }
    w.lambda_min = options.lambda_min;
    w.lambda_max = options.lambda_max;
    w.acceptance_threshold_px = options.acceptance_threshold_px;
    return w;
}

/**
 * Optimizes every limb whose residual slot is observed, each independently.
 * Limbs with a zero-confidence residual slot are skipped. With threads > 1 the
 * limbs run concurrently; results are keyed by limb id and do not depend on
 * scheduling.
 */
inline std::map<LimbId, RafoResult> optimize_all_limbs(const ArticulatedBody& body, const KeypointSet2D& keypoints,
                                                       const PinholeCamera& camera, const LimbTable& limb_table,
                                                       const RafoOptions& options = {})
{
    validate_limb_table(limb_table, body.skeleton());

    std::vector<std::pair<LimbId, ResidualLimbProblem>> work;
    for (const auto& [limb, joints] : limb_table) {
        if (keypoints.residual[joints.residual_slot].visible()) {
            work.emplace_back(limb, make_problem(body.skeleton(), keypoints, camera, limb, joints));
        }
    }

    auto solve = [&options](const ResidualLimbProblem& p) {
        return optimize_residual_limb(p, weights_for(p, options), options.lbfgs);
    };

    std::map<LimbId, RafoResult> results;
    if (options.threads <= 1 || work.size() <= 1) {
        for (const auto& [limb, problem] : work) {
            results.emplace(limb, solve(problem));
        }
        return results;
    }

    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(options.threads), work.size());
    std::vector<std::optional<RafoResult>> slots(work.size());
    std::vector<std::future<void>> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < work.size(); i += workers) {
                slots[i] = solve(work[i].second);
            }
        }));
    }
    for (auto& f : pool) {
        f.get();
    }
    for (std::size_t i = 0; i < work.size(); ++i) {
        results.emplace(work[i].first, std::move(*slots[i]));
    }
    return results;
}

} // namespace residuum

#endif // RESIDUUM_RAFO_HPP_
