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

#ifndef RESIDUUM_OPTIMIZER_HPP_
#define RESIDUUM_OPTIMIZER_HPP_

#include "residuum/error.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace residuum {

struct LbfgsConfig {
    int max_iterations = 100;
    int memory = 10;
    double gradient_tolerance = 1e-8; // on the gradient infinity-norm
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    int max_line_search_steps = 25;
    // Upper bound on the Euclidean length of any trial step.
    double max_step = std::numeric_limits<double>::infinity();

    void validate() const
    {
        if (max_iterations < 0 || memory <= 0 || max_line_search_steps <= 0) {
            throw Error(ErrorCode::InvalidArgument, "L-BFGS iteration counts must be positive");
        }
        if (!(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "need 0 < c1 < c2 < 1");
        }
        if (!(gradient_tolerance >= 0.0) || !(max_step > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "tolerance must be >= 0 and max_step > 0");
        }
    }
};

enum class Termination { GradientTolerance, MaxIterations, LineSearchFailure };

inline std::string_view to_string(Termination t)
{
    switch (t) {
    case Termination::GradientTolerance: return "GradientTolerance";
    case Termination::MaxIterations: return "MaxIterations";
    case Termination::LineSearchFailure: return "LineSearchFailure";
    }
    return "Unknown";
}

// One accepted line-search step, phi(a) = f(x + a d).
struct StepRecord {
    double step = 0.0;
    double value0 = 0.0;  // phi(0)
    double slope0 = 0.0;  // phi'(0)
    double value = 0.0;   // phi(step)
    double slope = 0.0;   // phi'(step)
};

struct OptimizationTrace {
    int iterations = 0;
    double final_value = 0.0;
    double final_gradient_norm = 0.0; // infinity-norm
    bool converged = false;
    Termination termination_reason = Termination::MaxIterations;
    std::vector<StepRecord> steps;

    // Both strong Wolfe conditions for a recorded step.
    static bool satisfies_strong_wolfe(const StepRecord& s, double c1, double c2)
    {
        return s.value <= s.value0 + c1 * s.step * s.slope0 && std::abs(s.slope) <= c2 * std::abs(s.slope0);
    }
};

struct MinimizeResult {
    Eigen::VectorXd x;
    OptimizationTrace trace;
};

namespace detail {

// Minimizer of the cubic interpolating (a0, f0, g0) and (a1, f1, g1).
// Returns NaN when the cubic has no real minimizer.
inline double cubic_minimizer(double a0, double f0, double g0, double a1, double f1, double g1)
{
    const double d1 = g0 + g1 - 3.0 * (f0 - f1) / (a0 - a1);
    const double disc = d1 * d1 - g0 * g1;
    if (!(disc >= 0.0)) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double d2 = std::copysign(std::sqrt(disc), a1 - a0);
    const double denom = g1 - g0 + 2.0 * d2;
    if (denom == 0.0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return a1 - (a1 - a0) * (g1 + d2 - d1) / denom;
}

struct LinePoint {
    double a = 0.0;
    double f = 0.0;
    double slope = 0.0;
    Eigen::VectorXd g;
};

template <class Objective>
class LineSearch {
public:
    LineSearch(Objective& objective, const Eigen::VectorXd& x, const Eigen::VectorXd& d, double f0, double slope0,
               const LbfgsConfig& config)
        : objective_(objective), x_(x), d_(d), f0_(f0), slope0_(slope0), config_(config)
    {
    }

    // Runs bracketing + zoom. On success returns true and fills `out`.
    bool run(double a_init, double a_max, LinePoint& out)
    {
        LinePoint prev{0.0, f0_, slope0_, {}};
        double a = std::min(a_init, a_max);
        for (int i = 0; i < config_.max_line_search_steps && evals_ < config_.max_line_search_steps; ++i) {
            LinePoint cur = eval(a);
            if (cur.f > f0_ + config_.wolfe_c1 * a * slope0_ || (i > 0 && cur.f >= prev.f)) {
                return zoom(prev, cur, out);
            }
            if (std::abs(cur.slope) <= -config_.wolfe_c2 * slope0_) {
                out = refine(cur);
                return true;
            }
            if (cur.slope >= 0.0) {
                return zoom(cur, prev, out);
            }
            if (a >= a_max) {
                return false;
            }
            prev = cur;
            a = std::min(2.0 * a, a_max);
        }
        return false;
    }

private:
    LinePoint eval(double a)
    {
        ++evals_;
        LinePoint p;
        p.a = a;
        p.g.resize(x_.size());
        const Eigen::VectorXd xa = x_ + a * d_;
        p.f = objective_(xa, p.g);
        if (!std::isfinite(p.f) || !p.g.allFinite()) {
            throw Error(ErrorCode::NonFiniteObjective, "objective is not finite at a trial step");
        }
        p.slope = p.g.dot(d_);
        return p;
    }

    bool strong_wolfe(const LinePoint& p) const
    {
        return p.f <= f0_ + config_.wolfe_c1 * p.a * slope0_ && std::abs(p.slope) <= -config_.wolfe_c2 * slope0_;
    }

    // An acceptable point from the bracketing phase may still be far from the
    // 1D minimizer; one cubic step from (0, a) is exact on quadratics.
    LinePoint refine(const LinePoint& accepted)
    {
        if (evals_ >= config_.max_line_search_steps) {
            return accepted;
        }
        const double a = detail::cubic_minimizer(0.0, f0_, slope0_, accepted.a, accepted.f, accepted.slope);
        if (!std::isfinite(a) || a <= 0.0 || std::abs(a - accepted.a) <= 1e-3 * accepted.a ||
            a * d_.norm() > config_.max_step) {
            return accepted;
        }
        LinePoint candidate = eval(a);
        if (strong_wolfe(candidate) && candidate.f <= accepted.f) {
            return candidate;
        }
        return accepted;
    }

    bool zoom(LinePoint lo, LinePoint hi, LinePoint& out)
    {
        while (evals_ < config_.max_line_search_steps) {
            const double width = hi.a - lo.a;
            if (std::abs(width) <= 1e-16 * std::max(1.0, std::abs(lo.a))) {
                return false;
            }
            double a = detail::cubic_minimizer(lo.a, lo.f, lo.slope, hi.a, hi.f, hi.slope);
            const double left = std::min(lo.a, hi.a);
            const double right = std::max(lo.a, hi.a);
            const double guard = 0.1 * (right - left);
            if (!std::isfinite(a) || a < left + guard || a > right - guard) {
                a = 0.5 * (lo.a + hi.a);
            }
            LinePoint cur = eval(a);
            if (cur.f > f0_ + config_.wolfe_c1 * a * slope0_ || cur.f >= lo.f) {
                hi = std::move(cur);
            } else {
                if (std::abs(cur.slope) <= -config_.wolfe_c2 * slope0_) {
                    out = std::move(cur);
                    return true;
                }
                if (cur.slope * (hi.a - lo.a) >= 0.0) {
                    hi = lo;
                }
                lo = std::move(cur);
            }
        }
        return false;
    }

    Objective& objective_;
    const Eigen::VectorXd& x_;
    const Eigen::VectorXd& d_;
    double f0_;
    double slope0_;
    const LbfgsConfig& config_;
    int evals_ = 0;
};

struct CorrectionPair {
    Eigen::VectorXd s;
    Eigen::VectorXd y;
    double rho;
};

// Two-loop recursion: returns H * g for the L-BFGS inverse Hessian
// approximation built from `pairs` on top of H0 = gamma * I.
inline Eigen::VectorXd two_loop(const std::deque<CorrectionPair>& pairs, const Eigen::VectorXd& g, double gamma)
{
    Eigen::VectorXd q = g;
    std::vector<double> alpha(pairs.size());
    for (std::size_t i = pairs.size(); i-- > 0;) {
        alpha[i] = pairs[i].rho * pairs[i].s.dot(q);
        q -= alpha[i] * pairs[i].y;
    }
    Eigen::VectorXd r = gamma * q;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double beta = pairs[i].rho * pairs[i].y.dot(r);
        r += pairs[i].s * (alpha[i] - beta);
    }
    return r;
}

} // namespace detail

/**
 * Unconstrained L-BFGS with a strong Wolfe line search (bracketing followed
 * by zoom with safeguarded cubic interpolation).
 *
 * `objective(x, grad)` must return f(x) and write the gradient into `grad`
 * (pre-sized to x.size()). Every accepted step is recorded in the trace.
 */
template <class Objective>
MinimizeResult minimize(Objective&& objective, const Eigen::VectorXd& x0, const LbfgsConfig& config = {})
{
    config.validate();
    if (x0.size() == 0) {
        throw Error(ErrorCode::EmptyParameterVector, "parameter vector is empty");
    }

    MinimizeResult result;
    OptimizationTrace& trace = result.trace;
    Eigen::VectorXd x = x0;
    Eigen::VectorXd g(x.size());
    double f = objective(x, g);
    if (!std::isfinite(f) || !g.allFinite()) {
        throw Error(ErrorCode::NonFiniteObjective, "objective is not finite at the starting point");
    }

    std::deque<detail::CorrectionPair> pairs;
    double gamma = 1.0;

    auto finish = [&](Termination reason) {
        result.x = x;
        trace.final_value = f;
        trace.final_gradient_norm = g.cwiseAbs().maxCoeff();
        trace.termination_reason = reason;
        trace.converged = reason == Termination::GradientTolerance;
        return result;
    };

    if (g.cwiseAbs().maxCoeff() <= config.gradient_tolerance) {
        return finish(Termination::GradientTolerance);
    }

    while (trace.iterations < config.max_iterations) {
        Eigen::VectorXd d = pairs.empty() ? Eigen::VectorXd(-g) : Eigen::VectorXd(-detail::two_loop(pairs, g, gamma));
        double slope0 = g.dot(d);
        if (!(slope0 < 0.0)) {
            pairs.clear();
            d = -g;
            slope0 = g.dot(d);
        }

        detail::LinePoint accepted;
        bool ok = false;
        for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
            const double dnorm = d.norm();
            const double a_init = pairs.empty() ? std::min(1.0, 1.0 / dnorm) : 1.0;
            const double a_max = config.max_step / dnorm;
            detail::LineSearch<std::remove_reference_t<Objective>> ls(objective, x, d, f, slope0, config);
            ok = ls.run(a_init, a_max, accepted);
            if (!ok && !pairs.empty()) {
                // Retry once along steepest descent with a fresh memory.
                pairs.clear();
                d = -g;
                slope0 = g.dot(d);
            } else {
                break;
            }
        }
        if (!ok) {
            return finish(Termination::LineSearchFailure);
        }

        trace.steps.push_back({accepted.a, f, slope0, accepted.f, accepted.slope});
        ++trace.iterations;

        Eigen::VectorXd s = accepted.a * d;
        Eigen::VectorXd y = accepted.g - g;
        x += s;
        f = accepted.f;
        g = accepted.g;

        const double sy = s.dot(y);
        if (sy > std::numeric_limits<double>::epsilon() * s.norm() * y.norm()) {
            if (static_cast<int>(pairs.size()) == config.memory) {
                pairs.pop_front();
            }
            pairs.push_back({std::move(s), y, 1.0 / sy});
            gamma = sy / y.squaredNorm();
        }

        if (g.cwiseAbs().maxCoeff() <= config.gradient_tolerance) {
            return finish(Termination::GradientTolerance);
        }
    }
    return finish(Termination::MaxIterations);
}

/// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h.
template <class ValueFn>
Eigen::VectorXd finite_difference_gradient(ValueFn&& value, const Eigen::VectorXd& x, double step)
{
    if (!(step > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "finite-difference step must be positive");
    }
    Eigen::VectorXd grad(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + step;
        const double fp = value(probe);
        probe[i] = x[i] - step;
        const double fm = value(probe);
        probe[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw Error(ErrorCode::NonFiniteObjective, "objective is not finite during finite differencing");
        }
        grad[i] = (fp - fm) / (2.0 * step);
    }
    return grad;
}

} // namespace residuum

#endif // RESIDUUM_OPTIMIZER_HPP_
