#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "vbn/bundle.hpp"
#include "vbn/connection.hpp"
#include "vbn/linalg.hpp"
#include "vbn/manifold.hpp"
#include "vbn/types.hpp"

namespace vbn {

struct SolverConfig {
    double theta_des = 0.5;    // desired contraction of the damping update
    double theta_acc = 0.55;   // acceptable contraction for a trial step
    double lambda_fail = 1e-8; // below this damping factor the method has failed
    double tol = 1e-10;        // convergence tolerance on the Newton direction norm
    int max_outer = 100;
    int max_inner = 30;
    double initial_lambda = 1.0;

    void validate() const {
        if (!(theta_des > 0.0 && theta_des < 1.0))
            throw InvalidConfig("theta_des must lie in (0,1), got " + std::to_string(theta_des));
        if (!(theta_acc > theta_des))
            throw InvalidConfig("theta_acc (" + std::to_string(theta_acc) +
                                ") must exceed theta_des (" + std::to_string(theta_des) + ")");
        if (!(lambda_fail > 0.0 && lambda_fail < 1.0))
            throw InvalidConfig("lambda_fail must lie in (0,1), got " +
                                std::to_string(lambda_fail));
        if (!(tol > 0.0)) throw InvalidConfig("tol must be positive");
        if (max_outer < 1) throw InvalidConfig("max_outer must be >= 1");
        if (max_inner < 1) throw InvalidConfig("max_inner must be >= 1");
        if (!(initial_lambda > 0.0 && initial_lambda <= 1.0))
            throw InvalidConfig("initial_lambda must lie in (0,1], got " +
                                std::to_string(initial_lambda));
    }
};

enum class SolveStatus { Converged, NewtonFailed, SingularOperator, MaxIterations };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "Converged";
        case SolveStatus::NewtonFailed: return "NewtonFailed";
        case SolveStatus::SingularOperator: return "SingularOperator";
        case SolveStatus::MaxIterations: return "MaxIterations";
    }
    return "?";
}

struct InnerTrial {
    double lambda;
    double theta;
};

struct IterationRecord {
    int k = 0;
    double lambda = 1.0;       // accepted damping factor
    double newton_norm = 0.0;  // |dx| of the full Newton direction
    double theta = 0.0;        // contraction estimate of the accepted trial
    double residual = 0.0;     // |F(x)| at the iterate the step started from
    int inner_trials = 0;
    Point x_snapshot;                // point reached by the accepted step
    std::vector<InnerTrial> trials;  // per-trial (lambda, theta), diagnostics only
};

struct SolveOutcome {
    SolveStatus status = SolveStatus::MaxIterations;
    Point final;
    std::vector<IterationRecord> trace;
};

/// theta = |simplified direction| / |lambda * Newton direction|.
inline double theta_estimate(const TangentVector& dx, const TangentVector& dx_bar,
                             double lambda) {
    const double ndx = dx.norm();
    if (ndx == 0.0) throw ZeroNewtonDirection("theta_estimate: |dx| = 0");
    if (!(lambda > 0.0)) throw Error("theta_estimate: lambda must be positive");
    return dx_bar.norm() / (lambda * ndx);
}

/// Damping update: lambda_next = min(1, lambda * theta_des / theta).
inline double next_damping(double lambda, double theta, double theta_des) {
    return std::min(1.0, lambda * theta_des / theta);
}

/// Newton direction at x: solution of Q_{F(x)} o F'(x) dx + F(x) = 0.
inline TangentVector newton_direction(const NewtonProblem& pb, const ConnectionMap& q,
                                      const Point& x) {
    const NewtonOperator op = newton_operator(pb, q, x);
    return solve_newton_system(pb, op, evaluate(pb, x));
}

/// Simplified Newton direction with the frozen operator from x and the
/// residual pulled back from x_plus:
///   op * dxbar + V^{-1}_{y(x)}(y(x_plus)) F(x_plus) - (1 - lambda) F(x) = 0.
/// `step_preimage` is lambda*dx when x_plus = R_x(lambda dx) is known, which
/// lets retraction-kind transports skip the inverse retraction.
inline TangentVector simplified_newton_direction(const NewtonProblem& pb, TransportKind transport,
                                                 const NewtonOperator& op, const FibreElement& f_x,
                                                 const Point& x_plus, double lambda,
                                                 const Vector* step_preimage = nullptr) {
    const FibreElement f_plus = evaluate(pb, x_plus);
    const Vector pulled =
        (pb.identity_base && step_preimage != nullptr)
            ? back_transport_fibre_from(pb, f_x.base_y, *step_preimage, f_plus.base_y,
                                        f_plus.value, transport)
            : back_transport_fibre(pb, f_x.base_y, f_plus.base_y, f_plus.value, transport);
    const Vector rhs_fibre = pulled - (1.0 - lambda) * f_x.value;
    return expand_direction(op, solve_reduced(op, Vector(-reduce_fibre(pb, op, rhs_fibre))));
}

namespace detail {

inline IterationRecord make_record(int k, double lambda, double newton_norm, double theta,
                                   double residual, std::vector<InnerTrial> trials,
                                   Point snapshot) {
    IterationRecord rec;
    rec.k = k;
    rec.lambda = lambda;
    rec.newton_norm = newton_norm;
    rec.theta = theta;
    rec.residual = residual;
    rec.inner_trials = static_cast<int>(trials.size());
    rec.x_snapshot = std::move(snapshot);
    rec.trials = std::move(trials);
    return rec;
}

}  // namespace detail

/// Local Newton iteration: x_{k+1} = R_{x_k}(dx_k), stopping when
/// |dx_k| <= tol. theta is monitored along the way from the simplified
/// direction at the full step.
inline SolveOutcome local_newton(const NewtonProblem& pb, const ConnectionMap& q,
                                 TransportKind transport, const Point& x0, double tol = 1e-10,
                                 int max_iter = 50) {
    check_point(pb.domain, x0, "local_newton start");
    SolveOutcome out;
    Point x = x0;
    for (int k = 1; k <= max_iter; ++k) {
        const FibreElement fx = evaluate(pb, x);
        NewtonOperator op;
        TangentVector dx;
        try {
            op = newton_operator(pb, q, x);
            dx = solve_newton_system(pb, op, fx);
        } catch (const SingularNewtonOperator&) {
            out.status = SolveStatus::SingularOperator;
            out.final = x;
            return out;
        }
        const double ndx = dx.norm();
        if (ndx <= tol) {
            const Point final = retract(pb.domain, x, dx);
            out.trace.push_back(detail::make_record(k, 1.0, ndx, 0.0, fx.norm(), {}, final));
            out.status = SolveStatus::Converged;
            out.final = final;
            return out;
        }
        const Point x_plus = retract(pb.domain, x, dx);
        double theta = std::numeric_limits<double>::infinity();
        try {
            const TangentVector dbar =
                simplified_newton_direction(pb, transport, op, fx, x_plus, 1.0, &dx.vec);
            theta = theta_estimate(dx, dbar, 1.0);
        } catch (const Error&) {
            // theta is advisory here; a failed transport leaves it infinite
        }
        out.trace.push_back(detail::make_record(k, 1.0, ndx, theta, fx.norm(), {}, x_plus));
        x = x_plus;
    }
    out.status = SolveStatus::MaxIterations;
    out.final = x;
    return out;
}

/// Affine covariant damped Newton method. Each outer iteration solves for
/// the Newton direction, then an inner loop shortens the step along the
/// Newton path until the contraction estimate theta is acceptable:
///
///   x_plus = R_x(lambda dx)
///   solve op dxbar + V^{-1}(y_plus) F(x_plus) - (1 - lambda) F(x) = 0
///   theta = |dxbar| / |lambda dx|
///   lambda <- min(1, lambda theta_des / theta); fail when lambda < lambda_fail
///
/// Convergence is declared when |dx| <= tol; the final correction is then
/// applied as a full step and recorded with lambda = 1, theta = 0, so a
/// converged trace always ends with lambda = 1, theta <= 1/4, |dx| <= tol.
/// The post-update lambda carries over to the next outer iteration, clamped
/// to [lambda_fail, 1]. A trial whose transport or retraction fails is
/// treated as theta = max(2 theta_acc, 2), so far trials are rejected by the
/// ordinary update.
inline SolveOutcome damped_newton(const NewtonProblem& pb, const ConnectionMap& q,
                                  TransportKind transport, const Point& x0,
                                  const SolverConfig& cfg = {}) {
    cfg.validate();
    check_point(pb.domain, x0, "damped_newton start");
    SolveOutcome out;
    Point x = x0;
    double lambda = std::clamp(cfg.initial_lambda, cfg.lambda_fail, 1.0);
    try {
        for (int k = 1; k <= cfg.max_outer; ++k) {
            const FibreElement fx = evaluate(pb, x);
            const NewtonOperator op = newton_operator(pb, q, x);
            const TangentVector dx = solve_newton_system(pb, op, fx);
            const double ndx = dx.norm();
            if (ndx <= cfg.tol) {
                const Point final = retract(pb.domain, x, dx);
                out.trace.push_back(detail::make_record(k, 1.0, ndx, 0.0, fx.norm(), {}, final));
                out.status = SolveStatus::Converged;
                out.final = final;
                return out;
            }

            std::vector<InnerTrial> trials;
            bool accepted = false;
            Point x_accepted;
            double lambda_accepted = 0.0;
            double theta_accepted = 0.0;
            while (!accepted) {
                const double trial_lambda = lambda;
                double theta;
                Point x_plus;
                bool trial_evaluated = false;
                try {
                    const TangentVector step(x, Vector(trial_lambda * dx.vec));
                    x_plus = retract(pb.domain, x, step);
                    const TangentVector dbar = simplified_newton_direction(
                        pb, transport, op, fx, x_plus, trial_lambda, &step.vec);
                    theta = theta_estimate(dx, dbar, trial_lambda);
                    trial_evaluated = true;
                } catch (const Error&) {
                    theta = std::max(2.0 * cfg.theta_acc, 2.0);
                }
                lambda = next_damping(trial_lambda, theta, cfg.theta_des);
                trials.push_back(InnerTrial{trial_lambda, theta});
                if (lambda < cfg.lambda_fail) {
                    out.trace.push_back(detail::make_record(k, trial_lambda, ndx, theta,
                                                            fx.norm(), std::move(trials), x));
                    out.status = SolveStatus::NewtonFailed;
                    out.final = x;
                    return out;
                }
                if (theta <= cfg.theta_acc) {
                    if (!trial_evaluated)
                        throw Error("damped_newton: accepted a failed trial");  // unreachable
                    accepted = true;
                    x_accepted = x_plus;
                    lambda_accepted = trial_lambda;
                    theta_accepted = theta;
                    break;
                }
                if (static_cast<int>(trials.size()) >= cfg.max_inner) {
                    out.trace.push_back(detail::make_record(k, trial_lambda, ndx, theta,
                                                            fx.norm(), std::move(trials), x));
                    out.status = SolveStatus::MaxIterations;
                    out.final = x;
                    return out;
                }
            }

            x = x_accepted;
            out.trace.push_back(detail::make_record(k, lambda_accepted, ndx, theta_accepted,
                                                    fx.norm(), std::move(trials), x));
            // The convergence exit (lambda = 1, theta <= 1/4, |dx| <= tol) is
            // subsumed by the |dx| <= tol branch above, which takes the final
            // step without estimating theta from a vanishing quotient.
            lambda = std::clamp(lambda, cfg.lambda_fail, 1.0);
        }
        out.status = SolveStatus::MaxIterations;
        out.final = x;
        return out;
    } catch (const Error&) {
        // operator assembly or geometry breakdown outside an inner trial
        out.status = SolveStatus::SingularOperator;
        out.final = x;
        return out;
    }
}

}  // namespace vbn
