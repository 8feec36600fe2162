#include "mwspill/entropy_balance.hpp"

#include "mwspill/error.hpp"

#include <cmath>

namespace mwspill {

namespace {

// Normalized weights and log-sum-exp objective at dual point lambda.
double dual(const Eigen::MatrixXd& z, const Eigen::VectorXd& lambda, Eigen::VectorXd& w) {
    const Eigen::VectorXd a = z * lambda;
    const double top = a.maxCoeff();
    w = (a.array() - top).exp();
    const double total = w.sum();
    w /= total;
    return top + std::log(total);
}

}  // namespace

BalanceWeights entropy_balance_weights(const Eigen::MatrixXd& sample, const Eigen::VectorXd& targets,
                                       int max_iterations, double gradient_tolerance) {
    const Eigen::Index n = sample.rows();
    const Eigen::Index k = sample.cols();
    if (targets.size() != k) throw Error("invalid_argument", "one target per moderator column is required");
    if (n < 2) throw Error("infeasible_targets", "infeasible targets: fewer than two observations");

    Eigen::MatrixXd z(n, k);
    for (Eigen::Index c = 0; c < k; ++c) {
        const double lo = sample.col(c).minCoeff();
        const double hi = sample.col(c).maxCoeff();
        if (!(targets(c) > lo && targets(c) < hi)) {
            if (lo == hi && targets(c) == lo) {
                z.col(c).setZero();
                continue;
            }
            throw Error("infeasible_targets", "infeasible targets: column " + std::to_string(c) +
                                                  " target outside the sample range");
        }
        const double mean = sample.col(c).mean();
        const double sd = std::sqrt((sample.col(c).array() - mean).square().mean());
        z.col(c) = (sample.col(c).array() - targets(c)) / sd;
    }

    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd w;
    double f = dual(z, lambda, w);
    BalanceWeights out;
    for (int it = 0;; ++it) {
        const Eigen::VectorXd grad = z.transpose() * w;
        if (grad.lpNorm<Eigen::Infinity>() < gradient_tolerance) {
            out.iterations = it;
            break;
        }
        if (it == max_iterations) {
            throw Error("nonconvergence", "entropy balancing did not converge in " +
                                              std::to_string(max_iterations) + " iterations");
        }
        const Eigen::MatrixXd centred = z.rowwise() - grad.transpose();
        Eigen::MatrixXd hess = centred.transpose() * w.asDiagonal() * centred;
        hess.diagonal().array() += 1e-14;
        Eigen::VectorXd step = -hess.ldlt().solve(grad);
        double t = 1.0;
        Eigen::VectorXd w_new;
        double f_new = dual(z, lambda + step, w_new);
        while (!(f_new <= f + 1e-4 * t * grad.dot(step)) && t > 1e-12) {
            t *= 0.5;
            f_new = dual(z, lambda + t * step, w_new);
        }
        if (!std::isfinite(f_new) || lambda.norm() > 1e6) {
            throw Error("infeasible_targets", "infeasible targets: dual diverged");
        }
        if (t <= 1e-12) {
            // no further descent possible at machine precision
            out.iterations = it;
            break;
        }
        lambda += t * step;
        w = w_new;
        f = f_new;
    }
    out.weights = w;
    out.max_gap = ((sample.transpose() * w) - targets).lpNorm<Eigen::Infinity>();
    return out;
}

}  // namespace mwspill
