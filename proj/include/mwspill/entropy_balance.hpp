#pragma once

#include <Eigen/Dense>

namespace mwspill {

struct BalanceWeights {
    Eigen::VectorXd weights;  // positive, sum to one
    int iterations = 0;
    double max_gap = 0.0;     // max |weighted mean - target|
};

// Weights closest to uniform in Kullback-Leibler divergence whose weighted
// column means of `sample` equal `targets`. Solved by Newton's method on the
// log-sum-exp dual over standardized columns.
BalanceWeights entropy_balance_weights(const Eigen::MatrixXd& sample, const Eigen::VectorXd& targets,
                                       int max_iterations = 500, double gradient_tolerance = 1e-10);

}  // namespace mwspill
