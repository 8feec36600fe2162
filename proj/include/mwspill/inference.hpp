#pragma once

#include "mwspill/regression.hpp"

#include <map>
#include <string>
#include <vector>

namespace mwspill {

// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, double dof);

struct WaldResult {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
};

// (R theta - v)' (R V R')^-1 (R theta - v) against chi-square(rank R).
WaldResult wald_test(const Eigen::VectorXd& coef, const Eigen::MatrixXd& vcov, const Eigen::MatrixXd& r,
                     const Eigen::VectorXd& v);
WaldResult wald_test(const RegressionResult& result, const Eigen::MatrixXd& r, const Eigen::VectorXd& v);

// Joint test that every named coefficient is zero.
WaldResult joint_zero_test(const RegressionResult& result, const std::vector<std::string>& names);

// Test that two coefficients are equal.
WaldResult equality_test(const RegressionResult& result, const std::string& a, const std::string& b);

struct LinearCombination {
    double estimate = 0.0;
    double se = 0.0;
};

LinearCombination linear_combination(const RegressionResult& result,
                                     const std::map<std::string, double>& weights);

struct AutocorrelationTest {
    double phi = 0.0;
    double se = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n_pairs = 0;
};

// Regresses each residual on the previous month's residual of the same unit
// (no intercept) and tests phi = null_phi with cluster-robust errors.
AutocorrelationTest autocorrelation_test(const RegressionResult& result, double null_phi = -0.5);

}  // namespace mwspill
