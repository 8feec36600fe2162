#include "mwspill/inference.hpp"

#include "mwspill/error.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <unordered_map>

namespace mwspill {

double chi_square_sf(double statistic, double dof) {
    if (!(dof > 0.0)) throw Error("invalid_argument", "chi-square needs positive degrees of freedom");
    if (!(statistic > 0.0)) return 1.0;
    if (std::isinf(statistic)) return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), statistic));
}

WaldResult wald_test(const Eigen::VectorXd& coef, const Eigen::MatrixXd& vcov, const Eigen::MatrixXd& r,
                     const Eigen::VectorXd& v) {
    if (r.cols() != coef.size() || r.rows() != v.size() || r.rows() == 0) {
        throw Error("invalid_restriction", "restriction matrix does not match the coefficient vector");
    }
    Eigen::FullPivLU<Eigen::MatrixXd> r_lu(r);
    if (r_lu.rank() < r.rows()) throw Error("invalid_restriction", "restrictions are linearly dependent");
    const Eigen::MatrixXd middle = r * vcov * r.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(middle);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) throw Error("singular_restriction", "R V R' is singular");
    const Eigen::VectorXd gap = r * coef - v;
    WaldResult out;
    out.statistic = gap.dot(lu.solve(gap));
    out.dof = static_cast<int>(r.rows());
    out.p_value = chi_square_sf(out.statistic, out.dof);
    return out;
}

WaldResult wald_test(const RegressionResult& result, const Eigen::MatrixXd& r, const Eigen::VectorXd& v) {
    return wald_test(result.coef, result.vcov, r, v);
}

WaldResult joint_zero_test(const RegressionResult& result, const std::vector<std::string>& names) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(names.size()), result.coef.size());
    for (std::size_t k = 0; k < names.size(); ++k) r(static_cast<Eigen::Index>(k), result.index_of(names[k])) = 1.0;
    return wald_test(result, r, Eigen::VectorXd::Zero(r.rows()));
}

WaldResult equality_test(const RegressionResult& result, const std::string& a, const std::string& b) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(1, result.coef.size());
    r(0, result.index_of(a)) = 1.0;
    r(0, result.index_of(b)) -= 1.0;
    return wald_test(result, r, Eigen::VectorXd::Zero(1));
}

LinearCombination linear_combination(const RegressionResult& result,
                                     const std::map<std::string, double>& weights) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(result.coef.size());
    for (const auto& [name, w] : weights) a(result.index_of(name)) += w;
    return {a.dot(result.coef), std::sqrt(std::max(0.0, a.dot(result.vcov * a)))};
}

AutocorrelationTest autocorrelation_test(const RegressionResult& result, double null_phi) {
    const auto n = result.rows.size();
    if (static_cast<std::size_t>(result.residuals.size()) != n) {
        throw Error("invalid_argument", "regression result carries no residuals");
    }
    std::unordered_map<std::string, std::unordered_map<int, std::size_t>> where;
    for (std::size_t i = 0; i < n; ++i) where[result.rows[i].unit][result.rows[i].month.index()] = i;

    std::vector<double> cur;
    std::vector<double> lag;
    std::vector<int> clusters;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& unit = where[result.rows[i].unit];
        auto it = unit.find(result.rows[i].month.index() - 1);
        if (it == unit.end()) continue;
        cur.push_back(result.residuals(static_cast<Eigen::Index>(i)));
        lag.push_back(result.residuals(static_cast<Eigen::Index>(it->second)));
        clusters.push_back(result.rows[i].cluster);
    }
    if (cur.size() < 2) {
        throw Error("insufficient_periods", "autocorrelation test needs at least 3 periods per unit");
    }
    const auto m = static_cast<Eigen::Index>(cur.size());
    const Eigen::Map<const Eigen::VectorXd> y(cur.data(), m);
    const Eigen::Map<const Eigen::VectorXd> x(lag.data(), m);
    const double sxx = x.squaredNorm();
    if (!(sxx > 0.0)) throw Error("collinear_design", "lagged residuals are identically zero");

    AutocorrelationTest out;
    out.n_pairs = cur.size();
    out.phi = x.dot(y) / sxx;
    const Eigen::VectorXd u = y - out.phi * x;
    const Eigen::MatrixXd xm = x;
    std::unordered_map<int, int> distinct;
    for (int c : clusters) distinct.emplace(c, 0);
    const Eigen::MatrixXd v = distinct.size() >= 2 ? cluster_robust_vcov(xm, u, clusters, true) : hc1_vcov(xm, u);
    out.se = std::sqrt(v(0, 0));
    out.statistic = std::pow(out.phi - null_phi, 2) / v(0, 0);
    out.p_value = chi_square_sf(out.statistic, 1.0);
    return out;
}

}  // namespace mwspill
