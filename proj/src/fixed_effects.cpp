#include "mwspill/error.hpp"
#include "mwspill/regression.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace mwspill {

namespace {

int n_levels(const std::vector<int>& codes) {
    int top = -1;
    for (int c : codes) top = std::max(top, c);
    return top + 1;
}

Eigen::VectorXd unit_weights_if_empty(const Eigen::VectorXd& w, Eigen::Index n) {
    return w.size() == 0 ? Eigen::VectorXd::Ones(n) : w;
}

}  // namespace

Eigen::MatrixXd absorb_fixed_effects(const Eigen::MatrixXd& m, const std::vector<std::vector<int>>& groups,
                                     const Eigen::VectorXd& weights, double tolerance, int max_sweeps) {
    Eigen::MatrixXd out = m;
    if (groups.empty()) return out;
    const Eigen::Index n = m.rows();
    const Eigen::VectorXd w = unit_weights_if_empty(weights, n);

    std::vector<Eigen::VectorXd> group_weight;
    for (const auto& g : groups) {
        if (static_cast<Eigen::Index>(g.size()) != n) {
            throw Error("invalid_argument", "fixed-effect codes do not match the number of rows");
        }
        Eigen::VectorXd gw = Eigen::VectorXd::Zero(n_levels(g));
        for (Eigen::Index i = 0; i < n; ++i) gw(g[static_cast<std::size_t>(i)]) += w(i);
        group_weight.push_back(std::move(gw));
    }

    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        auto col = out.col(c);
        const double scale = 1.0 + col.cwiseAbs().maxCoeff();
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            double moved = 0.0;
            for (std::size_t d = 0; d < groups.size(); ++d) {
                const auto& g = groups[d];
                Eigen::VectorXd sums = Eigen::VectorXd::Zero(group_weight[d].size());
                for (Eigen::Index i = 0; i < n; ++i) sums(g[static_cast<std::size_t>(i)]) += w(i) * col(i);
                for (Eigen::Index k = 0; k < sums.size(); ++k) {
                    sums(k) = group_weight[d](k) > 0.0 ? sums(k) / group_weight[d](k) : 0.0;
                    moved = std::max(moved, std::abs(sums(k)));
                }
                for (Eigen::Index i = 0; i < n; ++i) col(i) -= sums(g[static_cast<std::size_t>(i)]);
            }
            if (groups.size() == 1 || moved < tolerance * scale) break;
            if (sweep + 1 == max_sweeps) {
                throw Error("fe_nonconvergence", "fixed-effect absorption did not converge");
            }
        }
    }
    return out;
}

Eigen::MatrixXd fixed_effect_dummies(const std::vector<std::vector<int>>& groups) {
    if (groups.empty()) return {};
    const auto n = static_cast<Eigen::Index>(groups.front().size());
    Eigen::Index cols = 0;
    std::vector<int> levels;
    for (std::size_t d = 0; d < groups.size(); ++d) {
        levels.push_back(n_levels(groups[d]));
        cols += levels.back() - (d == 0 ? 0 : 1);
    }
    Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(n, cols);
    Eigen::Index offset = 0;
    for (std::size_t d = 0; d < groups.size(); ++d) {
        const int drop = d == 0 ? 0 : 1;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int code = groups[d][static_cast<std::size_t>(i)];
            if (code >= drop) dm(i, offset + code - drop) = 1.0;
        }
        offset += levels[d] - drop;
    }
    return dm;
}

Eigen::Index absorbed_parameter_count(const std::vector<std::vector<int>>& groups) {
    if (groups.empty()) return 0;
    // A dimension refined by another contributes nothing new.
    auto refines = [](const std::vector<int>& fine, const std::vector<int>& coarse) {
        std::unordered_map<int, int> map;
        for (std::size_t i = 0; i < fine.size(); ++i) {
            auto [it, ins] = map.emplace(fine[i], coarse[i]);
            if (!ins && it->second != coarse[i]) return false;
        }
        return true;
    };
    std::vector<bool> redundant(groups.size(), false);
    for (std::size_t a = 0; a < groups.size(); ++a) {
        for (std::size_t b = 0; b < groups.size(); ++b) {
            if (a == b || redundant[b]) continue;
            if (refines(groups[b], groups[a])) {
                redundant[a] = true;
                break;
            }
        }
    }
    Eigen::Index count = 0;
    Eigen::Index kept = 0;
    for (std::size_t d = 0; d < groups.size(); ++d) {
        if (redundant[d]) continue;
        count += n_levels(groups[d]);
        ++kept;
    }
    return count - (kept - 1);
}

LinearFit weighted_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& weights) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const Eigen::VectorXd w = unit_weights_if_empty(weights, n);
    const Eigen::VectorXd sw = w.array().sqrt();
    LinearFit fit;
    if (p == 0) {
        fit.coef = Eigen::VectorXd(0);
        fit.residuals = y;
        return fit;
    }
    Eigen::MatrixXd xs = sw.asDiagonal() * x;
    Eigen::VectorXd norms(p);
    for (Eigen::Index c = 0; c < p; ++c) {
        norms(c) = xs.col(c).norm();
        if (!(norms(c) > 0.0)) throw Error("collinear_design", "collinear design: a regressor is identically zero");
        xs.col(c) /= norms(c);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw Error("collinear_design", "collinear design: regressors are linearly dependent");
    Eigen::VectorXd b = qr.solve(Eigen::VectorXd(sw.asDiagonal() * y));
    fit.coef = b.cwiseQuotient(norms);
    fit.residuals = y - x * fit.coef;
    return fit;
}

namespace {

Eigen::MatrixXd bread(const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
    Eigen::MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
    return xtwx.ldlt().solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
}

}  // namespace

Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals,
                                    const std::vector<int>& clusters, bool small_sample,
                                    const Eigen::VectorXd& weights, Eigen::Index extra_params) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    if (static_cast<Eigen::Index>(clusters.size()) != n || residuals.size() != n) {
        throw Error("invalid_argument", "cluster ids and residuals must match the design rows");
    }
    const Eigen::VectorXd w = unit_weights_if_empty(weights, n);
    std::unordered_map<int, Eigen::Index> slot;
    for (int c : clusters) slot.emplace(c, static_cast<Eigen::Index>(slot.size()));
    const auto g = static_cast<Eigen::Index>(slot.size());
    if (g < 2) throw Error("single_cluster", "cluster-robust covariance needs at least two clusters");

    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(g, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        scores.row(slot[clusters[static_cast<std::size_t>(i)]]) += (w(i) * residuals(i)) * x.row(i);
    }
    const Eigen::MatrixXd meat = scores.transpose() * scores;
    const Eigen::MatrixXd b = bread(x, w);
    Eigen::MatrixXd v = b * meat * b;
    if (small_sample) {
        const double k = static_cast<double>(p + extra_params);
        const double nn = static_cast<double>(n);
        const double gg = static_cast<double>(g);
        if (!(nn - k > 0.0)) throw Error("zero_dof", "zero degrees of freedom");
        v *= gg / (gg - 1.0) * (nn - 1.0) / (nn - k);
    }
    return 0.5 * (v + v.transpose());
}

Eigen::MatrixXd hc1_vcov(const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals,
                         const Eigen::VectorXd& weights, Eigen::Index extra_params) {
    const Eigen::Index n = x.rows();
    const Eigen::VectorXd w = unit_weights_if_empty(weights, n);
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(x.cols(), x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = w(i) * residuals(i);
        meat += (s * s) * x.row(i).transpose() * x.row(i);
    }
    const Eigen::MatrixXd b = bread(x, w);
    const double k = static_cast<double>(x.cols() + extra_params);
    const double nn = static_cast<double>(n);
    if (!(nn - k > 0.0)) throw Error("zero_dof", "zero degrees of freedom");
    Eigen::MatrixXd v = nn / (nn - k) * (b * meat * b);
    return 0.5 * (v + v.transpose());
}

}  // namespace mwspill
