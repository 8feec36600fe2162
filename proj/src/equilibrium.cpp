#include "mwspill/equilibrium.hpp"

#include "mwspill/error.hpp"
#include "mwspill/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mwspill {

double ZipMarket::eps_y_for(const std::string& dest) const {
    auto it = eps_y_by_dest.find(dest);
    return it == eps_y_by_dest.end() ? eps_y : it->second;
}

bool ZipMarket::homogeneous_income_elasticity() const {
    for (const auto& [dest, pi] : weights.weights) {
        if (eps_y_for(dest) != eps_y) return false;
    }
    return true;
}

void MarketPrimitives::validate() const {
    for (const auto& m : zips) {
        auto bad = [&](const std::string& what) {
            return Error("invalid_primitives", "zip " + m.zip + ": " + what);
        };
        if (!(m.workers > 0.0)) throw bad("workers must be positive");
        if (!(m.xi_r < 0.0)) throw bad("xi_r must be negative");
        if (!(m.xi_p < 0.0)) throw bad("xi_p must be negative");
        if (!(m.xi_y > 0.0)) throw bad("xi_y must be positive");
        if (!(m.eps_p > 0.0)) throw bad("eps_p must be positive");
        if (!(m.eps_y >= 0.0)) throw bad("eps_y must be non-negative");
        for (const auto& [d, e] : m.eps_y_by_dest) {
            if (!(e >= 0.0)) throw bad("eps_y for destination " + d + " must be non-negative");
        }
        if (!(m.eta >= 0.0)) throw bad("eta must be non-negative");
        if (!(m.demand_scale > 0.0) || !(m.supply_scale > 0.0)) throw bad("scales must be positive");
        if (m.weights.weights.empty()) throw bad("no commuting destinations");
        double total = 0.0;
        for (const auto& [d, pi] : m.weights.weights) {
            if (!(pi >= 0.0)) throw bad("negative commuting share");
            total += pi;
        }
        if (std::abs(total - 1.0) > 1e-9) throw bad("commuting shares do not sum to one");
    }
}

const ZipMarket& MarketPrimitives::at(const std::string& zip) const {
    for (const auto& m : zips) {
        if (m.zip == zip) return m;
    }
    throw Error("unknown_zip", "no market primitives for zip " + zip);
}

namespace {

double mw_of(const MwLevels& mw, const std::string& zip) {
    auto it = mw.find(zip);
    if (it == mw.end()) throw Error("missing_mw", "no minimum wage given for zip " + zip);
    if (!(it->second > 0.0)) throw Error("missing_mw", "non-positive minimum wage for zip " + zip);
    return it->second;
}

// log of sum_z pi_z exp(a_z) computed stably.
double log_sum_weighted(const std::vector<std::pair<double, double>>& pi_and_log) {
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& [pi, a] : pi_and_log) {
        if (pi > 0.0) top = std::max(top, a);
    }
    double acc = 0.0;
    for (const auto& [pi, a] : pi_and_log) {
        if (pi > 0.0) acc += pi * std::exp(a - top);
    }
    return top + std::log(acc);
}

// Everything in log demand that does not depend on rent.
double log_demand_shifter(const ZipMarket& m, const MwLevels& mw,
                          const std::map<std::string, double>& shares) {
    std::vector<std::pair<double, double>> terms;
    terms.reserve(shares.size());
    for (const auto& [dest, pi] : shares) {
        terms.emplace_back(pi, m.xi_y * m.eps_y_for(dest) * std::log(mw_of(mw, dest)));
    }
    return std::log(m.workers) + std::log(m.demand_scale) +
           m.xi_p * m.eps_p * std::log(mw_of(mw, m.zip)) + log_sum_weighted(terms);
}

double solve_one(const ZipMarket& m, double shifter, const SolverOptions& options, int& iterations,
                 double& residual) {
    const double slope = m.xi_r - m.eta;
    auto f = [&](double x) { return shifter + slope * x - std::log(m.supply_scale); };
    std::function<double(double)> df;
    if (options.method == SolverMethod::newton) df = [slope](double) { return slope; };
    auto root = solve_decreasing_root(f, 0.0, options, df);
    iterations += root.iterations;
    residual = std::max(residual, std::abs(f(root.x)));
    return root.x;
}

double denominator(const ZipMarket& m) {
    double sum_pi_xi_r = 0.0;
    for (const auto& [dest, pi] : m.weights.weights) sum_pi_xi_r += pi * m.xi_r;
    const double den = m.eta - sum_pi_xi_r;
    if (!(std::abs(den) > 0.0) || !std::isfinite(den)) {
        throw Error("degenerate_denominator", "degenerate denominator for zip " + m.zip);
    }
    return den;
}

}  // namespace

double log_excess_demand(const ZipMarket& market, const MwLevels& mw, double log_rent) {
    return log_demand_shifter(market, mw, market.weights.weights) +
           (market.xi_r - market.eta) * log_rent - std::log(market.supply_scale);
}

RootResult solve_decreasing_root(const std::function<double(double)>& f, double guess,
                                 const SolverOptions& options,
                                 const std::function<double(double)>& slope) {
    constexpr double kLimit = 50.0;
    double lo = guess - 1.0;
    double hi = guess + 1.0;
    double flo = f(lo);
    double fhi = f(hi);
    RootResult out;
    while (flo < 0.0 && lo > -kLimit) {
        hi = lo;
        fhi = flo;
        lo = std::max(-kLimit, lo - 2.0 * (hi - lo + 1.0));
        flo = f(lo);
    }
    while (fhi > 0.0 && hi < kLimit) {
        lo = hi;
        flo = fhi;
        hi = std::min(kLimit, hi + 2.0 * (hi - lo + 1.0));
        fhi = f(hi);
    }
    if (!(flo >= 0.0 && fhi <= 0.0)) {
        throw Error("bracketing_failure", "bracketing failure: no sign change within +-50 log points");
    }
    if (flo == 0.0) return {lo, 0};
    if (fhi == 0.0) return {hi, 0};

    double x = 0.5 * (lo + hi);
    for (int it = 1; it <= options.max_iterations; ++it) {
        out.iterations = it;
        double candidate = 0.5 * (lo + hi);
        if (slope) {
            const double fx = f(x);
            const double d = slope(x);
            if (d < 0.0) {
                const double step = x - fx / d;
                if (step > lo && step < hi) candidate = step;
            }
        }
        const double moved = std::abs(candidate - x);
        x = candidate;
        const double fx = f(x);
        if (fx == 0.0) return {x, it};
        if (fx > 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        if (hi - lo < options.tolerance) break;
        if (slope && it > 1 && moved < options.tolerance) break;
    }
    out.x = slope ? x : 0.5 * (lo + hi);
    return out;
}

EquilibriumSolution solve_equilibrium(const MarketPrimitives& prim, const MwLevels& mw,
                                      const SolverOptions& options) {
    prim.validate();
    EquilibriumSolution sol;
    for (const auto& m : prim.zips) {
        const double shifter = log_demand_shifter(m, mw, m.weights.weights);
        const double x = solve_one(m, shifter, options, sol.iterations, sol.residual);
        sol.rents[m.zip] = std::exp(x);
    }
    return sol;
}

std::map<std::string, double> comparative_static(const MarketPrimitives& prim, const MwLevels& mw,
                                                 const std::vector<std::string>& shocked_zips,
                                                 double d_ln_mw, const SolverOptions& options) {
    if (!(d_ln_mw > 0.0)) throw Error("invalid_argument", "shock size must be positive");
    MwLevels up = mw;
    MwLevels down = mw;
    for (const auto& z : shocked_zips) {
        const double base = mw_of(mw, z);
        up[z] = base * std::exp(d_ln_mw);
        down[z] = base * std::exp(-d_ln_mw);
    }
    const auto hi = solve_equilibrium(prim, up, options);
    const auto lo = solve_equilibrium(prim, down, options);
    std::map<std::string, double> out;
    for (const auto& [zip, r] : hi.rents) {
        out[zip] = (std::log(r) - std::log(lo.rents.at(zip))) / (2.0 * d_ln_mw);
    }
    return out;
}

std::map<std::string, LinearResponse> linearized_response(const MarketPrimitives& prim) {
    prim.validate();
    std::map<std::string, LinearResponse> out;
    for (const auto& m : prim.zips) {
        if (!m.homogeneous_income_elasticity()) {
            throw Error("heterogeneous_elasticity",
                        "linearized response requires a homogeneous income elasticity (zip " + m.zip + ")");
        }
        const double den = denominator(m);
        double sum_pi = 0.0;
        for (const auto& [d, pi] : m.weights.weights) sum_pi += pi;
        out[m.zip] = {m.xi_y * m.eps_y / den, sum_pi * m.xi_p * m.eps_p / den};
    }
    return out;
}

std::map<std::string, LinearResponse> endogenous_shares_response(const MarketPrimitives& prim,
                                                                 double zeta) {
    if (!(zeta <= 0.0)) throw Error("invalid_argument", "share elasticity zeta must be <= 0");
    auto out = linearized_response(prim);
    for (const auto& m : prim.zips) out[m.zip].beta += zeta / denominator(m);
    return out;
}

EquilibriumSolution solve_equilibrium_endogenous_shares(const MarketPrimitives& prim,
                                                        const MwLevels& mw,
                                                        const MwLevels& reference_mw, double zeta,
                                                        bool renormalize,
                                                        const SolverOptions& options) {
    if (!(zeta <= 0.0)) throw Error("invalid_argument", "share elasticity zeta must be <= 0");
    prim.validate();
    EquilibriumSolution sol;
    for (const auto& m : prim.zips) {
        std::map<std::string, double> shares;
        double total = 0.0;
        for (const auto& [dest, pi0] : m.weights.weights) {
            const double s = pi0 * std::pow(mw_of(mw, dest) / mw_of(reference_mw, dest), zeta);
            shares[dest] = s;
            total += s;
        }
        if (renormalize) {
            for (auto& [d, s] : shares) s /= total;
        }
        const double shifter = log_demand_shifter(m, mw, shares);
        const double x = solve_one(m, shifter, options, sol.iterations, sol.residual);
        sol.rents[m.zip] = std::exp(x);
    }
    return sol;
}

MarketPrimitives perturb_income_elasticities(const MarketPrimitives& prim, double sd,
                                             std::uint64_t seed) {
    MarketPrimitives out = prim;
    std::mt19937_64 rng(derive_seed(seed, 0x5eed));
    std::normal_distribution<double> noise(0.0, sd);
    for (auto& m : out.zips) {
        std::map<std::string, double> nu;
        double mean = 0.0;
        for (const auto& [dest, pi] : m.weights.weights) {
            nu[dest] = noise(rng);
            mean += pi * nu[dest];
        }
        m.eps_y_by_dest.clear();
        for (const auto& [dest, pi] : m.weights.weights) {
            m.eps_y_by_dest[dest] = std::max(0.0, m.eps_y + nu[dest] - mean);
        }
    }
    return out;
}

MarketPrimitives random_primitives(std::size_t n_zips, std::uint64_t seed) {
    if (n_zips < 4) throw Error("invalid_argument", "random primitives need at least 4 zips");
    std::mt19937_64 rng(derive_seed(seed, 0x9a11));
    auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    MarketPrimitives prim;
    std::vector<std::string> names;
    for (std::size_t k = 0; k < n_zips; ++k) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "Z%03zu", k);
        names.emplace_back(buf);
    }
    for (std::size_t k = 0; k < n_zips; ++k) {
        ZipMarket m;
        m.zip = names[k];
        m.workers = uniform(100.0, 10000.0);
        m.xi_r = uniform(-1.5, -0.2);
        m.xi_p = uniform(-1.0, -0.1);
        m.xi_y = uniform(0.2, 1.5);
        m.eps_p = uniform(0.05, 0.5);
        m.eps_y = uniform(0.05, 0.5);
        m.eta = uniform(0.0, 2.0);
        m.demand_scale = uniform(0.5, 2.0);
        m.supply_scale = m.workers * uniform(0.5, 2.0);

        std::vector<std::string> others;
        for (std::size_t j = 0; j < n_zips; ++j) {
            if (j != k) others.push_back(names[j]);
        }
        std::shuffle(others.begin(), others.end(), rng);
        const std::size_t n_dest = 2 + (n_zips > 4 ? rng() % (n_zips - 4 + 1) : 0);
        const double own = uniform(0.2, 0.7);
        std::vector<double> raw(n_dest);
        double raw_sum = 0.0;
        for (auto& r : raw) raw_sum += (r = uniform(0.1, 1.0));
        m.weights.origin_zip = m.zip;
        m.weights.weights[m.zip] = own;
        for (std::size_t j = 0; j < n_dest && j + 2 <= others.size(); ++j) {
            m.weights.weights[others[j]] = (1.0 - own) * raw[j] / raw_sum;
        }
        double total = 0.0;
        for (const auto& [d, pi] : m.weights.weights) total += pi;
        for (auto& [d, pi] : m.weights.weights) pi /= total;
        prim.zips.push_back(std::move(m));
    }
    return prim;
}

bool PropositionReport::all_ok() const {
    return draws > 0 && workplace_sign_ok == draws && no_exposure_zero_ok == draws &&
           indirect_total_ok == draws && linearization_ratio_ok == draws && slopes_ok == draws;
}

PropositionReport run_proposition_suite(int draws, std::uint64_t seed, std::size_t n_zips) {
    PropositionReport rep;
    rep.draws = draws;
    rep.min_ratio = std::numeric_limits<double>::infinity();
    rep.max_ratio = -std::numeric_limits<double>::infinity();
    const SolverOptions exact{SolverMethod::newton, 1e-15, 400};

    for (int d = 0; d < draws; ++d) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(d));
        const MarketPrimitives prim = random_primitives(n_zips, s);
        std::mt19937_64 rng(derive_seed(s, 1));
        std::uniform_real_distribution<double> unif(-1.0, 1.0);

        const double base_level = 7.25 + 8.0 * (0.5 * (unif(rng) + 1.0));
        MwLevels mw;
        for (const auto& m : prim.zips) mw[m.zip] = base_level;

        const ZipMarket& home = prim.zips.front();
        std::string exposed;
        std::string unexposed;
        for (const auto& m : prim.zips) {
            if (m.zip == home.zip) continue;
            auto it = home.weights.weights.find(m.zip);
            if (it != home.weights.weights.end() && it->second > 0.0) {
                if (exposed.empty()) exposed = m.zip;
            } else if (unexposed.empty()) {
                unexposed = m.zip;
            }
        }

        // Workplace-only exposure raises rents.
        auto cs = comparative_static(prim, mw, {exposed}, 1e-4, exact);
        if (cs.at(home.zip) > 0.0) ++rep.workplace_sign_ok;

        auto cs0 = comparative_static(prim, mw, {unexposed}, 1e-4, exact);
        if (std::abs(cs0.at(home.zip)) < 1e-9) ++rep.no_exposure_zero_ok;

        // Every ZIP but the home ZIP is shocked.
        std::vector<std::string> others;
        for (const auto& m : prim.zips) {
            if (m.zip != home.zip) others.push_back(m.zip);
        }
        auto cs_all = comparative_static(prim, mw, others, 1e-4, exact);
        if (cs_all.at(home.zip) > 0.0) ++rep.indirect_total_ok;

        // Linearization error under a non-uniform shock.
        const auto lin = linearized_response(prim).at(home.zip);
        std::map<std::string, double> direction;
        for (const auto& m : prim.zips) direction[m.zip] = unif(rng);
        const double base_log_rent = std::log(solve_equilibrium(prim, mw, exact).rents.at(home.zip));
        auto lin_error = [&](double h) {
            MwLevels shocked = mw;
            for (auto& [z, v] : shocked) v *= std::exp(h * direction[z]);
            const double actual =
                std::log(solve_equilibrium(prim, shocked, exact).rents.at(home.zip)) - base_log_rent;
            double d_wkp = 0.0;
            for (const auto& [dest, pi] : home.weights.weights) d_wkp += pi * h * direction[dest];
            const double d_res = h * direction[home.zip];
            return std::abs(actual - (lin.beta * d_wkp + lin.gamma * d_res));
        };
        const double ratio = lin_error(1e-2) / lin_error(5e-3);
        rep.min_ratio = std::min(rep.min_ratio, ratio);
        rep.max_ratio = std::max(rep.max_ratio, ratio);
        if (ratio >= 3.5 && ratio <= 4.5) ++rep.linearization_ratio_ok;

        // Closed-form slopes against finite differences.
        const double pi_home = home.weights.weights.at(home.zip);
        const double h = 1e-5;
        const double beta_fd = comparative_static(prim, mw, others, h, exact).at(home.zip) / (1.0 - pi_home);
        std::vector<std::string> all_zips = others;
        all_zips.push_back(home.zip);
        const double gamma_fd = comparative_static(prim, mw, all_zips, h, exact).at(home.zip) - beta_fd;
        const double err = std::max(std::abs(beta_fd - lin.beta) / std::abs(lin.beta),
                                    std::abs(gamma_fd - lin.gamma) / std::abs(lin.gamma));
        rep.max_slope_rel_error = std::max(rep.max_slope_rel_error, err);
        if (err < 1e-3) ++rep.slopes_ok;
    }
    return rep;
}

}  // namespace mwspill
