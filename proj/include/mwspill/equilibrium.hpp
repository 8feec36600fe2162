#pragma once

#include "mwspill/exposure.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mwspill {

using MwLevels = std::map<std::string, double>;  // zip -> dollars per hour

// Rental market of one residence ZIP under constant-elasticity forms:
//   h_iz = A R^xi_r P^xi_p Y_z^xi_y,  P = MW_i^eps_p,  Y_z = MW_z^eps_y(z),
//   S(R) = S0 R^eta.
struct ZipMarket {
    std::string zip;
    double workers = 1.0;  // L_i
    ExposureWeights weights;
    double xi_r = -1.0;   // < 0
    double xi_p = -0.5;   // < 0
    double xi_y = 1.0;    // > 0
    double eps_p = 0.2;   // > 0
    double eps_y = 0.1;   // >= 0, homogeneous across workplaces
    std::map<std::string, double> eps_y_by_dest;  // optional per-workplace override
    double eta = 0.0;     // >= 0
    double demand_scale = 1.0;
    double supply_scale = 1.0;

    double eps_y_for(const std::string& dest) const;
    bool homogeneous_income_elasticity() const;
};

struct MarketPrimitives {
    std::vector<ZipMarket> zips;

    void validate() const;  // sign restrictions and share normalization
    const ZipMarket& at(const std::string& zip) const;
};

enum class SolverMethod { bisection, newton };

struct SolverOptions {
    SolverMethod method = SolverMethod::bisection;
    double tolerance = 1e-12;  // in log rent
    int max_iterations = 400;
};

struct EquilibriumSolution {
    std::map<std::string, double> rents;
    int iterations = 0;     // summed over ZIPs
    double residual = 0.0;  // max |log excess demand|
};

// Log of total demand minus log of supply at the given log rent; strictly
// decreasing in log rent under the sign restrictions.
double log_excess_demand(const ZipMarket& market, const MwLevels& mw, double log_rent);

// Root of a strictly decreasing function of one variable. Bracket is grown
// from `guess` up to +-50; Newton steps are taken when `slope` is supplied and
// the step stays inside the current bracket.
struct RootResult {
    double x = 0.0;
    int iterations = 0;
};
RootResult solve_decreasing_root(const std::function<double(double)>& f, double guess,
                                 const SolverOptions& options,
                                 const std::function<double(double)>& slope = nullptr);

EquilibriumSolution solve_equilibrium(const MarketPrimitives& prim, const MwLevels& mw,
                                      const SolverOptions& options = {});

// Central finite-difference elasticities d ln R_i / d ln MW for a joint log
// shock to `shocked_zips`.
std::map<std::string, double> comparative_static(const MarketPrimitives& prim, const MwLevels& mw,
                                                 const std::vector<std::string>& shocked_zips,
                                                 double d_ln_mw = 1e-4,
                                                 const SolverOptions& options = {});

struct LinearResponse {
    double beta = 0.0;   // on the workplace measure
    double gamma = 0.0;  // on the residence measure
};

std::map<std::string, LinearResponse> linearized_response(const MarketPrimitives& prim);

// (beta_i + zeta_i, gamma_i) when commuting shares respond to workplace MWs
// with elasticity zeta <= 0.
std::map<std::string, LinearResponse> endogenous_shares_response(const MarketPrimitives& prim,
                                                                 double zeta);

// Equilibrium with shares pi_iz(MW_z) = pi0_iz (MW_z / MW0_z)^zeta. Shares
// are left unnormalized unless `renormalize` is set.
EquilibriumSolution solve_equilibrium_endogenous_shares(const MarketPrimitives& prim,
                                                        const MwLevels& mw,
                                                        const MwLevels& reference_mw, double zeta,
                                                        bool renormalize = false,
                                                        const SolverOptions& options = {});

// Adds a share-weighted mean-zero perturbation to every income elasticity.
MarketPrimitives perturb_income_elasticities(const MarketPrimitives& prim, double sd,
                                             std::uint64_t seed);

// Random primitives satisfying the sign restrictions; every ZIP commutes to
// itself and at least two other ZIPs.
MarketPrimitives random_primitives(std::size_t n_zips, std::uint64_t seed);

struct PropositionReport {
    int draws = 0;
    int workplace_sign_ok = 0;       // shock only where residents work: rent rises
    int no_exposure_zero_ok = 0;     // unexposed destination has no effect
    int indirect_total_ok = 0;       // every other ZIP shocked: rent rises
    int linearization_ratio_ok = 0;  // error ratio when the shock halves in [3.5, 4.5]
    int slopes_ok = 0;               // closed form vs finite differences, rel err 1e-3
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    double max_slope_rel_error = 0.0;

    bool all_ok() const;
};

PropositionReport run_proposition_suite(int draws, std::uint64_t seed, std::size_t n_zips = 5);

}  // namespace mwspill
