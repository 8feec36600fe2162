#pragma once

#include "mwspill/equilibrium.hpp"

#include <map>
#include <string>
#include <vector>

namespace mwspill {

// Rental contracts last `contract_length` months; lambda[zip][t] is the share
// of residents signing in month t. Every window of `contract_length`
// consecutive months must sum to one, so the pattern is periodic and is
// extended backwards to seed the initial contract ledger.
struct DynamicConfig {
    std::map<std::string, std::vector<double>> lambda;
    int horizon = 0;
    int contract_length = 12;
    std::map<std::string, double> total_stock;  // S_i, square feet

    void validate(const MarketPrimitives& prim) const;

    static DynamicConfig uniform(const MarketPrimitives& prim, int horizon,
                                 const std::map<std::string, double>& total_stock,
                                 int contract_length = 12);
};

struct DynamicCell {
    double rent = 0.0;          // R_it, new-contract rent
    double average_rent = 0.0;  // square-foot weighted rent over active contracts
    double new_contracts = 0.0; // square feet signed this month
    double vacancies = 0.0;     // V_it
    double available = 0.0;     // S_i - H~_{i,t-1}
    bool feasibility_bound = false;
    bool no_market = false;     // lambda_it = 0: rent carried forward
};

struct DynamicPath {
    std::map<std::string, std::vector<DynamicCell>> by_zip;
    double steady_state_rent(const std::string& zip) const;
    std::map<std::string, double> initial_rent;
};

// mw_path[t] holds every ZIP's MW in month t; the ledger is initialized at
// the steady state of `initial_mw` (mw_path[0] when empty).
DynamicPath solve_dynamic_path(const MarketPrimitives& prim, const DynamicConfig& dyn,
                               const std::vector<MwLevels>& mw_path, const MwLevels& initial_mw = {},
                               const SolverOptions& options = {});

}  // namespace mwspill
