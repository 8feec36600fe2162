#include "mwspill/dynamic.hpp"

#include "mwspill/error.hpp"

#include <cmath>
#include <deque>

namespace mwspill {

void DynamicConfig::validate(const MarketPrimitives& prim) const {
    if (contract_length < 1) throw Error("invalid_dynamic", "contract length must be >= 1");
    if (horizon < contract_length) {
        throw Error("invalid_dynamic", "horizon must cover at least one contract length");
    }
    for (const auto& m : prim.zips) {
        auto it = lambda.find(m.zip);
        if (it == lambda.end()) throw Error("invalid_dynamic", "no contract-expiry shares for zip " + m.zip);
        const auto& lam = it->second;
        if (static_cast<int>(lam.size()) != horizon) {
            throw Error("invalid_dynamic", "expiry shares for zip " + m.zip + " do not span the horizon");
        }
        for (double v : lam) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw Error("invalid_dynamic", "expiry share outside [0,1] for zip " + m.zip);
            }
        }
        for (int t = contract_length - 1; t < horizon; ++t) {
            double s = 0.0;
            for (int tau = t - contract_length + 1; tau <= t; ++tau) s += lam[static_cast<std::size_t>(tau)];
            if (std::abs(s - 1.0) > 1e-9) {
                throw Error("invalid_dynamic", "expiry shares for zip " + m.zip +
                                                   " do not sum to one over the window ending at " +
                                                   std::to_string(t));
            }
        }
        if (!total_stock.count(m.zip) || !(total_stock.at(m.zip) > 0.0)) {
            throw Error("invalid_dynamic", "missing or non-positive housing stock for zip " + m.zip);
        }
    }
}

DynamicConfig DynamicConfig::uniform(const MarketPrimitives& prim, int horizon,
                                     const std::map<std::string, double>& total_stock,
                                     int contract_length) {
    DynamicConfig cfg;
    cfg.horizon = horizon;
    cfg.contract_length = contract_length;
    cfg.total_stock = total_stock;
    for (const auto& m : prim.zips) {
        cfg.lambda[m.zip].assign(static_cast<std::size_t>(horizon), 1.0 / contract_length);
    }
    return cfg;
}

double DynamicPath::steady_state_rent(const std::string& zip) const {
    return initial_rent.at(zip);
}

namespace {

struct Contract {
    double sqft = 0.0;
    double rent = 0.0;
};

}  // namespace

DynamicPath solve_dynamic_path(const MarketPrimitives& prim, const DynamicConfig& dyn,
                               const std::vector<MwLevels>& mw_path, const MwLevels& initial_mw,
                               const SolverOptions& options) {
    prim.validate();
    dyn.validate(prim);
    if (static_cast<int>(mw_path.size()) != dyn.horizon) {
        throw Error("invalid_dynamic", "MW path length must equal the horizon");
    }
    const MwLevels& start_mw = initial_mw.empty() ? mw_path.front() : initial_mw;
    const auto steady = solve_equilibrium(prim, start_mw, options);
    const int len = dyn.contract_length;

    DynamicPath path;
    for (const auto& m : prim.zips) {
        const auto& lam = dyn.lambda.at(m.zip);
        const double stock = dyn.total_stock.at(m.zip);
        const double r_ss = steady.rents.at(m.zip);
        const double d_ss = m.supply_scale * std::pow(r_ss, m.eta);
        if (stock < d_ss * (1.0 - 1e-12)) {
            throw Error("infeasible_stock", "total stock of zip " + m.zip +
                                                " is below steady-state housing demand");
        }
        path.initial_rent[m.zip] = r_ss;

        std::deque<Contract> ledger;
        for (int tau = -len; tau < 0; ++tau) {
            ledger.push_back({lam[static_cast<std::size_t>(tau + len)] * d_ss, r_ss});
        }

        std::vector<DynamicCell> cells;
        cells.reserve(static_cast<std::size_t>(dyn.horizon));
        double prev_rent = r_ss;
        for (int t = 0; t < dyn.horizon; ++t) {
            const double lambda_t = lam[static_cast<std::size_t>(t)];
            // log cohort demand at rent exp(x) is shifter + xi_r * x
            const double shifter = log_excess_demand(m, mw_path[static_cast<std::size_t>(t)], 0.0) +
                                   std::log(m.supply_scale);
            double held = 0.0;
            for (std::size_t k = 1; k < ledger.size(); ++k) held += ledger[k].sqft;

            DynamicCell cell;
            cell.available = stock - held;
            if (lambda_t == 0.0) {
                cell.no_market = true;
                cell.rent = prev_rent;
            } else {
                auto clear = [&](double x) {
                    return shifter + (m.xi_r - m.eta) * x - std::log(m.supply_scale);
                };
                double x = solve_decreasing_root(clear, std::log(prev_rent), options).x;
                double vac = lambda_t * m.supply_scale * std::exp(m.eta * x);
                if (vac > cell.available * (1.0 + 1e-12)) {
                    if (!(cell.available > 0.0)) {
                        throw Error("infeasible_stock", "no vacant space in zip " + m.zip + " at month " +
                                                            std::to_string(t));
                    }
                    const double log_cap = std::log(cell.available / lambda_t);
                    auto bound = [&](double y) { return shifter + m.xi_r * y - log_cap; };
                    x = solve_decreasing_root(bound, x, options).x;
                    vac = cell.available;
                    cell.feasibility_bound = true;
                }
                cell.rent = std::exp(x);
                cell.vacancies = vac;
                cell.new_contracts = lambda_t * std::exp(shifter + m.xi_r * x);
            }
            ledger.pop_front();
            ledger.push_back({cell.new_contracts, cell.rent});
            double sq = 0.0;
            double paid = 0.0;
            for (const auto& c : ledger) {
                sq += c.sqft;
                paid += c.sqft * c.rent;
            }
            cell.average_rent = sq > 0.0 ? paid / sq : cell.rent;
            prev_rent = cell.rent;
            cells.push_back(cell);
        }
        path.by_zip[m.zip] = std::move(cells);
    }
    return path;
}

}  // namespace mwspill
