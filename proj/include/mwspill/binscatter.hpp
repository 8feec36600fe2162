#pragma once

#include "mwspill/panel.hpp"
#include "mwspill/regression.hpp"

#include <vector>

namespace mwspill {

enum class Measure { res, wkp };

struct BinscatterOptions {
    Measure measure = Measure::wkp;
    int n_bins = 30;
    int other_measure_bins = 100;
    Transform transform = Transform::first_difference;
    bool increase_months_only = true;  // keep CBSA-months with some statutory MW increase
};

struct BinPoint {
    double x_mean = 0.0;
    double y_mean = 0.0;
    std::size_t count = 0;
};

// Residualizes log rents and the chosen measure on ZIP indicators plus
// quantile-bin indicators of the other measure, then averages both over
// equal-count bins of the residualized measure (ties kept in input order).
std::vector<BinPoint> binned_residual_scatter(const Panel& panel, const BinscatterOptions& options = {});

}  // namespace mwspill
