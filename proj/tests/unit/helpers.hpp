#pragma once

#include "mwspill/error.hpp"
#include "mwspill/policy_panel.hpp"

#include <doctest.h>

#include <string>
#include <vector>

namespace testing {

inline mwspill::PolicySchedule schedule(const std::string& id, mwspill::JurisdictionLevel level,
                                        const std::string& region,
                                        std::vector<std::pair<std::string, double>> steps) {
    mwspill::PolicySchedule s;
    s.jurisdiction_id = id;
    s.level = level;
    s.region_code = region;
    for (const auto& [m, v] : steps) s.steps.push_back({mwspill::YearMonth::parse(m), v});
    return s;
}

inline mwspill::PolicySchedule federal(double mw = 7.25, const std::string& from = "2010-01") {
    return schedule("federal", mwspill::JurisdictionLevel::federal, "US", {{from, mw}});
}

inline mwspill::BlockRecord block(const std::string& id, const std::string& zip, double units,
                                  const std::string& state = "S1", const std::string& county = "C1",
                                  const std::string& place = "") {
    return {id, zip, state, county, place, units};
}

}  // namespace testing

// Runs `expr` and checks it throws mwspill::Error of the given kind.
#define CHECK_ERROR_KIND(expr, expected_kind)                                 \
    do {                                                                      \
        std::string kind_seen_ = "<none>";                                    \
        try {                                                                 \
            (void)(expr);                                                     \
        } catch (const mwspill::Error& e) {                                   \
            kind_seen_ = e.kind();                                            \
        }                                                                     \
        CHECK_MESSAGE(kind_seen_ == (expected_kind), "got kind " << kind_seen_); \
    } while (0)
