#include "mwspill/year_month.hpp"

#include "mwspill/error.hpp"

#include <charconv>
#include <cstdio>

namespace mwspill {

YearMonth YearMonth::parse(std::string_view text) {
    auto fail = [&] {
        return Error("bad_month", "invalid month '" + std::string(text) + "', expected YYYY-MM");
    };
    if (text.size() != 7 || text[4] != '-') throw fail();
    int year = 0;
    int month = 0;
    auto r1 = std::from_chars(text.data(), text.data() + 4, year);
    auto r2 = std::from_chars(text.data() + 5, text.data() + 7, month);
    if (r1.ec != std::errc{} || r1.ptr != text.data() + 4) throw fail();
    if (r2.ec != std::errc{} || r2.ptr != text.data() + 7) throw fail();
    if (month < 1 || month > 12) throw fail();
    return YearMonth(year, month);
}

std::string YearMonth::to_string() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year(), month());
    return buf;
}

}  // namespace mwspill
