#include "helpers.hpp"

#include "mwspill/csv.hpp"
#include "mwspill/io.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <fstream>
#include <random>
#include <sstream>

using namespace mwspill;
namespace fs = std::filesystem;

namespace {

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("mwspill_io_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string write(const std::string& name, const std::string& text) const {
        const auto p = (path / name).string();
        std::ofstream(p) << text;
        return p;
    }
};

}  // namespace

TEST_CASE("format_double round-trips every double exactly") {
    std::mt19937_64 gen(17);
    for (int k = 0; k < 20000; ++k) {
        const std::uint64_t bits = gen();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        if (!std::isfinite(v)) continue;
        const auto text = csv::format_double(v);
        CHECK(std::strtod(text.c_str(), nullptr) == v);
    }
    CHECK(csv::format_double(0.1) == "0.1");
    CHECK(csv::format_double(-2.5) == "-2.5");
    CHECK(csv::format_double(std::nan("")) == "NA");
    CHECK(csv::format_double(-INFINITY) == "-inf");
}

TEST_CASE("csv tables") {
    const auto t = csv::Table::parse("a,b,c\n1,\"x,y\",NA\n2,\"say \"\"hi\"\"\",3.5\n", "t.csv");
    REQUIRE(t.rows() == 2);
    CHECK(t.at(0, 1) == "x,y");
    CHECK(t.at(1, 1) == "say \"hi\"");
    CHECK_FALSE(t.optional_number(0, 2).has_value());
    CHECK(t.number(1, 2) == 3.5);
    CHECK(t.integer(1, 0) == 2);

    CHECK(message_of([&] { t.column("d"); }).find("missing column 'd'") != std::string::npos);
    CHECK(message_of([&] { t.number(0, 2); }) == "t.csv:2: missing value in column 'c'");
    CHECK(message_of([&] { t.number(0, 1); }).find("t.csv:2: column 'b' is not a number") != std::string::npos);
    CHECK_ERROR_KIND(csv::Table::parse("a,b\n1,2\n3\n", "short.csv"), "schema");
    CHECK(message_of([] { csv::Table::parse("a,b\n1,2\n3\n", "short.csv"); }).find("short.csv:3") !=
          std::string::npos);
    CHECK_ERROR_KIND(csv::Table::parse("", "empty.csv"), "schema");
    CHECK_ERROR_KIND(csv::Table::read_file("/nonexistent/file.csv"), "io");

    std::ostringstream out;
    csv::Writer w(out);
    w.row({"plain", "with,comma", "q\"uote"});
    const auto back = csv::Table::parse("h1,h2,h3\n" + out.str());
    CHECK(back.at(0, 1) == "with,comma");
    CHECK(back.at(0, 2) == "q\"uote");
}

TEST_CASE("policy and measure files round-trip") {
    TempDir dir;
    const PolicySet set({testing::federal(7.25, "2009-07"),
                         testing::schedule("wa", JurisdictionLevel::state, "WA", {{"2015-01", 9.47}, {"2016-01", 9.47 + 1e-13}}),
                         testing::schedule("sea", JurisdictionLevel::place, "Seattle", {{"2015-04", 11.0}})});
    std::ostringstream out;
    io::write_policies(out, set);
    const auto back = io::read_policies(dir.write("p.csv", out.str()));
    REQUIRE(back.schedules().size() == 3);
    const auto* wa = back.find(JurisdictionLevel::state, "WA");
    REQUIRE(wa != nullptr);
    CHECK(wa->steps.at(1).mw == 9.47 + 1e-13);
    CHECK(back.find(JurisdictionLevel::place, "Seattle")->steps.at(0).month == YearMonth{2015, 4});

    const std::string dup =
        "jurisdiction_id,level,region_code,month,mw_dollars\nfed,federal,US,2009-07,7.25\nfed,federal,US,2009-07,7.5\n";
    const auto dup_path = dir.write("dup.csv", dup);
    CHECK_ERROR_KIND(io::read_policies(dup_path), "duplicate_step");
    CHECK(message_of([&] { io::read_policies(dup_path); }).find("dup.csv:3") != std::string::npos);
    const auto neg_path =
        dir.write("neg.csv", "jurisdiction_id,level,region_code,month,mw_dollars\nfed,federal,US,2009-07,-1\n");
    CHECK(message_of([&] { io::read_policies(neg_path); }).find("neg.csv:2: mw_dollars must be positive") !=
          std::string::npos);
    const auto missing = dir.write("miss.csv", "jurisdiction_id,level,month,mw_dollars\n");
    CHECK_ERROR_KIND(io::read_policies(missing), "schema");

    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(1.5, 3.0);
    std::vector<MeasureRow> rows;
    for (int z = 0; z < 5; ++z) {
        for (int t = 0; t < 7; ++t) rows.push_back({"0" + std::to_string(1000 + z), YearMonth{2019, 6} + t, u(gen), u(gen)});
    }
    std::ostringstream mout;
    io::write_measures(mout, rows, "all", "fixed_2017");
    const auto mback = io::read_measures(dir.write("m.csv", mout.str()));
    REQUIRE(mback.size() == rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        CHECK(mback[k].zip == rows[k].zip);
        CHECK(mback[k].month == rows[k].month);
        CHECK(mback[k].mw_res == rows[k].mw_res);
        CHECK(mback[k].mw_wkp == rows[k].mw_wkp);
    }
}

TEST_CASE("json configs") {
    RegressionSpec spec;
    spec.name = "es";
    spec.transform = Transform::levels;
    spec.fe = {FixedEffect::zip, FixedEffect::time_cbsa};
    spec.wkp_window = 6;
    spec.controls = {"emp", "wage"};
    spec.cluster = ClusterDim::county;
    const auto back = io::spec_from_json(io::spec_to_json(spec));
    CHECK(io::spec_to_json(back) == io::spec_to_json(spec));
    CHECK(back.fe == spec.fe);
    CHECK(back.wkp_window == 6);
    CHECK_ERROR_KIND(io::spec_from_json(io::json{{"fe", {"weekday"}}}), "invalid_spec");

    const auto sc = io::scenario_from_json(io::json::parse(R"({"name":"fed9",
        "overrides":[{"level":"federal","region_code":"US","mw_dollars":9}]})"));
    CHECK(sc.beta == 0.0685);
    CHECK(sc.gamma == -0.0219);
    CHECK(sc.epsilon == 0.1);
    CHECK(sc.base_month == YearMonth{2019, 12});
    REQUIRE(sc.overrides.size() == 1);
    CHECK(sc.overrides[0].mw == 9.0);
    CHECK_ERROR_KIND(io::scenario_from_json(io::json::parse(R"({"overrides":[{"level":"galaxy","mw_dollars":9}]})")),
                     "schema");
    CHECK_ERROR_KIND(io::scenario_from_json(io::json::parse(R"({"overrides":[{"level":"state","mw_dollars":0}]})")),
                     "invalid_scenario");

    CHECK(io::number(1.5) == io::json(1.5));
    CHECK(io::number(std::nan("")) == io::json("NA"));
}
