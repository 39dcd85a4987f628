#include "doctest.h"

#include "support.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace crn;

namespace
{
    SweepPoint point(std::uint32_t n, ProtocolKind p, double rreq, double rrep, std::optional<double> delay,
                     double success, std::uint32_t seeds = 10)
    {
        return SweepPoint{n, p, rreq, rrep, delay, success, seeds};
    }

    // CRP wins everywhere with growing gaps.
    std::vector<SweepPoint> favourable()
    {
        std::vector<SweepPoint> pts;
        for (std::uint32_t i = 0; i < 5; ++i)
        {
            const std::uint32_t n = 20 * (i + 1);
            const double k = static_cast<double>(i);
            pts.push_back(point(n, ProtocolKind::Crp, 5 + k, 3 + k * 0.1, 4 + k, 0.95));
            pts.push_back(point(n, ProtocolKind::Aodv, 10 + 4 * k, 4 + k, 5 + 2 * k, 0.8 - 0.1 * k));
        }
        return pts;
    }

    Verdict verdict(const TrendReport &r, std::size_t i) { return r.trends.at(i).verdict; }
}

TEST_CASE("protocol names round trip")
{
    CHECK(parse_protocol("crp") == ProtocolKind::Crp);
    CHECK(parse_protocol("aodv") == ProtocolKind::Aodv);
    CHECK(protocol_name(ProtocolKind::Aodv) == "aodv");
    CHECK_THROWS_AS(parse_protocol("dsr"), ConfigError);
}

TEST_CASE("endpoints are distinct SUs and shared by both protocols")
{
    for (std::uint64_t seed = 1; seed <= 30; ++seed)
    {
        SimConfig c;
        c.seed = seed;
        c.n_primary = 6;
        c.n_secondary = 20;
        const World w = generate_scenario(c);
        const auto [s, d] = pick_endpoints(w);
        REQUIRE(s != d);
        REQUIRE(w.node(s).is_secondary());
        REQUIRE(w.node(d).is_secondary());
        const Episode a = run_episode(c, ProtocolKind::Crp);
        const Episode b = run_episode(c, ProtocolKind::Aodv);
        REQUIRE(a.src == s);
        REQUIRE(b.src == s);
        REQUIRE(a.dst == d);
        REQUIRE(b.dst == d);
    }
    World tiny;
    tiny.nodes.push_back(test::su(0, 0, 0, 10, {}));
    CHECK_THROWS_AS(pick_endpoints(tiny), ConfigError);
}

TEST_CASE("a single run yields one point per protocol")
{
    SweepSpec spec;
    spec.n_cr = {30};
    spec.seeds = {4};
    const auto rows = run_sweep_runs(spec);
    REQUIRE(rows.size() == 2);
    const auto pts = aggregate(rows);
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].n_seeds == 1);
    CHECK(compare(pts, 1.0).low_confidence);
    std::ostringstream out;
    write_report(out, compare(pts, 1.0));
    CHECK(out.str().find("low-confidence") != std::string::npos);
}

TEST_CASE("default grid: ordered rows, serial equals parallel, CSV recompute equals aggregate")
{
    SweepSpec spec;
    const auto rows = run_sweep_runs(spec);
    REQUIRE(rows.size() == 100);
    CHECK(rows == run_sweep_runs_serial(spec));
    for (std::size_t i = 1; i < rows.size(); ++i)
    {
        const auto key = [](const RunRow &r) { return std::tuple(r.n_cr, static_cast<int>(r.protocol), r.seed); };
        REQUIRE(key(rows[i - 1]) < key(rows[i]));
    }

    const auto pts = aggregate(rows);
    REQUIRE(pts.size() == 10);

    std::stringstream csv;
    write_runs_csv(csv, rows);
    CHECK(csv.str().rfind("n_cr,protocol,seed,rreq,rrep,delay,success\n", 0) == 0);
    const auto back = read_runs_csv(csv);
    CHECK(back == rows);

    // Independent recomputation of each mean from the per-run rows.
    for (const auto &p : pts)
    {
        double rreq = 0, rrep = 0, delay = 0;
        int n = 0, ok = 0;
        for (const auto &r : back)
        {
            if (r.n_cr != p.n_cr || r.protocol != p.protocol)
                continue;
            ++n;
            rreq += static_cast<double>(r.metrics.rreq_count);
            rrep += static_cast<double>(r.metrics.rrep_count);
            if (r.metrics.success)
            {
                ++ok;
                delay += *r.metrics.routing_delay;
            }
            else
                REQUIRE_FALSE(r.metrics.routing_delay.has_value());
        }
        REQUIRE(n == 10);
        CHECK(p.mean_rreq == doctest::Approx(rreq / n));
        CHECK(p.mean_rrep == doctest::Approx(rrep / n));
        CHECK(p.success_rate * p.n_seeds == doctest::Approx(std::round(p.success_rate * p.n_seeds)));
        CHECK(p.success_rate == doctest::Approx(static_cast<double>(ok) / n));
        if (ok > 0)
            CHECK(*p.mean_delay == doctest::Approx(delay / ok));
        else
            CHECK_FALSE(p.mean_delay.has_value());
    }

    std::stringstream summary;
    write_points_csv(summary, pts);
    CHECK(summary.str().rfind("n_cr,protocol,mean_rreq,mean_rrep,mean_delay,success_rate\n", 0) == 0);
}

TEST_CASE("zero radio range means every discovery fails")
{
    SweepSpec spec;
    spec.base.radio_range = 0.0;
    spec.n_cr = {30};
    spec.seeds = {1, 2, 3};
    for (const auto &p : run_sweep(spec))
    {
        CHECK(p.success_rate == 0.0);
        CHECK_FALSE(p.mean_delay.has_value());
    }
}

TEST_CASE("compare: favourable data passes every trend")
{
    const auto r = compare(favourable(), 1.0);
    CHECK(r.problem.empty());
    CHECK_FALSE(r.low_confidence);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(verdict(r, i) == Verdict::Pass);
    CHECK(r.all_pass());
    REQUIRE(r.deltas.size() == 5);
    CHECK(r.deltas[4].rreq_gap == doctest::Approx(17.0));
}

TEST_CASE("compare: each trend can fail on its own")
{
    {
        auto pts = favourable();
        pts[8].mean_rreq = 30; // CRP at n=100 above AODV
        const auto r = compare(pts, 1.0);
        CHECK(verdict(r, 0) == Verdict::Fail);
        CHECK(verdict(r, 1) == Verdict::Pass);
    }
    {
        auto pts = favourable();
        pts[8].mean_rrep = pts[9].mean_rrep;
        CHECK(verdict(compare(pts, 1.0), 1) == Verdict::Fail);
    }
    {
        auto pts = favourable();
        pts[6].mean_delay = 1.0; // CRP delay drops by 5 > tolerance
        CHECK(verdict(compare(pts, 1.0), 2) == Verdict::Fail);
        CHECK(verdict(compare(pts, 10.0), 2) == Verdict::Pass);
    }
    {
        auto pts = favourable();
        pts[8].success_rate = 0.85;
        CHECK(verdict(compare(pts, 1.0), 3) == Verdict::Fail);
    }
}

TEST_CASE("compare: degenerate, insufficient and mismatched grids")
{
    {
        std::vector<SweepPoint> pts;
        for (std::uint32_t n : {20u, 40u, 60u})
        {
            pts.push_back(point(n, ProtocolKind::Crp, 1, 1, std::nullopt, 0));
            pts.push_back(point(n, ProtocolKind::Aodv, 1, 1, std::nullopt, 0));
        }
        const auto r = compare(pts, 1.0);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(verdict(r, i) == Verdict::Fail);
        CHECK(r.trends[0].detail.find("degenerate") != std::string::npos);
    }
    {
        auto pts = favourable();
        pts.resize(4); // n = 20, 40
        const auto r = compare(pts, 1.0);
        CHECK(verdict(r, 0) == Verdict::Insufficient);
    }
    {
        std::vector<SweepPoint> pts{point(20, ProtocolKind::Crp, 1, 1, 2.0, 1), point(20, ProtocolKind::Aodv, 3, 3, 4.0, 1)};
        CHECK(verdict(compare(pts, 1.0), 0) == Verdict::Insufficient);
    }
    {
        auto pts = favourable();
        pts.pop_back(); // AODV at n=100 missing
        const auto r = compare(pts, 1.0);
        CHECK_FALSE(r.problem.empty());
        for (const auto &t : r.trends)
            CHECK(t.verdict == Verdict::NoVerdict);
        CHECK_FALSE(r.all_pass());
    }
    {
        auto pts = favourable();
        pts[4].mean_delay.reset();
        CHECK(verdict(compare(pts, 1.0), 2) == Verdict::Insufficient);
    }
}

TEST_CASE("sweep validation names the field")
{
    auto message = [](const SweepSpec &s) {
        try
        {
            s.validate();
        }
        catch (const ConfigError &e)
        {
            return std::string(e.what());
        }
        return std::string();
    };
    SweepSpec s;
    s.seeds.clear();
    CHECK(message(s).find("seeds") != std::string::npos);
    s = {};
    s.n_cr = {1};
    CHECK(message(s).find("n_cr") != std::string::npos);
    s = {};
    s.n_cr = {10};
    s.base.kmeans_k = 9;
    CHECK(message(s).find("n_cr") != std::string::npos);
    s = {};
    s.pu_fraction = 1.0;
    CHECK(message(s).find("pu_fraction") != std::string::npos);
    s = {};
    s.protocols.clear();
    CHECK(message(s).find("protocols") != std::string::npos);
    s = {};
    CHECK(message(s).empty());
}

TEST_CASE("number formatting is shortest round-trip")
{
    CHECK(format_number(2.0) == "2");
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(1.0 / 3.0) == "0.3333333333333333");
}

TEST_CASE("figure series files carry one row per population")
{
    const auto dir = std::filesystem::temp_directory_path() / "crn_fig_test";
    std::filesystem::remove_all(dir);
    auto pts = favourable();
    pts[0].mean_delay.reset();
    const auto files = write_figure_series(dir.string(), pts, true);
    CHECK(files.size() == 8);
    for (const auto &f : files)
        CHECK(std::filesystem::exists(f));

    std::ifstream in(dir / "fig6_delay.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "n_cr,crp,aodv");
    CHECK(first == "20,,5");
    int rows = 1;
    for (std::string line; std::getline(in, line);)
        ++rows;
    CHECK(rows == 5);
    std::filesystem::remove_all(dir);
}
