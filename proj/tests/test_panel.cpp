#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ebmine/family.hpp"
#include "ebmine/panel.hpp"
#include "ebmine/rng.hpp"

using namespace ebmine;

namespace {

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    REQUIRE(out.good());
    out << text;
}

ReturnsPanel make_simple_panel() {
    ReturnsPanel p;
    p.add("s1", "acct_ew", make_month(2000, 1), 0.01);
    p.add("s1", "acct_ew", make_month(2000, 2), -0.02);
    p.add("s1", "acct_ew", make_month(2000, 3), 0.03);
    p.add("s2", "pastret_vw", make_month(2000, 2), 0.05);
    p.finalize();
    return p;
}

} // namespace

TEST_CASE("month codes and text round-trip") {
    Month m = make_month(1995, 7);
    CHECK(month_year(m) == 1995);
    CHECK(month_of_year(m) == 7);
    CHECK(format_month(m) == "1995-07");
    CHECK(parse_month("1995-07") == m);
    CHECK(parse_month("2020-12") - parse_month("2019-12") == 12);

    // arithmetic stays consistent across year boundaries and era zero
    CHECK(month_year(make_month(1, 1) - 1) == 0);
    CHECK(month_of_year(make_month(1, 1) - 1) == 12);

    CHECK_THROWS_AS(make_month(2000, 0), std::exception);
    CHECK_THROWS_AS(make_month(2000, 13), std::exception);
    CHECK_THROWS_AS(parse_month("2000-00"), std::exception);
    CHECK_THROWS_AS(parse_month("2000/01"), std::exception);
    CHECK_THROWS_AS(parse_month("200-01"), std::exception);
    CHECK_THROWS_AS(parse_month(""), std::exception);
}

TEST_CASE("panel add, finalize, and lookups") {
    ReturnsPanel p = make_simple_panel();
    CHECK(p.n_strategies() == 2);
    CHECK(p.n_observations() == 4);
    CHECK(p.find("s1") != nullptr);
    CHECK(p.find("s1")->family == "acct_ew");
    CHECK(p.find("nope") == nullptr);
    CHECK(*p.min_month() == make_month(2000, 1));
    CHECK(*p.max_month() == make_month(2000, 3));

    ReturnsPanel empty;
    CHECK_FALSE(empty.min_month().has_value());
    CHECK_FALSE(empty.max_month().has_value());
}

TEST_CASE("panel rejects family conflicts and duplicate months") {
    ReturnsPanel p;
    p.add("s1", "acct_ew", make_month(2000, 1), 0.01);
    CHECK_THROWS_WITH_AS(p.add("s1", "acct_vw", make_month(2000, 2), 0.01),
                         doctest::Contains("s1"), std::runtime_error);

    ReturnsPanel q;
    q.add("s1", "acct_ew", make_month(2000, 5), 0.01);
    q.add("s1", "acct_ew", make_month(2000, 5), 0.02);
    CHECK_THROWS_WITH_AS(q.finalize(), doctest::Contains("duplicate"), std::runtime_error);
}

TEST_CASE("finalize sorts observations by month") {
    ReturnsPanel p;
    p.add("s1", "acct_ew", make_month(2000, 3), 0.3);
    p.add("s1", "acct_ew", make_month(2000, 1), 0.1);
    p.add("s1", "acct_ew", make_month(2000, 2), 0.2);
    p.finalize();
    const auto& obs = p.find("s1")->obs;
    REQUIRE(obs.size() == 3);
    CHECK(obs[0].ret == 0.1);
    CHECK(obs[1].ret == 0.2);
    CHECK(obs[2].ret == 0.3);
}

TEST_CASE("panel save/load round-trips bit-identically") {
    ReturnsPanel p;
    RngStream rng(5, "panel-roundtrip");
    for (int s = 0; s < 4; ++s)
        for (int m = 0; m < 30; ++m)
            p.add("s" + std::to_string(s), "pastret_ew", make_month(2001, 1) + m,
                  rng.next_normal() * 0.04);
    p.finalize();

    std::string path = "test_tmp_panel.csv";
    save_panel(p, path);
    ReturnsPanel q = load_panel(path);
    REQUIRE(q.n_strategies() == p.n_strategies());
    for (const auto& s : p.strategies()) {
        const StrategySeries* t = q.find(s.strategy_id);
        REQUIRE(t != nullptr);
        CHECK(t->family == s.family);
        REQUIRE(t->obs.size() == s.obs.size());
        for (std::size_t i = 0; i < s.obs.size(); ++i) {
            CHECK(t->obs[i].month == s.obs[i].month);
            CHECK(t->obs[i].ret == s.obs[i].ret); // exact: shortest round-trip format
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("load_panel reports malformed rows with line numbers") {
    std::string path = "test_tmp_badpanel.csv";

    write_file(path, "strategy_id,family,month,ret\ns1,acct_ew,2000-01,0.01\ns1,acct_ew,bad,0.02\n");
    CHECK_THROWS_WITH_AS(load_panel(path), doctest::Contains("line 3"), std::runtime_error);

    write_file(path, "strategy_id,family,month,ret\ns1,acct_ew,2000-01,nan\n");
    CHECK_THROWS_WITH_AS(load_panel(path), doctest::Contains("line 2"), std::runtime_error);

    write_file(path, "strategy_id,family,month,ret\n,acct_ew,2000-01,0.01\n");
    CHECK_THROWS_AS(load_panel(path), std::runtime_error);

    write_file(path, "strategy_id,family,month,ret\ns1,acct_ew,2000-01,0.01\ns1,acct_ew,2000-01,0.02\n");
    CHECK_THROWS_WITH_AS(load_panel(path), doctest::Contains("duplicate"), std::runtime_error);

    CHECK_THROWS_AS(load_panel("test_tmp_does_not_exist.csv"), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("family labels outside the canonical set need opt-in") {
    for (const char* f : kCanonicalFamilies) CHECK(is_canonical_family(f));
    CHECK_FALSE(is_canonical_family("custom"));
    CHECK_FALSE(is_canonical_family("acct"));

    std::string path = "test_tmp_fam.csv";
    write_file(path, "strategy_id,family,month,ret\ns1,custom,2000-01,0.01\n");
    CHECK_THROWS_WITH_AS(load_panel(path), doctest::Contains("custom"), std::runtime_error);

    PanelSchema schema;
    schema.allow_custom_families = true;
    ReturnsPanel p = load_panel(path, schema);
    CHECK(p.find("s1")->family == "custom");
    std::remove(path.c_str());
}

TEST_CASE("load_panel honors renamed columns") {
    std::string path = "test_tmp_cols.csv";
    write_file(path, "id,fam,ym,r\ns1,acct_ew,2000-01,0.01\n");
    PanelSchema schema;
    schema.strategy_id = "id";
    schema.family = "fam";
    schema.month = "ym";
    schema.ret = "r";
    ReturnsPanel p = load_panel(path, schema);
    CHECK(p.n_observations() == 1);
    CHECK_THROWS_AS(load_panel(path), std::runtime_error); // default names absent
    std::remove(path.c_str());
}

TEST_CASE("window keeps (end - length, end] and drops emptied strategies") {
    ReturnsPanel p;
    Month end = make_month(2010, 12);
    for (int k = 0; k < 30; ++k) p.add("long", "acct_ew", end - k, 0.01 * (k + 1));
    p.add("old", "acct_ew", end - 24, 0.5); // outside a 24-month window
    p.finalize();

    ReturnsPanel w = window(p, end, 24);
    CHECK(w.n_strategies() == 1);
    const auto& obs = w.find("long")->obs;
    REQUIRE(obs.size() == 24);
    CHECK(obs.front().month == end - 23); // end - L excluded, end - L + 1 included
    CHECK(obs.back().month == end);       // end itself included

    ReturnsPanel w1 = window(p, end, 1);
    REQUIRE(w1.find("long")->obs.size() == 1);
    CHECK(w1.find("long")->obs[0].month == end);

    // a window ending before all data is empty
    CHECK(window(p, end - 40, 5).n_strategies() == 0);
}

TEST_CASE("summarize matches a direct two-pass computation") {
    ReturnsPanel p;
    RngStream rng(17, "summ");
    std::vector<double> rets;
    Month start = make_month(1990, 1);
    for (int m = 0; m < 80; ++m) {
        double r = 0.004 + 0.03 * rng.next_normal();
        rets.push_back(r);
        p.add("s1", "ticker_ew", start + m, r);
    }
    p.finalize();

    auto stats = summarize(p, 60);
    REQUIRE(stats.size() == 1);
    const StrategyStats& st = stats[0];
    CHECK(st.strategy_id == "s1");
    CHECK(st.family == "ticker_ew");
    CHECK(st.n_obs == 80);
    CHECK(st.window_start == start);
    CHECK(st.window_end == start + 79);

    long double mean = 0.0L;
    for (double r : rets) mean += r;
    mean /= rets.size();
    long double ss = 0.0L;
    for (double r : rets) ss += (r - mean) * (r - mean);
    double sd = std::sqrt(static_cast<double>(ss / (rets.size() - 1)));
    double se = sd / std::sqrt(80.0);
    CHECK(st.mean_ret == doctest::Approx(static_cast<double>(mean)).epsilon(1e-14));
    CHECK(st.sd_ret == doctest::Approx(sd).epsilon(1e-12));
    CHECK(st.se == doctest::Approx(se).epsilon(1e-12));
    CHECK(st.tstat == doctest::Approx(static_cast<double>(mean) / se).epsilon(1e-12));
}

TEST_CASE("summarize drops short and degenerate series with diagnostics") {
    ReturnsPanel p;
    Month start = make_month(2000, 1);
    for (int m = 0; m < 70; ++m) p.add("keep", "acct_ew", start + m, 0.01 * ((m % 3) - 1));
    for (int m = 0; m < 59; ++m) p.add("short", "acct_ew", start + m, 0.01 * ((m % 3) - 1));
    for (int m = 0; m < 70; ++m) p.add("flat", "acct_ew", start + m, 0.02);
    p.finalize();

    SummarizeDiagnostics diag;
    auto stats = summarize(p, 60, &diag);
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].strategy_id == "keep");
    CHECK(diag.dropped_min_obs == 1);
    CHECK(diag.dropped_zero_sd == 1);

    // lower threshold readmits the short series
    auto stats2 = summarize(p, 10);
    CHECK(stats2.size() == 2);
}

TEST_CASE("stats save/load round-trip") {
    ReturnsPanel p;
    RngStream rng(23, "statsio");
    Month start = make_month(1985, 6);
    for (int s = 0; s < 3; ++s)
        for (int m = 0; m < 65; ++m)
            p.add("s" + std::to_string(s), "pastret_vw", start + m, rng.next_normal() * 0.05);
    p.finalize();
    auto stats = summarize(p, 60);
    REQUIRE(stats.size() == 3);

    std::string path = "test_tmp_stats.csv";
    save_stats(stats, path);
    auto loaded = load_stats(path);
    REQUIRE(loaded.size() == stats.size());
    for (std::size_t i = 0; i < stats.size(); ++i) {
        CHECK(loaded[i].strategy_id == stats[i].strategy_id);
        CHECK(loaded[i].family == stats[i].family);
        CHECK(loaded[i].window_start == stats[i].window_start);
        CHECK(loaded[i].window_end == stats[i].window_end);
        CHECK(loaded[i].n_obs == stats[i].n_obs);
        CHECK(loaded[i].mean_ret == stats[i].mean_ret);
        CHECK(loaded[i].sd_ret == stats[i].sd_ret);
        CHECK(loaded[i].se == stats[i].se);
        CHECK(loaded[i].tstat == stats[i].tstat);
    }
    std::remove(path.c_str());
}

TEST_CASE("tstat histogram bins are centered on multiples of the width") {
    std::vector<StrategyStats> stats;
    auto push = [&](const std::string& id, const std::string& fam, double t) {
        StrategyStats s;
        s.strategy_id = id;
        s.family = fam;
        s.window_start = make_month(2000, 1);
        s.window_end = make_month(2004, 12);
        s.n_obs = 60;
        s.mean_ret = 0.01;
        s.sd_ret = 0.05;
        s.se = 0.005;
        s.tstat = t;
        stats.push_back(s);
    };
    // bin j covers [(j-0.5)w, (j+0.5)w): with w=1, 0.49 -> bin 0, 0.5 -> bin 1
    push("a", "acct_ew", 0.49);
    push("b", "acct_ew", 0.5);
    push("c", "acct_ew", 0.51);
    push("d", "acct_ew", -0.5); // left edge is closed, so -0.5 lands in bin 0
    auto bins = tstat_histogram(stats, 1.0);
    REQUIRE(bins.size() == 2);
    CHECK(bins[0].bin_left == doctest::Approx(-0.5));
    CHECK(bins[0].bin_right == doctest::Approx(0.5));
    CHECK(bins[0].count == 2); // 0.49 and -0.5
    CHECK(bins[1].bin_left == doctest::Approx(0.5));
    CHECK(bins[1].count == 2); // 0.5 and 0.51
    for (const auto& b : bins) {
        double center = 0.5 * (b.bin_left + b.bin_right);
        CHECK(b.null_density ==
              doctest::Approx(std::exp(-0.5 * center * center) * 0.3989422804014327).epsilon(1e-12));
    }
}

TEST_CASE("tstat histogram densities integrate to one per family") {
    std::vector<StrategyStats> stats;
    RngStream rng(31, "hist");
    for (int i = 0; i < 500; ++i) {
        StrategyStats s;
        s.strategy_id = "s" + std::to_string(i);
        s.family = (i % 2 == 0) ? "acct_ew" : "ticker_vw";
        s.window_start = make_month(2000, 1);
        s.window_end = make_month(2004, 12);
        s.n_obs = 60;
        s.mean_ret = 0.01;
        s.sd_ret = 0.05;
        s.se = 0.005;
        s.tstat = 2.0 * rng.next_normal() + 0.3;
        stats.push_back(s);
    }
    double w = 0.25;
    auto bins = tstat_histogram(stats, w);
    double mass_acct = 0.0, mass_ticker = 0.0;
    std::size_t n_acct = 0, n_ticker = 0;
    for (const auto& b : bins) {
        CHECK(b.bin_right - b.bin_left == doctest::Approx(w).epsilon(1e-12));
        if (b.family == "acct_ew") {
            mass_acct += b.density * w;
            n_acct += b.count;
        } else {
            REQUIRE(b.family == "ticker_vw");
            mass_ticker += b.density * w;
            n_ticker += b.count;
        }
    }
    CHECK(n_acct == 250);
    CHECK(n_ticker == 250);
    CHECK(mass_acct == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(mass_ticker == doctest::Approx(1.0).epsilon(1e-9));

    std::string path = "test_tmp_hist.csv";
    save_histogram(bins, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "family,bin_left,bin_right,count,density,null_density");
    std::remove(path.c_str());
}
