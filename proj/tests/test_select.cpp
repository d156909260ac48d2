#include "doctest.h"

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ebmine/select.hpp"

using namespace ebmine;

namespace {

// Dyadic bases and wiggle keep every panel return, mean, and portfolio
// average exactly representable, so expectations below are exact.
constexpr double kBaseUnit = 1.0 / 1024.0;
constexpr double kWiggle = 1.0 / 4096.0;

double strategy_base(int i) { return (static_cast<double>(i) - 4.5) * kBaseUnit; }

std::string strategy_name(int i) { return "s0" + std::to_string(i); }

// 10 strategies, one family, alternating +-wiggle around a per-strategy base.
ReturnsPanel make_panel(Month first, Month last, int month_shift = 0) {
    ReturnsPanel p;
    for (int i = 0; i < 10; ++i) {
        double base = strategy_base(i);
        for (Month m = first; m <= last; ++m) {
            double w = (m % 2 == 0) ? kWiggle : -kWiggle;
            p.add(strategy_name(i), "acct_ew", m + month_shift, base + w);
        }
    }
    p.finalize();
    return p;
}

ModelSpec point_mass_model(double theta) {
    ModelSpec spec;
    FamilyParams p;
    p.theta1 = theta;
    p.theta2 = theta;
    p.lambda = 1.0;
    spec.families["acct_ew"] = p;
    return spec;
}

std::map<int, ModelSpec> yearly(const ModelSpec& spec, int first, int last) {
    std::map<int, ModelSpec> out;
    for (int y = first; y <= last; ++y) out[y] = spec;
    return out;
}

BacktestConfig base_config() {
    BacktestConfig cfg;
    cfg.window_months = 60;
    cfg.min_obs = 60;
    cfg.top_pct = 0.2;
    return cfg;
}

} // namespace

TEST_CASE("forecast years derive from the panel range") {
    ReturnsPanel p = make_panel(make_month(1990, 1), make_month(2005, 12));
    BacktestConfig cfg = base_config();
    auto [first, last] = resolve_forecast_years(p, cfg);
    CHECK(first == 1994); // first December with a full 60-month window
    CHECK(last == 2004);  // needs holding months in the following year

    cfg.first_forecast_year = 2000;
    cfg.last_forecast_year = 2002;
    auto [f2, l2] = resolve_forecast_years(p, cfg);
    CHECK(f2 == 2000);
    CHECK(l2 == 2002);

    BacktestConfig wide = base_config();
    wide.window_months = 240;
    CHECK_THROWS_WITH_AS(resolve_forecast_years(p, wide), doctest::Contains("no feasible"),
                         std::invalid_argument);
    CHECK_THROWS_AS(resolve_forecast_years(ReturnsPanel{}, cfg), std::invalid_argument);
}

TEST_CASE("naive backtest on a symmetric panel is exact") {
    ReturnsPanel p = make_panel(make_month(1990, 1), make_month(2005, 12));
    BacktestConfig cfg = base_config();
    cfg.rule = SelectionRule::naive;

    BacktestResult res = run_backtest(p, {}, cfg); // naive needs no models
    REQUIRE(res.selections.size() == 11);          // 1994..2004
    for (const auto& sel : res.selections) {
        CHECK(sel.n_candidates == 10);
        REQUIRE(sel.selected.size() == 2); // ceil(0.2 * 10)
        std::map<std::string, int> signs;
        for (const auto& s : sel.selected) signs[s.strategy_id] = s.sign;
        // the two extreme |t| strategies, signed toward their mean
        REQUIRE(signs.count("s00") == 1);
        REQUIRE(signs.count("s09") == 1);
        CHECK(signs["s00"] == -1);
        CHECK(signs["s09"] == 1);
    }

    // flipping s00 makes the wiggle cancel: every holding month earns the base
    REQUIRE(res.months.size() == 132); // Jan 1995 .. Dec 2005
    CHECK(res.months.front().month == make_month(1995, 1));
    CHECK(res.months.back().month == make_month(2005, 12));
    for (const auto& m : res.months) CHECK(m.ret == 4.5 * kBaseUnit);
    CHECK(res.mean_ret_ann == 12.0 * 4.5 * kBaseUnit);
    CHECK(res.sd_monthly == 0.0);
    CHECK(res.sharpe_ann == 0.0); // degenerate sd leaves the ratio unset
    CHECK(res.skipped_months == 0);
    CHECK(res.skipped_years == 0);

    // cumulative path: value of $1 anchored one month before the first return
    REQUIRE(res.cumulative.size() == 133);
    CHECK(res.cumulative.front().first == make_month(1994, 12));
    CHECK(res.cumulative.front().second == 1.0);
    double v = 1.0;
    for (std::size_t i = 1; i < res.cumulative.size(); ++i) {
        v *= 1.0 + res.months[i - 1].ret;
        CHECK(res.cumulative[i].second == doctest::Approx(v).epsilon(1e-15));
    }
}

TEST_CASE("eb backtest ranks by predicted sharpe with ties broken by id") {
    ReturnsPanel p = make_panel(make_month(1990, 1), make_month(2005, 12));
    BacktestConfig cfg = base_config();
    cfg.rule = SelectionRule::eb;

    // point mass at +3: every posterior is identical, so the tie-break picks
    // the two smallest ids, both held long
    auto models = yearly(point_mass_model(3.0), 1994, 2004);
    BacktestResult res = run_backtest(p, models, cfg);
    for (const auto& sel : res.selections) {
        REQUIRE(sel.selected.size() == 2);
        CHECK(sel.selected[0].strategy_id == "s00");
        CHECK(sel.selected[1].strategy_id == "s01");
        CHECK(sel.selected[0].sign == 1);
        CHECK(sel.selected[1].sign == 1);
    }
    // portfolio mean: avg of bases -4.5 and -3.5 units, wiggle survives but
    // cancels over each 12-month year
    CHECK(res.mean_ret_ann == 12.0 * -4.0 * kBaseUnit);

    // a negative point mass flips every sign
    auto neg = yearly(point_mass_model(-3.0), 1994, 2004);
    BacktestResult rneg = run_backtest(p, neg, cfg);
    CHECK(rneg.selections[0].selected[0].sign == -1);
    CHECK(rneg.mean_ret_ann == 12.0 * 4.0 * kBaseUnit);

    // missing model year is an error for the eb rule
    auto partial = yearly(point_mass_model(3.0), 1994, 2003);
    CHECK_THROWS_WITH_AS(run_backtest(p, partial, cfg), doctest::Contains("2004"),
                         std::runtime_error);
}

TEST_CASE("backtest counts skipped months and years") {
    // data stops mid-2005, so forecast year 2004 has only 6 holding months
    ReturnsPanel p = make_panel(make_month(1990, 1), make_month(2005, 6));
    BacktestConfig cfg = base_config();
    cfg.rule = SelectionRule::naive;
    BacktestResult res = run_backtest(p, {}, cfg);
    CHECK(res.skipped_months == 6);
    CHECK(res.months.size() == 126);

    // forcing earlier forecast years yields empty windows that are skipped
    cfg.first_forecast_year = 1992;
    BacktestResult r2 = run_backtest(p, {}, cfg);
    CHECK(r2.skipped_years == 2); // 1992, 1993 lack a full 60-month window
    CHECK(r2.selections.size() == 13);
    CHECK(r2.selections[0].n_candidates == 0);
    CHECK(r2.months.size() == 126);
}

TEST_CASE("backtest is calendar-shift invariant") {
    ReturnsPanel p = make_panel(make_month(1990, 1), make_month(2005, 12));
    ReturnsPanel shifted = make_panel(make_month(1990, 1), make_month(2005, 12), 24);
    BacktestConfig cfg = base_config();
    cfg.rule = SelectionRule::naive;
    BacktestResult a = run_backtest(p, {}, cfg);
    BacktestResult b = run_backtest(shifted, {}, cfg);
    REQUIRE(a.months.size() == b.months.size());
    for (std::size_t i = 0; i < a.months.size(); ++i) {
        CHECK(b.months[i].month == a.months[i].month + 24);
        CHECK(b.months[i].ret == a.months[i].ret);
    }
    CHECK(b.mean_ret_ann == a.mean_ret_ann);
}

TEST_CASE("family filter restricts the candidate set") {
    ReturnsPanel p = make_panel(make_month(1990, 1), make_month(2005, 12));
    // second family with huge |t| that would otherwise dominate
    for (Month m = make_month(1990, 1); m <= make_month(2005, 12); ++m) {
        double w = (m % 2 == 0) ? kWiggle : -kWiggle;
        p.add("loud", "ticker_ew", m, 0.05 + w);
    }
    p.finalize();

    BacktestConfig cfg = base_config();
    cfg.rule = SelectionRule::naive;
    cfg.families = {"acct_ew"};
    BacktestResult res = run_backtest(p, {}, cfg);
    for (const auto& sel : res.selections) {
        CHECK(sel.n_candidates == 10);
        for (const auto& s : sel.selected) CHECK(s.strategy_id != "loud");
    }

    BacktestConfig open = base_config();
    open.rule = SelectionRule::naive;
    BacktestResult all = run_backtest(p, {}, open);
    CHECK(all.selections[0].n_candidates == 11);
    CHECK(all.selections[0].selected[0].strategy_id == "loud");
}

TEST_CASE("fit_yearly_models covers every forecast year") {
    ReturnsPanel p = make_panel(make_month(1990, 1), make_month(2005, 12));
    BacktestConfig cfg = base_config();
    FitConfig fit; // min_tstats 50 > 10 candidates: every year falls back
    auto models = fit_yearly_models(p, cfg, fit);
    REQUIRE(models.size() == 11);
    for (int y = 1994; y <= 2004; ++y) {
        REQUIRE(models.count(y) == 1);
        CHECK(models.at(y).families.at("acct_ew") == null_params());
    }

    // null models give everyone the same zero prediction; tie-break by id
    cfg.rule = SelectionRule::eb;
    BacktestResult res = run_backtest(p, models, cfg);
    CHECK(res.selections[0].selected[0].strategy_id == "s00");
    CHECK(res.selections[0].selected[1].strategy_id == "s01");
}

TEST_CASE("selection overlap compares eb and naive picks") {
    ReturnsPanel p = make_panel(make_month(1990, 1), make_month(2005, 12));
    BacktestConfig cfg = base_config();
    auto models = yearly(point_mass_model(3.0), 1994, 2004);
    auto rows = selection_overlap(p, models, cfg);
    REQUIRE(rows.size() == 11);
    for (const auto& r : rows) {
        CHECK(r.n_eb == 2);    // s00, s01 by tie-break
        CHECK(r.n_naive == 2); // s00, s09 by |t|
        CHECK(r.n_intersection == 1);
        CHECK(r.n_union == 3);
        CHECK(r.jaccard == doctest::Approx(1.0 / 3.0));
    }
}

TEST_CASE("sort accuracy groups strategies by in-sample mean") {
    ReturnsPanel p = make_panel(make_month(1990, 1), make_month(2005, 12));
    auto models = yearly(point_mass_model(3.0), 1994, 2004);
    SortAccuracyConfig cfg;
    cfg.window_months = 60;
    cfg.min_obs = 60;
    cfg.n_groups = 4;

    auto rows = sort_accuracy(p, models, "acct_ew", cfg);
    REQUIRE(rows.size() == 4);
    // group boundaries at floor(10g/4): sizes 2, 3, 2, 3 ascending in mean
    std::vector<std::vector<int>> members = {{0, 1}, {2, 3, 4}, {5, 6}, {7, 8, 9}};
    for (int g = 0; g < 4; ++g) {
        const SortAccuracyRow& r = rows[static_cast<std::size_t>(g)];
        CHECK(r.family == "acct_ew");
        CHECK(r.era == "all");
        CHECK(r.group == g);
        CHECK(r.n_years == 11);
        CHECK(r.n_months == 132);
        double base = 0.0;
        for (int i : members[static_cast<std::size_t>(g)]) base += strategy_base(i);
        base /= static_cast<double>(members[static_cast<std::size_t>(g)].size());
        CHECK(r.insample_mean_ann == doctest::Approx(12.0 * base).epsilon(1e-12));
        // the wiggle cancels within each holding year
        CHECK(r.oos_mean_ann == doctest::Approx(12.0 * base).epsilon(1e-12));
        CHECK(r.oos_se_ann > 0.0);
        CHECK(r.oos_se_ann < 1e-3);
        CHECK(std::fabs(r.oos_mean_ann - r.insample_mean_ann) <= 2.0 * r.oos_se_ann);
    }
    // ascending groups, and the point-mass prior predicts the same positive
    // return everywhere
    CHECK(rows[0].insample_mean_ann < rows[3].insample_mean_ann);
    CHECK(rows[0].predicted_mean_ann == doctest::Approx(rows[3].predicted_mean_ann));
    CHECK(rows[0].predicted_mean_ann > 0.0);

    SortAccuracyConfig split = cfg;
    split.split_year = 1999;
    auto srows = sort_accuracy(p, models, "acct_ew", split);
    REQUIRE(srows.size() == 8);
    std::size_t n1 = 0, n2 = 0;
    for (const auto& r : srows) {
        if (r.era == "era1") {
            CHECK(r.n_years == 6); // 1994..1999
            ++n1;
        } else {
            REQUIRE(r.era == "era2");
            CHECK(r.n_years == 5); // 2000..2004
            ++n2;
        }
    }
    CHECK(n1 == 4);
    CHECK(n2 == 4);

    CHECK_THROWS_AS(sort_accuracy(p, models, "acct_ew", [] {
                        SortAccuracyConfig c;
                        c.n_groups = 1;
                        return c;
                    }()),
                    std::invalid_argument);
}
