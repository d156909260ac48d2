#pragma once

#include <map>
#include <string>
#include <vector>

#include "ebmine/ebpredict.hpp"
#include "ebmine/panel.hpp"
#include "ebmine/prior.hpp"
#include "ebmine/qmlfit.hpp"

namespace ebmine {

enum class SelectionRule { eb, naive };

SelectionRule parse_rule(const std::string& name);
std::string rule_name(SelectionRule r);

struct BacktestConfig {
    int first_forecast_year = 0; // 0: derived from the panel range
    int last_forecast_year = 0;
    int window_months = 240;
    int min_obs = kDefaultMinObs;
    double top_pct = 0.01;
    SelectionRule rule = SelectionRule::eb;
    std::vector<std::string> families; // empty: all
};

struct SelectedStrategy {
    std::string strategy_id;
    int sign; // +1 long the strategy as-is, -1 flipped
};

struct YearSelection {
    int forecast_year;
    std::size_t n_candidates; // strategies with valid window stats
    std::vector<SelectedStrategy> selected;
};

struct MonthlyReturn {
    Month month;
    double ret;
};

struct BacktestResult {
    std::vector<MonthlyReturn> months;
    std::vector<YearSelection> selections;
    // cumulative value of $1, one point per holding month plus the start
    std::vector<std::pair<Month, double>> cumulative;
    double mean_ret_ann = 0.0; // mean monthly * 12
    double sd_monthly = 0.0;
    double tstat = 0.0;      // mean / (sd / sqrt(n)) over holding months
    double sharpe_ann = 0.0; // mean / sd * sqrt(12)
    std::size_t skipped_months = 0; // holding months with no member data
    std::size_t skipped_years = 0;  // forecast years with no candidates
};

// First and last forecast year with config zeros resolved from the panel:
// the first December whose full window fits, through the year before the
// panel's last month.
std::pair<int, int> resolve_forecast_years(const ReturnsPanel& panel, const BacktestConfig& cfg);

// One fitted model per forecast year, each trained on that year's selection
// window. Per-year fit seeds are derived from fit.seed and the year.
std::map<int, ModelSpec> fit_yearly_models(const ReturnsPanel& panel, const BacktestConfig& cfg,
                                           const FitConfig& fit);

// Annual walk-forward backtest. For each forecast year y: summarize the
// window ending December y, rank by annualized predicted Sharpe (EB rule,
// using the year's model) or in-sample Sharpe (naive), select the top
// ceil(top_pct * candidates) with ties broken by strategy_id, sign each
// strategy to its predicted direction, and hold an equal-weight portfolio
// over January..December of y+1.
BacktestResult run_backtest(const ReturnsPanel& panel, const std::map<int, ModelSpec>& models,
                            const BacktestConfig& cfg);

struct OverlapRow {
    int forecast_year;
    std::size_t n_eb;
    std::size_t n_naive;
    std::size_t n_intersection;
    std::size_t n_union;
    double jaccard;
};

// Jaccard overlap of EB and naive selections, year by year, on identical
// windows.
std::vector<OverlapRow> selection_overlap(const ReturnsPanel& panel,
                                          const std::map<int, ModelSpec>& models,
                                          const BacktestConfig& cfg);

struct SortAccuracyConfig {
    int first_forecast_year = 0;
    int last_forecast_year = 0;
    int window_months = 240;
    int min_obs = kDefaultMinObs;
    int n_groups = 20;
    int split_year = 0; // 0: single era; else era1 <= split_year < era2
};

struct SortAccuracyRow {
    std::string family;
    std::string era; // "all", "era1", "era2"
    int group;       // 0-based, ascending in-sample mean
    std::size_t n_years;
    std::size_t n_months;        // pooled out-of-sample months
    double insample_t_mid;       // mean in-sample t-stat of the group
    double insample_mean_ann;    // mean in-sample return, annualized
    double predicted_mean_ann;   // mean signed EB prediction, annualized
    double oos_mean_ann;         // pooled out-of-sample mean, annualized
    double oos_se_ann;           // SE of the pooled monthly mean, annualized
};

// Sorts a family's strategies into equal-count groups by in-sample mean
// return each forecast year, then compares group-level EB predictions with
// the groups' realized next-year returns, pooled within eras.
std::vector<SortAccuracyRow> sort_accuracy(const ReturnsPanel& panel,
                                           const std::map<int, ModelSpec>& models,
                                           const std::string& family,
                                           const SortAccuracyConfig& cfg);

void save_sort_accuracy(const std::vector<SortAccuracyRow>& rows, const std::string& path);

} // namespace ebmine
