#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebmine/month.hpp"

namespace ebmine {

struct Observation {
    Month month;
    double ret;
};

struct StrategySeries {
    std::string strategy_id;
    std::string family;
    std::vector<Observation> obs; // sorted by month, unique months
};

// Long panel of monthly strategy returns keyed by (strategy_id, month).
// Strategies are stored in insertion order; lookups go through an index.
class ReturnsPanel {
  public:
    void add(const std::string& strategy_id, const std::string& family, Month month, double ret);
    void reserve(std::size_t n_strategies) { strategies_.reserve(n_strategies); }
    // Sorts each strategy's observations by month. Called by loaders; callers
    // composing panels by hand must call it before windowed queries.
    void finalize();

    std::size_t n_strategies() const { return strategies_.size(); }
    std::size_t n_observations() const;
    const std::vector<StrategySeries>& strategies() const { return strategies_; }
    const StrategySeries* find(const std::string& strategy_id) const;

    std::optional<Month> min_month() const;
    std::optional<Month> max_month() const;

  private:
    std::vector<StrategySeries> strategies_;
    std::map<std::string, std::size_t> index_;
};

struct PanelSchema {
    std::string strategy_id = "strategy_id";
    std::string family = "family";
    std::string month = "month";
    std::string ret = "ret";
    bool allow_custom_families = false;
};

// Loads a returns panel. Malformed rows and duplicate (strategy, month) keys
// are reported with their position; family labels outside the canonical set
// are rejected unless the schema opts in to custom labels.
ReturnsPanel load_panel(const std::string& path, const PanelSchema& schema = {});

// Writes `strategy_id,family,month,ret`; numbers round-trip bit-identically.
void save_panel(const ReturnsPanel& panel, const std::string& path);

// Restriction to months in (end_month - length_months, end_month]. Strategies
// left with no observations are dropped.
ReturnsPanel window(const ReturnsPanel& panel, Month end_month, int length_months);

struct StrategyStats {
    std::string strategy_id;
    std::string family;
    Month window_start; // first and last observed month for this strategy
    Month window_end;
    std::size_t n_obs;
    double mean_ret;
    double sd_ret; // n-1 denominator
    double se;     // sd / sqrt(n), i.i.d. convention
    double tstat;  // mean / se
};

struct SummarizeDiagnostics {
    std::size_t dropped_min_obs = 0;
    std::size_t dropped_zero_sd = 0;
};

inline constexpr int kDefaultMinObs = 60;

// Per-strategy summary over whatever months the panel holds. Strategies with
// fewer than min_obs observations or zero return variance are excluded.
std::vector<StrategyStats> summarize(const ReturnsPanel& panel, int min_obs = kDefaultMinObs,
                                     SummarizeDiagnostics* diag = nullptr);

void save_stats(const std::vector<StrategyStats>& stats, const std::string& path);
std::vector<StrategyStats> load_stats(const std::string& path);

struct HistogramBin {
    std::string family;
    double bin_left;
    double bin_right;
    std::size_t count;
    double density;      // count / (family total * bin width)
    double null_density; // standard normal density at the bin center
};

// Per-family histogram of t-stats with bins centered on multiples of width:
// bin j covers [(j-0.5)w, (j+0.5)w). Densities integrate to 1 per family.
std::vector<HistogramBin> tstat_histogram(const std::vector<StrategyStats>& stats,
                                          double bin_width);

void save_histogram(const std::vector<HistogramBin>& bins, const std::string& path);

} // namespace ebmine
