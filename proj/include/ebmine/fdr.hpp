#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ebmine/panel.hpp"

namespace ebmine {

// A t-stat hurdle: strategies with |t| strictly above it are discoveries.
// When the binding threshold is an observed |t| value, the returned hurdle is
// placed one ulp below that value so the strict comparison reproduces the
// inclusive rejection set. +inf means no hurdle admits discoveries.
struct HurdleResult {
    std::string method; // "by13", "storey", "rw"
    double q_star = 0.0;
    double p_star = std::numeric_limits<double>::quiet_NaN(); // rw only
    double hurdle = std::numeric_limits<double>::infinity();
    std::size_t n_discoveries = 0;
    double pi = std::numeric_limits<double>::quiet_NaN(); // null-share multiplier
    // diagnostics
    std::size_t n_candidates = 0;      // grid methods
    int rw_k = 0;                      // k of the k-FWER hurdle finally used
    std::size_t rw_outer_evals = 0;    // k values examined
    std::size_t rw_stepdown_iters = 0;
    std::size_t rw_degenerate_boot = 0; // zero-variance resamples, t* set to 0
};

// Benjamini-Yekutieli style hurdle with the harmonic-sum multiplier
// pi = sum_{i=1..N} 1/i: the smallest observed |t| cutoff h such that
// Pr(|Z| > h) * pi / share(|t_i| >= h) <= q_star.
HurdleResult hurdle_by13(std::span<const double> tstats, double q_star);

inline constexpr double kDefaultStoreyNullCutoff = 1.0;

// Same search with a data-estimated null share:
// pi = min(1, share(|t_i| <= null_cutoff) / (2 Phi(null_cutoff) - 1)).
HurdleResult hurdle_storey(std::span<const double> tstats, double q_star,
                           double null_cutoff = kDefaultStoreyNullCutoff);

struct RwConfig {
    double p_star = 0.05; // FDP level: controls Pr(FDP > p_star) <= q_star
    double q_star = 0.05;
    int n_boot = 2000;
    std::uint64_t seed = 0;
    int min_obs = 2; // strategies with fewer observations are dropped
    unsigned n_threads = 0;
    std::size_t comb_limit = 100; // step-down set enumeration cap
    std::size_t max_stepdown_iters = 50;
};

// Bootstrap FDP-risk hurdle. Inner loop: k-FWER hurdle as the (1-q*) quantile
// of the k-th largest bootstrap |t*|, where bootstrap samples demean returns
// at the strategy level and resample months with replacement (jointly across
// strategies); refined step-down over sets combining (k-1)-subsets of the
// rejected strategies with all non-rejected ones, stopping when the subset
// count exceeds comb_limit, iterating until the hurdle is stable. Outer loop:
// bisection for the smallest k with k / (#{|t_i| > h(k)} + 1) > p_star, the
// fixed point of the FDP step-up rule.
HurdleResult hurdle_rw(const ReturnsPanel& panel_window, const RwConfig& cfg);

struct HurdleBinRow {
    std::string family;
    int bin; // ascending in-sample t-stat
    std::size_t n_strategies;
    std::size_t n_months;
    double insample_t_mid;
    double oos_mean_ann;
    double oos_se_ann;
};

struct HurdleCaptureRow {
    std::string method;
    double hurdle;
    std::size_t n_discoveries;
    std::size_t n_high_bins;     // bins with |oos_mean_ann| >= threshold
    std::size_t n_high_captured; // of those, bins with |insample_t_mid| > hurdle
};

struct HurdleEvaluation {
    std::vector<HurdleBinRow> bins;
    std::vector<HurdleCaptureRow> captures;
};

inline constexpr double kDefaultHighOosThreshold = 0.03;

// Sorts each family's strategies into equal-count bins by in-sample t-stat,
// computes each bin's out-of-sample equal-weight return, and reports which
// high-performing bins each hurdle captures.
HurdleEvaluation evaluate_hurdles(const std::vector<StrategyStats>& stats,
                                  const ReturnsPanel& oos_panel,
                                  const std::vector<HurdleResult>& hurdles, int n_bins = 20,
                                  double high_threshold = kDefaultHighOosThreshold);

void save_hurdle_bins(const std::vector<HurdleBinRow>& bins, const std::string& path);
std::string hurdles_to_json(const std::vector<HurdleResult>& hurdles,
                            const std::vector<HurdleCaptureRow>& captures);

} // namespace ebmine
