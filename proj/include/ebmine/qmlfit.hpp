#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ebmine/panel.hpp"
#include "ebmine/prior.hpp"

namespace ebmine {

struct FitBounds {
    double theta_lo = -10.0;
    double theta_hi = 10.0;
    double sigma_lo = 0.0;
    double sigma_hi = 10.0;
};

struct FitConfig {
    FitBounds bounds;
    int n_starts = 10;
    std::size_t max_evals = 5000; // per start
    double tol = 1e-8;
    std::size_t min_tstats = 50;
    std::uint64_t seed = 0;
    unsigned n_threads = 0; // 0: default
};

struct StartSummary {
    int start_index = 0;
    FamilyParams start;
    FamilyParams final_params;
    double loglik = 0.0;
    std::size_t n_evals = 0;
    bool converged = false;
};

struct FitResult {
    FamilyParams params; // canonical: sigma1 <= sigma2
    double loglik = 0.0;
    std::size_t n_evals = 0;
    bool converged = false;
    int best_start = 0;
    std::vector<StartSummary> starts;
};

// Quasi-maximum-likelihood fit of the mixture prior to a family's t-stats.
// Multi-start derivative-free search: a null-like start, a method-of-moments
// start, and deterministic quasi-random starts over a data-adaptive box.
// lambda is optimized on a logit coordinate so the search stays off the
// boundary; the winner is the highest log-likelihood, ties broken by start
// index. Requires at least cfg.min_tstats observations.
FitResult fit_family(std::span<const double> tstats, const FitConfig& cfg);

struct FitReport {
    ModelSpec model;
    std::map<std::string, FitResult> fits;
    std::vector<std::string> fallback_families; // under the observation floor
};

// Fits every family present in the stats. Families below the observation
// floor get the null prior and are recorded as fallbacks.
FitReport fit_all(const std::vector<StrategyStats>& stats, const FitConfig& cfg);

} // namespace ebmine
