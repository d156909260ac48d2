#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ebmine/panel.hpp"
#include "ebmine/prior.hpp"
#include "ebmine/qmlfit.hpp"

namespace ebmine {

struct FamilyGenSpec {
    std::string family;
    FamilyParams params; // prior over the true mean t-stat mu
    int n_strategies = 0;
    int n_months = 0;
    double vol_lo = 0.05; // monthly return volatility; lo == hi means constant
    double vol_hi = 0.05;
    int nobs_lo = 0; // 0: every strategy observes all months; otherwise each
    int nobs_hi = 0; // strategy keeps only its last n ~ U[lo, hi] months
};

struct GeneratorSpec {
    std::vector<FamilyGenSpec> families;
    Month end_month = make_month(2020, 12);
    double factor_loading = 0.0; // in [0, 1): cross-strategy correlation knob
    std::uint64_t seed = 0;
};

std::string generator_spec_to_json(const GeneratorSpec& spec);
GeneratorSpec generator_spec_from_json(const std::string& text);
GeneratorSpec load_generator_spec(const std::string& path);
void save_generator_spec(const GeneratorSpec& spec, const std::string& path);

struct TruthRow {
    std::string strategy_id;
    std::string family;
    double mu_t;              // true mean in t-stat units over the full window
    double true_monthly_mean; // mu_t * vol / sqrt(n_obs)
    double vol;
    int n_obs;
};

struct GeneratedPanel {
    ReturnsPanel panel;
    std::vector<TruthRow> truth;
};

// Hierarchical simulator: mu ~ family prior, monthly returns i.i.d. normal
// with mean mu * vol / sqrt(n_obs) and sd vol, so the t-stat over each
// strategy's observed months is approximately N(mu, 1). An optional common
// factor adds cross-strategy correlation without changing per-strategy
// volatility.
GeneratedPanel generate_panel(const GeneratorSpec& spec);

void save_truth(const std::vector<TruthRow>& truth, const std::string& path);
std::vector<TruthRow> load_truth(const std::string& path);

struct FdpBin {
    double left; // |mu| bin, [left, right); first bin is [0, null_band]
    double right;
    double mean_share;
    double share_p05;
    double share_p95;
};

struct FdpConfig {
    double null_band = 0.1; // |mu| <= null_band counts as a false discovery
    double bin_width = 0.5;
    double mu_max = 8.0;
    bool exclude_zero_discovery_sims = false;
    unsigned n_threads = 0;
};

struct FdpSimResult {
    double mean_fdp = 0.0;
    double fdp_p05 = 0.0;
    double fdp_p95 = 0.0;
    double mean_discoveries = 0.0;
    std::size_t n_sims = 0;
    std::size_t zero_discovery_sims = 0;
    std::vector<double> fdp_per_sim;
    std::vector<FdpBin> bins;
};

// Monte Carlo of the false discovery proportion at a fixed t-hurdle:
// each simulation draws n_strat pairs (mu ~ prior, t = mu + noise), discovers
// |t| > hurdle, and histograms |mu| among discoveries. Zero-discovery sims
// contribute FDP = 0 unless excluded by config.
FdpSimResult fdp_simulate(const FamilyParams& params, int n_strat, double hurdle, int n_sims,
                          std::uint64_t seed, const FdpConfig& cfg = {});

std::string fdp_result_to_json(const FdpSimResult& r);
void save_fdp_bins(const FdpSimResult& r, const std::string& path);

// Numerical-integration oracle for the posterior mean/variance of mu given t.
// Adaptive Simpson quadrature per mixture component; point-mass components
// are added in closed form. Not used by any production path.
double oracle_posterior_mean(double t, const FamilyParams& p, double tol = 1e-11);
double oracle_posterior_var(double t, const FamilyParams& p, double tol = 1e-11);

enum class Prop1Mode { true_params, fitted };

struct Prop1Config {
    double top_pct = 0.01;
    int n_reps = 50;
    Prop1Mode mode = Prop1Mode::true_params;
    std::uint64_t seed = 0;
    FitConfig fit; // fitted mode only
    // the equivalence claim needs constant SE and a symmetric single-family
    // prior; set true to run anyway (to demonstrate the violation)
    bool allow_condition_violation = false;
};

struct Prop1Result {
    std::vector<double> overlaps; // per-rep Jaccard of EB vs naive selections
    double mean_overlap = 0.0;
    double min_overlap = 0.0;
};

// Selection-equivalence harness: generates panels from a single-family spec,
// selects top strategies by EB predicted Sharpe and by in-sample Sharpe, and
// reports the overlap. Under the equivalence conditions (constant SE, equal
// observation counts, zero-centered prior) the overlap is exactly 1 when the
// true parameters are used.
Prop1Result prop1_harness(const GeneratorSpec& spec, const Prop1Config& cfg);

} // namespace ebmine
