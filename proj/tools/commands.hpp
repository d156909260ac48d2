#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ebmine/panel.hpp"

namespace ebmine::cli {

struct SimulateOpts {
    std::string spec_path;
    std::string out_panel;
    std::string out_truth;
    std::int64_t seed = -1; // < 0: use the seed in the spec file
};
int run_simulate(const SimulateOpts& o);

struct SignalsOpts {
    std::string stocks_path;
    std::vector<std::string> families;   // pastret, ticker, acct
    std::vector<std::string> weightings; // ew, vw
    std::vector<std::string> acct_vars;
    std::vector<std::string> acct_denoms;
    std::string out_panel;
    std::string out_defs; // optional JSONL dump of the definitions built
    int n_deciles = 10;
    std::size_t max_per_family = 0; // 0: every definition
};
int run_signals(const SignalsOpts& o);

struct SummarizeOpts {
    std::string panel_path;
    std::string out_stats;
    std::string out_hist; // optional
    double hist_width = 0.1;
    std::string window_end; // optional YYYY-MM; requires window_months
    int window_months = 0;
    int min_obs = kDefaultMinObs;
    bool allow_custom_families = false;
};
int run_summarize(const SummarizeOpts& o);

struct FitOpts {
    std::string stats_path;
    std::string out_model;
    std::string out_report; // optional diagnostics JSON
    std::uint64_t seed = 0;
    int n_starts = 10;
    std::size_t max_evals = 5000;
    std::size_t min_tstats = 50;
    double tol = 1e-8;
    unsigned n_threads = 0;
};
int run_fit(const FitOpts& o);

struct PredictOpts {
    std::string stats_path;
    std::string model_path;
    std::string out_csv;
};
int run_predict(const PredictOpts& o);

struct BacktestOpts {
    std::string panel_path;
    std::string model_path; // empty: fit a model per forecast year
    std::string out_monthly;
    std::string out_cumulative; // optional
    std::string out_selections; // optional
    std::string out_summary;    // optional JSON
    std::string rule = "eb";
    double top_pct = 0.01;
    int window_months = 240;
    int min_obs = kDefaultMinObs;
    int first_year = 0;
    int last_year = 0;
    std::vector<std::string> families;
    bool allow_custom_families = false;
    std::uint64_t fit_seed = 0;
    int fit_starts = 10;
    unsigned n_threads = 0;
};
int run_backtest_cmd(const BacktestOpts& o);

struct SortAccuracyOpts {
    std::string panel_path;
    std::string model_path; // empty: fit per year
    std::string out_csv;
    std::vector<std::string> families; // empty: every family in the panel
    int n_groups = 20;
    int split_year = 0;
    int window_months = 240;
    int min_obs = kDefaultMinObs;
    int first_year = 0;
    int last_year = 0;
    bool allow_custom_families = false;
    std::uint64_t fit_seed = 0;
    int fit_starts = 10;
    unsigned n_threads = 0;
};
int run_sort_accuracy(const SortAccuracyOpts& o);

struct FdrOpts {
    std::string panel_path;
    std::string out_json;
    std::vector<std::string> methods; // by13, storey, rw; empty: all three
    double q_star = 0.05;
    double p_star = 0.05;
    double storey_cutoff = 1.0;
    int n_boot = 2000;
    std::uint64_t seed = 0;
    std::string window_end; // optional
    int window_months = 0;
    int min_obs = 2;
    bool allow_custom_families = false;
    std::string oos_panel_path; // optional: evaluate hurdle capture
    std::string out_bins;
    int n_bins = 20;
    double high_threshold = 0.03;
    unsigned n_threads = 0;
};
int run_fdr(const FdrOpts& o);

struct FdpSimOpts {
    std::string model_path; // with family: take params from a fitted model
    std::string family;
    double theta1 = 0.0, sigma1 = 0.0, theta2 = 0.0, sigma2 = 0.0, lambda = 1.0;
    int n_strategies = 29000;
    double hurdle = 3.0;
    int n_sims = 2000;
    std::uint64_t seed = 0;
    double null_band = 0.1;
    double bin_width = 0.5;
    double mu_max = 8.0;
    bool exclude_zero_discovery = false;
    std::string out_json;
    std::string out_bins; // optional
    unsigned n_threads = 0;
};
int run_fdp_sim(const FdpSimOpts& o);

struct Prop1Opts {
    std::string spec_path;
    std::string out_json;
    std::string mode = "true"; // true | fitted
    double top_pct = 0.01;
    int n_reps = 50;
    std::uint64_t seed = 0;
    bool allow_condition_violation = false;
    int fit_starts = 10;
    std::size_t min_tstats = 50;
};
int run_prop1(const Prop1Opts& o);

} // namespace ebmine::cli
