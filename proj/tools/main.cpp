#include <exception>
#include <iostream>

#include "CLI11.hpp"

#include "commands.hpp"
#include "ebmine/manifest.hpp"

namespace {

using namespace ebmine::cli;

int dispatch(CLI::App& app, int argc, char** argv) {
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // config error
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Strategy mining toolkit: simulation, mixture-prior fitting, "
                 "shrinkage prediction, multiple-testing hurdles, backtesting"};
    app.set_version_flag("--version", ebmine::kToolVersion);
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic strategy panel");
    auto sim_o = std::make_shared<SimulateOpts>();
    sim->add_option("--spec", sim_o->spec_path, "Generator spec JSON")->required();
    sim->add_option("--out-panel", sim_o->out_panel, "Output panel CSV")->required();
    sim->add_option("--out-truth", sim_o->out_truth, "Output truth CSV")->required();
    sim->add_option("--seed", sim_o->seed, "Override the spec's seed");
    sim->callback([sim_o] { run_simulate(*sim_o); });

    auto* sig = app.add_subcommand("signals", "Build strategy returns from stock data");
    auto sig_o = std::make_shared<SignalsOpts>();
    sig->add_option("--stocks", sig_o->stocks_path, "Stock panel CSV")->required();
    sig->add_option("--families", sig_o->families, "pastret, ticker, acct (default: all)")
        ->delimiter(',');
    sig->add_option("--weightings", sig_o->weightings, "ew, vw (default: both)")->delimiter(',');
    sig->add_option("--acct-vars", sig_o->acct_vars, "Accounting variable names")->delimiter(',');
    sig->add_option("--acct-denoms", sig_o->acct_denoms, "Accounting denominators")
        ->delimiter(',');
    sig->add_option("--out-panel", sig_o->out_panel, "Output panel CSV")->required();
    sig->add_option("--out-defs", sig_o->out_defs, "Optional JSONL dump of definitions");
    sig->add_option("--n-deciles", sig_o->n_deciles, "Sort groups for decile strategies");
    sig->add_option("--max-per-family", sig_o->max_per_family,
                    "Cap definitions per family (0: all)");
    sig->callback([sig_o] { run_signals(*sig_o); });

    auto* sum = app.add_subcommand("summarize", "Per-strategy stats over a window");
    auto sum_o = std::make_shared<SummarizeOpts>();
    sum->add_option("--panel", sum_o->panel_path, "Panel CSV")->required();
    sum->add_option("--out", sum_o->out_stats, "Output stats CSV")->required();
    sum->add_option("--hist", sum_o->out_hist, "Optional t-stat histogram CSV");
    sum->add_option("--hist-width", sum_o->hist_width, "Histogram bin width");
    sum->add_option("--window-end", sum_o->window_end, "Window end month YYYY-MM");
    sum->add_option("--window-months", sum_o->window_months, "Window length in months");
    sum->add_option("--min-obs", sum_o->min_obs, "Minimum observations per strategy");
    sum->add_flag("--allow-custom-families", sum_o->allow_custom_families,
                  "Accept family labels outside the canonical six");
    sum->callback([sum_o] { run_summarize(*sum_o); });

    auto* fit = app.add_subcommand("fit", "Fit mixture priors per family");
    auto fit_o = std::make_shared<FitOpts>();
    fit->add_option("--stats", fit_o->stats_path, "Stats CSV from summarize")->required();
    fit->add_option("--out", fit_o->out_model, "Output model JSON")->required();
    fit->add_option("--report", fit_o->out_report, "Optional per-start diagnostics CSV");
    fit->add_option("--seed", fit_o->seed, "Fit seed");
    fit->add_option("--starts", fit_o->n_starts, "Optimizer starts");
    fit->add_option("--max-evals", fit_o->max_evals, "Evaluations per start");
    fit->add_option("--min-tstats", fit_o->min_tstats, "Observation floor per family");
    fit->add_option("--tol", fit_o->tol, "Convergence tolerance");
    fit->add_option("--threads", fit_o->n_threads, "Worker threads (0: default)");
    fit->callback([fit_o] { run_fit(*fit_o); });

    auto* pre = app.add_subcommand("predict", "Posterior predictions per strategy");
    auto pre_o = std::make_shared<PredictOpts>();
    pre->add_option("--stats", pre_o->stats_path, "Stats CSV")->required();
    pre->add_option("--model", pre_o->model_path, "Model JSON")->required();
    pre->add_option("--out", pre_o->out_csv, "Output predictions CSV")->required();
    pre->callback([pre_o] { run_predict(*pre_o); });

    auto* bt = app.add_subcommand("backtest", "Annual walk-forward selection backtest");
    auto bt_o = std::make_shared<BacktestOpts>();
    bt->add_option("--panel", bt_o->panel_path, "Panel CSV")->required();
    bt->add_option("--model", bt_o->model_path,
                   "Model JSON reused for every year (default: fit per year)");
    bt->add_option("--out", bt_o->out_monthly, "Output monthly returns CSV")->required();
    bt->add_option("--out-cumulative", bt_o->out_cumulative, "Optional cumulative value CSV");
    bt->add_option("--out-selections", bt_o->out_selections, "Optional selections CSV");
    bt->add_option("--out-summary", bt_o->out_summary, "Optional summary JSON");
    bt->add_option("--rule", bt_o->rule, "Selection rule: eb or naive");
    bt->add_option("--top-pct", bt_o->top_pct, "Selected share of strategies");
    bt->add_option("--window-months", bt_o->window_months, "Selection window length");
    bt->add_option("--min-obs", bt_o->min_obs, "Minimum observations per strategy");
    bt->add_option("--first-year", bt_o->first_year, "First forecast year (0: derived)");
    bt->add_option("--last-year", bt_o->last_year, "Last forecast year (0: derived)");
    bt->add_option("--families", bt_o->families, "Family filter")->delimiter(',');
    bt->add_flag("--allow-custom-families", bt_o->allow_custom_families,
                 "Accept family labels outside the canonical six");
    bt->add_option("--fit-seed", bt_o->fit_seed, "Per-year fit seed");
    bt->add_option("--fit-starts", bt_o->fit_starts, "Optimizer starts per fit");
    bt->add_option("--threads", bt_o->n_threads, "Worker threads (0: default)");
    bt->callback([bt_o] { run_backtest_cmd(*bt_o); });

    auto* sa = app.add_subcommand("sort-accuracy", "Group-level prediction accuracy");
    auto sa_o = std::make_shared<SortAccuracyOpts>();
    sa->add_option("--panel", sa_o->panel_path, "Panel CSV")->required();
    sa->add_option("--model", sa_o->model_path,
                   "Model JSON reused for every year (default: fit per year)");
    sa->add_option("--out", sa_o->out_csv, "Output CSV")->required();
    sa->add_option("--families", sa_o->families, "Families (default: all in panel)")
        ->delimiter(',');
    sa->add_option("--n-groups", sa_o->n_groups, "Sort groups per family");
    sa->add_option("--split-year", sa_o->split_year, "Era split year (0: single era)");
    sa->add_option("--window-months", sa_o->window_months, "Selection window length");
    sa->add_option("--min-obs", sa_o->min_obs, "Minimum observations per strategy");
    sa->add_option("--first-year", sa_o->first_year, "First forecast year (0: derived)");
    sa->add_option("--last-year", sa_o->last_year, "Last forecast year (0: derived)");
    sa->add_flag("--allow-custom-families", sa_o->allow_custom_families,
                 "Accept family labels outside the canonical six");
    sa->add_option("--fit-seed", sa_o->fit_seed, "Per-year fit seed");
    sa->add_option("--fit-starts", sa_o->fit_starts, "Optimizer starts per fit");
    sa->add_option("--threads", sa_o->n_threads, "Worker threads (0: default)");
    sa->callback([sa_o] { run_sort_accuracy(*sa_o); });

    auto* fdr = app.add_subcommand("fdr", "Multiple-testing hurdles on a panel");
    auto fdr_o = std::make_shared<FdrOpts>();
    fdr->add_option("--panel", fdr_o->panel_path, "Panel CSV")->required();
    fdr->add_option("--out", fdr_o->out_json, "Output hurdles JSON")->required();
    fdr->add_option("--method", fdr_o->methods, "by13, storey, rw (default: all)")
        ->delimiter(',');
    fdr->add_option("--q", fdr_o->q_star, "FDR level q*");
    fdr->add_option("--p", fdr_o->p_star, "FDP exceedance level p* (rw)");
    fdr->add_option("--storey-cutoff", fdr_o->storey_cutoff, "Null-share cutoff (storey)");
    fdr->add_option("--n-boot", fdr_o->n_boot, "Bootstrap replications (rw)");
    fdr->add_option("--seed", fdr_o->seed, "Bootstrap seed (rw)");
    fdr->add_option("--window-end", fdr_o->window_end, "Window end month YYYY-MM");
    fdr->add_option("--window-months", fdr_o->window_months, "Window length in months");
    fdr->add_option("--min-obs", fdr_o->min_obs, "Minimum observations per strategy");
    fdr->add_flag("--allow-custom-families", fdr_o->allow_custom_families,
                  "Accept family labels outside the canonical six");
    fdr->add_option("--oos-panel", fdr_o->oos_panel_path,
                    "Out-of-sample panel for hurdle capture evaluation");
    fdr->add_option("--bins-out", fdr_o->out_bins, "Per-bin OOS returns CSV");
    fdr->add_option("--n-bins", fdr_o->n_bins, "Bins per family for evaluation");
    fdr->add_option("--high-threshold", fdr_o->high_threshold,
                    "Annualized |OOS return| defining a high bin");
    fdr->add_option("--threads", fdr_o->n_threads, "Worker threads (0: default)");
    fdr->callback([fdr_o] { run_fdr(*fdr_o); });

    auto* fdp = app.add_subcommand("fdp-sim", "Monte Carlo FDP at a fixed hurdle");
    auto fdp_o = std::make_shared<FdpSimOpts>();
    fdp->add_option("--model", fdp_o->model_path, "Model JSON supplying the prior");
    fdp->add_option("--family", fdp_o->family, "Family to take from the model");
    fdp->add_option("--theta1", fdp_o->theta1, "Prior component 1 mean");
    fdp->add_option("--sigma1", fdp_o->sigma1, "Prior component 1 sd");
    fdp->add_option("--theta2", fdp_o->theta2, "Prior component 2 mean");
    fdp->add_option("--sigma2", fdp_o->sigma2, "Prior component 2 sd");
    fdp->add_option("--lambda", fdp_o->lambda, "Prior component 1 weight");
    fdp->add_option("--n-strategies", fdp_o->n_strategies, "Strategies per simulation");
    fdp->add_option("--hurdle", fdp_o->hurdle, "|t| discovery hurdle");
    fdp->add_option("--n-sims", fdp_o->n_sims, "Simulations");
    fdp->add_option("--seed", fdp_o->seed, "Simulation seed");
    fdp->add_option("--null-band", fdp_o->null_band, "|mu| band counted as false discovery");
    fdp->add_option("--bin-width", fdp_o->bin_width, "|mu| histogram bin width");
    fdp->add_option("--mu-max", fdp_o->mu_max, "|mu| histogram upper edge");
    fdp->add_flag("--exclude-zero-discovery", fdp_o->exclude_zero_discovery,
                  "Drop simulations with no discoveries");
    fdp->add_option("--out", fdp_o->out_json, "Output JSON")->required();
    fdp->add_option("--bins-out", fdp_o->out_bins, "Optional per-bin CSV");
    fdp->add_option("--threads", fdp_o->n_threads, "Worker threads (0: default)");
    fdp->callback([fdp_o] { run_fdp_sim(*fdp_o); });

    auto* p1 = app.add_subcommand("prop1", "Selection-equivalence harness");
    auto p1_o = std::make_shared<Prop1Opts>();
    p1->add_option("--spec", p1_o->spec_path, "Single-family generator spec JSON")->required();
    p1->add_option("--out", p1_o->out_json, "Output JSON")->required();
    p1->add_option("--mode", p1_o->mode, "true or fitted");
    p1->add_option("--top-pct", p1_o->top_pct, "Selected share of strategies");
    p1->add_option("--reps", p1_o->n_reps, "Replications");
    p1->add_option("--seed", p1_o->seed, "Harness seed");
    p1->add_flag("--allow-condition-violation", p1_o->allow_condition_violation,
                 "Run even when the equivalence conditions fail");
    p1->add_option("--fit-starts", p1_o->fit_starts, "Optimizer starts (fitted mode)");
    p1->add_option("--min-tstats", p1_o->min_tstats, "Fit observation floor (fitted mode)");
    p1->callback([p1_o] { run_prop1(*p1_o); });

    return dispatch(app, argc, argv);
}
