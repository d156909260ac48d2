#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ebmine/csv.hpp"
#include "ebmine/ebpredict.hpp"
#include "ebmine/fdr.hpp"
#include "ebmine/manifest.hpp"
#include "ebmine/panel.hpp"
#include "ebmine/prior.hpp"
#include "ebmine/qmlfit.hpp"
#include "ebmine/select.hpp"
#include "ebmine/signals.hpp"
#include "ebmine/simgen.hpp"

namespace ebmine::cli {

namespace {

using nlohmann::ordered_json;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
}

Month parse_month_flag(const std::string& text, const char* flag) {
    try {
        return parse_month(text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string(flag) + ": " + e.what());
    }
}

ReturnsPanel load_panel_checked(const std::string& path, bool allow_custom) {
    PanelSchema schema;
    schema.allow_custom_families = allow_custom;
    return load_panel(path, schema);
}

ReturnsPanel apply_window(ReturnsPanel panel, const std::string& end_text, int window_months,
                          const char* cmd) {
    if (end_text.empty() != (window_months == 0))
        throw std::invalid_argument(std::string(cmd) +
                                    ": --window-end and --window-months go together");
    if (end_text.empty()) return panel;
    if (window_months < 1) throw std::invalid_argument("--window-months must be positive");
    return window(panel, parse_month_flag(end_text, "--window-end"), window_months);
}

void save_monthly(const std::vector<MonthlyReturn>& months, const std::string& path) {
    CsvWriter w(path, {"month", "ret"});
    for (const auto& m : months) w.write_row({format_month(m.month), format_double(m.ret)});
    w.close();
}

void save_cumulative(const std::vector<std::pair<Month, double>>& cum, const std::string& path) {
    CsvWriter w(path, {"month", "value"});
    for (const auto& [m, v] : cum) w.write_row({format_month(m), format_double(v)});
    w.close();
}

void save_selections(const std::vector<YearSelection>& sels, const std::string& path) {
    CsvWriter w(path, {"forecast_year", "strategy_id", "sign"});
    for (const auto& ys : sels)
        for (const auto& s : ys.selected)
            w.write_row({std::to_string(ys.forecast_year), s.strategy_id,
                         std::to_string(s.sign)});
    w.close();
}

} // namespace

int run_simulate(const SimulateOpts& o) {
    GeneratorSpec spec = load_generator_spec(o.spec_path);
    if (o.seed >= 0) spec.seed = static_cast<std::uint64_t>(o.seed);
    GeneratedPanel gp = generate_panel(spec);
    save_panel(gp.panel, o.out_panel);
    save_truth(gp.truth, o.out_truth);

    ordered_json cfg;
    cfg["spec"] = ordered_json::parse(generator_spec_to_json(spec));
    Manifest m{"simulate", cfg.dump(), {o.spec_path}, {o.out_panel, o.out_truth}};
    write_manifest(m, o.out_panel);
    return 0;
}

int run_signals(const SignalsOpts& o) {
    StockPanel stocks = load_stock_panel(o.stocks_path);

    std::vector<std::string> weightings = o.weightings;
    if (weightings.empty()) weightings = {"ew", "vw"};
    for (const auto& w : weightings)
        if (w != "ew" && w != "vw")
            throw std::invalid_argument("unknown weighting '" + w + "' (want ew or vw)");

    std::vector<std::string> families = o.families;
    if (families.empty()) families = {"pastret", "ticker", "acct"};

    ReturnsPanel panel;
    std::vector<SignalDef> all_defs;
    for (const auto& fam : families) {
        std::vector<SignalDef> defs;
        if (fam == "pastret") {
            defs = enumerate_pastret_signals();
        } else if (fam == "ticker") {
            defs = enumerate_ticker_signals();
        } else if (fam == "acct") {
            if (o.acct_vars.empty())
                throw std::invalid_argument("acct family needs --acct-vars and --acct-denoms");
            defs = enumerate_acct_signals(o.acct_vars, o.acct_denoms);
        } else {
            throw std::invalid_argument("unknown family '" + fam +
                                        "' (want pastret, ticker, or acct)");
        }
        if (o.max_per_family > 0 && defs.size() > o.max_per_family)
            defs.resize(o.max_per_family);
        for (const auto& def : defs) {
            for (const auto& w : weightings) {
                Weighting wt = w == "ew" ? Weighting::ew : Weighting::vw;
                std::vector<Observation> obs =
                    build_strategy_returns(stocks, def, wt, o.n_deciles);
                std::string id = def.signal_id + "_" + w;
                std::string family_label = fam + "_" + w;
                for (const Observation& ob : obs)
                    panel.add(id, family_label, ob.month, ob.ret);
            }
        }
        all_defs.insert(all_defs.end(), defs.begin(), defs.end());
    }
    panel.finalize();
    save_panel(panel, o.out_panel);
    std::vector<std::string> outputs{o.out_panel};
    if (!o.out_defs.empty()) {
        save_signal_defs(all_defs, o.out_defs);
        outputs.push_back(o.out_defs);
    }

    ordered_json cfg;
    cfg["families"] = families;
    cfg["weightings"] = weightings;
    cfg["acct_vars"] = o.acct_vars;
    cfg["acct_denoms"] = o.acct_denoms;
    cfg["n_deciles"] = o.n_deciles;
    cfg["max_per_family"] = o.max_per_family;
    Manifest m{"signals", cfg.dump(), {o.stocks_path}, outputs};
    write_manifest(m, o.out_panel);
    return 0;
}

int run_summarize(const SummarizeOpts& o) {
    ReturnsPanel panel = load_panel_checked(o.panel_path, o.allow_custom_families);
    panel = apply_window(std::move(panel), o.window_end, o.window_months, "summarize");
    SummarizeDiagnostics diag;
    std::vector<StrategyStats> stats = summarize(panel, o.min_obs, &diag);
    save_stats(stats, o.out_stats);
    std::vector<std::string> outputs{o.out_stats};
    if (!o.out_hist.empty()) {
        save_histogram(tstat_histogram(stats, o.hist_width), o.out_hist);
        outputs.push_back(o.out_hist);
    }

    ordered_json cfg;
    cfg["window_end"] = o.window_end;
    cfg["window_months"] = o.window_months;
    cfg["min_obs"] = o.min_obs;
    cfg["hist_width"] = o.hist_width;
    cfg["allow_custom_families"] = o.allow_custom_families;
    cfg["n_strategies"] = stats.size();
    cfg["dropped_min_obs"] = diag.dropped_min_obs;
    cfg["dropped_zero_sd"] = diag.dropped_zero_sd;
    Manifest m{"summarize", cfg.dump(), {o.panel_path}, outputs};
    write_manifest(m, o.out_stats);
    return 0;
}

int run_fit(const FitOpts& o) {
    std::vector<StrategyStats> stats = load_stats(o.stats_path);
    FitConfig fc;
    fc.n_starts = o.n_starts;
    fc.max_evals = o.max_evals;
    fc.min_tstats = o.min_tstats;
    fc.tol = o.tol;
    fc.seed = o.seed;
    fc.n_threads = o.n_threads;
    FitReport report = fit_all(stats, fc);
    save_model_spec(report.model, o.out_model);

    std::vector<std::string> outputs{o.out_model};
    if (!o.out_report.empty()) {
        CsvWriter w(o.out_report,
                    {"family", "start_index", "winner", "theta1", "sigma1", "theta2", "sigma2",
                     "lambda", "loglik", "n_evals", "converged"});
        for (const auto& [family, fit] : report.fits) {
            for (const auto& s : fit.starts) {
                w.write_row({family, std::to_string(s.start_index),
                             s.start_index == fit.best_start ? "1" : "0",
                             format_double(s.final_params.theta1),
                             format_double(s.final_params.sigma1),
                             format_double(s.final_params.theta2),
                             format_double(s.final_params.sigma2),
                             format_double(s.final_params.lambda), format_double(s.loglik),
                             std::to_string(s.n_evals), s.converged ? "1" : "0"});
            }
        }
        w.close();
        outputs.push_back(o.out_report);
    }

    ordered_json cfg;
    cfg["seed"] = o.seed;
    cfg["n_starts"] = o.n_starts;
    cfg["max_evals"] = o.max_evals;
    cfg["min_tstats"] = o.min_tstats;
    cfg["tol"] = o.tol;
    Manifest m{"fit", cfg.dump(), {o.stats_path}, outputs};
    write_manifest(m, o.out_model);
    return 0;
}

int run_predict(const PredictOpts& o) {
    std::vector<StrategyStats> stats = load_stats(o.stats_path);
    ModelSpec model = load_model_spec(o.model_path);
    save_predictions(predict(stats, model), o.out_csv);

    Manifest m{"predict", ordered_json::object().dump(), {o.stats_path, o.model_path}, {o.out_csv}};
    write_manifest(m, o.out_csv);
    return 0;
}

namespace {

BacktestConfig backtest_config(const BacktestOpts& o) {
    BacktestConfig bc;
    bc.first_forecast_year = o.first_year;
    bc.last_forecast_year = o.last_year;
    bc.window_months = o.window_months;
    bc.min_obs = o.min_obs;
    bc.top_pct = o.top_pct;
    bc.rule = parse_rule(o.rule);
    bc.families = o.families;
    return bc;
}

std::map<int, ModelSpec> resolve_models(const ReturnsPanel& panel, const BacktestConfig& bc,
                                        const std::string& model_path, std::uint64_t fit_seed,
                                        int fit_starts, unsigned n_threads) {
    std::map<int, ModelSpec> models;
    if (!model_path.empty()) {
        ModelSpec spec = load_model_spec(model_path);
        auto [first, last] = resolve_forecast_years(panel, bc);
        for (int y = first; y <= last; ++y) models[y] = spec;
    } else {
        FitConfig fc;
        fc.seed = fit_seed;
        fc.n_starts = fit_starts;
        fc.n_threads = n_threads;
        models = fit_yearly_models(panel, bc, fc);
    }
    return models;
}

} // namespace

int run_backtest_cmd(const BacktestOpts& o) {
    ReturnsPanel panel = load_panel_checked(o.panel_path, o.allow_custom_families);
    BacktestConfig bc = backtest_config(o);
    std::map<int, ModelSpec> models;
    if (bc.rule == SelectionRule::eb)
        models = resolve_models(panel, bc, o.model_path, o.fit_seed, o.fit_starts, o.n_threads);
    BacktestResult res = run_backtest(panel, models, bc);

    save_monthly(res.months, o.out_monthly);
    std::vector<std::string> outputs{o.out_monthly};
    if (!o.out_cumulative.empty()) {
        save_cumulative(res.cumulative, o.out_cumulative);
        outputs.push_back(o.out_cumulative);
    }
    if (!o.out_selections.empty()) {
        save_selections(res.selections, o.out_selections);
        outputs.push_back(o.out_selections);
    }
    if (!o.out_summary.empty()) {
        ordered_json sj;
        sj["n_months"] = res.months.size();
        sj["mean_ret_ann"] = res.mean_ret_ann;
        sj["sd_monthly"] = res.sd_monthly;
        sj["tstat"] = res.tstat;
        sj["sharpe_ann"] = res.sharpe_ann;
        sj["skipped_months"] = res.skipped_months;
        sj["skipped_years"] = res.skipped_years;
        write_text(o.out_summary, sj.dump(2));
        outputs.push_back(o.out_summary);
    }

    ordered_json cfg;
    cfg["rule"] = o.rule;
    cfg["top_pct"] = o.top_pct;
    cfg["window_months"] = o.window_months;
    cfg["min_obs"] = o.min_obs;
    cfg["first_year"] = o.first_year;
    cfg["last_year"] = o.last_year;
    cfg["families"] = o.families;
    cfg["model"] = o.model_path;
    cfg["fit_seed"] = o.fit_seed;
    cfg["fit_starts"] = o.fit_starts;
    std::vector<std::string> inputs{o.panel_path};
    if (!o.model_path.empty()) inputs.push_back(o.model_path);
    Manifest m{"backtest", cfg.dump(), inputs, outputs};
    write_manifest(m, o.out_monthly);
    return 0;
}

int run_sort_accuracy(const SortAccuracyOpts& o) {
    ReturnsPanel panel = load_panel_checked(o.panel_path, o.allow_custom_families);
    BacktestConfig bc;
    bc.first_forecast_year = o.first_year;
    bc.last_forecast_year = o.last_year;
    bc.window_months = o.window_months;
    bc.min_obs = o.min_obs;
    std::map<int, ModelSpec> models =
        resolve_models(panel, bc, o.model_path, o.fit_seed, o.fit_starts, o.n_threads);

    std::vector<std::string> families = o.families;
    if (families.empty()) {
        std::set<std::string> seen;
        for (const auto& s : panel.strategies()) seen.insert(s.family);
        families.assign(seen.begin(), seen.end());
    }

    SortAccuracyConfig sc;
    sc.first_forecast_year = o.first_year;
    sc.last_forecast_year = o.last_year;
    sc.window_months = o.window_months;
    sc.min_obs = o.min_obs;
    sc.n_groups = o.n_groups;
    sc.split_year = o.split_year;

    std::vector<SortAccuracyRow> rows;
    for (const auto& fam : families) {
        std::vector<SortAccuracyRow> r = sort_accuracy(panel, models, fam, sc);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    save_sort_accuracy(rows, o.out_csv);

    ordered_json cfg;
    cfg["families"] = families;
    cfg["n_groups"] = o.n_groups;
    cfg["split_year"] = o.split_year;
    cfg["window_months"] = o.window_months;
    cfg["min_obs"] = o.min_obs;
    cfg["first_year"] = o.first_year;
    cfg["last_year"] = o.last_year;
    cfg["model"] = o.model_path;
    cfg["fit_seed"] = o.fit_seed;
    std::vector<std::string> inputs{o.panel_path};
    if (!o.model_path.empty()) inputs.push_back(o.model_path);
    Manifest m{"sort-accuracy", cfg.dump(), inputs, {o.out_csv}};
    write_manifest(m, o.out_csv);
    return 0;
}

int run_fdr(const FdrOpts& o) {
    std::vector<std::string> methods = o.methods;
    if (methods.empty()) methods = {"by13", "storey", "rw"};
    for (const auto& m : methods)
        if (m != "by13" && m != "storey" && m != "rw")
            throw std::invalid_argument("unknown method '" + m + "' (want by13, storey, or rw)");

    ReturnsPanel panel = load_panel_checked(o.panel_path, o.allow_custom_families);
    panel = apply_window(std::move(panel), o.window_end, o.window_months, "fdr");
    std::vector<StrategyStats> stats = summarize(panel, o.min_obs);
    std::vector<double> tstats;
    tstats.reserve(stats.size());
    for (const auto& s : stats) tstats.push_back(s.tstat);

    std::vector<HurdleResult> hurdles;
    for (const auto& method : methods) {
        if (method == "by13") {
            hurdles.push_back(hurdle_by13(tstats, o.q_star));
        } else if (method == "storey") {
            hurdles.push_back(hurdle_storey(tstats, o.q_star, o.storey_cutoff));
        } else {
            RwConfig rc;
            rc.p_star = o.p_star;
            rc.q_star = o.q_star;
            rc.n_boot = o.n_boot;
            rc.seed = o.seed;
            rc.min_obs = o.min_obs;
            rc.n_threads = o.n_threads;
            hurdles.push_back(hurdle_rw(panel, rc));
        }
    }

    std::vector<HurdleCaptureRow> captures;
    std::vector<std::string> inputs{o.panel_path};
    std::vector<std::string> outputs{o.out_json};
    if (!o.oos_panel_path.empty()) {
        ReturnsPanel oos = load_panel_checked(o.oos_panel_path, o.allow_custom_families);
        HurdleEvaluation ev = evaluate_hurdles(stats, oos, hurdles, o.n_bins, o.high_threshold);
        captures = std::move(ev.captures);
        inputs.push_back(o.oos_panel_path);
        if (!o.out_bins.empty()) {
            save_hurdle_bins(ev.bins, o.out_bins);
            outputs.push_back(o.out_bins);
        }
    }
    write_text(o.out_json, hurdles_to_json(hurdles, captures));

    ordered_json cfg;
    cfg["methods"] = methods;
    cfg["q_star"] = o.q_star;
    cfg["p_star"] = o.p_star;
    cfg["storey_cutoff"] = o.storey_cutoff;
    cfg["n_boot"] = o.n_boot;
    cfg["seed"] = o.seed;
    cfg["window_end"] = o.window_end;
    cfg["window_months"] = o.window_months;
    cfg["min_obs"] = o.min_obs;
    cfg["n_bins"] = o.n_bins;
    cfg["high_threshold"] = o.high_threshold;
    Manifest m{"fdr", cfg.dump(), inputs, outputs};
    write_manifest(m, o.out_json);
    return 0;
}

int run_fdp_sim(const FdpSimOpts& o) {
    FamilyParams params{o.theta1, o.sigma1, o.theta2, o.sigma2, o.lambda};
    std::vector<std::string> inputs;
    if (!o.model_path.empty()) {
        if (o.family.empty())
            throw std::invalid_argument("--model needs --family to pick the parameter set");
        params = load_model_spec(o.model_path).require(o.family);
        inputs.push_back(o.model_path);
    }
    FdpConfig fc;
    fc.null_band = o.null_band;
    fc.bin_width = o.bin_width;
    fc.mu_max = o.mu_max;
    fc.exclude_zero_discovery_sims = o.exclude_zero_discovery;
    fc.n_threads = o.n_threads;
    FdpSimResult res = fdp_simulate(params, o.n_strategies, o.hurdle, o.n_sims, o.seed, fc);

    write_text(o.out_json, fdp_result_to_json(res));
    std::vector<std::string> outputs{o.out_json};
    if (!o.out_bins.empty()) {
        save_fdp_bins(res, o.out_bins);
        outputs.push_back(o.out_bins);
    }

    ordered_json cfg;
    cfg["params"] = {{"theta1", params.theta1},
                     {"sigma1", params.sigma1},
                     {"theta2", params.theta2},
                     {"sigma2", params.sigma2},
                     {"lambda", params.lambda}};
    cfg["n_strategies"] = o.n_strategies;
    cfg["hurdle"] = o.hurdle;
    cfg["n_sims"] = o.n_sims;
    cfg["seed"] = o.seed;
    cfg["null_band"] = o.null_band;
    cfg["bin_width"] = o.bin_width;
    cfg["mu_max"] = o.mu_max;
    cfg["exclude_zero_discovery"] = o.exclude_zero_discovery;
    Manifest m{"fdp-sim", cfg.dump(), inputs, outputs};
    write_manifest(m, o.out_json);
    return 0;
}

int run_prop1(const Prop1Opts& o) {
    GeneratorSpec spec = load_generator_spec(o.spec_path);
    Prop1Config pc;
    pc.top_pct = o.top_pct;
    pc.n_reps = o.n_reps;
    pc.seed = o.seed;
    pc.allow_condition_violation = o.allow_condition_violation;
    if (o.mode == "true") {
        pc.mode = Prop1Mode::true_params;
    } else if (o.mode == "fitted") {
        pc.mode = Prop1Mode::fitted;
    } else {
        throw std::invalid_argument("unknown mode '" + o.mode + "' (want true or fitted)");
    }
    pc.fit.n_starts = o.fit_starts;
    pc.fit.min_tstats = o.min_tstats;
    Prop1Result res = prop1_harness(spec, pc);

    ordered_json rj;
    rj["mode"] = o.mode;
    rj["mean_overlap"] = res.mean_overlap;
    rj["min_overlap"] = res.min_overlap;
    rj["overlaps"] = res.overlaps;
    write_text(o.out_json, rj.dump(2));

    ordered_json cfg;
    cfg["mode"] = o.mode;
    cfg["top_pct"] = o.top_pct;
    cfg["n_reps"] = o.n_reps;
    cfg["seed"] = o.seed;
    cfg["allow_condition_violation"] = o.allow_condition_violation;
    cfg["fit_starts"] = o.fit_starts;
    cfg["min_tstats"] = o.min_tstats;
    Manifest m{"prop1", cfg.dump(), {o.spec_path}, {o.out_json}};
    write_manifest(m, o.out_json);
    return 0;
}

} // namespace ebmine::cli
