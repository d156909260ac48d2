#include "ebmine/select.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "ebmine/csv.hpp"
#include "ebmine/mathutil.hpp"

namespace ebmine {

namespace {

struct RankedStrategy {
    const StrategyStats* stats;
    double metric;
    int sign;
};

std::vector<StrategyStats> window_stats(const ReturnsPanel& panel, int forecast_year,
                                        const BacktestConfig& cfg) {
    Month window_end = make_month(forecast_year, 12);
    ReturnsPanel w = window(panel, window_end, cfg.window_months);
    std::vector<StrategyStats> stats = summarize(w, cfg.min_obs);
    if (!cfg.families.empty()) {
        std::erase_if(stats, [&](const StrategyStats& s) {
            return std::find(cfg.families.begin(), cfg.families.end(), s.family) ==
                   cfg.families.end();
        });
    }
    return stats;
}

std::vector<SelectedStrategy> select_top(const std::vector<StrategyStats>& stats,
                                         const std::map<int, ModelSpec>& models,
                                         int forecast_year, SelectionRule rule, double top_pct) {
    std::vector<RankedStrategy> ranked;
    ranked.reserve(stats.size());
    if (rule == SelectionRule::eb) {
        auto mit = models.find(forecast_year);
        if (mit == models.end())
            throw std::runtime_error("no model for forecast year " +
                                     std::to_string(forecast_year));
        for (const auto& s : stats) {
            Prediction pr = predict_one(s, mit->second.require(s.family));
            ranked.push_back({&s, pr.pred_sharpe_ann, pr.sign});
        }
    } else {
        for (const auto& s : stats) {
            double sharpe = std::fabs(s.tstat) / std::sqrt(static_cast<double>(s.n_obs)) *
                            std::sqrt(kMonthsPerYear);
            ranked.push_back({&s, sharpe, s.mean_ret < 0.0 ? -1 : 1});
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedStrategy& a, const RankedStrategy& b) {
        if (a.metric != b.metric) return a.metric > b.metric;
        return a.stats->strategy_id < b.stats->strategy_id;
    });
    std::size_t k = static_cast<std::size_t>(
        std::ceil(top_pct * static_cast<double>(ranked.size())));
    if (k > ranked.size()) k = ranked.size();
    std::vector<SelectedStrategy> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        out.push_back({ranked[i].stats->strategy_id, ranked[i].sign});
    return out;
}

struct YearRange {
    int first;
    int last;
};

YearRange forecast_years(const ReturnsPanel& panel, int first_cfg, int last_cfg,
                         int window_months) {
    auto lo = panel.min_month();
    auto hi = panel.max_month();
    if (!lo || !hi) throw std::invalid_argument("backtest on an empty panel");
    // earliest December whose window fits inside the panel
    int first = first_cfg;
    if (first == 0) {
        Month need = *lo + window_months - 1;
        first = month_year(need);
        if (make_month(first, 12) < need) ++first;
    }
    int last = last_cfg;
    if (last == 0) last = month_year(*hi) - 1; // needs holding months in y+1
    if (first > last)
        throw std::invalid_argument("no feasible forecast years (panel too short)");
    return {first, last};
}

} // namespace

std::pair<int, int> resolve_forecast_years(const ReturnsPanel& panel, const BacktestConfig& cfg) {
    YearRange yr = forecast_years(panel, cfg.first_forecast_year, cfg.last_forecast_year,
                                  cfg.window_months);
    return {yr.first, yr.last};
}

std::map<int, ModelSpec> fit_yearly_models(const ReturnsPanel& panel, const BacktestConfig& cfg,
                                           const FitConfig& fit) {
    auto [first, last] = resolve_forecast_years(panel, cfg);
    std::map<int, ModelSpec> models;
    for (int y = first; y <= last; ++y) {
        FitConfig fc = fit;
        fc.seed = RngStream(fit.seed, "fit-year", static_cast<std::uint64_t>(y)).next_u64();
        models[y] = fit_all(window_stats(panel, y, cfg), fc).model;
    }
    return models;
}

SelectionRule parse_rule(const std::string& name) {
    if (name == "eb") return SelectionRule::eb;
    if (name == "naive") return SelectionRule::naive;
    throw std::invalid_argument("unknown selection rule '" + name + "'");
}

std::string rule_name(SelectionRule r) { return r == SelectionRule::eb ? "eb" : "naive"; }

BacktestResult run_backtest(const ReturnsPanel& panel, const std::map<int, ModelSpec>& models,
                            const BacktestConfig& cfg) {
    if (!(cfg.top_pct > 0.0 && cfg.top_pct <= 1.0))
        throw std::invalid_argument("top_pct must be in (0, 1]");
    YearRange yr = forecast_years(panel, cfg.first_forecast_year, cfg.last_forecast_year,
                                  cfg.window_months);

    BacktestResult res;
    for (int y = yr.first; y <= yr.last; ++y) {
        std::vector<StrategyStats> stats = window_stats(panel, y, cfg);
        YearSelection sel;
        sel.forecast_year = y;
        sel.n_candidates = stats.size();
        if (stats.empty()) {
            ++res.skipped_years;
            res.selections.push_back(std::move(sel));
            continue;
        }
        sel.selected = select_top(stats, models, y, cfg.rule, cfg.top_pct);

        for (int m = 1; m <= 12; ++m) {
            Month hold = make_month(y + 1, m);
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& pick : sel.selected) {
                const StrategySeries* s = panel.find(pick.strategy_id);
                if (!s) continue;
                auto it = std::lower_bound(
                    s->obs.begin(), s->obs.end(), hold,
                    [](const Observation& o, Month mm) { return o.month < mm; });
                if (it != s->obs.end() && it->month == hold) {
                    sum += pick.sign * it->ret;
                    ++n;
                }
            }
            if (n == 0) {
                ++res.skipped_months;
                continue;
            }
            res.months.push_back({hold, sum / static_cast<double>(n)});
        }
        res.selections.push_back(std::move(sel));
    }

    std::vector<double> rets;
    rets.reserve(res.months.size());
    for (const auto& m : res.months) rets.push_back(m.ret);
    MeanVar mv = mean_var(rets);
    if (mv.n > 0) {
        res.mean_ret_ann = mv.mean * kMonthsPerYear;
        res.sd_monthly = std::sqrt(mv.var);
        if (mv.n > 1 && mv.var > 0.0) {
            res.tstat = mv.mean / (res.sd_monthly / std::sqrt(static_cast<double>(mv.n)));
            res.sharpe_ann = mv.mean / res.sd_monthly * std::sqrt(kMonthsPerYear);
        }
    }
    if (!res.months.empty()) {
        res.cumulative.reserve(res.months.size() + 1);
        res.cumulative.emplace_back(res.months.front().month - 1, 1.0);
        double v = 1.0;
        for (const auto& m : res.months) {
            v *= 1.0 + m.ret;
            res.cumulative.emplace_back(m.month, v);
        }
    }
    return res;
}

std::vector<OverlapRow> selection_overlap(const ReturnsPanel& panel,
                                          const std::map<int, ModelSpec>& models,
                                          const BacktestConfig& cfg) {
    YearRange yr = forecast_years(panel, cfg.first_forecast_year, cfg.last_forecast_year,
                                  cfg.window_months);
    std::vector<OverlapRow> out;
    for (int y = yr.first; y <= yr.last; ++y) {
        std::vector<StrategyStats> stats = window_stats(panel, y, cfg);
        if (stats.empty()) continue;
        auto eb = select_top(stats, models, y, SelectionRule::eb, cfg.top_pct);
        auto naive = select_top(stats, models, y, SelectionRule::naive, cfg.top_pct);
        std::set<std::string> se, sn;
        for (const auto& s : eb) se.insert(s.strategy_id);
        for (const auto& s : naive) sn.insert(s.strategy_id);
        std::size_t inter = 0;
        for (const auto& id : se) inter += sn.count(id);
        std::size_t uni = se.size() + sn.size() - inter;
        OverlapRow row;
        row.forecast_year = y;
        row.n_eb = se.size();
        row.n_naive = sn.size();
        row.n_intersection = inter;
        row.n_union = uni;
        row.jaccard = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
        out.push_back(row);
    }
    return out;
}

std::vector<SortAccuracyRow> sort_accuracy(const ReturnsPanel& panel,
                                           const std::map<int, ModelSpec>& models,
                                           const std::string& family,
                                           const SortAccuracyConfig& cfg) {
    if (cfg.n_groups < 2) throw std::invalid_argument("n_groups must be at least 2");
    BacktestConfig bt;
    bt.window_months = cfg.window_months;
    bt.min_obs = cfg.min_obs;
    bt.families = {family};
    YearRange yr = forecast_years(panel, cfg.first_forecast_year, cfg.last_forecast_year,
                                  cfg.window_months);

    struct GroupAccum {
        std::size_t n_years = 0;
        double insample_t = 0.0;
        double insample_mean = 0.0;
        double predicted_mean = 0.0;
        std::vector<double> oos_months;
    };
    // era -> group -> accumulator
    std::map<std::string, std::vector<GroupAccum>> eras;

    for (int y = yr.first; y <= yr.last; ++y) {
        std::vector<StrategyStats> stats = window_stats(panel, y, bt);
        if (stats.size() < static_cast<std::size_t>(cfg.n_groups)) continue;
        auto mit = models.find(y);
        if (mit == models.end())
            throw std::runtime_error("no model for forecast year " + std::to_string(y));
        const FamilyParams& params = mit->second.require(family);

        std::sort(stats.begin(), stats.end(), [](const StrategyStats& a, const StrategyStats& b) {
            if (a.mean_ret != b.mean_ret) return a.mean_ret < b.mean_ret;
            return a.strategy_id < b.strategy_id;
        });

        std::string era = "all";
        if (cfg.split_year != 0) era = y <= cfg.split_year ? "era1" : "era2";
        auto& groups = eras[era];
        if (groups.empty()) groups.resize(cfg.n_groups);

        const std::size_t n = stats.size();
        for (int g = 0; g < cfg.n_groups; ++g) {
            std::size_t lo = n * static_cast<std::size_t>(g) / cfg.n_groups;
            std::size_t hi = n * static_cast<std::size_t>(g + 1) / cfg.n_groups;
            if (hi <= lo) continue;
            GroupAccum& acc = groups[g];
            double t_sum = 0.0, mean_sum = 0.0, pred_sum = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                const StrategyStats& s = stats[i];
                t_sum += s.tstat;
                mean_sum += s.mean_ret * kMonthsPerYear;
                pred_sum += posterior_mean_t(s.tstat, params) * s.se * kMonthsPerYear;
            }
            double count = static_cast<double>(hi - lo);
            acc.insample_t += t_sum / count;
            acc.insample_mean += mean_sum / count;
            acc.predicted_mean += pred_sum / count;
            ++acc.n_years;

            for (int m = 1; m <= 12; ++m) {
                Month hold = make_month(y + 1, m);
                double sum = 0.0;
                std::size_t cnt = 0;
                for (std::size_t i = lo; i < hi; ++i) {
                    const StrategySeries* s = panel.find(stats[i].strategy_id);
                    if (!s) continue;
                    auto it = std::lower_bound(
                        s->obs.begin(), s->obs.end(), hold,
                        [](const Observation& o, Month mm) { return o.month < mm; });
                    if (it != s->obs.end() && it->month == hold) {
                        sum += it->ret;
                        ++cnt;
                    }
                }
                if (cnt > 0) acc.oos_months.push_back(sum / static_cast<double>(cnt));
            }
        }
    }

    std::vector<SortAccuracyRow> out;
    for (auto& [era, groups] : eras) {
        for (int g = 0; g < cfg.n_groups; ++g) {
            const GroupAccum& acc = groups[g];
            if (acc.n_years == 0) continue; // group never populated, dropped
            SortAccuracyRow row;
            row.family = family;
            row.era = era;
            row.group = g;
            row.n_years = acc.n_years;
            row.n_months = acc.oos_months.size();
            double ny = static_cast<double>(acc.n_years);
            row.insample_t_mid = acc.insample_t / ny;
            row.insample_mean_ann = acc.insample_mean / ny;
            row.predicted_mean_ann = acc.predicted_mean / ny;
            MeanVar mv = mean_var(acc.oos_months);
            row.oos_mean_ann = mv.mean * kMonthsPerYear;
            row.oos_se_ann = mv.n > 1 ? std::sqrt(mv.var / static_cast<double>(mv.n)) *
                                            kMonthsPerYear
                                      : 0.0;
            out.push_back(std::move(row));
        }
    }
    return out;
}

void save_sort_accuracy(const std::vector<SortAccuracyRow>& rows, const std::string& path) {
    CsvWriter w(path, {"family", "era", "group", "n_years", "n_months", "insample_t_mid",
                       "insample_mean_ann", "predicted_mean_ann", "oos_mean_ann", "oos_se_ann"});
    for (const auto& r : rows) {
        w.write_row({r.family, r.era, std::to_string(r.group), std::to_string(r.n_years),
                     std::to_string(r.n_months), format_double(r.insample_t_mid),
                     format_double(r.insample_mean_ann), format_double(r.predicted_mean_ann),
                     format_double(r.oos_mean_ann), format_double(r.oos_se_ann)});
    }
    w.close();
}

} // namespace ebmine
