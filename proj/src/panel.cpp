#include "ebmine/panel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ebmine/csv.hpp"
#include "ebmine/family.hpp"
#include "ebmine/mathutil.hpp"

namespace ebmine {

namespace {

Month parse_month_at(const std::string& s, std::size_t line_no) {
    try {
        return parse_month(s);
    } catch (const std::exception& e) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
    }
}

} // namespace

Month parse_month(const std::string& text) {
    // YYYY-MM
    auto bad = [&] { throw std::invalid_argument("bad month '" + text + "', expected YYYY-MM"); };
    if (text.size() != 7 || text[4] != '-') bad();
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (i == 4) continue;
        if (text[i] < '0' || text[i] > '9') bad();
    }
    int year = std::stoi(text.substr(0, 4));
    int month = std::stoi(text.substr(5));
    if (month < 1 || month > 12) bad();
    return make_month(year, month);
}

std::string format_month(Month m) {
    int y = month_year(m);
    int mo = month_of_year(m);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", y, mo);
    return buf;
}

void ReturnsPanel::add(const std::string& strategy_id, const std::string& family, Month month,
                       double ret) {
    auto [it, inserted] = index_.emplace(strategy_id, strategies_.size());
    if (inserted) {
        StrategySeries s;
        s.strategy_id = strategy_id;
        s.family = family;
        strategies_.push_back(std::move(s));
    } else if (strategies_[it->second].family != family) {
        throw std::runtime_error("strategy " + strategy_id + " appears under families '" +
                                 strategies_[it->second].family + "' and '" + family + "'");
    }
    strategies_[it->second].obs.push_back({month, ret});
}

void ReturnsPanel::finalize() {
    for (auto& s : strategies_) {
        std::sort(s.obs.begin(), s.obs.end(),
                  [](const Observation& a, const Observation& b) { return a.month < b.month; });
        for (std::size_t i = 1; i < s.obs.size(); ++i) {
            if (s.obs[i].month == s.obs[i - 1].month)
                throw std::runtime_error("duplicate observation for (" + s.strategy_id + ", " +
                                         format_month(s.obs[i].month) + ")");
        }
    }
}

std::size_t ReturnsPanel::n_observations() const {
    std::size_t n = 0;
    for (const auto& s : strategies_) n += s.obs.size();
    return n;
}

const StrategySeries* ReturnsPanel::find(const std::string& strategy_id) const {
    auto it = index_.find(strategy_id);
    return it == index_.end() ? nullptr : &strategies_[it->second];
}

std::optional<Month> ReturnsPanel::min_month() const {
    std::optional<Month> m;
    for (const auto& s : strategies_)
        for (const auto& o : s.obs)
            if (!m || o.month < *m) m = o.month;
    return m;
}

std::optional<Month> ReturnsPanel::max_month() const {
    std::optional<Month> m;
    for (const auto& s : strategies_)
        for (const auto& o : s.obs)
            if (!m || o.month > *m) m = o.month;
    return m;
}

ReturnsPanel load_panel(const std::string& path, const PanelSchema& schema) {
    CsvReader reader(path);
    std::size_t c_id = reader.column(schema.strategy_id);
    std::size_t c_family = reader.column(schema.family);
    std::size_t c_month = reader.column(schema.month);
    std::size_t c_ret = reader.column(schema.ret);

    ReturnsPanel panel;
    std::vector<std::string> row;
    while (reader.next(row)) {
        std::size_t line = reader.line_number();
        const std::string& fam = row[c_family];
        if (!is_canonical_family(fam) && !schema.allow_custom_families)
            throw std::runtime_error("line " + std::to_string(line) + ": unknown family '" + fam +
                                     "' (custom families need opt-in)");
        Month m = parse_month_at(row[c_month], line);
        double ret = parse_double(row[c_ret], line, schema.ret);
        if (!std::isfinite(ret))
            throw std::runtime_error("line " + std::to_string(line) + ": non-finite return");
        if (row[c_id].empty())
            throw std::runtime_error("line " + std::to_string(line) + ": empty strategy_id");
        panel.add(row[c_id], fam, m, ret);
    }
    panel.finalize();
    return panel;
}

void save_panel(const ReturnsPanel& panel, const std::string& path) {
    CsvWriter w(path, {"strategy_id", "family", "month", "ret"});
    for (const auto& s : panel.strategies())
        for (const auto& o : s.obs)
            w.write_row({s.strategy_id, s.family, format_month(o.month), format_double(o.ret)});
    w.close();
}

ReturnsPanel window(const ReturnsPanel& panel, Month end_month, int length_months) {
    if (length_months <= 0) throw std::invalid_argument("window length must be positive");
    Month lo = end_month - length_months; // exclusive
    ReturnsPanel out;
    for (const auto& s : panel.strategies()) {
        bool any = false;
        for (const auto& o : s.obs) {
            if (o.month > lo && o.month <= end_month) {
                out.add(s.strategy_id, s.family, o.month, o.ret);
                any = true;
            }
        }
        (void)any;
    }
    out.finalize();
    return out;
}

std::vector<StrategyStats> summarize(const ReturnsPanel& panel, int min_obs,
                                     SummarizeDiagnostics* diag) {
    if (min_obs < 2) throw std::invalid_argument("min_obs must be at least 2");
    std::vector<StrategyStats> out;
    std::vector<double> rets;
    for (const auto& s : panel.strategies()) {
        if (s.obs.size() < static_cast<std::size_t>(min_obs)) {
            if (diag) ++diag->dropped_min_obs;
            continue;
        }
        rets.clear();
        for (const auto& o : s.obs) rets.push_back(o.ret);
        // A constant series is zero-variance even when the two-pass sum
        // rounds away from exact zero.
        auto [lo, hi] = std::minmax_element(rets.begin(), rets.end());
        MeanVar mv = mean_var(rets);
        if (mv.var <= 0.0 || *lo == *hi) {
            if (diag) ++diag->dropped_zero_sd;
            continue;
        }
        StrategyStats st;
        st.strategy_id = s.strategy_id;
        st.family = s.family;
        st.window_start = s.obs.front().month;
        st.window_end = s.obs.back().month;
        st.n_obs = mv.n;
        st.mean_ret = mv.mean;
        st.sd_ret = std::sqrt(mv.var);
        st.se = st.sd_ret / std::sqrt(static_cast<double>(mv.n));
        st.tstat = st.mean_ret / st.se;
        out.push_back(std::move(st));
    }
    return out;
}

void save_stats(const std::vector<StrategyStats>& stats, const std::string& path) {
    CsvWriter w(path, {"strategy_id", "family", "window_start", "window_end", "n_obs", "mean_ret",
                       "sd_ret", "se", "tstat"});
    for (const auto& s : stats) {
        w.write_row({s.strategy_id, s.family, format_month(s.window_start),
                     format_month(s.window_end), std::to_string(s.n_obs),
                     format_double(s.mean_ret), format_double(s.sd_ret), format_double(s.se),
                     format_double(s.tstat)});
    }
    w.close();
}

std::vector<StrategyStats> load_stats(const std::string& path) {
    CsvReader reader(path);
    std::size_t c_id = reader.column("strategy_id");
    std::size_t c_family = reader.column("family");
    std::size_t c_ws = reader.column("window_start");
    std::size_t c_we = reader.column("window_end");
    std::size_t c_n = reader.column("n_obs");
    std::size_t c_mean = reader.column("mean_ret");
    std::size_t c_sd = reader.column("sd_ret");
    std::size_t c_se = reader.column("se");
    std::size_t c_t = reader.column("tstat");

    std::vector<StrategyStats> out;
    std::vector<std::string> row;
    while (reader.next(row)) {
        std::size_t line = reader.line_number();
        StrategyStats s;
        s.strategy_id = row[c_id];
        s.family = row[c_family];
        s.window_start = parse_month_at(row[c_ws], line);
        s.window_end = parse_month_at(row[c_we], line);
        s.n_obs = static_cast<std::size_t>(parse_long(row[c_n], line, "n_obs"));
        s.mean_ret = parse_double(row[c_mean], line, "mean_ret");
        s.sd_ret = parse_double(row[c_sd], line, "sd_ret");
        s.se = parse_double(row[c_se], line, "se");
        s.tstat = parse_double(row[c_t], line, "tstat");
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<HistogramBin> tstat_histogram(const std::vector<StrategyStats>& stats,
                                          double bin_width) {
    if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
    // family -> bin index -> count, ordered for stable output
    std::map<std::string, std::map<long, std::size_t>> counts;
    std::map<std::string, std::size_t> totals;
    for (const auto& s : stats) {
        long j = static_cast<long>(std::floor(s.tstat / bin_width + 0.5));
        ++counts[s.family][j];
        ++totals[s.family];
    }
    std::vector<HistogramBin> out;
    for (const auto& [family, bins] : counts) {
        double total = static_cast<double>(totals[family]);
        for (const auto& [j, count] : bins) {
            HistogramBin b;
            b.family = family;
            b.bin_left = (static_cast<double>(j) - 0.5) * bin_width;
            b.bin_right = (static_cast<double>(j) + 0.5) * bin_width;
            b.count = count;
            b.density = static_cast<double>(count) / (total * bin_width);
            b.null_density = norm_pdf(static_cast<double>(j) * bin_width);
            out.push_back(std::move(b));
        }
    }
    return out;
}

void save_histogram(const std::vector<HistogramBin>& bins, const std::string& path) {
    CsvWriter w(path, {"family", "bin_left", "bin_right", "count", "density", "null_density"});
    for (const auto& b : bins) {
        w.write_row({b.family, format_double(b.bin_left), format_double(b.bin_right),
                     std::to_string(b.count), format_double(b.density),
                     format_double(b.null_density)});
    }
    w.close();
}

} // namespace ebmine
