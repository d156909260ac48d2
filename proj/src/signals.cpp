#include "ebmine/signals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ebmine/csv.hpp"

namespace ebmine {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kQuarterSpan = 20;
constexpr int kTickerGroups = 20;

std::string two_digits(int v) {
    std::string s = std::to_string(v);
    return s.size() < 2 ? "0" + s : s;
}

bool valid_ticker(const std::string& t) {
    if (t.empty() || t.size() > 5) return false;
    for (char c : t)
        if (c < 'A' || c > 'Z') return false;
    return true;
}

Month parse_month_at(const std::string& s, std::size_t line_no) {
    try {
        return parse_month(s);
    } catch (const std::exception& e) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
    }
}

} // namespace

std::size_t StockSeries::find(Month m) const {
    auto it = std::lower_bound(months.begin(), months.end(), m);
    if (it == months.end() || *it != m) return npos;
    return static_cast<std::size_t>(it - months.begin());
}

std::size_t StockPanel::acct_index(const std::string& name) const {
    for (std::size_t i = 0; i < acct_names.size(); ++i)
        if (acct_names[i] == name) return i;
    return StockSeries::npos;
}

Month StockPanel::min_month() const {
    if (stocks.empty()) throw std::runtime_error("stock panel is empty");
    Month m = stocks[0].months.front();
    for (const auto& s : stocks) m = std::min(m, s.months.front());
    return m;
}

Month StockPanel::max_month() const {
    if (stocks.empty()) throw std::runtime_error("stock panel is empty");
    Month m = stocks[0].months.back();
    for (const auto& s : stocks) m = std::max(m, s.months.back());
    return m;
}

StockPanel load_stock_panel(const std::string& path) {
    CsvReader reader(path);
    std::size_t c_id = reader.column("stock_id");
    std::size_t c_month = reader.column("month");
    std::size_t c_ret = reader.column("ret");
    std::size_t c_cap = reader.has_column("mktcap") ? reader.column("mktcap") : StockSeries::npos;
    std::size_t c_tick = reader.has_column("ticker") ? reader.column("ticker") : StockSeries::npos;

    StockPanel panel;
    std::vector<std::size_t> acct_cols;
    const auto& header = reader.header();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i].rfind("acct:", 0) == 0) {
            std::string name = header[i].substr(5);
            if (name.empty()) throw std::runtime_error("empty accounting variable name in header");
            panel.acct_names.push_back(name);
            acct_cols.push_back(i);
        }
    }
    panel.has_mktcap = c_cap != StockSeries::npos;
    panel.has_ticker = c_tick != StockSeries::npos;

    struct Row {
        std::string id;
        Month month;
        double ret;
        double mktcap;
        std::string ticker;
        std::vector<double> acct;
    };
    std::vector<Row> rows;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        std::size_t line = reader.line_number();
        Row r;
        r.id = fields[c_id];
        if (r.id.empty()) throw std::runtime_error("line " + std::to_string(line) + ": empty stock_id");
        r.month = parse_month_at(fields[c_month], line);
        r.ret = parse_double(fields[c_ret], line, "ret");
        if (!std::isfinite(r.ret))
            throw std::runtime_error("line " + std::to_string(line) + ": non-finite ret");
        r.mktcap = kNaN;
        if (c_cap != StockSeries::npos && !fields[c_cap].empty()) {
            r.mktcap = parse_double(fields[c_cap], line, "mktcap");
            if (!(r.mktcap > 0.0) || !std::isfinite(r.mktcap))
                throw std::runtime_error("line " + std::to_string(line) + ": mktcap must be positive");
        }
        if (c_tick != StockSeries::npos && !fields[c_tick].empty()) {
            r.ticker = fields[c_tick];
            if (!valid_ticker(r.ticker))
                throw std::runtime_error("line " + std::to_string(line) + ": ticker '" + r.ticker +
                                         "' does not match [A-Z]{1,5}");
        }
        r.acct.reserve(acct_cols.size());
        for (std::size_t c : acct_cols) {
            if (fields[c].empty()) {
                r.acct.push_back(kNaN);
            } else {
                double v = parse_double(fields[c], line, header[c]);
                if (!std::isfinite(v))
                    throw std::runtime_error("line " + std::to_string(line) + ": non-finite " + header[c]);
                r.acct.push_back(v);
            }
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no data rows");

    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.id != b.id) return a.id < b.id;
        return a.month < b.month;
    });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].id == rows[i - 1].id && rows[i].month == rows[i - 1].month)
            throw std::runtime_error("duplicate row for stock " + rows[i].id + " month " +
                                     format_month(rows[i].month));
    }

    for (std::size_t i = 0; i < rows.size();) {
        std::size_t j = i;
        while (j < rows.size() && rows[j].id == rows[i].id) ++j;
        StockSeries s;
        s.stock_id = rows[i].id;
        s.acct.resize(panel.acct_names.size());
        for (std::size_t k = i; k < j; ++k) {
            s.months.push_back(rows[k].month);
            s.ret.push_back(rows[k].ret);
            s.mktcap.push_back(rows[k].mktcap);
            s.ticker.push_back(std::move(rows[k].ticker));
            for (std::size_t a = 0; a < s.acct.size(); ++a) s.acct[a].push_back(rows[k].acct[a]);
        }
        panel.stocks.push_back(std::move(s));
        i = j;
    }
    return panel;
}

std::string signal_kind_name(SignalKind kind) {
    switch (kind) {
        case SignalKind::pastret_moment: return "pastret_moment";
        case SignalKind::pastret_single: return "pastret_single";
        case SignalKind::pastret_meanK: return "pastret_meanK";
        case SignalKind::ticker_sort: return "ticker_sort";
        case SignalKind::acct_ratio: return "acct_ratio";
        case SignalKind::acct_diff_ratio: return "acct_diff_ratio";
    }
    throw std::logic_error("unknown signal kind");
}

std::vector<SignalDef> enumerate_pastret_signals() {
    std::vector<SignalDef> defs;
    for (int a = 1; a <= kQuarterSpan; ++a)
        for (int b = a + 1; b <= kQuarterSpan; ++b)
            for (int c = b + 1; c <= kQuarterSpan; ++c)
                for (int d = c + 1; d <= kQuarterSpan; ++d)
                    for (int moment = 1; moment <= 4; ++moment) {
                        SignalDef def;
                        def.kind = SignalKind::pastret_moment;
                        def.quarters = {a, b, c, d};
                        def.moment = moment;
                        def.signal_id = "pr_m" + std::to_string(moment) + "_q" + two_digits(a) +
                                        "_" + two_digits(b) + "_" + two_digits(c) + "_" +
                                        two_digits(d);
                        defs.push_back(std::move(def));
                    }
    for (int q = 1; q <= kQuarterSpan; ++q) {
        SignalDef def;
        def.kind = SignalKind::pastret_single;
        def.quarters = {q, 0, 0, 0};
        def.signal_id = "pr_single_q" + two_digits(q);
        defs.push_back(std::move(def));
    }
    for (int k = 2; k <= 3; ++k) {
        SignalDef def;
        def.kind = SignalKind::pastret_meanK;
        def.quarters = {k, 0, 0, 0};
        def.signal_id = "pr_mean" + std::to_string(k);
        defs.push_back(std::move(def));
    }
    return defs;
}

std::vector<SignalDef> enumerate_ticker_signals() {
    std::vector<SignalDef> defs;
    for (int pos = 1; pos <= 4; ++pos)
        for (int a = 1; a <= kTickerGroups; ++a)
            for (int b = a + 1; b <= kTickerGroups; ++b)
                for (int c = b + 1; c <= kTickerGroups; ++c)
                    for (int d = c + 1; d <= kTickerGroups; ++d) {
                        SignalDef def;
                        def.kind = SignalKind::ticker_sort;
                        def.ticker_pos = pos;
                        def.groups = {a, b, c, d};
                        def.signal_id = "tk_p" + std::to_string(pos) + "_g" + two_digits(a) + "_" +
                                        two_digits(b) + "_" + two_digits(c) + "_" + two_digits(d);
                        defs.push_back(std::move(def));
                    }
    return defs;
}

std::vector<SignalDef> enumerate_acct_signals(const std::vector<std::string>& var_names,
                                              const std::vector<std::string>& denom_names) {
    for (const auto& d : denom_names)
        if (std::find(var_names.begin(), var_names.end(), d) == var_names.end())
            throw std::invalid_argument("denominator '" + d + "' is not in the variable list");
    std::vector<SignalDef> defs;
    for (const auto& x : var_names) {
        for (const auto& y : denom_names) {
            if (x != y) {
                SignalDef lvl;
                lvl.kind = SignalKind::acct_ratio;
                lvl.numerator = x;
                lvl.denominator = y;
                lvl.signal_id = "ar_lvl_" + x + "_over_" + y;
                defs.push_back(std::move(lvl));
            }
            SignalDef dif;
            dif.kind = SignalKind::acct_diff_ratio;
            dif.numerator = x;
            dif.denominator = y;
            dif.signal_id = "ar_dif_" + x + "_over_" + y;
            defs.push_back(std::move(dif));
        }
    }
    return defs;
}

void save_signal_defs(const std::vector<SignalDef>& defs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& def : defs) {
        nlohmann::ordered_json j;
        j["signal_id"] = def.signal_id;
        j["kind"] = signal_kind_name(def.kind);
        switch (def.kind) {
            case SignalKind::pastret_moment:
                j["quarters"] = def.quarters;
                j["moment"] = def.moment;
                break;
            case SignalKind::pastret_single:
                j["quarter"] = def.quarters[0];
                break;
            case SignalKind::pastret_meanK:
                j["k"] = def.quarters[0];
                break;
            case SignalKind::ticker_sort:
                j["position"] = def.ticker_pos;
                j["long_groups"] = {def.groups[0], def.groups[1]};
                j["short_groups"] = {def.groups[2], def.groups[3]};
                break;
            case SignalKind::acct_ratio:
            case SignalKind::acct_diff_ratio:
                j["numerator"] = def.numerator;
                j["denominator"] = def.denominator;
                break;
        }
        out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path);
}

namespace {

void validate_def(const SignalDef& def) {
    auto quarters_ok = [&](int count) {
        for (int i = 0; i < count; ++i) {
            if (def.quarters[static_cast<std::size_t>(i)] < 1 ||
                def.quarters[static_cast<std::size_t>(i)] > kQuarterSpan)
                return false;
            if (i > 0 && def.quarters[static_cast<std::size_t>(i)] <=
                             def.quarters[static_cast<std::size_t>(i - 1)])
                return false;
        }
        return true;
    };
    switch (def.kind) {
        case SignalKind::pastret_moment:
            if (!quarters_ok(4) || def.moment < 1 || def.moment > 4)
                throw std::invalid_argument(def.signal_id + ": bad quarter set or moment");
            break;
        case SignalKind::pastret_single:
        case SignalKind::pastret_meanK:
            if (def.quarters[0] < 1 || def.quarters[0] > kQuarterSpan)
                throw std::invalid_argument(def.signal_id + ": quarter out of range");
            break;
        case SignalKind::ticker_sort:
            if (def.ticker_pos < 1 || def.ticker_pos > 4)
                throw std::invalid_argument(def.signal_id + ": ticker position out of range");
            for (int i = 0; i < 4; ++i) {
                int g = def.groups[static_cast<std::size_t>(i)];
                if (g < 1 || g > kTickerGroups)
                    throw std::invalid_argument(def.signal_id + ": group out of range");
                if (i > 0 && g <= def.groups[static_cast<std::size_t>(i - 1)])
                    throw std::invalid_argument(def.signal_id + ": groups must be ascending");
            }
            break;
        case SignalKind::acct_ratio:
        case SignalKind::acct_diff_ratio:
            if (def.numerator.empty() || def.denominator.empty())
                throw std::invalid_argument(def.signal_id + ": missing variable name");
            break;
    }
}

// Compound return over quarter q: months f-3q+1 .. f-3q+3, all required.
bool quarterly_return(const StockSeries& s, Month f, int q, double* out) {
    Month first = f - 3 * q + 1;
    double acc = 1.0;
    for (int k = 0; k < 3; ++k) {
        std::size_t idx = s.find(first + k);
        if (idx == StockSeries::npos) return false;
        acc *= 1.0 + s.ret[idx];
    }
    *out = acc - 1.0;
    return true;
}

bool signal_value(const StockPanel& panel, const StockSeries& s, const SignalDef& def, Month f,
                  std::size_t num_idx, std::size_t den_idx, double* out) {
    switch (def.kind) {
        case SignalKind::pastret_moment: {
            double r[4];
            for (int i = 0; i < 4; ++i)
                if (!quarterly_return(s, f, def.quarters[static_cast<std::size_t>(i)], &r[i]))
                    return false;
            double mean = 0.25 * (r[0] + r[1] + r[2] + r[3]);
            if (def.moment == 1) {
                *out = mean;
                return true;
            }
            double acc = 0.0;
            for (double v : r) acc += std::pow(v - mean, def.moment);
            *out = acc / 4.0;
            return true;
        }
        case SignalKind::pastret_single:
            return quarterly_return(s, f, def.quarters[0], out);
        case SignalKind::pastret_meanK: {
            int k = def.quarters[0];
            double acc = 0.0;
            for (int q = 1; q <= k; ++q) {
                double r;
                if (!quarterly_return(s, f, q, &r)) return false;
                acc += r;
            }
            *out = acc / k;
            return true;
        }
        case SignalKind::ticker_sort: {
            std::size_t idx = s.find(f);
            if (idx == StockSeries::npos) return false;
            const std::string& t = s.ticker[idx];
            if (static_cast<int>(t.size()) < def.ticker_pos) return false;
            *out = static_cast<double>(t[static_cast<std::size_t>(def.ticker_pos - 1)]);
            return true;
        }
        case SignalKind::acct_ratio: {
            std::size_t idx = s.find(f);
            if (idx == StockSeries::npos) return false;
            double x = s.acct[num_idx][idx];
            double y = s.acct[den_idx][idx];
            if (std::isnan(x) || std::isnan(y) || y == 0.0) return false;
            *out = x / y;
            return true;
        }
        case SignalKind::acct_diff_ratio: {
            std::size_t idx = s.find(f);
            std::size_t lag = s.find(f - 12);
            if (idx == StockSeries::npos || lag == StockSeries::npos) return false;
            double x = s.acct[num_idx][idx];
            double xl = s.acct[num_idx][lag];
            double yl = s.acct[den_idx][lag];
            if (std::isnan(x) || std::isnan(xl) || std::isnan(yl) || yl == 0.0) return false;
            *out = (x - xl) / yl;
            return true;
        }
    }
    (void)panel;
    return false;
}

} // namespace

std::vector<Observation> build_strategy_returns(const StockPanel& stocks, const SignalDef& def,
                                                Weighting weighting, int n_deciles) {
    validate_def(def);
    if (n_deciles < 2) throw std::invalid_argument("n_deciles must be at least 2");
    if (def.kind == SignalKind::ticker_sort && !stocks.has_ticker)
        throw std::runtime_error(def.signal_id + ": stock panel has no ticker column");
    if (weighting == Weighting::vw && !stocks.has_mktcap)
        throw std::runtime_error(def.signal_id + ": stock panel has no mktcap column");
    std::size_t num_idx = 0, den_idx = 0;
    if (def.kind == SignalKind::acct_ratio || def.kind == SignalKind::acct_diff_ratio) {
        num_idx = stocks.acct_index(def.numerator);
        if (num_idx == StockSeries::npos)
            throw std::runtime_error(def.signal_id + ": no accounting column '" + def.numerator + "'");
        den_idx = stocks.acct_index(def.denominator);
        if (den_idx == StockSeries::npos)
            throw std::runtime_error(def.signal_id + ": no accounting column '" + def.denominator + "'");
    }

    const bool is_ticker = def.kind == SignalKind::ticker_sort;
    const std::size_t required_n = is_ticker
        ? std::max<std::size_t>(2u * static_cast<std::size_t>(n_deciles), kTickerGroups)
        : 2u * static_cast<std::size_t>(n_deciles);

    struct Cand {
        double signal;
        std::size_t stock; // index into stocks.stocks, which is sorted by id
        double ret;
        double weight;
    };

    std::vector<Observation> out;
    Month lo = stocks.min_month();
    Month hi = stocks.max_month();
    std::vector<Cand> cands;
    for (Month m = lo + 1; m <= hi; ++m) {
        Month f = m - 1;
        cands.clear();
        for (std::size_t si = 0; si < stocks.stocks.size(); ++si) {
            const StockSeries& s = stocks.stocks[si];
            std::size_t idx_m = s.find(m);
            if (idx_m == StockSeries::npos) continue;
            double w = 1.0;
            if (weighting == Weighting::vw) {
                w = s.mktcap[idx_m];
                if (std::isnan(w)) continue;
            }
            double sig;
            if (!signal_value(stocks, s, def, f, num_idx, den_idx, &sig)) continue;
            cands.push_back({sig, si, s.ret[idx_m], w});
        }
        if (cands.size() < required_n) continue;
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.signal != b.signal) return a.signal < b.signal;
            return a.stock < b.stock;
        });

        double long_ret = 0.0, long_w = 0.0, short_ret = 0.0, short_w = 0.0;
        const std::size_t n = cands.size();
        if (is_ticker) {
            for (std::size_t i = 0; i < n; ++i) {
                int g = static_cast<int>(i * kTickerGroups / n) + 1;
                const Cand& c = cands[i];
                if (g == def.groups[0] || g == def.groups[1]) {
                    long_ret += c.weight * c.ret;
                    long_w += c.weight;
                } else if (g == def.groups[2] || g == def.groups[3]) {
                    short_ret += c.weight * c.ret;
                    short_w += c.weight;
                }
            }
        } else {
            std::size_t k = n / static_cast<std::size_t>(n_deciles);
            for (std::size_t i = 0; i < k; ++i) {
                short_ret += cands[i].weight * cands[i].ret;
                short_w += cands[i].weight;
            }
            for (std::size_t i = n - k; i < n; ++i) {
                long_ret += cands[i].weight * cands[i].ret;
                long_w += cands[i].weight;
            }
        }
        out.push_back({m, long_ret / long_w - short_ret / short_w});
    }
    return out;
}

} // namespace ebmine
