#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "ebmine/panel.hpp"

namespace ebmine {

// Stock-month inputs for signal construction. Optional fields use NaN (mktcap,
// accounting values) or "" (ticker) for missing. Accounting variables are
// already-aligned monthly values; no fiscal-lag logic is applied here.
struct StockSeries {
    std::string stock_id;
    std::vector<Month> months; // ascending, unique
    std::vector<double> ret;
    std::vector<double> mktcap;               // month-start capitalization, > 0
    std::vector<std::string> ticker;          // [A-Z]{1,5}
    std::vector<std::vector<double>> acct;    // [var][month index]

    // index of month m, or npos
    std::size_t find(Month m) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

struct StockPanel {
    std::vector<StockSeries> stocks; // sorted by stock_id
    std::vector<std::string> acct_names;
    bool has_mktcap = false;
    bool has_ticker = false;

    std::size_t acct_index(const std::string& name) const; // npos if absent
    Month min_month() const;
    Month max_month() const;
};

// CSV schema: stock_id,month,ret[,mktcap][,ticker][,acct:<name>...]
// Blank optional fields mean missing; mktcap must be positive, ticker must
// match [A-Z]{1,5}. One row per (stock_id, month).
StockPanel load_stock_panel(const std::string& path);

enum class SignalKind {
    pastret_moment, // central moment over 4 chosen quarterly returns
    pastret_single, // one quarterly return
    pastret_meanK,  // mean of the most recent K quarterly returns
    ticker_sort,    // alphabetical 20-group sort on one ticker character
    acct_ratio,     // X/Y level
    acct_diff_ratio // (X - lag12 X) / lag12 Y
};

std::string signal_kind_name(SignalKind kind);

struct SignalDef {
    std::string signal_id;
    SignalKind kind = SignalKind::pastret_single;
    std::array<int, 4> quarters{}; // moment: 4 ascending in 1..20; single: [0]=q; meanK: [0]=K
    int moment = 0;                // moment kind: 1..4; moment 1 is the plain mean
    int ticker_pos = 0;            // ticker kind: character position 1..4
    std::array<int, 4> groups{};   // ticker kind: ascending groups in 1..20; first two long
    std::string numerator;         // acct kinds
    std::string denominator;
};

// 19,380 moment signals (4 quarters out of 20, moments 1-4) plus 20
// single-quarter returns plus mean over the past 2 and past 3 quarters:
// 19,402 definitions.
std::vector<SignalDef> enumerate_pastret_signals();

// Character positions 1-4, each with every 4-subset of the 20 alphabetical
// groups: 19,380 definitions. The two lowest-indexed chosen groups are held
// long, the other two short (any fixed assignment yields a valid universe;
// the choice is recorded in the def).
std::vector<SignalDef> enumerate_ticker_signals();

// Level and year-over-year difference ratios for every (numerator,
// denominator) pair; X/X level self-ratios are excluded. denom_names must be
// a subset of var_names.
std::vector<SignalDef> enumerate_acct_signals(const std::vector<std::string>& var_names,
                                              const std::vector<std::string>& denom_names);

// One JSON object per line, fields keyed by kind; signal_id is stable.
void save_signal_defs(const std::vector<SignalDef>& defs, const std::string& path);

enum class Weighting { ew, vw };

// Long-short monthly returns for one signal. The signal is computed at the
// formation month f = m - 1 and paired with stock returns in month m; VW
// weights use month-m (start-of-month) capitalization. Quarter q covers
// months f-3q+1 .. f-3q+3, compounded, all three required. Sorted kinds go
// long the top floor(N/n_deciles) stocks and short the bottom
// floor(N/n_deciles) (ties by stock_id); the equal-count extreme groups keep
// the construction symmetric under signal reflection. Ticker signals instead
// use the def's group memberships over 20 equal-count alphabetical groups.
// A month yields a return only when at least 2*n_deciles stocks (ticker: at
// least 20, if larger) have a valid signal, a month-m return, and a weight.
std::vector<Observation> build_strategy_returns(const StockPanel& stocks, const SignalDef& def,
                                                Weighting weighting, int n_deciles = 10);

} // namespace ebmine
