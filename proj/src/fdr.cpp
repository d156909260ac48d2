#include "ebmine/fdr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ebmine/csv.hpp"
#include "ebmine/mathutil.hpp"
#include "ebmine/parallel.hpp"
#include "ebmine/rng.hpp"

namespace ebmine {

namespace {

void check_q(double q_star) {
    if (!(q_star > 0.0 && q_star < 1.0))
        throw std::invalid_argument("q_star must be in (0, 1)");
}

// Shared grid search: smallest observed |t| cutoff h (candidates: 0 and every
// observed value, inclusive share) with tail(h) * pi <= q * share(|t| >= h).
// The returned hurdle sits one ulp below the binding cutoff so that strict
// counting reproduces the inclusive rejection set.
HurdleResult grid_hurdle(std::span<const double> tstats, double q_star, double pi,
                         const std::string& method) {
    check_q(q_star);
    if (tstats.empty()) throw std::invalid_argument("hurdle search needs at least one t-stat");
    std::vector<double> a;
    a.reserve(tstats.size());
    for (double t : tstats) {
        if (!std::isfinite(t)) throw std::invalid_argument("non-finite t-stat");
        a.push_back(std::fabs(t));
    }
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());

    HurdleResult res;
    res.method = method;
    res.q_star = q_star;
    res.pi = pi;

    auto feasible = [&](double h, double share_geq) {
        return two_sided_tail(h) * pi <= q_star * share_geq;
    };

    double found = std::numeric_limits<double>::quiet_NaN();
    // candidate 0 first, then distinct observed values ascending
    ++res.n_candidates;
    if (feasible(0.0, 1.0)) {
        found = 0.0;
    } else {
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (i > 0 && a[i] == a[i - 1]) continue;
            ++res.n_candidates;
            double share_geq = (n - static_cast<double>(i)) / n;
            if (feasible(a[i], share_geq)) {
                found = a[i];
                break;
            }
        }
    }

    if (std::isnan(found)) {
        res.hurdle = std::numeric_limits<double>::infinity();
        res.n_discoveries = 0;
        return res;
    }
    res.hurdle = found == 0.0 ? 0.0 : std::nextafter(found, 0.0);
    res.n_discoveries = static_cast<std::size_t>(
        a.end() - std::upper_bound(a.begin(), a.end(), res.hurdle));
    return res;
}

} // namespace

HurdleResult hurdle_by13(std::span<const double> tstats, double q_star) {
    // harmonic multiplier, summed small-to-large
    double pi = 0.0;
    for (std::size_t i = tstats.size(); i >= 1; --i) pi += 1.0 / static_cast<double>(i);
    return grid_hurdle(tstats, q_star, pi, "by13");
}

HurdleResult hurdle_storey(std::span<const double> tstats, double q_star, double null_cutoff) {
    if (!(null_cutoff > 0.0)) throw std::invalid_argument("null_cutoff must be positive");
    std::size_t n_low = 0;
    for (double t : tstats) {
        if (!std::isfinite(t)) throw std::invalid_argument("non-finite t-stat");
        if (std::fabs(t) <= null_cutoff) ++n_low;
    }
    double share_low = static_cast<double>(n_low) / static_cast<double>(tstats.size());
    double null_mass = std::erf(null_cutoff / kSqrt2); // 2 Phi(c) - 1
    double pi = std::min(1.0, share_low / null_mass);
    return grid_hurdle(tstats, q_star, pi, "storey");
}

namespace {

// Month-aligned demeaned return matrix plus the observed t-stats, the inputs
// the bootstrap works from.
struct RwData {
    std::size_t n_strat = 0;
    std::size_t n_months = 0;
    std::vector<double> abs_t;
    std::vector<double> demeaned; // n_strat x n_months, NaN = missing
    std::vector<int> boot_idx;    // n_boot x n_months resampled month offsets
    int n_boot = 0;
};

RwData build_rw_data(const ReturnsPanel& panel, const RwConfig& cfg) {
    std::vector<Month> grid;
    for (const auto& s : panel.strategies())
        for (const auto& o : s.obs) grid.push_back(o.month);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.empty()) throw std::invalid_argument("empty panel");

    RwData d;
    d.n_months = grid.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& s : panel.strategies()) {
        if (s.obs.size() < static_cast<std::size_t>(std::max(cfg.min_obs, 2))) continue;
        std::vector<double> rets;
        rets.reserve(s.obs.size());
        for (const auto& o : s.obs) rets.push_back(o.ret);
        MeanVar mv = mean_var(rets);
        if (!(mv.var > 0.0)) continue;
        double t = mv.mean / (std::sqrt(mv.var) / std::sqrt(static_cast<double>(mv.n)));
        d.abs_t.push_back(std::fabs(t));
        std::size_t base = d.demeaned.size();
        d.demeaned.resize(base + d.n_months, nan);
        for (const auto& o : s.obs) {
            std::size_t j = static_cast<std::size_t>(
                std::lower_bound(grid.begin(), grid.end(), o.month) - grid.begin());
            d.demeaned[base + j] = o.ret - mv.mean;
        }
        ++d.n_strat;
    }
    if (d.n_strat == 0) throw std::invalid_argument("no strategy has enough data for bootstrap");

    d.n_boot = cfg.n_boot;
    d.boot_idx.resize(static_cast<std::size_t>(cfg.n_boot) * d.n_months);
    for (int b = 0; b < cfg.n_boot; ++b) {
        RngStream rng(cfg.seed, "rw-boot", static_cast<std::uint64_t>(b));
        for (std::size_t j = 0; j < d.n_months; ++j)
            d.boot_idx[static_cast<std::size_t>(b) * d.n_months + j] =
                static_cast<int>(rng.next_below(d.n_months));
    }
    return d;
}

// One bootstrap sweep: per replicate, the |t*| of every tracked strategy and
// the k largest |t*| among the pool strategies (descending).
struct BootPass {
    std::vector<double> tracked;  // n_boot x tracked.size()
    std::vector<double> pool_top; // n_boot x k, -inf padded
    std::size_t n_tracked = 0;
    std::size_t k = 0;
    std::size_t degenerate = 0;
};

BootPass run_boot_pass(const RwData& d, const std::vector<std::size_t>& tracked_idx,
                       const std::vector<char>& in_pool, std::size_t k, unsigned n_threads) {
    BootPass out;
    out.n_tracked = tracked_idx.size();
    out.k = k;
    out.tracked.assign(static_cast<std::size_t>(d.n_boot) * tracked_idx.size(), 0.0);
    out.pool_top.assign(static_cast<std::size_t>(d.n_boot) * k,
                        -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> degenerate_per_b(d.n_boot, 0);

    parallel_for(static_cast<std::size_t>(d.n_boot), [&](std::size_t b) {
        const int* idx = &d.boot_idx[b * d.n_months];
        std::vector<double> top; // ascending heap-free buffer, size <= k
        top.reserve(k + 1);
        std::size_t degen = 0;
        auto boot_abs_t = [&](std::size_t i) {
            const double* row = &d.demeaned[i * d.n_months];
            double sum = 0.0, sumsq = 0.0;
            std::size_t n = 0;
            for (std::size_t j = 0; j < d.n_months; ++j) {
                double v = row[idx[j]];
                if (std::isnan(v)) continue;
                sum += v;
                sumsq += v * v;
                ++n;
            }
            if (n < 2) {
                ++degen;
                return 0.0;
            }
            double mean = sum / static_cast<double>(n);
            double var = (sumsq - sum * mean) / static_cast<double>(n - 1);
            if (!(var > 0.0)) {
                ++degen;
                return 0.0;
            }
            return std::fabs(mean / std::sqrt(var / static_cast<double>(n)));
        };

        std::size_t ti = 0;
        for (std::size_t i = 0; i < d.n_strat; ++i) {
            bool is_tracked = ti < tracked_idx.size() && tracked_idx[ti] == i;
            double v = (is_tracked || in_pool[i]) ? boot_abs_t(i) : 0.0;
            if (is_tracked) {
                out.tracked[b * tracked_idx.size() + ti] = v;
                ++ti;
            }
            if (in_pool[i]) {
                // keep the k largest, ascending order in `top`
                if (top.size() < k) {
                    top.insert(std::upper_bound(top.begin(), top.end(), v), v);
                } else if (k > 0 && v > top.front()) {
                    top.erase(top.begin());
                    top.insert(std::upper_bound(top.begin(), top.end(), v), v);
                }
            }
        }
        for (std::size_t j = 0; j < top.size(); ++j)
            out.pool_top[b * k + j] = top[top.size() - 1 - j]; // descending
        degenerate_per_b[b] = degen;
    }, n_threads);

    for (std::size_t c : degenerate_per_b) out.degenerate += c;
    return out;
}

// k-th largest of (subset of tracked values) union (pool top-k), descending
// two-pointer walk.
double kth_largest_union(const double* subset_desc, std::size_t n_subset, const double* pool_desc,
                         std::size_t n_pool, std::size_t k) {
    std::size_t i = 0, j = 0;
    double v = -std::numeric_limits<double>::infinity();
    for (std::size_t step = 0; step < k; ++step) {
        if (i < n_subset && (j >= n_pool || subset_desc[i] >= pool_desc[j])) {
            v = subset_desc[i++];
        } else if (j < n_pool) {
            v = pool_desc[j++];
        } else {
            return -std::numeric_limits<double>::infinity(); // fewer than k values
        }
    }
    return v;
}

struct Alg21Result {
    double hurdle = 0.0;
    std::size_t stepdown_iters = 0;
    std::size_t degenerate = 0;
};

// k-FWER hurdle with step-down refinement (bootstrap quantile of the k-th
// largest |t*|), as described in the header.
Alg21Result k_fwer_hurdle(const RwData& d, std::size_t k, const RwConfig& cfg) {
    Alg21Result res;
    const double q = 1.0 - cfg.q_star;

    auto quantile_full = [&](const BootPass& pass) {
        std::vector<double> vals(d.n_boot);
        for (int b = 0; b < d.n_boot; ++b) {
            std::size_t off = static_cast<std::size_t>(b);
            vals[b] = kth_largest_union(nullptr, 0, &pass.pool_top[off * pass.k], pass.k, k);
        }
        return quantile_nearest_rank(std::move(vals), q);
    };

    // step (a): all strategies in the pool
    std::vector<char> all_pool(d.n_strat, 1);
    BootPass pass = run_boot_pass(d, {}, all_pool, k, cfg.n_threads);
    res.degenerate += pass.degenerate;
    double h = quantile_full(pass);
    if (k == 1) {
        res.hurdle = h;
        return res;
    }

    for (std::size_t iter = 0; iter < cfg.max_stepdown_iters; ++iter) {
        std::vector<std::size_t> rejected;
        std::vector<char> in_pool(d.n_strat, 0);
        for (std::size_t i = 0; i < d.n_strat; ++i) {
            if (d.abs_t[i] > h)
                rejected.push_back(i);
            else
                in_pool[i] = 1;
        }
        const std::size_t r = rejected.size();
        if (r > k - 1 && binomial_coefficient(static_cast<int>(r), static_cast<int>(k - 1)) >
                             static_cast<double>(cfg.comb_limit))
            break;

        BootPass sd = run_boot_pass(d, rejected, in_pool, k, cfg.n_threads);
        res.degenerate += sd.degenerate;
        ++res.stepdown_iters;

        double h_new;
        if (r <= k - 1) {
            // every rejected strategy may be a false rejection: the candidate
            // null set is the full panel, so the hurdle is the full-set one
            std::vector<double> vals(d.n_boot);
            std::vector<double> subset(r);
            for (int b = 0; b < d.n_boot; ++b) {
                std::size_t off = static_cast<std::size_t>(b);
                for (std::size_t s = 0; s < r; ++s) subset[s] = sd.tracked[off * r + s];
                std::sort(subset.begin(), subset.end(), std::greater<double>());
                vals[b] = kth_largest_union(subset.data(), r, &sd.pool_top[off * k], k, k);
            }
            h_new = quantile_nearest_rank(std::move(vals), q);
        } else {
            // enumerate (k-1)-subsets of the rejected strategies
            std::vector<std::size_t> comb(k - 1);
            for (std::size_t s = 0; s < k - 1; ++s) comb[s] = s;
            h_new = -std::numeric_limits<double>::infinity();
            std::vector<double> vals(d.n_boot);
            std::vector<double> subset(k - 1);
            while (true) {
                for (int b = 0; b < d.n_boot; ++b) {
                    std::size_t off = static_cast<std::size_t>(b);
                    for (std::size_t s = 0; s < k - 1; ++s)
                        subset[s] = sd.tracked[off * r + comb[s]];
                    std::sort(subset.begin(), subset.end(), std::greater<double>());
                    vals[b] = kth_largest_union(subset.data(), k - 1, &sd.pool_top[off * k], k, k);
                }
                std::vector<double> copy = vals;
                h_new = std::max(h_new, quantile_nearest_rank(std::move(copy), q));
                // next combination
                std::size_t pos = k - 1;
                while (pos > 0) {
                    --pos;
                    if (comb[pos] != pos + r - (k - 1)) break;
                }
                if (comb[pos] == pos + r - (k - 1)) break;
                ++comb[pos];
                for (std::size_t s = pos + 1; s < k - 1; ++s) comb[s] = comb[s - 1] + 1;
            }
        }

        if (h_new == h) break;
        h = h_new;
    }
    res.hurdle = h;
    return res;
}

} // namespace

HurdleResult hurdle_rw(const ReturnsPanel& panel_window, const RwConfig& cfg) {
    check_q(cfg.q_star);
    if (!(cfg.p_star > 0.0 && cfg.p_star < 1.0))
        throw std::invalid_argument("p_star must be in (0, 1)");
    if (cfg.n_boot < 2) throw std::invalid_argument("n_boot must be at least 2");

    RwData d = build_rw_data(panel_window, cfg);
    const std::size_t n = d.n_strat;

    HurdleResult res;
    res.method = "rw";
    res.q_star = cfg.q_star;
    res.p_star = cfg.p_star;

    std::size_t k_cap = static_cast<std::size_t>(
        std::floor(cfg.p_star * static_cast<double>(n + 1))) + 1;
    if (k_cap > n) k_cap = n;

    // cache of k -> (hurdle, n_above, predicate)
    struct Probe {
        double h;
        std::size_t n_above;
        bool pred;
    };
    std::map<std::size_t, Probe> probes;
    auto probe = [&](std::size_t k) -> const Probe& {
        auto it = probes.find(k);
        if (it != probes.end()) return it->second;
        Alg21Result r = k_fwer_hurdle(d, k, cfg);
        res.rw_stepdown_iters += r.stepdown_iters;
        res.rw_degenerate_boot += r.degenerate;
        ++res.rw_outer_evals;
        Probe p;
        p.h = r.hurdle;
        p.n_above = static_cast<std::size_t>(
            std::count_if(d.abs_t.begin(), d.abs_t.end(), [&](double t) { return t > r.hurdle; }));
        p.pred = static_cast<double>(k) >
                 cfg.p_star * (static_cast<double>(p.n_above) + 1.0);
        return probes.emplace(k, p).first->second;
    };

    // The FDP rule's fixed point k = floor(p*(N(k)+1)) + 1 is the smallest k
    // whose predicate holds; the predicate is monotone along the bisection
    // range because the k-FWER hurdle is non-increasing in k.
    std::size_t k_final;
    if (probe(1).pred) {
        k_final = 1;
    } else if (!probe(k_cap).pred) {
        k_final = 1; // degenerate configuration: fall back to plain FWER
    } else {
        std::size_t lo = 1, hi = k_cap; // P(lo) false, P(hi) true
        while (hi - lo > 1) {
            std::size_t mid = lo + (hi - lo) / 2;
            if (probe(mid).pred)
                hi = mid;
            else
                lo = mid;
        }
        k_final = hi;
    }

    const Probe& final_probe = probe(k_final);
    res.rw_k = static_cast<int>(k_final);
    res.hurdle = final_probe.h;
    res.n_discoveries = final_probe.n_above;
    return res;
}

HurdleEvaluation evaluate_hurdles(const std::vector<StrategyStats>& stats,
                                  const ReturnsPanel& oos_panel,
                                  const std::vector<HurdleResult>& hurdles, int n_bins,
                                  double high_threshold) {
    if (n_bins < 1) throw std::invalid_argument("n_bins must be positive");
    std::map<std::string, std::vector<const StrategyStats*>> by_family;
    for (const auto& s : stats) by_family[s.family].push_back(&s);

    HurdleEvaluation ev;
    for (auto& [family, members] : by_family) {
        std::sort(members.begin(), members.end(),
                  [](const StrategyStats* a, const StrategyStats* b) {
                      if (a->tstat != b->tstat) return a->tstat < b->tstat;
                      return a->strategy_id < b->strategy_id;
                  });
        const std::size_t n = members.size();
        for (int g = 0; g < n_bins; ++g) {
            std::size_t lo = n * static_cast<std::size_t>(g) / n_bins;
            std::size_t hi = n * static_cast<std::size_t>(g + 1) / n_bins;
            if (hi <= lo) continue;
            HurdleBinRow row;
            row.family = family;
            row.bin = g;
            row.n_strategies = hi - lo;
            double t_sum = 0.0;
            for (std::size_t i = lo; i < hi; ++i) t_sum += members[i]->tstat;
            row.insample_t_mid = t_sum / static_cast<double>(hi - lo);

            // pooled equal-weight bin return per out-of-sample month
            std::map<Month, std::pair<double, std::size_t>> by_month;
            for (std::size_t i = lo; i < hi; ++i) {
                const StrategySeries* s = oos_panel.find(members[i]->strategy_id);
                if (!s) continue;
                for (const auto& o : s->obs) {
                    auto& slot = by_month[o.month];
                    slot.first += o.ret;
                    ++slot.second;
                }
            }
            std::vector<double> monthly;
            monthly.reserve(by_month.size());
            for (const auto& [m, acc] : by_month)
                monthly.push_back(acc.first / static_cast<double>(acc.second));
            MeanVar mv = mean_var(monthly);
            row.n_months = mv.n;
            row.oos_mean_ann = mv.mean * 12.0;
            row.oos_se_ann =
                mv.n > 1 ? std::sqrt(mv.var / static_cast<double>(mv.n)) * 12.0 : 0.0;
            ev.bins.push_back(std::move(row));
        }
    }

    for (const auto& h : hurdles) {
        HurdleCaptureRow cap;
        cap.method = h.method;
        cap.hurdle = h.hurdle;
        cap.n_discoveries = h.n_discoveries;
        cap.n_high_bins = 0;
        cap.n_high_captured = 0;
        for (const auto& b : ev.bins) {
            if (std::fabs(b.oos_mean_ann) >= high_threshold) {
                ++cap.n_high_bins;
                if (std::fabs(b.insample_t_mid) > h.hurdle) ++cap.n_high_captured;
            }
        }
        ev.captures.push_back(cap);
    }
    return ev;
}

void save_hurdle_bins(const std::vector<HurdleBinRow>& bins, const std::string& path) {
    CsvWriter w(path, {"family", "bin", "insample_t_mid", "oos_mean_ann", "oos_se_ann"});
    for (const auto& b : bins) {
        w.write_row({b.family, std::to_string(b.bin), format_double(b.insample_t_mid),
                     format_double(b.oos_mean_ann), format_double(b.oos_se_ann)});
    }
    w.close();
}

std::string hurdles_to_json(const std::vector<HurdleResult>& hurdles,
                            const std::vector<HurdleCaptureRow>& captures) {
    nlohmann::ordered_json j;
    j["hurdles"] = nlohmann::ordered_json::array();
    for (const auto& h : hurdles) {
        nlohmann::ordered_json e;
        e["method"] = h.method;
        e["q_star"] = h.q_star;
        if (!std::isnan(h.p_star)) e["p_star"] = h.p_star;
        if (std::isinf(h.hurdle))
            e["hurdle"] = "inf";
        else
            e["hurdle"] = h.hurdle;
        e["n_discoveries"] = h.n_discoveries;
        if (!std::isnan(h.pi)) e["pi"] = h.pi;
        if (h.method == "rw") {
            e["k"] = h.rw_k;
            e["outer_evals"] = h.rw_outer_evals;
            e["stepdown_iters"] = h.rw_stepdown_iters;
            e["degenerate_bootstraps"] = h.rw_degenerate_boot;
        } else {
            e["n_candidates"] = h.n_candidates;
        }
        j["hurdles"].push_back(std::move(e));
    }
    if (!captures.empty()) {
        j["captures"] = nlohmann::ordered_json::array();
        for (const auto& c : captures) {
            nlohmann::ordered_json e;
            e["method"] = c.method;
            e["n_high_bins"] = c.n_high_bins;
            e["n_high_captured"] = c.n_high_captured;
            j["captures"].push_back(std::move(e));
        }
    }
    return j.dump(2);
}

} // namespace ebmine
