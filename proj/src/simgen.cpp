#include "ebmine/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ebmine/csv.hpp"
#include "ebmine/ebpredict.hpp"
#include "ebmine/mathutil.hpp"
#include "ebmine/parallel.hpp"
#include "ebmine/rng.hpp"

namespace ebmine {

namespace {

nlohmann::ordered_json params_to_json(const FamilyParams& p) {
    return {{"theta1", p.theta1},
            {"sigma1", p.sigma1},
            {"theta2", p.theta2},
            {"sigma2", p.sigma2},
            {"lambda", p.lambda}};
}

FamilyParams params_from_json(const nlohmann::json& v) {
    FamilyParams p;
    p.theta1 = v.at("theta1").get<double>();
    p.sigma1 = v.at("sigma1").get<double>();
    p.theta2 = v.at("theta2").get<double>();
    p.sigma2 = v.at("sigma2").get<double>();
    p.lambda = v.at("lambda").get<double>();
    validate_params(p);
    return p;
}

void validate_generator_spec(const GeneratorSpec& spec) {
    if (spec.families.empty()) throw std::invalid_argument("generator spec has no families");
    if (!(spec.factor_loading >= 0.0 && spec.factor_loading < 1.0))
        throw std::invalid_argument("factor_loading must be in [0, 1)");
    std::set<std::string> seen;
    for (const auto& f : spec.families) {
        if (f.family.empty()) throw std::invalid_argument("family label must be non-empty");
        if (!seen.insert(f.family).second)
            throw std::invalid_argument("duplicate family '" + f.family + "' in generator spec");
        validate_params(f.params);
        if (f.n_strategies < 1) throw std::invalid_argument("n_strategies must be positive");
        if (f.n_months < 2) throw std::invalid_argument("n_months must be at least 2");
        if (!(f.vol_lo > 0.0) || f.vol_hi < f.vol_lo)
            throw std::invalid_argument("need 0 < vol_lo <= vol_hi");
        if (f.nobs_lo != 0 || f.nobs_hi != 0) {
            if (f.nobs_lo < 2 || f.nobs_hi < f.nobs_lo || f.nobs_hi > f.n_months)
                throw std::invalid_argument("need 2 <= nobs_lo <= nobs_hi <= n_months");
        }
    }
}

} // namespace

std::string generator_spec_to_json(const GeneratorSpec& spec) {
    nlohmann::ordered_json j;
    j["end_month"] = format_month(spec.end_month);
    j["factor_loading"] = spec.factor_loading;
    j["seed"] = spec.seed;
    j["families"] = nlohmann::ordered_json::array();
    for (const auto& f : spec.families) {
        nlohmann::ordered_json e;
        e["family"] = f.family;
        e["params"] = params_to_json(f.params);
        e["n_strategies"] = f.n_strategies;
        e["n_months"] = f.n_months;
        e["vol_lo"] = f.vol_lo;
        e["vol_hi"] = f.vol_hi;
        if (f.nobs_lo != 0 || f.nobs_hi != 0) {
            e["nobs_lo"] = f.nobs_lo;
            e["nobs_hi"] = f.nobs_hi;
        }
        j["families"].push_back(std::move(e));
    }
    return j.dump(2);
}

GeneratorSpec generator_spec_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    GeneratorSpec spec;
    spec.end_month = parse_month(j.at("end_month").get<std::string>());
    spec.factor_loading = j.value("factor_loading", 0.0);
    spec.seed = j.value("seed", 0ull);
    for (const auto& e : j.at("families")) {
        FamilyGenSpec f;
        f.family = e.at("family").get<std::string>();
        f.params = params_from_json(e.at("params"));
        f.n_strategies = e.at("n_strategies").get<int>();
        f.n_months = e.at("n_months").get<int>();
        f.vol_lo = e.at("vol_lo").get<double>();
        f.vol_hi = e.at("vol_hi").get<double>();
        f.nobs_lo = e.value("nobs_lo", 0);
        f.nobs_hi = e.value("nobs_hi", 0);
        spec.families.push_back(std::move(f));
    }
    validate_generator_spec(spec);
    return spec;
}

GeneratorSpec load_generator_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return generator_spec_from_json(ss.str());
}

void save_generator_spec(const GeneratorSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << generator_spec_to_json(spec) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
}

GeneratedPanel generate_panel(const GeneratorSpec& spec) {
    validate_generator_spec(spec);
    GeneratedPanel out;

    int max_months = 0;
    for (const auto& f : spec.families) max_months = std::max(max_months, f.n_months);
    std::vector<double> factor(static_cast<std::size_t>(max_months), 0.0);
    if (spec.factor_loading > 0.0) {
        // one shared shock per calendar month, indexed back from end_month
        for (int m = 0; m < max_months; ++m) {
            RngStream rng(spec.seed, "gen-factor", static_cast<std::uint64_t>(m));
            factor[static_cast<std::size_t>(m)] = rng.next_normal();
        }
    }
    const double load = spec.factor_loading;
    const double resid = std::sqrt(1.0 - load * load);

    for (const auto& f : spec.families) {
        int id_width = 1;
        for (int v = f.n_strategies - 1; v >= 10; v /= 10) ++id_width;
        for (int i = 0; i < f.n_strategies; ++i) {
            RngStream rng(spec.seed, "gen-" + f.family, static_cast<std::uint64_t>(i));
            double mu = sample_mu(f.params, rng);
            double vol = f.vol_lo;
            if (f.vol_hi > f.vol_lo) vol += (f.vol_hi - f.vol_lo) * rng.next_uniform();
            int n_obs = f.n_months;
            if (f.nobs_lo != 0)
                n_obs = f.nobs_lo +
                        static_cast<int>(rng.next_below(
                            static_cast<std::uint64_t>(f.nobs_hi - f.nobs_lo + 1)));
            double monthly_mean = mu * vol / std::sqrt(static_cast<double>(n_obs));

            std::string id = f.family + "_s";
            std::string num = std::to_string(i);
            id.append(static_cast<std::size_t>(id_width) - num.size(), '0');
            id += num;

            Month start = spec.end_month - n_obs + 1;
            for (Month m = start; m <= spec.end_month; ++m) {
                double shock = resid * rng.next_normal();
                if (load > 0.0) shock += load * factor[static_cast<std::size_t>(spec.end_month - m)];
                out.panel.add(id, f.family, m, monthly_mean + vol * shock);
            }
            out.truth.push_back({id, f.family, mu, monthly_mean, vol, n_obs});
        }
    }
    out.panel.finalize();
    return out;
}

void save_truth(const std::vector<TruthRow>& truth, const std::string& path) {
    CsvWriter w(path, {"strategy_id", "family", "mu_t", "true_monthly_mean", "vol", "n_obs"});
    for (const auto& t : truth) {
        w.write_row({t.strategy_id, t.family, format_double(t.mu_t),
                     format_double(t.true_monthly_mean), format_double(t.vol),
                     std::to_string(t.n_obs)});
    }
    w.close();
}

std::vector<TruthRow> load_truth(const std::string& path) {
    CsvReader reader(path);
    std::size_t c_id = reader.column("strategy_id");
    std::size_t c_fam = reader.column("family");
    std::size_t c_mu = reader.column("mu_t");
    std::size_t c_mean = reader.column("true_monthly_mean");
    std::size_t c_vol = reader.column("vol");
    std::size_t c_n = reader.column("n_obs");
    std::vector<TruthRow> out;
    std::vector<std::string> row;
    while (reader.next(row)) {
        std::size_t line = reader.line_number();
        TruthRow t;
        t.strategy_id = row[c_id];
        t.family = row[c_fam];
        t.mu_t = parse_double(row[c_mu], line, "mu_t");
        t.true_monthly_mean = parse_double(row[c_mean], line, "true_monthly_mean");
        t.vol = parse_double(row[c_vol], line, "vol");
        t.n_obs = static_cast<int>(parse_long(row[c_n], line, "n_obs"));
        out.push_back(std::move(t));
    }
    return out;
}

FdpSimResult fdp_simulate(const FamilyParams& params, int n_strat, double hurdle, int n_sims,
                          std::uint64_t seed, const FdpConfig& cfg) {
    validate_params(params);
    if (n_strat < 1) throw std::invalid_argument("n_strat must be positive");
    if (n_sims < 1) throw std::invalid_argument("n_sims must be positive");
    if (!(hurdle >= 0.0)) throw std::invalid_argument("hurdle must be non-negative");
    if (!(cfg.null_band >= 0.0)) throw std::invalid_argument("null_band must be non-negative");
    if (!(cfg.bin_width > 0.0)) throw std::invalid_argument("bin_width must be positive");
    if (!(cfg.mu_max > cfg.null_band)) throw std::invalid_argument("mu_max must exceed null_band");

    const int n_inner = static_cast<int>(
        std::ceil((cfg.mu_max - cfg.null_band) / cfg.bin_width));
    const int n_bins = 1 + n_inner + 1; // null band, interior, overflow

    std::vector<std::vector<double>> shares(
        static_cast<std::size_t>(n_sims), std::vector<double>(static_cast<std::size_t>(n_bins)));
    std::vector<double> fdp(static_cast<std::size_t>(n_sims), 0.0);
    std::vector<std::size_t> discoveries(static_cast<std::size_t>(n_sims), 0);

    parallel_for(static_cast<std::size_t>(n_sims), [&](std::size_t s) {
        RngStream rng(seed, "fdp", s);
        std::vector<std::size_t> counts(static_cast<std::size_t>(n_bins), 0);
        std::size_t n_disc = 0;
        for (int i = 0; i < n_strat; ++i) {
            double mu = sample_mu(params, rng);
            double t = mu + rng.next_normal();
            if (std::fabs(t) <= hurdle) continue;
            ++n_disc;
            double v = std::fabs(mu);
            int bin;
            if (v <= cfg.null_band) {
                bin = 0;
            } else {
                bin = static_cast<int>(std::ceil((v - cfg.null_band) / cfg.bin_width));
                if (bin > n_inner) bin = n_inner + 1;
            }
            ++counts[static_cast<std::size_t>(bin)];
        }
        discoveries[s] = n_disc;
        if (n_disc > 0) {
            for (int b = 0; b < n_bins; ++b)
                shares[s][static_cast<std::size_t>(b)] =
                    static_cast<double>(counts[static_cast<std::size_t>(b)]) /
                    static_cast<double>(n_disc);
            fdp[s] = shares[s][0];
        }
    }, cfg.n_threads);

    FdpSimResult res;
    std::vector<std::size_t> kept;
    for (std::size_t s = 0; s < static_cast<std::size_t>(n_sims); ++s) {
        if (discoveries[s] == 0) {
            ++res.zero_discovery_sims;
            if (cfg.exclude_zero_discovery_sims) continue;
        }
        kept.push_back(s);
    }
    if (kept.empty()) throw std::runtime_error("every simulation had zero discoveries");

    double fdp_sum = 0.0, disc_sum = 0.0;
    std::vector<double> fdp_kept;
    fdp_kept.reserve(kept.size());
    for (std::size_t s : kept) {
        fdp_sum += fdp[s];
        disc_sum += static_cast<double>(discoveries[s]);
        fdp_kept.push_back(fdp[s]);
        res.fdp_per_sim.push_back(fdp[s]);
    }
    res.n_sims = kept.size();
    res.mean_fdp = fdp_sum / static_cast<double>(kept.size());
    res.mean_discoveries = disc_sum / static_cast<double>(kept.size());
    res.fdp_p05 = quantile_nearest_rank(fdp_kept, 0.05);
    res.fdp_p95 = quantile_nearest_rank(fdp_kept, 0.95);

    for (int b = 0; b < n_bins; ++b) {
        FdpBin bin;
        if (b == 0) {
            bin.left = 0.0;
            bin.right = cfg.null_band;
        } else if (b <= n_inner) {
            bin.left = cfg.null_band + (b - 1) * cfg.bin_width;
            bin.right = cfg.null_band + b * cfg.bin_width;
        } else {
            bin.left = cfg.null_band + n_inner * cfg.bin_width;
            bin.right = std::numeric_limits<double>::infinity();
        }
        double sum = 0.0;
        std::vector<double> vals;
        vals.reserve(kept.size());
        for (std::size_t s : kept) {
            sum += shares[s][static_cast<std::size_t>(b)];
            vals.push_back(shares[s][static_cast<std::size_t>(b)]);
        }
        bin.mean_share = sum / static_cast<double>(kept.size());
        bin.share_p05 = quantile_nearest_rank(vals, 0.05);
        bin.share_p95 = quantile_nearest_rank(std::move(vals), 0.95);
        res.bins.push_back(bin);
    }
    return res;
}

std::string fdp_result_to_json(const FdpSimResult& r) {
    nlohmann::ordered_json j;
    j["mean_fdp"] = r.mean_fdp;
    j["fdp_p05"] = r.fdp_p05;
    j["fdp_p95"] = r.fdp_p95;
    j["mean_discoveries"] = r.mean_discoveries;
    j["n_sims"] = r.n_sims;
    j["zero_discovery_sims"] = r.zero_discovery_sims;
    return j.dump(2);
}

void save_fdp_bins(const FdpSimResult& r, const std::string& path) {
    CsvWriter w(path, {"bin_left", "bin_right", "mean_share", "share_p05", "share_p95"});
    for (const auto& b : r.bins) {
        w.write_row({format_double(b.left), format_double(b.right), format_double(b.mean_share),
                     format_double(b.share_p05), format_double(b.share_p95)});
    }
    w.close();
}

namespace {

// Adaptive Simpson with an absolute tolerance. The first `force` levels
// always subdivide: early acceptance is unsafe when the initial probes all
// miss the integrand's mass. Segments that exhaust the depth budget record
// their residual error so the caller can reject the run.
double simpson_segment(const std::function<double(double)>& f, double a, double b, double fa,
                       double fm, double fb, double whole, double tol, int depth, int force,
                       double* unmet_err) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m);
    double rm = 0.5 * (m + b);
    double flm = f(lm);
    double frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (force <= 0 && std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth <= 0) {
        *unmet_err = std::max(*unmet_err, std::fabs(delta) / 15.0);
        return left + right + delta / 15.0;
    }
    return simpson_segment(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, force - 1,
                           unmet_err) +
           simpson_segment(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, force - 1,
                           unmet_err);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
    double fa = f(a);
    double fb = f(b);
    double fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    double unmet = 0.0;
    double v = simpson_segment(f, a, b, fa, fm, fb, whole, tol, 60, 2, &unmet);
    if (unmet > 0.0)
        throw std::runtime_error("quadrature did not converge; achieved tolerance " +
                                 format_double(unmet) + " vs requested " + format_double(tol));
    return v;
}

struct OracleMoments {
    double m0 = 0.0; // marginal density
    double m1 = 0.0; // integral of mu * joint
    double m2 = 0.0; // integral of mu^2 * joint
};

OracleMoments oracle_moments(double t, const FamilyParams& p, double tol) {
    validate_params(p);
    if (!std::isfinite(t)) throw std::invalid_argument("non-finite t-stat");
    OracleMoments out;
    double lam[2] = {p.lambda, 1.0 - p.lambda};
    double theta[2] = {p.theta1, p.theta2};
    double sigma[2] = {p.sigma1, p.sigma2};
    for (int k = 0; k < 2; ++k) {
        if (lam[k] <= 0.0) continue;
        if (sigma[k] == 0.0) {
            double d = norm_pdf(t - theta[k]);
            out.m0 += lam[k] * d;
            out.m1 += lam[k] * d * theta[k];
            out.m2 += lam[k] * d * theta[k] * theta[k];
            continue;
        }
        double s2 = sigma[k] * sigma[k];
        auto joint = [&](double mu) { return norm_pdf(t - mu) * norm_pdf(mu, theta[k], s2); };
        double lo = std::min(theta[k] - 13.0 * sigma[k], t - 13.0);
        double hi = std::max(theta[k] + 13.0 * sigma[k], t + 13.0);
        // split at the component posterior mean, where the mass concentrates
        double mid = (s2 * t + theta[k]) / (s2 + 1.0);
        mid = std::min(std::max(mid, lo), hi);
        // One absolute error budget, tol * scale, for all three moment
        // integrals: the posterior mean and variance divide by m0 ~ scale, so
        // each moment's quadrature error enters the ratio undamped. Inflating
        // the budget with the integrand's span would leak that factor into
        // the posterior. Segment boundaries bracket the posterior bump at
        // mid +- 3 posterior sd: mu-weighted integrands vanish at mid itself,
        // so a [lo, mid] split alone can hide the whole bump from the first
        // probes.
        double scale = norm_pdf(t, theta[k], s2 + 1.0) + 1e-300;
        double s_post = sigma[k] / std::sqrt(s2 + 1.0);
        double cuts[5] = {lo, std::max(mid - 3.0 * s_post, lo), mid,
                          std::min(mid + 3.0 * s_post, hi), hi};
        auto integrate = [&](const std::function<double(double)>& f) {
            double acc = 0.0;
            for (int c = 0; c < 4; ++c)
                if (cuts[c] < cuts[c + 1])
                    acc += adaptive_simpson(f, cuts[c], cuts[c + 1], 0.25 * tol * scale);
            return acc;
        };
        out.m0 += lam[k] * integrate(joint);
        out.m1 += lam[k] * integrate([&](double mu) { return mu * joint(mu); });
        out.m2 += lam[k] * integrate([&](double mu) { return mu * mu * joint(mu); });
    }
    if (!(out.m0 > 0.0)) throw std::runtime_error("oracle underflow: marginal density is zero");
    return out;
}

} // namespace

double oracle_posterior_mean(double t, const FamilyParams& p, double tol) {
    OracleMoments m = oracle_moments(t, p, tol);
    return m.m1 / m.m0;
}

double oracle_posterior_var(double t, const FamilyParams& p, double tol) {
    OracleMoments m = oracle_moments(t, p, tol);
    double mean = m.m1 / m.m0;
    double var = m.m2 / m.m0 - mean * mean;
    return var < 0.0 ? 0.0 : var;
}

Prop1Result prop1_harness(const GeneratorSpec& spec, const Prop1Config& cfg) {
    if (spec.families.size() != 1)
        throw std::invalid_argument("selection-equivalence harness needs exactly one family");
    const FamilyGenSpec& fam = spec.families[0];
    if (!cfg.allow_condition_violation) {
        if (fam.vol_lo != fam.vol_hi)
            throw std::invalid_argument("equivalence conditions need constant volatility");
        if (fam.nobs_lo != 0 || fam.nobs_hi != 0)
            throw std::invalid_argument("equivalence conditions need equal observation counts");
        if (fam.params.theta1 != 0.0 || fam.params.theta2 != 0.0)
            throw std::invalid_argument("equivalence conditions need a zero-centered prior");
        bool var1 = fam.params.lambda > 0.0 && fam.params.sigma1 > 0.0;
        bool var2 = fam.params.lambda < 1.0 && fam.params.sigma2 > 0.0;
        if (!var1 && !var2)
            throw std::invalid_argument("equivalence conditions need a positive-variance prior");
    }
    if (!(cfg.top_pct > 0.0 && cfg.top_pct <= 1.0))
        throw std::invalid_argument("top_pct must be in (0, 1]");
    if (cfg.n_reps < 1) throw std::invalid_argument("n_reps must be positive");

    Prop1Result res;
    res.overlaps.assign(static_cast<std::size_t>(cfg.n_reps), 0.0);

    parallel_for(static_cast<std::size_t>(cfg.n_reps), [&](std::size_t rep) {
        GeneratorSpec s = spec;
        s.seed = RngStream(cfg.seed, "prop1-rep", rep).next_u64();
        GeneratedPanel gp = generate_panel(s);
        std::vector<StrategyStats> stats = summarize(gp.panel, 2);

        FamilyParams params = fam.params;
        if (cfg.mode == Prop1Mode::fitted) {
            std::vector<double> tstats;
            tstats.reserve(stats.size());
            for (const auto& st : stats) tstats.push_back(st.tstat);
            FitConfig fc = cfg.fit;
            fc.seed = RngStream(cfg.seed, "prop1-fit", rep).next_u64();
            params = fit_family(tstats, fc).params;
        }

        auto top_set = [&](bool eb) {
            std::vector<std::pair<double, const StrategyStats*>> ranked;
            ranked.reserve(stats.size());
            for (const auto& st : stats) {
                double m = eb ? std::fabs(posterior_mean_t(st.tstat, params)) : std::fabs(st.tstat);
                ranked.push_back({m / std::sqrt(static_cast<double>(st.n_obs)), &st});
            }
            std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second->strategy_id < b.second->strategy_id;
            });
            std::size_t k = static_cast<std::size_t>(
                std::ceil(cfg.top_pct * static_cast<double>(ranked.size())));
            if (k > ranked.size()) k = ranked.size();
            std::set<std::string> ids;
            for (std::size_t i = 0; i < k; ++i) ids.insert(ranked[i].second->strategy_id);
            return ids;
        };

        std::set<std::string> eb_set = top_set(true);
        std::set<std::string> naive_set = top_set(false);
        std::size_t inter = 0;
        for (const auto& id : eb_set) inter += naive_set.count(id);
        std::size_t uni = eb_set.size() + naive_set.size() - inter;
        res.overlaps[rep] = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }, 0);

    double sum = 0.0;
    double mn = 1.0;
    for (double v : res.overlaps) {
        sum += v;
        mn = std::min(mn, v);
    }
    res.mean_overlap = sum / static_cast<double>(res.overlaps.size());
    res.min_overlap = mn;
    return res;
}

} // namespace ebmine
