#include "ebmine/qmlfit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ebmine/mathutil.hpp"
#include "ebmine/optim.hpp"
#include "ebmine/parallel.hpp"
#include "ebmine/rng.hpp"

namespace ebmine {

namespace {

// lambda is searched on a logit coordinate; this range keeps it in
// [~1e-4, ~1-1e-4] and the optimizer off the boundary.
constexpr double kLogitLim = 9.2103403719761827;

double logit(double p) { return std::log(p / (1.0 - p)); }
double inv_logit(double l) { return 1.0 / (1.0 + std::exp(-l)); }

FamilyParams params_from_coords(const std::vector<double>& u) {
    FamilyParams p;
    p.theta1 = u[0];
    p.sigma1 = u[1];
    p.theta2 = u[2];
    p.sigma2 = u[3];
    p.lambda = inv_logit(u[4]);
    return p;
}

std::vector<double> coords_from_params(const FamilyParams& p) {
    double lam = std::min(std::max(p.lambda, 1e-4), 1.0 - 1e-4);
    return {p.theta1, p.sigma1, p.theta2, p.sigma2, logit(lam)};
}

} // namespace

FitResult fit_family(std::span<const double> tstats, const FitConfig& cfg) {
    if (tstats.size() < cfg.min_tstats)
        throw std::invalid_argument("fit_family needs at least " +
                                    std::to_string(cfg.min_tstats) + " t-stats, got " +
                                    std::to_string(tstats.size()));
    if (cfg.n_starts < 1) throw std::invalid_argument("n_starts must be positive");
    for (double t : tstats)
        if (!std::isfinite(t)) throw std::invalid_argument("non-finite t-stat");

    const FitBounds& b = cfg.bounds;
    std::vector<double> lo = {b.theta_lo, b.sigma_lo, b.theta_lo, b.sigma_lo, -kLogitLim};
    std::vector<double> hi = {b.theta_hi, b.sigma_hi, b.theta_hi, b.sigma_hi, kLogitLim};

    // Summation order is fixed by sorting so permuting the input cannot move
    // the optimizer through float rounding.
    std::vector<double> data(tstats.begin(), tstats.end());
    std::sort(data.begin(), data.end());
    auto objective = [&data](const std::vector<double>& u) {
        return -log_likelihood(data, params_from_coords(u));
    };

    MeanVar mv = mean_var(data);
    double sd = std::sqrt(std::max(mv.var, 1e-12));
    double excess = std::sqrt(std::max(mv.var - 1.0, 0.0));
    auto clamp_to = [](double v, double l, double h) { return std::min(std::max(v, l), h); };

    // starts: null-like, method-of-moments, then quasi-random points over a
    // data-adaptive box (so the start set translates with the data)
    std::vector<FamilyParams> starts;
    {
        FamilyParams s;
        s.theta1 = 0.0;
        s.sigma1 = clamp_to(0.0, b.sigma_lo, b.sigma_hi);
        s.theta2 = 0.0;
        s.sigma2 = clamp_to(excess, b.sigma_lo, b.sigma_hi);
        s.lambda = 0.5;
        starts.push_back(s);
    }
    if (cfg.n_starts > 1) {
        FamilyParams s;
        s.theta1 = clamp_to(mv.mean, b.theta_lo, b.theta_hi);
        s.sigma1 = clamp_to(0.3 * std::max(excess, 0.2), b.sigma_lo, b.sigma_hi);
        s.theta2 = clamp_to(mv.mean, b.theta_lo, b.theta_hi);
        s.sigma2 = clamp_to(1.2 * std::max(excess, 0.2), b.sigma_lo, b.sigma_hi);
        s.lambda = 0.5;
        starts.push_back(s);
    }
    for (int k = static_cast<int>(starts.size()); k < cfg.n_starts; ++k) {
        RngStream rng(cfg.seed, "qml-start", static_cast<std::uint64_t>(k));
        FamilyParams s;
        s.theta1 = clamp_to(mv.mean + (2.0 * rng.next_uniform() - 1.0) * 2.0 * sd, b.theta_lo,
                            b.theta_hi);
        s.sigma1 = clamp_to(rng.next_uniform() * std::min(2.5 * sd, b.sigma_hi), b.sigma_lo,
                            b.sigma_hi);
        s.theta2 = clamp_to(mv.mean + (2.0 * rng.next_uniform() - 1.0) * 2.0 * sd, b.theta_lo,
                            b.theta_hi);
        s.sigma2 = clamp_to(rng.next_uniform() * std::min(2.5 * sd, b.sigma_hi), b.sigma_lo,
                            b.sigma_hi);
        s.lambda = 0.05 + 0.9 * rng.next_uniform();
        starts.push_back(s);
    }

    std::vector<StartSummary> summaries(starts.size());
    parallel_for(starts.size(), [&](std::size_t k) {
        OptimResult r = minimize_box(objective, lo, hi, coords_from_params(starts[k]),
                                     cfg.max_evals, cfg.tol);
        StartSummary& s = summaries[k];
        s.start_index = static_cast<int>(k);
        s.start = starts[k];
        s.final_params = params_from_coords(r.x);
        s.loglik = -r.fx;
        s.n_evals = r.n_evals;
        s.converged = r.converged;
    }, cfg.n_threads);

    std::size_t best = 0;
    for (std::size_t k = 1; k < summaries.size(); ++k)
        if (summaries[k].loglik > summaries[best].loglik) best = k;

    FitResult out;
    out.params = canonicalize(summaries[best].final_params);
    out.loglik = log_likelihood(data, out.params);
    out.n_evals = 0;
    for (const auto& s : summaries) out.n_evals += s.n_evals;
    out.converged = summaries[best].converged;
    out.best_start = summaries[best].start_index;
    out.starts = std::move(summaries);
    return out;
}

FitReport fit_all(const std::vector<StrategyStats>& stats, const FitConfig& cfg) {
    std::map<std::string, std::vector<double>> by_family;
    for (const auto& s : stats) by_family[s.family].push_back(s.tstat);

    FitReport report;
    for (const auto& [family, tstats] : by_family) {
        if (tstats.size() < cfg.min_tstats) {
            report.model.families[family] = null_params();
            report.fallback_families.push_back(family);
            continue;
        }
        FitResult r = fit_family(tstats, cfg);
        report.model.families[family] = r.params;
        report.fits[family] = std::move(r);
    }
    return report;
}

} // namespace ebmine
