#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "ebmine/mathutil.hpp"
#include "ebmine/prior.hpp"
#include "ebmine/qmlfit.hpp"
#include "ebmine/rng.hpp"

using namespace ebmine;

namespace {

std::vector<double> draw_tstats(const FamilyParams& p, std::size_t n, std::uint64_t seed,
                                const char* stream) {
    RngStream rng(seed, stream);
    std::vector<double> out(n);
    for (double& t : out) t = sample_mu(p, rng) + rng.next_normal();
    return out;
}

double marginal_variance(const FamilyParams& p) {
    double m = p.lambda * p.theta1 + (1.0 - p.lambda) * p.theta2;
    double second = p.lambda * (p.sigma1 * p.sigma1 + 1.0 + p.theta1 * p.theta1) +
                    (1.0 - p.lambda) * (p.sigma2 * p.sigma2 + 1.0 + p.theta2 * p.theta2);
    return second - m * m;
}

double ks_against_marginal(std::vector<double> xs, const FamilyParams& p) {
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    std::size_t n = xs.size();
    for (std::size_t i = 0; i < n; ++i) {
        double f = marginal_cdf(xs[i], p);
        d = std::max(d, std::fabs(f - static_cast<double>(i + 1) / n));
        d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
    }
    return d;
}

FamilyParams separated_params() {
    FamilyParams p;
    p.theta1 = -2.0;
    p.sigma1 = 0.5;
    p.theta2 = 3.0;
    p.sigma2 = 1.0;
    p.lambda = 0.4;
    return p;
}

} // namespace

TEST_CASE("fit result is internally consistent") {
    FamilyParams truth = separated_params();
    std::vector<double> data = draw_tstats(truth, 3000, 1, "fit-consistent");
    FitConfig cfg;
    cfg.n_starts = 6;
    FitResult r = fit_family(data, cfg);

    CHECK(r.starts.size() == 6);
    CHECK(r.best_start >= 0);
    CHECK(r.best_start < 6);
    double best_ll = r.starts[0].loglik;
    for (const auto& s : r.starts) best_ll = std::max(best_ll, s.loglik);
    CHECK(r.starts[static_cast<std::size_t>(r.best_start)].loglik == best_ll);
    // reported loglik re-evaluates the canonicalized winner; summation order
    // inside the mixture density can move the last few ulps
    CHECK(r.loglik == doctest::Approx(best_ll).epsilon(1e-12));
    CHECK(r.loglik == doctest::Approx(log_likelihood(data, r.params)).epsilon(1e-14));

    const FitBounds& b = cfg.bounds;
    CHECK(r.params.theta1 >= b.theta_lo);
    CHECK(r.params.theta1 <= b.theta_hi);
    CHECK(r.params.theta2 >= b.theta_lo);
    CHECK(r.params.theta2 <= b.theta_hi);
    CHECK(r.params.sigma1 >= b.sigma_lo);
    CHECK(r.params.sigma1 <= r.params.sigma2); // canonical order
    CHECK(r.params.sigma2 <= b.sigma_hi);
    CHECK(r.params.lambda >= 0.0);
    CHECK(r.params.lambda <= 1.0);
    CHECK(r.n_evals > 0);
}

TEST_CASE("fit rejects bad inputs") {
    FitConfig cfg;
    std::vector<double> few(10, 0.5);
    CHECK_THROWS_AS(fit_family(few, cfg), std::invalid_argument);

    FitConfig relaxed;
    relaxed.min_tstats = 5;
    relaxed.n_starts = 2;
    relaxed.max_evals = 200;
    CHECK_NOTHROW(fit_family(std::vector<double>(60, 0.0), relaxed));

    std::vector<double> bad(100, 0.1);
    bad[50] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(fit_family(bad, FitConfig{}), std::invalid_argument);

    FitConfig zero;
    zero.n_starts = 0;
    CHECK_THROWS_AS(fit_family(std::vector<double>(100, 0.1), zero), std::invalid_argument);
}

TEST_CASE("adding restarts never lowers the best loglik") {
    std::vector<double> data = draw_tstats(separated_params(), 2000, 2, "fit-monotone");
    FitConfig small, large;
    small.n_starts = 3;
    large.n_starts = 8;
    double ll3 = fit_family(data, small).loglik;
    double ll8 = fit_family(data, large).loglik;
    CHECK(ll8 >= ll3 - 1e-9); // restart list is prefix-stable in n_starts
}

TEST_CASE("fit is permutation invariant, deterministic, and thread-count independent") {
    std::vector<double> data = draw_tstats(separated_params(), 1500, 3, "fit-perm");
    FitConfig cfg;
    cfg.n_starts = 5;

    FitResult a = fit_family(data, cfg);
    FitResult b = fit_family(data, cfg);
    CHECK(a.params == b.params);
    CHECK(a.loglik == b.loglik);
    CHECK(a.best_start == b.best_start);

    std::vector<double> shuffled = data;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(99));
    FitResult c = fit_family(shuffled, cfg);
    CHECK(a.params == c.params);
    CHECK(a.loglik == c.loglik);

    FitConfig one = cfg, four = cfg;
    one.n_threads = 1;
    four.n_threads = 4;
    FitResult d1 = fit_family(data, one);
    FitResult d4 = fit_family(data, four);
    CHECK(d1.params == d4.params);
    CHECK(d1.loglik == d4.loglik);
    CHECK(d1.best_start == d4.best_start);
}

TEST_CASE("null data fits to a unit-variance marginal") {
    std::vector<double> data = draw_tstats(null_params(), 20000, 4, "fit-null");
    FitConfig cfg;
    cfg.n_starts = 6;
    FitResult r = fit_family(data, cfg);
    double v = marginal_variance(r.params);
    CHECK(v >= 0.95);
    CHECK(v <= 1.05);
    double mean = r.params.lambda * r.params.theta1 + (1.0 - r.params.lambda) * r.params.theta2;
    CHECK(std::fabs(mean) < 0.05);
}

TEST_CASE("fit recovers a known two-component mixture") {
    FamilyParams truth;
    truth.sigma1 = 0.1;
    truth.sigma2 = 2.0;
    truth.lambda = 0.5;
    std::vector<double> data = draw_tstats(truth, 20000, 5, "fit-recover");
    FitConfig cfg;
    cfg.n_starts = 8;
    FitResult r = fit_family(data, cfg);
    CHECK(r.loglik >= log_likelihood(data, truth) - 1e-3);
    CHECK(ks_against_marginal(data, r.params) < 0.02);
}

TEST_CASE("fit is approximately location equivariant on structured data") {
    // the null-anchored start is not translation-equivariant, so agreement is
    // limited by optimizer tolerance rather than exact; structured data keeps
    // that start from winning
    std::vector<double> data = draw_tstats(separated_params(), 5000, 6, "fit-shift");
    const double shift = 0.25;
    std::vector<double> shifted = data;
    for (double& t : shifted) t += shift;

    FitConfig cfg;
    cfg.n_starts = 8;
    FitResult r0 = fit_family(data, cfg);
    FitResult r1 = fit_family(shifted, cfg);
    CHECK(std::fabs(r1.params.theta1 - (r0.params.theta1 + shift)) < 2e-3);
    CHECK(std::fabs(r1.params.theta2 - (r0.params.theta2 + shift)) < 2e-3);
    CHECK(std::fabs(r1.params.sigma1 - r0.params.sigma1) < 2e-3);
    CHECK(std::fabs(r1.params.sigma2 - r0.params.sigma2) < 2e-3);
    CHECK(std::fabs(r1.params.lambda - r0.params.lambda) < 2e-3);
}

TEST_CASE("fit_all fits large families and falls back on small ones") {
    std::vector<StrategyStats> stats;
    auto push_family = [&](const std::string& fam, const std::vector<double>& ts) {
        for (std::size_t i = 0; i < ts.size(); ++i) {
            StrategyStats s;
            s.strategy_id = fam + "_" + std::to_string(i);
            s.family = fam;
            s.window_start = make_month(2000, 1);
            s.window_end = make_month(2019, 12);
            s.n_obs = 240;
            s.mean_ret = 0.01;
            s.sd_ret = 0.05;
            s.se = 0.05 / std::sqrt(240.0);
            s.tstat = ts[i];
            stats.push_back(s);
        }
    };
    push_family("acct_ew", draw_tstats(separated_params(), 400, 7, "fitall-big"));
    push_family("ticker_ew", std::vector<double>(10, 1.0));

    FitConfig cfg;
    cfg.n_starts = 4;
    FitReport rep = fit_all(stats, cfg);
    REQUIRE(rep.model.families.count("acct_ew") == 1);
    REQUIRE(rep.model.families.count("ticker_ew") == 1);
    CHECK(rep.fits.count("acct_ew") == 1);
    CHECK(rep.fits.count("ticker_ew") == 0);
    REQUIRE(rep.fallback_families.size() == 1);
    CHECK(rep.fallback_families[0] == "ticker_ew");
    CHECK(rep.model.families.at("ticker_ew") == null_params());
    CHECK(marginal_variance(rep.model.families.at("acct_ew")) > 1.5);
}
