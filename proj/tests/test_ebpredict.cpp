#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <vector>

#include "ebmine/ebpredict.hpp"
#include "ebmine/mathutil.hpp"

using namespace ebmine;

namespace {

FamilyParams mix_params() {
    FamilyParams p;
    p.theta1 = -1.0;
    p.sigma1 = 0.5;
    p.theta2 = 2.0;
    p.sigma2 = 1.5;
    p.lambda = 0.3;
    return p;
}

FamilyParams single_normal(double theta, double sigma) {
    FamilyParams p;
    p.theta1 = theta;
    p.sigma1 = sigma;
    p.theta2 = theta;
    p.sigma2 = sigma;
    p.lambda = 1.0;
    return p;
}

StrategyStats stats_with(double tstat, double se, std::size_t n_obs) {
    StrategyStats s;
    s.strategy_id = "s1";
    s.family = "acct_ew";
    s.window_start = make_month(2000, 1);
    s.window_end = make_month(2019, 12);
    s.n_obs = n_obs;
    s.se = se;
    s.sd_ret = se * std::sqrt(static_cast<double>(n_obs));
    s.mean_ret = tstat * se;
    s.tstat = tstat;
    return s;
}

} // namespace

TEST_CASE("single-component posterior matches the conjugate formula") {
    double theta = 0.8, sigma = 1.7;
    FamilyParams p = single_normal(theta, sigma);
    double s2 = sigma * sigma;
    for (double t : {-3.0, -0.4, 0.0, 1.1, 2.6, 5.0}) {
        double m = (s2 * t + theta) / (s2 + 1.0);
        double v = s2 / (s2 + 1.0);
        CHECK(posterior_mean_t(t, p) == doctest::Approx(m).epsilon(1e-14));
        CHECK(posterior_var_t(t, p) == doctest::Approx(v).epsilon(1e-14));
    }
}

TEST_CASE("point-mass prior pins the posterior") {
    FamilyParams p = single_normal(1.5, 0.0);
    CHECK(posterior_mean_t(4.0, p) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(posterior_var_t(4.0, p) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("two point masses reweight by the likelihood") {
    FamilyParams p;
    p.theta1 = -1.0;
    p.theta2 = 2.0;
    p.lambda = 0.4;
    double t = 1.0;
    double w1 = 0.4 * norm_pdf(t - (-1.0));
    double w2 = 0.6 * norm_pdf(t - 2.0);
    double mean = (w1 * -1.0 + w2 * 2.0) / (w1 + w2);
    double second = (w1 * 1.0 + w2 * 4.0) / (w1 + w2);
    CHECK(posterior_mean_t(t, p) == doctest::Approx(mean).epsilon(1e-13));
    CHECK(posterior_var_t(t, p) == doctest::Approx(second - mean * mean).epsilon(1e-12));
}

TEST_CASE("tweedie form agrees with the mixture posterior mean") {
    FamilyParams p = mix_params();
    for (double t = -6.0; t <= 8.0; t += 0.37)
        CHECK(tweedie_mean(t, p) == doctest::Approx(posterior_mean_t(t, p)).epsilon(1e-10));
    FamilyParams n = null_params();
    for (double t : {-2.0, 0.0, 3.0}) {
        CHECK(tweedie_mean(t, n) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(posterior_mean_t(t, n) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("posterior mean derivative equals the posterior variance") {
    FamilyParams p = mix_params();
    for (double t = -5.0; t <= 7.0; t += 0.41) {
        CHECK(posterior_mean_deriv(t, p) ==
              doctest::Approx(posterior_var_t(t, p)).epsilon(1e-12));
        double h = 1e-4;
        double fd = (posterior_mean_t(t + h, p) - posterior_mean_t(t - h, p)) / (2.0 * h);
        CHECK(std::fabs(posterior_mean_deriv(t, p) - fd) < 1e-6);
        CHECK(posterior_var_t(t, p) >= 0.0);
    }
}

TEST_CASE("shrinkage special case applies (1 - 1/var) and clamps") {
    for (double v : {1.0, 1.5, 2.0, 5.0}) {
        for (double t : {-4.0, -1.0, 0.0, 2.0, 6.0}) {
            double expect = (1.0 - 1.0 / v) * t;
            CHECK(std::fabs(shrinkage_special_case(t, v) - expect) <= 1e-12);
        }
    }
    bool clamped = false;
    CHECK(shrinkage_special_case(3.0, 0.8, &clamped) == 0.0);
    CHECK(clamped);
    clamped = true;
    CHECK(shrinkage_special_case(3.0, 2.0, &clamped) == doctest::Approx(1.5));
    CHECK_FALSE(clamped);
}

TEST_CASE("shrinkage matches the conjugate posterior it abbreviates") {
    // marginal variance v corresponds to a zero-centered prior with sigma^2 = v - 1
    for (double v : {1.5, 2.0, 5.0}) {
        FamilyParams p = single_normal(0.0, std::sqrt(v - 1.0));
        for (double t : {-2.0, 0.5, 3.0})
            CHECK(shrinkage_special_case(t, v) ==
                  doctest::Approx(posterior_mean_t(t, p)).epsilon(1e-12));
    }
}

TEST_CASE("predict_one annualizes and signs the posterior") {
    // prior concentrated away from zero so the posterior mean is known
    FamilyParams p = single_normal(3.0, 0.0);
    StrategyStats s = stats_with(2.0, 0.004, 240);
    Prediction pr = predict_one(s, p);
    CHECK(pr.strategy_id == "s1");
    CHECK(pr.tstat == 2.0);
    CHECK(pr.post_mean_t == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(pr.sign == 1);
    CHECK(pr.pred_mean_ret_ann == doctest::Approx(3.0 * 0.004 * 12.0).epsilon(1e-14));
    // 3 / sqrt(240) * sqrt(12)
    CHECK(pr.pred_sharpe_ann == doctest::Approx(0.6708203932499369).epsilon(1e-12));

    FamilyParams neg = single_normal(-3.0, 0.0);
    Prediction pn = predict_one(s, neg);
    CHECK(pn.sign == -1);
    CHECK(pn.pred_mean_ret_ann == doctest::Approx(3.0 * 0.004 * 12.0).epsilon(1e-14));
    CHECK(pn.pred_sharpe_ann == doctest::Approx(0.6708203932499369).epsilon(1e-12));

    // zero posterior mean resolves the sign tie to +1
    Prediction pz = predict_one(s, null_params());
    CHECK(pz.post_mean_t == 0.0);
    CHECK(pz.sign == 1);
    CHECK(pz.pred_mean_ret_ann == 0.0);
}

TEST_CASE("predict looks families up in the model spec") {
    ModelSpec model;
    model.families["acct_ew"] = single_normal(1.0, 0.0);
    std::vector<StrategyStats> stats = {stats_with(2.0, 0.005, 120)};
    auto preds = predict(stats, model);
    REQUIRE(preds.size() == 1);
    CHECK(preds[0].post_mean_t == doctest::Approx(1.0));

    stats[0].family = "missing";
    CHECK_THROWS_WITH_AS(predict(stats, model), doctest::Contains("missing"), std::exception);

    std::string path = "test_tmp_preds.csv";
    stats[0].family = "acct_ew";
    save_predictions(predict(stats, model), path);
    std::remove(path.c_str());
}
