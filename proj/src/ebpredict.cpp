#include "ebmine/ebpredict.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ebmine/csv.hpp"
#include "ebmine/mathutil.hpp"

namespace ebmine {

namespace {

struct ComponentPosterior {
    double w[2];  // posterior component weights, sum to 1
    double m[2];  // component posterior means
    double v[2];  // component posterior variances
    int n = 0;
};

// Mixture posterior algebra, shared by mean/variance/derivative. Weights are
// computed in log space to stay stable for extreme t.
ComponentPosterior decompose(double t, const FamilyParams& p) {
    validate_params(p);
    if (!std::isfinite(t)) throw std::invalid_argument("non-finite t-stat");
    ComponentPosterior cp;
    double logw[2];
    double lam[2] = {p.lambda, 1.0 - p.lambda};
    double theta[2] = {p.theta1, p.theta2};
    double sigma[2] = {p.sigma1, p.sigma2};
    for (int k = 0; k < 2; ++k) {
        if (lam[k] <= 0.0) continue;
        double s2 = sigma[k] * sigma[k];
        int i = cp.n++;
        logw[i] = std::log(lam[k]) + norm_log_pdf(t, theta[k], s2 + 1.0);
        cp.m[i] = (s2 * t + theta[k]) / (s2 + 1.0);
        cp.v[i] = s2 / (s2 + 1.0);
    }
    if (cp.n == 1) {
        cp.w[0] = 1.0;
    } else {
        double lse = log_sum_exp(logw[0], logw[1]);
        cp.w[0] = std::exp(logw[0] - lse);
        cp.w[1] = std::exp(logw[1] - lse);
    }
    return cp;
}

} // namespace

double posterior_mean_t(double t, const FamilyParams& p) {
    ComponentPosterior cp = decompose(t, p);
    double m = 0.0;
    for (int i = 0; i < cp.n; ++i) m += cp.w[i] * cp.m[i];
    return m;
}

double posterior_var_t(double t, const FamilyParams& p) {
    ComponentPosterior cp = decompose(t, p);
    double mean = 0.0, second = 0.0;
    for (int i = 0; i < cp.n; ++i) {
        mean += cp.w[i] * cp.m[i];
        second += cp.w[i] * (cp.m[i] * cp.m[i] + cp.v[i]);
    }
    double var = second - mean * mean;
    return var < 0.0 ? 0.0 : var;
}

double posterior_mean_deriv(double t, const FamilyParams& p) {
    // d/dt sum w_k m_k = sum w_k [v_k + (m_k - mean)^2]; the weight score is
    // dlogw_k/dt = (m_k - mean), and dm_k/dt = v_k.
    ComponentPosterior cp = decompose(t, p);
    double mean = 0.0;
    for (int i = 0; i < cp.n; ++i) mean += cp.w[i] * cp.m[i];
    double deriv = 0.0;
    for (int i = 0; i < cp.n; ++i) {
        double d = cp.m[i] - mean;
        deriv += cp.w[i] * (cp.v[i] + d * d);
    }
    return deriv;
}

double tweedie_mean(double t, const FamilyParams& p) {
    validate_params(p);
    if (!std::isfinite(t)) throw std::invalid_argument("non-finite t-stat");
    // score of the marginal via the same component weights
    ComponentPosterior cp = decompose(t, p);
    double lam[2] = {p.lambda, 1.0 - p.lambda};
    double theta[2] = {p.theta1, p.theta2};
    double sigma[2] = {p.sigma1, p.sigma2};
    double score = 0.0;
    int i = 0;
    for (int k = 0; k < 2; ++k) {
        if (lam[k] <= 0.0) continue;
        double s2 = sigma[k] * sigma[k];
        score += cp.w[i] * (-(t - theta[k]) / (s2 + 1.0));
        ++i;
    }
    return t + score;
}

double shrinkage_special_case(double t, double var_hat, bool* clamped) {
    if (!(var_hat > 0.0)) throw std::invalid_argument("var_hat must be positive");
    if (clamped) *clamped = false;
    if (var_hat < 1.0) {
        if (clamped) *clamped = true;
        return 0.0;
    }
    return (1.0 - 1.0 / var_hat) * t;
}

Prediction predict_one(const StrategyStats& stats, const FamilyParams& p) {
    if (!(stats.n_obs > 0)) throw std::invalid_argument("prediction needs n_obs > 0");
    Prediction pr;
    pr.strategy_id = stats.strategy_id;
    pr.family = stats.family;
    pr.tstat = stats.tstat;
    pr.post_mean_t = posterior_mean_t(stats.tstat, p);
    pr.post_var_t = posterior_var_t(stats.tstat, p);
    double abs_mean = std::fabs(pr.post_mean_t);
    pr.pred_mean_ret_ann = abs_mean * stats.se * kMonthsPerYear;
    pr.pred_sharpe_ann = abs_mean / std::sqrt(static_cast<double>(stats.n_obs)) *
                         std::sqrt(kMonthsPerYear);
    pr.sign = pr.post_mean_t < 0.0 ? -1 : 1;
    return pr;
}

std::vector<Prediction> predict(const std::vector<StrategyStats>& stats, const ModelSpec& model) {
    std::vector<Prediction> out;
    out.reserve(stats.size());
    for (const auto& s : stats) out.push_back(predict_one(s, model.require(s.family)));
    return out;
}

void save_predictions(const std::vector<Prediction>& preds, const std::string& path) {
    CsvWriter w(path, {"strategy_id", "family", "tstat", "post_mean_t", "post_var_t",
                       "pred_mean_ret_ann", "pred_sharpe_ann", "sign"});
    for (const auto& p : preds) {
        w.write_row({p.strategy_id, p.family, format_double(p.tstat),
                     format_double(p.post_mean_t), format_double(p.post_var_t),
                     format_double(p.pred_mean_ret_ann), format_double(p.pred_sharpe_ann),
                     std::to_string(p.sign)});
    }
    w.close();
}

} // namespace ebmine
