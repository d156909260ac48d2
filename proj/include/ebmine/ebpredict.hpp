#pragma once

#include <string>
#include <vector>

#include "ebmine/panel.hpp"
#include "ebmine/prior.hpp"

namespace ebmine {

// Posterior mean of mu given observed t, under the family's mixture prior and
// unit observation noise. Closed form: weights w_k proportional to
// lambda_k * phi(t; theta_k, sigma_k^2 + 1), component means
// (sigma_k^2 t + theta_k) / (sigma_k^2 + 1).
double posterior_mean_t(double t, const FamilyParams& p);

// Posterior variance of mu given t.
double posterior_var_t(double t, const FamilyParams& p);

// d/dt of the posterior mean; equals posterior_var_t analytically, kept as a
// separate evaluation path so the identity can be checked.
double posterior_mean_deriv(double t, const FamilyParams& p);

// Posterior mean via the score of the marginal: t + d/dt log f(t).
double tweedie_mean(double t, const FamilyParams& p);

// Shrinkage factor for a single normal prior calibrated to a marginal t
// variance of var_hat: (1 - 1/var_hat) * t. var_hat < 1 clamps to zero
// signal; *clamped reports it.
double shrinkage_special_case(double t, double var_hat, bool* clamped = nullptr);

inline constexpr double kMonthsPerYear = 12.0;

struct Prediction {
    std::string strategy_id;
    std::string family;
    double tstat;
    double post_mean_t;       // signed posterior mean, t units
    double post_var_t;
    double pred_mean_ret_ann; // |post_mean_t| * se * 12, return of the signed strategy
    double pred_sharpe_ann;   // |post_mean_t| / sqrt(n_obs) * sqrt(12)
    int sign;                 // sign of post_mean_t; ties resolve to +1
};

Prediction predict_one(const StrategyStats& stats, const FamilyParams& p);

// Predictions for every strategy, looking up each family in the model spec.
std::vector<Prediction> predict(const std::vector<StrategyStats>& stats, const ModelSpec& model);

void save_predictions(const std::vector<Prediction>& preds, const std::string& path);

} // namespace ebmine
