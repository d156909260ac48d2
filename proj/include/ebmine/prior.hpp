#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ebmine/rng.hpp"

namespace ebmine {

// Two-component mixture-normal prior over a strategy family's true mean
// t-stat mu: with probability lambda, mu ~ N(theta1, sigma1^2), otherwise
// mu ~ N(theta2, sigma2^2). Canonical order is sigma1 <= sigma2.
struct FamilyParams {
    double theta1 = 0.0;
    double sigma1 = 0.0;
    double theta2 = 0.0;
    double sigma2 = 0.0;
    double lambda = 1.0;

    bool operator==(const FamilyParams&) const = default;
};

inline FamilyParams null_params() { return FamilyParams{0.0, 0.0, 0.0, 0.0, 1.0}; }

// Throws std::invalid_argument when sigmas are negative or lambda is outside
// [0, 1].
void validate_params(const FamilyParams& p);

// Swaps components so sigma1 <= sigma2 (ties ordered by theta).
FamilyParams canonicalize(const FamilyParams& p);

// Prior density of mu. Point-mass components (sigma = 0) have no density;
// evaluating them is an error.
double prior_density(double mu, const FamilyParams& p);

// Marginal density of an observed t-stat: mu convolved with N(0, 1) noise,
// i.e. a mixture of N(theta_k, sigma_k^2 + 1). Well-defined for sigma = 0.
double marginal_density(double t, const FamilyParams& p);
double marginal_log_density(double t, const FamilyParams& p);

// Marginal CDF Pr(T <= t) under the mixture.
double marginal_cdf(double t, const FamilyParams& p);

// Sum of per-observation log marginal densities. Densities are floored at
// 1e-300 before the log so one extreme outlier cannot produce -inf.
// Non-finite t-stats are an error.
double log_likelihood(std::span<const double> tstats, const FamilyParams& p);

double sample_mu(const FamilyParams& p, RngStream& rng);

// Per-family parameter table, serialized as JSON
// {"family": {"theta1": ..., "sigma1": ..., "theta2": ..., "sigma2": ..., "lambda": ...}}.
struct ModelSpec {
    std::map<std::string, FamilyParams> families;

    const FamilyParams& require(const std::string& family) const;
};

std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const std::string& json_text);
void save_model_spec(const ModelSpec& spec, const std::string& path);
ModelSpec load_model_spec(const std::string& path);

} // namespace ebmine
