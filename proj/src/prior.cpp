#include "ebmine/prior.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "ebmine/mathutil.hpp"

namespace ebmine {

void validate_params(const FamilyParams& p) {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(p.theta1) || !finite(p.sigma1) || !finite(p.theta2) || !finite(p.sigma2) ||
        !finite(p.lambda))
        throw std::invalid_argument("family params must be finite");
    if (p.sigma1 < 0.0 || p.sigma2 < 0.0)
        throw std::invalid_argument("sigma must be non-negative");
    if (p.lambda < 0.0 || p.lambda > 1.0)
        throw std::invalid_argument("lambda must be in [0, 1]");
}

FamilyParams canonicalize(const FamilyParams& p) {
    validate_params(p);
    FamilyParams q = p;
    if (q.sigma1 > q.sigma2 || (q.sigma1 == q.sigma2 && q.theta1 > q.theta2)) {
        std::swap(q.theta1, q.theta2);
        std::swap(q.sigma1, q.sigma2);
        q.lambda = 1.0 - q.lambda;
    }
    return q;
}

double prior_density(double mu, const FamilyParams& p) {
    validate_params(p);
    double d = 0.0;
    if (p.lambda > 0.0) {
        if (p.sigma1 == 0.0)
            throw std::invalid_argument("prior density undefined: component 1 is a point mass");
        d += p.lambda * norm_pdf(mu, p.theta1, p.sigma1 * p.sigma1);
    }
    if (p.lambda < 1.0) {
        if (p.sigma2 == 0.0)
            throw std::invalid_argument("prior density undefined: component 2 is a point mass");
        d += (1.0 - p.lambda) * norm_pdf(mu, p.theta2, p.sigma2 * p.sigma2);
    }
    return d;
}

double marginal_density(double t, const FamilyParams& p) {
    validate_params(p);
    double d = 0.0;
    if (p.lambda > 0.0) d += p.lambda * norm_pdf(t, p.theta1, p.sigma1 * p.sigma1 + 1.0);
    if (p.lambda < 1.0) d += (1.0 - p.lambda) * norm_pdf(t, p.theta2, p.sigma2 * p.sigma2 + 1.0);
    return d;
}

double marginal_log_density(double t, const FamilyParams& p) {
    validate_params(p);
    double a = -std::numeric_limits<double>::infinity();
    double b = a;
    if (p.lambda > 0.0)
        a = std::log(p.lambda) + norm_log_pdf(t, p.theta1, p.sigma1 * p.sigma1 + 1.0);
    if (p.lambda < 1.0)
        b = std::log(1.0 - p.lambda) + norm_log_pdf(t, p.theta2, p.sigma2 * p.sigma2 + 1.0);
    return log_sum_exp(a, b);
}

double marginal_cdf(double t, const FamilyParams& p) {
    validate_params(p);
    double c = 0.0;
    if (p.lambda > 0.0)
        c += p.lambda * norm_cdf((t - p.theta1) / std::sqrt(p.sigma1 * p.sigma1 + 1.0));
    if (p.lambda < 1.0)
        c += (1.0 - p.lambda) * norm_cdf((t - p.theta2) / std::sqrt(p.sigma2 * p.sigma2 + 1.0));
    return c;
}

double log_likelihood(std::span<const double> tstats, const FamilyParams& p) {
    validate_params(p);
    // floor = log(1e-300): keeps a single far outlier from dominating the fit
    constexpr double kLogFloor = -690.77552789821368;
    double ll = 0.0;
    for (double t : tstats) {
        if (!std::isfinite(t)) throw std::invalid_argument("non-finite t-stat in likelihood");
        double l = marginal_log_density(t, p);
        ll += std::max(l, kLogFloor);
    }
    return ll;
}

double sample_mu(const FamilyParams& p, RngStream& rng) {
    validate_params(p);
    double u = rng.next_uniform();
    double z = rng.next_normal();
    if (u <= p.lambda) return p.theta1 + p.sigma1 * z;
    return p.theta2 + p.sigma2 * z;
}

const FamilyParams& ModelSpec::require(const std::string& family) const {
    auto it = families.find(family);
    if (it == families.end())
        throw std::runtime_error("model spec has no parameters for family '" + family + "'");
    return it->second;
}

std::string model_spec_to_json(const ModelSpec& spec) {
    nlohmann::ordered_json j;
    for (const auto& [family, p] : spec.families) {
        j[family] = {{"theta1", p.theta1},
                     {"sigma1", p.sigma1},
                     {"theta2", p.theta2},
                     {"sigma2", p.sigma2},
                     {"lambda", p.lambda}};
    }
    return j.dump(2);
}

ModelSpec model_spec_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    if (!j.is_object()) throw std::runtime_error("model spec must be a JSON object");
    ModelSpec spec;
    for (auto& [family, v] : j.items()) {
        FamilyParams p;
        p.theta1 = v.at("theta1").get<double>();
        p.sigma1 = v.at("sigma1").get<double>();
        p.theta2 = v.at("theta2").get<double>();
        p.sigma2 = v.at("sigma2").get<double>();
        p.lambda = v.at("lambda").get<double>();
        validate_params(p);
        spec.families[family] = p;
    }
    return spec;
}

void save_model_spec(const ModelSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << model_spec_to_json(spec) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
}

ModelSpec load_model_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_spec_from_json(ss.str());
}

} // namespace ebmine
