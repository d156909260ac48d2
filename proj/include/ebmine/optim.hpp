#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace ebmine {

struct OptimResult {
    std::vector<double> x;
    double fx = 0.0;
    std::size_t n_evals = 0;
    bool converged = false;
};

// Derivative-free bound-constrained minimizer. Each cycle fits a quadratic
// through three points per coordinate inside a per-coordinate trust region,
// steps to the constrained vertex, then shrinks the region when a full cycle
// fails to improve by more than tol. Deterministic for a given start.
OptimResult minimize_box(const std::function<double(const std::vector<double>&)>& f,
                         const std::vector<double>& lo, const std::vector<double>& hi,
                         const std::vector<double>& x0, std::size_t max_evals, double tol);

} // namespace ebmine
