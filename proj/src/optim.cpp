#include "ebmine/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ebmine {

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

} // namespace

OptimResult minimize_box(const std::function<double(const std::vector<double>&)>& f,
                         const std::vector<double>& lo, const std::vector<double>& hi,
                         const std::vector<double>& x0, std::size_t max_evals, double tol) {
    const std::size_t d = x0.size();
    if (lo.size() != d || hi.size() != d) throw std::invalid_argument("bound size mismatch");
    for (std::size_t i = 0; i < d; ++i)
        if (!(lo[i] < hi[i])) throw std::invalid_argument("empty bound interval");

    OptimResult res;
    res.x = x0;
    for (std::size_t i = 0; i < d; ++i) res.x[i] = clamp(res.x[i], lo[i], hi[i]);

    auto eval = [&](const std::vector<double>& x) {
        ++res.n_evals;
        return f(x);
    };

    res.fx = eval(res.x);

    std::vector<double> radius(d), width(d);
    for (std::size_t i = 0; i < d; ++i) {
        width[i] = hi[i] - lo[i];
        radius[i] = 0.25 * width[i];
    }

    std::vector<double> xa = res.x, xb = res.x, xc = res.x;
    const double kMinRadiusFrac = 1e-9;

    while (res.n_evals + 3 * d < max_evals) {
        double cycle_gain = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double a = std::max(lo[i], res.x[i] - radius[i]);
            double b = std::min(hi[i], res.x[i] + radius[i]);
            if (b - a < kMinRadiusFrac * width[i]) continue;
            // three distinct abscissae: endpoints plus the current point
            // (shifted to the interior when it sits on an endpoint)
            double m = res.x[i];
            if (m <= a || m >= b) m = 0.5 * (a + b);

            xa = res.x; xa[i] = a;
            xb = res.x; xb[i] = b;
            double fa = eval(xa);
            double fb = eval(xb);
            double fm;
            if (m == res.x[i]) {
                fm = res.fx;
            } else {
                xc = res.x; xc[i] = m;
                fm = eval(xc);
            }

            // quadratic through (a,fa), (m,fm), (b,fb)
            double cand = m;
            double d1 = (fm - fa) / (m - a);
            double d2 = (fb - fm) / (b - m);
            double curv = (d2 - d1) / (b - a); // half the second derivative
            if (curv > 0.0) {
                // Newton form f(x) = fa + d1 (x-a) + curv (x-a)(x-m)
                double vertex = 0.5 * (a + m) - d1 / (2.0 * curv);
                cand = clamp(vertex, a, b);
            } else {
                cand = fa < fb ? a : b;
            }

            double best_f = res.fx;
            double best_x = res.x[i];
            if (fa < best_f) { best_f = fa; best_x = a; }
            if (fb < best_f) { best_f = fb; best_x = b; }
            if (fm < best_f) { best_f = fm; best_x = m; }
            if (cand != a && cand != b && cand != m && cand != res.x[i]) {
                xc = res.x; xc[i] = cand;
                double fc = eval(xc);
                if (fc < best_f) { best_f = fc; best_x = cand; }
            }
            if (best_f < res.fx) {
                double moved = std::fabs(best_x - res.x[i]);
                cycle_gain += res.fx - best_f;
                res.x[i] = best_x;
                res.fx = best_f;
                // grow the region when the step pressed against it
                if (moved > 0.75 * radius[i]) radius[i] = std::min(2.0 * radius[i], width[i]);
            }
            if (res.n_evals + 4 >= max_evals) break;
        }

        if (cycle_gain <= tol) {
            bool all_min = true;
            for (std::size_t i = 0; i < d; ++i) {
                radius[i] *= 0.35;
                if (radius[i] > kMinRadiusFrac * width[i]) all_min = false;
            }
            if (all_min) {
                res.converged = true;
                break;
            }
        }
    }
    return res;
}

} // namespace ebmine
