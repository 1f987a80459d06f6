#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "sustat/errors.hpp"

namespace sustat::detail {

struct ScalarMin {
    double x = 0.0;
    double fx = 0.0;
    std::size_t evaluations = 0;
    bool hit_lower = false;
    bool hit_upper = false;
};

// Brent minimization (golden section + successive parabolic interpolation)
// on the bracket [lo, hi].
template <typename F>
inline ScalarMin brent_minimize(const F& f, double lo, double hi, double x_tol = 1e-9,
                                std::size_t max_iter = 200) {
    constexpr double golden = 0.3819660112501051;
    double a = lo, b = hi;
    double x = a + golden * (b - a);
    double w = x, v = x;
    double fx = f(x);
    double fw = fx, fv = fx;
    double d = 0.0, e = 0.0;
    ScalarMin result;
    result.evaluations = 1;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        const double m = 0.5 * (a + b);
        const double tol1 = x_tol * std::abs(x) + 1e-12;
        const double tol2 = 2.0 * tol1;
        if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;
        bool use_golden = true;
        if (std::abs(e) > tol1) {
            // Parabolic fit through (v, w, x).
            const double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::abs(q);
            const double e_prev = e;
            e = d;
            if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
                d = p / q;
                const double u = x + d;
                if (u - a < tol2 || b - u < tol2) d = (x < m) ? tol1 : -tol1;
                use_golden = false;
            }
        }
        if (use_golden) {
            e = (x < m) ? b - x : a - x;
            d = golden * e;
        }
        const double u = (std::abs(d) >= tol1) ? x + d : x + ((d > 0.0) ? tol1 : -tol1);
        const double fu = f(u);
        ++result.evaluations;
        if (fu <= fx) {
            if (u < x) b = x; else a = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    result.x = x;
    result.fx = fx;
    result.hit_lower = (x - lo) < 1e-6 * (hi - lo);
    result.hit_upper = (hi - x) < 1e-6 * (hi - lo);
    return result;
}

struct SimplexMin {
    std::vector<double> x;
    double fx = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

// Nelder-Mead in n dimensions, deterministic. `steps` sets the initial
// simplex edge per coordinate.
inline SimplexMin nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                              std::vector<double> x0, std::vector<double> steps, double f_tol = 1e-10,
                              std::size_t max_iter = 600) {
    const std::size_t n = x0.size();
    SimplexMin result;
    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> fs(n + 1);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += steps[i];
    for (std::size_t i = 0; i <= n; ++i) fs[i] = f(pts[i]);
    result.evaluations = n + 1;

    std::vector<std::size_t> order(n + 1);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        const std::size_t best = order[0], worst = order[n], second_worst = order[n - 1];
        if (std::abs(fs[worst] - fs[best]) <= f_tol * (std::abs(fs[best]) + std::abs(fs[worst])) + 1e-300) {
            result.converged = true;
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k];
        }
        for (std::size_t k = 0; k < n; ++k) centroid[k] /= static_cast<double>(n);

        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t k = 0; k < n; ++k) p[k] = centroid[k] + t * (pts[worst][k] - centroid[k]);
            return p;
        };
        std::vector<double> refl = blend(-1.0);
        double f_refl = f(refl);
        ++result.evaluations;
        if (f_refl < fs[order[0]]) {
            std::vector<double> exp_pt = blend(-2.0);
            double f_exp = f(exp_pt);
            ++result.evaluations;
            if (f_exp < f_refl) { pts[worst] = std::move(exp_pt); fs[worst] = f_exp; }
            else { pts[worst] = std::move(refl); fs[worst] = f_refl; }
        } else if (f_refl < fs[second_worst]) {
            pts[worst] = std::move(refl);
            fs[worst] = f_refl;
        } else {
            const bool outside = f_refl < fs[worst];
            std::vector<double> contr = blend(outside ? -0.5 : 0.5);
            double f_contr = f(contr);
            ++result.evaluations;
            if (f_contr < std::min(f_refl, fs[worst])) {
                pts[worst] = std::move(contr);
                fs[worst] = f_contr;
            } else {
                // Shrink toward the best vertex.
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t k = 0; k < n; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
                    fs[i] = f(pts[i]);
                    ++result.evaluations;
                }
            }
        }
    }
    std::size_t arg = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fs[i] < fs[arg]) arg = i;
    result.x = pts[arg];
    result.fx = fs[arg];
    return result;
}

}  // namespace sustat::detail
