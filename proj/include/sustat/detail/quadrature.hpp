#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

#include "sustat/errors.hpp"

namespace sustat::detail {

// Adaptive Gauss-Kronrod (G7,K15) integrator. The K15 value is kept and the
// |K15-G7| difference drives refinement: the worst segment is bisected until
// the summed error estimate fits the relative tolerance of the running
// integral value. The global scale adapts as segments split, so seeds that
// miss the integrand's support cannot starve the error budget.

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;   // absolute
    std::size_t evaluations = 0;
};

namespace gk {

// Standard QUADPACK 15-point Kronrod abscissae/weights on [-1, 1].
inline constexpr double nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

inline constexpr double wk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

// Gauss-7 weights, matching Kronrod nodes 1,3,5,7.
inline constexpr double wg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

}  // namespace gk

template <typename F>
inline void gk15(const F& f, double a, double b, double& k15, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double k = gk::wk[7] * fc;
    double g = gk::wg[3] * fc;
    for (int i = 0; i < 7; ++i) {
        const double x = h * gk::nodes[i];
        const double fsum = f(c - x) + f(c + x);
        k += gk::wk[i] * fsum;
        if (i % 2 == 1) g += gk::wg[i / 2] * fsum;
    }
    k15 = k * h;
    err = std::abs((k - g) * h);
}

// Integrate f over [a, b] to the requested relative tolerance.
// Throws QuadratureFailureError when the error estimate does not reach it
// within the segment budget (unless throw_on_failure is false).
template <typename F>
inline QuadratureResult integrate_adaptive(const F& f, double a, double b, double rel_tol = 1e-10,
                                           std::size_t max_segments = 2000, bool throw_on_failure = true,
                                           int initial_slices = 8) {
    QuadratureResult r;
    if (a == b) return r;

    struct Segment {
        double a, b, value, error;
        bool operator<(const Segment& o) const { return error < o.error; }
    };

    const double abs_floor = std::numeric_limits<double>::min() * 1024.0;
    std::priority_queue<Segment> queue;
    double total = 0.0, total_err = 0.0;

    // Seed with a few slices so integrands supported on a small part of a
    // wide interval are not mistaken for zero.
    for (int i = 0; i < initial_slices; ++i) {
        const double sa = a + (b - a) * static_cast<double>(i) / initial_slices;
        const double sb = a + (b - a) * static_cast<double>(i + 1) / initial_slices;
        Segment s{sa, sb, 0.0, 0.0};
        gk15(f, sa, sb, s.value, s.error);
        r.evaluations += 15;
        total += s.value;
        total_err += s.error;
        queue.push(s);
    }

    while (total_err > std::max(rel_tol * std::abs(total), abs_floor) && queue.size() < max_segments) {
        const Segment worst = queue.top();
        queue.pop();
        total -= worst.value;
        total_err -= worst.error;
        const double mid = 0.5 * (worst.a + worst.b);
        for (int half = 0; half < 2; ++half) {
            Segment s{half == 0 ? worst.a : mid, half == 0 ? mid : worst.b, 0.0, 0.0};
            gk15(f, s.a, s.b, s.value, s.error);
            r.evaluations += 15;
            total += s.value;
            total_err += s.error;
            queue.push(s);
        }
    }

    r.value = total;
    r.error_estimate = total_err;
    if (throw_on_failure && total_err > 10.0 * std::max(rel_tol * std::abs(total), abs_floor) &&
        total_err > 1e-300) {
        // Report the midpoint of the worst remaining segment.
        const Segment& worst = queue.top();
        throw QuadratureFailureError("adaptive quadrature failed to reach tolerance",
                                     0.5 * (worst.a + worst.b));
    }
    return r;
}

}  // namespace sustat::detail
