#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sustat/detail/optimize.hpp"
#include "sustat/detail/quadrature.hpp"
#include "sustat/distributions.hpp"
#include "sustat/errors.hpp"
#include "sustat/returns.hpp"

namespace sustat {

// p(u|beta) = sqrt(beta/2pi) exp(-beta u^2 / 2)
inline double gaussian_conditional(double u, double beta) {
    if (!(beta > 0.0)) throw DomainError("gaussian_conditional needs beta > 0");
    return std::sqrt(beta / (2.0 * std::numbers::pi)) * std::exp(-0.5 * beta * u * u);
}

// Closed form of the chi2-mixture marginal: a Student-t with d1 degrees of
// freedom and squared scale 1/beta0,
//   p1(u) = G((d1+1)/2) / (G(d1/2) sqrt(pi d1/beta0)) (1 + beta0 u^2/d1)^-((d1+1)/2).
// Used as the independent oracle for the quadrature path.
inline double student_t_marginal(const Chi2Params& p, double u) {
    const double log_pref = std::lgamma(0.5 * (p.d1 + 1.0)) - std::lgamma(0.5 * p.d1) -
                            0.5 * std::log(std::numbers::pi * p.d1 / p.beta0);
    return std::exp(log_pref - 0.5 * (p.d1 + 1.0) * std::log1p(p.beta0 * u * u / p.d1));
}

// Integrated (superstatistical) return density on a symmetric u grid.
struct MarginalDensity {
    DistributionModel model;
    std::vector<double> grid;
    std::vector<double> values;
    double quadrature_tol = 0.0;     // worst achieved relative error estimate
    double tail_mass = 0.0;          // analytic mass beyond max|grid|
    double tail_second_moment = 0.0;

    // Trapezoid mass over the grid plus the analytic tail.
    double total_mass() const {
        double acc = 0.0;
        for (std::size_t i = 1; i < grid.size(); ++i)
            acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
        return acc + tail_mass;
    }

    // Second moment of p(u): Simpson over the grid (uniform grids) plus the
    // analytic tail term.
    double second_moment() const {
        const std::size_t n = grid.size();
        double acc = 0.0;
        const double h = grid[1] - grid[0];
        bool uniform = n >= 3 && n % 2 == 1;
        for (std::size_t i = 1; uniform && i < n; ++i)
            uniform = std::abs((grid[i] - grid[i - 1]) - h) < 1e-9 * std::abs(h);
        if (uniform) {
            for (std::size_t i = 0; i < n; ++i) {
                const double w = (i == 0 || i + 1 == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
                acc += w * grid[i] * grid[i] * values[i];
            }
            acc *= h / 3.0;
        } else {
            for (std::size_t i = 1; i < n; ++i)
                acc += 0.5 * (grid[i] * grid[i] * values[i] + grid[i - 1] * grid[i - 1] * values[i - 1]) *
                       (grid[i] - grid[i - 1]);
        }
        return acc + tail_second_moment;
    }

    std::string to_csv() const {
        std::ostringstream os;
        os << "u,p\n";
        os.precision(17);
        for (std::size_t i = 0; i < grid.size(); ++i) os << grid[i] << ',' << values[i] << '\n';
        return os.str();
    }
};

namespace marginal_detail {

// One point of Eq-16-style mixture integral, adaptive in ln(beta) over a
// range covering at least quantiles [1e-8, 1-1e-8] of f (we use 1e-12).
inline double marginal_point(const DistributionModel& model, double u, double lo, double hi, double rel_tol,
                             double* err_rel = nullptr) {
    const auto integrand = [&](double ly) {
        const double beta = std::exp(ly);
        return gaussian_conditional(u, beta) * model.density(beta) * beta;
    };
    detail::QuadratureResult r;
    try {
        r = detail::integrate_adaptive(integrand, std::log(lo), std::log(hi), rel_tol, 4000, true);
    } catch (const QuadratureFailureError&) {
        throw QuadratureFailureError("marginal integration failed to reach tolerance", u);
    }
    if (err_rel) *err_rel = r.value > 0.0 ? r.error_estimate / r.value : 0.0;
    return r.value;
}

// P(|u| > U | beta) integrated over f: 2 * Phi-bar(U sqrt(beta)).
inline double tail_mass_beyond(const DistributionModel& model, double big_u, double lo, double hi) {
    const auto integrand = [&](double ly) {
        const double beta = std::exp(ly);
        return std::erfc(big_u * std::sqrt(0.5 * beta)) * model.density(beta) * beta;
    };
    return detail::integrate_adaptive(integrand, std::log(lo), std::log(hi), 1e-9, 2000, false).value;
}

// E[u^2; |u| > U] for N(0, 1/beta), integrated over f.
inline double tail_second_moment_beyond(const DistributionModel& model, double big_u, double lo, double hi) {
    const auto integrand = [&](double ly) {
        const double beta = std::exp(ly);
        const double sigma = 1.0 / std::sqrt(beta);
        const double z = big_u / sigma;
        const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
        const double q = 0.5 * std::erfc(z / std::sqrt(2.0));
        return 2.0 * (sigma * sigma * q + sigma * big_u * phi) * model.density(beta) * beta;
    };
    return detail::integrate_adaptive(integrand, std::log(lo), std::log(hi), 1e-9, 2000, false).value;
}

}  // namespace marginal_detail

// Evaluates p_i(u) = int p(u|beta) f_i(beta) dbeta on the given grid.
// Symmetry is exact: points are computed for |u| and mirrored.
inline MarginalDensity integrate_marginal(const DistributionModel& model, std::span<const double> u_grid,
                                          double rel_tol = 1e-8) {
    if (u_grid.empty()) throw DomainError("empty u grid");
    const auto [lo, hi] = model.quantile_range(1e-12);

    MarginalDensity out{model, std::vector<double>(u_grid.begin(), u_grid.end()), {}, 0.0, 0.0, 0.0};
    out.values.resize(u_grid.size());

    // Cache per |u| so mirrored grid points are bit-identical.
    std::vector<std::pair<double, double>> memo;
    double max_abs_u = 0.0;
    for (std::size_t i = 0; i < u_grid.size(); ++i) {
        const double au = std::abs(u_grid[i]);
        max_abs_u = std::max(max_abs_u, au);
        double val = -1.0;
        for (const auto& [k, v] : memo)
            if (k == au) {
                val = v;
                break;
            }
        if (val < 0.0) {
            double err_rel = 0.0;
            val = marginal_detail::marginal_point(model, au, lo, hi, rel_tol, &err_rel);
            out.quadrature_tol = std::max(out.quadrature_tol, err_rel);
            memo.emplace_back(au, val);
        }
        out.values[i] = val;
    }
    out.tail_mass = marginal_detail::tail_mass_beyond(model, max_abs_u, lo, hi);
    out.tail_second_moment = marginal_detail::tail_second_moment_beyond(model, max_abs_u, lo, hi);
    return out;
}

inline std::vector<double> symmetric_grid(double max_u, std::size_t points_per_side) {
    std::vector<double> g;
    g.reserve(2 * points_per_side + 1);
    for (std::size_t i = 0; i <= 2 * points_per_side; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(points_per_side) - 1.0;
        g.push_back(t * max_u);
    }
    g[points_per_side] = 0.0;
    return g;
}

// Result of refitting the marginal with free parameters (decoupled from the
// observed beta distribution).
struct AmendedFit {
    DistributionModel model;
    double log_likelihood = 0.0;
    double aic = 0.0;
    std::optional<DistributionModel> reference;   // the f(beta)-level fit, when supplied
    double max_param_divergence = 0.0;            // max relative parameter gap vs reference
};

namespace marginal_detail {

inline double rel_gap(double a, double ref) { return std::abs(a - ref) / std::max(std::abs(ref), 1e-12); }

inline double param_divergence(const DistributionModel& a, const DistributionModel& ref) {
    if (a.kind() != ref.kind()) return std::numeric_limits<double>::infinity();
    if (const auto* pa = std::get_if<Chi2Params>(&a.params())) {
        const auto& pr = std::get<Chi2Params>(ref.params());
        return std::max(rel_gap(pa->d1, pr.d1), rel_gap(pa->beta0, pr.beta0));
    }
    if (const auto* pa = std::get_if<InvChi2Params>(&a.params())) {
        const auto& pr = std::get<InvChi2Params>(ref.params());
        return std::max(rel_gap(pa->d2, pr.d2), rel_gap(pa->beta0, pr.beta0));
    }
    const auto& pa = std::get<LogNormalParams>(a.params());
    const auto& pr = std::get<LogNormalParams>(ref.params());
    return std::max(rel_gap(pa.s, pr.s), std::abs(pa.mu - pr.mu) / std::max(std::abs(pr.mu), 1.0));
}

struct UBins {
    std::vector<double> centers;
    std::vector<double> counts;
};

inline UBins bin_returns(std::span<const double> u, std::size_t nbins) {
    double m = 0.0;
    for (double v : u) m = std::max(m, std::abs(v));
    m *= 1.0 + 1e-9;
    UBins out;
    out.centers.resize(nbins);
    out.counts.assign(nbins, 0.0);
    for (std::size_t b = 0; b < nbins; ++b)
        out.centers[b] = -m + 2.0 * m * (static_cast<double>(b) + 0.5) / static_cast<double>(nbins);
    for (double v : u) {
        auto b = static_cast<std::size_t>((v + m) / (2.0 * m) * static_cast<double>(nbins));
        if (b >= nbins) b = nbins - 1;
        out.counts[b] += 1.0;
    }
    return out;
}

}  // namespace marginal_detail

// Maximizes the likelihood of the observed normalized returns under the
// integrated density p_i(u), with the f_i parameters free (the "amended"
// refit). The optional reference model seeds the optimizer and anchors the
// divergence report.
inline AmendedFit amended_fit(const ReturnSeries& u, ModelKind kind,
                              const DistributionModel* reference = nullptr, std::size_t nbins = 401) {
    if (u.size() < 1000) throw TooFewSamplesError("amended_fit needs at least 1000 returns");
    if (kind == ModelKind::mixed)
        throw DomainError("amended_fit supports chi2, inv_chi2 and lognormal marginals");

    const auto bins = marginal_detail::bin_returns(u.values, nbins);
    double kurt_num = 0.0, kurt_den = 0.0;
    for (double v : u.values) {
        kurt_num += v * v * v * v;
        kurt_den += v * v;
    }
    const double n = static_cast<double>(u.size());
    const double kurt = (kurt_num / n) / ((kurt_den / n) * (kurt_den / n));

    const auto nll_for = [&](const DistributionModel& model) {
        const auto [lo, hi] = model.quantile_range(1e-10);
        double nll = 0.0;
        for (std::size_t b = 0; b < bins.centers.size(); ++b) {
            if (bins.counts[b] == 0.0) continue;
            double p;
            if (const auto* cp = std::get_if<Chi2Params>(&model.params()))
                p = student_t_marginal(*cp, bins.centers[b]);
            else
                p = marginal_detail::marginal_point(model, std::abs(bins.centers[b]), lo, hi, 1e-6);
            nll -= bins.counts[b] * std::log(std::max(p, 1e-320));
        }
        return nll;
    };

    // Moment-based fallback starts: match Var(u) = 1 and the sample kurtosis
    // where the family allows it.
    double start0 = 0.0, start1 = 0.0;   // log-parameterized per kind
    switch (kind) {
        case ModelKind::chi2: {
            double d1 = kurt > 3.05 ? (4.0 * kurt - 6.0) / (kurt - 3.0) : 20.0;
            d1 = std::clamp(d1, 0.2, 50.0);
            double b0 = d1 > 2.1 ? d1 / (d1 - 2.0) : 1.0;
            if (const auto* p = reference ? std::get_if<Chi2Params>(&reference->params()) : nullptr) {
                d1 = p->d1;
                b0 = p->beta0;
            }
            start0 = std::log(d1);
            start1 = std::log(b0);
            break;
        }
        case ModelKind::inv_chi2: {
            double d2 = 1.0, b0 = 1.0;
            if (const auto* p = reference ? std::get_if<InvChi2Params>(&reference->params()) : nullptr) {
                d2 = p->d2;
                b0 = p->beta0;
            }
            start0 = std::log(d2);
            start1 = std::log(b0);
            break;
        }
        case ModelKind::lognormal: {
            double s = 1.0, mu = 0.5;
            if (const auto* p = reference ? std::get_if<LogNormalParams>(&reference->params()) : nullptr) {
                s = p->s;
                mu = p->mu;
            }
            start0 = std::log(s);
            start1 = mu;
            break;
        }
        default: break;
    }

    const auto make_model = [&](const std::vector<double>& t) {
        switch (kind) {
            case ModelKind::chi2:
                return DistributionModel::chi2(std::clamp(std::exp(t[0]), 1e-3, 1e3),
                                               std::clamp(std::exp(t[1]), 1e-4, 1e4));
            case ModelKind::inv_chi2:
                return DistributionModel::inv_chi2(std::clamp(std::exp(t[0]), 1e-3, 1e3),
                                                   std::clamp(std::exp(t[1]), 1e-4, 1e4));
            default:
                return DistributionModel::lognormal(std::clamp(std::exp(t[0]), 1e-3, 10.0),
                                                    std::clamp(t[1], -20.0, 20.0));
        }
    };

    const auto objective = [&](const std::vector<double>& t) { return nll_for(make_model(t)); };
    const auto r = detail::nelder_mead(objective, {start0, start1}, {0.3, 0.3}, 1e-10, 400);
    if (!std::isfinite(r.fx)) throw OptimizationFailureError("amended fit produced non-finite likelihood");

    AmendedFit out{make_model(r.x), -r.fx, 2.0 * 2.0 + 2.0 * r.fx, std::nullopt, 0.0};
    if (reference) {
        out.reference = *reference;
        out.max_param_divergence = marginal_detail::param_divergence(out.model, *reference);
    }
    return out;
}

}  // namespace sustat
