#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "sustat/detail/optimize.hpp"
#include "sustat/detail/quadrature.hpp"
#include "sustat/detail/special.hpp"
#include "sustat/detail/stats.hpp"
#include "sustat/errors.hpp"
#include "sustat/windowing.hpp"

namespace sustat {

enum class ModelKind { chi2, inv_chi2, lognormal, mixed };

inline const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::chi2: return "chi2";
        case ModelKind::inv_chi2: return "inv_chi2";
        case ModelKind::lognormal: return "lognormal";
        case ModelKind::mixed: return "mixed";
    }
    return "?";
}

// f1: chi-squared volatility density with shape d1 and mean beta0
// (a Gamma(d1/2, 2*beta0/d1) law).
struct Chi2Params {
    double d1 = 1.0;
    double beta0 = 1.0;
};

// f2: inverse chi-squared density with shape d2 and mean beta0 for every
// d2 > 0 (an inverse-gamma law with shape d2/2 + 1).
struct InvChi2Params {
    double d2 = 1.0;
    double beta0 = 1.0;
};

// f3: lognormal density; mu = ln(beta0) - s^2/2 pins the mean to beta0.
struct LogNormalParams {
    double s = 1.0;
    double mu = 0.0;
};

// Law of kappa*exp(X0) + (1-kappa)*chi_scale*Chi2(n_dof), with
// X0 ~ N(x0_mu, x0_s^2). Interpolates lognormal (kappa=1) and chi-squared
// (kappa=0) volatility statistics.
struct MixedParams {
    double kappa = 0.5;
    int n_dof = 4;
    double x0_mu = 0.0;
    double x0_s = 1.0;
    double chi_scale = 1.0;
};

namespace dist_detail {

inline double lognormal_pdf(double x, double mu, double s) {
    if (x <= 0.0) return 0.0;
    const double z = (std::log(x) - mu) / s;
    return std::exp(-0.5 * z * z) / (x * s * std::sqrt(2.0 * std::numbers::pi));
}

inline double lognormal_cdf(double x, double mu, double s) {
    if (x <= 0.0) return 0.0;
    return detail::normal_cdf((std::log(x) - mu) / s);
}

inline double gamma_pdf(double x, double shape, double scale) {
    if (x <= 0.0) return 0.0;
    return std::exp(-std::lgamma(shape) - shape * std::log(scale) + (shape - 1.0) * std::log(x) - x / scale);
}

}  // namespace dist_detail

// Tabulated density/CDF of the Mixed law, built once per parameter set by
// numerical convolution of the lognormal and scaled chi-squared parts.
// The gamma side is integrated with the substitution b = y * s^(2/n), which
// removes the b^(n/2-1) endpoint singularity for every n >= 1.
struct MixedAccuracy {
    std::size_t grid_points = 512;
    double rel_tol = 1e-6;
};

class MixedDensity {
public:
    MixedDensity(const MixedParams& p, MixedAccuracy acc = {}) : p_(p) {
        validate(p);
        build(acc);
    }

    static void validate(const MixedParams& p) {
        if (!(p.kappa >= 0.0 && p.kappa <= 1.0)) throw DomainError("kappa must lie in [0, 1]");
        if (p.n_dof < 1) throw DomainError("n_dof must be >= 1");
        if (!(p.x0_s > 0.0)) throw DomainError("x0_s must be positive");
        if (!(p.chi_scale > 0.0)) throw DomainError("chi_scale must be positive");
    }

    double pdf(double y) const {
        if (y <= 0.0) return 0.0;
        if (pure_gamma()) return dist_detail::gamma_pdf(y, 0.5 * p_.n_dof, gamma_theta());
        if (pure_lognormal()) return dist_detail::lognormal_pdf(y, p_.x0_mu, p_.x0_s);
        const double ly = std::log(y);
        return std::exp(interp_logpdf(ly));
    }

    double cdf(double y) const {
        if (y <= 0.0) return 0.0;
        if (pure_gamma()) return detail::gamma_p(0.5 * p_.n_dof, y / gamma_theta());
        if (pure_lognormal()) return dist_detail::lognormal_cdf(y, p_.x0_mu, p_.x0_s);
        const double ly = std::log(y);
        if (ly <= ly_.front()) return cdf_.front() * std::exp(ly - ly_.front());
        if (ly >= ly_.back()) return cdf_.back();
        const std::size_t j = segment(ly);
        const double t = (ly - ly_[j]) / (ly_[j + 1] - ly_[j]);
        return cdf_[j] + t * (cdf_[j + 1] - cdf_[j]);
    }

    double quantile(double prob) const {
        if (!(prob > 0.0 && prob < 1.0)) throw DomainError("quantile needs prob in (0, 1)");
        if (pure_gamma()) return gamma_theta() * detail::gamma_p_inv(0.5 * p_.n_dof, prob);
        if (pure_lognormal()) return std::exp(p_.x0_mu + p_.x0_s * detail::normal_quantile(prob));
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), prob);
        if (it == cdf_.begin()) return std::exp(ly_.front());
        if (it == cdf_.end()) return std::exp(ly_.back());
        const std::size_t j = static_cast<std::size_t>(it - cdf_.begin());
        const double t = (prob - cdf_[j - 1]) / (cdf_[j] - cdf_[j - 1]);
        return std::exp(ly_[j - 1] + t * (ly_[j] - ly_[j - 1]));
    }

    double grid_lo() const { return std::exp(ly_.front()); }
    double grid_hi() const { return std::exp(ly_.back()); }
    double normalization() const { return norm_; }   // trapezoid mass over the grid

private:
    bool pure_gamma() const { return p_.kappa <= 0.0; }
    bool pure_lognormal() const { return p_.kappa >= 1.0; }
    double gamma_theta() const { return 2.0 * (1.0 - p_.kappa) * p_.chi_scale; }
    double a_logloc() const { return p_.x0_mu + std::log(p_.kappa); }

    std::size_t segment(double ly) const {
        const auto it = std::upper_bound(ly_.begin(), ly_.end(), ly);
        const std::size_t j = static_cast<std::size_t>(it - ly_.begin());
        return std::min(std::max<std::size_t>(j, 1) - 1, ly_.size() - 2);
    }

    // Cubic (4-point Lagrange) interpolation of ln f in ln y; linear-slope
    // extrapolation into the tails.
    double interp_logpdf(double ly) const {
        const std::size_t n = ly_.size();
        if (ly <= ly_.front()) {
            const double slope = (lf_[1] - lf_[0]) / (ly_[1] - ly_[0]);
            return lf_[0] + slope * (ly - ly_[0]);
        }
        if (ly >= ly_.back()) {
            const double slope = (lf_[n - 1] - lf_[n - 2]) / (ly_[n - 1] - ly_[n - 2]);
            return lf_[n - 1] + slope * (ly - ly_[n - 1]);
        }
        std::size_t j = segment(ly);
        if (j == 0) j = 1;
        if (j > n - 3) j = n - 3;
        const double* xs = ly_.data() + (j - 1);
        const double* fs = lf_.data() + (j - 1);
        double out = 0.0;
        for (int i = 0; i < 4; ++i) {
            double term = fs[i];
            for (int k = 0; k < 4; ++k) {
                if (k == i) continue;
                term *= (ly - xs[k]) / (xs[i] - xs[k]);
            }
            out += term;
        }
        return out;
    }

    double convolve_at(double y, double rel_tol) const {
        const double n = static_cast<double>(p_.n_dof);
        const double theta = gamma_theta();
        const double la = a_logloc();
        const double log_pref = -std::lgamma(0.5 * n) - 0.5 * n * std::log(theta) + 0.5 * n * std::log(y) +
                                std::log(2.0 / n);
        const auto integrand = [&](double s) {
            if (s <= 0.0) s = 0.0;
            const double b = y * std::pow(s, 2.0 / n);
            const double a = y - b;
            if (a <= 0.0) return 0.0;
            const double z = (std::log(a) - la) / p_.x0_s;
            const double log_fa = -0.5 * z * z - std::log(a * p_.x0_s) - 0.5 * std::log(2.0 * std::numbers::pi);
            const double e = log_pref - b / theta + log_fa;
            return e < -700.0 ? 0.0 : std::exp(e);
        };

        // Subdivide [0, 1] at images of both components' quantiles so narrow
        // bumps cannot be missed by the first Kronrod samples.
        static constexpr double qs[] = {1e-12, 1e-8, 1e-4, 0.02, 0.2, 0.5, 0.8, 0.98, 1.0 - 1e-4, 1.0 - 1e-8};
        std::vector<double> cuts{0.0, 1.0};
        for (double q : qs) {
            const double aq = std::exp(la + p_.x0_s * detail::normal_quantile(q));
            if (aq > 0.0 && aq < y) cuts.push_back(std::pow((y - aq) / y, 0.5 * n));
            const double bq = theta * detail::gamma_p_inv(0.5 * n, q);
            if (bq > 0.0 && bq < y) cuts.push_back(std::pow(bq / y, 0.5 * n));
        }
        std::sort(cuts.begin(), cuts.end());
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            if (cuts[i + 1] - cuts[i] < 1e-14) continue;
            total += detail::integrate_adaptive(integrand, cuts[i], cuts[i + 1], rel_tol, 60, false, 1).value;
        }
        return total;
    }

    void build(MixedAccuracy acc) {
        if (pure_gamma() || pure_lognormal()) return;   // closed forms, no cache
        constexpr double eps = 1e-10;
        const double n = static_cast<double>(p_.n_dof);
        const double theta = gamma_theta();
        const double la = a_logloc();
        const double qa_lo = std::exp(la + p_.x0_s * detail::normal_quantile(eps));
        const double qa_hi = std::exp(la + p_.x0_s * detail::normal_quantile(1.0 - 0.5 * eps));
        const double qb_lo = theta * detail::gamma_p_inv(0.5 * n, eps);
        const double qb_hi = theta * detail::gamma_q_inv(0.5 * n, 0.5 * eps);
        const double y_lo = std::max(qa_lo, qb_lo);
        const double y_hi = 2.0 * std::max(qa_hi, qb_hi);

        const std::size_t m = std::max<std::size_t>(acc.grid_points, 64);
        ly_.resize(m);
        lf_.resize(m);
        const double l0 = std::log(y_lo), l1 = std::log(y_hi);
        for (std::size_t i = 0; i < m; ++i) {
            ly_[i] = l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(m - 1);
            const double f = convolve_at(std::exp(ly_[i]), acc.rel_tol);
            lf_[i] = std::log(std::max(f, 1e-320));
        }
        // Per-cell Simpson in log space with the interpolant at midpoints;
        // the CDF then integrates the tabulated density to ~1e-8 instead of
        // the O(h^2) a trapezoid would give on this grid.
        cdf_.resize(m);
        cdf_[0] = 0.0;
        for (std::size_t i = 1; i < m; ++i) {
            const double h = ly_[i] - ly_[i - 1];
            const double mid = 0.5 * (ly_[i - 1] + ly_[i]);
            const double g0 = std::exp(lf_[i - 1] + ly_[i - 1]);
            const double gm = std::exp(interp_logpdf(mid) + mid);
            const double g1 = std::exp(lf_[i] + ly_[i]);
            cdf_[i] = cdf_[i - 1] + (h / 6.0) * (g0 + 4.0 * gm + g1);
        }
        norm_ = cdf_.back();
    }

    MixedParams p_;
    std::vector<double> ly_, lf_, cdf_;
    double norm_ = 1.0;
};

// Tagged volatility-density model. Value-semantic; the Mixed variant owns a
// shared immutable convolution cache.
class DistributionModel {
public:
    using Params = std::variant<Chi2Params, InvChi2Params, LogNormalParams, MixedParams>;

    static DistributionModel chi2(double d1, double beta0) {
        if (!(d1 > 0.0)) throw DomainError("d1 must be positive");
        if (!(beta0 > 0.0)) throw DomainError("beta0 must be positive");
        return DistributionModel(Chi2Params{d1, beta0});
    }
    static DistributionModel inv_chi2(double d2, double beta0) {
        if (!(d2 > 0.0)) throw DomainError("d2 must be positive");
        if (!(beta0 > 0.0)) throw DomainError("beta0 must be positive");
        return DistributionModel(InvChi2Params{d2, beta0});
    }
    static DistributionModel lognormal(double s, double mu) {
        if (!(s > 0.0)) throw DomainError("s must be positive");
        return DistributionModel(LogNormalParams{s, mu});
    }
    // Lognormal with the mean pinned to beta0: mu = ln(beta0) - s^2/2.
    static DistributionModel lognormal_mean(double s, double beta0) {
        if (!(beta0 > 0.0)) throw DomainError("beta0 must be positive");
        return lognormal(s, std::log(beta0) - 0.5 * s * s);
    }
    static DistributionModel mixed(const MixedParams& p, MixedAccuracy acc = {}) {
        DistributionModel m(p);
        m.mixed_cache_ = std::make_shared<const MixedDensity>(p, acc);
        return m;
    }

    ModelKind kind() const {
        return static_cast<ModelKind>(params_.index());
    }
    const Params& params() const { return params_; }

    double density(double beta) const {
        if (!(beta > 0.0)) throw DomainError("density needs beta > 0");
        if (const auto* p = std::get_if<Chi2Params>(&params_))
            return dist_detail::gamma_pdf(beta, 0.5 * p->d1, 2.0 * p->beta0 / p->d1);
        if (const auto* p = std::get_if<InvChi2Params>(&params_)) {
            // inverse-gamma with shape d2/2 + 1 and scale d2*beta0/2
            const double alpha = 0.5 * p->d2 + 1.0;
            const double c = 0.5 * p->d2 * p->beta0;
            return std::exp(alpha * std::log(c) - std::lgamma(alpha) - (alpha + 1.0) * std::log(beta) - c / beta);
        }
        if (const auto* p = std::get_if<LogNormalParams>(&params_))
            return dist_detail::lognormal_pdf(beta, p->mu, p->s);
        return mixed_cache_->pdf(beta);
    }

    double cdf(double beta) const {
        if (beta <= 0.0) return 0.0;
        if (const auto* p = std::get_if<Chi2Params>(&params_))
            return detail::gamma_p(0.5 * p->d1, beta * p->d1 / (2.0 * p->beta0));
        if (const auto* p = std::get_if<InvChi2Params>(&params_)) {
            const double alpha = 0.5 * p->d2 + 1.0;
            const double c = 0.5 * p->d2 * p->beta0;
            return detail::gamma_q(alpha, c / beta);
        }
        if (const auto* p = std::get_if<LogNormalParams>(&params_))
            return dist_detail::lognormal_cdf(beta, p->mu, p->s);
        return mixed_cache_->cdf(beta);
    }

    // Analytic mean: beta0 for chi2/inv-chi2, exp(mu + s^2/2) for lognormal,
    // kappa*exp(x0_mu + x0_s^2/2) + (1-kappa)*n*chi_scale for mixed.
    double mean() const {
        if (const auto* p = std::get_if<Chi2Params>(&params_)) return p->beta0;
        if (const auto* p = std::get_if<InvChi2Params>(&params_)) return p->beta0;
        if (const auto* p = std::get_if<LogNormalParams>(&params_)) return std::exp(p->mu + 0.5 * p->s * p->s);
        const auto& p = std::get<MixedParams>(params_);
        return p.kappa * std::exp(p.x0_mu + 0.5 * p.x0_s * p.x0_s) +
               (1.0 - p.kappa) * static_cast<double>(p.n_dof) * p.chi_scale;
    }

    // E[1/beta] where finite: needed for the marginal variance identity.
    // Infinite for chi2 with d1 <= 2 and for mixed with kappa = 0, n <= 2.
    double mean_inverse() const {
        constexpr double inf = std::numeric_limits<double>::infinity();
        if (const auto* p = std::get_if<Chi2Params>(&params_))
            return p->d1 > 2.0 ? p->d1 / (p->beta0 * (p->d1 - 2.0)) : inf;
        if (const auto* p = std::get_if<InvChi2Params>(&params_))
            return (p->d2 + 2.0) / (p->d2 * p->beta0);
        if (const auto* p = std::get_if<LogNormalParams>(&params_)) return std::exp(-p->mu + 0.5 * p->s * p->s);
        const auto [lo, hi] = quantile_range(1e-12);
        return detail::integrate_adaptive(
                   [this](double ly) {
                       const double b = std::exp(ly);
                       return density(b);   // (1/b)*f(b)*b dly
                   },
                   std::log(lo), std::log(hi), 1e-9, 2000, false)
            .value;
    }

    // [lo, hi] covering at least quantiles [eps, 1-eps].
    std::pair<double, double> quantile_range(double eps) const {
        if (const auto* p = std::get_if<Chi2Params>(&params_)) {
            const double theta = 2.0 * p->beta0 / p->d1;
            return {theta * detail::gamma_p_inv(0.5 * p->d1, eps), theta * detail::gamma_q_inv(0.5 * p->d1, eps)};
        }
        if (const auto* p = std::get_if<InvChi2Params>(&params_)) {
            const double alpha = 0.5 * p->d2 + 1.0;
            const double c = 0.5 * p->d2 * p->beta0;
            return {c / detail::gamma_q_inv(alpha, eps), c / detail::gamma_p_inv(alpha, eps)};
        }
        if (const auto* p = std::get_if<LogNormalParams>(&params_)) {
            const double z = detail::normal_quantile(eps);
            return {std::exp(p->mu + p->s * z), std::exp(p->mu - p->s * z)};
        }
        return {mixed_cache_->quantile(eps), mixed_cache_->quantile(1.0 - eps)};
    }

    const MixedDensity* mixed_cache() const { return mixed_cache_.get(); }

private:
    explicit DistributionModel(Params p) : params_(p) {}

    Params params_;
    std::shared_ptr<const MixedDensity> mixed_cache_;
};

// Free-function form of the density, matching the operation signature used
// throughout: f_i(beta) for the tagged model.
inline double density(const DistributionModel& model, double beta) { return model.density(beta); }

// ---------------------------------------------------------------------------
// Histograms

struct Histogram1D {
    std::vector<double> bin_edges;
    std::vector<double> densities;   // probability density per bin
    std::size_t count = 0;

    std::string to_csv() const {
        std::ostringstream os;
        os << "bin_left,bin_right,density\n";
        os.precision(17);
        for (std::size_t i = 0; i < densities.size(); ++i)
            os << bin_edges[i] << ',' << bin_edges[i + 1] << ',' << densities[i] << '\n';
        return os.str();
    }
};

using BetaHistogram = Histogram1D;

struct Binning {
    std::size_t bins = 0;     // 0 = Freedman-Diaconis
    bool log_scale = false;   // equal-width bins in ln(x)
};

namespace dist_detail {

inline double quantile_sorted(std::span<const double> sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= sorted.size()) return sorted.back();
    const double t = pos - static_cast<double>(i);
    return sorted[i] + t * (sorted[i + 1] - sorted[i]);
}

}  // namespace dist_detail

inline Histogram1D histogram_density(std::span<const double> values, Binning binning = {}) {
    if (values.size() < 2) throw TooFewSamplesError("histogram needs at least 2 samples");
    std::vector<double> xs(values.begin(), values.end());
    if (binning.log_scale) {
        for (double& x : xs) {
            if (x <= 0.0) throw DomainError("log-scale histogram needs positive samples");
            x = std::log(x);
        }
    }
    std::sort(xs.begin(), xs.end());
    const double lo = xs.front(), hi = xs.back();
    if (!(hi > lo)) throw DomainError("histogram needs non-degenerate samples");

    std::size_t nbins = binning.bins;
    if (nbins == 0) {
        const double iqr = dist_detail::quantile_sorted(xs, 0.75) - dist_detail::quantile_sorted(xs, 0.25);
        const double h = 2.0 * iqr / std::cbrt(static_cast<double>(xs.size()));
        nbins = h > 0.0 ? static_cast<std::size_t>(std::ceil((hi - lo) / h)) : 0;
        nbins = std::clamp<std::size_t>(nbins, 1, 4096);
    }

    Histogram1D out;
    out.count = xs.size();
    out.bin_edges.resize(nbins + 1);
    for (std::size_t i = 0; i <= nbins; ++i) {
        const double e = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(nbins);
        out.bin_edges[i] = binning.log_scale ? std::exp(e) : e;
    }
    std::vector<std::size_t> counts(nbins, 0);
    const double width = (hi - lo) / static_cast<double>(nbins);
    for (double x : xs) {
        std::size_t b = static_cast<std::size_t>((x - lo) / width);
        if (b >= nbins) b = nbins - 1;
        ++counts[b];
    }
    out.densities.resize(nbins);
    for (std::size_t b = 0; b < nbins; ++b) {
        const double w = out.bin_edges[b + 1] - out.bin_edges[b];
        out.densities[b] = static_cast<double>(counts[b]) / (static_cast<double>(xs.size()) * w);
    }
    return out;
}

// Density-normalized histogram of the extracted betas.
inline BetaHistogram histogram(const BetaSeries& betas, Binning binning = {}) {
    for (double b : betas.betas)
        if (!(b > 0.0)) throw DomainError("beta samples must be positive");
    return histogram_density(betas.betas, binning);
}

// ---------------------------------------------------------------------------
// Maximum-likelihood fitting

struct FitStats {
    double log_likelihood = 0.0;
    double aic = 0.0;
    double ks_stat = 0.0;
    double ks_pvalue = 0.0;
    std::size_t n_samples = 0;
    std::size_t free_parameters = 0;
    bool constrained_mean = true;
};

struct FittedModel {
    DistributionModel model;
    FitStats stats;
};

namespace dist_detail {

inline FitStats make_stats(const DistributionModel& model, std::span<const double> samples, double loglik,
                           std::size_t free_params, bool constrained) {
    FitStats st;
    st.log_likelihood = loglik;
    st.free_parameters = free_params;
    st.constrained_mean = constrained;
    st.n_samples = samples.size();
    st.aic = 2.0 * static_cast<double>(free_params) - 2.0 * loglik;
    st.ks_stat = detail::ks_statistic(std::vector<double>(samples.begin(), samples.end()),
                                      [&](double x) { return model.cdf(x); });
    st.ks_pvalue = detail::ks_pvalue(st.ks_stat, samples.size());
    return st;
}

inline double require_spread(std::span<const double> xs) {
    const double m = detail::mean(xs);
    const double v = detail::population_variance(xs, m);
    if (v <= 0.0 || !std::isfinite(v))
        throw OptimizationFailureError("degenerate sample: zero spread, no meaningful fit");
    return m;
}

}  // namespace dist_detail

struct KappaFitOptions {
    double grid_step = 0.01;
    MixedAccuracy fit_accuracy{224, 1e-5};
    MixedAccuracy final_accuracy{512, 1e-6};
    std::size_t nll_bins = 256;
};

struct KappaProfilePoint {
    double kappa = 0.0;
    double ks = 0.0;
    double log_likelihood = 0.0;
};

struct KappaFit {
    FittedModel fit;                         // at the KS-optimal grid kappa
    std::vector<KappaProfilePoint> profile;  // full kappa-vs-KS scan
    double kappa_refined = 0.0;              // quadratic refinement of the minimum
};

KappaFit fit_kappa(const BetaSeries& betas, int n_dof = 4, const KappaFitOptions& options = {});

// MLE fit of one volatility-density family to the extracted betas. With
// constrain_mean the mean is pinned to the sample beta0 and only the shape
// parameter is free (for chi2 the two coincide: the gamma MLE of the mean
// is the sample mean either way). ModelKind::mixed delegates to fit_kappa.
inline FittedModel fit_mle(const BetaSeries& betas, ModelKind kind, bool constrain_mean = true) {
    const auto& xs = betas.betas;
    if (xs.size() < 30) throw TooFewSamplesError("fit_mle needs at least 30 samples");
    for (double x : xs)
        if (!(x > 0.0)) throw TooFewSamplesError("beta samples must be positive");
    const double xbar = dist_detail::require_spread(xs);
    const double n = static_cast<double>(xs.size());

    double sum_log = 0.0, sum_inv = 0.0;
    for (double x : xs) {
        sum_log += std::log(x);
        sum_inv += 1.0 / x;
    }

    switch (kind) {
        case ModelKind::chi2: {
            // NLL(a) with beta0 = xbar; a = d1/2. The scale MLE makes the
            // fitted mean the sample mean, so the constraint is inactive.
            const auto nll = [&](double ln_a) {
                const double a = std::exp(ln_a);
                return n * std::lgamma(a) - n * a * std::log(a / xbar) - (a - 1.0) * sum_log + a * n;
            };
            const auto r = detail::brent_minimize(nll, std::log(5e-4), std::log(500.0), 1e-10);
            if (r.hit_lower || r.hit_upper)
                throw OptimizationFailureError("chi2 shape hit optimization bounds");
            const double d1 = 2.0 * std::exp(r.x);
            auto model = DistributionModel::chi2(d1, xbar);
            return {model, dist_detail::make_stats(model, xs, -r.fx, constrain_mean ? 1 : 2, constrain_mean)};
        }
        case ModelKind::inv_chi2: {
            // alpha = d2/2 + 1; for fixed shape the scale MLE is
            // c = n*alpha / sum(1/x).
            const auto nll_at = [&](double d2, double c) {
                const double alpha = 0.5 * d2 + 1.0;
                return -(n * (alpha * std::log(c) - std::lgamma(alpha)) - (alpha + 1.0) * sum_log - c * sum_inv);
            };
            const auto profile = [&](double ln_d2) {
                const double d2 = std::exp(ln_d2);
                const double c = constrain_mean ? 0.5 * d2 * xbar : n * (0.5 * d2 + 1.0) / sum_inv;
                return nll_at(d2, c);
            };
            const auto r = detail::brent_minimize(profile, std::log(1e-3), std::log(1e3), 1e-10);
            if (r.hit_lower || r.hit_upper)
                throw OptimizationFailureError("inv_chi2 shape hit optimization bounds");
            const double d2 = std::exp(r.x);
            const double beta0 = constrain_mean ? xbar : 2.0 * (n * (0.5 * d2 + 1.0) / sum_inv) / d2;
            auto model = DistributionModel::inv_chi2(d2, beta0);
            return {model, dist_detail::make_stats(model, xs, -r.fx, constrain_mean ? 1 : 2, constrain_mean)};
        }
        case ModelKind::lognormal: {
            if (!constrain_mean) {
                // Closed form: mu = mean(ln x), s^2 = population var(ln x).
                const double mu = sum_log / n;
                double ss = 0.0;
                for (double x : xs) {
                    const double d = std::log(x) - mu;
                    ss += d * d;
                }
                const double s = std::sqrt(ss / n);
                if (!(s > 0.0)) throw OptimizationFailureError("lognormal fit: zero spread in log samples");
                auto model = DistributionModel::lognormal(s, mu);
                double loglik = 0.0;
                for (double x : xs) loglik += std::log(model.density(x));
                return {model, dist_detail::make_stats(model, xs, loglik, 2, false)};
            }
            const auto nll = [&](double ln_s) {
                const double s = std::exp(ln_s);
                const double mu = std::log(xbar) - 0.5 * s * s;
                double acc = n * std::log(s);
                for (double x : xs) {
                    const double d = std::log(x) - mu;
                    acc += 0.5 * d * d / (s * s);
                }
                return acc + sum_log + 0.5 * n * std::log(2.0 * std::numbers::pi);
            };
            const auto r = detail::brent_minimize(nll, std::log(1e-3), std::log(10.0), 1e-10);
            if (r.hit_lower || r.hit_upper)
                throw OptimizationFailureError("lognormal shape hit optimization bounds");
            auto model = DistributionModel::lognormal_mean(std::exp(r.x), xbar);
            return {model, dist_detail::make_stats(model, xs, -r.fx, 1, true)};
        }
        case ModelKind::mixed:
            return fit_kappa(betas).fit;
    }
    throw DomainError("unknown model kind");
}

namespace dist_detail {

struct BinnedSamples {
    std::vector<double> centers;
    std::vector<double> counts;
};

inline BinnedSamples log_bin(std::span<const double> xs, std::size_t nbins) {
    BinnedSamples out;
    double lo = xs[0], hi = xs[0];
    for (double x : xs) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const double l0 = std::log(lo) - 1e-9, l1 = std::log(hi) + 1e-9;
    out.centers.resize(nbins);
    out.counts.assign(nbins, 0.0);
    for (std::size_t b = 0; b < nbins; ++b)
        out.centers[b] = std::exp(l0 + (l1 - l0) * (static_cast<double>(b) + 0.5) / static_cast<double>(nbins));
    for (double x : xs) {
        auto b = static_cast<std::size_t>((std::log(x) - l0) / (l1 - l0) * static_cast<double>(nbins));
        if (b >= nbins) b = nbins - 1;
        out.counts[b] += 1.0;
    }
    return out;
}

inline double binned_nll(const BinnedSamples& bins, const DistributionModel& model) {
    double nll = 0.0;
    for (std::size_t b = 0; b < bins.centers.size(); ++b) {
        if (bins.counts[b] == 0.0) continue;
        const double f = model.density(bins.centers[b]);
        nll -= bins.counts[b] * std::log(std::max(f, 1e-320));
    }
    return nll;
}

}  // namespace dist_detail

// Grid search over kappa with the remaining Mixed parameters fitted by MLE
// at each grid point; the returned model is the KS-statistic minimizer.
//
// Both component means are pinned to the sample beta0 (x0_mu = ln(beta0) -
// x0_s^2/2 and chi_scale = beta0/n), so kappa is the lognormal share of the
// overall mean and the only remaining shape freedom at fixed kappa is x0_s.
// Without that second constraint kappa is not identifiable at all: a free
// x0_mu absorbs it exactly (kappa*exp(X0) = exp(X0 + ln kappa)).
inline KappaFit fit_kappa(const BetaSeries& betas, int n_dof, const KappaFitOptions& options) {
    const auto& xs = betas.betas;
    if (xs.size() < 100) throw TooFewSamplesError("fit_kappa needs at least 100 samples");
    if (n_dof < 1) throw DomainError("n_dof must be >= 1");
    dist_detail::require_spread(xs);
    const double beta0 = betas.beta0;
    const double nd = static_cast<double>(n_dof);

    const auto bins = dist_detail::log_bin(xs, options.nll_bins);
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    const auto ks_of = [&](const DistributionModel& m) {
        const double n = static_cast<double>(sorted.size());
        double d = 0.0;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            const double f = m.cdf(sorted[i]);
            d = std::max(d, std::max(f - static_cast<double>(i) / n, (static_cast<double>(i) + 1.0) / n - f));
        }
        return d;
    };

    const auto make_params = [&](double kappa, double s) {
        MixedParams p;
        p.kappa = kappa;
        p.n_dof = n_dof;
        p.x0_s = s;
        p.x0_mu = std::log(beta0) - 0.5 * s * s;
        p.chi_scale = beta0 / nd;
        return p;
    };

    constexpr double s_min = 0.02, s_max = 5.0;

    struct GridPoint {
        MixedParams params;
        double nll = 0.0;
    };

    // Inner MLE over x0_s at fixed kappa, warm started along the grid.
    double warm_s = 1.0;
    bool have_warm = false;
    const auto fit_at = [&](double kappa) {
        GridPoint gp;
        if (kappa <= 0.0) {   // no lognormal component left, nothing to fit
            gp.params = make_params(0.0, 1.0);
            gp.nll = dist_detail::binned_nll(bins, DistributionModel::mixed(gp.params, options.fit_accuracy));
            return gp;
        }
        const auto nll_s = [&](double ln_s) {
            const auto p = make_params(kappa, std::exp(ln_s));
            return dist_detail::binned_nll(bins, DistributionModel::mixed(p, options.fit_accuracy));
        };
        // Bracket around the warm start, falling back to the full range.
        double lo = std::log(s_min), hi = std::log(s_max);
        if (have_warm) {
            lo = std::max(lo, std::log(warm_s) - 0.8);
            hi = std::min(hi, std::log(warm_s) + 0.8);
        }
        auto r = detail::brent_minimize(nll_s, lo, hi, 1e-4, 40);
        if (have_warm && (r.hit_lower || r.hit_upper)) {
            const auto wide = detail::brent_minimize(nll_s, std::log(s_min), std::log(s_max), 1e-4, 60);
            if (wide.fx < r.fx) r = wide;
        }
        warm_s = std::exp(r.x);
        have_warm = true;
        gp.params = make_params(kappa, warm_s);
        gp.nll = r.fx;
        return gp;
    };

    const double step = options.grid_step > 0.0 ? options.grid_step : 0.01;
    std::vector<KappaProfilePoint> profile;
    std::vector<GridPoint> grid_fits;
    std::size_t best_idx = 0;
    double best_ks = std::numeric_limits<double>::infinity();
    for (double kappa = 0.0; kappa <= 1.0 + 1e-12; kappa += step) {
        const double k = std::min(kappa, 1.0);
        GridPoint gp = fit_at(k);
        const auto model = DistributionModel::mixed(gp.params, options.fit_accuracy);
        KappaProfilePoint pp;
        pp.kappa = k;
        pp.ks = ks_of(model);
        pp.log_likelihood = -gp.nll;
        profile.push_back(pp);
        grid_fits.push_back(gp);
        if (pp.ks < best_ks) {
            best_ks = pp.ks;
            best_idx = profile.size() - 1;
        }
        if (k >= 1.0) break;
    }

    // Quadratic refinement of the KS minimum through its grid neighbours.
    double kappa_refined = profile[best_idx].kappa;
    if (best_idx > 0 && best_idx + 1 < profile.size()) {
        const auto &l = profile[best_idx - 1], &c = profile[best_idx], &r = profile[best_idx + 1];
        const double denom = (l.ks - 2.0 * c.ks + r.ks);
        if (denom > 0.0) {
            const double shift = 0.5 * (l.ks - r.ks) / denom;
            kappa_refined = std::clamp(c.kappa + shift * step, l.kappa, r.kappa);
        }
    }

    const auto best_model = DistributionModel::mixed(grid_fits[best_idx].params, options.final_accuracy);
    double loglik = 0.0;
    for (double x : xs) loglik += std::log(std::max(best_model.density(x), 1e-320));
    // Free parameters at the optimum: kappa, plus x0_s when a lognormal part exists.
    const std::size_t free_params = best_idx == 0 ? 1 : 2;
    FittedModel fit{best_model, dist_detail::make_stats(best_model, xs, loglik, free_params, true)};
    return KappaFit{std::move(fit), std::move(profile), kappa_refined};
}

}  // namespace sustat
