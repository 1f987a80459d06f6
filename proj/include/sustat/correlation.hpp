#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sustat/detail/stats.hpp"
#include "sustat/errors.hpp"

namespace sustat {

enum class MeanMode {
    global,    // subtract the global mean from the series, then lag products
    per_lag,   // subtract head/tail means per lag (standard unbiased variant)
};

struct CorrelationFunction {
    std::vector<std::size_t> lags;
    std::vector<double> values;       // unnormalized covariances
    std::vector<double> normalized;   // values / values[0]
    std::size_t sample_count = 0;     // M, for the default noise floor 2/sqrt(M)

    std::string to_csv() const {
        std::ostringstream os;
        os << "lag,c,c_normalized\n";
        os.precision(17);
        for (std::size_t i = 0; i < lags.size(); ++i)
            os << lags[i] << ',' << values[i] << ',' << normalized[i] << '\n';
        return os.str();
    }
};

// C(t) = (1/(M-t)) sum (x_i - xbar)(x_{i+t} - xbar), the paper's estimator
// with the global mean subtracted (identical on zero-mean input). C(0) is
// exactly the biased sample variance.
inline CorrelationFunction autocorrelation(std::span<const double> x, std::size_t max_lag,
                                           MeanMode mode = MeanMode::global) {
    if (x.size() < max_lag + 2) throw SeriesTooShortError("series too short for requested max_lag");
    const std::size_t m = x.size();
    CorrelationFunction out;
    out.sample_count = m;
    out.lags.resize(max_lag + 1);
    out.values.resize(max_lag + 1);
    out.normalized.resize(max_lag + 1);

    const double xbar = detail::mean(x);
    std::vector<double> y(x.begin(), x.end());
    if (mode == MeanMode::global)
        for (double& v : y) v -= xbar;

    for (std::size_t t = 0; t <= max_lag; ++t) {
        const std::size_t n = m - t;
        double acc = 0.0;
        if (mode == MeanMode::global) {
            for (std::size_t i = 0; i < n; ++i) acc += y[i] * y[i + t];
            out.values[t] = acc / static_cast<double>(n);
        } else {
            double mh = 0.0, mt = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                mh += y[i];
                mt += y[i + t];
            }
            mh /= static_cast<double>(n);
            mt /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) acc += (y[i] - mh) * (y[i + t] - mt);
            out.values[t] = acc / static_cast<double>(n);
        }
        out.lags[t] = t;
    }
    if (out.values[0] <= 0.0) throw ZeroVarianceError("series has zero variance, autocorrelation undefined");
    for (std::size_t t = 0; t <= max_lag; ++t) out.normalized[t] = out.values[t] / out.values[0];
    return out;
}

enum class DecayForm { exponential, power_law };

struct DecayFit {
    DecayForm form = DecayForm::exponential;
    double rate_gamma = 0.0;       // C ~ exp(-gamma t)
    double exponent_alpha = 0.0;   // C ~ t^-alpha
    std::size_t fit_lo = 1;        // lag range used (inclusive)
    std::size_t fit_hi = 1;
    double residual = 0.0;         // rms log-residual
    bool preferred = false;
    std::size_t excluded_nonpositive = 0;
};

struct DecayFitResult {
    std::vector<DecayFit> fits;
    std::size_t preferred_index = 0;
    const DecayFit& preferred() const { return fits[preferred_index]; }
};

struct DecayFitOptions {
    std::optional<double> noise_floor;   // default 2/sqrt(M)
    std::size_t min_points = 5;
};

// Least-squares decay fits in log space over the lags whose normalized value
// exceeds the noise floor. Non-positive lags never enter the log fits.
inline DecayFitResult fit_decay(const CorrelationFunction& corr,
                                std::initializer_list<DecayForm> forms = {DecayForm::exponential,
                                                                          DecayForm::power_law},
                                const DecayFitOptions& options = {}) {
    const double floor =
        options.noise_floor.value_or(2.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(corr.sample_count, 1))));

    std::vector<double> ts, cs;
    std::size_t nonpositive = 0;
    std::size_t last_kept = 0;
    for (std::size_t i = 1; i < corr.lags.size(); ++i) {
        const double c = corr.normalized[i];
        if (c <= 0.0) {
            ++nonpositive;
            continue;
        }
        if (c > floor) {
            ts.push_back(static_cast<double>(corr.lags[i]));
            cs.push_back(c);
            last_kept = corr.lags[i];
        }
    }
    if (ts.empty()) throw AllBelowFloorError("all lags at or below the noise floor");
    if (ts.size() < options.min_points)
        throw TooFewPointsError("only " + std::to_string(ts.size()) + " lags above the noise floor, need " +
                                std::to_string(options.min_points));

    std::vector<double> log_c(cs.size()), log_t(ts.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
        log_c[i] = std::log(cs[i]);
        log_t[i] = std::log(ts[i]);
    }

    DecayFitResult out;
    for (DecayForm form : forms) {
        DecayFit fit;
        fit.form = form;
        fit.fit_lo = static_cast<std::size_t>(ts.front());
        fit.fit_hi = last_kept;
        fit.excluded_nonpositive = nonpositive;
        if (form == DecayForm::exponential) {
            const auto ls = detail::least_squares(ts, log_c);
            fit.rate_gamma = -ls.slope;
            fit.residual = ls.rms_residual;
        } else {
            const auto ls = detail::least_squares(log_t, log_c);
            fit.exponent_alpha = -ls.slope;
            fit.residual = ls.rms_residual;
        }
        out.fits.push_back(fit);
    }
    if (out.fits.empty()) throw DomainError("no decay forms requested");
    for (std::size_t i = 1; i < out.fits.size(); ++i)
        if (out.fits[i].residual < out.fits[out.preferred_index].residual) out.preferred_index = i;
    out.fits[out.preferred_index].preferred = true;
    return out;
}

// Removes a lag-periodic modulation by subtracting per-phase means of
// detrended residuals (phase = lag mod period), so decay fitting operates
// on the envelope. Positive inputs are handled in the log domain with the
// LS power-law envelope as trend (exact pass-through for pure power laws);
// otherwise a centered moving average detrends in the linear domain.
inline CorrelationFunction deseasonalize(const CorrelationFunction& corr, std::size_t period) {
    if (period < 2) throw DomainError("period must be at least 2");
    const std::size_t max_lag = corr.lags.empty() ? 0 : corr.lags.back();
    if (max_lag < 2 * period)
        throw PeriodTooLongError("need max_lag >= 2*period (" + std::to_string(2 * period) + "), have " +
                                 std::to_string(max_lag));

    CorrelationFunction out = corr;
    const std::size_t L = corr.values.size();
    bool all_positive = true;
    for (std::size_t i = 1; i < L; ++i) all_positive = all_positive && corr.values[i] > 0.0;

    std::vector<double> seasonal(period, 0.0);
    std::vector<std::size_t> phase_n(period, 0);

    if (all_positive) {
        std::vector<double> lt(L - 1), lz(L - 1);
        for (std::size_t i = 1; i < L; ++i) {
            lt[i - 1] = std::log(static_cast<double>(corr.lags[i]));
            lz[i - 1] = std::log(corr.values[i]);
        }
        const auto env = detail::least_squares(lt, lz);
        for (std::size_t i = 1; i < L; ++i) {
            const double resid = lz[i - 1] - (env.intercept + env.slope * lt[i - 1]);
            seasonal[corr.lags[i] % period] += resid;
            ++phase_n[corr.lags[i] % period];
        }
        double mean_s = 0.0;
        for (std::size_t p = 0; p < period; ++p) {
            seasonal[p] /= std::max<std::size_t>(phase_n[p], 1);
            mean_s += seasonal[p];
        }
        mean_s /= static_cast<double>(period);
        for (double& s : seasonal) s -= mean_s;
        for (std::size_t i = 1; i < L; ++i)
            out.values[i] = std::exp(lz[i - 1] - seasonal[corr.lags[i] % period]);
    } else {
        // Centered moving average of width `period`, truncated at the edges.
        std::vector<double> trend(L, 0.0);
        const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(period / 2);
        for (std::size_t i = 1; i < L; ++i) {
            double acc = 0.0;
            std::size_t cnt = 0;
            for (std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) - half;
                 j <= static_cast<std::ptrdiff_t>(i) + half; ++j) {
                if (j < 1 || j >= static_cast<std::ptrdiff_t>(L)) continue;
                acc += corr.values[static_cast<std::size_t>(j)];
                ++cnt;
            }
            trend[i] = acc / static_cast<double>(cnt);
        }
        for (std::size_t i = 1; i < L; ++i) {
            seasonal[corr.lags[i] % period] += corr.values[i] - trend[i];
            ++phase_n[corr.lags[i] % period];
        }
        double mean_s = 0.0;
        for (std::size_t p = 0; p < period; ++p) {
            seasonal[p] /= std::max<std::size_t>(phase_n[p], 1);
            mean_s += seasonal[p];
        }
        mean_s /= static_cast<double>(period);
        for (double& s : seasonal) s -= mean_s;
        for (std::size_t i = 1; i < L; ++i) out.values[i] = corr.values[i] - seasonal[corr.lags[i] % period];
    }
    for (std::size_t i = 0; i < L; ++i) out.normalized[i] = out.values[i] / out.values[0];
    return out;
}

}  // namespace sustat
