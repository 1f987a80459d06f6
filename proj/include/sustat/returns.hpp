#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sustat/detail/stats.hpp"
#include "sustat/errors.hpp"
#include "sustat/ingest.hpp"

namespace sustat {

// Raw lag-tau log returns before normalization.
struct RawReturns {
    std::vector<double> values;
    std::size_t lag_tau = 1;
    std::size_t dropped_count = 0;   // pairs removed at session boundaries
};

// Normalized returns u_i with zero mean and unit variance (population
// convention), plus the moments of the raw series they came from.
struct ReturnSeries {
    std::vector<double> values;
    std::size_t lag_tau = 1;
    double raw_mean = 0.0;
    double raw_std = 0.0;
    std::size_t dropped_count = 0;

    std::size_t size() const noexcept { return values.size(); }
};

// R_i = log(S_{i+tau}/S_i). Intraday pairs that straddle a session boundary
// are dropped and counted; daily pairs are always kept.
inline RawReturns log_returns(const PriceSeries& series, std::size_t tau) {
    if (tau == 0) throw DomainError("tau must be positive");
    if (series.size() <= tau)
        throw SeriesTooShortError("need more than tau=" + std::to_string(tau) + " records, have " +
                                  std::to_string(series.size()));
    RawReturns out;
    out.lag_tau = tau;
    out.values.reserve(series.size() - tau);
    const bool check_sessions = series.resolution == Resolution::intraday;
    for (std::size_t i = 0; i + tau < series.size(); ++i) {
        const auto& a = series.records[i];
        const auto& b = series.records[i + tau];
        if (check_sessions && a.session_id != b.session_id) {
            ++out.dropped_count;
            continue;
        }
        out.values.push_back(std::log(b.price / a.price));
    }
    return out;
}

// u_i = (R_i - <R>) / sqrt(<R^2> - <R>^2), with a refinement pass so the
// output moments are exact to roundoff.
inline ReturnSeries normalize(const RawReturns& raw) {
    if (raw.values.size() < 2) throw SeriesTooShortError("need at least 2 returns to normalize");
    const double m1 = detail::mean(raw.values);
    const double v1 = detail::population_variance(raw.values, m1);
    if (v1 <= 0.0) throw ZeroVarianceError("returns have zero variance");
    const double s1 = std::sqrt(v1);

    ReturnSeries out;
    out.lag_tau = raw.lag_tau;
    out.dropped_count = raw.dropped_count;
    out.values.resize(raw.values.size());
    for (std::size_t i = 0; i < raw.values.size(); ++i) out.values[i] = (raw.values[i] - m1) / s1;

    // Second pass removes the residual roundoff in the first-pass moments.
    const double m2 = detail::mean(out.values);
    const double s2 = std::sqrt(detail::population_variance(out.values, m2));
    for (double& u : out.values) u = (u - m2) / s2;

    out.raw_mean = m1 + s1 * m2;
    out.raw_std = s1 * s2;
    return out;
}

inline ReturnSeries compute_returns(const PriceSeries& series, std::size_t tau) {
    return normalize(log_returns(series, tau));
}

}  // namespace sustat
