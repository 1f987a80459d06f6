#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sustat/detail/stats.hpp"
#include "sustat/errors.hpp"
#include "sustat/returns.hpp"

namespace sustat {

// One candidate window size: the shift ensemble of mean kurtosis values.
struct WindowScanRow {
    std::size_t dt = 0;
    std::vector<std::size_t> shifts;
    std::vector<double> mean_kurtosis;   // kappa-bar per shift
    double ensemble_mean = 0.0;          // average over shifts
    double ensemble_std = 0.0;           // delta kappa-bar (across shifts)
};

struct WindowCrossing {
    double window = 0.0;        // interpolated T where kappa-bar crosses 3
    double uncertainty = 0.0;   // half candidate spacing + delta-kappa / |slope|
    std::size_t bracket_lo = 0;
    std::size_t bracket_hi = 0;
};

struct WindowScan {
    std::vector<WindowScanRow> rows;
    std::optional<WindowCrossing> crossing;
    double closest_kurtosis = 0.0;   // nearest ensemble mean to 3 (diagnostic)
    std::size_t closest_dt = 0;

    // `dt,shift,kurtosis` rows for external plotting.
    std::string to_csv() const {
        std::ostringstream os;
        os << "dt,shift,kurtosis\n";
        os.precision(17);
        for (const auto& row : rows)
            for (std::size_t s = 0; s < row.shifts.size(); ++s)
                os << row.dt << ',' << row.shifts[s] << ',' << row.mean_kurtosis[s] << '\n';
        return os.str();
    }
};

struct NoCrossingError : Error {
    NoCrossingError(std::string msg, WindowScan scan_)
        : Error(ErrorClass::no_crossing, std::move(msg)), scan(std::move(scan_)) {}
    WindowScan scan;
};

// Volatility parameters extracted window by window.
struct BetaSeries {
    std::vector<double> betas;
    std::size_t window_size = 0;
    double beta0 = 0.0;   // arithmetic mean of betas

    std::size_t size() const noexcept { return betas.size(); }
};

// Per-window kurtosis <u^4>/<u^2>^2 with raw (non-centered) moments, for
// complete windows of length dt starting at `shift`.
inline std::vector<double> window_kurtosis(const ReturnSeries& u, std::size_t dt, std::size_t shift) {
    if (dt < 4) throw WindowTooSmallError("window size must be at least 4, got " + std::to_string(dt));
    if (shift >= dt) throw DomainError("shift must be smaller than the window size");
    if (u.size() < dt + shift)
        throw SeriesTooShortError("series of length " + std::to_string(u.size()) +
                                  " has no complete window of size " + std::to_string(dt) + " at shift " +
                                  std::to_string(shift));
    const std::size_t n_windows = (u.size() - shift) / dt;
    std::vector<double> kappas;
    kappas.reserve(n_windows);
    for (std::size_t j = 0; j < n_windows; ++j) {
        const double* w = u.values.data() + shift + j * dt;
        double m2 = 0.0, m4 = 0.0;
        for (std::size_t i = 0; i < dt; ++i) {
            const double sq = w[i] * w[i];
            m2 += sq;
            m4 += sq * sq;
        }
        m2 /= static_cast<double>(dt);
        m4 /= static_cast<double>(dt);
        if (m2 <= 0.0) throw DegenerateWindowError("window has zero second moment", j);
        kappas.push_back(m4 / (m2 * m2));
    }
    return kappas;
}

// Shift ensemble of average kurtosis for one candidate window size.
inline WindowScanRow mean_kurtosis(const ReturnSeries& u, std::size_t dt, std::span<const std::size_t> shifts) {
    WindowScanRow row;
    row.dt = dt;
    for (std::size_t shift : shifts) {
        const auto kappas = window_kurtosis(u, dt, shift);
        row.shifts.push_back(shift);
        row.mean_kurtosis.push_back(detail::mean(kappas));
    }
    row.ensemble_mean = detail::mean(row.mean_kurtosis);
    double ss = 0.0;
    for (double k : row.mean_kurtosis) ss += (k - row.ensemble_mean) * (k - row.ensemble_mean);
    row.ensemble_std = row.mean_kurtosis.size() > 1
                           ? std::sqrt(ss / static_cast<double>(row.mean_kurtosis.size() - 1))
                           : 0.0;
    return row;
}

inline std::vector<std::size_t> default_window_candidates() {
    std::vector<std::size_t> dts;
    for (std::size_t dt = 4; dt <= 100; dt += 2) dts.push_back(dt);
    return dts;
}

inline std::vector<std::size_t> default_shifts(std::size_t dt) {
    return {0, dt / 4, dt / 2, (3 * dt) / 4};
}

// Scans the candidate grid and interpolates the kappa-bar = 3 crossing of
// the shift-averaged curve. Throws NoCrossingError (carrying the full scan
// as diagnostics) when the curve never reaches 3.
inline WindowScan find_optimal_window(const ReturnSeries& u, std::span<const std::size_t> candidates = {},
                                      std::span<const std::size_t> shifts = {}) {
    std::vector<std::size_t> default_dts;
    if (candidates.empty()) {
        default_dts = default_window_candidates();
        candidates = default_dts;
    }
    if (candidates.size() < 2) throw DomainError("need at least 2 candidate window sizes");
    for (std::size_t i = 1; i < candidates.size(); ++i)
        if (candidates[i] <= candidates[i - 1]) throw DomainError("candidates must be sorted ascending");

    WindowScan scan;
    for (std::size_t dt : candidates) {
        std::vector<std::size_t> dt_shifts;
        if (shifts.empty())
            dt_shifts = default_shifts(dt);
        else
            for (std::size_t s : shifts)
                if (s < dt) dt_shifts.push_back(s);
        if (dt_shifts.empty()) dt_shifts.push_back(0);
        scan.rows.push_back(mean_kurtosis(u, dt, dt_shifts));
    }

    scan.closest_dt = scan.rows.front().dt;
    scan.closest_kurtosis = scan.rows.front().ensemble_mean;
    for (const auto& row : scan.rows) {
        if (std::abs(row.ensemble_mean - 3.0) < std::abs(scan.closest_kurtosis - 3.0)) {
            scan.closest_kurtosis = row.ensemble_mean;
            scan.closest_dt = row.dt;
        }
    }

    for (std::size_t i = 0; i + 1 < scan.rows.size(); ++i) {
        const auto& lo = scan.rows[i];
        const auto& hi = scan.rows[i + 1];
        const double a = lo.ensemble_mean - 3.0;
        const double b = hi.ensemble_mean - 3.0;
        if (a == 0.0 || a * b < 0.0) {
            WindowCrossing cross;
            const double t = (a == b) ? 0.0 : a / (a - b);
            const double spacing = static_cast<double>(hi.dt - lo.dt);
            cross.window = static_cast<double>(lo.dt) + t * spacing;
            const double slope = (hi.ensemble_mean - lo.ensemble_mean) / spacing;
            const double dk = lo.ensemble_std + t * (hi.ensemble_std - lo.ensemble_std);
            cross.uncertainty = 0.5 * spacing + (slope != 0.0 ? dk / std::abs(slope) : 0.0);
            cross.bracket_lo = lo.dt;
            cross.bracket_hi = hi.dt;
            scan.crossing = cross;
            break;
        }
    }
    if (!scan.crossing) {
        std::ostringstream os;
        os << "average kurtosis never crosses 3 on the scanned range; closest " << scan.closest_kurtosis
           << " at dt=" << scan.closest_dt;
        throw NoCrossingError(os.str(), std::move(scan));
    }
    return scan;
}

// beta_k = 1 / [ (1/(T-1)) sum (u_i - mean_k)^2 ] over consecutive windows
// of length T; the trailing partial window is discarded.
inline BetaSeries extract_betas(const ReturnSeries& u, std::size_t T) {
    if (T < 4) throw WindowTooSmallError("window size must be at least 4, got " + std::to_string(T));
    if (u.size() < T) throw SeriesTooShortError("series shorter than one window");
    const std::size_t n_windows = u.size() / T;
    BetaSeries out;
    out.window_size = T;
    out.betas.reserve(n_windows);
    for (std::size_t k = 0; k < n_windows; ++k) {
        const std::span<const double> w(u.values.data() + k * T, T);
        const double var = detail::sample_variance(w);
        if (var <= 0.0) throw DegenerateWindowError("window has zero variance", k);
        out.betas.push_back(1.0 / var);
    }
    out.beta0 = detail::mean(out.betas);
    return out;
}

}  // namespace sustat
