#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sustat/correlation.hpp"
#include "sustat/detail/stats.hpp"
#include "sustat/distributions.hpp"
#include "sustat/errors.hpp"
#include "sustat/ingest.hpp"
#include "sustat/returns.hpp"
#include "sustat/windowing.hpp"

namespace sustat {

// Hybrid lognormal/chi-squared volatility model: n_dof+1 OU-driven Gaussian
// factors feed beta = kappa*exp(X0) + (1-kappa)*sum(X_i^2); within each
// refresh interval the returns follow the local Langevin dynamics at that
// beta. Time unit is one tick; gamma and Gamma are rates per tick.
struct SynthConfig {
    double kappa = 0.5;
    int n_dof = 4;
    double x0_mean = 0.0;
    double x0_std = 1.0;
    double xi_std = 1.0;                    // shared stationary std of X1..Xn
    double drag_Gamma = 0.005;              // OU mean reversion of the factors
    double noise_Sigma = 0.1;               // OU noise amplitude (scale cancels after standardization)
    double langevin_gamma = 2.0;            // drag of the local return dynamics
    std::size_t beta_update_interval = 50;  // ticks between beta refreshes
    std::size_t total_ticks = 100000;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("kappa must lie in [0, 1]");
        if (n_dof < 1) throw ConfigError("n_dof must be >= 1");
        if (!(x0_std > 0.0)) throw ConfigError("x0_std must be positive");
        if (!(xi_std > 0.0)) throw ConfigError("xi_std must be positive");
        if (!(drag_Gamma > 0.0)) throw ConfigError("drag_Gamma must be positive");
        if (!(noise_Sigma > 0.0)) throw ConfigError("noise_Sigma must be positive");
        if (!(langevin_gamma > 0.0)) throw ConfigError("langevin_gamma must be positive");
        if (beta_update_interval < 2) throw ConfigError("beta_update_interval must be >= 2");
        if (total_ticks < beta_update_interval) throw ConfigError("total_ticks must cover one beta interval");
    }
};

struct SynthOutput {
    std::vector<double> u_series;     // recorded returns, rescaled to variance 1
    std::vector<double> beta_truth;   // raw Eq.-23 beta in force at each tick (pre-rescaling)
    SynthConfig model_truth;
    double rescale_factor = 1.0;      // u_recorded = (u_raw - mean)/rescale_factor
};

// Exact OU transition over dt: x' = x e^{-G dt} + S sqrt((1-e^{-2 G dt})/(2G)) * noise.
inline double ou_step(double x, double Gamma, double Sigma, double dt, double noise) {
    if (!(Gamma > 0.0) || !(Sigma > 0.0) || !(dt > 0.0))
        throw DomainError("ou_step needs positive Gamma, Sigma and dt");
    const double decay = std::exp(-Gamma * dt);
    const double sd = Sigma * std::sqrt((1.0 - decay * decay) / (2.0 * Gamma));
    return x * decay + sd * noise;
}

// beta = kappa*exp(X0) + (1-kappa)*(X1^2 + ... + Xn^2); factors[0] is X0.
inline double beta_from_factors(std::span<const double> factors, const SynthConfig& config) {
    if (factors.size() != static_cast<std::size_t>(config.n_dof) + 1)
        throw DomainError("factor vector must have n_dof + 1 entries");
    double sum_sq = 0.0;
    for (std::size_t i = 1; i < factors.size(); ++i) sum_sq += factors[i] * factors[i];
    return config.kappa * std::exp(factors[0]) + (1.0 - config.kappa) * sum_sq;
}

namespace synth_detail {

// Raw OU factors carry the (Gamma, Sigma) dynamics; sampled values are
// standardized to the configured stationary moments.
struct FactorBank {
    std::vector<double> raw;
    double raw_std;
    const SynthConfig* cfg;

    FactorBank(const SynthConfig& config, std::mt19937_64& rng) : cfg(&config) {
        raw_std = config.noise_Sigma / std::sqrt(2.0 * config.drag_Gamma);
        std::normal_distribution<double> gauss;
        raw.resize(static_cast<std::size_t>(config.n_dof) + 1);
        for (double& x : raw) x = raw_std * gauss(rng);   // stationary start
    }

    void advance(double dt, std::mt19937_64& rng) {
        std::normal_distribution<double> gauss;
        for (double& x : raw) x = ou_step(x, cfg->drag_Gamma, cfg->noise_Sigma, dt, gauss(rng));
    }

    std::vector<double> standardized() const {
        std::vector<double> out(raw.size());
        out[0] = cfg->x0_mean + cfg->x0_std * raw[0] / raw_std;
        for (std::size_t i = 1; i < raw.size(); ++i) out[i] = cfg->xi_std * raw[i] / raw_std;
        return out;
    }
};

}  // namespace synth_detail

// Simulates the hybrid model. The local dynamics use the exact OU transition
// with stationary variance 1/beta, so the windowed estimator's convention
// Var(u|beta) = 1/beta holds by construction. The recorded series is
// rescaled to overall variance 1; beta_truth keeps the raw generator values.
inline SynthOutput simulate(const SynthConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss;

    SynthOutput out;
    out.model_truth = config;
    out.u_series.reserve(config.total_ticks);
    out.beta_truth.reserve(config.total_ticks);

    synth_detail::FactorBank factors(config, rng);
    const double dt_refresh = static_cast<double>(config.beta_update_interval);
    const double a = std::exp(-config.langevin_gamma);   // per-tick decay of u

    const double slowest = std::max(1.0 / config.drag_Gamma, 1.0 / config.langevin_gamma);
    const std::size_t burn_blocks =
        1 + static_cast<std::size_t>(std::ceil(10.0 * slowest / dt_refresh));

    double beta = beta_from_factors(factors.standardized(), config);
    double u = std::sqrt(1.0 / beta) * gauss(rng);

    std::size_t recorded = 0;
    for (std::size_t block = 0; recorded < config.total_ticks; ++block) {
        if (block > 0) {
            factors.advance(dt_refresh, rng);
            beta = beta_from_factors(factors.standardized(), config);
        }
        const double noise_sd = std::sqrt((1.0 / beta) * (1.0 - a * a));
        for (std::size_t t = 0; t < config.beta_update_interval; ++t) {
            u = u * a + noise_sd * gauss(rng);
            if (block >= burn_blocks) {
                if (recorded == config.total_ticks) break;
                out.u_series.push_back(u);
                out.beta_truth.push_back(beta);
                ++recorded;
            }
        }
    }

    const double m = detail::mean(out.u_series);
    const double sd = std::sqrt(detail::population_variance(out.u_series, m));
    if (!(sd > 0.0)) throw ConfigError("simulated series degenerate");
    for (double& v : out.u_series) v = (v - m) / sd;
    out.rescale_factor = sd;
    return out;
}

// Draws stationary beta samples only (one per refresh interval), without the
// per-tick return dynamics. Same factor path as simulate() would take.
inline std::vector<double> sample_betas(const SynthConfig& config, std::size_t count) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    synth_detail::FactorBank factors(config, rng);
    const double dt_refresh = static_cast<double>(config.beta_update_interval);
    std::vector<double> betas;
    betas.reserve(count);
    betas.push_back(beta_from_factors(factors.standardized(), config));
    while (betas.size() < count) {
        factors.advance(dt_refresh, rng);
        betas.push_back(beta_from_factors(factors.standardized(), config));
    }
    return betas;
}

// ---------------------------------------------------------------------------
// Synthetic price series

namespace synth_detail {

inline Timestamp advance_minutes(Timestamp ts, int minutes_per_day, std::size_t index) {
    // Synthetic calendar: `minutes_per_day` one-minute ticks per date,
    // starting 09:30; dates advance through a plain Gregorian calendar.
    std::size_t days = index / static_cast<std::size_t>(minutes_per_day);
    std::size_t within = index % static_cast<std::size_t>(minutes_per_day);
    ts.hour = 9 + static_cast<int>((30 + within) / 60);
    ts.minute = static_cast<int>((30 + within) % 60);
    ts.has_time = true;
    while (days > 0) {
        static constexpr int dim[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        int maxd = dim[ts.month - 1];
        if (ts.month == 2 && (ts.year % 4 == 0 && (ts.year % 100 != 0 || ts.year % 400 == 0))) maxd = 29;
        if (++ts.day > maxd) {
            ts.day = 1;
            if (++ts.month > 12) {
                ts.month = 1;
                ++ts.year;
            }
        }
        --days;
    }
    return ts;
}

}  // namespace synth_detail

// Builds an in-memory intraday price series whose lag-1 log returns equal
// scale * returns[i]. All records share one session so no synthetic return
// is ever dropped at a date change.
inline PriceSeries to_price_series(std::span<const double> returns, double scale = 0.01,
                                   const std::string& label = "synthetic") {
    PriceSeries series;
    series.resolution = Resolution::intraday;
    series.source_label = label;
    series.records.reserve(returns.size() + 1);
    Timestamp base;
    base.year = 2000;
    base.month = 1;
    base.day = 3;
    double log_price = std::log(100.0);
    for (std::size_t i = 0; i <= returns.size(); ++i) {
        PriceRecord rec;
        rec.timestamp = synth_detail::advance_minutes(base, 390, i);
        rec.price = std::exp(log_price);
        rec.session_id = 0;
        series.records.push_back(rec);
        if (i < returns.size()) log_price += scale * returns[i];
    }
    return series;
}

// ---------------------------------------------------------------------------
// kappa(tau) transition scan

struct KappaScanOptions {
    int n_dof = 4;
    double kappa_grid_step = 0.01;
    std::vector<std::size_t> window_candidates;   // empty = module default
    std::vector<std::size_t> shifts;              // empty = module default
};

struct KappaScanPoint {
    std::size_t tau = 1;
    double kappa = 0.0;
    double ks = 0.0;
    double window = 0.0;       // interpolated T at this tau
    std::size_t n_betas = 0;
};

struct KappaScanResult {
    std::vector<KappaScanPoint> points;
    std::optional<detail::LinearFit> log_fit;   // kappa = intercept + slope * ln(tau)

    std::string to_csv() const {
        std::ostringstream os;
        os << "tau,kappa,ks\n";
        os.precision(17);
        for (const auto& p : points) os << p.tau << ',' << p.kappa << ',' << p.ks << '\n';
        return os.str();
    }
};

// For each tau: rebuild lag-tau returns, re-estimate the optimal window,
// extract betas and fit kappa; then fit kappa against ln(tau).
inline KappaScanResult kappa_scan(const PriceSeries& prices, std::span<const std::size_t> taus,
                                  const KappaScanOptions& options = {}) {
    if (taus.empty()) throw DomainError("kappa_scan needs at least one tau");
    for (std::size_t i = 1; i < taus.size(); ++i)
        if (taus[i] <= taus[i - 1]) throw DomainError("tau values must be ascending");

    KappaScanResult out;
    KappaFitOptions kf_opts;
    kf_opts.grid_step = options.kappa_grid_step;
    for (std::size_t tau : taus) {
        const ReturnSeries u = compute_returns(prices, tau);
        const WindowScan scan = find_optimal_window(u, options.window_candidates, options.shifts);
        const auto t_opt = static_cast<std::size_t>(std::llround(std::max(scan.crossing->window, 4.0)));
        const BetaSeries betas = extract_betas(u, t_opt);
        const KappaFit kf = fit_kappa(betas, options.n_dof, kf_opts);
        KappaScanPoint point;
        point.tau = tau;
        point.kappa = kf.kappa_refined;
        point.ks = kf.fit.stats.ks_stat;
        point.window = scan.crossing->window;
        point.n_betas = betas.size();
        out.points.push_back(point);
    }
    if (out.points.size() >= 2) {
        std::vector<double> lt, ks;
        for (const auto& p : out.points) {
            lt.push_back(std::log(static_cast<double>(p.tau)));
            ks.push_back(p.kappa);
        }
        out.log_fit = detail::least_squares(lt, ks);
    }
    return out;
}

// Convenience overload: simulate the hybrid model, then scan its output.
inline KappaScanResult kappa_scan(const SynthConfig& config, std::span<const std::size_t> taus,
                                  const KappaScanOptions& options = {}) {
    const SynthOutput sim = simulate(config);
    return kappa_scan(to_price_series(sim.u_series), taus, options);
}

// ---------------------------------------------------------------------------
// Two-scale validation scenario

// Hybrid-mixture beta process with scale-separated factors: the lognormal
// part kappa*exp(X0) refreshes every fast_interval ticks while the
// chi-squared part refreshes every slow_interval ticks (both components
// mean-normalized to 1/2 each way through `kappa`). At small return lags the
// heavy fast factor dominates the extracted beta law; at lags long enough to
// average it out only the slow chi-squared variation remains. A constructed
// multi-scale oracle for the kappa(tau) transition.
struct TwoScaleConfig {
    std::size_t total_ticks = 400000;
    std::size_t fast_interval = 4;
    std::size_t slow_interval = 256;
    double kappa = 0.85;         // generator weight of the fast lognormal part
    double fast_log_std = 1.2;   // x0_s of the fast factor
    int slow_dof = 4;
    std::uint64_t seed = 1;

    void validate() const {
        if (fast_interval < 1 || slow_interval <= fast_interval) throw ConfigError("need fast_interval < slow_interval");
        if (!(kappa > 0.0 && kappa < 1.0)) throw ConfigError("kappa must lie in (0, 1)");
        if (!(fast_log_std > 0.0)) throw ConfigError("fast_log_std must be positive");
        if (slow_dof < 1) throw ConfigError("slow_dof must be >= 1");
        if (total_ticks < 10 * slow_interval) throw ConfigError("total_ticks too small for the slow scale");
    }
};

inline std::vector<double> simulate_two_scale(const TwoScaleConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss;
    std::chi_squared_distribution<double> chisq(static_cast<double>(config.slow_dof));

    // Both components have mean 1, so beta has mean 1 and kappa is its
    // lognormal mean share, matching fit_kappa's canonical parameterization.
    const double x0_mean = -0.5 * config.fast_log_std * config.fast_log_std;
    std::vector<double> ticks(config.total_ticks);
    double fast_part = config.kappa, slow_part = 1.0 - config.kappa;
    for (std::size_t i = 0; i < config.total_ticks; ++i) {
        if (i % config.fast_interval == 0)
            fast_part = config.kappa * std::exp(x0_mean + config.fast_log_std * gauss(rng));
        if (i % config.slow_interval == 0)
            slow_part = (1.0 - config.kappa) * chisq(rng) / static_cast<double>(config.slow_dof);
        const double beta = fast_part + slow_part;
        ticks[i] = gauss(rng) / std::sqrt(beta);
    }
    return ticks;
}

}  // namespace sustat
