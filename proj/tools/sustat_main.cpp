// sustat: batch CLI for superstatistical time-series analysis.
//
// Subcommands: analyze, simulate, kappa-scan, plus the single-stage commands
// returns, window, betas, fit and corr. Every output is plot-ready CSV or
// JSON; no rendering happens here.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sustat/sustat.hpp"

namespace fs = std::filesystem;
using sustat::ordered_json;

namespace {

std::string out_dir_default() {
    if (const char* env = std::getenv("SUSTAT_OUT_DIR")) return env;
    return ".";
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sustat::IoError("cannot write " + path.string());
    out << content;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
    // Either "a,b,c" or "start:stop:step".
    std::vector<std::size_t> out;
    if (text.find(':') != std::string::npos) {
        std::size_t start = 0, stop = 0, step = 1;
        if (std::sscanf(text.c_str(), "%zu:%zu:%zu", &start, &stop, &step) != 3 || step == 0 || stop < start)
            throw sustat::ConfigError(std::string("bad ") + what + " range '" + text + "'");
        for (std::size_t v = start; v <= stop; v += step) out.push_back(v);
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(static_cast<std::size_t>(std::stoull(item)));
    }
    if (out.empty()) throw sustat::ConfigError(std::string("empty ") + what + " list");
    return out;
}

std::vector<sustat::ModelKind> parse_models(const std::string& text) {
    std::vector<sustat::ModelKind> kinds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "chi2") kinds.push_back(sustat::ModelKind::chi2);
        else if (item == "inv_chi2") kinds.push_back(sustat::ModelKind::inv_chi2);
        else if (item == "lognormal") kinds.push_back(sustat::ModelKind::lognormal);
        else if (!item.empty()) throw sustat::ConfigError("unknown model '" + item + "'");
    }
    if (kinds.empty()) throw sustat::ConfigError("no models requested");
    return kinds;
}

// Single-column (with header) or key,value CSV readers for stage commands.
std::vector<double> read_column_csv(const std::string& path, const std::string& want) {
    std::ifstream in(path);
    if (!in) throw sustat::IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw sustat::EmptyInputError("empty file " + path);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string h;
        while (std::getline(ss, h, ',')) header.push_back(h);
    }
    std::size_t col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == want) col = i;
    if (col == header.size()) {
        if (header.size() == 1) col = 0;   // single unnamed column
        else throw sustat::ParseError("no column '" + want + "' in " + path, 1);
    }
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::size_t i = 0;
        double v = 0.0;
        bool got = false;
        while (std::getline(ss, field, ',')) {
            if (i++ == col) {
                try {
                    v = std::stod(field);
                } catch (...) {
                    throw sustat::ParseError("bad number '" + field + "'", line_no);
                }
                got = true;
            }
        }
        if (!got) throw sustat::ParseError("missing column", line_no);
        values.push_back(v);
    }
    if (values.empty()) throw sustat::EmptyInputError("no data rows in " + path);
    return values;
}

std::string series_csv(const std::string& header, std::span<const double> values) {
    std::ostringstream os;
    os << header << '\n';
    for (double v : values) os << format_double(v) << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
    std::string input;
    std::string out_dir = out_dir_default();
    std::size_t tau = 1;
    std::string window_grid;
    std::string shifts;
    std::size_t max_lag = 100;
    std::string models = "chi2,inv_chi2,lognormal";
    bool fit_kappa_flag = false;
    int kappa_ndof = 4;
    double kappa_step = 0.01;
    std::size_t bins = 0;         // 0 = Freedman-Diaconis
    bool log_bins = false;
    bool no_amended = false;
    std::string deseason = "auto";
};

sustat::DecayReport try_fit_decay(const sustat::CorrelationFunction& corr) {
    sustat::DecayReport rep;
    try {
        rep.result = sustat::fit_decay(corr);
    } catch (const sustat::Error& e) {
        rep.note = e.what();
    }
    return rep;
}

int cmd_analyze(const AnalyzeArgs& args) {
    using namespace sustat;

    const PriceSeries prices = load_csv(args.input);
    const RawReturns raw = log_returns(prices, args.tau);
    const ReturnSeries u = normalize(raw);

    std::vector<std::size_t> grid =
        args.window_grid.empty() ? default_window_candidates() : parse_size_list(args.window_grid, "window-grid");
    std::vector<std::size_t> shift_list;
    if (!args.shifts.empty() && args.shifts != "auto") shift_list = parse_size_list(args.shifts, "shifts");

    const WindowScan scan = find_optimal_window(u, grid, shift_list);
    const auto window_T = scan.crossing->window;
    const auto used_T = static_cast<std::size_t>(std::llround(std::max(window_T, 4.0)));
    const BetaSeries betas = extract_betas(u, used_T);

    AnalysisReport report;
    report.generated_at = current_timestamp_utc();
    report.input_path = args.input;
    report.input_rows = prices.size();
    report.resolution = prices.resolution == Resolution::intraday ? "intraday" : "daily";
    report.tau = args.tau;
    report.return_count = u.size();
    report.dropped_overnight = u.dropped_count;
    report.window_T = window_T;
    report.window_uncertainty = scan.crossing->uncertainty;
    report.window_used = used_T;
    report.beta0 = betas.beta0;
    report.beta_count = betas.size();

    const auto kinds = parse_models(args.models);
    for (ModelKind kind : kinds) report.fits.push_back(fit_mle(betas, kind, true));
    std::size_t best = 0;
    for (std::size_t i = 1; i < report.fits.size(); ++i)
        if (report.fits[i].stats.ks_stat < report.fits[best].stats.ks_stat) best = i;
    report.preferred_model = to_string(report.fits[best].model.kind());

    std::optional<KappaFit> kappa_fit;
    if (args.fit_kappa_flag) {
        KappaFitOptions opts;
        opts.grid_step = args.kappa_step;
        kappa_fit = fit_kappa(betas, args.kappa_ndof, opts);
        AnalysisReport::KappaSection section;
        section.kappa = kappa_fit->profile.empty() ? 0.0 : kappa_fit->fit.stats.ks_stat;   // placeholder, fixed below
        section.kappa = 0.0;
        double best_ks = std::numeric_limits<double>::infinity();
        for (const auto& p : kappa_fit->profile)
            if (p.ks < best_ks) {
                best_ks = p.ks;
                section.kappa = p.kappa;
            }
        section.kappa_refined = kappa_fit->kappa_refined;
        section.ks = kappa_fit->fit.stats.ks_stat;
        section.n_dof = args.kappa_ndof;
        section.profile = kappa_fit->profile;
        report.kappa = section;
        if (kappa_fit->fit.stats.ks_stat < report.fits[best].stats.ks_stat) report.preferred_model = "mixed";
    }

    // Marginal comparisons: direct parameters vs amended refits.
    if (!args.no_amended && u.size() >= 1000) {
        for (std::size_t i = 0; i < report.fits.size(); ++i) {
            const auto& direct = report.fits[i].model;
            report.marginal_fits.push_back({to_string(direct.kind()), amended_fit(u, direct.kind(), &direct)});
        }
    }

    // Correlations of u and of beta.
    const std::size_t lag_u = std::min(args.max_lag, u.size() - 2);
    const std::size_t lag_b = std::min(args.max_lag, betas.size() >= 3 ? betas.size() - 2 : 0);
    report.max_lag = lag_u;
    const CorrelationFunction corr_u = autocorrelation(u.values, lag_u);
    report.corr_u = try_fit_decay(corr_u);
    std::optional<CorrelationFunction> corr_beta;
    std::optional<CorrelationFunction> corr_beta_adj;
    if (lag_b >= 2) {
        corr_beta = autocorrelation(betas.betas, lag_b);
        report.corr_beta = try_fit_decay(*corr_beta);

        std::optional<std::size_t> period;
        if (args.deseason == "auto") {
            if (prices.resolution == Resolution::intraday) {
                // windows per trading day, from the median session length
                std::vector<std::size_t> lens;
                std::size_t run = 1;
                for (std::size_t i = 1; i < prices.size(); ++i) {
                    if (prices.records[i].session_id == prices.records[i - 1].session_id) ++run;
                    else {
                        lens.push_back(run);
                        run = 1;
                    }
                }
                lens.push_back(run);
                std::sort(lens.begin(), lens.end());
                const double session_len = static_cast<double>(lens[lens.size() / 2]);
                const auto p = static_cast<std::size_t>(std::llround(session_len / static_cast<double>(used_T)));
                if (p >= 2) period = p;
            }
        } else if (args.deseason != "off" && !args.deseason.empty()) {
            period = static_cast<std::size_t>(std::stoull(args.deseason));
        }
        if (period && lag_b >= 2 * *period) {
            report.deseason_period = period;
            corr_beta_adj = deseasonalize(*corr_beta, *period);
            report.corr_beta_deseasonalized = try_fit_decay(*corr_beta_adj);
        } else if (period) {
            report.corr_beta_deseasonalized.note = "max_lag too small for deseasonalization period";
        }
    } else {
        report.corr_beta.note = "too few beta windows for autocorrelation";
    }

    // ----- artifacts -----
    const fs::path dir(args.out_dir);
    const Binning bin_rule{args.bins, args.log_bins};

    const ordered_json report_json = report_to_json(report);
    require_finite(report_json);

    std::string marginals_csv;
    {
        double max_u = 0.0;
        for (double v : u.values) max_u = std::max(max_u, std::abs(v));
        const auto grid_u = symmetric_grid(std::min(10.0, max_u), 100);
        std::vector<std::pair<std::string, MarginalDensity>> columns;
        for (const auto& entry : report.marginal_fits) {
            if (entry.amended.reference)
                columns.emplace_back(entry.kind + "_direct", integrate_marginal(*entry.amended.reference, grid_u, 1e-6));
            columns.emplace_back(entry.kind + "_amended", integrate_marginal(entry.amended.model, grid_u, 1e-6));
        }
        if (report.marginal_fits.empty()) {
            for (const auto& f : report.fits)
                columns.emplace_back(std::string(to_string(f.model.kind())) + "_direct",
                                     integrate_marginal(f.model, grid_u, 1e-6));
        }
        std::ostringstream os;
        os << "u";
        for (const auto& [name, _] : columns) os << ',' << name;
        os << '\n';
        for (std::size_t i = 0; i < grid_u.size(); ++i) {
            os << format_double(grid_u[i]);
            for (const auto& [_, md] : columns) os << ',' << format_double(md.values[i]);
            os << '\n';
        }
        marginals_csv = os.str();
    }

    std::string beta_fits_csv;
    {
        double lo = betas.betas[0], hi = betas.betas[0];
        for (double b : betas.betas) {
            lo = std::min(lo, b);
            hi = std::max(hi, b);
        }
        std::ostringstream os;
        os << "beta";
        for (const auto& f : report.fits) os << ',' << to_string(f.model.kind());
        if (kappa_fit) os << ",mixed";
        os << '\n';
        for (std::size_t i = 0; i < 200; ++i) {
            const double b = lo * std::pow(hi / lo, static_cast<double>(i) / 199.0);
            os << format_double(b);
            for (const auto& f : report.fits) os << ',' << format_double(f.model.density(b));
            if (kappa_fit) os << ',' << format_double(kappa_fit->fit.model.density(b));
            os << '\n';
        }
        beta_fits_csv = os.str();
    }

    write_file(dir / "report.json", report_json.dump(2) + "\n");
    write_file(dir / "kurtosis_scan.csv", scan.to_csv());
    write_file(dir / "beta_hist.csv", histogram(betas, bin_rule).to_csv());
    write_file(dir / "beta_fits.csv", beta_fits_csv);
    write_file(dir / "returns_hist.csv", histogram_density(u.values, Binning{args.bins, false}).to_csv());
    write_file(dir / "marginals.csv", marginals_csv);
    write_file(dir / "corr_u.csv", corr_u.to_csv());
    if (corr_beta) write_file(dir / "corr_beta.csv", corr_beta->to_csv());
    if (corr_beta_adj) write_file(dir / "corr_beta_deseasonalized.csv", corr_beta_adj->to_csv());

    std::cout << "T = " << window_T << " +- " << scan.crossing->uncertainty << ", beta0 = " << betas.beta0
              << ", preferred f(beta): " << report.preferred_model << '\n'
              << "report: " << (dir / "report.json").string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override, double return_scale) {
    using namespace sustat;
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open " + config_path);
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    SynthConfig config = synth_config_from_json(doc);
    if (seed_override) config.seed = *seed_override;

    const SynthOutput sim = simulate(config);
    const PriceSeries prices = to_price_series(sim.u_series, return_scale, "simulated");

    std::ostringstream prices_csv;
    prices_csv << "timestamp,price,session\n";
    for (const auto& rec : prices.records)
        prices_csv << rec.timestamp.to_string() << ',' << format_double(rec.price) << ',' << rec.session_id
                   << '\n';

    std::ostringstream beta_csv;
    beta_csv << "tick,beta\n";
    for (std::size_t i = 0; i < sim.beta_truth.size(); ++i)
        beta_csv << i << ',' << format_double(sim.beta_truth[i]) << '\n';

    const fs::path dir(out_dir);
    write_file(dir / "prices.csv", prices_csv.str());
    write_file(dir / "beta_truth.csv", beta_csv.str());

    ordered_json echo = synth_config_to_json(config);
    echo["rescale_factor"] = sim.rescale_factor;
    echo["ticks_written"] = sim.u_series.size();
    std::cout << echo.dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// kappa-scan

int cmd_kappa_scan(const std::string& input, const std::string& taus_text, const std::string& out_dir,
                   int n_dof, double kappa_step, const std::string& window_grid, const std::string& shifts) {
    using namespace sustat;
    const PriceSeries prices = load_csv(input);
    const auto taus = parse_size_list(taus_text, "tau");

    KappaScanOptions opts;
    opts.n_dof = n_dof;
    opts.kappa_grid_step = kappa_step;
    if (!window_grid.empty()) opts.window_candidates = parse_size_list(window_grid, "window-grid");
    if (!shifts.empty() && shifts != "auto") opts.shifts = parse_size_list(shifts, "shifts");

    const KappaScanResult result = kappa_scan(prices, taus, opts);
    write_file(fs::path(out_dir) / "kappa_scan.csv", result.to_csv());

    for (const auto& p : result.points)
        std::cout << "tau=" << p.tau << "  kappa=" << p.kappa << "  ks=" << p.ks << "  T=" << p.window << '\n';
    if (result.log_fit)
        std::cout << "kappa = " << result.log_fit->intercept << " + " << result.log_fit->slope
                  << "*log(tau)\n";
    else
        std::cout << "single tau: log-tau fit omitted\n";
    return 0;
}

// ---------------------------------------------------------------------------
// stage commands

int cmd_returns(const std::string& input, std::size_t tau, const std::string& out) {
    const auto series = sustat::compute_returns(sustat::load_csv(input), tau);
    write_file(out, series_csv("u", series.values));
    std::cout << "returns: " << series.size() << ", dropped at session boundaries: " << series.dropped_count
              << '\n';
    return 0;
}

sustat::ReturnSeries returns_from_csv(const std::string& input) {
    sustat::ReturnSeries u;
    u.values = read_column_csv(input, "u");
    u.raw_std = 1.0;
    return u;
}

int cmd_window(const std::string& input, const std::string& grid_text, const std::string& shifts_text,
               const std::string& out) {
    using namespace sustat;
    const ReturnSeries u = returns_from_csv(input);
    std::vector<std::size_t> grid =
        grid_text.empty() ? default_window_candidates() : parse_size_list(grid_text, "window-grid");
    std::vector<std::size_t> shift_list;
    if (!shifts_text.empty() && shifts_text != "auto") shift_list = parse_size_list(shifts_text, "shifts");
    const WindowScan scan = find_optimal_window(u, grid, shift_list);
    write_file(out, scan.to_csv());
    std::cout << "T = " << scan.crossing->window << " +- " << scan.crossing->uncertainty << '\n';
    return 0;
}

int cmd_betas(const std::string& input, std::size_t T, const std::string& out) {
    using namespace sustat;
    const BetaSeries betas = extract_betas(returns_from_csv(input), T);
    std::ostringstream os;
    os << "k,beta\n";
    for (std::size_t k = 0; k < betas.size(); ++k) os << k << ',' << format_double(betas.betas[k]) << '\n';
    write_file(out, os.str());
    std::cout << "betas: " << betas.size() << ", beta0 = " << betas.beta0 << '\n';
    return 0;
}

int cmd_fit(const std::string& input, const std::string& models, bool with_kappa, int n_dof,
            const std::string& out) {
    using namespace sustat;
    BetaSeries betas;
    betas.betas = read_column_csv(input, "beta");
    betas.window_size = 0;
    betas.beta0 = detail::mean(betas.betas);

    ordered_json fits = ordered_json::array();
    for (ModelKind kind : parse_models(models)) {
        const FittedModel fm = fit_mle(betas, kind, true);
        fits.push_back(model_to_json(fm.model, &fm.stats));
        std::cout << to_string(kind) << ": ks=" << fm.stats.ks_stat << " aic=" << fm.stats.aic << '\n';
    }
    if (with_kappa) {
        const KappaFit kf = fit_kappa(betas, n_dof);
        fits.push_back(model_to_json(kf.fit.model, &kf.fit.stats));
        std::cout << "mixed: kappa=" << kf.kappa_refined << " ks=" << kf.fit.stats.ks_stat << '\n';
    }
    write_file(out, fits.dump(2) + "\n");
    return 0;
}

int cmd_corr(const std::string& input, const std::string& column, std::size_t max_lag, const std::string& out) {
    using namespace sustat;
    std::vector<double> xs = read_column_csv(input, column);
    const std::size_t lag = std::min(max_lag, xs.size() >= 3 ? xs.size() - 2 : 0);
    if (lag < 1) throw SeriesTooShortError("series too short for autocorrelation");
    const CorrelationFunction corr = autocorrelation(xs, lag);
    write_file(out, corr.to_csv());
    try {
        const DecayFitResult fits = fit_decay(corr);
        for (const auto& f : fits.fits) std::cout << decay_fit_to_json(f).dump() << '\n';
    } catch (const Error& e) {
        std::cout << "no decay fit: " << e.what() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"superstatistics analysis toolkit"};
    app.require_subcommand(1);

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "run the full pipeline on a price CSV");
    analyze->add_option("input", an.input, "price CSV (timestamp,price[,session]; .gz accepted)")->required();
    analyze->add_option("--tau", an.tau, "return lag in ticks of the input resolution (default 1)");
    analyze->add_option("--window-grid", an.window_grid, "candidate window sizes, 'a,b,c' or 'start:stop:step' in ticks (default 4:100:2)");
    analyze->add_option("--shifts", an.shifts, "window shifts in ticks, 'a,b,c' or 'auto' (default: 0,dt/4,dt/2,3dt/4)");
    analyze->add_option("--max-lag", an.max_lag, "max autocorrelation lag in ticks/windows (default 100)");
    analyze->add_option("--models", an.models, "comma list of chi2,inv_chi2,lognormal (default all)");
    analyze->add_flag("--kappa", an.fit_kappa_flag, "also fit the mixed lognormal/chi2 model");
    analyze->add_option("--kappa-ndof", an.kappa_ndof, "chi2 degrees of freedom in the mixed model (default 4)");
    analyze->add_option("--kappa-step", an.kappa_step, "kappa grid step (default 0.01)");
    analyze->add_option("--bins", an.bins, "histogram bin count, 0 = Freedman-Diaconis (default 0)");
    analyze->add_flag("--log-bins", an.log_bins, "logarithmic beta histogram bins");
    analyze->add_flag("--no-amended", an.no_amended, "skip the amended marginal refits");
    analyze->add_option("--deseason", an.deseason, "beta-ACF deseasonalization period in windows, 'auto' or 'off' (default auto)");
    analyze->add_option("--out-dir", an.out_dir, "output directory (default $SUSTAT_OUT_DIR or .)");

    std::string sim_config, sim_out = out_dir_default();
    double sim_scale = 0.01;
    std::uint64_t seed_value = 0;
    bool seed_set = false;
    auto* simulate = app.add_subcommand("simulate", "simulate the hybrid superstatistical model");
    simulate->add_option("config", sim_config, "SynthConfig JSON file")->required();
    simulate->add_option("--out-dir", sim_out, "output directory (default $SUSTAT_OUT_DIR or .)");
    simulate->add_option("--return-scale", sim_scale, "log-return units per normalized tick (default 0.01)");
    simulate->add_option("--seed", seed_value, "override the config RNG seed")->each([&](const std::string&) { seed_set = true; });

    std::string ks_input, ks_taus, ks_out = out_dir_default(), ks_grid, ks_shifts;
    int ks_ndof = 4;
    double ks_step = 0.01;
    auto* kscan = app.add_subcommand("kappa-scan", "fit kappa across return lags tau");
    kscan->add_option("input", ks_input, "price CSV")->required();
    kscan->add_option("--taus", ks_taus, "ascending tau list, e.g. 1,2,4,8,16")->required();
    kscan->add_option("--kappa-ndof", ks_ndof, "chi2 degrees of freedom in the mixed model (default 4)");
    kscan->add_option("--kappa-step", ks_step, "kappa grid step (default 0.01)");
    kscan->add_option("--window-grid", ks_grid, "candidate window sizes (default 4:100:2)");
    kscan->add_option("--shifts", ks_shifts, "window shifts (default auto)");
    kscan->add_option("--out-dir", ks_out, "output directory (default $SUSTAT_OUT_DIR or .)");

    std::string st_input, st_out;
    std::size_t st_tau = 1;
    auto* returns_cmd = app.add_subcommand("returns", "normalized lag-tau log returns from a price CSV");
    returns_cmd->add_option("input", st_input, "price CSV")->required();
    returns_cmd->add_option("--tau", st_tau, "return lag in ticks (default 1)");
    returns_cmd->add_option("--out", st_out, "output CSV (single 'u' column)")->required();

    std::string w_input, w_grid, w_shifts, w_out;
    auto* window_cmd = app.add_subcommand("window", "kurtosis scan / optimal window from a returns CSV");
    window_cmd->add_option("input", w_input, "returns CSV ('u' column)")->required();
    window_cmd->add_option("--window-grid", w_grid, "candidate window sizes in ticks (default 4:100:2)");
    window_cmd->add_option("--shifts", w_shifts, "shifts in ticks (default auto)");
    window_cmd->add_option("--out", w_out, "kurtosis scan CSV")->required();

    std::string b_input, b_out;
    std::size_t b_T = 0;
    auto* betas_cmd = app.add_subcommand("betas", "extract per-window volatility parameters");
    betas_cmd->add_option("input", b_input, "returns CSV ('u' column)")->required();
    betas_cmd->add_option("--window", b_T, "window size T in ticks")->required();
    betas_cmd->add_option("--out", b_out, "betas CSV")->required();

    std::string f_input, f_models = "chi2,inv_chi2,lognormal", f_out;
    bool f_kappa = false;
    int f_ndof = 4;
    auto* fit_cmd = app.add_subcommand("fit", "fit volatility densities to a betas CSV");
    fit_cmd->add_option("input", f_input, "betas CSV ('beta' column)")->required();
    fit_cmd->add_option("--models", f_models, "comma list of chi2,inv_chi2,lognormal");
    fit_cmd->add_flag("--kappa", f_kappa, "also fit the mixed model");
    fit_cmd->add_option("--kappa-ndof", f_ndof, "mixed-model degrees of freedom (default 4)");
    fit_cmd->add_option("--out", f_out, "fits JSON")->required();

    std::string c_input, c_column = "u", c_out;
    std::size_t c_lag = 100;
    auto* corr_cmd = app.add_subcommand("corr", "autocorrelation and decay fit of a series CSV");
    corr_cmd->add_option("input", c_input, "series CSV")->required();
    corr_cmd->add_option("--column", c_column, "column name (default 'u')");
    corr_cmd->add_option("--max-lag", c_lag, "max lag in series units (default 100)");
    corr_cmd->add_option("--out", c_out, "correlation CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*analyze) return cmd_analyze(an);
        if (*simulate)
            return cmd_simulate(sim_config, sim_out, seed_set ? std::optional<std::uint64_t>(seed_value) : std::nullopt,
                                sim_scale);
        if (*kscan) return cmd_kappa_scan(ks_input, ks_taus, ks_out, ks_ndof, ks_step, ks_grid, ks_shifts);
        if (*returns_cmd) return cmd_returns(st_input, st_tau, st_out);
        if (*window_cmd) return cmd_window(w_input, w_grid, w_shifts, w_out);
        if (*betas_cmd) return cmd_betas(b_input, b_T, b_out);
        if (*fit_cmd) return cmd_fit(f_input, f_models, f_kappa, f_ndof, f_out);
        if (*corr_cmd) return cmd_corr(c_input, c_column, c_lag, c_out);
    } catch (const sustat::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.error_class());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
