#pragma once

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sustat/correlation.hpp"
#include "sustat/distributions.hpp"
#include "sustat/errors.hpp"
#include "sustat/marginal.hpp"
#include "sustat/synth.hpp"
#include "sustat/windowing.hpp"

namespace sustat {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* report_schema_version = "1";

// ---------------------------------------------------------------------------
// Model / stats serialization

inline ordered_json params_to_json(const DistributionModel& model) {
    ordered_json j;
    if (const auto* p = std::get_if<Chi2Params>(&model.params())) {
        j["d1"] = p->d1;
        j["beta0"] = p->beta0;
    } else if (const auto* p = std::get_if<InvChi2Params>(&model.params())) {
        j["d2"] = p->d2;
        j["beta0"] = p->beta0;
    } else if (const auto* p = std::get_if<LogNormalParams>(&model.params())) {
        j["s"] = p->s;
        j["mu"] = p->mu;
    } else {
        const auto& mp = std::get<MixedParams>(model.params());
        j["kappa"] = mp.kappa;
        j["n_dof"] = mp.n_dof;
        j["x0_mu"] = mp.x0_mu;
        j["x0_s"] = mp.x0_s;
        j["chi_scale"] = mp.chi_scale;
    }
    return j;
}

inline ordered_json stats_to_json(const FitStats& st) {
    ordered_json j;
    j["log_likelihood"] = st.log_likelihood;
    j["aic"] = st.aic;
    j["ks_stat"] = st.ks_stat;
    j["ks_pvalue"] = st.ks_pvalue;
    j["n_samples"] = st.n_samples;
    j["free_parameters"] = st.free_parameters;
    j["constrained_mean"] = st.constrained_mean;
    return j;
}

// `{kind, params, fit_stats}` object; fit_stats is null for bare models.
inline ordered_json model_to_json(const DistributionModel& model, const FitStats* stats = nullptr) {
    ordered_json j;
    j["kind"] = to_string(model.kind());
    j["params"] = params_to_json(model);
    j["fit_stats"] = stats ? stats_to_json(*stats) : ordered_json(nullptr);
    return j;
}

inline DistributionModel model_from_json(const ordered_json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const auto& p = j.at("params");
    if (kind == "chi2") return DistributionModel::chi2(p.at("d1"), p.at("beta0"));
    if (kind == "inv_chi2") return DistributionModel::inv_chi2(p.at("d2"), p.at("beta0"));
    if (kind == "lognormal") return DistributionModel::lognormal(p.at("s"), p.at("mu"));
    if (kind == "mixed") {
        MixedParams mp;
        mp.kappa = p.at("kappa");
        mp.n_dof = p.at("n_dof");
        mp.x0_mu = p.at("x0_mu");
        mp.x0_s = p.at("x0_s");
        mp.chi_scale = p.at("chi_scale");
        return DistributionModel::mixed(mp);
    }
    throw ConfigError("unknown model kind '" + kind + "'");
}

inline ordered_json decay_fit_to_json(const DecayFit& fit) {
    ordered_json j;
    j["form"] = fit.form == DecayForm::exponential ? "exponential" : "power_law";
    if (fit.form == DecayForm::exponential)
        j["rate_gamma"] = fit.rate_gamma;
    else
        j["exponent_alpha"] = fit.exponent_alpha;
    j["fit_lo"] = fit.fit_lo;
    j["fit_hi"] = fit.fit_hi;
    j["rms_log_residual"] = fit.residual;
    j["preferred"] = fit.preferred;
    j["excluded_nonpositive"] = fit.excluded_nonpositive;
    return j;
}

inline ordered_json decay_result_to_json(const DecayFitResult& result) {
    ordered_json j = ordered_json::array();
    for (const auto& f : result.fits) j.push_back(decay_fit_to_json(f));
    return j;
}

// ---------------------------------------------------------------------------
// SynthConfig JSON (strict: unknown keys are field-level errors)

inline ordered_json synth_config_to_json(const SynthConfig& c) {
    ordered_json j;
    j["kappa"] = c.kappa;
    j["n_dof"] = c.n_dof;
    j["x0_mean"] = c.x0_mean;
    j["x0_std"] = c.x0_std;
    j["xi_std"] = c.xi_std;
    j["drag_Gamma"] = c.drag_Gamma;
    j["noise_Sigma"] = c.noise_Sigma;
    j["langevin_gamma"] = c.langevin_gamma;
    j["beta_update_interval"] = c.beta_update_interval;
    j["total_ticks"] = c.total_ticks;
    j["seed"] = c.seed;
    return j;
}

inline SynthConfig synth_config_from_json(const ordered_json& j) {
    if (!j.is_object()) throw ConfigError("simulation config must be a JSON object");
    SynthConfig c;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "kappa") c.kappa = value.get<double>();
            else if (key == "n_dof") c.n_dof = value.get<int>();
            else if (key == "x0_mean") c.x0_mean = value.get<double>();
            else if (key == "x0_std") c.x0_std = value.get<double>();
            else if (key == "xi_std") c.xi_std = value.get<double>();
            else if (key == "drag_Gamma") c.drag_Gamma = value.get<double>();
            else if (key == "noise_Sigma") c.noise_Sigma = value.get<double>();
            else if (key == "langevin_gamma") c.langevin_gamma = value.get<double>();
            else if (key == "beta_update_interval") c.beta_update_interval = value.get<std::size_t>();
            else if (key == "total_ticks") c.total_ticks = value.get<std::size_t>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else throw ConfigError("unknown config field '" + key + "'");
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("bad value for config field '" + key + "'");
        }
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Analysis report

struct DecayReport {
    std::optional<DecayFitResult> result;
    std::string note;   // set when no fit was possible (for example all lags below floor)
};

struct AnalysisReport {
    std::string generated_at;

    std::string input_path;
    std::size_t input_rows = 0;
    std::string resolution;
    std::size_t tau = 1;
    std::size_t return_count = 0;
    std::size_t dropped_overnight = 0;

    double window_T = 0.0;
    double window_uncertainty = 0.0;
    std::size_t window_used = 0;
    double beta0 = 0.0;
    std::size_t beta_count = 0;

    std::vector<FittedModel> fits;
    std::string preferred_model;   // lowest KS statistic

    struct MarginalEntry {
        std::string kind;
        AmendedFit amended;   // carries the direct (reference) fit and divergence
    };
    std::vector<MarginalEntry> marginal_fits;

    std::size_t max_lag = 0;
    DecayReport corr_u;
    DecayReport corr_beta;
    std::optional<std::size_t> deseason_period;
    DecayReport corr_beta_deseasonalized;

    struct KappaSection {
        double kappa = 0.0;
        double kappa_refined = 0.0;
        double ks = 0.0;
        int n_dof = 4;
        std::vector<KappaProfilePoint> profile;
    };
    std::optional<KappaSection> kappa;
};

inline std::string current_timestamp_utc() {
    if (const char* fixed = std::getenv("SUSTAT_TIMESTAMP")) return fixed;
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline ordered_json decay_report_to_json(const DecayReport& r) {
    ordered_json j;
    j["fits"] = r.result ? decay_result_to_json(*r.result) : ordered_json::array();
    j["note"] = r.note;
    return j;
}

inline ordered_json report_to_json(const AnalysisReport& r) {
    ordered_json j;
    j["schema_version"] = report_schema_version;
    j["generated_at"] = r.generated_at;
    j["input_summary"] = {{"path", r.input_path},
                          {"rows", r.input_rows},
                          {"resolution", r.resolution},
                          {"tau", r.tau},
                          {"returns", r.return_count},
                          {"dropped_overnight", r.dropped_overnight}};
    j["window"] = {{"T", r.window_T},
                   {"uncertainty", r.window_uncertainty},
                   {"used_T", r.window_used}};
    j["beta_stats"] = {{"beta0", r.beta0}, {"count", r.beta_count}};
    ordered_json fits = ordered_json::array();
    for (const auto& f : r.fits) fits.push_back(model_to_json(f.model, &f.stats));
    j["fits"] = fits;
    j["preferred_model"] = r.preferred_model;

    ordered_json marg = ordered_json::array();
    for (const auto& m : r.marginal_fits) {
        ordered_json e;
        e["kind"] = m.kind;
        e["direct"] = m.amended.reference ? model_to_json(*m.amended.reference) : ordered_json(nullptr);
        e["amended"] = model_to_json(m.amended.model);
        e["amended_log_likelihood"] = m.amended.log_likelihood;
        e["param_divergence"] = m.amended.max_param_divergence;
        marg.push_back(e);
    }
    j["marginal_fits"] = marg;

    ordered_json corr;
    corr["max_lag"] = r.max_lag;
    corr["u"] = decay_report_to_json(r.corr_u);
    corr["beta"] = decay_report_to_json(r.corr_beta);
    corr["deseason_period"] = r.deseason_period ? ordered_json(*r.deseason_period) : ordered_json(nullptr);
    corr["beta_deseasonalized"] = decay_report_to_json(r.corr_beta_deseasonalized);
    j["correlations"] = corr;

    if (r.kappa) {
        ordered_json k;
        k["kappa"] = r.kappa->kappa;
        k["kappa_refined"] = r.kappa->kappa_refined;
        k["ks"] = r.kappa->ks;
        k["n_dof"] = r.kappa->n_dof;
        ordered_json prof = ordered_json::array();
        for (const auto& p : r.kappa->profile)
            prof.push_back({{"kappa", p.kappa}, {"ks", p.ks}, {"log_likelihood", p.log_likelihood}});
        k["profile"] = prof;
        j["kappa"] = k;
    } else {
        j["kappa"] = nullptr;
    }
    return j;
}

// Every numeric field of a report must be finite.
inline void require_finite(const ordered_json& j, const std::string& path = "$") {
    if (j.is_number_float()) {
        if (!std::isfinite(j.get<double>())) throw ConfigError("non-finite number at " + path);
    } else if (j.is_object()) {
        for (const auto& [k, v] : j.items()) require_finite(v, path + "." + k);
    } else if (j.is_array()) {
        std::size_t i = 0;
        for (const auto& v : j) require_finite(v, path + "[" + std::to_string(i++) + "]");
    }
}

// ---------------------------------------------------------------------------
// Minimal JSON-schema subset validator (type / properties / required /
// items / enum / additionalProperties). Enough to keep report.json stable
// against the schema shipped in the repo.

inline void validate_json_schema(const ordered_json& doc, const ordered_json& schema,
                                 const std::string& path = "$") {
    if (schema.contains("type")) {
        const auto check_one = [&](const std::string& t) {
            if (t == "object") return doc.is_object();
            if (t == "array") return doc.is_array();
            if (t == "string") return doc.is_string();
            if (t == "number") return doc.is_number();
            if (t == "integer") return doc.is_number_integer() || doc.is_number_unsigned();
            if (t == "boolean") return doc.is_boolean();
            if (t == "null") return doc.is_null();
            throw ConfigError("schema: unknown type '" + t + "'");
        };
        bool ok = false;
        if (schema["type"].is_array()) {
            for (const auto& t : schema["type"]) ok = ok || check_one(t.get<std::string>());
        } else {
            ok = check_one(schema["type"].get<std::string>());
        }
        if (!ok) throw ConfigError("schema violation at " + path + ": wrong type");
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& v : schema["enum"]) ok = ok || (v == doc);
        if (!ok) throw ConfigError("schema violation at " + path + ": value not in enum");
    }
    if (doc.is_object()) {
        if (schema.contains("required"))
            for (const auto& req : schema["required"])
                if (!doc.contains(req.get<std::string>()))
                    throw ConfigError("schema violation at " + path + ": missing '" + req.get<std::string>() + "'");
        if (schema.contains("properties")) {
            for (const auto& [key, sub] : schema["properties"].items())
                if (doc.contains(key)) validate_json_schema(doc.at(key), sub, path + "." + key);
            if (schema.contains("additionalProperties") && schema["additionalProperties"].is_boolean() &&
                !schema["additionalProperties"].get<bool>()) {
                for (const auto& [key, value] : doc.items())
                    if (!schema["properties"].contains(key))
                        throw ConfigError("schema violation at " + path + ": unexpected '" + key + "'");
            }
        }
    }
    if (doc.is_array() && schema.contains("items")) {
        std::size_t i = 0;
        for (const auto& v : doc) validate_json_schema(v, schema["items"], path + "[" + std::to_string(i++) + "]");
    }
}

}  // namespace sustat
