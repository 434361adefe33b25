// stx: batch CLI for marginal detrending of gridded series, empirical
// extremal-dependence diagnostics, and the conditional spatial extremes
// model. Subcommands: gen, detrend, dependence, cse, simulate.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stx/cse.hpp"
#include "stx/dependence.hpp"
#include "stx/detrend.hpp"
#include "stx/field.hpp"
#include "stx/numerics.hpp"
#include "stx/synthetic.hpp"
#include "stx/univariate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// resolved option values, serialized into the run manifest
struct Manifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    void set(const std::string& k, const std::string& v) { config[k] = v; }
    void set(const std::string& k, double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        config[k] = buf;
    }
    void set(const std::string& k, int v) { config[k] = std::to_string(v); }
    void set(const std::string& k, std::uint64_t v) { config[k] = std::to_string(v); }

    void write(const fs::path& out_dir) const {
        std::string flat;
        for (const auto& [k, v] : config) flat += k + "=" + v + "\n";
        char hash[24];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(stx::fnv1a64(flat)));
        json j;
        j["command"] = command;
        j["version"] = stx::kVersion;
        j["config"] = config;
        j["config_hash"] = hash;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        std::ofstream f(out_dir / ("manifest_" + command + ".json"));
        f << j.dump(2) << "\n";
    }
};

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

stx::TimeWindow parse_window(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
        throw stx::ConfigError("window '" + text + "' must be begin:end");
    std::string a = text.substr(0, colon), b = text.substr(colon + 1);
    auto expand = [](const std::string& s, bool start) {
        if (s.size() == 4) {
            int year = std::stoi(s);
            return start ? stx::Date{year, 1, 1} : stx::Date{year, 12, 31};
        }
        return stx::parse_date(s);
    };
    stx::TimeWindow w{expand(a, true), expand(b, false)};
    if (w.end < w.begin) throw stx::ConfigError("window '" + text + "' ends before it begins");
    return w;
}

json trend_fit_json(const stx::TrendFit& t) {
    json j;
    j["lambda_mu_gmt"] = t.lambda_mu_gmt;
    j["lambda_mu_day"] = t.lambda_mu_day;
    j["lambda_sig_gmt"] = t.lambda_sig_gmt;
    j["lambda_sig_day"] = t.lambda_sig_day;
    j["knots_gmt"] =
        std::vector<double>(t.knots_gmt.data(), t.knots_gmt.data() + t.knots_gmt.size());
    j["knots_day"] =
        std::vector<double>(t.knots_day.data(), t.knots_day.data() + t.knots_day.size());
    j["coef_mu"] = std::vector<double>(t.coef_mu.data(), t.coef_mu.data() + t.coef_mu.size());
    j["coef_logsigma"] = std::vector<double>(t.coef_logsigma.data(),
                                             t.coef_logsigma.data() + t.coef_logsigma.size());
    j["nll"] = t.nll;
    j["penalized_nll"] = t.penalized_nll;
    j["alternations"] = t.alternations;
    return j;
}

json gpd_fit_json(const stx::NsGpdFit& g) {
    json j;
    j["threshold_q"] = g.threshold_q;
    j["threshold_value"] = g.threshold_value;
    j["trend"] = stx::trend_name(g.trend);
    j["beta_sigma"] =
        std::vector<double>(g.beta_sigma.data(), g.beta_sigma.data() + g.beta_sigma.size());
    j["xi"] = g.xi;
    j["nll"] = g.nll;
    j["n_exceed"] = g.n_exceed;
    return j;
}

void write_provenance(const stx::DetrendedField& out, const fs::path& path) {
    json j;
    j["pipeline"] = stx::pipeline_name(out.pipeline);
    if (out.yearly) {
        j["yearly"] = {{"years", out.yearly->years}, {"m", out.yearly->m}, {"s", out.yearly->s}};
    }
    json sites = json::array();
    for (const auto& p : out.per_site) {
        json s;
        s["site_id"] = p.site_id;
        if (p.trend) s["trend"] = trend_fit_json(*p.trend);
        if (p.gpd) s["gpd"] = gpd_fit_json(*p.gpd);
        if (p.threshold) {
            json t;
            t["q_star"] = p.threshold->q_star;
            json curve = json::array();
            for (auto [q, d] : p.threshold->eqd_curve) curve.push_back({{"q", q}, {"eqd", d}});
            t["curve"] = curve;
            s["threshold"] = t;
        }
        s["pit_clamped"] = p.pit_clamped;
        s["warnings"] = p.warnings;
        sites.push_back(s);
    }
    j["sites"] = sites;
    std::ofstream f(path);
    f << j.dump(2) << "\n";
}

void write_thresholds_csv(const stx::DetrendedField& out, const fs::path& dir,
                          Manifest& manifest) {
    fs::path tpath = dir / "thresholds_D.csv";
    std::ofstream t(tpath);
    t << "site,q_star,fallback\n";
    std::map<double, int> hist;
    char buf[64];
    for (const auto& p : out.per_site) {
        bool fallback = !p.threshold.has_value();
        if (p.threshold) {
            std::snprintf(buf, sizeof(buf), "%d,%.6g,%d\n", p.site_id, p.threshold->q_star,
                          fallback ? 1 : 0);
            ++hist[p.threshold->q_star];
        } else {
            std::snprintf(buf, sizeof(buf), "%d,nan,%d\n", p.site_id, fallback ? 1 : 0);
        }
        t << buf;
    }
    manifest.outputs.push_back(tpath.string());

    fs::path hpath = dir / "threshold_hist_D.csv";
    std::ofstream h(hpath);
    h << "q,count\n";
    for (auto [q, c] : hist) {
        std::snprintf(buf, sizeof(buf), "%.6g,%d\n", q, c);
        h << buf;
    }
    manifest.outputs.push_back(hpath.string());
}

void write_site_extract(const stx::SpatioTemporalField& raw, const stx::DetrendedField& out,
                        int site_id, const fs::path& path) {
    int row = site_id - 1;
    std::ofstream f(path);
    f << "date,raw,uniform,laplace\n";
    char buf[160];
    for (int t = 0; t < raw.n_times(); ++t) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", raw.dates[t].str().c_str(),
                      raw.values(row, t), out.uniform.values(row, t), out.laplace.values(row, t));
        f << buf;
    }
}

int nearest_centroid_site(const stx::SiteSet& sites) {
    double clon = 0.0, clat = 0.0;
    for (const auto& s : sites.sites) {
        clon += s.lon;
        clat += s.lat;
    }
    clon /= sites.size();
    clat /= sites.size();
    int best = 0;
    double bestd = 1e300;
    for (int i = 0; i < sites.size(); ++i) {
        double dx = sites.sites[i].lon - clon, dy = sites.sites[i].lat - clat;
        double d = dx * dx + dy * dy;
        if (d < bestd) {
            bestd = d;
            best = i;
        }
    }
    return sites.sites[best].id;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
    stx::SyntheticSpec spec;
    std::string out;
};

int run_gen(const GenArgs& a) {
    fs::path dir = prepare_out_dir(a.out);
    stx::GeneratedField g = stx::gen_field(a.spec);

    Manifest m;
    m.command = "gen";
    m.set("nx", a.spec.nx);
    m.set("ny", a.spec.ny);
    m.set("spacing", a.spec.spacing);
    m.set("n_years", a.spec.n_years);
    m.set("season_length", a.spec.season_length);
    m.set("start_year", a.spec.start_year);
    m.set("base_level", a.spec.base_level);
    m.set("gmt_slope", a.spec.gmt_slope);
    m.set("seasonal_amp", a.spec.seasonal_amp);
    m.set("year_effect_sd", a.spec.year_effect_sd);
    m.set("scale_gmt_log_slope", a.spec.scale_gmt_log_slope);
    m.set("noise_sd", a.spec.noise_sd);
    m.set("gmt_range", a.spec.gmt_range);
    m.set("dep_range", a.spec.dep_range);
    m.set("dep_smooth", a.spec.dep_smooth);
    m.set("seed", a.spec.seed);

    fs::path fpath = dir / "field.csv";
    fs::path cpath = dir / "covariates.csv";
    stx::write_field_csv(g.field, fpath.string());
    stx::write_covariates_csv(g.cov, cpath.string());
    json truth;
    truth["year_effects"] =
        std::vector<double>(g.year_effects.data(), g.year_effects.data() + g.year_effects.size());
    std::ofstream tf(dir / "truth.json");
    tf << truth.dump(2) << "\n";

    m.outputs = {fpath.string(), cpath.string(), (dir / "truth.json").string()};
    m.write(dir);
    std::cout << "gen: wrote " << g.field.n_sites() << " sites x " << g.field.n_times()
              << " times to " << dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// detrend
// ---------------------------------------------------------------------------

struct DetrendArgs {
    std::string field_path, cov_path, out;
    std::string pipeline = "all";
    stx::DetrendConfig cfg;
    int eqd_n_boot = 100;
    int extract_site = 0;
};

int run_detrend(const DetrendArgs& a) {
    std::vector<stx::Pipeline> pipes;
    if (a.pipeline == "all") {
        pipes = {stx::Pipeline::A, stx::Pipeline::B, stx::Pipeline::C, stx::Pipeline::D};
    } else {
        pipes = {stx::pipeline_from_name(a.pipeline)};
    }

    fs::path dir = prepare_out_dir(a.out);
    stx::SpatioTemporalField field = stx::load_field(a.field_path);

    bool needs_cov = false;
    for (auto p : pipes)
        if (p != stx::Pipeline::A) needs_cov = true;
    stx::CovariateTable cov;
    if (needs_cov) {
        if (a.cov_path.empty()) throw stx::ConfigError("pipelines B/C/D require --covariates");
        cov = stx::load_covariates(a.cov_path, field.dates);
    }

    stx::DetrendConfig cfg = a.cfg;
    cfg.eqd.n_boot = a.eqd_n_boot;

    Manifest m;
    m.command = "detrend";
    m.inputs = {a.field_path};
    if (!a.cov_path.empty()) m.inputs.push_back(a.cov_path);
    m.set("pipeline", a.pipeline);
    m.set("threshold_q", cfg.threshold_q);
    m.set("lrt_level", cfg.lrt_level);
    m.set("dim_gmt", cfg.dim_gmt);
    m.set("dim_day", cfg.dim_day);
    m.set("eqd_n_boot", cfg.eqd.n_boot);
    m.set("seed", cfg.seed);
    m.set("extract_site", a.extract_site);

    for (auto p : pipes) {
        stx::DetrendedField out;
        switch (p) {
            case stx::Pipeline::A: out = stx::margins_a(field); break;
            case stx::Pipeline::B: out = stx::margins_b(field, cov, cfg); break;
            case stx::Pipeline::C: out = stx::margins_c(field, cov, cfg); break;
            case stx::Pipeline::D: out = stx::margins_d(field, cov, cfg); break;
        }
        std::string tag = stx::pipeline_name(p);
        fs::path upath = dir / ("uniform_" + tag + ".csv");
        fs::path lpath = dir / ("laplace_" + tag + ".csv");
        fs::path ppath = dir / ("provenance_" + tag + ".json");
        stx::write_field_csv(out.uniform, upath.string());
        stx::write_field_csv(out.laplace, lpath.string());
        write_provenance(out, ppath);
        m.outputs.push_back(upath.string());
        m.outputs.push_back(lpath.string());
        m.outputs.push_back(ppath.string());
        if (p == stx::Pipeline::D) write_thresholds_csv(out, dir, m);
        if (a.extract_site >= 1 && a.extract_site <= field.n_sites()) {
            fs::path epath = dir / ("site_" + std::to_string(a.extract_site) + "_" + tag + ".csv");
            write_site_extract(field, out, a.extract_site, epath);
            m.outputs.push_back(epath.string());
        }
        std::cout << "detrend " << tag << ": done\n";
    }
    m.write(dir);
    return 0;
}

// ---------------------------------------------------------------------------
// dependence
// ---------------------------------------------------------------------------

struct DependenceArgs {
    std::string field_path, out;
    std::string scale = "laplace";
    double u = 0.95;
    std::string window1, window2;
    int n_blocks = 10;
    bool reuniformize = false;
};

int run_dependence(const DependenceArgs& a) {
    fs::path dir = prepare_out_dir(a.out);
    stx::SpatioTemporalField field = stx::load_field(a.field_path);
    field.scale = stx::scale_from_name(a.scale);
    bool reuni = a.reuniformize || field.scale == stx::Scale::raw;
    field.validate();

    stx::TimeWindow full{field.dates.front(), field.dates.back()};

    Manifest m;
    m.command = "dependence";
    m.inputs = {a.field_path};
    m.set("scale", a.scale);
    m.set("u", a.u);
    m.set("window1", a.window1.empty() ? "-" : a.window1);
    m.set("window2", a.window2.empty() ? "-" : a.window2);
    m.set("n_blocks", a.n_blocks);
    m.set("reuniformize", reuni ? 1 : 0);

    stx::PairwiseDependence pw = stx::pairwise_dependence(field, a.u, full, reuni);
    stx::SiteAverages sa = stx::site_averages(pw, field.sites);
    stx::DistanceBlockSummary db = stx::distance_blocks(pw, a.n_blocks);

    fs::path pw_path = dir / "pairwise.csv";
    fs::path sa_path = dir / "site_averages.csv";
    fs::path db_path = dir / "distance_blocks.csv";
    stx::write_pairwise_csv(pw, pw_path.string());
    stx::write_site_averages_csv(sa, sa_path.string());
    stx::write_distance_blocks_csv(db, db_path.string());
    m.outputs = {pw_path.string(), sa_path.string(), db_path.string()};

    if (!a.window1.empty() && !a.window2.empty()) {
        stx::TimeWindow w1 = parse_window(a.window1);
        stx::TimeWindow w2 = parse_window(a.window2);
        stx::PeriodDifference pd = stx::period_difference(field, a.u, w1, w2, reuni);
        fs::path pd_path = dir / "period_difference.csv";
        stx::write_period_difference_csv(pd, pd_path.string());
        m.outputs.push_back(pd_path.string());

        // per-window distance-block summaries (boxplot-over-distance data)
        stx::PairwiseDependence pw1 = stx::pairwise_dependence(field, a.u, w1, reuni);
        stx::PairwiseDependence pw2 = stx::pairwise_dependence(field, a.u, w2, reuni);
        fs::path b1 = dir / "distance_blocks_window1.csv";
        fs::path b2 = dir / "distance_blocks_window2.csv";
        stx::write_distance_blocks_csv(stx::distance_blocks(pw1, a.n_blocks), b1.string());
        stx::write_distance_blocks_csv(stx::distance_blocks(pw2, a.n_blocks), b2.string());
        m.outputs.push_back(b1.string());
        m.outputs.push_back(b2.string());
    }
    m.write(dir);
    std::cout << "dependence: wrote " << m.outputs.size() << " files to " << dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// cse
// ---------------------------------------------------------------------------

struct CseArgs {
    std::string field_path, out;
    std::string label;
    stx::CseConfig cfg;
    int conditioning_sample = 0;  // 0 = all sites
    double u = 0.95;
    int n_sim = 50000;
    int chi_bins = 10;
    int s0 = 0;  // 0 = nearest the domain centroid
};

int run_cse(const CseArgs& a) {
    fs::path dir = prepare_out_dir(a.out);
    stx::SpatioTemporalField field = stx::load_field(a.field_path);
    field.scale = stx::Scale::laplace;
    field.validate();

    stx::CseConfig cfg = a.cfg;
    if (a.conditioning_sample > 0 && a.conditioning_sample < field.n_sites()) {
        stx::Rng rng(stx::splitmix64(cfg.seed + 0xc011d));
        auto rows = rng.sample_without_replacement(static_cast<std::size_t>(field.n_sites()),
                                                   static_cast<std::size_t>(a.conditioning_sample));
        cfg.conditioning_sites.clear();
        for (auto r : rows) cfg.conditioning_sites.push_back(static_cast<int>(r) + 1);
    }

    std::string label = a.label.empty() ? fs::path(a.field_path).stem().string() : a.label;

    Manifest m;
    m.command = "cse";
    m.inputs = {a.field_path};
    m.set("label", label);
    m.set("threshold_q", cfg.threshold_q);
    m.set("remote_subsample", cfg.remote_subsample);
    m.set("conditioning_sample", a.conditioning_sample);
    m.set("n_starts", cfg.n_starts);
    m.set("max_evals", cfg.max_evals);
    m.set("beta_max", cfg.beta_max);
    m.set("seed", cfg.seed);
    m.set("u", a.u);
    m.set("n_sim", a.n_sim);
    m.set("chi_bins", a.chi_bins);

    stx::CseFit fit = stx::fit_cse(field, cfg);

    fs::path jpath = dir / ("cse_fit_" + label + ".json");
    {
        std::ofstream f(jpath);
        f << stx::cse_fit_to_json(fit) << "\n";
    }
    m.outputs.push_back(jpath.string());

    fs::path tpath = dir / ("cse_coefficients_" + label + ".csv");
    {
        std::ofstream f(tpath);
        f << "label,kappa,lambda,beta,phi_z,mu_z,delta,nu_z,sigma_z,nll,converged\n";
        char buf[400];
        std::snprintf(buf, sizeof(buf), "%s,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.10g,%d\n",
                      label.c_str(), fit.params.kappa, fit.params.lambda_a, fit.params.beta,
                      fit.params.phi_z, fit.params.mu_z, fit.params.delta_dl, fit.params.nu_z,
                      fit.params.sigma_z, fit.nll, fit.converged ? 1 : 0);
        f << buf;
    }
    m.outputs.push_back(tpath.string());

    if (a.n_sim > 0) {
        stx::ModelChiCurve mc = stx::model_chi(fit, field.sites, a.u, a.n_sim, a.chi_bins,
                                               stx::splitmix64(cfg.seed + 101));
        fs::path cpath = dir / ("model_chi_" + label + ".csv");
        stx::write_model_chi_csv(mc, cpath.string());
        m.outputs.push_back(cpath.string());

        int s0 = a.s0 > 0 ? a.s0 : nearest_centroid_site(field.sites);
        std::vector<double> pct = stx::conditional_exceedance_pct(
            fit, field.sites, s0, a.u, a.n_sim, stx::splitmix64(cfg.seed + 202));
        fs::path ppath = dir / ("exceedance_pct_" + label + ".csv");
        stx::write_percentages_csv(pct, ppath.string());
        m.outputs.push_back(ppath.string());
        m.set("s0", s0);
    }
    m.write(dir);
    std::cout << "cse " << label << ": nll=" << fit.nll
              << (fit.converged ? "" : " (not converged)")
              << (fit.identifiability_warning ? " [identifiability warning]" : "") << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string fit_path, field_path, out;
    int n_fields = 1000;
    int s0 = 0;
    std::uint64_t seed = 0;
};

int run_simulate(const SimulateArgs& a) {
    fs::path dir = prepare_out_dir(a.out);
    std::ifstream jf(a.fit_path);
    if (!jf) throw stx::DataError("cannot open fit file '" + a.fit_path + "'");
    std::stringstream ss;
    ss << jf.rdbuf();
    stx::CseFit fit = stx::cse_fit_from_json(ss.str());
    stx::SpatioTemporalField field = stx::load_field(a.field_path);

    std::optional<int> s0;
    if (a.s0 > 0) s0 = a.s0;
    stx::SimulatedFields sim = stx::simulate_cse(fit, field.sites, s0, a.n_fields, a.seed);

    fs::path spath = dir / "simulated_fields.csv";
    {
        std::ofstream f(spath);
        f << "field,site_id,s0_id,value\n";
        char buf[96];
        for (int k = 0; k < a.n_fields; ++k) {
            for (int i = 0; i < field.n_sites(); ++i) {
                std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g\n", k, field.sites.sites[i].id,
                              field.sites.sites[sim.s0_row[static_cast<std::size_t>(k)]].id,
                              sim.values(i, k));
                f << buf;
            }
        }
    }

    Manifest m;
    m.command = "simulate";
    m.inputs = {a.fit_path, a.field_path};
    m.set("n_fields", a.n_fields);
    m.set("s0", a.s0);
    m.set("seed", a.seed);
    m.outputs = {spath.string()};
    m.write(dir);
    std::cout << "simulate: wrote " << a.n_fields << " fields to " << spath.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatio-temporal extremes toolkit: marginal detrending, extremal dependence "
                 "diagnostics, conditional spatial extremes model"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; flags override");

    GenArgs gen;
    auto* cgen = app.add_subcommand("gen", "generate a synthetic field and covariates");
    cgen->add_option("--out", gen.out, "output directory")->required();
    cgen->add_option("--nx", gen.spec.nx);
    cgen->add_option("--ny", gen.spec.ny);
    cgen->add_option("--spacing", gen.spec.spacing);
    cgen->add_option("--years", gen.spec.n_years);
    cgen->add_option("--season-length", gen.spec.season_length);
    cgen->add_option("--start-year", gen.spec.start_year);
    cgen->add_option("--base-level", gen.spec.base_level);
    cgen->add_option("--gmt-slope", gen.spec.gmt_slope);
    cgen->add_option("--seasonal-amp", gen.spec.seasonal_amp);
    cgen->add_option("--year-effect-sd", gen.spec.year_effect_sd);
    cgen->add_option("--scale-gmt-slope", gen.spec.scale_gmt_log_slope);
    cgen->add_option("--noise-sd", gen.spec.noise_sd);
    cgen->add_option("--gmt-range", gen.spec.gmt_range);
    cgen->add_option("--dep-range", gen.spec.dep_range);
    cgen->add_option("--dep-smooth", gen.spec.dep_smooth);
    cgen->add_option("--seed", gen.spec.seed);

    DetrendArgs det;
    auto* cdet = app.add_subcommand("detrend", "run marginal detrending pipelines A-D");
    cdet->add_option("--field", det.field_path, "raw field CSV")->required();
    cdet->add_option("--covariates", det.cov_path, "covariate CSV (B/C/D)");
    cdet->add_option("--pipeline", det.pipeline, "A|B|C|D|all");
    cdet->add_option("--out", det.out, "output directory")->required();
    cdet->add_option("--threshold-q", det.cfg.threshold_q);
    cdet->add_option("--lrt-level", det.cfg.lrt_level);
    cdet->add_option("--dim-gmt", det.cfg.dim_gmt);
    cdet->add_option("--dim-day", det.cfg.dim_day);
    cdet->add_option("--eqd-n-boot", det.eqd_n_boot);
    cdet->add_option("--extract-site", det.extract_site, "emit a per-site series extract");
    cdet->add_option("--seed", det.cfg.seed);
    cdet->add_option("--threads", det.cfg.n_threads);

    DependenceArgs dep;
    auto* cdep = app.add_subcommand("dependence", "empirical chi/eta diagnostics");
    cdep->add_option("--field", dep.field_path, "detrended field CSV")->required();
    cdep->add_option("--scale", dep.scale, "uniform|laplace|raw");
    cdep->add_option("--u", dep.u);
    cdep->add_option("--window1", dep.window1, "YYYY-MM-DD:YYYY-MM-DD or YYYY:YYYY");
    cdep->add_option("--window2", dep.window2);
    cdep->add_option("--blocks", dep.n_blocks);
    cdep->add_flag("--reuniformize", dep.reuniformize, "re-rank within analysis windows");
    cdep->add_option("--out", dep.out, "output directory")->required();

    CseArgs cse;
    auto* ccse = app.add_subcommand("cse", "fit the conditional spatial extremes model");
    ccse->add_option("--field", cse.field_path, "Laplace-scale field CSV")->required();
    ccse->add_option("--label", cse.label, "row label for the coefficient table");
    ccse->add_option("--out", cse.out, "output directory")->required();
    ccse->add_option("--threshold-q", cse.cfg.threshold_q);
    ccse->add_option("--conditioning-sample", cse.conditioning_sample,
                     "number of conditioning sites (0 = all)");
    ccse->add_option("--remote-subsample", cse.cfg.remote_subsample,
                     "remote sites per contribution (0 = all)");
    ccse->add_option("--n-starts", cse.cfg.n_starts);
    ccse->add_option("--max-evals", cse.cfg.max_evals);
    ccse->add_option("--beta-max", cse.cfg.beta_max);
    ccse->add_option("--u", cse.u);
    ccse->add_option("--n-sim", cse.n_sim, "simulated fields for model summaries");
    ccse->add_option("--chi-bins", cse.chi_bins);
    ccse->add_option("--s0", cse.s0, "conditioning site for exceedance percentages");
    ccse->add_option("--seed", cse.cfg.seed);
    ccse->add_option("--threads", cse.cfg.n_threads);

    SimulateArgs sim;
    auto* csim = app.add_subcommand("simulate", "simulate fields from a saved fit");
    csim->add_option("--fit", sim.fit_path, "cse fit JSON")->required();
    csim->add_option("--field", sim.field_path, "field CSV providing the site set")->required();
    csim->add_option("--n-fields", sim.n_fields);
    csim->add_option("--s0", sim.s0, "fixed conditioning site id (0 = uniform over fit set)");
    csim->add_option("--seed", sim.seed);
    csim->add_option("--out", sim.out, "output directory")->required();

    try {
        app.parse(argc, argv);
        if (*cgen) return run_gen(gen);
        if (*cdet) return run_detrend(det);
        if (*cdep) return run_dependence(dep);
        if (*ccse) return run_cse(cse);
        if (*csim) return run_simulate(sim);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const stx::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const stx::DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const stx::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const stx::FitError& e) {
        std::cerr << "fit error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
