#include "stx/cse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include <json.hpp>

#include "stx/numerics.hpp"
#include "stx/univariate.hpp"

namespace stx {

namespace {
constexpr double kPenalty = 1e12;
constexpr double kTailClamp = 1e-15;  // copula tail probability floor
}

double alpha_fn(double h, const CseParams& p) {
    if (h < 0.0) throw DomainError("alpha_fn: negative distance");
    if (h <= p.delta_ad) return 1.0;
    return std::exp(-std::pow(h - p.delta_ad, p.kappa) / p.lambda_a);
}

double b_fn(double y, double h, const CseParams& p) {
    double a = y * alpha_fn(h, p);
    if (a <= 0.0) return 1.0;
    return 1.0 + std::pow(a, p.beta);
}

// ---------------------------------------------------------------------------
// Delta-Laplace distribution.
// ---------------------------------------------------------------------------

double DeltaLaplace::pdf(double z) const {
    return std::exp(logpdf(z));
}

double DeltaLaplace::logpdf(double z) const {
    if (!(sigma > 0.0) || !(delta > 0.0)) throw DomainError("delta_laplace: bad parameters");
    double t = std::abs((z - mu) / sigma);
    return std::log(delta) - std::log(2.0 * sigma) - std::lgamma(1.0 / delta) -
           std::pow(t, delta);
}

double DeltaLaplace::cdf(double z) const {
    if (!(sigma > 0.0) || !(delta > 0.0)) throw DomainError("delta_laplace: bad parameters");
    double t = (z - mu) / sigma;
    if (t == 0.0) return 0.5;
    double x = std::pow(std::abs(t), delta);
    if (t > 0.0) return 0.5 + 0.5 * boost::math::gamma_p(1.0 / delta, x);
    return 0.5 * boost::math::gamma_q(1.0 / delta, x);
}

double DeltaLaplace::sf(double z) const {
    if (!(sigma > 0.0) || !(delta > 0.0)) throw DomainError("delta_laplace: bad parameters");
    double t = (z - mu) / sigma;
    if (t == 0.0) return 0.5;
    double x = std::pow(std::abs(t), delta);
    if (t > 0.0) return 0.5 * boost::math::gamma_q(1.0 / delta, x);
    return 0.5 + 0.5 * boost::math::gamma_p(1.0 / delta, x);
}

double DeltaLaplace::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("delta_laplace quantile: p outside (0,1)");
    if (p == 0.5) return mu;
    bool upper = p > 0.5;
    double tail2 = upper ? 2.0 * (1.0 - p) : 2.0 * p;
    double t = std::pow(boost::math::gamma_q_inv(1.0 / delta, tail2), 1.0 / delta);
    return upper ? mu + sigma * t : mu - sigma * t;
}

double DeltaLaplace::variance() const {
    return sigma * sigma * std::exp(std::lgamma(3.0 / delta) - std::lgamma(1.0 / delta));
}

DeltaLaplace DeltaLaplace::from_moments(double mean, double var, double delta) {
    if (!(var >= 0.0)) throw DomainError("delta_laplace: negative variance");
    DeltaLaplace d;
    d.mu = mean;
    d.delta = delta;
    d.sigma = std::sqrt(var * std::exp(std::lgamma(1.0 / delta) - std::lgamma(3.0 / delta)));
    if (d.sigma < 1e-300) d.sigma = 1e-300;  // degenerate scale as a point mass
    return d;
}

// ---------------------------------------------------------------------------
// Residual law.
// ---------------------------------------------------------------------------

namespace {

double pw_exp_corr(double h, double phi, double nu) {
    return std::exp(-std::pow(h / phi, nu));
}

} // namespace

ResidualLaw residual_law(const SiteSet& sites, int s0_row, std::span<const int> remote_rows,
                         const CseParams& p) {
    const int m = static_cast<int>(remote_rows.size());
    ResidualLaw law;
    law.remote.assign(remote_rows.begin(), remote_rows.end());
    law.cond_mean.resize(m);
    law.cond_sd.resize(m);
    law.corr.resize(m, m);

    Eigen::VectorXd rho0(m);
    for (int i = 0; i < m; ++i) {
        double h = sites.distance(remote_rows[i], s0_row);
        rho0(i) = pw_exp_corr(h, p.phi_z, p.nu_z);
        law.cond_mean(i) = p.mu_z * (1.0 - rho0(i));
        law.cond_sd(i) = p.sigma_z * std::sqrt(std::max(0.0, 1.0 - rho0(i) * rho0(i)));
    }
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j <= i; ++j) {
            double rij = (i == j) ? 1.0
                                  : pw_exp_corr(sites.distance(remote_rows[i], remote_rows[j]),
                                                p.phi_z, p.nu_z);
            double num = rij - rho0(i) * rho0(j);
            double den = std::sqrt(std::max(1e-300, (1.0 - rho0(i) * rho0(i)) *
                                                        (1.0 - rho0(j) * rho0(j))));
            double c = (i == j) ? 1.0 : num / den;
            law.corr(i, j) = c;
            law.corr(j, i) = c;
        }
    }

    law.margins.reserve(m);
    for (int i = 0; i < m; ++i)
        law.margins.push_back(DeltaLaplace::from_moments(law.cond_mean(i),
                                                         law.cond_sd(i) * law.cond_sd(i),
                                                         p.delta_dl));

    double jitter = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt) {
        Eigen::MatrixXd R = law.corr;
        if (jitter > 0.0) R.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(R);
        if (llt.info() == Eigen::Success) {
            law.chol = llt.matrixL();
            law.log_det_half = law.chol.diagonal().array().log().sum();
            law.jitter_used = jitter;
            return law;
        }
        jitter = (jitter == 0.0) ? 1e-10 : jitter * 100.0;
    }
    throw CovarianceError("residual_law: conditioned correlation not positive definite");
}

ResidualLaw residual_law(const SiteSet& sites, int s0_row, const CseParams& p) {
    std::vector<int> remote;
    for (int i = 0; i < sites.size(); ++i)
        if (i != s0_row) remote.push_back(i);
    return residual_law(sites, s0_row, remote, p);
}

// ---------------------------------------------------------------------------
// Composite likelihood.
// ---------------------------------------------------------------------------

CompositeWorkspace make_workspace(const SpatioTemporalField& laplace_field, const CseConfig& cfg) {
    if (laplace_field.scale != Scale::laplace)
        throw DataError("composite likelihood requires a Laplace-scale field");
    const int D = laplace_field.n_sites();
    const int T = laplace_field.n_times();

    CompositeWorkspace ws;
    ws.field = &laplace_field;
    ws.threshold_q = cfg.threshold_q;
    ws.threshold = to_laplace(cfg.threshold_q);
    ws.n_threads = cfg.n_threads;

    std::vector<int> cond_rows;
    if (cfg.conditioning_sites.empty()) {
        cond_rows.resize(D);
        std::iota(cond_rows.begin(), cond_rows.end(), 0);
    } else {
        for (int id : cfg.conditioning_sites) {
            if (id < 1 || id > D) throw ConfigError("conditioning site id out of range");
            cond_rows.push_back(id - 1);
        }
    }

    Rng rng(cfg.seed);
    for (int s0 : cond_rows) {
        CompositeWorkspace::Contribution c;
        c.s0_row = s0;
        std::vector<int> others;
        for (int i = 0; i < D; ++i)
            if (i != s0) others.push_back(i);
        if (cfg.remote_subsample > 0 &&
            cfg.remote_subsample < static_cast<int>(others.size())) {
            Rng sub = rng.fork(static_cast<std::uint64_t>(s0));
            for (std::size_t pick :
                 sub.sample_without_replacement(others.size(),
                                                static_cast<std::size_t>(cfg.remote_subsample)))
                c.remote_rows.push_back(others[pick]);
        } else {
            c.remote_rows = others;
        }
        for (int t = 0; t < T; ++t)
            if (laplace_field.values(s0, t) > ws.threshold) c.times.push_back(t);
        c.dist.resize(static_cast<int>(c.remote_rows.size()));
        for (std::size_t i = 0; i < c.remote_rows.size(); ++i)
            c.dist(static_cast<int>(i)) = laplace_field.sites.distance(c.remote_rows[i], s0);
        if (!c.times.empty()) ws.contributions.push_back(std::move(c));
    }
    if (ws.contributions.empty())
        throw InsufficientExceedances("composite likelihood: no threshold exceedances at any "
                                      "conditioning site");
    return ws;
}

namespace {

// One conditioning site's negative log likelihood, or kPenalty if any term
// is numerically invalid under these parameters.
double contribution_nll(const CseParams& p, const CompositeWorkspace& ws,
                        const CompositeWorkspace::Contribution& c) {
    const auto& Y = ws.field->values;
    const int m = static_cast<int>(c.remote_rows.size());

    ResidualLaw law;
    try {
        law = residual_law(ws.field->sites, c.s0_row, c.remote_rows, p);
    } catch (const CovarianceError&) {
        return kPenalty;
    }

    Eigen::VectorXd alpha(m);
    for (int i = 0; i < m; ++i) alpha(i) = alpha_fn(c.dist(i), p);

    double nll = 0.0;
    Eigen::VectorXd w(m), z(m);
    for (int t : c.times) {
        double y0 = Y(c.s0_row, t);
        double logdens = 0.0;
        for (int i = 0; i < m; ++i) {
            double a = y0 * alpha(i);
            double b = 1.0 + (a > 0.0 ? std::pow(a, p.beta) : 0.0);
            double zi = (Y(c.remote_rows[i], t) - a) / b;
            z(i) = zi;
            logdens += law.margins[i].logpdf(zi) - std::log(b);

            // copula coordinate; work in the nearer tail so w keeps full
            // relative precision far from the center
            double ti = (zi - law.margins[i].mu) / law.margins[i].sigma;
            if (ti >= 0.0) {
                double tail = std::clamp(law.margins[i].sf(zi), kTailClamp, 0.5);
                w(i) = -norm_quantile(tail);
            } else {
                double lower = std::clamp(law.margins[i].cdf(zi), kTailClamp, 0.5);
                w(i) = norm_quantile(lower);
            }
        }
        Eigen::VectorXd v = law.chol.triangularView<Eigen::Lower>().solve(w);
        logdens += -law.log_det_half - 0.5 * (v.squaredNorm() - w.squaredNorm());
        if (!std::isfinite(logdens)) return kPenalty;
        nll -= logdens;
    }
    return std::isfinite(nll) ? nll : kPenalty;
}

} // namespace

double composite_nll(const CseParams& p, const CompositeWorkspace& ws) {
    const std::size_t n = ws.contributions.size();
    std::vector<double> parts(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        parts[i] = contribution_nll(p, ws, ws.contributions[i]);
    }, ws.n_threads);
    double total = 0.0;
    for (double v : parts) {
        if (v >= kPenalty) return kPenalty;
        total += v;
    }
    return total;
}

double composite_nll(const CseParams& p, const SpatioTemporalField& laplace_field,
                     const CseConfig& cfg) {
    return composite_nll(p, make_workspace(laplace_field, cfg));
}

// ---------------------------------------------------------------------------
// Fitting: simplex in a transformed coordinate space.
// ---------------------------------------------------------------------------

namespace {

double logistic(double t) {
    if (t > 40.0) return 1.0;
    if (t < -40.0) return 0.0;
    return 1.0 / (1.0 + std::exp(-t));
}

double logit(double p) {
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    return std::log(p / (1.0 - p));
}

struct ParamMap {
    double beta_max = 1.0;
    bool estimate_delta_ad = false;
    double fixed_delta_ad = 0.0;

    int dim() const { return estimate_delta_ad ? 9 : 8; }

    CseParams decode(const Eigen::VectorXd& th) const {
        CseParams p;
        p.kappa = 0.01 + 1.99 * logistic(th(0));
        p.lambda_a = std::exp(std::clamp(th(1), -30.0, 30.0));
        p.beta = beta_max * logistic(th(2));
        p.phi_z = std::exp(std::clamp(th(3), -30.0, 30.0));
        p.nu_z = 0.05 + 1.95 * logistic(th(4));
        p.sigma_z = std::exp(std::clamp(th(5), -30.0, 30.0));
        p.mu_z = th(6);
        p.delta_dl = std::exp(std::clamp(th(7), -3.5, 3.5));
        p.delta_ad = estimate_delta_ad ? std::exp(std::clamp(th(8), -30.0, 30.0))
                                       : fixed_delta_ad;
        return p;
    }

    Eigen::VectorXd encode(const CseParams& p) const {
        Eigen::VectorXd th(dim());
        th(0) = logit((p.kappa - 0.01) / 1.99);
        th(1) = std::log(p.lambda_a);
        th(2) = logit(std::min(0.999999, p.beta / beta_max));
        th(3) = std::log(p.phi_z);
        th(4) = logit((p.nu_z - 0.05) / 1.95);
        th(5) = std::log(p.sigma_z);
        th(6) = p.mu_z;
        th(7) = std::clamp(std::log(p.delta_dl), -3.5, 3.5);
        if (estimate_delta_ad) th(8) = std::log(std::max(1e-8, p.delta_ad));
        return th;
    }
};

// Moment-informed starting point: alpha reaching 1/2 at the median distance,
// residual moments from the start-parameter residuals themselves.
CseParams start_params(const CompositeWorkspace& ws, const ParamMap& map) {
    std::vector<double> dists;
    for (const auto& c : ws.contributions)
        for (int i = 0; i < c.dist.size(); ++i) dists.push_back(c.dist(i));
    std::sort(dists.begin(), dists.end());
    double h_med = dists.empty() ? 1.0 : dists[dists.size() / 2];
    if (h_med <= 0.0) h_med = 1.0;

    CseParams p;
    p.kappa = 1.0;
    p.lambda_a = h_med / std::log(2.0);
    p.beta = 0.5 * map.beta_max;
    p.phi_z = h_med;
    p.nu_z = 1.0;
    p.delta_ad = map.estimate_delta_ad ? 0.1 * h_med : map.fixed_delta_ad;

    const auto& Y = ws.field->values;
    std::vector<double> zs;
    for (const auto& c : ws.contributions) {
        for (int t : c.times) {
            double y0 = Y(c.s0_row, t);
            for (int i = 0; i < c.dist.size() && zs.size() < 20000; ++i) {
                double a = y0 * alpha_fn(c.dist(i), p);
                double b = 1.0 + (a > 0.0 ? std::pow(a, p.beta) : 0.0);
                zs.push_back((Y(c.remote_rows[i], t) - a) / b);
            }
        }
        if (zs.size() >= 20000) break;
    }
    p.mu_z = sample_mean(zs);
    double sd = sample_sd(zs);
    p.sigma_z = sd > 1e-8 ? sd : 1.0;
    p.delta_dl = 1.5;
    return p;
}

} // namespace

CseFit fit_cse(const SpatioTemporalField& laplace_field, const CseConfig& cfg) {
    CompositeWorkspace ws = make_workspace(laplace_field, cfg);

    long total_exceed = 0;
    for (const auto& c : ws.contributions) total_exceed += static_cast<long>(c.times.size());
    double avg = static_cast<double>(total_exceed) /
                 static_cast<double>(std::max<std::size_t>(1, ws.contributions.size()));
    if (avg < 20.0)
        throw InsufficientExceedances("fit_cse: fewer than 20 exceedances per conditioning site "
                                      "on average");

    ParamMap map;
    map.beta_max = cfg.beta_max;
    map.estimate_delta_ad = cfg.estimate_delta_ad;
    map.fixed_delta_ad = cfg.delta_ad;

    Eigen::VectorXd th0 = map.encode(start_params(ws, map));
    Eigen::VectorXd step = Eigen::VectorXd::Constant(map.dim(), 0.5);
    step(6) = std::max(0.5, 0.3 * std::abs(th0(6)));

    auto fn = [&](const Eigen::VectorXd& th) {
        if (std::abs(th(6)) > 1e4) return kPenalty * (1.0 + std::abs(th(6)));
        return composite_nll(map.decode(th), ws);
    };

    SimplexOptions opt;
    opt.max_evals = cfg.max_evals;
    opt.f_tol = cfg.tol;
    opt.n_starts = cfg.n_starts;
    opt.seed = splitmix64(cfg.seed + 0x5eed);
    SimplexResult r = nelder_mead(fn, th0, step, opt);
    if (!std::isfinite(r.f) || r.f >= kPenalty)
        throw FitFailure("fit_cse: no start reached a finite composite likelihood");

    CseFit fit;
    fit.params = map.decode(r.x);
    fit.threshold_q = cfg.threshold_q;
    fit.threshold_t = ws.threshold;
    if (cfg.conditioning_sites.empty()) {
        for (int i = 0; i < laplace_field.n_sites(); ++i)
            fit.conditioning_sites.push_back(laplace_field.sites.sites[i].id);
    } else {
        fit.conditioning_sites = cfg.conditioning_sites;
    }
    fit.remote_subsample = cfg.remote_subsample;
    fit.nll = r.f;
    fit.converged = r.converged;
    fit.seed = cfg.seed;
    fit.beta_max = cfg.beta_max;

    // alpha with no decay over the observed distances leaves (kappa, lambda)
    // unidentified
    double h_max = 0.0;
    for (const auto& c : ws.contributions)
        if (c.dist.size() > 0) h_max = std::max(h_max, c.dist.maxCoeff());
    fit.identifiability_warning = alpha_fn(h_max, fit.params) > 0.999;
    return fit;
}

std::string cse_fit_to_json(const CseFit& fit) {
    nlohmann::json j;
    j["params"] = {{"kappa", fit.params.kappa},     {"lambda_a", fit.params.lambda_a},
                   {"delta_ad", fit.params.delta_ad}, {"beta", fit.params.beta},
                   {"phi_z", fit.params.phi_z},     {"nu_z", fit.params.nu_z},
                   {"sigma_z", fit.params.sigma_z}, {"mu_z", fit.params.mu_z},
                   {"delta_dl", fit.params.delta_dl}};
    j["threshold_q"] = fit.threshold_q;
    j["threshold_t"] = fit.threshold_t;
    j["conditioning_sites"] = fit.conditioning_sites;
    j["remote_subsample"] = fit.remote_subsample;
    j["nll"] = fit.nll;
    j["converged"] = fit.converged;
    j["identifiability_warning"] = fit.identifiability_warning;
    j["seed"] = fit.seed;
    j["beta_max"] = fit.beta_max;
    return j.dump(2);
}

CseFit cse_fit_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    CseFit fit;
    const auto& p = j.at("params");
    fit.params.kappa = p.at("kappa");
    fit.params.lambda_a = p.at("lambda_a");
    fit.params.delta_ad = p.at("delta_ad");
    fit.params.beta = p.at("beta");
    fit.params.phi_z = p.at("phi_z");
    fit.params.nu_z = p.at("nu_z");
    fit.params.sigma_z = p.at("sigma_z");
    fit.params.mu_z = p.at("mu_z");
    fit.params.delta_dl = p.at("delta_dl");
    fit.threshold_q = j.at("threshold_q");
    fit.threshold_t = j.at("threshold_t");
    fit.conditioning_sites = j.at("conditioning_sites").get<std::vector<int>>();
    fit.remote_subsample = j.at("remote_subsample");
    fit.nll = j.at("nll");
    fit.converged = j.at("converged");
    fit.identifiability_warning = j.at("identifiability_warning");
    fit.seed = j.at("seed");
    fit.beta_max = j.value("beta_max", 1.0);
    return fit;
}

// ---------------------------------------------------------------------------
// Simulation.
// ---------------------------------------------------------------------------

namespace {

struct FieldSampler {
    const CseFit* fit;
    const SiteSet* sites;
    std::vector<int> cond_rows;              // candidate conditioning rows
    std::vector<ResidualLaw> laws;           // one per candidate row

    FieldSampler(const CseFit& f, const SiteSet& s, std::optional<int> fixed_s0_id)
        : fit(&f), sites(&s) {
        if (fixed_s0_id) {
            if (*fixed_s0_id < 1 || *fixed_s0_id > s.size())
                throw ConfigError("simulate: s0 id out of range");
            cond_rows.push_back(*fixed_s0_id - 1);
        } else {
            for (int id : f.conditioning_sites) cond_rows.push_back(id - 1);
            if (cond_rows.empty())
                throw ConfigError("simulate: fit has no conditioning sites");
        }
        laws.reserve(cond_rows.size());
        for (int row : cond_rows) laws.push_back(residual_law(s, row, f.params));
    }

    // Fills column `col` of out (D rows) and returns the conditioning row.
    int draw(Rng& rng, Eigen::Ref<Eigen::VectorXd> out) const {
        std::size_t pick = cond_rows.size() > 1 ? rng.index(cond_rows.size()) : 0;
        const int s0 = cond_rows[pick];
        const ResidualLaw& law = laws[pick];
        const int m = static_cast<int>(law.remote.size());

        double y0 = fit->threshold_t + rng.exponential();
        Eigen::VectorXd g(m);
        for (int i = 0; i < m; ++i) g(i) = rng.normal();
        Eigen::VectorXd w = law.chol.triangularView<Eigen::Lower>() * g;

        out(s0) = y0;
        for (int i = 0; i < m; ++i) {
            double p = norm_cdf(w(i));
            p = std::clamp(p, kTailClamp, 1.0 - kTailClamp);
            double z0 = law.margins[i].quantile(p);
            int row = law.remote[i];
            double h = sites->distance(row, s0);
            double a = y0 * alpha_fn(h, fit->params);
            double b = 1.0 + (a > 0.0 ? std::pow(a, fit->params.beta) : 0.0);
            out(row) = a + b * z0;
        }
        return s0;
    }
};

} // namespace

SimulatedFields simulate_cse(const CseFit& fit, const SiteSet& sites,
                             std::optional<int> fixed_s0_id, int n_fields, std::uint64_t seed) {
    FieldSampler sampler(fit, sites, fixed_s0_id);
    SimulatedFields out;
    out.s0_row.resize(static_cast<std::size_t>(n_fields));
    out.values.resize(sites.size(), n_fields);
    Rng base(seed);
    parallel_for(static_cast<std::size_t>(n_fields), [&](std::size_t f) {
        Rng rng = base.fork(f);
        out.s0_row[f] = sampler.draw(rng, out.values.col(static_cast<int>(f)));
    });
    return out;
}

ModelChiCurve model_chi(const CseFit& fit, const SiteSet& sites, double u, int n_fields,
                        int n_bins, std::uint64_t seed) {
    if (n_bins < 1) throw DomainError("model_chi: n_bins must be >= 1");
    FieldSampler sampler(fit, sites, std::nullopt);

    double h_max = 0.0;
    for (int i = 0; i < sites.size(); ++i)
        for (int j = 0; j < i; ++j) h_max = std::max(h_max, sites.distance(i, j));
    if (h_max <= 0.0) throw DomainError("model_chi: degenerate site geometry");

    const double level = to_laplace(u);
    std::vector<long> hit(static_cast<std::size_t>(n_bins), 0);
    std::vector<long> tot(static_cast<std::size_t>(n_bins), 0);

    Rng base(seed);
    Eigen::VectorXd field(sites.size());
    for (int f = 0; f < n_fields; ++f) {
        Rng rng = base.fork(static_cast<std::uint64_t>(f));
        int s0 = sampler.draw(rng, field);
        for (int i = 0; i < sites.size(); ++i) {
            if (i == s0) continue;
            double h = sites.distance(i, s0);
            int b = std::min(n_bins - 1, static_cast<int>(h / h_max * n_bins));
            ++tot[static_cast<std::size_t>(b)];
            if (field(i) > level) ++hit[static_cast<std::size_t>(b)];
        }
    }

    ModelChiCurve mc;
    mc.u = u;
    mc.bin_lo.resize(n_bins);
    mc.bin_hi.resize(n_bins);
    mc.chi.resize(n_bins);
    mc.count.resize(static_cast<std::size_t>(n_bins));
    for (int b = 0; b < n_bins; ++b) {
        mc.bin_lo(b) = h_max * b / n_bins;
        mc.bin_hi(b) = h_max * (b + 1) / n_bins;
        mc.count[static_cast<std::size_t>(b)] = tot[static_cast<std::size_t>(b)];
        mc.chi(b) = tot[static_cast<std::size_t>(b)] > 0
                        ? static_cast<double>(hit[static_cast<std::size_t>(b)]) /
                              static_cast<double>(tot[static_cast<std::size_t>(b)])
                        : std::numeric_limits<double>::quiet_NaN();
    }
    return mc;
}

std::vector<double> conditional_exceedance_pct(const CseFit& fit, const SiteSet& sites, int s0_id,
                                               double u, int n_fields, std::uint64_t seed) {
    FieldSampler sampler(fit, sites, s0_id);
    const double level = to_laplace(u);
    const int D = sites.size();
    std::vector<double> pct(static_cast<std::size_t>(n_fields));
    Rng base(seed);
    parallel_for(static_cast<std::size_t>(n_fields), [&](std::size_t f) {
        Rng rng = base.fork(f);
        Eigen::VectorXd field(D);
        int s0 = sampler.draw(rng, field);
        long hits = 0;
        for (int i = 0; i < D; ++i)
            if (i != s0 && field(i) > level) ++hits;
        pct[f] = 100.0 * static_cast<double>(hits) / static_cast<double>(D - 1);
    });
    return pct;
}

void write_model_chi_csv(const ModelChiCurve& mc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "lo,hi,chi,n\n";
    char buf[96];
    for (int b = 0; b < mc.chi.size(); ++b) {
        std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%ld\n", mc.bin_lo(b), mc.bin_hi(b),
                      mc.chi(b), mc.count[static_cast<std::size_t>(b)]);
        out << buf;
    }
}

void write_percentages_csv(std::span<const double> pct, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "field,pct\n";
    char buf[64];
    for (std::size_t i = 0; i < pct.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.12g\n", i, pct[i]);
        out << buf;
    }
}

} // namespace stx
