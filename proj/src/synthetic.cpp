#include "stx/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "stx/numerics.hpp"
#include "stx/univariate.hpp"

namespace stx {

GeneratedField gen_field(const SyntheticSpec& spec) {
    if (spec.nx * spec.ny < 2) throw ConfigError("gen_field: need at least 2 sites");
    if (spec.n_years < 1 || spec.season_length < 1)
        throw ConfigError("gen_field: empty time layout");
    if (spec.noise_sd <= 0.0) throw ConfigError("gen_field: noise_sd must be positive");

    GeneratedField out;
    SpatioTemporalField& f = out.field;
    const int D = spec.nx * spec.ny;
    for (int iy = 0; iy < spec.ny; ++iy)
        for (int ix = 0; ix < spec.nx; ++ix)
            f.sites.sites.push_back(Site{static_cast<int>(f.sites.sites.size()) + 1,
                                         spec.lon0 + spec.spacing * ix,
                                         spec.lat0 + spec.spacing * iy});

    const int L = spec.season_length;
    const int T = spec.n_years * L;
    f.dates.reserve(T);
    for (int k = 0; k < spec.n_years; ++k) {
        Date d{spec.start_year + k, 7, 1};
        for (int j = 0; j < L; ++j) {
            f.dates.push_back(d);
            d = d.next();
        }
    }

    Eigen::VectorXd gmt(T);
    for (int t = 0; t < T; ++t)
        gmt(t) = spec.gmt_range * static_cast<double>(t) / static_cast<double>(std::max(1, T - 1));
    out.cov = make_covariates(f.dates, gmt);

    // spatial noise: Gaussian copula with powered-exponential correlation
    Eigen::MatrixXd chol;
    if (spec.dep_range > 0.0) {
        Eigen::MatrixXd R(D, D);
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j)
                R(i, j) = i == j ? 1.0
                                 : std::exp(-std::pow(f.sites.distance(i, j) / spec.dep_range,
                                                      spec.dep_smooth));
        R.diagonal().array() += 1e-10;
        Eigen::LLT<Eigen::MatrixXd> llt(R);
        if (llt.info() != Eigen::Success)
            throw CovarianceError("gen_field: dependence correlation not positive definite");
        chol = llt.matrixL();
    }

    Rng rng(spec.seed);
    out.year_effects.resize(spec.n_years);
    for (int k = 0; k < spec.n_years; ++k)
        out.year_effects(k) = spec.year_effect_sd * rng.normal();

    f.values.resize(D, T);
    Eigen::VectorXd g(D);
    Rng noise = rng.fork(1);
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < D; ++i) g(i) = noise.normal();
        if (spec.dep_range > 0.0) g = chol.triangularView<Eigen::Lower>() * g;
        int k = t / L;
        double season = spec.seasonal_amp *
                        std::sin(2.0 * M_PI * static_cast<double>(out.cov.day_index[t]) /
                                 static_cast<double>(L));
        double mu = spec.base_level + spec.gmt_slope * gmt(t) + season + out.year_effects(k);
        double sd = spec.noise_sd * std::exp(spec.scale_gmt_log_slope * gmt(t));
        for (int i = 0; i < D; ++i) f.values(i, t) = mu + sd * g(i);
    }
    f.scale = Scale::raw;
    return out;
}

// ---------------------------------------------------------------------------
// Bivariate-normal orthant oracles.
// ---------------------------------------------------------------------------

double bvn_upper_orthant(double z, double rho) {
    if (!(std::abs(rho) < 1.0)) throw DomainError("bvn_upper_orthant: |rho| must be < 1");
    const double s = std::sqrt(1.0 - rho * rho);
    auto integrand = [&](double x) {
        return norm_pdf(x) * norm_sf((z - rho * x) / s);
    };
    boost::math::quadrature::gauss_kronrod<double, 61> gk;
    double err = 0.0;
    double v = gk.integrate(integrand, z, std::numeric_limits<double>::infinity(), 12, 1e-12, &err);
    if (!(err < 1e-8)) throw OracleError("bvn_upper_orthant: quadrature failed to converge");
    return v;
}

double bvn_upper_orthant_plackett(double z, double rho) {
    if (!(std::abs(rho) < 1.0)) throw DomainError("bvn_upper_orthant: |rho| must be < 1");
    // d/dr P(X>z, Y>z; r) = phi2(z, z; r); integrate from independence
    auto integrand = [&](double r) {
        double s2 = 1.0 - r * r;
        return std::exp(-z * z / (1.0 + r)) / (2.0 * M_PI * std::sqrt(s2));
    };
    boost::math::quadrature::tanh_sinh<double> ts;
    double base = norm_sf(z) * norm_sf(z);
    if (rho == 0.0) return base;
    double err = 0.0;
    double lo = std::min(0.0, rho), hi = std::max(0.0, rho);
    double v = ts.integrate(integrand, lo, hi, 1e-12, &err);
    if (!(err < 1e-6)) throw OracleError("bvn_upper_orthant_plackett: quadrature failed");
    return rho > 0.0 ? base + v : base - v;
}

double oracle_chi_gaussian(double rho, double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("oracle_chi_gaussian: u outside (0,1)");
    if (rho == 0.0) return 1.0 - u;
    double z = norm_quantile(u);
    return bvn_upper_orthant(z, rho) / (1.0 - u);
}

double oracle_eta_gaussian_u(double rho, double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("oracle_eta_gaussian_u: u outside (0,1)");
    double z = norm_quantile(u);
    double joint = bvn_upper_orthant(z, rho);
    return std::log1p(-u) / std::log(joint);
}

double oracle_eta_gaussian_limit(double rho) {
    if (!(std::abs(rho) < 1.0)) throw DomainError("oracle_eta_gaussian_limit: |rho| must be < 1");
    return 0.5 * (1.0 + rho);
}

// ---------------------------------------------------------------------------
// Dense composite-likelihood oracle.
// ---------------------------------------------------------------------------

namespace {

double oracle_dl_logpdf(double z, double mu, double sigma, double delta) {
    double t = std::abs((z - mu) / sigma);
    return std::log(delta) - std::log(2.0 * sigma) - std::lgamma(1.0 / delta) -
           std::pow(t, delta);
}

// Tail probability of the delta-Laplace by adaptive quadrature of its
// density on (|t|, infinity), in standardized coordinates.
double oracle_dl_tail(double t_abs, double delta) {
    auto dens = [&](double s) {
        return std::exp(std::log(delta) - std::log(2.0) - std::lgamma(1.0 / delta) -
                        std::pow(s, delta));
    };
    boost::math::quadrature::gauss_kronrod<double, 61> gk;
    double err = 0.0;
    double v = gk.integrate(dens, t_abs, std::numeric_limits<double>::infinity(), 14, 1e-14, &err);
    return std::clamp(v, 0.0, 0.5);
}

// Standard normal quantile by bisection on erfc; shares nothing with the
// estimator's erf_inv path beyond erfc itself.
double oracle_norm_quantile(double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (norm_cdf(mid) < p)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15 * std::max(1.0, std::abs(lo))) break;
    }
    return 0.5 * (lo + hi);
}

} // namespace

double oracle_nll_dense(const CseParams& p, const SpatioTemporalField& laplace_field,
                        double threshold_q, const std::vector<int>& conditioning_site_ids) {
    if (laplace_field.scale != Scale::laplace)
        throw DataError("oracle_nll_dense: field must be Laplace scale");
    const int D = laplace_field.n_sites();
    const double thr = to_laplace(threshold_q);
    const auto& Y = laplace_field.values;
    const auto& sites = laplace_field.sites;

    const double var_ratio = std::exp(std::lgamma(1.0 / p.delta_dl) -
                                      std::lgamma(3.0 / p.delta_dl));

    double nll = 0.0;
    for (int id : conditioning_site_ids) {
        int s0 = id - 1;
        std::vector<int> remote;
        for (int i = 0; i < D; ++i)
            if (i != s0) remote.push_back(i);
        const int m = static_cast<int>(remote.size());

        // full unconditioned covariance, conditioned on Z_G(s0) = 0 by the
        // partitioned-Gaussian formulas
        Eigen::MatrixXd K(m, m);
        Eigen::VectorXd k0(m);
        for (int i = 0; i < m; ++i) {
            k0(i) = p.sigma_z * p.sigma_z *
                    std::exp(-std::pow(sites.distance(remote[i], s0) / p.phi_z, p.nu_z));
            for (int j = 0; j < m; ++j) {
                double h = sites.distance(remote[i], remote[j]);
                K(i, j) = p.sigma_z * p.sigma_z *
                          (i == j ? 1.0 : std::exp(-std::pow(h / p.phi_z, p.nu_z)));
            }
        }
        double k00 = p.sigma_z * p.sigma_z;
        Eigen::MatrixXd Kc = K - (k0 * k0.transpose()) / k00;
        Eigen::VectorXd mean_c(m);
        for (int i = 0; i < m; ++i) mean_c(i) = p.mu_z + k0(i) / k00 * (0.0 - p.mu_z);

        Eigen::MatrixXd Rc(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                Rc(i, j) = Kc(i, j) / std::sqrt(Kc(i, i) * Kc(j, j));
        Eigen::MatrixXd Rinv = Rc.inverse();
        double logdet = std::log(Rc.determinant());

        for (int t = 0; t < laplace_field.n_times(); ++t) {
            if (!(Y(s0, t) > thr)) continue;
            double y0 = Y(s0, t);
            double logdens = 0.0;
            Eigen::VectorXd w(m);
            for (int i = 0; i < m; ++i) {
                double h = sites.distance(remote[i], s0);
                double a = y0 * alpha_fn(h, p);
                double b = 1.0 + (a > 0.0 ? std::pow(a, p.beta) : 0.0);
                double z = (Y(remote[i], t) - a) / b;

                double dl_mu = mean_c(i);
                double dl_sigma = std::sqrt(Kc(i, i) * var_ratio);
                logdens += oracle_dl_logpdf(z, dl_mu, dl_sigma, p.delta_dl) - std::log(b);

                double ti = (z - dl_mu) / dl_sigma;
                double tail = oracle_dl_tail(std::abs(ti), p.delta_dl);
                tail = std::max(tail, 1e-15);
                double q = oracle_norm_quantile(tail);
                w(i) = ti >= 0.0 ? -q : q;
            }
            double quad = w.dot((Rinv - Eigen::MatrixXd::Identity(m, m)) * w);
            logdens += -0.5 * logdet - 0.5 * quad;
            nll -= logdens;
        }
    }
    return nll;
}

} // namespace stx
