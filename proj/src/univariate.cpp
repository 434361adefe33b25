#include "stx/univariate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

#include "stx/numerics.hpp"

namespace stx {

namespace {
constexpr double kPenalty = 1e12;
constexpr double kXiLo = -0.9;
constexpr double kXiHi = 1.0;
}

double gpd_cdf(double x, const GpdParams& p) {
    if (x < 0.0) throw DomainError("gpd_cdf: negative excess");
    if (p.sigma <= 0.0) throw DomainError("gpd_cdf: sigma must be positive");
    if (std::abs(p.xi) < kXiZeroEps) return -std::expm1(-x / p.sigma);
    double arg = 1.0 + p.xi * x / p.sigma;
    if (arg <= 0.0) return 1.0;  // beyond the upper endpoint for xi < 0
    return 1.0 - std::pow(arg, -1.0 / p.xi);
}

double gpd_quantile(double prob, const GpdParams& p) {
    if (!(prob >= 0.0 && prob < 1.0)) throw DomainError("gpd_quantile: p outside [0,1)");
    if (p.sigma <= 0.0) throw DomainError("gpd_quantile: sigma must be positive");
    if (std::abs(p.xi) < kXiZeroEps) return -p.sigma * std::log1p(-prob);
    return p.sigma / p.xi * (std::pow(1.0 - prob, -p.xi) - 1.0);
}

double gpd_logpdf(double x, const GpdParams& p) {
    if (x < 0.0) throw DomainError("gpd_logpdf: negative excess");
    if (std::abs(p.xi) < kXiZeroEps) return -std::log(p.sigma) - x / p.sigma;
    double arg = 1.0 + p.xi * x / p.sigma;
    if (arg <= 0.0) return -std::numeric_limits<double>::infinity();
    return -std::log(p.sigma) - (1.0 + 1.0 / p.xi) * std::log(arg);
}

std::string trend_name(TrendType t) {
    switch (t) {
        case TrendType::none: return "none";
        case TrendType::linear: return "linear";
        case TrendType::seasonal: return "seasonal";
        case TrendType::both: return "both";
    }
    return "none";
}

TrendType trend_from_name(const std::string& s) {
    if (s == "none") return TrendType::none;
    if (s == "linear") return TrendType::linear;
    if (s == "seasonal") return TrendType::seasonal;
    if (s == "both") return TrendType::both;
    throw ConfigError("unknown trend '" + s + "'");
}

int trend_dim(TrendType t) {
    switch (t) {
        case TrendType::none: return 1;
        case TrendType::linear: return 2;
        case TrendType::seasonal: return 3;
        case TrendType::both: return 4;
    }
    return 1;
}

namespace {

// Design row for log sigma_u(z): intercept, optionally gmt, optionally the
// first harmonic pair of the day index.
void fill_trend_row(TrendType trend, double gmt, int day, int season_length, double* row) {
    row[0] = 1.0;
    int k = 1;
    if (trend == TrendType::linear || trend == TrendType::both) row[k++] = gmt;
    if (trend == TrendType::seasonal || trend == TrendType::both) {
        double w = 2.0 * M_PI * static_cast<double>(day) / static_cast<double>(season_length);
        row[k++] = std::cos(w);
        row[k++] = std::sin(w);
    }
}

// NLL of excesses x_t with log sigma_t = W_t beta and common shape xi.
double ns_gpd_nll(const Eigen::MatrixXd& W, const Eigen::VectorXd& x, const Eigen::VectorXd& beta,
                  double xi) {
    if (xi <= kXiLo || xi >= kXiHi) return kPenalty * (1.0 + std::abs(xi));
    Eigen::VectorXd eta = W * beta;
    double nll = 0.0;
    const bool exp_branch = std::abs(xi) < kXiZeroEps;
    for (int t = 0; t < x.size(); ++t) {
        double e = eta(t);
        if (e > 50.0 || e < -50.0) return kPenalty;
        double s = std::exp(e);
        if (exp_branch) {
            nll += e + x(t) / s;
        } else {
            double arg = 1.0 + xi * x(t) / s;
            if (arg <= 0.0) return kPenalty;
            nll += e + (1.0 + 1.0 / xi) * std::log(arg);
        }
    }
    return std::isfinite(nll) ? nll : kPenalty;
}

// Probability-weighted moment style starting values.
GpdParams moment_start(const Eigen::VectorXd& x) {
    double m = x.mean();
    double v = (x.array() - m).square().sum() / std::max<double>(1.0, x.size() - 1);
    if (v <= 0.0) v = m * m + 1e-12;
    double r = m * m / v;
    GpdParams p;
    p.xi = std::clamp(0.5 * (1.0 - r), -0.5, 0.5);
    p.sigma = std::max(1e-8, 0.5 * m * (1.0 + r));
    return p;
}

struct NsOptResult {
    Eigen::VectorXd beta;
    double xi;
    double nll;
    bool converged;
};

NsOptResult optimize_ns_gpd(const Eigen::MatrixXd& W, const Eigen::VectorXd& x,
                            std::uint64_t seed) {
    const int p = static_cast<int>(W.cols());
    GpdParams start = moment_start(x);

    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(p + 1);
    x0(0) = std::log(start.sigma);
    x0(p) = start.xi;
    Eigen::VectorXd step = Eigen::VectorXd::Constant(p + 1, 0.1);
    step(0) = 0.3;
    step(p) = 0.1;

    auto fn = [&](const Eigen::VectorXd& th) {
        return ns_gpd_nll(W, x, th.head(p), th(p));
    };

    SimplexOptions opt;
    opt.n_starts = 5;
    opt.max_evals = 2000 * (p + 1);
    opt.f_tol = 1e-12;
    opt.seed = seed;
    SimplexResult r = nelder_mead(fn, x0, step, opt);
    if (!std::isfinite(r.f) || r.f >= kPenalty)
        throw FitFailure("GPD optimizer did not reach a finite likelihood");
    return NsOptResult{r.x.head(p), r.x(p), r.f, r.converged};
}

} // namespace

GpdFit fit_gpd(std::span<const double> excesses, std::uint64_t seed) {
    const std::size_t n = excesses.size();
    if (n < kMinExceedances)
        throw InsufficientExceedances("fit_gpd: need at least " +
                                      std::to_string(kMinExceedances) + " excesses, got " +
                                      std::to_string(n));
    Eigen::VectorXd x(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(excesses[i] > 0.0)) throw DomainError("fit_gpd: excesses must be positive");
        x(static_cast<int>(i)) = excesses[i];
    }
    if (x.maxCoeff() == x.minCoeff())
        throw DegenerateSample("fit_gpd: all excesses equal");

    Eigen::MatrixXd W = Eigen::MatrixXd::Ones(x.size(), 1);
    NsOptResult r = optimize_ns_gpd(W, x, seed);
    GpdFit fit;
    fit.params.sigma = std::exp(r.beta(0));
    fit.params.xi = r.xi;
    fit.nll = r.nll;
    fit.n = n;
    return fit;
}

double NsGpdFit::log_sigma_at(double gmt, int day, int season_length) const {
    double row[4];
    fill_trend_row(trend, gmt, day, season_length, row);
    double e = 0.0;
    for (int k = 0; k < trend_dim(trend); ++k) e += row[k] * beta_sigma(k);
    return e;
}

NsGpdFit fit_gpd_ns(std::span<const double> residuals, const CovariateTable& cov,
                    double threshold_value, double threshold_q, TrendType trend,
                    std::uint64_t seed) {
    const std::size_t n = residuals.size();
    if (n != static_cast<std::size_t>(cov.size()))
        throw AlignmentError("fit_gpd_ns: residual/covariate length mismatch");

    std::vector<int> exceed_idx;
    for (std::size_t t = 0; t < n; ++t)
        if (residuals[t] > threshold_value) exceed_idx.push_back(static_cast<int>(t));
    if (exceed_idx.size() < kMinExceedances)
        throw InsufficientExceedances("fit_gpd_ns: " + std::to_string(exceed_idx.size()) +
                                      " exceedances of threshold, need " +
                                      std::to_string(kMinExceedances));

    const int p = trend_dim(trend);
    Eigen::MatrixXd W(exceed_idx.size(), p);
    Eigen::VectorXd x(exceed_idx.size());
    double row[4];
    for (std::size_t i = 0; i < exceed_idx.size(); ++i) {
        int t = exceed_idx[i];
        fill_trend_row(trend, cov.gmt(t), cov.day_index[t], cov.season_length, row);
        for (int k = 0; k < p; ++k) W(static_cast<int>(i), k) = row[k];
        x(static_cast<int>(i)) = residuals[t] - threshold_value;
    }

    NsOptResult r = optimize_ns_gpd(W, x, seed);
    NsGpdFit fit;
    fit.threshold_q = threshold_q;
    fit.threshold_value = threshold_value;
    fit.trend = trend;
    fit.beta_sigma = r.beta;
    fit.xi = r.xi;
    fit.nll = r.nll;
    fit.n_exceed = exceed_idx.size();
    return fit;
}

TrendSelection select_trend_lrt(std::span<const double> residuals, const CovariateTable& cov,
                                double threshold_value, double threshold_q, double level,
                                std::uint64_t seed) {
    NsGpdFit f_none = fit_gpd_ns(residuals, cov, threshold_value, threshold_q, TrendType::none, seed);
    NsGpdFit f_lin = fit_gpd_ns(residuals, cov, threshold_value, threshold_q, TrendType::linear, seed);
    NsGpdFit f_sea = fit_gpd_ns(residuals, cov, threshold_value, threshold_q, TrendType::seasonal, seed);
    NsGpdFit f_both = fit_gpd_ns(residuals, cov, threshold_value, threshold_q, TrendType::both, seed);

    auto crit = [&](int df) {
        return boost::math::quantile(boost::math::chi_squared(df), 1.0 - level);
    };

    TrendSelection sel;
    sel.dev_linear = 2.0 * (f_none.nll - f_lin.nll);
    sel.dev_seasonal = 2.0 * (f_none.nll - f_sea.nll);
    sel.dev_both = 2.0 * (f_none.nll - f_both.nll);

    bool lin_ok = sel.dev_linear > crit(1);
    bool sea_ok = sel.dev_seasonal > crit(2);

    if (!lin_ok && !sea_ok) {
        sel.chosen = TrendType::none;
        sel.fit = f_none;
        return sel;
    }
    // winner of the accepted single-trend models, then test "both" against it
    bool winner_linear = lin_ok && (!sea_ok || f_lin.nll <= f_sea.nll);
    const NsGpdFit& winner = winner_linear ? f_lin : f_sea;
    int df_extra = 4 - trend_dim(winner.trend);
    double dev_up = 2.0 * (winner.nll - f_both.nll);
    if (dev_up > crit(df_extra)) {
        sel.chosen = TrendType::both;
        sel.fit = f_both;
    } else {
        sel.chosen = winner.trend;
        sel.fit = winner;
    }
    return sel;
}

PitResult semiparametric_pit(std::span<const double> residuals, const NsGpdFit& fit,
                             const CovariateTable& cov) {
    const std::size_t n = residuals.size();
    if (n != static_cast<std::size_t>(cov.size()))
        throw AlignmentError("semiparametric_pit: residual/covariate length mismatch");

    std::vector<double> rank = midranks(residuals);
    const double q = fit.threshold_q;
    const double u = fit.threshold_value;
    const double denom = static_cast<double>(n + 1);
    const double top = 1.0 - 1e-10;

    PitResult out;
    out.u.resize(static_cast<int>(n));
    for (std::size_t t = 0; t < n; ++t) {
        double r = residuals[t];
        double v;
        if (r <= u) {
            v = rank[t] / denom;
        } else {
            double e = fit.log_sigma_at(cov.gmt(static_cast<int>(t)), cov.day_index[t],
                                        cov.season_length);
            double sigma = std::exp(e);
            double tail;
            if (std::abs(fit.xi) < kXiZeroEps) {
                tail = std::exp(-(r - u) / sigma);
            } else {
                double arg = 1.0 + fit.xi * (r - u) / sigma;
                if (arg <= 0.0) {
                    // value beyond the fitted finite upper endpoint
                    out.u(static_cast<int>(t)) = top;
                    ++out.n_clamped;
                    continue;
                }
                tail = std::pow(arg, -1.0 / fit.xi);
            }
            v = 1.0 - (1.0 - q) * tail;
        }
        if (v >= top) {
            v = top;
            ++out.n_clamped;
        }
        if (v <= 0.0) v = 1e-12;
        out.u(static_cast<int>(t)) = v;
    }
    return out;
}

double to_laplace(double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("to_laplace: u outside (0,1)");
    if (u <= 0.5) return std::log(2.0 * u);
    return -std::log(2.0 * (1.0 - u));
}

double from_laplace(double x) {
    if (x <= 0.0) return 0.5 * std::exp(x);
    return 1.0 - 0.5 * std::exp(-x);
}

Eigen::VectorXd to_laplace(const Eigen::VectorXd& u) {
    Eigen::VectorXd out(u.size());
    for (int i = 0; i < u.size(); ++i) out(i) = to_laplace(u(i));
    return out;
}

Eigen::VectorXd from_laplace(const Eigen::VectorXd& x) {
    Eigen::VectorXd out(x.size());
    for (int i = 0; i < x.size(); ++i) out(i) = from_laplace(x(i));
    return out;
}

std::vector<double> EqdConfig::grid() const {
    if (!candidate_grid.empty()) return candidate_grid;
    std::vector<double> g;
    for (int i = 0; i <= 18; ++i) g.push_back(0.50 + 0.025 * i);
    return g;
}

ThresholdChoice select_threshold_eqd(std::span<const double> series, const EqdConfig& cfg) {
    std::vector<double> sorted(series.begin(), series.end());
    std::sort(sorted.begin(), sorted.end());
    const std::vector<double> grid = EqdConfig(cfg).grid();

    std::vector<double> probs;
    for (int j = 1; j <= cfg.n_prob; ++j)
        probs.push_back(cfg.prob_hi * static_cast<double>(j) /
                        static_cast<double>(cfg.n_prob + 1));

    Rng base(cfg.seed);
    ThresholdChoice choice;
    double best = std::numeric_limits<double>::infinity();
    bool any = false;

    for (std::size_t ci = 0; ci < grid.size(); ++ci) {
        double q = grid[ci];
        double u = quantile_sorted(sorted, q);
        std::vector<double> exc;
        for (double r : series)
            if (r > u) exc.push_back(r - u);
        if (exc.size() < kMinExceedances) continue;

        GpdFit fit;
        try {
            fit = fit_gpd(exc, splitmix64(cfg.seed + 17 * ci));
        } catch (const FitError&) {
            continue;  // candidate excluded
        }

        // expected quantile discrepancy: average over bootstrap resamples of
        // the excesses of the mean |empirical - fitted| quantile gap
        Rng rng = base.fork(ci);
        const std::size_t m = exc.size();
        std::vector<double> boot(m);
        double disc = 0.0;
        for (int b = 0; b < cfg.n_boot; ++b) {
            for (std::size_t i = 0; i < m; ++i) boot[i] = exc[rng.index(m)];
            std::sort(boot.begin(), boot.end());
            double d = 0.0;
            for (double pj : probs)
                d += std::abs(quantile_sorted(boot, pj) - gpd_quantile(pj, fit.params));
            disc += d / static_cast<double>(probs.size());
        }
        disc /= static_cast<double>(cfg.n_boot);

        choice.eqd_curve.emplace_back(q, disc);
        if (disc < best) {
            best = disc;
            choice.q_star = q;
            any = true;
        }
    }
    if (!any)
        throw SelectionFailure("select_threshold_eqd: no candidate threshold admitted a GPD fit");
    return choice;
}

} // namespace stx
