#include "stx/smooth_trend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace stx {

namespace {

std::vector<double> distinct_sorted(std::span<const double> x) {
    std::vector<double> u(x.begin(), x.end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}

} // namespace

SplineBasis build_basis(std::span<const double> x, BasisKind kind, int dim) {
    std::vector<double> u = distinct_sorted(x);
    const int m = dim;
    if (m < 3) throw BasisError("spline basis dimension must be >= 3");
    if (static_cast<std::size_t>(m) > u.size())
        throw BasisError("spline basis dimension " + std::to_string(m) +
                         " exceeds " + std::to_string(u.size()) + " distinct covariate values");

    SplineBasis b;
    b.kind = kind;
    b.dim = m;
    b.knots.resize(m);
    // knots at quantiles of the distinct covariate values
    for (int j = 0; j < m; ++j) {
        double pos = static_cast<double>(j) * static_cast<double>(u.size() - 1) /
                     static_cast<double>(m - 1);
        b.knots(j) = u[static_cast<std::size_t>(std::llround(pos))];
    }
    for (int j = 1; j < m; ++j)
        if (!(b.knots(j) > b.knots(j - 1)))
            throw BasisError("knot placement produced duplicate knots");

    Eigen::VectorXd h(m - 1);
    for (int i = 0; i + 1 < m; ++i) h(i) = b.knots(i + 1) - b.knots(i);

    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(m - 2, m);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m - 2, m - 2);
    for (int r = 0; r < m - 2; ++r) {
        int j = r + 1;  // interior knot index
        D(r, j - 1) = 1.0 / h(j - 1);
        D(r, j) = -1.0 / h(j - 1) - 1.0 / h(j);
        D(r, j + 1) = 1.0 / h(j);
        B(r, r) = (h(j - 1) + h(j)) / 3.0;
        if (r + 1 < m - 2) {
            B(r, r + 1) = h(j) / 6.0;
            B(r + 1, r) = h(j) / 6.0;
        }
    }
    b.curv_map = B.ldlt().solve(D);
    b.penalty = D.transpose() * b.curv_map;
    b.penalty = 0.5 * (b.penalty + b.penalty.transpose()).eval();

    b.design.resize(static_cast<int>(x.size()), m);
    for (std::size_t t = 0; t < x.size(); ++t)
        b.design.row(static_cast<int>(t)) = b.eval_row(x[t]).transpose();
    return b;
}

Eigen::VectorXd SplineBasis::eval_row(double x) const {
    const int m = dim;
    Eigen::VectorXd row = Eigen::VectorXd::Zero(m);
    auto curv_row = [&](int knot) -> Eigen::RowVectorXd {
        if (knot <= 0 || knot >= m - 1) return Eigen::RowVectorXd::Zero(m);
        return curv_map.row(knot - 1);
    };

    if (x <= knots(0)) {
        // natural boundary: linear extrapolation
        double h0 = knots(1) - knots(0);
        Eigen::RowVectorXd deriv = Eigen::RowVectorXd::Zero(m);
        deriv(0) = -1.0 / h0;
        deriv(1) = 1.0 / h0;
        deriv -= (h0 / 6.0) * curv_row(1);
        row(0) = 1.0;
        row += (x - knots(0)) * deriv.transpose();
        return row;
    }
    if (x >= knots(m - 1)) {
        double hl = knots(m - 1) - knots(m - 2);
        Eigen::RowVectorXd deriv = Eigen::RowVectorXd::Zero(m);
        deriv(m - 2) = -1.0 / hl;
        deriv(m - 1) = 1.0 / hl;
        deriv += (hl / 6.0) * curv_row(m - 2);
        row(m - 1) = 1.0;
        row += (x - knots(m - 1)) * deriv.transpose();
        return row;
    }

    int i = static_cast<int>(std::upper_bound(knots.data(), knots.data() + m, x) - knots.data()) - 1;
    i = std::clamp(i, 0, m - 2);
    double hi = knots(i + 1) - knots(i);
    double am = (knots(i + 1) - x) / hi;
    double ap = (x - knots(i)) / hi;
    double prod = (knots(i + 1) - x) * (x - knots(i)) / 6.0;
    row(i) += am;
    row(i + 1) += ap;
    Eigen::RowVectorXd curv = (1.0 + am) * curv_row(i) + (1.0 + ap) * curv_row(i + 1);
    row -= prod * curv.transpose();
    return row;
}

namespace {

// Orthonormal basis of the complement of the ones vector; absorbs the
// sum-to-zero identifiability constraint of a centered spline term.
Eigen::MatrixXd constraint_null(int m) {
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(m, 1);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(ones);
    Eigen::MatrixXd Q = qr.householderQ();
    return Q.rightCols(m - 1);
}

struct Term {
    Eigen::MatrixXd X;  // T x (dim-1), centered and constrained
    Eigen::MatrixXd S;  // (dim-1) x (dim-1)
};

Term make_term(const SplineBasis& b) {
    Eigen::MatrixXd Z = constraint_null(b.dim);
    Eigen::MatrixXd Xc = b.design;
    Eigen::RowVectorXd mean = Xc.colwise().mean();
    Xc.rowwise() -= mean;
    Term t;
    t.X = Xc * Z;
    t.S = Z.transpose() * b.penalty * Z;
    t.S = 0.5 * (t.S + t.S.transpose()).eval();
    return t;
}

struct GcvPick {
    double lambda1 = 1.0, lambda2 = 1.0;
    double score = std::numeric_limits<double>::infinity();
};

// Grid-search GCV for a penalized weighted least squares problem with two
// penalty blocks; A = X'WX and bw = X'Wz are precomputed by the caller.
GcvPick gcv_grid(const Eigen::MatrixXd& A, const Eigen::VectorXd& bw, const Eigen::MatrixXd& X,
                 const Eigen::VectorXd& z, const Eigen::VectorXd& w, const Eigen::MatrixXd& S1,
                 const Eigen::MatrixXd& S2, const LocationScaleConfig& cfg, double ridge_abs) {
    const int n = static_cast<int>(z.size());
    std::vector<double> grid(cfg.grid_points);
    double lstep = std::log(cfg.lambda_hi / cfg.lambda_lo) / (cfg.grid_points - 1);
    for (int i = 0; i < cfg.grid_points; ++i)
        grid[i] = cfg.lambda_lo * std::exp(lstep * i);

    GcvPick pick;
    Eigen::MatrixXd M(A.rows(), A.cols());
    for (double l1 : grid) {
        for (double l2 : grid) {
            M = A + l1 * S1 + l2 * S2;
            M.diagonal().array() += ridge_abs;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
            if (ldlt.info() != Eigen::Success) continue;
            Eigen::VectorXd beta = ldlt.solve(bw);
            double edf = ldlt.solve(A).trace();
            Eigen::VectorXd r = z - X * beta;
            double rss = (w.array() * r.array().square()).sum();
            double denom = static_cast<double>(n) - edf;
            if (denom < 1.0) continue;
            double gcv = static_cast<double>(n) * rss / (denom * denom);
            if (gcv < pick.score) {
                pick.score = gcv;
                pick.lambda1 = l1;
                pick.lambda2 = l2;
            }
        }
    }
    if (!std::isfinite(pick.score))
        throw FitFailure("smoothing-weight grid search found no admissible point");
    return pick;
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
    return X.transpose() * (w.asDiagonal() * X);
}

} // namespace

TermLayout build_layout(const SplineBasis& basis_gmt, const SplineBasis& basis_day) {
    Term tg = make_term(basis_gmt);
    Term td = make_term(basis_day);
    const int T = static_cast<int>(tg.X.rows());
    const int pg = static_cast<int>(tg.X.cols());
    const int pd = static_cast<int>(td.X.cols());
    TermLayout lay;
    lay.p = 1 + pg + pd;
    lay.X.resize(T, lay.p);
    lay.X.col(0).setOnes();
    lay.X.middleCols(1, pg) = tg.X;
    lay.X.middleCols(1 + pg, pd) = td.X;
    lay.S_gmt = Eigen::MatrixXd::Zero(lay.p, lay.p);
    lay.S_gmt.block(1, 1, pg, pg) = tg.S;
    lay.S_day = Eigen::MatrixXd::Zero(lay.p, lay.p);
    lay.S_day.block(1 + pg, 1 + pg, pd, pd) = td.S;
    return lay;
}

namespace {

double gaussian_pnll(const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                     const Eigen::VectorXd& d, const Eigen::VectorXd& beta,
                     const Eigen::VectorXd& gamma, const Eigen::MatrixXd& Sg,
                     const Eigen::MatrixXd& Sd, double lmg, double lmd, double lsg, double lsd,
                     double ridge_abs) {
    constexpr double half_log_2pi = 0.91893853320467274178;
    double nll = 0.0;
    for (int t = 0; t < y.size(); ++t) {
        double e = (y(t) - mu(t)) * std::exp(-d(t));
        nll += half_log_2pi + d(t) + 0.5 * e * e;
    }
    double pen = 0.5 * (lmg * beta.dot(Sg * beta) + lmd * beta.dot(Sd * beta) +
                        lsg * gamma.dot(Sg * gamma) + lsd * gamma.dot(Sd * gamma)) +
                 0.5 * ridge_abs * (beta.squaredNorm() + gamma.squaredNorm());
    return nll + pen;
}

// One Newton pass for the penalized log-scale model; returns converged flag.
bool newton_scale(const Eigen::MatrixXd& X, const Eigen::VectorXd& e2, Eigen::VectorXd& gamma,
                  const Eigen::MatrixXd& Spen, double ridge_abs, int max_iter = 40) {
    const int n = static_cast<int>(X.rows());
    auto objective = [&](const Eigen::VectorXd& g) {
        Eigen::VectorXd d = X * g;
        double f = 0.0;
        for (int t = 0; t < n; ++t) f += d(t) + 0.5 * e2(t) * std::exp(-2.0 * d(t));
        return f + 0.5 * g.dot(Spen * g) + 0.5 * ridge_abs * g.squaredNorm();
    };
    double f = objective(gamma);
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd d = X * gamma;
        Eigen::VectorXd w(n), gpt(n);
        for (int t = 0; t < n; ++t) {
            double q = e2(t) * std::exp(-2.0 * d(t));
            gpt(t) = 1.0 - q;
            w(t) = 2.0 * q;
        }
        Eigen::VectorXd grad = X.transpose() * gpt + Spen * gamma + ridge_abs * gamma;
        double gnorm = grad.norm();
        if (gnorm < 1e-10 * (std::abs(f) + 1.0)) return true;
        Eigen::MatrixXd H = weighted_gram(X, w) + Spen;
        H.diagonal().array() += ridge_abs + 1e-12;
        Eigen::VectorXd step = H.ldlt().solve(grad);
        double scale = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 30; ++ls) {
            Eigen::VectorXd cand = gamma - scale * step;
            double fc = objective(cand);
            if (fc < f) {
                gamma = cand;
                f = fc;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) return true;  // stalled at the current point
    }
    return false;
}

} // namespace

TrendFit fit_location_scale(std::span<const double> y_in, const SplineBasis& basis_gmt,
                            const SplineBasis& basis_day, const LocationScaleConfig& cfg) {
    const int n = static_cast<int>(y_in.size());
    if (n != basis_gmt.design.rows() || n != basis_day.design.rows())
        throw AlignmentError("fit_location_scale: series/basis length mismatch");
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) y(t) = y_in[t];

    TermLayout lay = build_layout(basis_gmt, basis_day);
    const int p = lay.p;
    const double ridge_abs = cfg.ridge * static_cast<double>(n);

    // --- smoothing weights for the mu model, sigma held at a constant pilot
    Eigen::VectorXd w1 = Eigen::VectorXd::Ones(n);
    Eigen::MatrixXd A = lay.X.transpose() * lay.X;
    Eigen::VectorXd b = lay.X.transpose() * y;
    GcvPick mu_pick = gcv_grid(A, b, lay.X, y, w1, lay.S_gmt, lay.S_day, cfg, ridge_abs);

    // the GCV grid calibrates the penalty against unit-weight residuals; the
    // weighted solves rescale it by the mean weight so the smoothing level is
    // invariant to the data scale
    Eigen::MatrixXd Smu = mu_pick.lambda1 * lay.S_gmt + mu_pick.lambda2 * lay.S_day;
    double mu_pen_scale = 1.0;
    auto solve_mu = [&](const Eigen::VectorXd& w) {
        mu_pen_scale = w.mean();
        Eigen::MatrixXd M = weighted_gram(lay.X, w) + mu_pen_scale * Smu;
        M.diagonal().array() += ridge_abs;
        return Eigen::VectorXd(M.ldlt().solve(lay.X.transpose() * (w.asDiagonal() * y)));
    };

    Eigen::VectorXd beta = solve_mu(w1);
    Eigen::VectorXd mu = lay.X * beta;

    // --- smoothing weights for the scale model via one IRLS working fit
    Eigen::VectorXd resid = y - mu;
    double sd0 = std::sqrt(resid.squaredNorm() / std::max(1, n - 1));
    if (!(sd0 > 0.0)) throw FitFailure("fit_location_scale: degenerate residual scale");
    {
        double d0 = std::log(sd0);
        Eigen::VectorXd hw(n), z(n);
        for (int t = 0; t < n; ++t) {
            double q = resid(t) * resid(t) * std::exp(-2.0 * d0);
            double h = std::max(2.0 * q, 1e-8);
            hw(t) = h;
            z(t) = d0 - (1.0 - q) / h;
        }
        Eigen::MatrixXd Ah = weighted_gram(lay.X, hw);
        Eigen::VectorXd bh = lay.X.transpose() * (hw.asDiagonal() * z);
        GcvPick sig_pick = gcv_grid(Ah, bh, lay.X, z, hw, lay.S_gmt, lay.S_day, cfg, ridge_abs);

        TrendFit fit;
        fit.knots_gmt = basis_gmt.knots;
        fit.knots_day = basis_day.knots;

        Eigen::MatrixXd Ssig = sig_pick.lambda1 * lay.S_gmt + sig_pick.lambda2 * lay.S_day;

        // --- alternate (mu | sigma) blocks with the weights frozen
        Eigen::VectorXd gamma = Eigen::VectorXd::Zero(p);
        gamma(0) = std::log(sd0);
        double prev = std::numeric_limits<double>::infinity();
        bool converged = false;
        int it = 0;
        for (; it < cfg.max_alternations; ++it) {
            Eigen::VectorXd e2 = (y - mu).array().square();
            newton_scale(lay.X, e2, gamma, Ssig, ridge_abs);
            Eigen::VectorXd d = lay.X * gamma;

            Eigen::VectorXd w = (-2.0 * d.array()).exp();
            beta = solve_mu(w);
            mu = lay.X * beta;

            double pnll = gaussian_pnll(y, mu, d, beta, gamma, lay.S_gmt, lay.S_day,
                                        mu_pen_scale * mu_pick.lambda1,
                                        mu_pen_scale * mu_pick.lambda2, sig_pick.lambda1,
                                        sig_pick.lambda2, ridge_abs);
            if (std::abs(prev - pnll) <= cfg.tol * (std::abs(pnll) + 1.0)) {
                prev = pnll;
                converged = true;
                break;
            }
            prev = pnll;
        }
        if (!std::isfinite(prev))
            throw FitFailure("fit_location_scale: alternation diverged");

        // one last scale pass so both blocks are stationary at exit
        Eigen::VectorXd e2 = (y - mu).array().square();
        newton_scale(lay.X, e2, gamma, Ssig, ridge_abs);
        Eigen::VectorXd d = lay.X * gamma;

        fit.lambda_mu_gmt = mu_pen_scale * mu_pick.lambda1;
        fit.lambda_mu_day = mu_pen_scale * mu_pick.lambda2;
        fit.lambda_sig_gmt = sig_pick.lambda1;
        fit.lambda_sig_day = sig_pick.lambda2;
        fit.coef_mu = beta;
        fit.coef_logsigma = gamma;
        fit.mu = mu;
        fit.log_sigma = d;
        fit.alternations = it + 1;
        fit.converged = converged;
        fit.penalized_nll = gaussian_pnll(y, mu, d, beta, gamma, lay.S_gmt, lay.S_day,
                                          fit.lambda_mu_gmt, fit.lambda_mu_day,
                                          fit.lambda_sig_gmt, fit.lambda_sig_day, ridge_abs);
        constexpr double half_log_2pi = 0.91893853320467274178;
        double nll = 0.0;
        for (int t = 0; t < n; ++t) {
            double e = (y(t) - mu(t)) * std::exp(-d(t));
            nll += half_log_2pi + d(t) + 0.5 * e * e;
        }
        fit.nll = nll;
        if (!fit.converged && cfg.max_alternations >= 20)
            throw FitFailure("fit_location_scale: no convergence in " +
                             std::to_string(cfg.max_alternations) + " alternations");
        return fit;
    }
}

Eigen::VectorXd trend_residuals(std::span<const double> y, const TrendFit& fit) {
    const int n = static_cast<int>(y.size());
    if (n != fit.mu.size())
        throw AlignmentError("trend_residuals: series length differs from fit");
    Eigen::VectorXd r(n);
    for (int t = 0; t < n; ++t) r(t) = (y[t] - fit.mu(t)) * std::exp(-fit.log_sigma(t));
    return r;
}

double penalized_nll_at(std::span<const double> y_in, const TrendFit& fit,
                        const SplineBasis& basis_gmt, const SplineBasis& basis_day,
                        const Eigen::VectorXd& coef_mu, const Eigen::VectorXd& coef_logsigma,
                        double ridge) {
    const int n = static_cast<int>(y_in.size());
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) y(t) = y_in[t];
    TermLayout lay = build_layout(basis_gmt, basis_day);
    Eigen::VectorXd mu = lay.X * coef_mu;
    Eigen::VectorXd d = lay.X * coef_logsigma;
    return gaussian_pnll(y, mu, d, coef_mu, coef_logsigma, lay.S_gmt, lay.S_day,
                         fit.lambda_mu_gmt, fit.lambda_mu_day, fit.lambda_sig_gmt,
                         fit.lambda_sig_day, ridge * static_cast<double>(n));
}

} // namespace stx
