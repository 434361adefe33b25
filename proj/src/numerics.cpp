#include "stx/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string_view>
#include <thread>

#include <boost/math/special_functions/erf.hpp>

#include "stx/errors.hpp"

namespace stx {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x2545f4914f6cdd1dULL)), seed0_(seed) {}

std::uint64_t Rng::bits() {
    // xorshift64* on a splitmix-initialized state
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545f4914f6cdd1dULL;
}

double Rng::uniform() {
    return static_cast<double>(bits() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() {
    double u = uniform();
    return u > 0.0 ? u : 0x1.0p-53;
}

double Rng::normal() {
    return norm_quantile(uniform_open());
}

double Rng::exponential() {
    return -std::log1p(-uniform());
}

std::size_t Rng::index(std::size_t n) {
    // multiply-shift; bias is negligible for n << 2^64
    return static_cast<std::size_t>((static_cast<unsigned __int128>(bits()) * n) >> 64);
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
    if (k >= n) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
    }
    // partial Fisher-Yates on an index array
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + index(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Rng Rng::fork(std::uint64_t stream) const {
    return Rng(splitmix64(seed0_ + 0x9e3779b97f4a7c15ULL * (stream + 1)));
}

double norm_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

double norm_sf(double x) {
    return 0.5 * std::erfc(x * 0.7071067811865475244);
}

double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("norm_quantile: p outside (0,1)");
    // erf_inv is accurate through the tails; quantile = sqrt(2) * erf_inv(2p - 1)
    if (p < 0.5) return -1.4142135623730950488 * boost::math::erfc_inv(2.0 * p);
    return 1.4142135623730950488 * boost::math::erfc_inv(2.0 * (1.0 - p));
}

std::vector<double> midranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average of 1-based ranks i+1..j+1
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
        i = j + 1;
    }
    return rank;
}

double quantile_sorted(std::span<const double> sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 0) throw DomainError("quantile_sorted: empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile_sorted: q outside [0,1]");
    double pos = q * static_cast<double>(n + 1);
    if (pos <= 1.0) return sorted.front();
    if (pos >= static_cast<double>(n)) return sorted.back();
    std::size_t k = static_cast<std::size_t>(pos);  // 1-based lower order stat
    double g = pos - static_cast<double>(k);
    return (1.0 - g) * sorted[k - 1] + g * sorted[k];
}

double sample_mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n < 2) return 0.0;
    double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(n - 1));
}

namespace {

SimplexResult nm_single(const std::function<double(const Eigen::VectorXd&)>& fn,
                        const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                        int max_evals, double f_tol) {
    const int n = static_cast<int>(x0.size());
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;

    std::vector<Eigen::VectorXd> pts(n + 1, x0);
    std::vector<double> f(n + 1);
    long evals = 0;
    for (int i = 1; i <= n; ++i) pts[i](i - 1) += step(i - 1);
    for (int i = 0; i <= n; ++i) {
        f[i] = fn(pts[i]);
        ++evals;
    }

    std::vector<int> ord(n + 1);
    bool converged = false;
    while (evals < max_evals) {
        std::iota(ord.begin(), ord.end(), 0);
        std::sort(ord.begin(), ord.end(), [&](int a, int b) { return f[a] < f[b]; });
        int best = ord[0], worst = ord[n], second = ord[n - 1];

        double spread = std::abs(f[worst] - f[best]);
        if (spread <= f_tol * (std::abs(f[best]) + f_tol)) {
            converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i <= n; ++i)
            if (i != worst) centroid += pts[i];
        centroid /= static_cast<double>(n);

        Eigen::VectorXd xr = centroid + alpha * (centroid - pts[worst]);
        double fr = fn(xr);
        ++evals;

        if (fr < f[best]) {
            Eigen::VectorXd xe = centroid + gamma * (centroid - pts[worst]);
            double fe = fn(xe);
            ++evals;
            if (fe < fr) {
                pts[worst] = xe;
                f[worst] = fe;
            } else {
                pts[worst] = xr;
                f[worst] = fr;
            }
        } else if (fr < f[second]) {
            pts[worst] = xr;
            f[worst] = fr;
        } else {
            Eigen::VectorXd xc = (fr < f[worst]) ? centroid + rho * (xr - centroid)
                                                 : centroid + rho * (pts[worst] - centroid);
            double fc = fn(xc);
            ++evals;
            if (fc < std::min(fr, f[worst])) {
                pts[worst] = xc;
                f[worst] = fc;
            } else {
                for (int i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    pts[i] = pts[best] + shrink * (pts[i] - pts[best]);
                    f[i] = fn(pts[i]);
                    ++evals;
                }
            }
        }
    }

    int best = static_cast<int>(std::min_element(f.begin(), f.end()) - f.begin());
    return SimplexResult{pts[best], f[best], evals, converged};
}

} // namespace

SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& fn,
                          const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                          const SimplexOptions& opt) {
    Rng rng(opt.seed);
    SimplexResult best = nm_single(fn, x0, step, opt.max_evals, opt.f_tol);
    long total = best.evals;
    for (int s = 1; s < opt.n_starts; ++s) {
        Eigen::VectorXd xs = best.x;
        for (int i = 0; i < xs.size(); ++i)
            xs(i) += opt.restart_scale * step(i) * rng.normal();
        SimplexResult r = nm_single(fn, xs, step, opt.max_evals, opt.f_tol);
        total += r.evals;
        if (r.f < best.f) best = r;
    }
    best.evals = total;
    return best;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, int n_threads) {
    if (n == 0) return;
    unsigned hw = std::thread::hardware_concurrency();
    std::size_t k = n_threads > 0 ? static_cast<std::size_t>(n_threads)
                                  : std::max(1u, hw);
    k = std::min(k, n);
    if (k <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::mutex err_mutex;
    std::exception_ptr first_error = nullptr;
    std::vector<std::thread> pool;
    pool.reserve(k);
    for (std::size_t t = 0; t < k; ++t) {
        std::size_t lo = n * t / k, hi = n * (t + 1) / k;
        pool.emplace_back([&, lo, hi]() {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace stx
