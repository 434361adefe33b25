#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace stx {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Deterministic random number generation.
//
// All sampling goes through inverse transforms of raw 64-bit draws so that a
// seed pins the output bit-for-bit, independently of the standard library's
// distribution implementations. fork() derives independent substreams, which
// keeps parallel workers reproducible regardless of scheduling.
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x);

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t bits();
    double uniform();       // [0, 1)
    double uniform_open();  // (0, 1)
    double normal();
    double exponential();   // rate 1
    std::size_t index(std::size_t n);  // uniform on {0, ..., n-1}

    // Sample k distinct indices from {0, ..., n-1}, ascending order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

    Rng fork(std::uint64_t stream) const;

private:
    std::uint64_t state_;
    std::uint64_t seed0_;
};

// ---------------------------------------------------------------------------
// Standard normal helpers.
// ---------------------------------------------------------------------------

double norm_pdf(double x);
double norm_cdf(double x);
double norm_sf(double x);          // upper tail
double norm_quantile(double p);    // p in (0, 1)

// ---------------------------------------------------------------------------
// Order statistics.
// ---------------------------------------------------------------------------

// 1-based ranks with ties sharing their average rank.
std::vector<double> midranks(std::span<const double> v);

// Quantile at plotting position q*(n+1), linearly interpolated between order
// statistics; input must be sorted ascending.
double quantile_sorted(std::span<const double> sorted, double q);

double sample_mean(std::span<const double> v);
double sample_sd(std::span<const double> v);  // denominator n-1

// ---------------------------------------------------------------------------
// Nelder-Mead simplex minimizer with seeded random restarts.
// ---------------------------------------------------------------------------

struct SimplexOptions {
    int max_evals = 4000;          // per start
    double f_tol = 1e-10;          // relative simplex spread
    int n_starts = 5;              // 1 initial + (n_starts-1) perturbed restarts
    double restart_scale = 0.5;    // perturbation, in units of `step`
    std::uint64_t seed = 0;
};

struct SimplexResult {
    Eigen::VectorXd x;
    double f = 0.0;
    long evals = 0;
    bool converged = false;
};

SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& fn,
                          const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                          const SimplexOptions& opt = {});

// ---------------------------------------------------------------------------
// Static-partition parallel loop. Results must be written to disjoint slots;
// with that discipline the output is identical for any thread count.
// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  int n_threads = 0);

// FNV-1a, used for config hashes in run manifests.
std::uint64_t fnv1a64(std::string_view s);

} // namespace stx
