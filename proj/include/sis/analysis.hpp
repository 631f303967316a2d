#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "sis/schemes.hpp"

namespace sis {

// Raised when an experiment exceeds its failed-path budget.
struct EngineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ReferenceMode { SelfFinest, CrossScheme };

std::string_view reference_mode_name(ReferenceMode m);  // "self" / "gy"
std::optional<ReferenceMode> reference_mode_from_name(std::string_view name);

// Least-squares fit of log2(y) against log2(x).  NaN slope when fewer than
// two points or any y <= 0.
struct LogLogFit {
    double slope;
    double intercept;
};
LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

// 95% (by default) Wilson score interval for a binomial proportion.
struct Wilson {
    double lo;
    double hi;
};
Wilson wilson_interval(std::uint64_t successes, std::uint64_t n, double z = 1.959963984540054);

struct ConvergenceConfig {
    double q = 1.0;                  // error norm exponent, q > 0
    std::size_t ref_refinement = 8;  // SelfFinest reference is this factor below min(dt)
    unsigned threads = 1;            // 0 = hardware concurrency
};

struct ConvergenceReport {
    SchemeKind scheme;
    std::vector<double> step_sizes;      // descending
    std::vector<double> errors;          // E[sup_n |err|^q]^(1/q) per step size
    std::vector<double> ci_half_widths;  // 95% normal-approximation half widths
    double fitted_order;
    double fitted_intercept;
    std::size_t n_paths;
    ReferenceMode reference_mode;
    double q;
    std::uint64_t master_seed;
    std::size_t excluded_paths;
};

// Strong-error estimation over a dyadic chain of step sizes, every step
// size driven by the same Brownian path via coarsening.  SelfFinest
// compares against the same scheme on the `ref_refinement`-times finer
// grid; CrossScheme compares against Gray-Yang on the same coarse grid.
// Failed trajectories exclude the whole path; more than 1% exclusions
// raise EngineError.
ConvergenceReport strong_error(const SISParams& p, SchemeKind scheme, double I0, double T,
                               std::vector<double> step_sizes, std::size_t n_paths,
                               ReferenceMode mode, std::uint64_t master_seed,
                               const ConvergenceConfig& cfg = {});

struct DifferenceReport {
    SchemeKind scheme_a;
    SchemeKind scheme_b;
    double dt;
    std::vector<double> per_path_sup;   // sup_n |I_a - I_b| per path
    double mean_sup;
    double ci_half_width;
    std::vector<double> mean_abs_diff;  // per-node mean |I_a - I_b|
    std::size_t n_paths;
    std::size_t excluded_paths;
    std::uint64_t master_seed;
};

// Two schemes driven by identical Wiener grids; defaults compare the
// semi-discrete scheme against Gray-Yang.
DifferenceReport scheme_difference(const SISParams& p, double I0, double T, double dt,
                                   std::size_t n_paths, std::uint64_t master_seed,
                                   unsigned threads = 1,
                                   SchemeKind scheme_a = SchemeKind::SemiDiscrete,
                                   SchemeKind scheme_b = SchemeKind::GrayYang);

struct StabilityReport {
    double horizon;
    double dt;
    std::vector<double> per_path_exponents;  // ln(I_N) / T
    std::vector<double> terminal_I;
    double theoretical_bound;                // eta - sigma^2 K^2 / 2
    double tolerance;                        // absolute slack on the exponent
    double fraction_below_bound_plus_tol;
    bool applicable;                         // all extinction conditions hold
    double clamp_floor;                      // 2^-52 * K
    std::uint64_t clamped_paths;             // terminal value at the clamp floor
    std::size_t failed_paths;
    std::size_t n_paths;
    std::uint64_t master_seed;
};

// Long-horizon semi-discrete runs; per-path Lyapunov-exponent estimates
// against the theoretical extinction bound.  Produces a report flagged
// not-applicable (rather than failing) when the parameter conditions are
// not met.  The 0.05 default tolerance absorbs the sqrt(ln ln T / T)
// iterated-logarithm term at desk horizons.
StabilityReport stability_experiment(const SISParams& p, double I0, double T, double dt,
                                     std::size_t n_paths, std::uint64_t master_seed,
                                     unsigned threads = 1, double tolerance = 0.05);

struct MomentRow {
    double p_order;
    double empirical_sup;  // max over nodes of the sample mean of odds^p
    double scheme_bound;
    bool scheme_bound_overflow;
    bool within_scheme_bound;
    double proxy_sup;      // same statistic on the 8x finer proxy grid
    double process_bound;  // K^p sqrt(C_{2p}) envelope for the exact process
    bool process_bound_overflow;
    bool within_process_bound;
};

struct MomentReport {
    double horizon;
    double dt;
    std::size_t n_paths;
    std::size_t failed_paths;
    std::uint64_t master_seed;
    std::vector<MomentRow> rows;
};

// Empirical moments of the semi-discrete odds iterates against the
// theoretical envelopes, plus a finest-grid proxy for the exact process.
MomentReport moment_check(const SISParams& p, double I0, double T, double dt,
                          std::size_t n_paths, const std::vector<double>& p_list,
                          std::uint64_t master_seed, unsigned threads = 1);

struct CensusRow {
    SchemeKind scheme;
    double dt;
    std::uint64_t violating_paths;  // paths with at least one node outside (0,K)
    std::size_t n_paths;
    double fraction;
    Wilson wilson;
};

// Fraction of paths ever leaving (0,K) per step size, for all three
// schemes.  The transformed schemes are structural controls and report 0.
std::vector<CensusRow> domain_violation_census(const SISParams& p, double I0, double T,
                                               const std::vector<double>& dt_list,
                                               std::size_t n_paths,
                                               std::uint64_t master_seed,
                                               unsigned threads = 1);

struct BenchRow {
    SchemeKind scheme;
    double dt;
    double error;  // strong_error SelfFinest value, bit-identical to that report
    double ci_half;
    double order_fit_slope;
    double order_fit_intercept;
    std::size_t n_paths;
    std::uint64_t seed;
    double wall_seconds;  // stepping loops only, single-threaded
};

// Error versus CPU time per (scheme, dt).  Errors come from strong_error
// with a SelfFinest reference; the timed pass re-runs the stepping loops
// single-threaded, grid generation excluded from the clock, keeping the
// best of three repetitions.
std::vector<BenchRow> bench_error_vs_time(const SISParams& p, double I0, double T,
                                          const std::vector<double>& dt_list,
                                          std::size_t n_paths, std::uint64_t master_seed,
                                          double q = 1.0, std::size_t ref_refinement = 8);

// CSV emission, 17 significant digits, LF endings.
void write_convergence_csv(const ConvergenceReport& r, std::ostream& os);
void write_difference_csv(const DifferenceReport& r, std::ostream& os);
void write_difference_trace_csv(const DifferenceReport& r, std::ostream& os);
void write_stability_csv(const StabilityReport& r, std::ostream& os);
void write_moments_csv(const MomentReport& r, std::ostream& os);
void write_census_csv(const std::vector<CensusRow>& rows, std::ostream& os);
void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& os);

// JSON documents mirroring the report fields, serialized with stable key
// order so identical runs are byte identical.
std::string convergence_json(const ConvergenceReport& r);
std::string difference_json(const DifferenceReport& r);
std::string stability_json(const StabilityReport& r);
std::string moments_json(const MomentReport& r);
std::string census_json(const std::vector<CensusRow>& rows);
std::string bench_json(const std::vector<BenchRow>& rows);

}  // namespace sis
