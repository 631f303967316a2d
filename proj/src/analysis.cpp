#include "sis/analysis.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "json.hpp"

namespace sis {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Fixed work unit so that results never depend on the thread count: chunk
// boundaries are a function of n_paths alone, and all cross-chunk reduction
// happens sequentially in ascending chunk order after the join.
constexpr std::size_t kChunk = 64;

unsigned resolve_threads(unsigned threads) {
    if (threads != 0) return threads;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc ? hc : 1;
}

void for_each_chunk(std::size_t n_paths, unsigned threads,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
    const std::size_t n_chunks = (n_paths + kChunk - 1) / kChunk;
    const unsigned n_workers =
        unsigned(std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n_chunks, 1)));
    if (n_workers <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) {
            body(c, c * kChunk, std::min(n_paths, (c + 1) * kChunk));
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            try {
                body(c, c * kChunk, std::min(n_paths, (c + 1) * kChunk));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

std::size_t steps_for(double T, double dt) {
    const double ratio = T / dt;
    const auto n = std::llround(ratio);
    if (n < 1 || std::fabs(double(n) - ratio) > 1e-9 * std::max(1.0, ratio)) {
        throw std::invalid_argument("T must be an integer number of steps of size dt");
    }
    return std::size_t(n);
}

void check_common(const SISParams& p, double I0, double T, std::size_t n_paths) {
    p.validate();
    if (!(I0 > 0.0 && I0 < p.K)) {
        throw std::invalid_argument("I0 must be in the open interval (0,K)");
    }
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be > 0");
    if (n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
}

struct MeanCi {
    double mean;
    double half_width;
};

// Normal-approximation 95% interval of the sample mean.
MeanCi mean_ci(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    if (n == 0) return {kNaN, kNaN};
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / double(n);
    if (n == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / double(n - 1));
    return {mean, 1.959963984540054 * sd / std::sqrt(double(n))};
}

void put17(std::ostream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

}  // namespace

std::string_view reference_mode_name(ReferenceMode m) {
    return m == ReferenceMode::SelfFinest ? "self" : "gy";
}

std::optional<ReferenceMode> reference_mode_from_name(std::string_view name) {
    if (name == "self") return ReferenceMode::SelfFinest;
    if (name == "gy") return ReferenceMode::CrossScheme;
    return std::nullopt;
}

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) return {kNaN, kNaN};
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(x[i]) || !std::isfinite(y[i])) {
            return {kNaN, kNaN};
        }
        lx[i] = std::log2(x[i]);
        ly[i] = std::log2(y[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= double(lx.size());
    my /= double(ly.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    if (sxx == 0.0) return {kNaN, kNaN};
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

Wilson wilson_interval(std::uint64_t successes, std::uint64_t n, double z) {
    if (n == 0) return {0.0, 1.0};
    const double nn = double(n);
    const double phat = double(successes) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (phat + z2 / (2.0 * nn)) / denom;
    const double half =
        z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
    const double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
    const double hi = successes == n ? 1.0 : std::min(1.0, center + half);
    return {lo, hi};
}

ConvergenceReport strong_error(const SISParams& p, SchemeKind scheme, double I0, double T,
                               std::vector<double> step_sizes, std::size_t n_paths,
                               ReferenceMode mode, std::uint64_t master_seed,
                               const ConvergenceConfig& cfg) {
    check_common(p, I0, T, n_paths);
    if (n_paths < 100) throw std::invalid_argument("strong_error needs n_paths >= 100");
    if (!(cfg.q > 0.0)) throw std::invalid_argument("q must be > 0");
    if (step_sizes.empty()) throw std::invalid_argument("step_sizes must be non-empty");
    if (cfg.ref_refinement < 1 || !is_power_of_two(cfg.ref_refinement)) {
        throw std::invalid_argument("ref_refinement must be a power of two >= 1");
    }
    std::sort(step_sizes.begin(), step_sizes.end(), std::greater<double>());
    const double dt_min = step_sizes.back();
    for (double dt : step_sizes) {
        if (!(dt > 0.0)) throw std::invalid_argument("step sizes must be > 0");
        const double ratio = dt / dt_min;
        const auto m = std::llround(ratio);
        if (m < 1 || !is_power_of_two(std::uint64_t(m)) ||
            std::fabs(double(m) - ratio) > 1e-9 * ratio) {
            throw std::invalid_argument("step sizes must form a dyadic chain");
        }
    }
    const double dt_base =
        mode == ReferenceMode::SelfFinest ? dt_min / double(cfg.ref_refinement) : dt_min;
    const std::size_t n_base = steps_for(T, dt_base);
    const std::size_t n_levels = step_sizes.size();
    std::vector<std::size_t> factors(n_levels);
    for (std::size_t i = 0; i < n_levels; ++i) {
        factors[i] = std::size_t(std::llround(step_sizes[i] / dt_base));
        if (n_base % factors[i] != 0) {
            throw std::invalid_argument("step sizes must divide the reference grid");
        }
    }

    std::vector<std::vector<double>> sups(n_levels, std::vector<double>(n_paths, 0.0));
    std::vector<char> excluded(n_paths, 0);

    for_each_chunk(n_paths, cfg.threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t path = lo; path < hi; ++path) {
            const WienerGrid base =
                generate_wiener_grid(master_seed, std::uint32_t(path), n_base, dt_base);
            Trajectory ref;
            if (mode == ReferenceMode::SelfFinest) {
                ref = simulate(p, scheme, I0, base);
                if (ref.failed) {
                    excluded[path] = 1;
                    continue;
                }
            }
            for (std::size_t i = 0; i < n_levels; ++i) {
                const WienerGrid coarse = coarsen(base, factors[i]);
                const Trajectory traj = simulate(p, scheme, I0, coarse);
                Trajectory cross_ref;
                if (mode == ReferenceMode::CrossScheme) {
                    cross_ref = simulate(p, SchemeKind::GrayYang, I0, coarse);
                }
                if (traj.failed || (mode == ReferenceMode::CrossScheme && cross_ref.failed)) {
                    excluded[path] = 1;
                    break;
                }
                double sup = 0.0;
                for (std::size_t j = 0; j < traj.n_nodes(); ++j) {
                    const double ref_I = mode == ReferenceMode::SelfFinest
                                             ? ref.states_I[j * factors[i]]
                                             : cross_ref.states_I[j];
                    sup = std::max(sup, std::fabs(traj.states_I[j] - ref_I));
                }
                sups[i][path] = sup;
            }
        }
    });

    std::size_t n_excluded = 0;
    for (char e : excluded) n_excluded += std::size_t(e);
    if (n_excluded * 100 > n_paths) {
        throw EngineError("strong_error: more than 1% of paths failed (" +
                          std::to_string(n_excluded) + " of " + std::to_string(n_paths) + ")");
    }

    ConvergenceReport rep;
    rep.scheme = scheme;
    rep.step_sizes = step_sizes;
    rep.errors.resize(n_levels);
    rep.ci_half_widths.resize(n_levels);
    rep.n_paths = n_paths;
    rep.reference_mode = mode;
    rep.q = cfg.q;
    rep.master_seed = master_seed;
    rep.excluded_paths = n_excluded;
    for (std::size_t i = 0; i < n_levels; ++i) {
        std::vector<double> powered;
        powered.reserve(n_paths - n_excluded);
        for (std::size_t path = 0; path < n_paths; ++path) {
            if (excluded[path]) continue;
            powered.push_back(cfg.q == 1.0 ? sups[i][path] : std::pow(sups[i][path], cfg.q));
        }
        const MeanCi mc = mean_ci(powered);
        if (mc.mean <= 0.0) {
            rep.errors[i] = 0.0;
            rep.ci_half_widths[i] = 0.0;
        } else {
            rep.errors[i] = std::pow(mc.mean, 1.0 / cfg.q);
            // Delta method back through the q-th root.
            rep.ci_half_widths[i] =
                std::pow(mc.mean, 1.0 / cfg.q - 1.0) * mc.half_width / cfg.q;
        }
    }
    const LogLogFit fit = fit_loglog(rep.step_sizes, rep.errors);
    rep.fitted_order = fit.slope;
    rep.fitted_intercept = fit.intercept;
    return rep;
}

DifferenceReport scheme_difference(const SISParams& p, double I0, double T, double dt,
                                   std::size_t n_paths, std::uint64_t master_seed,
                                   unsigned threads, SchemeKind scheme_a,
                                   SchemeKind scheme_b) {
    check_common(p, I0, T, n_paths);
    const std::size_t n_steps = steps_for(T, dt);
    const std::size_t n_chunks = (n_paths + kChunk - 1) / kChunk;

    std::vector<double> sup_by_path(n_paths, kNaN);
    std::vector<char> excluded(n_paths, 0);
    std::vector<std::vector<double>> node_sums(n_chunks);

    for_each_chunk(n_paths, threads, [&](std::size_t c, std::size_t lo, std::size_t hi) {
        std::vector<double> local(n_steps + 1, 0.0);
        for (std::size_t path = lo; path < hi; ++path) {
            const WienerGrid grid =
                generate_wiener_grid(master_seed, std::uint32_t(path), n_steps, dt);
            const Trajectory a = simulate(p, scheme_a, I0, grid);
            const Trajectory b = simulate(p, scheme_b, I0, grid);
            if (a.failed || b.failed) {
                excluded[path] = 1;
                continue;
            }
            double sup = 0.0;
            for (std::size_t j = 0; j <= n_steps; ++j) {
                const double d = std::fabs(a.states_I[j] - b.states_I[j]);
                local[j] += d;
                sup = std::max(sup, d);
            }
            sup_by_path[path] = sup;
        }
        node_sums[c] = std::move(local);
    });

    std::size_t n_excluded = 0;
    for (char e : excluded) n_excluded += std::size_t(e);
    if (n_excluded * 100 > n_paths) {
        throw EngineError("scheme_difference: more than 1% of paths failed");
    }

    DifferenceReport rep;
    rep.scheme_a = scheme_a;
    rep.scheme_b = scheme_b;
    rep.dt = dt;
    rep.n_paths = n_paths;
    rep.excluded_paths = n_excluded;
    rep.master_seed = master_seed;
    rep.per_path_sup.reserve(n_paths - n_excluded);
    for (std::size_t path = 0; path < n_paths; ++path) {
        if (!excluded[path]) rep.per_path_sup.push_back(sup_by_path[path]);
    }
    const MeanCi mc = mean_ci(rep.per_path_sup);
    rep.mean_sup = mc.mean;
    rep.ci_half_width = mc.half_width;
    rep.mean_abs_diff.assign(n_steps + 1, 0.0);
    for (std::size_t c = 0; c < n_chunks; ++c) {
        for (std::size_t j = 0; j <= n_steps; ++j) rep.mean_abs_diff[j] += node_sums[c][j];
    }
    const double denom = double(n_paths - n_excluded);
    for (double& v : rep.mean_abs_diff) v /= denom;
    return rep;
}

StabilityReport stability_experiment(const SISParams& p, double I0, double T, double dt,
                                     std::size_t n_paths, std::uint64_t master_seed,
                                     unsigned threads, double tolerance) {
    check_common(p, I0, T, n_paths);
    const std::size_t n_steps = steps_for(T, dt);
    const ExtinctionCheck cond = extinction_conditions(p);
    const DerivedParams derived = reproduction_numbers(p);
    const double clamp_floor = 0x1p-52 * p.K;

    std::vector<double> exponents(n_paths, kNaN);
    std::vector<double> terminals(n_paths, kNaN);
    std::vector<char> failed(n_paths, 0);

    for_each_chunk(n_paths, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t path = lo; path < hi; ++path) {
            const WienerGrid grid =
                generate_wiener_grid(master_seed, std::uint32_t(path), n_steps, dt);
            const Trajectory traj = simulate(p, SchemeKind::SemiDiscrete, I0, grid);
            if (traj.failed) {
                failed[path] = 1;
                continue;
            }
            const double terminal = traj.states_I.back();
            terminals[path] = terminal;
            exponents[path] = std::log(terminal) / T;
        }
    });

    StabilityReport rep;
    rep.horizon = T;
    rep.dt = dt;
    rep.theoretical_bound = derived.extinction_exponent;
    rep.tolerance = tolerance;
    rep.applicable = cond.all_satisfied;
    rep.clamp_floor = clamp_floor;
    rep.n_paths = n_paths;
    rep.master_seed = master_seed;
    rep.clamped_paths = 0;
    rep.failed_paths = 0;
    std::size_t below = 0;
    for (std::size_t path = 0; path < n_paths; ++path) {
        if (failed[path]) {
            ++rep.failed_paths;
            continue;
        }
        rep.per_path_exponents.push_back(exponents[path]);
        rep.terminal_I.push_back(terminals[path]);
        if (terminals[path] <= clamp_floor) ++rep.clamped_paths;
        if (exponents[path] <= rep.theoretical_bound + tolerance) ++below;
    }
    rep.fraction_below_bound_plus_tol =
        rep.per_path_exponents.empty()
            ? kNaN
            : double(below) / double(rep.per_path_exponents.size());
    return rep;
}

MomentReport moment_check(const SISParams& p, double I0, double T, double dt,
                          std::size_t n_paths, const std::vector<double>& p_list,
                          std::uint64_t master_seed, unsigned threads) {
    if (p_list.empty()) throw std::invalid_argument("p_list must be non-empty");
    for (double ord : p_list) {
        if (!(ord > 0.0)) throw std::invalid_argument("moment orders must be > 0");
    }
    if (T == 0.0) {
        // Degenerate horizon: the statistic is the initial node itself and
        // matches the envelope identically.
        p.validate();
        if (!(I0 > 0.0 && I0 < p.K)) {
            throw std::invalid_argument("I0 must be in the open interval (0,K)");
        }
        MomentReport rep;
        rep.horizon = 0.0;
        rep.dt = dt;
        rep.n_paths = n_paths;
        rep.master_seed = master_seed;
        rep.failed_paths = 0;
        const double odds0 = to_odds(p.K, I0);
        for (double ord : p_list) {
            MomentRow row;
            row.p_order = ord;
            row.empirical_sup = std::pow(odds0, ord);
            row.proxy_sup = row.empirical_sup;
            row.scheme_bound = scheme_moment_bound(p, odds0, 0.0, ord);
            row.scheme_bound_overflow = !std::isfinite(row.scheme_bound);
            row.within_scheme_bound = row.empirical_sup <= row.scheme_bound;
            row.process_bound = odds_moment_bound(p, I0, 0.0, ord);
            row.process_bound_overflow = !std::isfinite(row.process_bound);
            row.within_process_bound = row.proxy_sup <= row.process_bound;
            rep.rows.push_back(row);
        }
        return rep;
    }
    check_common(p, I0, T, n_paths);
    const std::size_t n_steps = steps_for(T, dt);
    constexpr std::size_t kProxyRefine = 8;
    const std::size_t n_proxy = n_steps * kProxyRefine;
    const double dt_proxy = dt / double(kProxyRefine);
    const std::size_t n_orders = p_list.size();
    const std::size_t n_chunks = (n_paths + kChunk - 1) / kChunk;

    struct ChunkSums {
        std::vector<std::vector<double>> scheme;  // [order][node]
        std::vector<std::vector<double>> proxy;
        std::size_t included = 0;
    };
    std::vector<ChunkSums> chunk_sums(n_chunks);
    std::vector<char> failed(n_paths, 0);

    for_each_chunk(n_paths, threads, [&](std::size_t c, std::size_t lo, std::size_t hi) {
        ChunkSums sums;
        sums.scheme.assign(n_orders, std::vector<double>(n_steps + 1, 0.0));
        sums.proxy.assign(n_orders, std::vector<double>(n_proxy + 1, 0.0));
        for (std::size_t path = lo; path < hi; ++path) {
            const WienerGrid fine =
                generate_wiener_grid(master_seed, std::uint32_t(path), n_proxy, dt_proxy);
            const Trajectory proxy = simulate(p, SchemeKind::SemiDiscrete, I0, fine);
            const Trajectory traj =
                simulate(p, SchemeKind::SemiDiscrete, I0, coarsen(fine, kProxyRefine));
            if (proxy.failed || traj.failed) {
                failed[path] = 1;
                continue;
            }
            ++sums.included;
            for (std::size_t k = 0; k < n_orders; ++k) {
                const double ord = p_list[k];
                for (std::size_t j = 0; j <= n_steps; ++j) {
                    sums.scheme[k][j] += std::pow(traj.states_internal[j], ord);
                }
                for (std::size_t j = 0; j <= n_proxy; ++j) {
                    sums.proxy[k][j] += std::pow(proxy.states_internal[j], ord);
                }
            }
        }
        chunk_sums[c] = std::move(sums);
    });

    MomentReport rep;
    rep.horizon = T;
    rep.dt = dt;
    rep.n_paths = n_paths;
    rep.master_seed = master_seed;
    rep.failed_paths = 0;
    for (char f : failed) rep.failed_paths += std::size_t(f);
    std::size_t included = 0;
    for (const auto& cs : chunk_sums) included += cs.included;
    const double odds0 = to_odds(p.K, I0);

    for (std::size_t k = 0; k < n_orders; ++k) {
        std::vector<double> scheme_mean(n_steps + 1, 0.0);
        std::vector<double> proxy_mean(n_proxy + 1, 0.0);
        for (const auto& cs : chunk_sums) {
            for (std::size_t j = 0; j <= n_steps; ++j) scheme_mean[j] += cs.scheme[k][j];
            for (std::size_t j = 0; j <= n_proxy; ++j) proxy_mean[j] += cs.proxy[k][j];
        }
        MomentRow row;
        row.p_order = p_list[k];
        row.empirical_sup = 0.0;
        row.proxy_sup = 0.0;
        for (std::size_t j = 0; j <= n_steps; ++j) {
            row.empirical_sup = std::max(row.empirical_sup, scheme_mean[j] / double(included));
        }
        for (std::size_t j = 0; j <= n_proxy; ++j) {
            row.proxy_sup = std::max(row.proxy_sup, proxy_mean[j] / double(included));
        }
        row.scheme_bound = scheme_moment_bound(p, odds0, T, p_list[k]);
        row.scheme_bound_overflow = !std::isfinite(row.scheme_bound);
        row.within_scheme_bound = row.empirical_sup <= row.scheme_bound;
        row.process_bound = odds_moment_bound(p, I0, T, p_list[k]);
        row.process_bound_overflow = !std::isfinite(row.process_bound);
        row.within_process_bound = row.proxy_sup <= row.process_bound;
        rep.rows.push_back(row);
    }
    return rep;
}

std::vector<CensusRow> domain_violation_census(const SISParams& p, double I0, double T,
                                               const std::vector<double>& dt_list,
                                               std::size_t n_paths,
                                               std::uint64_t master_seed, unsigned threads) {
    check_common(p, I0, T, n_paths);
    if (dt_list.empty()) throw std::invalid_argument("dt_list must be non-empty");
    static constexpr SchemeKind kSchemes[] = {SchemeKind::EulerMaruyama, SchemeKind::GrayYang,
                                              SchemeKind::SemiDiscrete};
    std::vector<CensusRow> rows;
    for (double dt : dt_list) {
        const std::size_t n_steps = steps_for(T, dt);
        std::vector<std::array<char, 3>> violated(n_paths, {0, 0, 0});
        for_each_chunk(n_paths, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
            for (std::size_t path = lo; path < hi; ++path) {
                const WienerGrid grid =
                    generate_wiener_grid(master_seed, std::uint32_t(path), n_steps, dt);
                for (int s = 0; s < 3; ++s) {
                    const Trajectory traj = simulate(p, kSchemes[s], I0, grid);
                    bool bad = traj.domain_violations > 0;
                    if (!bad && traj.scheme != SchemeKind::EulerMaruyama) {
                        const std::size_t stop =
                            traj.failed ? traj.failure_index : traj.n_nodes();
                        for (std::size_t j = 0; j < stop && !bad; ++j) {
                            bad = !(traj.states_I[j] > 0.0 && traj.states_I[j] < p.K);
                        }
                    }
                    violated[path][std::size_t(s)] = char(bad);
                }
            }
        });
        for (int s = 0; s < 3; ++s) {
            CensusRow row;
            row.scheme = kSchemes[s];
            row.dt = dt;
            row.n_paths = n_paths;
            row.violating_paths = 0;
            for (std::size_t path = 0; path < n_paths; ++path) {
                row.violating_paths += std::uint64_t(violated[path][std::size_t(s)]);
            }
            row.fraction = double(row.violating_paths) / double(n_paths);
            row.wilson = wilson_interval(row.violating_paths, n_paths);
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<BenchRow> bench_error_vs_time(const SISParams& p, double I0, double T,
                                          const std::vector<double>& dt_list,
                                          std::size_t n_paths, std::uint64_t master_seed,
                                          double q, std::size_t ref_refinement) {
    static constexpr SchemeKind kSchemes[] = {SchemeKind::EulerMaruyama, SchemeKind::GrayYang,
                                              SchemeKind::SemiDiscrete};
    std::vector<BenchRow> rows;
    ConvergenceConfig cfg;
    cfg.q = q;
    cfg.ref_refinement = ref_refinement;
    cfg.threads = 1;
    for (SchemeKind scheme : kSchemes) {
        const ConvergenceReport rep = strong_error(p, scheme, I0, T, dt_list, n_paths,
                                                   ReferenceMode::SelfFinest, master_seed, cfg);
        for (std::size_t i = 0; i < rep.step_sizes.size(); ++i) {
            const double dt = rep.step_sizes[i];
            const std::size_t n_steps = steps_for(T, dt);
            // Timed pass: stepping loops only, grids prepared outside the
            // clock, best of three repetitions.
            auto best = std::chrono::steady_clock::duration::max();
            for (int rep_i = 0; rep_i < 3; ++rep_i) {
                std::chrono::steady_clock::duration elapsed{0};
                for (std::size_t path = 0; path < n_paths; ++path) {
                    const WienerGrid grid =
                        generate_wiener_grid(master_seed, std::uint32_t(path), n_steps, dt);
                    const auto t0 = std::chrono::steady_clock::now();
                    const Trajectory traj = simulate(p, scheme, I0, grid);
                    elapsed += std::chrono::steady_clock::now() - t0;
                    (void)traj;
                }
                best = std::min(best, elapsed);
            }
            BenchRow row;
            row.scheme = scheme;
            row.dt = dt;
            row.error = rep.errors[i];
            row.ci_half = rep.ci_half_widths[i];
            row.order_fit_slope = rep.fitted_order;
            row.order_fit_intercept = rep.fitted_intercept;
            row.n_paths = n_paths;
            row.seed = master_seed;
            row.wall_seconds = std::chrono::duration<double>(best).count();
            rows.push_back(row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV / JSON emission

void write_convergence_csv(const ConvergenceReport& r, std::ostream& os) {
    os << "scheme,dt,error,ci_half,order_fit_slope,order_fit_intercept,n_paths,seed\n";
    for (std::size_t i = 0; i < r.step_sizes.size(); ++i) {
        os << scheme_name(r.scheme) << ',';
        put17(os, r.step_sizes[i]);
        os << ',';
        put17(os, r.errors[i]);
        os << ',';
        put17(os, r.ci_half_widths[i]);
        os << ',';
        put17(os, r.fitted_order);
        os << ',';
        put17(os, r.fitted_intercept);
        os << ',' << r.n_paths << ',' << r.master_seed << '\n';
    }
}

void write_difference_csv(const DifferenceReport& r, std::ostream& os) {
    os << "path,sup_abs_diff\n";
    for (std::size_t i = 0; i < r.per_path_sup.size(); ++i) {
        os << i << ',';
        put17(os, r.per_path_sup[i]);
        os << '\n';
    }
}

void write_difference_trace_csv(const DifferenceReport& r, std::ostream& os) {
    os << "t,mean_abs_diff\n";
    for (std::size_t j = 0; j < r.mean_abs_diff.size(); ++j) {
        put17(os, r.dt * double(j));
        os << ',';
        put17(os, r.mean_abs_diff[j]);
        os << '\n';
    }
}

void write_stability_csv(const StabilityReport& r, std::ostream& os) {
    os << "path,exponent,terminal_I,at_clamp_floor\n";
    for (std::size_t i = 0; i < r.per_path_exponents.size(); ++i) {
        os << i << ',';
        put17(os, r.per_path_exponents[i]);
        os << ',';
        put17(os, r.terminal_I[i]);
        os << ',' << (r.terminal_I[i] <= r.clamp_floor ? 1 : 0) << '\n';
    }
}

void write_moments_csv(const MomentReport& r, std::ostream& os) {
    os << "p,empirical_sup,scheme_bound,scheme_bound_overflow,within_scheme_bound,"
          "proxy_sup,process_bound,process_bound_overflow,within_process_bound\n";
    for (const MomentRow& row : r.rows) {
        put17(os, row.p_order);
        os << ',';
        put17(os, row.empirical_sup);
        os << ',';
        put17(os, row.scheme_bound);
        os << ',' << int(row.scheme_bound_overflow) << ',' << int(row.within_scheme_bound)
           << ',';
        put17(os, row.proxy_sup);
        os << ',';
        put17(os, row.process_bound);
        os << ',' << int(row.process_bound_overflow) << ',' << int(row.within_process_bound)
           << '\n';
    }
}

void write_census_csv(const std::vector<CensusRow>& rows, std::ostream& os) {
    os << "scheme,dt,violating_paths,n_paths,fraction,wilson_lo,wilson_hi\n";
    for (const CensusRow& row : rows) {
        os << scheme_name(row.scheme) << ',';
        put17(os, row.dt);
        os << ',' << row.violating_paths << ',' << row.n_paths << ',';
        put17(os, row.fraction);
        os << ',';
        put17(os, row.wilson.lo);
        os << ',';
        put17(os, row.wilson.hi);
        os << '\n';
    }
}

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& os) {
    os << "scheme,dt,error,ci_half,order_fit_slope,order_fit_intercept,n_paths,seed,"
          "wall_seconds\n";
    for (const BenchRow& row : rows) {
        os << scheme_name(row.scheme) << ',';
        put17(os, row.dt);
        os << ',';
        put17(os, row.error);
        os << ',';
        put17(os, row.ci_half);
        os << ',';
        put17(os, row.order_fit_slope);
        os << ',';
        put17(os, row.order_fit_intercept);
        os << ',' << row.n_paths << ',' << row.seed << ',';
        put17(os, row.wall_seconds);
        os << '\n';
    }
}

namespace {

using ordered_json = nlohmann::ordered_json;

}  // namespace

std::string convergence_json(const ConvergenceReport& r) {
    ordered_json j;
    j["scheme"] = std::string(scheme_name(r.scheme));
    j["reference_mode"] = std::string(reference_mode_name(r.reference_mode));
    j["q"] = r.q;
    j["step_sizes"] = r.step_sizes;
    j["errors"] = r.errors;
    j["ci_half_widths"] = r.ci_half_widths;
    j["fitted_order"] = r.fitted_order;
    j["fitted_intercept"] = r.fitted_intercept;
    j["n_paths"] = r.n_paths;
    j["excluded_paths"] = r.excluded_paths;
    j["master_seed"] = r.master_seed;
    return j.dump(2) + "\n";
}

std::string difference_json(const DifferenceReport& r) {
    ordered_json j;
    j["scheme_a"] = std::string(scheme_name(r.scheme_a));
    j["scheme_b"] = std::string(scheme_name(r.scheme_b));
    j["dt"] = r.dt;
    j["mean_sup"] = r.mean_sup;
    j["ci_half_width"] = r.ci_half_width;
    j["per_path_sup"] = r.per_path_sup;
    j["mean_abs_diff"] = r.mean_abs_diff;
    j["n_paths"] = r.n_paths;
    j["excluded_paths"] = r.excluded_paths;
    j["master_seed"] = r.master_seed;
    return j.dump(2) + "\n";
}

std::string stability_json(const StabilityReport& r) {
    ordered_json j;
    j["horizon"] = r.horizon;
    j["dt"] = r.dt;
    j["theoretical_bound"] = r.theoretical_bound;
    j["tolerance"] = r.tolerance;
    j["applicable"] = r.applicable;
    j["fraction_below_bound_plus_tol"] = r.fraction_below_bound_plus_tol;
    j["per_path_exponents"] = r.per_path_exponents;
    j["terminal_I"] = r.terminal_I;
    j["clamped_paths"] = r.clamped_paths;
    j["failed_paths"] = r.failed_paths;
    j["n_paths"] = r.n_paths;
    j["master_seed"] = r.master_seed;
    return j.dump(2) + "\n";
}

std::string moments_json(const MomentReport& r) {
    ordered_json j;
    j["horizon"] = r.horizon;
    j["dt"] = r.dt;
    j["n_paths"] = r.n_paths;
    j["failed_paths"] = r.failed_paths;
    j["master_seed"] = r.master_seed;
    j["rows"] = ordered_json::array();
    for (const MomentRow& row : r.rows) {
        ordered_json o;
        o["p"] = row.p_order;
        o["empirical_sup"] = row.empirical_sup;
        o["scheme_bound"] = row.scheme_bound_overflow ? ordered_json("inf")
                                                      : ordered_json(row.scheme_bound);
        o["scheme_bound_overflow"] = row.scheme_bound_overflow;
        o["within_scheme_bound"] = row.within_scheme_bound;
        o["proxy_sup"] = row.proxy_sup;
        o["process_bound"] = row.process_bound_overflow ? ordered_json("inf")
                                                        : ordered_json(row.process_bound);
        o["process_bound_overflow"] = row.process_bound_overflow;
        o["within_process_bound"] = row.within_process_bound;
        j["rows"].push_back(o);
    }
    return j.dump(2) + "\n";
}

std::string census_json(const std::vector<CensusRow>& rows) {
    ordered_json j = ordered_json::array();
    for (const CensusRow& row : rows) {
        ordered_json o;
        o["scheme"] = std::string(scheme_name(row.scheme));
        o["dt"] = row.dt;
        o["violating_paths"] = row.violating_paths;
        o["n_paths"] = row.n_paths;
        o["fraction"] = row.fraction;
        o["wilson_lo"] = row.wilson.lo;
        o["wilson_hi"] = row.wilson.hi;
        j.push_back(o);
    }
    return j.dump(2) + "\n";
}

std::string bench_json(const std::vector<BenchRow>& rows) {
    ordered_json j = ordered_json::array();
    for (const BenchRow& row : rows) {
        ordered_json o;
        o["scheme"] = std::string(scheme_name(row.scheme));
        o["dt"] = row.dt;
        o["error"] = row.error;
        o["ci_half"] = row.ci_half;
        o["order_fit_slope"] = row.order_fit_slope;
        o["order_fit_intercept"] = row.order_fit_intercept;
        o["n_paths"] = row.n_paths;
        o["seed"] = row.seed;
        o["wall_seconds"] = row.wall_seconds;
        j.push_back(o);
    }
    return j.dump(2) + "\n";
}

}  // namespace sis
