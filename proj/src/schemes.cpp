#include "sis/schemes.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace sis {

std::string_view scheme_name(SchemeKind k) {
    switch (k) {
        case SchemeKind::EulerMaruyama: return "em";
        case SchemeKind::GrayYang: return "gy";
        case SchemeKind::SemiDiscrete: return "sd";
    }
    return "?";
}

std::optional<SchemeKind> scheme_from_name(std::string_view name) {
    if (name == "em") return SchemeKind::EulerMaruyama;
    if (name == "gy") return SchemeKind::GrayYang;
    if (name == "sd") return SchemeKind::SemiDiscrete;
    return std::nullopt;
}

double em_step(const SISParams& p, double I, double dt, double dW) {
    return I + drift(p, I) * dt + diffusion(p, I) * dW;
}

double gray_yang_step(const SISParams& p, double X, double dt, double dW) {
    return X + logit_drift(p, X) * dt + p.sigma * p.K * dW;
}

double semi_discrete_step(const SISParams& p, double Xh, double dt, double dW) {
    const double e = (odds_growth_rate(p, Xh) - 0.5 * p.sigma2K2()) * dt + p.sigma * p.K * dW;
    if (!(std::fabs(e) <= 700.0)) return std::numeric_limits<double>::quiet_NaN();
    return Xh * std::exp(e);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void fill_sentinel(Trajectory& t, std::size_t from, std::size_t n_nodes, bool has_internal) {
    t.failed = true;
    t.failure_index = from;
    for (std::size_t j = from; j < n_nodes; ++j) {
        t.states_I[j] = kNaN;
        if (has_internal) t.states_internal[j] = kNaN;
    }
}

}  // namespace

Trajectory simulate(const SISParams& p, SchemeKind scheme, double I0, const WienerGrid& grid) {
    p.validate();
    if (!(I0 > 0.0 && I0 < p.K)) {
        throw std::domain_error("I0 must be in the open interval (0,K)");
    }
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt;

    Trajectory t;
    t.scheme = scheme;
    t.dt = dt;
    t.times.resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) t.times[j] = dt * double(j);
    t.states_I.resize(n + 1);

    if (scheme == SchemeKind::EulerMaruyama) {
        double I = I0;
        t.states_I[0] = I;
        for (std::size_t i = 0; i < n; ++i) {
            I = em_step(p, I, dt, grid.increments[i]);
            if (!std::isfinite(I)) {
                fill_sentinel(t, i + 1, n + 1, false);
                return t;
            }
            t.states_I[i + 1] = I;
            if (!(I > 0.0 && I < p.K)) ++t.domain_violations;
        }
        return t;
    }

    t.states_internal.resize(n + 1);
    const bool logit_space = scheme == SchemeKind::GrayYang;
    double x = logit_space ? to_logit(p.K, I0) : to_odds(p.K, I0);
    t.states_internal[0] = x;
    t.states_I[0] = logit_space ? from_logit(p.K, x, &t.clamps) : from_odds(p.K, x, &t.clamps);
    for (std::size_t i = 0; i < n; ++i) {
        x = logit_space ? gray_yang_step(p, x, dt, grid.increments[i])
                        : semi_discrete_step(p, x, dt, grid.increments[i]);
        // An odds state multiplied down to exactly zero has lost the
        // positivity the recursion relies on; treat like a non-finite state.
        if (!std::isfinite(x) || (!logit_space && x == 0.0)) {
            fill_sentinel(t, i + 1, n + 1, true);
            return t;
        }
        t.states_internal[i + 1] = x;
        t.states_I[i + 1] =
            logit_space ? from_logit(p.K, x, &t.clamps) : from_odds(p.K, x, &t.clamps);
    }
    return t;
}

void write_trajectory_csv(const Trajectory& t, std::ostream& os) {
    os << "t,I,internal,scheme\n";
    const std::string_view name = scheme_name(t.scheme);
    char tb[32], ib[32], xb[32];
    const bool has_internal = !t.states_internal.empty();
    for (std::size_t j = 0; j < t.n_nodes(); ++j) {
        std::snprintf(tb, sizeof tb, "%.17g", t.times[j]);
        std::snprintf(ib, sizeof ib, "%.17g", t.states_I[j]);
        os << tb << ',' << ib << ',';
        if (has_internal) {
            std::snprintf(xb, sizeof xb, "%.17g", t.states_internal[j]);
            os << xb;
        }
        os << ',' << name << '\n';
    }
}

}  // namespace sis
