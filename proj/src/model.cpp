#include "sis/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace sis {

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw std::domain_error(std::string(name) + " must be finite");
    }
}

[[noreturn]] void fail_field(const char* name, const char* constraint, double got) {
    std::ostringstream os;
    os << name << " must be " << constraint << " (got " << got << ")";
    throw std::domain_error(os.str());
}

constexpr double kBoundaryEps = 0x1p-52;  // == numeric_limits<double>::epsilon()

double clamp_open(double K, double x, ClampStats* stats) {
    const double lo = kBoundaryEps * K;
    const double hi = (1.0 - kBoundaryEps) * K;
    if (x < lo) {
        if (stats) ++stats->low;
        return lo;
    }
    if (x > hi) {
        if (stats) ++stats->high;
        return hi;
    }
    return x;
}

}  // namespace

void SISParams::validate() const {
    require_finite(beta, "beta");
    require_finite(gamma, "gamma");
    require_finite(b, "b");
    require_finite(K, "K");
    require_finite(sigma, "sigma");
    if (!(beta > 0.0)) fail_field("beta", "> 0", beta);
    if (!(gamma > 0.0)) fail_field("gamma", "> 0", gamma);
    if (!(b >= 0.0)) fail_field("b", ">= 0", b);
    if (!(K > 0.0)) fail_field("K", "> 0", K);
    if (!(sigma >= 0.0)) fail_field("sigma", ">= 0", sigma);
}

double drift(const SISParams& p, double x) {
    require_finite(x, "x");
    return p.eta() * x - (p.beta / p.K) * x * x;
}

double diffusion(const SISParams& p, double x) {
    require_finite(x, "x");
    return p.sigma * (p.K - x) * x;
}

double to_odds(double K, double x) {
    if (!std::isfinite(x) || !(x > 0.0 && x < K)) {
        fail_field("x", "in (0,K)", x);
    }
    return x / (K - x);
}

double from_odds(double K, double y, ClampStats* stats) {
    if (!std::isfinite(y) || y < 0.0) fail_field("y", ">= 0 and finite", y);
    if (y == 0.0) return 0.0;
    return clamp_open(K, K * (y / (1.0 + y)), stats);
}

double to_logit(double K, double x) {
    return std::log(to_odds(K, x));
}

double from_logit(double K, double v, ClampStats* stats) {
    require_finite(v, "v");
    // Evaluate the logistic function on the non-overflowing side.
    const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                              : std::exp(v) / (1.0 + std::exp(v));
    return clamp_open(K, K * s, stats);
}

double odds_growth_rate(const SISParams& p, double x) {
    if (!std::isfinite(x) || x < 0.0) fail_field("x", ">= 0", x);
    return p.eta() - (p.b + p.gamma) * x + p.sigma2K2() * x / (1.0 + x);
}

double odds_drift(const SISParams& p, double x) {
    if (!std::isfinite(x) || x < 0.0) fail_field("x", ">= 0", x);
    return p.eta() * x - (p.b + p.gamma) * x * x + p.sigma2K2() * x * x / (1.0 + x);
}

double odds_diffusion(const SISParams& p, double x) {
    if (!std::isfinite(x) || x < 0.0) fail_field("x", ">= 0", x);
    return p.sigma * p.K * x;
}

double logit_drift(const SISParams& p, double v) {
    require_finite(v, "v");
    const double ev = std::exp(v);
    return p.eta() - (p.b + p.gamma) * ev + 0.5 * p.sigma2K2() -
           p.sigma2K2() / (1.0 + ev);
}

DerivedParams reproduction_numbers(const SISParams& p) {
    p.validate();
    DerivedParams d;
    d.eta = p.eta();
    d.r0_deterministic = p.beta / (p.b + p.gamma);
    d.r0_stochastic = d.r0_deterministic - p.sigma2K2() / (2.0 * (p.b + p.gamma));
    d.extinction_exponent = d.eta - 0.5 * p.sigma2K2();
    return d;
}

double r0_deterministic_k_scaled(const SISParams& p) {
    p.validate();
    return p.beta / (p.K * (p.b + p.gamma));
}

ExtinctionCheck extinction_conditions(const SISParams& p) {
    const DerivedParams d = reproduction_numbers(p);
    ExtinctionCheck c;
    c.r0s_below_one = d.r0_stochastic < 1.0;
    c.sigma_sq_leq_beta_over_K2 = p.sigma * p.sigma <= p.beta / (p.K * p.K);
    c.sigma_sq_K2_leq_b_plus_gamma = p.sigma2K2() <= p.b + p.gamma;
    c.all_satisfied =
        c.r0s_below_one && c.sigma_sq_leq_beta_over_K2 && c.sigma_sq_K2_leq_b_plus_gamma;
    return c;
}

namespace {

// exp() computed through the log of the bound; exponents past the double
// range come back as +infinity rather than raising FE_OVERFLOW surprises.
double exp_or_inf(double log_value) {
    if (log_value > 709.0) return std::numeric_limits<double>::infinity();
    return std::exp(log_value);
}

}  // namespace

double scheme_moment_bound(const SISParams& p, double odds0, double horizon, double order) {
    p.validate();
    if (!(order > 0.0)) fail_field("order", "> 0", order);
    if (!(horizon >= 0.0)) fail_field("horizon", ">= 0", horizon);
    if (!(odds0 > 0.0)) fail_field("odds0", "> 0", odds0);
    if (horizon == 0.0) return std::pow(odds0, order);
    const double log_bound = order * std::log(odds0) +
                             (p.eta() + 0.5 * p.sigma2K2()) * horizon * order +
                             0.5 * order * order * p.sigma2K2() * horizon;
    return exp_or_inf(log_bound);
}

double process_moment_bound(const SISParams& p, double I0, double horizon, double order) {
    p.validate();
    if (!(order > 0.0)) fail_field("order", "> 0", order);
    if (!(horizon >= 0.0)) fail_field("horizon", ">= 0", horizon);
    if (!(I0 > 0.0 && I0 < p.K)) fail_field("I0", "in (0,K)", I0);
    const double lead = std::max(-order * std::log(I0), -order * std::log(p.K - I0));
    const double rate =
        std::max({p.eta(), 2.0 * p.beta - p.eta(), 2.0 * p.beta / p.K});
    const double log_bound =
        lead + order * rate * horizon + 0.5 * order * (order + 1.0) * p.sigma2K2() * horizon;
    return exp_or_inf(log_bound);
}

double odds_moment_bound(const SISParams& p, double I0, double horizon, double order) {
    p.validate();
    if (!(order > 0.0)) fail_field("order", "> 0", order);
    // K^p * sqrt(C_{2p}); carried out in logs to postpone overflow.
    const double lead =
        std::max(-2.0 * order * std::log(I0), -2.0 * order * std::log(p.K - I0));
    const double rate =
        std::max({p.eta(), 2.0 * p.beta - p.eta(), 2.0 * p.beta / p.K});
    const double log_c2p = lead + 2.0 * order * rate * horizon +
                           0.5 * (2.0 * order) * (2.0 * order + 1.0) * p.sigma2K2() * horizon;
    return exp_or_inf(order * std::log(p.K) + 0.5 * log_c2p);
}

namespace {

double number_field(const nlohmann::json& doc, const char* key) {
    if (!doc.contains(key)) {
        throw std::invalid_argument(std::string("missing key: ") + key);
    }
    const auto& v = doc.at(key);
    if (!v.is_number()) {
        throw std::invalid_argument(std::string(key) + " must be a number");
    }
    return v.get<double>();
}

}  // namespace

InitialCondition load_params_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("parameter JSON: ") + e.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("parameter JSON must be an object");
    static const char* allowed[] = {"beta", "gamma", "b", "K", "sigma", "I0"};
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) known = known || it.key() == k;
        if (!known) throw UnknownKeyError(it.key());
    }
    InitialCondition ic;
    ic.params.beta = number_field(doc, "beta");
    ic.params.gamma = number_field(doc, "gamma");
    ic.params.b = number_field(doc, "b");
    ic.params.K = number_field(doc, "K");
    ic.params.sigma = number_field(doc, "sigma");
    ic.I0 = number_field(doc, "I0");
    ic.params.validate();
    if (!(ic.I0 > 0.0 && ic.I0 < ic.params.K)) {
        fail_field("I0", "in the open interval (0,K)", ic.I0);
    }
    return ic;
}

InitialCondition load_params_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open parameter file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_params_json(buf.str());
}

}  // namespace sis
