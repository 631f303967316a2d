#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sis {

// Parameters of the stochastic SIS model for the infected count I in (0,K),
//
//   dI = (eta*I - (beta/K)*I^2) dt + sigma*(K - I)*I dW,   eta = beta - b - gamma,
//
// with S recovered as K - I.  sigma = 0 is allowed and gives the
// deterministic logistic equation.
struct SISParams {
    double beta;   // contact rate, 1/time
    double gamma;  // recovery rate, 1/time
    double b;      // birth rate, 1/time
    double K;      // population size
    double sigma;  // noise intensity, 1/(individuals*sqrt(time))

    double eta() const { return beta - b - gamma; }
    double sigma2K2() const { return sigma * sigma * K * K; }

    // Throws std::domain_error naming the offending field.
    void validate() const;
};

// Reproduction numbers and the pathwise extinction exponent.
struct DerivedParams {
    double eta;
    double r0_deterministic;     // beta / (b + gamma)
    double r0_stochastic;        // r0_deterministic - sigma^2 K^2 / (2(b + gamma))
    double extinction_exponent;  // eta - sigma^2 K^2 / 2
};

// The three parameter conditions under which the infection dies out
// exponentially fast with probability one.
struct ExtinctionCheck {
    bool r0s_below_one;
    bool sigma_sq_leq_beta_over_K2;
    bool sigma_sq_K2_leq_b_plus_gamma;
    bool all_satisfied;
};

// Counts inverse-transform outputs pulled back into the open interval.
struct ClampStats {
    std::uint64_t low = 0;
    std::uint64_t high = 0;
    std::uint64_t total() const { return low + high; }
};

// Thrown when a JSON document contains a key the schema does not allow.
struct UnknownKeyError : std::runtime_error {
    explicit UnknownKeyError(const std::string& k)
        : std::runtime_error("unknown key: " + k), key(k) {}
    std::string key;
};

// Drift A(x) = eta*x - (beta/K)*x^2 of the infected count.
double drift(const SISParams& p, double x);

// Diffusion B(x) = sigma*(K - x)*x; vanishes at both boundaries.
double diffusion(const SISParams& p, double x);

// Odds transform y = x/(K - x), a bijection (0,K) -> (0,inf).
double to_odds(double K, double x);

// Inverse odds transform K*y/(1 + y).  Outputs are clamped to
// [eps*K, (1-eps)*K] with eps = 2^-52 so that rounding can never land on a
// boundary; the exact input y = 0 maps to 0 unclamped.  Saturations are
// counted in stats when given.
double from_odds(double K, double y, ClampStats* stats = nullptr);

// Logit transform v = ln(x/(K - x)) and its inverse K*e^v/(1 + e^v),
// same clamping rules as the odds pair.
double to_logit(double K, double x);
double from_logit(double K, double v, ClampStats* stats = nullptr);

// Relative drift of the odds process: odds_drift(x) = x * odds_growth_rate(x),
//   phi(x) = eta - (b + gamma)*x + sigma^2 K^2 x / (1 + x).
double odds_growth_rate(const SISParams& p, double x);

// Drift of the odds process, eta*x - (b+gamma)*x^2 + sigma^2 K^2 x^2/(1+x).
double odds_drift(const SISParams& p, double x);

// Diffusion of the odds process, sigma*K*x.
double odds_diffusion(const SISParams& p, double x);

// Drift of the logit process,
//   eta - (b+gamma)e^v + sigma^2 K^2/2 - sigma^2 K^2/(1 + e^v).
// Satisfies logit_drift(ln y) = odds_growth_rate(y) - sigma^2 K^2 / 2.
double logit_drift(const SISParams& p, double v);

DerivedParams reproduction_numbers(const SISParams& p);

// K-scaled convention beta/(K(b+gamma)) for the deterministic reproduction
// number, used when the contact rate is read as a per-capita rate.  The
// primary r0_deterministic = beta/(b+gamma) is the form whose unit threshold
// is equivalent to extinction_exponent < 0; this accessor exposes the
// alternative convention without silently correcting either.
double r0_deterministic_k_scaled(const SISParams& p);

ExtinctionCheck extinction_conditions(const SISParams& p);

// Moment envelope of the semi-discrete iterates started from odds0:
//   odds0^p * exp{(eta + sigma^2 K^2/2)*T*p + p^2 sigma^2 K^2 T / 2}.
// Returns +infinity instead of overflowing.
double scheme_moment_bound(const SISParams& p, double odds0, double horizon, double order);

// Moment bound constant of the exact infected process,
//   (I0^-p v (K-I0)^-p) * exp{p(eta v 2*beta-eta v 2*beta/K)T + p(p+1) sigma^2 K^2 T/2}.
double process_moment_bound(const SISParams& p, double I0, double horizon, double order);

// Envelope K^p * sqrt(process_moment_bound(2p)) valid for both the p-th and
// the (-p)-th moment of the odds process.
double odds_moment_bound(const SISParams& p, double I0, double horizon, double order);

struct InitialCondition {
    SISParams params;
    double I0;
};

// Loads a parameter document with exactly the keys
// beta, gamma, b, K, sigma, I0 (all numbers).  Unknown keys raise
// UnknownKeyError naming the key; missing or invalid values raise
// std::invalid_argument / std::domain_error naming the key.
InitialCondition load_params_json(const std::string& text);
InitialCondition load_params_file(const std::string& path);

}  // namespace sis
