#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <limits>

#include "sis/model.hpp"
#include "sis/noise.hpp"

using namespace sis;

namespace {

const SISParams kStar{0.5, 0.2, 0.05, 1.0, 0.1};    // eta = 0.25
const SISParams kDagger{0.25, 0.2, 0.05, 1.0, 0.1};  // eta = 0

double uniform(SplitMix64& g, double lo, double hi) {
    return lo + (hi - lo) * (double(g.next() >> 11) * 0x1p-53);
}

// ulp distance via the ordered integer representation of doubles.
std::uint64_t ulps_between(double a, double b) {
    auto key = [](double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, sizeof u);
        return (u & 0x8000000000000000ULL) ? ~u : (u | 0x8000000000000000ULL);
    };
    const std::uint64_t ka = key(a), kb = key(b);
    return ka > kb ? ka - kb : kb - ka;
}

double rel_err(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-300});
    return std::fabs(a - b) / scale;
}

}  // namespace

TEST_CASE("parameter validation names the offending field") {
    SISParams p = kStar;
    CHECK_NOTHROW(p.validate());
    p.beta = 0.0;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("beta"), std::domain_error);
    p = kStar;
    p.sigma = -0.1;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("sigma"), std::domain_error);
    p = kStar;
    p.K = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(p.validate(), std::domain_error);
    p = kStar;
    p.sigma = 0.0;  // deterministic limit is allowed
    CHECK_NOTHROW(p.validate());
}

TEST_CASE("drift matches the quadratic and vanishes at the boundaries") {
    SISParams p{0.5, 0.2, 0.05, 1.0, 0.0};
    CHECK(drift(p, 0.0) == 0.0);
    // At x = K the quadratic collapses to -(b+gamma)K.
    CHECK(drift(p, 1.0) == doctest::Approx(-0.25).epsilon(1e-15));
    // Logistic equilibrium x = eta*K/beta = 0.5: the two terms cancel exactly.
    CHECK(drift(p, 0.5) == 0.0);
    CHECK_THROWS_AS(drift(p, std::numeric_limits<double>::quiet_NaN()), std::domain_error);
}

TEST_CASE("diffusion vanishes at both boundaries") {
    CHECK(diffusion(kStar, 0.0) == 0.0);
    CHECK(diffusion(kStar, 1.0) == 0.0);
    CHECK(diffusion(kStar, 0.5) == doctest::Approx(0.025).epsilon(1e-15));
    CHECK_THROWS_AS(diffusion(kStar, std::numeric_limits<double>::infinity()),
                    std::domain_error);
}

TEST_CASE("odds transform: examples and round trip") {
    CHECK(to_odds(100.0, 50.0) == 1.0);
    CHECK(to_odds(1.0, 0.75) == 3.0);
    CHECK_THROWS_AS(to_odds(1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(to_odds(1.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(to_odds(1.0, -0.1), std::domain_error);

    SplitMix64 g{2024};
    for (int i = 0; i < 2000; ++i) {
        const double K = uniform(g, 0.1, 100.0);
        const double x = uniform(g, 1e-6, 1.0 - 1e-6) * K;
        const double back = from_odds(K, to_odds(K, x));
        CHECK(ulps_between(back, x) <= 4);
    }
}

TEST_CASE("inverse odds: boundary inputs and clamping") {
    CHECK(from_odds(100.0, 1.0) == 50.0);
    CHECK(from_odds(1.0, 0.0) == 0.0);  // exact boundary input stays exact

    ClampStats stats;
    const double near_one = from_odds(1.0, 1e12, &stats);
    CHECK(near_one < 1.0);
    CHECK(stats.total() == 0);

    // Large enough odds round to K and must saturate at (1-eps)K instead.
    const double clamped = from_odds(1.0, 1e17, &stats);
    CHECK(clamped == 1.0 - 0x1p-52);
    CHECK(stats.high == 1);

    const double floor = from_odds(1.0, 1e-300, &stats);
    CHECK(floor == 0x1p-52);
    CHECK(stats.low == 1);

    CHECK_THROWS_AS(from_odds(1.0, -1.0), std::domain_error);
    CHECK_THROWS_AS(from_odds(1.0, std::numeric_limits<double>::infinity()),
                    std::domain_error);
}

TEST_CASE("logit transform: examples and round trip") {
    CHECK(to_logit(100.0, 50.0) == 0.0);
    CHECK(to_logit(1.0, 0.75) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
    CHECK(from_logit(1.0, 0.0) == 0.5);

    SplitMix64 g{77};
    for (int i = 0; i < 2000; ++i) {
        const double K = uniform(g, 0.5, 10.0);
        const double x = uniform(g, 1e-4, 1.0 - 1e-4) * K;
        CHECK(ulps_between(from_logit(K, to_logit(K, x)), x) <= 4);
    }

    ClampStats stats;
    CHECK(from_logit(1.0, -800.0, &stats) == 0x1p-52);
    CHECK(stats.low == 1);
    CHECK(from_logit(1.0, 800.0, &stats) == 1.0 - 0x1p-52);
    CHECK(stats.high == 1);
    CHECK_THROWS_AS(from_logit(1.0, std::numeric_limits<double>::quiet_NaN()),
                    std::domain_error);
}

TEST_CASE("odds growth rate: value at 0 and at 1") {
    CHECK(odds_growth_rate(kStar, 0.0) == kStar.eta());
    // eta - (b+gamma) + sigma^2 K^2 / 2 = 0.25 - 0.25 + 0.005
    CHECK(odds_growth_rate(kStar, 1.0) == doctest::Approx(0.005).epsilon(1e-12));
    CHECK_THROWS_AS(odds_growth_rate(kStar, -0.5), std::domain_error);
}

TEST_CASE("odds drift factors as x * phi(x)") {
    CHECK(odds_drift(kStar, 0.0) == 0.0);
    CHECK(odds_diffusion(kStar, 0.0) == 0.0);
    CHECK(odds_diffusion(kStar, 2.0) == doctest::Approx(0.2).epsilon(1e-15));
    SplitMix64 g{5};
    for (int i = 0; i < 1000; ++i) {
        const double x = uniform(g, 1e-9, 10.0);
        CHECK(rel_err(odds_drift(kStar, x), x * odds_growth_rate(kStar, x)) <= 1e-12);
    }
}

TEST_CASE("diffusion-operator identity for the odds transform") {
    // A V' + B^2 V''/2 must equal the odds drift evaluated at V(x), with
    // V' = K/(K-x)^2 and V'' = 2K/(K-x)^3 in closed form.
    SplitMix64 g{31};
    const SISParams sets[] = {kStar, kDagger, {1.2, 0.4, 0.1, 3.0, 0.2}};
    for (const SISParams& p : sets) {
        for (int i = 0; i < 1000; ++i) {
            const double x = uniform(g, 0.01 * p.K, 0.99 * p.K);
            const double d = p.K - x;
            const double lhs = drift(p, x) * (p.K / (d * d)) +
                               0.5 * diffusion(p, x) * diffusion(p, x) * (2.0 * p.K / (d * d * d));
            const double rhs = odds_drift(p, to_odds(p.K, x));
            CHECK(rel_err(lhs, rhs) <= 1e-10);
        }
    }
}

TEST_CASE("logit drift: noise-free reduction and exact value at 0") {
    SISParams p0 = kStar;
    p0.sigma = 0.0;
    SplitMix64 g{8};
    for (int i = 0; i < 200; ++i) {
        const double v = uniform(g, -5.0, 5.0);
        CHECK(logit_drift(p0, v) ==
              doctest::Approx(p0.eta() - (p0.b + p0.gamma) * std::exp(v)).epsilon(1e-14));
    }
    // 0.25 - 0.25 + 0.005 - 0.005 at P*; the two noise halves cancel exactly.
    CHECK(logit_drift(kStar, 0.0) == 0.0);
}

TEST_CASE("logit and odds drifts agree through v = ln y") {
    SplitMix64 g{99};
    for (int i = 0; i < 1000; ++i) {
        const double y = std::exp(uniform(g, -7.0, 7.0));
        const double lhs = logit_drift(kStar, std::log(y));
        const double rhs = odds_growth_rate(kStar, y) - 0.5 * kStar.sigma2K2();
        CHECK(rel_err(lhs, rhs) <= 1e-10);
    }
}

TEST_CASE("reproduction numbers: worked values and the sigma = 0 limit") {
    const DerivedParams d = reproduction_numbers(kDagger);
    CHECK(d.eta == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(d.r0_deterministic == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.r0_stochastic == doctest::Approx(0.98).epsilon(1e-12));
    CHECK(d.extinction_exponent == doctest::Approx(-0.005).epsilon(1e-12));

    SISParams p0 = kStar;
    p0.sigma = 0.0;
    const DerivedParams d0 = reproduction_numbers(p0);
    CHECK(d0.r0_stochastic == d0.r0_deterministic);

    const DerivedParams ds = reproduction_numbers(kStar);
    CHECK(ds.r0_stochastic < ds.r0_deterministic);

    CHECK(r0_deterministic_k_scaled(kStar) ==
          doctest::Approx(0.5 / (1.0 * 0.25)).epsilon(1e-12));
    SISParams pk = kStar;
    pk.K = 4.0;
    CHECK(r0_deterministic_k_scaled(pk) ==
          doctest::Approx(reproduction_numbers(pk).r0_deterministic / 4.0).epsilon(1e-12));
}

TEST_CASE("threshold sign equivalence: R0s < 1 iff the exponent is negative") {
    SplitMix64 g{1234};
    for (int i = 0; i < 10000; ++i) {
        SISParams p;
        p.beta = uniform(g, 0.01, 4.0);
        p.gamma = uniform(g, 0.01, 2.0);
        p.b = uniform(g, 0.0, 1.0);
        p.K = uniform(g, 0.2, 50.0);
        p.sigma = uniform(g, 0.0, 0.5);
        const DerivedParams d = reproduction_numbers(p);
        CHECK((d.r0_stochastic < 1.0) == (d.extinction_exponent < 0.0));
    }
}

TEST_CASE("extinction conditions: worked example and boundary equality") {
    const ExtinctionCheck c = extinction_conditions(kDagger);
    CHECK(c.r0s_below_one);
    CHECK(c.sigma_sq_leq_beta_over_K2);   // 0.01 <= 0.25
    CHECK(c.sigma_sq_K2_leq_b_plus_gamma);  // 0.01 <= 0.25
    CHECK(c.all_satisfied);

    // sigma = 0 with beta < b + gamma: every condition holds.
    SISParams quiet{0.2, 0.2, 0.05, 1.0, 0.0};
    CHECK(extinction_conditions(quiet).all_satisfied);

    // Non-strict boundary: sigma^2 exactly beta/K^2.
    SISParams edge{0.25, 0.2, 0.05, 1.0, 0.5};  // sigma^2 = 0.25 = beta/K^2
    CHECK(extinction_conditions(edge).sigma_sq_leq_beta_over_K2);

    // Conjunction flag mirrors the three parts.
    const ExtinctionCheck cs = extinction_conditions(kStar);
    CHECK(cs.all_satisfied ==
          (cs.r0s_below_one && cs.sigma_sq_leq_beta_over_K2 && cs.sigma_sq_K2_leq_b_plus_gamma));
    CHECK_FALSE(cs.all_satisfied);  // R0s = 1.98 at P*
}

TEST_CASE("scheme moment envelope: worked values and overflow policy") {
    // eta = 0.25, sigma K = 0.1: exp(2*0.255 + 4*0.01/2) = exp(0.53).
    CHECK(scheme_moment_bound(kStar, 1.0, 1.0, 2.0) ==
          doctest::Approx(std::exp(0.53)).epsilon(1e-12));
    CHECK(scheme_moment_bound(kStar, 1.0, 0.0, 5.0) == 1.0);
    CHECK(scheme_moment_bound(kStar, 0.7, 0.0, 2.0) == std::pow(0.7, 2.0));
    // p -> 0+ sends the whole exponent to zero.
    CHECK(scheme_moment_bound(kStar, 1.0, 1.0, 1e-12) == doctest::Approx(1.0).epsilon(1e-9));
    // Monotone in T and p.
    CHECK(scheme_moment_bound(kStar, 1.0, 2.0, 2.0) > scheme_moment_bound(kStar, 1.0, 1.0, 2.0));
    CHECK(scheme_moment_bound(kStar, 1.0, 1.0, 4.0) > scheme_moment_bound(kStar, 1.0, 1.0, 2.0));
    // Overflow reports infinity, not a crash.
    const double huge = scheme_moment_bound(kStar, 1.0, 1e6, 64.0);
    CHECK(std::isinf(huge));
    CHECK_THROWS_AS(scheme_moment_bound(kStar, 1.0, 1.0, 0.0), std::domain_error);
}

TEST_CASE("process moment bound: worked value 2e and monotonicity") {
    // p=1, eta=0.3, beta=0.5, K=1, sigma=0, T=1, I0=0.5:
    // max(2,2) * exp(max(0.3, 0.7, 1.0)) = 2e.
    SISParams p{0.5, 0.15, 0.05, 1.0, 0.0};  // eta = 0.30
    CHECK(p.eta() == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(process_moment_bound(p, 0.5, 1.0, 1.0) ==
          doctest::Approx(2.0 * std::exp(1.0)).epsilon(1e-12));
    // T=0, I0=K/2, K=2: max(1,1) = 1.
    SISParams p2 = p;
    p2.K = 2.0;
    CHECK(process_moment_bound(p2, 1.0, 0.0, 1.0) == 1.0);
    CHECK(process_moment_bound(p, 0.5, 2.0, 1.0) > process_moment_bound(p, 0.5, 1.0, 1.0));
    CHECK(process_moment_bound(p, 0.5, 1.0, 3.0) > process_moment_bound(p, 0.5, 1.0, 1.0));
}

TEST_CASE("odds moment bound is K^p sqrt(C_2p)") {
    SplitMix64 g{4242};
    for (int i = 0; i < 200; ++i) {
        SISParams p;
        p.beta = uniform(g, 0.05, 2.0);
        p.gamma = uniform(g, 0.05, 1.0);
        p.b = uniform(g, 0.0, 0.5);
        p.K = uniform(g, 0.5, 5.0);
        p.sigma = uniform(g, 0.0, 0.3);
        const double I0 = uniform(g, 0.1, 0.9) * p.K;
        const double T = uniform(g, 0.1, 2.0);
        const double ord = uniform(g, 0.5, 3.0);
        const double expected =
            std::pow(p.K, ord) * std::sqrt(process_moment_bound(p, I0, T, 2.0 * ord));
        const double got = odds_moment_bound(p, I0, T, ord);
        if (std::isfinite(expected)) CHECK(rel_err(got, expected) <= 1e-10);
    }
}

TEST_CASE("parameter JSON: exact key set, diagnostics name the key") {
    const std::string good =
        R"({"beta":0.5,"gamma":0.2,"b":0.05,"K":1,"sigma":0.1,"I0":0.5})";
    const InitialCondition ic = load_params_json(good);
    CHECK(ic.params.beta == 0.5);
    CHECK(ic.I0 == 0.5);

    CHECK_THROWS_WITH_AS(
        load_params_json(
            R"({"beta":0.5,"gamma":0.2,"b":0.05,"K":1,"sigma":0.1,"I0":0.5,"mu":3})"),
        doctest::Contains("mu"), UnknownKeyError);

    CHECK_THROWS_WITH_AS(
        load_params_json(R"({"beta":0.5,"gamma":0.2,"b":0.05,"K":1,"sigma":0.1})"),
        doctest::Contains("I0"), std::invalid_argument);

    CHECK_THROWS_WITH_AS(
        load_params_json(
            R"({"beta":"x","gamma":0.2,"b":0.05,"K":1,"sigma":0.1,"I0":0.5})"),
        doctest::Contains("beta"), std::invalid_argument);

    CHECK_THROWS_WITH_AS(
        load_params_json(
            R"({"beta":0.5,"gamma":0.2,"b":0.05,"K":1,"sigma":0.1,"I0":1.5})"),
        doctest::Contains("I0"), std::domain_error);
}
