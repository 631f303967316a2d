#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "sis/model.hpp"
#include "sis/noise.hpp"

namespace sis {

enum class SchemeKind { EulerMaruyama, GrayYang, SemiDiscrete };

std::string_view scheme_name(SchemeKind k);  // "em" / "gy" / "sd"
std::optional<SchemeKind> scheme_from_name(std::string_view name);

// One Euler-Maruyama step on the infected count:
//   I + A(I) dt + B(I) dW.
// Deliberately unconstrained; the iterate may leave (0,K).
double em_step(const SISParams& p, double I, double dt, double dW);

// One explicit Euler step on the logit-transformed process:
//   X + F(X) dt + sigma K dW.
double gray_yang_step(const SISParams& p, double X, double dt, double dW);

// One exponential step on the odds-transformed process:
//   Xh * exp{(phi(Xh) - sigma^2 K^2 / 2) dt + sigma K dW}.
// Positive whenever the input is positive and the exponent finite.
// Exponent magnitudes above 700 return NaN so that the driver flags the
// step instead of propagating an infinity.
double semi_discrete_step(const SISParams& p, double Xh, double dt, double dW);

struct Trajectory {
    SchemeKind scheme = SchemeKind::EulerMaruyama;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<double> states_I;
    std::vector<double> states_internal;  // logit or odds iterates; empty for EM
    std::uint64_t domain_violations = 0;  // EM nodes outside (0,K)
    ClampStats clamps;                    // inverse-transform saturations
    bool failed = false;
    std::size_t failure_index = 0;        // first non-finite node when failed

    std::size_t n_nodes() const { return states_I.size(); }
};

// Runs one scheme over the grid.  GY and SD iterate in their transformed
// space and derive I at every node through the clamped inverse transform,
// so their I values are strictly inside (0,K); EM runs directly in I-space
// and records (without repairing) every node outside the open interval.
// The first non-finite state sets `failed`; remaining nodes are NaN.
Trajectory simulate(const SISParams& p, SchemeKind scheme, double I0,
                    const WienerGrid& grid);

// CSV with header t,I,internal,scheme; 17 significant digits, LF endings.
// The internal column is empty for EM.
void write_trajectory_csv(const Trajectory& t, std::ostream& os);

}  // namespace sis
