#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sis {

// splitmix64: the state advances by the golden-ratio increment and each
// output is the finalizer of the new state, so output i is a pure function
// of (seed, i).  Constants are the reference ones (Steele, Lea & Flood).
struct SplitMix64 {
    std::uint64_t state = 0;

    static std::uint64_t finalize(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        return finalize(state);
    }
};

// Seed of the stream for one path: the (path_index+1)-th splitmix64 output
// for master_seed.  Streams are addressed by counter, never split from a
// single sequential stream, so paths can be generated in any order.
std::uint64_t path_stream_seed(std::uint64_t master_seed, std::uint32_t path_index);

// Standard normal deviates: Box-Muller over consecutive splitmix64 outputs.
// Each pair of draws consumes exactly two generator outputs:
//   u1 = 1 - (g >> 11) * 2^-53  in (0,1],   u2 = (g >> 11) * 2^-53 in [0,1),
//   r = sqrt(-2 ln u1),  z0 = r cos(2 pi u2),  z1 = r sin(2 pi u2).
// The pipeline is fixed so that independent implementations reproduce the
// stream bit for bit.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : gen_{seed} {}
    double next();

private:
    SplitMix64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct SeedInfo {
    std::uint64_t master_seed = 0;
    std::uint32_t path_index = 0;
};

// A uniform time grid carrying i.i.d. N(0, dt) Wiener increments.
// Immutable once built; safe to share across threads.
struct WienerGrid {
    double dt = 0.0;
    SeedInfo seed;
    std::vector<double> increments;

    std::size_t n_steps() const { return increments.size(); }
};

WienerGrid generate_wiener_grid(std::uint64_t master_seed, std::uint32_t path_index,
                                std::size_t n_steps, double dt);

// Aggregates increments by `factor`, which must divide n_steps.  The
// power-of-two part of the factor is applied as repeated pairwise halving,
// the remaining odd cofactor as left-to-right block sums.  Consequently
// coarsen(coarsen(g, a), b) == coarsen(g, a*b) bit for bit whenever a is a
// power of two, which covers every dyadic refinement chain.
WienerGrid coarsen(const WienerGrid& grid, std::size_t factor);

// Canonical sum of all increments, i.e. the single increment of
// coarsen(grid, n_steps).
double total_increment(const WienerGrid& grid);

// Binary snapshot.  32-byte little-endian header
//   magic "SWG1" | u32 version(=1) | f64 dt | u32 n_steps | u32 path_index | u64 master_seed
// followed by the increments as little-endian IEEE-754 doubles.
// Round trips are bit exact.
void save_wiener_grid(const WienerGrid& grid, const std::string& path);
WienerGrid load_wiener_grid(const std::string& path);

}  // namespace sis
