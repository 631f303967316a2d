#include "sis/noise.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace sis {

std::uint64_t path_stream_seed(std::uint64_t master_seed, std::uint32_t path_index) {
    return SplitMix64::finalize(master_seed +
                                0x9E3779B97F4A7C15ULL * (std::uint64_t(path_index) + 1));
}

double GaussianStream::next() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - double(gen_.next() >> 11) * 0x1p-53;  // (0,1]
    const double u2 = double(gen_.next() >> 11) * 0x1p-53;        // [0,1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

WienerGrid generate_wiener_grid(std::uint64_t master_seed, std::uint32_t path_index,
                                std::size_t n_steps, double dt) {
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be > 0");
    WienerGrid g;
    g.dt = dt;
    g.seed = SeedInfo{master_seed, path_index};
    g.increments.resize(n_steps);
    GaussianStream normals(path_stream_seed(master_seed, path_index));
    const double scale = std::sqrt(dt);
    for (std::size_t i = 0; i < n_steps; ++i) {
        g.increments[i] = scale * normals.next();
    }
    return g;
}

WienerGrid coarsen(const WienerGrid& grid, std::size_t factor) {
    if (factor < 1) throw std::invalid_argument("coarsen: factor must be >= 1");
    if (grid.n_steps() == 0 || grid.n_steps() % factor != 0) {
        throw std::invalid_argument("coarsen: factor must divide n_steps");
    }
    WienerGrid out;
    out.dt = grid.dt * double(factor);
    out.seed = grid.seed;
    if (factor == 1) {
        out.increments = grid.increments;
        return out;
    }
    std::vector<double> acc = grid.increments;
    std::size_t rem = factor;
    while (rem % 2 == 0) {
        std::vector<double> half(acc.size() / 2);
        for (std::size_t i = 0; i < half.size(); ++i) {
            half[i] = acc[2 * i] + acc[2 * i + 1];
        }
        acc.swap(half);
        rem /= 2;
    }
    if (rem > 1) {
        std::vector<double> blocks(acc.size() / rem);
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            double s = acc[i * rem];
            for (std::size_t j = 1; j < rem; ++j) s += acc[i * rem + j];
            blocks[i] = s;
        }
        acc.swap(blocks);
    }
    out.increments = std::move(acc);
    return out;
}

double total_increment(const WienerGrid& grid) {
    return coarsen(grid, grid.n_steps()).increments.at(0);
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

double get_f64(const unsigned char* p) {
    return std::bit_cast<double>(get_u64(p));
}

constexpr char kMagic[4] = {'S', 'W', 'G', '1'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_wiener_grid(const WienerGrid& grid, const std::string& path) {
    if (grid.n_steps() > 0xFFFFFFFFULL) {
        throw std::invalid_argument("save_wiener_grid: n_steps exceeds format limit");
    }
    std::string buf;
    buf.reserve(32 + 8 * grid.n_steps());
    buf.append(kMagic, 4);
    put_u32(buf, kVersion);
    put_f64(buf, grid.dt);
    put_u32(buf, std::uint32_t(grid.n_steps()));
    put_u32(buf, grid.seed.path_index);
    put_u64(buf, grid.seed.master_seed);
    for (double w : grid.increments) put_f64(buf, w);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

WienerGrid load_wiener_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 32) throw std::runtime_error("truncated grid file: " + path);
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    if (std::memcmp(p, kMagic, 4) != 0) throw std::runtime_error("bad magic: " + path);
    if (get_u32(p + 4) != kVersion) throw std::runtime_error("unsupported version: " + path);
    WienerGrid g;
    g.dt = get_f64(p + 8);
    const std::uint32_t n = get_u32(p + 16);
    g.seed.path_index = get_u32(p + 20);
    g.seed.master_seed = get_u64(p + 24);
    if (buf.size() != 32 + 8 * std::size_t(n)) {
        throw std::runtime_error("grid file size mismatch: " + path);
    }
    g.increments.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        g.increments[i] = get_f64(p + 32 + 8 * std::size_t(i));
    }
    return g;
}

}  // namespace sis
