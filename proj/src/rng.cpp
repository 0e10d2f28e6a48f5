#include "dirfdr/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace dirfdr {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(prod >> 32);
    lo = static_cast<std::uint32_t>(prod);
}

}  // namespace

std::array<std::uint32_t, 4> Philox::block(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

Philox::Philox(std::uint64_t seed, std::uint64_t index, StreamRole role)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      index_lo_(static_cast<std::uint32_t>(index)),
      role_word_(static_cast<std::uint32_t>(role) ^ (static_cast<std::uint32_t>(index >> 32) << 16)) {}

void Philox::refill() {
    buffer_ = block({static_cast<std::uint32_t>(block_counter_),
                     static_cast<std::uint32_t>(block_counter_ >> 32), index_lo_, role_word_},
                    key_);
    ++block_counter_;
    buffered_ = 2;
}

std::uint64_t Philox::next_u64() {
    if (buffered_ == 0) refill();
    const int half = 2 - buffered_;
    --buffered_;
    return (static_cast<std::uint64_t>(buffer_[2 * half + 1]) << 32) | buffer_[2 * half];
}

double Philox::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Philox::uniform(double low, double high) {
    return low + (high - low) * uniform();
}

std::uint64_t Philox::uniform_index(std::uint64_t bound) {
    // Lemire's multiply-shift with rejection of the biased low range.
    std::uint64_t x = next_u64();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            x = next_u64();
            m = static_cast<unsigned __int128>(x) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double Philox::normal() {
    if (has_spare_normal_) {
        has_spare_normal_ = false;
        return spare_normal_;
    }
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(angle);
    has_spare_normal_ = true;
    return r * std::cos(angle);
}

bool Philox::bernoulli(double prob) {
    return uniform() < prob;
}

std::uint64_t Philox::poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    if (mean < 10.0) {
        const double u = uniform();
        double prob = std::exp(-mean);
        double cdf = prob;
        std::uint64_t k = 0;
        while (u >= cdf && k < 1000) {
            ++k;
            prob *= mean / static_cast<double>(k);
            cdf += prob;
        }
        return k;
    }
    // PTRS: transformed rejection with squeeze.
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    while (true) {
        const double u = uniform() - 0.5;
        const double v = uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
            -mean + k * loglam - std::lgamma(k + 1.0)) {
            return static_cast<std::uint64_t>(k);
        }
    }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, StreamRole role) {
    Philox rng(seed, index, role);
    return rng.next_u64();
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Philox rng(seed, 0, StreamRole::Generic);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_index(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

}  // namespace dirfdr
