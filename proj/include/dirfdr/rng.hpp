#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace dirfdr {

/// Roles that key independent random streams inside one simulation trial.
enum class StreamRole : std::uint32_t {
    Design = 1,
    Coefficients = 2,
    Responses = 3,
    LassoFolds = 4,
    ClimeFolds = 5,
    SecondDesign = 6,
    SecondResponses = 7,
    SecondLassoFolds = 8,
    SecondClimeFolds = 9,
    Generic = 100,
};

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// A stream is fully determined by (seed, index, role); draws advance a 64-bit
/// block counter, so the sequence never depends on thread scheduling.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t index = 0, StreamRole role = StreamRole::Generic);

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double low, double high);
    /// Unbiased integer in [0, bound).
    std::uint64_t uniform_index(std::uint64_t bound);
    double normal();
    bool bernoulli(double prob);
    /// Inversion for mean < 10, Hormann's PTRS rejection above.
    std::uint64_t poisson(double mean);

    /// One block of the raw Philox4x32-10 bijection, exposed for known-answer tests.
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                              std::array<std::uint32_t, 2> key);

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint32_t index_lo_;
    std::uint32_t role_word_;
    std::uint64_t block_counter_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int buffered_ = 0;  // number of unused 64-bit halves in buffer_
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

/// Seed for a derived stream (for APIs that take an integer seed).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, StreamRole role);

/// Fisher-Yates permutation of 0..n-1 driven by the given seed.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace dirfdr
