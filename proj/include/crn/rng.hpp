#pragma once

#include <cstdint>
#include <random>

namespace crn
{
    /// Independent random streams carved out of one master seed.
    enum class Stream : std::uint64_t
    {
        Placement = 1,
        Spectrum = 2,
        Attributes = 3,
        KMeans = 4,
        HelloJitter = 5,
        Mobility = 6,
        PuActivity = 7,
        EndpointPair = 8,
    };

    constexpr std::uint64_t splitmix64(std::uint64_t x)
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream)
    {
        return splitmix64(splitmix64(master) ^ (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL));
    }

    /// mt19937_64 with distribution code written out here; the std:: distributions
    /// are implementation-defined and would break cross-toolchain reproducibility.
    class Rng
    {
    public:
        explicit Rng(std::uint64_t seed) : m_engine(seed) {}
        Rng(std::uint64_t master, Stream stream) : m_engine(derive_seed(master, stream)) {}

        std::uint64_t next() { return m_engine(); }

        /// Uniform in [0, 1).
        double uniform01() { return static_cast<double>(m_engine() >> 11) * 0x1.0p-53; }

        double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

        /// Uniform integer in [0, n); n > 0.
        std::uint64_t below(std::uint64_t n)
        {
            const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
            std::uint64_t r = m_engine();
            while (r >= limit)
            {
                r = m_engine();
            }
            return r % n;
        }

        bool bernoulli(double p) { return uniform01() < p; }

    private:
        std::mt19937_64 m_engine;
    };
}
