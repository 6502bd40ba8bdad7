#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace teps
{
//---------------------------------------------------------------------------//
/*!
 * Philox4x32-10 counter-based generator.
 *
 * The state is a 128-bit counter plus a 64-bit key; every block of four
 * 32-bit words is a pure function of (key, counter). A stream is addressed by
 * putting a 64-bit stream id in the upper half of the counter and walking the
 * lower half, so streams never overlap and can be created in any order.
 */
class Philox4x32
{
  public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block apply(Block ctr, Key key)
    {
        for (int round = 0; round < 10; ++round)
        {
            if (round > 0)
            {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            std::uint64_t const p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            std::uint64_t const p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            auto const hi0 = static_cast<std::uint32_t>(p0 >> 32);
            auto const lo0 = static_cast<std::uint32_t>(p0);
            auto const hi1 = static_cast<std::uint32_t>(p1 >> 32);
            auto const lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }
};

//! SplitMix64 finalizer, used to fold stream paths into a single id.
inline std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

namespace detail
{
//! Layer boundaries x[0..128] and densities f = exp(-x^2 / 2) of the
//! 128-layer normal ziggurat (Marsaglia and Tsang 2000).
struct Ziggurat
{
    std::array<double, 129> x{};
    std::array<double, 129> f{};

    Ziggurat()
    {
        double const r = 3.442619855899;
        double const v = 9.91256303526217e-3;
        auto density = [](double t) { return std::exp(-0.5 * t * t); };
        x[0] = v / density(r);
        x[1] = r;
        for (int i = 1; i < 127; ++i)
            x[i + 1] = std::sqrt(-2.0 * std::log(v / x[i] + density(x[i])));
        x[128] = 0.0;
        for (int i = 0; i <= 128; ++i)
            f[i] = density(x[i]);
    }
};

inline Ziggurat const& ziggurat()
{
    static Ziggurat const table;
    return table;
}
}  // namespace detail

//---------------------------------------------------------------------------//
/*!
 * Variate generation shared by the engines below. `Engine` supplies 64-bit
 * words through operator().
 */
template<class Engine>
class Variates
{
  public:
    //! Uniform double on [0, 1) with 53 bits of resolution.
    double uniform()
    {
        return static_cast<double>(self()() >> 11) * 0x1.0p-53;
    }

    //! Uniform double on the open interval (0, 1).
    double uniform_open()
    {
        double u;
        do
        {
            u = uniform();
        } while (u == 0.0);
        return u;
    }

    //! Standard normal variate (128-layer ziggurat).
    double normal()
    {
        auto const& z = detail::ziggurat();
        for (;;)
        {
            std::uint64_t const bits = self()();
            auto const i = static_cast<int>(bits & 127u);
            // branch-free sign: the bit is a coin flip the predictor can't learn
            double const sign = 1.0 - 2.0 * static_cast<double>((bits >> 7) & 1u);
            double const x = static_cast<double>(bits >> 11) * 0x1.0p-53 * z.x[i];
            if (x < z.x[i + 1])
                return sign * x;
            if (i == 0)
            {
                // tail beyond the base strip
                double a, b;
                do
                {
                    a = -std::log(uniform_open()) / z.x[1];
                    b = -std::log(uniform_open());
                } while (2.0 * b < a * a);
                return sign * (z.x[1] + a);
            }
            double const y = z.f[i] + uniform() * (z.f[i + 1] - z.f[i]);
            if (y < std::exp(-0.5 * x * x))
                return sign * x;
        }
    }

    //! Exponential(1) variate.
    double exponential() { return -std::log(uniform_open()); }

    //! Gamma(shape, 1) variate (Marsaglia-Tsang), shape > 0.
    double gamma(double shape)
    {
        if (shape < 1.0)
        {
            double const u = uniform_open();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double const d = shape - 1.0 / 3.0;
        double const c = 1.0 / std::sqrt(9.0 * d);
        for (;;)
        {
            double x, v;
            do
            {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            double const u = uniform_open();
            double const x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2)
                return d * v;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v)))
                return d * v;
        }
    }

    //! Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n)
    {
        // Lemire's nearly-divisionless method.
        unsigned __int128 m = static_cast<unsigned __int128>(self()()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n)
        {
            std::uint64_t const threshold = (0 - n) % n;
            while (low < threshold)
            {
                m = static_cast<unsigned __int128>(self()()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

  private:
    Engine& self() { return static_cast<Engine&>(*this); }

};

//---------------------------------------------------------------------------//
/*!
 * A reproducible random stream keyed by (master seed, stream path).
 *
 * Satisfies UniformRandomBitGenerator with 64-bit output. Two streams built
 * from the same seed and path produce identical sequences regardless of which
 * thread creates them.
 */
class RandomStream : public Variates<RandomStream>
{
  public:
    using result_type = std::uint64_t;

    RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
    {
        key_ = {static_cast<std::uint32_t>(seed),
                static_cast<std::uint32_t>(seed >> 32)};
        std::uint64_t id = 0x6A09E667F3BCC909ull;
        for (auto p : path)
        {
            id = mix64(id ^ p);
        }
        stream_id_ = id;
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max()
    {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()()
    {
        if (used_ == 2)
        {
            refill();
        }
        return buffer_[used_++];
    }

  private:
    void refill()
    {
        Philox4x32::Block ctr{static_cast<std::uint32_t>(counter_),
                              static_cast<std::uint32_t>(counter_ >> 32),
                              static_cast<std::uint32_t>(stream_id_),
                              static_cast<std::uint32_t>(stream_id_ >> 32)};
        auto const out = Philox4x32::apply(ctr, key_);
        ++counter_;
        buffer_[0] = (std::uint64_t{out[1]} << 32) | out[0];
        buffer_[1] = (std::uint64_t{out[3]} << 32) | out[2];
        used_ = 0;
    }

    Philox4x32::Key key_{};
    std::uint64_t stream_id_ = 0;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int used_ = 2;
};

//---------------------------------------------------------------------------//
/*!
 * xoshiro256++ seeded from a RandomStream.
 *
 * For long sequential loops (a Gibbs chain) where a counter-based block per
 * two words is the bottleneck. Still a pure function of the seeding stream.
 */
class FastStream : public Variates<FastStream>
{
  public:
    using result_type = std::uint64_t;

    explicit FastStream(RandomStream seeder)
    {
        for (auto& w : s_)
            w = seeder();
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max()
    {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()()
    {
        std::uint64_t const out = rotl(s_[0] + s_[3], 23) + s_[0];
        std::uint64_t const t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return out;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k)
    {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_{};
};

//! Stream purpose tags; keep values stable, they are part of replay.
enum class StreamTag : std::uint64_t
{
    lottery = 1,
    own_score = 2,
    cutoff_resample = 3,
    gibbs_chain = 4,
    economy = 5,
    behavior = 6,
    observed_lottery = 7,
    pref_draw = 8,
    cf_lottery = 9,
    cutoff_pool = 10,
    generic = 99,
};

inline std::uint64_t tag(StreamTag t)
{
    return static_cast<std::uint64_t>(t);
}

}  // namespace teps
