#include "teps/random.hpp"

#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "teps/parallel.hpp"

using teps::Philox4x32;
using teps::RandomStream;

TEST_CASE("philox known-answer vectors")
{
    using B = Philox4x32::Block;
    using K = Philox4x32::Key;
    CHECK(Philox4x32::apply(B{0, 0, 0, 0}, K{0, 0})
          == B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::apply(B{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                            K{0xffffffff, 0xffffffff})
          == B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::apply(B{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                            K{0xa4093822, 0x299f31d0})
          == B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are addressed by seed and path")
{
    RandomStream a(7, {1, 2});
    RandomStream b(7, {1, 2});
    RandomStream c(7, {2, 1});
    RandomStream d(8, {1, 2});
    std::vector<std::uint64_t> va, vb, vc, vd;
    for (int i = 0; i < 16; ++i)
    {
        va.push_back(a());
        vb.push_back(b());
        vc.push_back(c());
        vd.push_back(d());
    }
    CHECK(va == vb);
    CHECK(va != vc);
    CHECK(va != vd);
}

TEST_CASE("parallel_for output is independent of thread count")
{
    auto run = [](int threads) {
        std::vector<double> out(257);
        teps::parallel_for(out.size(), threads, [&](std::size_t i) {
            RandomStream rng(3, {i});
            out[i] = rng.normal() + rng.uniform();
        });
        return out;
    };
    auto const one = run(1);
    CHECK(one == run(4));
    CHECK(one == run(13));
}

TEST_CASE("parallel_for rethrows worker exceptions")
{
    CHECK_THROWS_AS(teps::parallel_for(10, 3,
                                       [](std::size_t i) {
                                           if (i == 7)
                                               throw std::runtime_error("x");
                                       }),
                    std::runtime_error);
}

TEST_CASE("distribution moments")
{
    RandomStream rng(11, {0});
    int const n = 200000;
    double su = 0, sn = 0, sn2 = 0, se = 0, sg = 0;
    for (int i = 0; i < n; ++i)
    {
        su += rng.uniform();
        double const z = rng.normal();
        sn += z;
        sn2 += z * z;
        se += rng.exponential();
        sg += rng.gamma(2.5);
    }
    // 5 standard errors of the respective means
    CHECK(std::abs(su / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
    CHECK(std::abs(sn / n) < 5 * std::sqrt(1.0 / n));
    CHECK(std::abs(sn2 / n - 1.0) < 5 * std::sqrt(2.0 / n));
    CHECK(std::abs(se / n - 1.0) < 5 * std::sqrt(1.0 / n));
    CHECK(std::abs(sg / n - 2.5) < 5 * std::sqrt(2.5 / n));
}

TEST_CASE("below is uniform over a small range")
{
    RandomStream rng(5, {9});
    std::vector<int> hits(6, 0);
    int const n = 60000;
    for (int i = 0; i < n; ++i)
        ++hits[rng.below(6)];
    for (int h : hits)
        CHECK(std::abs(h - n / 6) < 5 * std::sqrt(n * (1.0 / 6) * (5.0 / 6)));
}
