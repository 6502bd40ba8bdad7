#include "teps/uncertainty.hpp"

#include <bit>
#include <numeric>

#include "doctest.h"
#include "teps/errors.hpp"
#include "teps/random.hpp"

using namespace teps;

namespace
{
Economy lottery_economy(int k, std::vector<int> caps, int n_groups,
                        TieBreak tb, RandomStream* groups = nullptr)
{
    Economy e;
    int const n = static_cast<int>(caps.size());
    for (int c = 0; c < n; ++c)
    {
        Program p;
        p.id = c;
        p.capacity = caps[c];
        p.n_groups = n_groups;
        e.programs.push_back(p);
    }
    e.tiebreak = tb;
    e.intrinsic = Economy::RowMatrix::Zero(k, n);
    if (groups)
    {
        for (int i = 0; i < k; ++i)
            for (int c = 0; c < n; ++c)
                e.intrinsic(i, c) = static_cast<double>(groups->below(n_groups));
    }
    return e;
}

std::vector<Rol> full_rols(int k, int n, RandomStream& rng)
{
    std::vector<Rol> rols(k, Rol(n));
    for (auto& r : rols)
    {
        std::iota(r.begin(), r.end(), 0);
        std::shuffle(r.begin(), r.end(), rng);
    }
    return rols;
}
}  // namespace

TEST_CASE("coarse lottery scores")
{
    auto e = lottery_economy(2, {1, 1}, 4, TieBreak::stb);
    e.intrinsic << 3, 0, 0, 2;
    LotteryDraw d{TieBreak::stb, {0.5, 0.0}, {}};
    auto const s = realize_scores(e, d);
    CHECK(s(0, 0) == 0.875);
    CHECK(s(0, 1) == 0.125);
    CHECK(s(1, 0) == 0.0);
    CHECK(s(1, 1) == 0.5);
}

TEST_CASE("single tie-breaking reuses one lottery number")
{
    RandomStream rng(1, {1});
    auto e = lottery_economy(20, {5, 5, 5, 5}, 4, TieBreak::stb, &rng);
    auto const d = draw_lottery(e, rng);
    REQUIRE(d.lottery.size() == 20);
    auto const s = realize_scores(e, d);
    for (int i = 0; i < 20; ++i)
        for (int c = 0; c < 4; ++c)
            CHECK(s(i, c) == (e.intrinsic(i, c) + d.lottery[i]) / 4.0);
}

TEST_CASE("multiple tie-breaking uses per-program numbers")
{
    RandomStream rng(1, {2});
    auto e = lottery_economy(3, {1, 1}, 1, TieBreak::mtb);
    auto const d = draw_lottery(e, rng);
    REQUIRE(d.lottery.size() == 6);
    auto const s = realize_scores(e, d);
    CHECK(s(2, 1) == d.lottery[5]);
}

TEST_CASE("deterministic and exam programs")
{
    auto e = lottery_economy(1, {1, 1}, 1, TieBreak::stb);
    e.programs[0].mode = PriorityMode::deterministic;
    e.programs[1].mode = PriorityMode::exam;
    e.exam_spread = 0.25;
    e.intrinsic << 0.6, 0.4;
    LotteryDraw d{TieBreak::stb, {0.9}, {1.0}};
    auto const s = realize_scores(e, d);
    CHECK(s(0, 0) == 0.6);
    CHECK(s(0, 1) == doctest::Approx(0.75 * 0.4 + 0.25));
}

TEST_CASE("group out of range is rejected")
{
    auto e = lottery_economy(1, {1}, 2, TieBreak::stb);
    e.intrinsic(0, 0) = 2;
    CHECK_THROWS_AS(validate_economy(e), ValidationError);
    e.intrinsic(0, 0) = 1;
    e.zone = Economy::IntMatrix::Ones(1, 1);
    CHECK_THROWS_AS(validate_economy(e), ValidationError);
    e.zone(0, 0) = 0;
    CHECK_NOTHROW(validate_economy(e));
}

TEST_CASE("undersubscription forces zero cutoffs")
{
    auto const e = lottery_economy(1, {1, 1}, 1, TieBreak::stb);
    std::vector<Rol> none{{}};
    for (auto const& p : simulate_cutoff_distribution(e, none, 50, 3))
        CHECK(p == std::vector<double>{0.0, 0.0});

    // Her first choice fills exactly, so its cutoff is her own score.
    std::vector<Rol> rols{{0, 1}};
    auto const cutoffs = simulate_cutoff_distribution(e, rols, 50, 3);
    for (std::size_t d = 0; d < cutoffs.size(); ++d)
    {
        RandomStream rng(3, {tag(StreamTag::lottery), d});
        CHECK(cutoffs[d][0] == draw_lottery(e, rng).lottery[0]);
        CHECK(cutoffs[d][1] == 0.0);
    }
}

TEST_CASE("cutoff simulation is independent of the thread count")
{
    RandomStream rng(8, {0});
    auto const e = lottery_economy(60, {10, 20, 5, 15}, 4, TieBreak::stb, &rng);
    auto const rols = full_rols(60, 4, rng);
    auto const one = simulate_cutoff_distribution(e, rols, 40, 17, 1);
    CHECK(one == simulate_cutoff_distribution(e, rols, 40, 17, 3));
    CHECK(one != simulate_cutoff_distribution(e, rols, 40, 18, 1));
}

TEST_CASE("worked four-class partition")
{
    // Classes {c4,c3}, {c1,c0}, {c2,c1,c0}, {c4,c1} out of 20 draws.
    Rol const rol{4, 3, 2, 1};
    auto const p = make_student_partition(
        {{0b00011, 6}, {0b11000, 8}, {0b10010, 1}, {0b00111, 5}}, rol);
    REQUIRE(p.classes.size() == 4);
    CHECK(p.n_draws == 20);
    CHECK(p.classes[0] == FeasibleClass{0b11000, 4, 8, 0.4});
    CHECK(p.classes[1] == FeasibleClass{0b00011, 1, 6, 0.3});
    CHECK(p.classes[2] == FeasibleClass{0b00111, 2, 5, 0.25});
    CHECK(p.classes[3] == FeasibleClass{0b10010, 4, 1, 0.05});
    CHECK_NOTHROW(validate_partition(p, rol));

    auto const assign = assignment_probabilities(p, 6);
    CHECK(assign[4] == doctest::Approx(0.45));
    CHECK(assign[5] == 0.0);
    auto const admit = admission_probabilities(p, 6);
    CHECK(admit[1] == doctest::Approx(0.6));
}

TEST_CASE("equal counts order by ascending mask")
{
    auto const p = make_student_partition({{0b110, 2}, {0b011, 2}, {0b001, 1}},
                                          Rol{0, 1, 2});
    CHECK(p.classes[0].feasible == 0b011);
    CHECK(p.classes[1].feasible == 0b110);
}

TEST_CASE("a single draw gives one certain class")
{
    RandomStream rng(4, {4});
    auto const e = lottery_economy(30, {5, 5, 5}, 2, TieBreak::stb, &rng);
    auto const rols = full_rols(30, 3, rng);
    PartitionOptions opt;
    opt.n_draws = 1;
    opt.seed = 77;
    auto const part = build_feasible_partition(e, rols, opt);

    // The class assignment is the DA assignment of that same draw.
    RandomStream lot(77, {tag(StreamTag::lottery), 0});
    auto const scores = realize_scores(e, draw_lottery(e, lot));
    auto const m = run_da(rols, scores, e.programs);
    for (int i = 0; i < 30; ++i)
    {
        REQUIRE(part[i].classes.size() == 1);
        CHECK(part[i].classes[0].prob == 1.0);
        CHECK(part[i].classes[0].assigned == m.assignment[i]);
    }
}

TEST_CASE("partitions are valid frequency accounts")
{
    RandomStream rng(6, {6});
    for (int rep = 0; rep < 20; ++rep)
    {
        int const k = 10 + static_cast<int>(rng.below(40));
        int const n = 2 + static_cast<int>(rng.below(5));
        std::vector<int> caps(n);
        for (auto& c : caps)
            c = static_cast<int>(rng.below(k / 2 + 1));
        auto const tb = rep % 2 ? TieBreak::mtb : TieBreak::stb;
        auto const e = lottery_economy(k, caps, 3, tb, &rng);
        auto rols = full_rols(k, n, rng);
        for (auto& r : rols)
            r.resize(rng.below(n + 1));

        PartitionOptions opt;
        opt.n_draws = 1 + static_cast<int>(rng.below(60));
        opt.seed = rep;
        opt.mode = rep % 3 == 0 ? PartitionMode::independent : PartitionMode::joint;
        opt.n_own_draws = 25;
        auto const part = build_feasible_partition(e, rols, opt);
        for (int i = 0; i < k; ++i)
        {
            CHECK_NOTHROW(validate_partition(part[i], rols[i]));
            double total = 0;
            for (auto const& w : part[i].classes)
                total += w.prob;
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            std::uint64_t const draws
                = opt.mode == PartitionMode::joint ? opt.n_draws : 25;
            CHECK(part[i].classes.size()
                  <= std::min<std::uint64_t>(draws, std::uint64_t{1} << n));
        }
        opt.threads = 3;
        CHECK(part == build_feasible_partition(e, rols, opt));
    }
}

TEST_CASE("one cutoff vector with a shared lottery yields nested feasible sets")
{
    RandomStream rng(12, {12});
    auto const e = lottery_economy(40, {5, 10, 20}, 1, TieBreak::stb);
    auto const rols = full_rols(40, 3, rng);
    PartitionOptions opt;
    opt.mode = PartitionMode::independent;
    opt.n_draws = 1;
    opt.n_own_draws = 500;
    opt.seed = 5;
    auto const part = build_feasible_partition(e, rols, opt);
    for (auto const& p : part)
    {
        CHECK(p.classes.size() <= 4);
        for (auto const& a : p.classes)
            for (auto const& b : p.classes)
                CHECK(((a.feasible & b.feasible) == a.feasible
                       || (a.feasible & b.feasible) == b.feasible));
    }
}
