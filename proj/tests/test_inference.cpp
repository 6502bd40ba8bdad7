#include "teps/inference.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "teps/errors.hpp"
#include "teps/random.hpp"

using namespace teps;
using Pairs = std::vector<std::pair<int, int>>;
using namespace teps::oracle;

namespace
{
// Four events of the six-school worked example, counted out of 20 draws.
StudentPartition worked_partition(Rol const& rol)
{
    return make_student_partition({{mask({4, 3}), 8},
                                   {mask({1, 0}), 6},
                                   {mask({2, 1, 0}), 5},
                                   {mask({4, 1}), 1}},
                                  rol);
}

Pairs sorted(Pairs p)
{
    std::sort(p.begin(), p.end());
    return p;
}

// Merge the ordered groups from the last one backward, extending by
// transitivity at each step: P_{j} = P~_j + P_{j+1} + {(x,z): (x,y) in P~_j,
// (y,z) in P_{j+1}}.
RelationSet tree_merge(std::vector<StabilityGroup> const& groups, int n)
{
    RelationSet acc(n);
    for (auto g = groups.rbegin(); g != groups.rend(); ++g)
    {
        RelationSet next = acc;
        next.merge(g->relations);
        for (auto [x, y] : g->relations.pairs())
            for (auto [y2, z] : acc.pairs())
                if (y2 == y && x != z)
                    next.add(x, z);
        acc = next;
    }
    return acc;
}
}  // namespace

TEST_CASE("worked example: truncation, relations, closure")
{
    Rol const rol{4, 3, 2, 1};
    auto const p = worked_partition(rol);

    auto const t95 = truncate_partition(p, 95);
    REQUIRE(t95.classes.size() == 3);
    CHECK(t95.classes[2].feasible == mask({2, 1, 0}));
    CHECK(truncate_partition(p, 0).classes.size() == 1);
    CHECK(truncate_partition(p, 100).classes.size() == 4);

    auto const groups = stability_relations(p, rol, 6);
    REQUIRE(groups.size() == 3);
    CHECK(groups[0].assigned == 4);
    CHECK(groups[0].relations.pairs() == Pairs{{4, 1}, {4, 3}});
    CHECK(groups[1].relations.pairs() == Pairs{{2, 0}, {2, 1}});
    CHECK(groups[2].relations.pairs() == Pairs{{1, 0}});

    CHECK(teps_infer(p, rol, 100, 6).pairs()
          == sorted({{1, 0}, {2, 1}, {2, 0}, {4, 1}, {4, 3}, {4, 0}}));
    CHECK(teps_infer(p, rol, 95, 6).pairs()
          == sorted({{4, 3}, {2, 1}, {2, 0}, {1, 0}}));
    CHECK(tree_merge(groups, 6) == teps_infer(p, rol, 100, 6));

    auto const wtt = wtt_infer(rol, 6);
    CHECK(wtt.size() == 14);
    CHECK(wtt.pairs()
          == sorted({{4, 3}, {4, 2}, {4, 1}, {4, 0}, {4, 5}, {3, 2}, {3, 1},
                     {3, 0}, {3, 5}, {2, 1}, {2, 0}, {2, 5}, {1, 0}, {1, 5}}));
}

TEST_CASE("three-school shared-lottery example")
{
    // a=0, b=1, c=2; truthful b-a-c; events {a,b,c}, {b,c}, {c}, {}.
    Rol const rol{1, 0, 2};
    auto const p = make_student_partition(
        {{mask({0, 1, 2}), 3}, {mask({1, 2}), 3}, {mask({2}), 3}, {0, 1}}, rol);
    CHECK(teps_infer(p, rol, 100, 3).pairs() == Pairs{{1, 0}, {1, 2}});
}

TEST_CASE("classes without comparators contribute nothing")
{
    Rol const rol{2};
    auto const p = make_student_partition({{mask({2}), 4}}, rol);
    CHECK(stability_relations(p, rol, 3).empty());
    CHECK(teps_infer(p, rol, 100, 3).empty());
}

TEST_CASE("inconsistent class assignment is rejected")
{
    StudentPartition p;
    p.n_draws = 1;
    p.classes.push_back({mask({0, 1}), 1, 1, 1.0});
    CHECK_THROWS_AS(stability_relations(p, Rol{0, 1}, 2), ValidationError);
}

TEST_CASE("truncation boundary uses exact counts")
{
    // Cumulative masses 0.7 and 0.9 land exactly on the thresholds.
    auto const p = make_student_partition(
        {{mask({0}), 1}, {mask({1}), 2}, {mask({2}), 7}}, Rol{0, 1, 2});
    CHECK(truncate_partition(p, 70).classes.size() == 1);
    CHECK(truncate_partition(p, 90).classes.size() == 2);
    CHECK(truncate_partition(p, 100).classes.size() == 3);
    CHECK_THROWS_AS(truncate_partition(StudentPartition{}, 50), ValidationError);
}

TEST_CASE("outside option relations are opt-in")
{
    Rol const rol{0};
    auto const p = make_student_partition({{mask({1, 2}), 1}, {mask({0}), 1}}, rol);
    CHECK(teps_infer(p, rol, 100, 3).empty());
    InferenceOptions opt;
    opt.outside_option = true;
    auto const r = teps_infer(p, rol, 100, 3, opt);
    CHECK(r.n_nodes() == 4);
    CHECK(r.pairs() == Pairs{{3, 1}, {3, 2}});
}

TEST_CASE("closure basics and cycles")
{
    RelationSet r(3);
    r.add(0, 1);
    r.add(1, 2);
    CHECK(transitive_closure(r).pairs() == Pairs{{0, 1}, {0, 2}, {1, 2}});
    r.add(2, 0);
    try
    {
        transitive_closure(r);
        FAIL("cycle not detected");
    }
    catch (CycleError const& e)
    {
        auto const& cyc = e.cycle();
        REQUIRE(cyc.size() == 4);
        CHECK(cyc.front() == cyc.back());
        for (std::size_t i = 0; i + 1 < cyc.size(); ++i)
            CHECK(r.contains(cyc[i], cyc[i + 1]));
    }
    CHECK_THROWS_AS(r.add(1, 1), ValidationError);
}

TEST_CASE("closure matches matrix-power reachability on random DAGs")
{
    RandomStream rng(31, {0});
    int violations = 0;
    for (int rep = 0; rep < 1000; ++rep)
    {
        int const n = 1 + static_cast<int>(rng.below(10));
        auto const r = random_dag(rng, n, rng.uniform());
        auto const closed = transitive_closure(r);
        auto const reach = matrix_power_reach(r);
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                violations += closed.contains(x, y) != reach[x][y];
    }
    CHECK(violations == 0);
}

TEST_CASE("closure equals the ordered tree merge")
{
    RandomStream rng(32, {0});
    for (int rep = 0; rep < 2000; ++rep)
    {
        Rol rol;
        auto const p = random_partition(rng, rol, 6);
        auto const groups = stability_relations(p, rol, 6);
        CHECK(tree_merge(groups, 6) == teps_infer(p, rol, 100, 6));
    }
}

TEST_CASE("nesting and ROL agreement")
{
    RandomStream rng(33, {0});
    std::vector<double> const grid{0, 20, 40, 60, 80, 100};
    for (int rep = 0; rep < 3000; ++rep)
    {
        Rol rol;
        int const n = 2 + static_cast<int>(rng.below(7));
        auto const p = random_partition(rng, rol, n);
        auto const wtt = wtt_infer(rol, n);
        auto const pos = rank_positions(rol, n);
        std::uint64_t ever_feasible = 0;
        for (auto const& w : p.classes)
            ever_feasible |= w.feasible;
        RelationSet prev(n);
        for (double tau : grid)
        {
            auto const r = teps_infer(p, rol, tau, n);
            CHECK(prev.subset_of(r));
            CHECK(r.subset_of(wtt));
            for (auto [x, y] : r.pairs())
            {
                CHECK(((ever_feasible >> x) & 1u));
                CHECK(((ever_feasible >> y) & 1u));
                if (pos[x] >= 0 && pos[y] >= 0)
                    CHECK(pos[x] < pos[y]);
            }
            prev = r;
        }
    }
}

TEST_CASE("wtt counting")
{
    CHECK(wtt_infer({}, 5).empty());
    CHECK(wtt_infer({3, 1, 0, 2, 4}, 5).size() == 10);
    CHECK(wtt_infer({3}, 5, mask({1, 3})).pairs() == Pairs{{3, 1}});
    CHECK_THROWS_AS(wtt_infer({3}, 5, mask({1})), ValidationError);
}

TEST_CASE("consistent ROLs")
{
    Rol const truth{4, 3, 2, 1, 0, 5};
    Rol const rol{4, 3, 2, 1};
    auto const p = worked_partition(rol);
    auto const closed = teps_infer(p, rol, 100, 6);
    auto const ever = ever_assigned(p);
    CHECK(ever == mask({4, 1, 2}));
    CHECK(is_consistent_rol(truth, closed, ever));
    CHECK(is_consistent_rol(rol, closed, ever));
    CHECK_FALSE(is_consistent_rol({4, 3, 1}, closed, ever));
    CHECK_FALSE(is_consistent_rol({4, 1, 2}, closed, ever));
    CHECK(is_consistent_rol({2, 4, 1}, closed, ever));
}

TEST_CASE("labels")
{
    CHECK(teps_label(0) == "TEPS^top");
    CHECK(teps_label(100) == "TEPS^all");
    CHECK(teps_label(80) == "TEPS^80");
    CHECK(teps_label(12.5) == "TEPS^12.5");
}
