#include "teps/inference.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "teps/errors.hpp"

namespace teps
{
namespace
{
std::uint64_t bit(int c)
{
    return std::uint64_t{1} << c;
}

std::uint64_t all_below(int n)
{
    return n >= 64 ? ~std::uint64_t{0} : bit(n) - 1;
}

// Shortest cycle through `start` by breadth-first search.
std::vector<int> find_cycle(RelationSet const& rels, int start)
{
    int const n = rels.n_nodes();
    std::vector<int> parent(static_cast<std::size_t>(n), -2);
    std::vector<int> queue{start};
    for (std::size_t head = 0; head < queue.size(); ++head)
    {
        int const at = queue[head];
        for (std::uint64_t m = rels.worse(at); m; m &= m - 1)
        {
            int const y = std::countr_zero(m);
            if (y == start)
            {
                std::vector<int> path{start};
                for (int v = at; v != start; v = parent[v])
                    path.push_back(v);
                path.push_back(start);
                std::reverse(path.begin() + 1, path.end() - 1);
                return path;
            }
            if (parent[y] == -2)
            {
                parent[y] = at;
                queue.push_back(y);
            }
        }
    }
    return {};
}
}  // namespace

RelationSet::RelationSet(int n_nodes)
{
    if (n_nodes < 0 || n_nodes > kMaxPrograms)
        throw ValidationError("relation sets support at most "
                              + std::to_string(kMaxPrograms) + " nodes");
    worse_.assign(static_cast<std::size_t>(n_nodes), 0);
}

void RelationSet::add(int x, int y)
{
    if (x < 0 || y < 0 || x >= n_nodes() || y >= n_nodes())
        throw ValidationError("relation (" + std::to_string(x) + ", "
                              + std::to_string(y) + ") out of range");
    if (x == y)
        throw ValidationError("reflexive relation on program "
                              + std::to_string(x));
    worse_[x] |= bit(y);
}

std::uint64_t RelationSet::better(int y) const
{
    std::uint64_t out = 0;
    for (int x = 0; x < n_nodes(); ++x)
    {
        if (contains(x, y))
            out |= bit(x);
    }
    return out;
}

std::size_t RelationSet::size() const
{
    std::size_t n = 0;
    for (auto w : worse_)
        n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

std::vector<std::pair<int, int>> RelationSet::pairs() const
{
    std::vector<std::pair<int, int>> out;
    for (int x = 0; x < n_nodes(); ++x)
    {
        for (std::uint64_t m = worse_[x]; m; m &= m - 1)
            out.emplace_back(x, std::countr_zero(m));
    }
    return out;
}

void RelationSet::merge(RelationSet const& other)
{
    if (other.n_nodes() != n_nodes())
        throw ValidationError("cannot merge relation sets of different sizes");
    for (int x = 0; x < n_nodes(); ++x)
        worse_[x] |= other.worse_[x];
}

bool RelationSet::subset_of(RelationSet const& other) const
{
    if (other.n_nodes() != n_nodes())
        return false;
    for (int x = 0; x < n_nodes(); ++x)
    {
        if (worse_[x] & ~other.worse_[x])
            return false;
    }
    return true;
}

//---------------------------------------------------------------------------//

StudentPartition truncate_partition(StudentPartition const& partition,
                                    double tau)
{
    if (partition.classes.empty() || partition.n_draws == 0)
        throw ValidationError("cannot truncate an empty partition");
    if (!(tau >= 0.0 && tau <= 100.0))
        throw ValidationError("attention parameter must lie in [0, 100]");

    // Integer counts keep the boundary exact: keep while 100 * cum <= tau * n.
    double const limit = tau * static_cast<double>(partition.n_draws);
    StudentPartition out;
    out.n_draws = partition.n_draws;
    std::uint64_t cum = 0;
    for (auto const& w : partition.classes)
    {
        cum += w.count;
        if (!out.classes.empty() && 100.0 * static_cast<double>(cum) > limit)
            break;
        out.classes.push_back(w);
    }
    return out;
}

std::vector<StabilityGroup>
stability_relations(StudentPartition const& classes, Rol const& rol,
                    int n_programs, InferenceOptions const& options)
{
    int const n_nodes = n_programs + (options.outside_option ? 1 : 0);
    int const outside = n_programs;
    auto const pos = rank_positions(rol, n_programs);

    std::vector<StabilityGroup> groups;
    auto group_for = [&](ProgramId a) -> RelationSet& {
        for (auto& g : groups)
        {
            if (g.assigned == a)
                return g.relations;
        }
        groups.push_back({a, RelationSet(n_nodes)});
        return groups.back().relations;
    };

    for (auto const& w : classes.classes)
    {
        if (w.assigned != rol_best(w.feasible, rol))
            throw ValidationError(
                "class assignment is not the ROL-best feasible program");
        if (w.assigned == kUnassigned)
        {
            if (!options.outside_option || w.feasible == 0)
                continue;
            auto& rels = group_for(kUnassigned);
            for (std::uint64_t m = w.feasible; m; m &= m - 1)
                rels.add(outside, std::countr_zero(m));
            continue;
        }
        std::uint64_t const others = w.feasible & ~bit(w.assigned);
        if (others == 0)
            continue;
        auto& rels = group_for(w.assigned);
        for (std::uint64_t m = others; m; m &= m - 1)
            rels.add(w.assigned, std::countr_zero(m));
    }

    std::sort(groups.begin(), groups.end(),
              [&](StabilityGroup const& a, StabilityGroup const& b) {
                  auto rank = [&](ProgramId c) {
                      return c == kUnassigned ? n_programs : pos[c];
                  };
                  return rank(a.assigned) < rank(b.assigned);
              });
    return groups;
}

RelationSet transitive_closure(RelationSet const& relations)
{
    int const n = relations.n_nodes();
    // Warshall on bitmask rows: after pass k, x reaches y through {0..k}.
    std::vector<std::uint64_t> row(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x)
        row[x] = relations.worse(x);
    for (int k = 0; k < n; ++k)
    {
        for (int x = 0; x < n; ++x)
        {
            if ((row[x] >> k) & 1u)
                row[x] |= row[k];
        }
    }

    RelationSet closed(n);
    for (int x = 0; x < n; ++x)
    {
        for (std::uint64_t m = row[x] & ~bit(x); m; m &= m - 1)
            closed.add(x, std::countr_zero(m));
    }
    for (int x = 0; x < n; ++x)
    {
        if ((row[x] >> x) & 1u)
        {
            auto const cycle = find_cycle(relations, x);
            std::ostringstream os;
            os << "preference cycle:";
            for (int c : cycle)
                os << ' ' << c;
            throw CycleError(os.str(), cycle);
        }
    }
    return closed;
}

RelationSet teps_infer(StudentPartition const& partition, Rol const& rol,
                       double tau, int n_programs,
                       InferenceOptions const& options)
{
    auto const groups = stability_relations(truncate_partition(partition, tau),
                                            rol, n_programs, options);
    RelationSet all(n_programs + (options.outside_option ? 1 : 0));
    for (auto const& g : groups)
        all.merge(g.relations);
    return transitive_closure(all);
}

RelationSet wtt_infer(Rol const& rol, int n_programs, std::uint64_t universe)
{
    RelationSet out(n_programs);
    universe &= all_below(n_programs);
    std::uint64_t ranked = 0;
    for (ProgramId c : rol)
    {
        if (c < 0 || c >= n_programs || !(universe & bit(c)))
            throw ValidationError("ranked program " + std::to_string(c)
                                  + " outside the program universe");
        ranked |= bit(c);
    }
    std::uint64_t below = universe & ~ranked;
    for (auto it = rol.rbegin(); it != rol.rend(); ++it)
    {
        for (std::uint64_t m = below; m; m &= m - 1)
            out.add(*it, std::countr_zero(m));
        below |= bit(*it);
    }
    return out;
}

bool is_consistent_rol(Rol const& candidate, RelationSet const& closed,
                       std::uint64_t ever_assigned_mask)
{
    std::uint64_t listed = 0;
    for (ProgramId c : candidate)
    {
        // no program already listed may be inferred worse than c
        if (c < closed.n_nodes() && (closed.worse(c) & listed))
            return false;
        listed |= bit(c);
    }
    return (ever_assigned_mask & ~listed) == 0;
}

std::uint64_t ever_assigned(StudentPartition const& partition)
{
    std::uint64_t out = 0;
    for (auto const& w : partition.classes)
    {
        if (w.assigned != kUnassigned)
            out |= bit(w.assigned);
    }
    return out;
}

std::string teps_label(double tau)
{
    if (tau == 0.0)
        return "TEPS^top";
    if (tau == 100.0)
        return "TEPS^all";
    std::ostringstream os;
    os << "TEPS^" << tau;
    return os.str();
}

}  // namespace teps
