#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "teps/market.hpp"
#include "teps/uncertainty.hpp"

namespace teps
{
//---------------------------------------------------------------------------//
/*!
 * A set of ordered program pairs (x, y) meaning "x is inferred preferred to
 * y", stored as one bitmask of dispreferred programs per program.
 *
 * Node ids run over [0, n_nodes). With an outside option the extra node
 * n_programs stands for "unassigned".
 */
class RelationSet
{
  public:
    RelationSet() = default;
    explicit RelationSet(int n_nodes);

    int n_nodes() const { return static_cast<int>(worse_.size()); }

    //! Add (x, y); throws ValidationError on x == y or out-of-range ids.
    void add(int x, int y);
    bool contains(int x, int y) const
    {
        return (worse_[x] >> y) & 1u;
    }
    //! Programs inferred worse than x.
    std::uint64_t worse(int x) const { return worse_[x]; }
    //! Programs inferred better than y.
    std::uint64_t better(int y) const;

    std::size_t size() const;
    bool empty() const { return size() == 0; }
    //! Pairs in lexicographic order.
    std::vector<std::pair<int, int>> pairs() const;

    void merge(RelationSet const& other);
    bool subset_of(RelationSet const& other) const;

    bool operator==(RelationSet const&) const = default;

  private:
    std::vector<std::uint64_t> worse_;
};

//! Classes from the most likely onward while the cumulative draw count stays
//! within tau percent of all draws; the most likely class is always kept.
StudentPartition truncate_partition(StudentPartition const& partition,
                                    double tau);

//! Relations from one assigned program; the family is ordered by the
//! assigned program's ROL rank.
struct StabilityGroup
{
    ProgramId assigned = kUnassigned;
    RelationSet relations;
};

struct InferenceOptions
{
    //! Treat "unassigned" as node n_programs and emit its relations.
    bool outside_option = false;
};

std::vector<StabilityGroup>
stability_relations(StudentPartition const& classes, Rol const& rol,
                    int n_programs, InferenceOptions const& options = {});

//! Digraph reachability; throws CycleError naming a cycle on cyclic input.
RelationSet transitive_closure(RelationSet const& relations);

RelationSet teps_infer(StudentPartition const& partition, Rol const& rol,
                       double tau, int n_programs,
                       InferenceOptions const& options = {});

//! Ranked programs in ROL order, all ranked above every unranked program of
//! `universe` (a mask; all n_programs when omitted).
RelationSet wtt_infer(Rol const& rol, int n_programs,
                      std::uint64_t universe = ~std::uint64_t{0});

//! Whether `candidate` lists every ever-assigned program and never ranks a
//! program above one it is inferred worse than.
bool is_consistent_rol(Rol const& candidate, RelationSet const& closed,
                       std::uint64_t ever_assigned);

//! Union of assigned programs over the partition's classes.
std::uint64_t ever_assigned(StudentPartition const& partition);

//! "TEPS^top" for 0, "TEPS^all" for 100, "TEPS^<tau>" otherwise.
std::string teps_label(double tau);
inline constexpr char const* kWttLabel = "WTT";

}  // namespace teps
