#include "teps/market.hpp"

#include <algorithm>
#include <string>

#include "teps/errors.hpp"

namespace teps
{
namespace
{
void validate_dimensions(std::size_t n_students, ScoreMatrix const& scores,
                         std::size_t n_programs)
{
    if (static_cast<std::size_t>(scores.rows()) != n_students
        || static_cast<std::size_t>(scores.cols()) != n_programs)
    {
        throw ValidationError(
            "dimension mismatch: scores are " + std::to_string(scores.rows())
            + "x" + std::to_string(scores.cols()) + ", expected "
            + std::to_string(n_students) + "x" + std::to_string(n_programs));
    }
}
}  // namespace

void validate_rols(std::span<Rol const> rols, int n_programs)
{
    std::vector<char> seen(static_cast<std::size_t>(n_programs), 0);
    for (std::size_t i = 0; i < rols.size(); ++i)
    {
        std::fill(seen.begin(), seen.end(), 0);
        for (ProgramId c : rols[i])
        {
            if (c < 0 || c >= n_programs)
            {
                throw ValidationError("invalid program id "
                                      + std::to_string(c) + " in ROL of student "
                                      + std::to_string(i));
            }
            if (seen[c])
            {
                throw ValidationError("duplicate program " + std::to_string(c)
                                      + " in ROL of student "
                                      + std::to_string(i));
            }
            seen[c] = 1;
        }
    }
}

std::vector<int> rank_positions(Rol const& rol, int n_programs)
{
    std::vector<int> pos(static_cast<std::size_t>(n_programs), -1);
    for (std::size_t r = 0; r < rol.size(); ++r)
        pos[rol[r]] = static_cast<int>(r);
    return pos;
}

Matching run_da(std::span<Rol const> rols,
                ScoreMatrix const& scores,
                std::span<Program const> programs)
{
    auto const n_students = rols.size();
    auto const n_programs = programs.size();
    validate_dimensions(n_students, scores, n_programs);
    for (auto const& p : programs)
    {
        if (p.capacity < 0)
            throw ValidationError("negative capacity at program "
                                  + std::to_string(p.id));
    }
    validate_rols(rols, static_cast<int>(n_programs));

    // a is strictly preferred by the program to b
    auto better = [&scores](ProgramId c) {
        return [&scores, c](StudentId a, StudentId b) {
            double const sa = scores(a, c);
            double const sb = scores(b, c);
            return sa > sb || (sa == sb && a < b);
        };
    };

    std::vector<std::vector<StudentId>> held(n_programs);
    for (std::size_t c = 0; c < n_programs; ++c)
        held[c].reserve(static_cast<std::size_t>(programs[c].capacity));

    std::vector<std::size_t> next(n_students, 0);
    std::vector<StudentId> free_list;
    free_list.reserve(n_students);
    for (std::size_t i = n_students; i-- > 0;)
        free_list.push_back(static_cast<StudentId>(i));

    while (!free_list.empty())
    {
        StudentId const i = free_list.back();
        free_list.pop_back();
        auto const& rol = rols[i];
        if (next[i] >= rol.size())
            continue;
        ProgramId const c = rol[next[i]++];
        auto const cap = static_cast<std::size_t>(programs[c].capacity);
        auto& h = held[c];
        auto const cmp = better(c);
        if (h.size() < cap)
        {
            h.push_back(i);
            std::push_heap(h.begin(), h.end(), cmp);
        }
        else if (cap > 0 && cmp(i, h.front()))
        {
            std::pop_heap(h.begin(), h.end(), cmp);
            StudentId const bumped = h.back();
            h.back() = i;
            std::push_heap(h.begin(), h.end(), cmp);
            free_list.push_back(bumped);
        }
        else
        {
            free_list.push_back(i);
        }
    }

    Matching m;
    m.assignment.assign(n_students, kUnassigned);
    m.cutoffs.assign(n_programs, 0.0);
    for (std::size_t c = 0; c < n_programs; ++c)
    {
        auto const cap = static_cast<std::size_t>(programs[c].capacity);
        for (StudentId i : held[c])
            m.assignment[i] = static_cast<ProgramId>(c);
        if (cap == 0)
            m.cutoffs[c] = std::numeric_limits<double>::infinity();
        else if (held[c].size() == cap)
            m.cutoffs[c] = scores(held[c].front(), static_cast<Eigen::Index>(c));
    }
    return m;
}

bool is_feasible(Matching const& m, ScoreMatrix const& scores, StudentId i,
                 ProgramId c)
{
    return m.assignment[i] == c || scores(i, c) >= m.cutoffs[c];
}

std::vector<BlockingPair> check_stability(Matching const& matching,
                                          std::span<Rol const> true_rols,
                                          ScoreMatrix const& scores)
{
    auto const n_programs = matching.cutoffs.size();
    validate_dimensions(true_rols.size(), scores, n_programs);
    if (matching.assignment.size() != true_rols.size())
        throw ValidationError("dimension mismatch: matching covers "
                              + std::to_string(matching.assignment.size())
                              + " students, ROLs cover "
                              + std::to_string(true_rols.size()));
    validate_rols(true_rols, static_cast<int>(n_programs));

    std::vector<BlockingPair> out;
    for (std::size_t i = 0; i < true_rols.size(); ++i)
    {
        auto const& rol = true_rols[i];
        auto const sid = static_cast<StudentId>(i);
        ProgramId const a = matching.assignment[i];
        for (ProgramId c : rol)
        {
            if (c == a)
                break;  // everything after is worse than the assignment
            if (is_feasible(matching, scores, sid, c))
                out.push_back({sid, c});
        }
    }
    return out;
}

}  // namespace teps
