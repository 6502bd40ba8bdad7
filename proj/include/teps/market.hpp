#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace teps
{
using ProgramId = std::int32_t;
using StudentId = std::int32_t;

//! Marker for "not assigned to any program".
inline constexpr ProgramId kUnassigned = -1;

//! Hard limit on the number of programs; feasible sets are 64-bit masks.
inline constexpr int kMaxPrograms = 64;

//! How a program turns intrinsic priorities into ex-post scores.
enum class PriorityMode
{
    lottery_coarse,  //!< coarse group t in {0..n-1}, score (t + lambda) / n
    deterministic,   //!< known score copied verbatim
    exam,            //!< latent score drawn around the student's belief
};

struct Program
{
    ProgramId id = 0;
    int school_id = 0;
    int capacity = 0;
    PriorityMode mode = PriorityMode::lottery_coarse;
    int n_groups = 1;
    //! Real-valued characteristics (quality index, type flags, shares...).
    std::vector<double> attributes;

    bool operator==(Program const&) const = default;
};

//! s(i, c): student i's ex-post score at program c, each entry in [0, 1].
using ScoreMatrix
    = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

//! Rank-order list: distinct program ids, most preferred first.
using Rol = std::vector<ProgramId>;

struct Matching
{
    std::vector<ProgramId> assignment;
    //! Lowest admitted score if full, 0 if undersubscribed, +inf if the
    //! program has no seats at all.
    std::vector<double> cutoffs;

    bool operator==(Matching const&) const = default;
};

struct BlockingPair
{
    StudentId student;
    ProgramId program;

    bool operator==(BlockingPair const&) const = default;
};

//! Throws ValidationError unless every ROL is duplicate-free and in range.
void validate_rols(std::span<Rol const> rols, int n_programs);

//! Student-proposing deferred acceptance.
//!
//! Programs rank applicants by score; exact ties go to the lower student
//! index. Returns the student-optimal stable matching and its cutoffs.
Matching run_da(std::span<Rol const> rols,
                ScoreMatrix const& scores,
                std::span<Program const> programs);

//! Whether program c is feasible for student i at the matching's cutoffs.
//! The student's own assignment always counts as feasible.
bool is_feasible(Matching const& m, ScoreMatrix const& scores, StudentId i,
                 ProgramId c);

//! Every (i, c) with c feasible for i and c preferred to i's assignment
//! under `true_rols`. Empty iff everyone holds the favorite feasible program.
std::vector<BlockingPair> check_stability(Matching const& matching,
                                          std::span<Rol const> true_rols,
                                          ScoreMatrix const& scores);

//! Position of each program on a ROL; -1 when unranked.
std::vector<int> rank_positions(Rol const& rol, int n_programs);

}  // namespace teps
