#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "teps/market.hpp"

namespace teps
{
enum class TieBreak
{
    stb,  //!< one lottery number per student, shared by all lottery programs
    mtb,  //!< an independent lottery number per student-program pair
};

//---------------------------------------------------------------------------//
/*!
 * A school-choice market: programs with their priority rules, students with
 * their intrinsic priorities and covariates.
 *
 * `intrinsic(i, c)` is interpreted per program mode: the coarse priority
 * group (an integer in [0, n_groups)) at lottery programs, the known score
 * at deterministic programs, and the score belief at exam programs.
 * `zone(i, c)` is a residence bonus added to the coarse group; it is either
 * empty (no zoning) or the same shape as `intrinsic`.
 */
struct Economy
{
    using RowMatrix
        = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using IntMatrix
        = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    std::vector<Program> programs;
    std::vector<std::string> attribute_names;
    TieBreak tiebreak = TieBreak::stb;
    RowMatrix intrinsic;
    IntMatrix zone;
    //! Weight of the random component in exam scores, in (0, 1].
    double exam_spread = 0.5;
    std::vector<std::string> covariate_names;
    RowMatrix covariates;

    int n_students() const { return static_cast<int>(intrinsic.rows()); }
    int n_programs() const { return static_cast<int>(programs.size()); }

    bool operator==(Economy const& other) const;
};

//! Throws ValidationError when groups, scores or shapes are out of range.
void validate_economy(Economy const& economy);

//! Realized tie-breaking randomness for one state of the world.
struct LotteryDraw
{
    TieBreak tiebreak = TieBreak::stb;
    //! STB: one value per student. MTB: row-major student x program.
    std::vector<double> lottery;
    //! One exam-noise value per student, shared across exam programs.
    std::vector<double> exam;
};

LotteryDraw draw_lottery(Economy const& economy, class RandomStream& rng);

//! Composite ex-post scores: (t + zone + lambda) / n_c at lottery programs,
//! known scores at deterministic programs, noisy beliefs at exam programs.
ScoreMatrix realize_scores(Economy const& economy, LotteryDraw const& draw);

//! Cutoff vectors of `n_draws` independent lottery draws run through DA.
//! Draw d uses the stream (seed, lottery, d), so output is independent of the
//! thread count.
std::vector<std::vector<double>>
simulate_cutoff_distribution(Economy const& economy,
                             std::span<Rol const> rols,
                             int n_draws,
                             std::uint64_t seed,
                             int threads = 1);

//---------------------------------------------------------------------------//
// Feasible-set partitions
//---------------------------------------------------------------------------//

struct FeasibleClass
{
    std::uint64_t feasible = 0;  //!< bit c set when program c is feasible
    ProgramId assigned = kUnassigned;
    std::uint64_t count = 0;     //!< number of draws in the class
    double prob = 0.0;

    bool operator==(FeasibleClass const&) const = default;
};

//! One student's equivalence classes, sorted by descending count and then
//! ascending feasible-set mask.
struct StudentPartition
{
    std::uint64_t n_draws = 0;
    std::vector<FeasibleClass> classes;

    bool operator==(StudentPartition const&) const = default;
};

using FeasiblePartition = std::vector<StudentPartition>;

enum class PartitionMode
{
    joint,        //!< cutoffs and own score from the same DA draw
    independent,  //!< own scores redrawn against resampled cutoff vectors
};

struct PartitionOptions
{
    PartitionMode mode = PartitionMode::joint;
    //! JOINT: number of DA draws. INDEPENDENT: number of cutoff draws.
    int n_draws = 1000;
    //! INDEPENDENT only: own-score draws per student (0 means n_draws).
    int n_own_draws = 0;
    std::uint64_t seed = 0;
    int threads = 1;
};

//! Highest-ranked program of `mask` on the ROL, or kUnassigned.
ProgramId rol_best(std::uint64_t mask, Rol const& rol);

//! Build a sorted partition from (mask, count) pairs; duplicate masks merge.
StudentPartition
make_student_partition(std::vector<std::pair<std::uint64_t, std::uint64_t>> counts,
                       Rol const& rol);

//! Throws ValidationError if the partition breaks its invariants for `rol`.
void validate_partition(StudentPartition const& partition, Rol const& rol);

FeasiblePartition build_feasible_partition(Economy const& economy,
                                           std::span<Rol const> rols,
                                           PartitionOptions const& options);

//! Probability that each program is the student's assignment.
std::vector<double> assignment_probabilities(StudentPartition const& p,
                                             int n_programs);

//! Probability that each program is feasible for the student.
std::vector<double> admission_probabilities(StudentPartition const& p,
                                            int n_programs);

namespace detail
{
//! Unchecked score realization into a preallocated matrix.
void realize_into(Economy const& economy, LotteryDraw const& draw,
                  ScoreMatrix& out);

//! One student's scores given the student's own lottery values (size 1 for STB,
//! n_programs for MTB) and exam draw.
void student_scores(Economy const& economy, int student,
                    std::span<double const> lottery, double exam,
                    std::span<double> out);
}  // namespace detail

}  // namespace teps
