#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "teps/estimation.hpp"
#include "teps/inference.hpp"
#include "teps/selection.hpp"
#include "teps/uncertainty.hpp"

namespace teps
{
namespace fs = std::filesystem;

//---------------------------------------------------------------------------//
// Tabular input
//---------------------------------------------------------------------------//

//! Comma-separated table with a header row. Blank lines and lines starting
//! with '#' are skipped; fields are trimmed and never quoted.
struct CsvTable
{
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line;  //!< 1-based source line of each row

    int column(std::string const& name) const;  //!< -1 when absent
    int require(std::string const& name) const;
};

CsvTable read_csv(fs::path const& path);
CsvTable parse_csv(std::string const& text, std::string const& source);

struct MarketData
{
    Economy economy;
    std::vector<Rol> rols;
    //! Optional student-program variables (name -> k x C), e.g. distance.
    std::map<std::string, Economy::RowMatrix> pair_vars;

    bool operator==(MarketData const&) const = default;
};

struct InputPaths
{
    fs::path programs;
    fs::path students;
    fs::path rols;
    fs::path priorities;  //!< optional long-format priorities
    fs::path pair_vars;   //!< optional student_id,program_id,<vars...>
};

/*!
 * programs.csv: id, school_id, capacity, rule_mode, n_groups, attributes...
 * students.csv: id, covariates..., and prio_<program> / zone_<program>
 * columns unless priorities.csv (student_id, program_id, priority[, zone])
 * is given. rols.csv: student_id, rank, program_id with ranks 1, 2, ...
 * Program and student ids must be 0..n-1.
 */
MarketData parse_inputs(InputPaths const& paths, TieBreak tiebreak = TieBreak::stb,
                        double exam_spread = 0.5);

//! Writes programs.csv, students.csv, rols.csv and, when present,
//! pair_vars.csv into `dir`; numbers round-trip exactly.
InputPaths write_inputs(MarketData const& data, fs::path const& dir);

//---------------------------------------------------------------------------//
// Structured artifacts
//---------------------------------------------------------------------------//

std::string to_json(FeasiblePartition const& partition, int n_programs);
std::pair<FeasiblePartition, int> partition_from_json(std::string const& text);

//! Relation sets per method label: {label: {student: [[x, y], ...]}}.
using RelationTable = std::map<std::string, std::vector<RelationSet>>;
std::string to_json(RelationTable const& relations, int n_nodes);
RelationTable relations_from_json(std::string const& text);

std::string to_json(std::map<std::string, EstimateSummary> const& estimates,
                    std::map<std::string, std::vector<double>> const& psrf,
                    std::vector<std::string> const& param_names);
std::map<std::string, EstimateSummary> estimates_from_json(std::string const& text);

std::string to_json(SelectionResult const& selection);

//! Retained draws: chain, draw, beta..., sigma2 per type.
void write_draws(PosteriorDraws const& draws, fs::path const& path,
                 std::string const& header);
PosteriorDraws read_draws(fs::path const& path);

std::string read_text(fs::path const& path);
void write_text(fs::path const& path, std::string const& text);

//---------------------------------------------------------------------------//
// Run configuration
//---------------------------------------------------------------------------//

/*!
 * Plain-text key=value configuration. Unknown keys are rejected; keys that
 * name input files must point at existing files.
 */
class RunConfig
{
  public:
    RunConfig() = default;

    static RunConfig parse(std::string const& text, std::string const& source);
    static RunConfig load(fs::path const& path);

    //! Set a key, validating its name.
    void set(std::string const& key, std::string const& value);
    bool has(std::string const& key) const { return values_.contains(key); }
    std::map<std::string, std::string> const& values() const { return values_; }

    std::string text(std::string const& key, std::string const& fallback) const;
    std::int64_t integer(std::string const& key, std::int64_t fallback) const;
    std::uint64_t seed() const;
    double real(std::string const& key, double fallback) const;
    bool flag(std::string const& key, bool fallback) const;
    std::vector<double> reals(std::string const& key,
                              std::vector<double> const& fallback) const;
    std::vector<std::string> list(std::string const& key,
                                  std::vector<std::string> const& fallback) const;

    //! Throws ValidationError when an input-file key names a missing file.
    void check_files() const;

    //! FNV-1a over the sorted key=value lines, excluding out_dir and threads.
    std::string hash() const;
    //! Canonical text form, one key=value per line.
    std::string str() const;

    static std::vector<std::string> const& known_keys();

  private:
    std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a(std::string const& text);

}  // namespace teps
