#include "teps/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "teps/errors.hpp"
#include "teps/parallel.hpp"
#include "teps/random.hpp"

namespace teps
{
namespace
{
template<class M>
bool same_matrix(M const& a, M const& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

double lottery_value(Economy const& e, std::span<double const> lottery,
                     int c)
{
    return e.tiebreak == TieBreak::stb ? lottery[0] : lottery[c];
}

std::uint64_t bit(int c)
{
    return std::uint64_t{1} << c;
}
}  // namespace

bool Economy::operator==(Economy const& other) const
{
    return programs == other.programs
           && attribute_names == other.attribute_names
           && tiebreak == other.tiebreak
           && same_matrix(intrinsic, other.intrinsic)
           && same_matrix(zone, other.zone)
           && exam_spread == other.exam_spread
           && covariate_names == other.covariate_names
           && same_matrix(covariates, other.covariates);
}

void validate_economy(Economy const& e)
{
    int const n_c = e.n_programs();
    int const k = e.n_students();
    if (n_c > kMaxPrograms)
        throw ValidationError("at most " + std::to_string(kMaxPrograms)
                              + " programs are supported, got "
                              + std::to_string(n_c));
    if (e.intrinsic.cols() != n_c)
        throw ValidationError("intrinsic priorities have "
                              + std::to_string(e.intrinsic.cols())
                              + " columns for " + std::to_string(n_c)
                              + " programs");
    bool const zoned = e.zone.size() > 0;
    if (zoned && (e.zone.rows() != k || e.zone.cols() != n_c))
        throw ValidationError("zone matrix shape does not match intrinsic");
    if (e.covariates.size() > 0 && e.covariates.rows() != k)
        throw ValidationError("covariate rows do not match student count");
    if (!(e.exam_spread > 0.0 && e.exam_spread <= 1.0))
        throw ValidationError("exam spread must lie in (0, 1]");

    for (int c = 0; c < n_c; ++c)
    {
        auto const& p = e.programs[c];
        if (p.id != c)
            throw ValidationError("program ids must be dense, found "
                                  + std::to_string(p.id) + " at position "
                                  + std::to_string(c));
        if (p.capacity < 0)
            throw ValidationError("negative capacity at program "
                                  + std::to_string(c));
        if (p.attributes.size() != e.attribute_names.size())
            throw ValidationError("program " + std::to_string(c) + " has "
                                  + std::to_string(p.attributes.size())
                                  + " attributes, expected "
                                  + std::to_string(e.attribute_names.size()));
        if (p.mode == PriorityMode::lottery_coarse && p.n_groups < 1)
            throw ValidationError("program " + std::to_string(c)
                                  + " needs at least one priority group");
        for (int i = 0; i < k; ++i)
        {
            double const t = e.intrinsic(i, c);
            if (p.mode == PriorityMode::lottery_coarse)
            {
                double const g = t + (zoned ? e.zone(i, c) : 0);
                if (g != std::floor(g) || g < 0 || g >= p.n_groups)
                {
                    throw ValidationError(
                        "priority group " + std::to_string(g)
                        + " out of range for student " + std::to_string(i)
                        + " at program " + std::to_string(c) + " with "
                        + std::to_string(p.n_groups) + " groups");
                }
            }
            else if (!(t >= 0.0 && t <= 1.0))
            {
                throw ValidationError(
                    "score " + std::to_string(t) + " outside [0, 1] for student "
                    + std::to_string(i) + " at program " + std::to_string(c));
            }
        }
    }
}

LotteryDraw draw_lottery(Economy const& economy, RandomStream& rng)
{
    auto const k = static_cast<std::size_t>(economy.n_students());
    auto const n_c = static_cast<std::size_t>(economy.n_programs());
    LotteryDraw d;
    d.tiebreak = economy.tiebreak;
    d.lottery.resize(economy.tiebreak == TieBreak::stb ? k : k * n_c);
    for (auto& x : d.lottery)
        x = rng.uniform();
    bool const any_exam
        = std::any_of(economy.programs.begin(), economy.programs.end(),
                      [](Program const& p) { return p.mode == PriorityMode::exam; });
    if (any_exam)
    {
        d.exam.resize(k);
        for (auto& x : d.exam)
            x = rng.uniform();
    }
    return d;
}

namespace detail
{
void student_scores(Economy const& e, int i, std::span<double const> lottery,
                    double exam, std::span<double> out)
{
    bool const zoned = e.zone.size() > 0;
    for (int c = 0; c < e.n_programs(); ++c)
    {
        auto const& p = e.programs[c];
        double const t = e.intrinsic(i, c);
        switch (p.mode)
        {
            case PriorityMode::lottery_coarse: {
                double const g = t + (zoned ? e.zone(i, c) : 0);
                out[c] = (g + lottery_value(e, lottery, c)) / p.n_groups;
                break;
            }
            case PriorityMode::deterministic:
                out[c] = t;
                break;
            case PriorityMode::exam:
                out[c] = std::clamp(
                    (1.0 - e.exam_spread) * t + e.exam_spread * exam, 0.0, 1.0);
                break;
        }
    }
}

void realize_into(Economy const& e, LotteryDraw const& draw, ScoreMatrix& out)
{
    int const k = e.n_students();
    int const n_c = e.n_programs();
    out.resize(k, n_c);
    std::size_t const stride = e.tiebreak == TieBreak::stb ? 1 : n_c;
    for (int i = 0; i < k; ++i)
    {
        std::span<double const> lot(draw.lottery.data() + i * stride, stride);
        double const exam = draw.exam.empty() ? 0.0 : draw.exam[i];
        student_scores(e, i, lot, exam,
                       std::span<double>(out.row(i).data(), n_c));
    }
}
}  // namespace detail

ScoreMatrix realize_scores(Economy const& economy, LotteryDraw const& draw)
{
    validate_economy(economy);
    auto const k = static_cast<std::size_t>(economy.n_students());
    auto const n_c = static_cast<std::size_t>(economy.n_programs());
    if (draw.tiebreak != economy.tiebreak)
        throw ValidationError("lottery draw tie-breaking does not match economy");
    std::size_t const expected
        = economy.tiebreak == TieBreak::stb ? k : k * n_c;
    if (draw.lottery.size() != expected)
        throw ValidationError("lottery draw has "
                              + std::to_string(draw.lottery.size())
                              + " values, expected " + std::to_string(expected));
    for (double x : draw.lottery)
    {
        if (!(x >= 0.0 && x <= 1.0))
            throw ValidationError("lottery value outside [0, 1]");
    }
    bool const any_exam
        = std::any_of(economy.programs.begin(), economy.programs.end(),
                      [](Program const& p) { return p.mode == PriorityMode::exam; });
    if (any_exam && draw.exam.size() != k)
        throw ValidationError("missing exam draws");
    ScoreMatrix out;
    detail::realize_into(economy, draw, out);
    return out;
}

std::vector<std::vector<double>>
simulate_cutoff_distribution(Economy const& economy,
                             std::span<Rol const> rols,
                             int n_draws,
                             std::uint64_t seed,
                             int threads)
{
    if (n_draws < 1)
        throw ValidationError("n_draws must be positive");
    validate_economy(economy);
    if (rols.size() != static_cast<std::size_t>(economy.n_students()))
        throw ValidationError("ROL count does not match student count");
    validate_rols(rols, economy.n_programs());

    std::vector<std::vector<double>> out(static_cast<std::size_t>(n_draws));
    parallel_for(out.size(), threads, [&](std::size_t d) {
        RandomStream rng(seed, {tag(StreamTag::lottery), d});
        ScoreMatrix scores;
        detail::realize_into(economy, draw_lottery(economy, rng), scores);
        out[d] = run_da(rols, scores, economy.programs).cutoffs;
    });
    return out;
}

//---------------------------------------------------------------------------//

ProgramId rol_best(std::uint64_t mask, Rol const& rol)
{
    for (ProgramId c : rol)
    {
        if (mask & bit(c))
            return c;
    }
    return kUnassigned;
}

StudentPartition
make_student_partition(std::vector<std::pair<std::uint64_t, std::uint64_t>> counts,
                       Rol const& rol)
{
    std::sort(counts.begin(), counts.end());
    StudentPartition p;
    for (auto const& [mask, n] : counts)
    {
        p.n_draws += n;
        if (!p.classes.empty() && p.classes.back().feasible == mask)
        {
            p.classes.back().count += n;
            continue;
        }
        p.classes.push_back({mask, rol_best(mask, rol), n, 0.0});
    }
    std::erase_if(p.classes, [](FeasibleClass const& w) { return w.count == 0; });
    std::stable_sort(p.classes.begin(), p.classes.end(),
                     [](FeasibleClass const& a, FeasibleClass const& b) {
                         return a.count > b.count;
                     });
    for (auto& w : p.classes)
        w.prob = static_cast<double>(w.count) / static_cast<double>(p.n_draws);
    return p;
}

void validate_partition(StudentPartition const& p, Rol const& rol)
{
    if (p.classes.empty() || p.n_draws == 0)
        throw ValidationError("empty feasible-set partition");
    std::uint64_t total = 0;
    for (std::size_t w = 0; w < p.classes.size(); ++w)
    {
        auto const& cl = p.classes[w];
        total += cl.count;
        if (cl.assigned != rol_best(cl.feasible, rol))
            throw ValidationError(
                "class assignment is not the ROL-best feasible program");
        if (w > 0)
        {
            auto const& prev = p.classes[w - 1];
            if (prev.count < cl.count
                || (prev.count == cl.count && prev.feasible >= cl.feasible))
                throw ValidationError("partition classes are not sorted");
        }
    }
    if (total != p.n_draws)
        throw ValidationError("class counts do not sum to the draw count");
}

namespace
{
StudentPartition
aggregate(std::vector<std::uint64_t>& masks, Rol const& rol)
{
    std::sort(masks.begin(), masks.end());
    std::vector<std::pair<std::uint64_t, std::uint64_t>> counts;
    for (std::size_t a = 0; a < masks.size();)
    {
        std::size_t b = a;
        while (b < masks.size() && masks[b] == masks[a])
            ++b;
        counts.emplace_back(masks[a], b - a);
        a = b;
    }
    return make_student_partition(std::move(counts), rol);
}

FeasiblePartition joint_partition(Economy const& e, std::span<Rol const> rols,
                                  PartitionOptions const& opt)
{
    auto const k = static_cast<std::size_t>(e.n_students());
    auto const n_draws = static_cast<std::size_t>(opt.n_draws);
    int const n_c = e.n_programs();
    // masks[d * k + i]
    std::vector<std::uint64_t> masks(n_draws * k);
    parallel_for(n_draws, opt.threads, [&](std::size_t d) {
        RandomStream rng(opt.seed, {tag(StreamTag::lottery), d});
        ScoreMatrix scores;
        detail::realize_into(e, draw_lottery(e, rng), scores);
        auto const m = run_da(rols, scores, e.programs);
        for (std::size_t i = 0; i < k; ++i)
        {
            std::uint64_t b = 0;
            for (int c = 0; c < n_c; ++c)
            {
                if (scores(i, c) >= m.cutoffs[c])
                    b |= bit(c);
            }
            if (m.assignment[i] != kUnassigned)
                b |= bit(m.assignment[i]);
            masks[d * k + i] = b;
        }
    });

    FeasiblePartition out(k);
    parallel_for(k, opt.threads, [&](std::size_t i) {
        std::vector<std::uint64_t> mine(n_draws);
        for (std::size_t d = 0; d < n_draws; ++d)
            mine[d] = masks[d * k + i];
        out[i] = aggregate(mine, rols[i]);
    });
    return out;
}

FeasiblePartition independent_partition(Economy const& e,
                                        std::span<Rol const> rols,
                                        PartitionOptions const& opt)
{
    auto const cutoffs = simulate_cutoff_distribution(e, rols, opt.n_draws,
                                                      opt.seed, opt.threads);
    auto const k = static_cast<std::size_t>(e.n_students());
    int const n_c = e.n_programs();
    int const n_own = opt.n_own_draws > 0 ? opt.n_own_draws : opt.n_draws;
    bool const any_exam
        = std::any_of(e.programs.begin(), e.programs.end(),
                      [](Program const& p) { return p.mode == PriorityMode::exam; });
    std::size_t const n_lot = e.tiebreak == TieBreak::stb ? 1 : n_c;

    FeasiblePartition out(k);
    parallel_for(k, opt.threads, [&](std::size_t i) {
        RandomStream rng(opt.seed, {tag(StreamTag::own_score), i});
        std::vector<double> lot(n_lot);
        std::vector<double> s(static_cast<std::size_t>(n_c));
        std::vector<std::uint64_t> mine(static_cast<std::size_t>(n_own));
        for (auto& b : mine)
        {
            for (auto& x : lot)
                x = rng.uniform();
            double const exam = any_exam ? rng.uniform() : 0.0;
            auto const& p = cutoffs[rng.below(cutoffs.size())];
            detail::student_scores(e, static_cast<int>(i), lot, exam, s);
            b = 0;
            for (int c = 0; c < n_c; ++c)
            {
                if (s[c] >= p[c])
                    b |= bit(c);
            }
        }
        out[i] = aggregate(mine, rols[i]);
    });
    return out;
}
}  // namespace

FeasiblePartition build_feasible_partition(Economy const& economy,
                                           std::span<Rol const> rols,
                                           PartitionOptions const& options)
{
    if (options.n_draws < 1)
        throw ValidationError("n_draws must be positive");
    if (options.n_own_draws < 0)
        throw ValidationError("n_own_draws must be non-negative");
    validate_economy(economy);
    if (rols.size() != static_cast<std::size_t>(economy.n_students()))
        throw ValidationError("ROL count does not match student count");
    validate_rols(rols, economy.n_programs());
    return options.mode == PartitionMode::joint
               ? joint_partition(economy, rols, options)
               : independent_partition(economy, rols, options);
}

std::vector<double> assignment_probabilities(StudentPartition const& p,
                                             int n_programs)
{
    std::vector<double> out(static_cast<std::size_t>(n_programs), 0.0);
    for (auto const& w : p.classes)
    {
        if (w.assigned != kUnassigned)
            out[w.assigned] += w.prob;
    }
    return out;
}

std::vector<double> admission_probabilities(StudentPartition const& p,
                                            int n_programs)
{
    std::vector<double> out(static_cast<std::size_t>(n_programs), 0.0);
    for (auto const& w : p.classes)
    {
        for (int c = 0; c < n_programs; ++c)
        {
            if (w.feasible & bit(c))
                out[c] += w.prob;
        }
    }
    return out;
}

}  // namespace teps
