#include "teps/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

#include "teps/errors.hpp"

namespace teps
{
using nlohmann::json;

namespace
{
std::string trim(std::string s)
{
    auto const not_space = [](unsigned char ch) { return !std::isspace(ch); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split(std::string const& s, char sep)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(s);
    while (std::getline(is, field, sep))
        out.push_back(trim(field));
    if (!s.empty() && s.back() == sep)
        out.emplace_back();
    return out;
}

std::string where(CsvTable const& t, std::size_t row)
{
    return t.source + " line " + std::to_string(t.line[row]);
}

double to_real(std::string const& s, std::string const& context)
{
    double v = 0;
    auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        throw ValidationError(context + ": '" + s + "' is not a finite number");
    return v;
}

std::int64_t to_int(std::string const& s, std::string const& context)
{
    std::int64_t v = 0;
    auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ValidationError(context + ": '" + s + "' is not an integer");
    return v;
}

// Shortest text that parses back to the same double.
std::string num(double v)
{
    char buf[32];
    auto const [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

int dense_id(std::string const& s, int n, std::string const& what,
             std::string const& context)
{
    auto const v = to_int(s, context);
    if (v < 0 || v >= n)
        throw ValidationError(context + ": unknown " + what + " id " + s);
    return static_cast<int>(v);
}

PriorityMode parse_mode(std::string const& s, std::string const& context)
{
    if (s == "lottery")
        return PriorityMode::lottery_coarse;
    if (s == "deterministic")
        return PriorityMode::deterministic;
    if (s == "exam")
        return PriorityMode::exam;
    throw ValidationError(context + ": rule_mode must be lottery, deterministic or exam");
}

std::string mode_name(PriorityMode m)
{
    switch (m)
    {
    case PriorityMode::lottery_coarse: return "lottery";
    case PriorityMode::deterministic: return "deterministic";
    case PriorityMode::exam: return "exam";
    }
    return "?";
}

json parse_json(std::string const& text, std::string const& what)
{
    try
    {
        return json::parse(text);
    }
    catch (json::exception const& e)
    {
        throw ValidationError("malformed " + what + " JSON: " + e.what());
    }
}
}  // namespace

//---------------------------------------------------------------------------//

int CsvTable::column(std::string const& name) const
{
    auto const it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

int CsvTable::require(std::string const& name) const
{
    int const c = column(name);
    if (c < 0)
        throw ValidationError(source + ": missing column '" + name + "'");
    return c;
}

CsvTable parse_csv(std::string const& text, std::string const& source)
{
    CsvTable t;
    t.source = source;
    std::istringstream is(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw))
    {
        ++lineno;
        if (!raw.empty() && raw.back() == '\r')
            raw.pop_back();
        auto const s = trim(raw);
        if (s.empty() || s.front() == '#')
            continue;
        auto fields = split(s, ',');
        if (t.header.empty())
        {
            t.header = std::move(fields);
            std::set<std::string> seen;
            for (auto const& h : t.header)
            {
                if (h.empty() || !seen.insert(h).second)
                    throw ValidationError(source + ": empty or duplicate column '" + h + "'");
            }
            continue;
        }
        if (fields.size() != t.header.size())
            throw ValidationError(source + " line " + std::to_string(lineno) + ": expected "
                                  + std::to_string(t.header.size()) + " fields, found "
                                  + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line.push_back(lineno);
    }
    if (t.header.empty())
        throw ValidationError(source + ": no header row");
    return t;
}

std::string read_text(fs::path const& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw ValidationError("cannot read " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void write_text(fs::path const& path, std::string const& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f || !(f << text))
        throw ValidationError("cannot write " + path.string());
}

CsvTable read_csv(fs::path const& path)
{
    return parse_csv(read_text(path), path.string());
}

//---------------------------------------------------------------------------//

MarketData parse_inputs(InputPaths const& paths, TieBreak tiebreak, double exam_spread)
{
    MarketData out;
    Economy& e = out.economy;
    e.tiebreak = tiebreak;
    e.exam_spread = exam_spread;

    // programs
    auto const pt = read_csv(paths.programs);
    int const c_id = pt.require("id"), c_school = pt.require("school_id"),
              c_cap = pt.require("capacity"), c_mode = pt.require("rule_mode"),
              c_groups = pt.require("n_groups");
    std::vector<int> attr_cols;
    for (int j = 0; j < static_cast<int>(pt.header.size()); ++j)
    {
        if (j != c_id && j != c_school && j != c_cap && j != c_mode && j != c_groups)
        {
            attr_cols.push_back(j);
            e.attribute_names.push_back(pt.header[j]);
        }
    }
    int const n_c = static_cast<int>(pt.rows.size());
    if (n_c == 0)
        throw ValidationError(pt.source + ": no programs");
    if (n_c > kMaxPrograms)
        throw ValidationError(pt.source + ": at most 64 programs are supported");
    e.programs.resize(static_cast<std::size_t>(n_c));
    std::vector<char> seen(static_cast<std::size_t>(n_c), 0);
    for (std::size_t r = 0; r < pt.rows.size(); ++r)
    {
        auto const& row = pt.rows[r];
        auto const ctx = where(pt, r);
        int const id = dense_id(row[c_id], n_c, "program", ctx);
        if (seen[id]++)
            throw ValidationError(ctx + ": duplicate program id " + row[c_id]);
        Program& p = e.programs[id];
        p.id = id;
        p.school_id = static_cast<int>(to_int(row[c_school], ctx));
        p.capacity = static_cast<int>(to_int(row[c_cap], ctx));
        if (p.capacity < 0)
            throw ValidationError(ctx + ": capacity < 0");
        p.mode = parse_mode(row[c_mode], ctx);
        p.n_groups = static_cast<int>(to_int(row[c_groups], ctx));
        for (int j : attr_cols)
            p.attributes.push_back(to_real(row[j], ctx));
    }

    // students
    auto const st = read_csv(paths.students);
    int const s_id = st.require("id");
    int const k = static_cast<int>(st.rows.size());
    bool const long_prio = !paths.priorities.empty();
    std::vector<int> prio_col(static_cast<std::size_t>(n_c), -1), zone_col(prio_col);
    std::vector<int> cov_cols;
    for (int j = 0; j < static_cast<int>(st.header.size()); ++j)
    {
        auto const& h = st.header[j];
        if (j == s_id)
            continue;
        auto program_of = [&](std::string const& prefix) {
            return dense_id(h.substr(prefix.size()), n_c, "program",
                            st.source + " column " + h);
        };
        if (h.rfind("prio_", 0) == 0)
            prio_col[program_of("prio_")] = j;
        else if (h.rfind("zone_", 0) == 0)
            zone_col[program_of("zone_")] = j;
        else
        {
            cov_cols.push_back(j);
            e.covariate_names.push_back(h);
        }
    }
    bool const zoned = std::any_of(zone_col.begin(), zone_col.end(), [](int v) { return v >= 0; });
    e.intrinsic = Economy::RowMatrix::Zero(k, n_c);
    if (zoned)
        e.zone = Economy::IntMatrix::Zero(k, n_c);
    e.covariates.resize(k, static_cast<Eigen::Index>(cov_cols.size()));
    std::vector<char> seen_s(static_cast<std::size_t>(k), 0);
    for (std::size_t r = 0; r < st.rows.size(); ++r)
    {
        auto const& row = st.rows[r];
        auto const ctx = where(st, r);
        int const i = dense_id(row[s_id], k, "student", ctx);
        if (seen_s[i]++)
            throw ValidationError(ctx + ": duplicate student id " + row[s_id]);
        for (std::size_t j = 0; j < cov_cols.size(); ++j)
            e.covariates(i, static_cast<Eigen::Index>(j)) = to_real(row[cov_cols[j]], ctx);
        for (int c = 0; c < n_c; ++c)
        {
            if (prio_col[c] >= 0)
                e.intrinsic(i, c) = to_real(row[prio_col[c]], ctx);
            else if (!long_prio)
                throw ValidationError(st.source + ": missing column 'prio_"
                                      + std::to_string(c) + "'");
            if (zone_col[c] >= 0)
                e.zone(i, c) = static_cast<int>(to_int(row[zone_col[c]], ctx));
        }
    }

    if (long_prio)
    {
        auto const lt = read_csv(paths.priorities);
        int const l_s = lt.require("student_id"), l_c = lt.require("program_id"),
                  l_p = lt.require("priority");
        int const l_z = lt.column("zone");
        if (l_z >= 0 && !zoned)
            e.zone = Economy::IntMatrix::Zero(k, n_c);
        std::set<std::pair<int, int>> given;
        for (std::size_t r = 0; r < lt.rows.size(); ++r)
        {
            auto const& row = lt.rows[r];
            auto const ctx = where(lt, r);
            int const i = dense_id(row[l_s], k, "student", ctx);
            int const c = dense_id(row[l_c], n_c, "program", ctx);
            if (!given.insert({i, c}).second)
                throw ValidationError(ctx + ": duplicate (student, program) priority");
            e.intrinsic(i, c) = to_real(row[l_p], ctx);
            if (l_z >= 0)
                e.zone(i, c) = static_cast<int>(to_int(row[l_z], ctx));
        }
    }
    validate_economy(e);

    // rols
    auto const rt = read_csv(paths.rols);
    int const r_s = rt.require("student_id"), r_rank = rt.require("rank"),
              r_c = rt.require("program_id");
    std::vector<std::map<int, int>> ranked(static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < rt.rows.size(); ++r)
    {
        auto const& row = rt.rows[r];
        auto const ctx = where(rt, r);
        int const i = dense_id(row[r_s], k, "student", ctx);
        int const c = dense_id(row[r_c], n_c, "program", ctx);
        auto const rank = to_int(row[r_rank], ctx);
        if (rank < 1 || rank > n_c)
            throw ValidationError(ctx + ": rank " + row[r_rank] + " out of range");
        if (!ranked[i].emplace(static_cast<int>(rank), c).second)
            throw ValidationError(ctx + ": duplicate (student, rank) (" + row[r_s] + ", "
                                  + row[r_rank] + ")");
    }
    out.rols.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
    {
        int expect = 1;
        for (auto const& [rank, c] : ranked[i])
        {
            if (rank != expect++)
                throw ValidationError(rt.source + ": ranks of student " + std::to_string(i)
                                      + " are not 1, 2, ...");
            out.rols[i].push_back(c);
        }
    }
    validate_rols(out.rols, n_c);

    if (!paths.pair_vars.empty())
    {
        auto const vt = read_csv(paths.pair_vars);
        int const v_s = vt.require("student_id"), v_c = vt.require("program_id");
        std::vector<int> cols;
        for (int j = 0; j < static_cast<int>(vt.header.size()); ++j)
        {
            if (j != v_s && j != v_c)
            {
                cols.push_back(j);
                out.pair_vars[vt.header[j]] = Economy::RowMatrix::Constant(
                    k, n_c, std::numeric_limits<double>::quiet_NaN());
            }
        }
        for (std::size_t r = 0; r < vt.rows.size(); ++r)
        {
            auto const& row = vt.rows[r];
            auto const ctx = where(vt, r);
            int const i = dense_id(row[v_s], k, "student", ctx);
            int const c = dense_id(row[v_c], n_c, "program", ctx);
            for (int j : cols)
                out.pair_vars[vt.header[j]](i, c) = to_real(row[j], ctx);
        }
        for (auto const& [name, m] : out.pair_vars)
        {
            if (!m.allFinite())
                throw ValidationError(vt.source + ": variable '" + name
                                      + "' is missing for some student-program pairs");
        }
    }
    return out;
}

InputPaths write_inputs(MarketData const& data, fs::path const& dir)
{
    auto const& e = data.economy;
    int const k = e.n_students();
    int const n_c = e.n_programs();
    fs::create_directories(dir);
    InputPaths paths{dir / "programs.csv", dir / "students.csv", dir / "rols.csv", {}, {}};

    std::ostringstream p;
    p << "id,school_id,capacity,rule_mode,n_groups";
    for (auto const& a : e.attribute_names)
        p << ',' << a;
    p << '\n';
    for (auto const& prog : e.programs)
    {
        p << prog.id << ',' << prog.school_id << ',' << prog.capacity << ','
          << mode_name(prog.mode) << ',' << prog.n_groups;
        for (double a : prog.attributes)
            p << ',' << num(a);
        p << '\n';
    }
    write_text(paths.programs, p.str());

    std::ostringstream s;
    s << "id";
    for (auto const& c : e.covariate_names)
        s << ',' << c;
    for (int c = 0; c < n_c; ++c)
        s << ",prio_" << c;
    if (e.zone.size() > 0)
    {
        for (int c = 0; c < n_c; ++c)
            s << ",zone_" << c;
    }
    s << '\n';
    for (int i = 0; i < k; ++i)
    {
        s << i;
        for (Eigen::Index j = 0; j < e.covariates.cols(); ++j)
            s << ',' << num(e.covariates(i, j));
        for (int c = 0; c < n_c; ++c)
            s << ',' << num(e.intrinsic(i, c));
        if (e.zone.size() > 0)
        {
            for (int c = 0; c < n_c; ++c)
                s << ',' << e.zone(i, c);
        }
        s << '\n';
    }
    write_text(paths.students, s.str());

    std::ostringstream r;
    r << "student_id,rank,program_id\n";
    for (int i = 0; i < k; ++i)
    {
        for (std::size_t j = 0; j < data.rols[i].size(); ++j)
            r << i << ',' << j + 1 << ',' << data.rols[i][j] << '\n';
    }
    write_text(paths.rols, r.str());

    if (!data.pair_vars.empty())
    {
        paths.pair_vars = dir / "pair_vars.csv";
        std::ostringstream v;
        v << "student_id,program_id";
        for (auto const& [name, m] : data.pair_vars)
            v << ',' << name;
        v << '\n';
        for (int i = 0; i < k; ++i)
        {
            for (int c = 0; c < n_c; ++c)
            {
                v << i << ',' << c;
                for (auto const& [name, m] : data.pair_vars)
                    v << ',' << num(m(i, c));
                v << '\n';
            }
        }
        write_text(paths.pair_vars, v.str());
    }
    return paths;
}

//---------------------------------------------------------------------------//

std::string to_json(FeasiblePartition const& partition, int n_programs)
{
    json j;
    j["n_programs"] = n_programs;
    json students = json::object();
    for (std::size_t i = 0; i < partition.size(); ++i)
    {
        json classes = json::array();
        for (auto const& w : partition[i].classes)
        {
            json feasible = json::array();
            for (int c = 0; c < n_programs; ++c)
            {
                if ((w.feasible >> c) & 1u)
                    feasible.push_back(c);
            }
            classes.push_back({{"bitmask", w.feasible},
                               {"feasible", feasible},
                               {"assigned", w.assigned},
                               {"count", w.count},
                               {"prob", w.prob}});
        }
        students[std::to_string(i)]
            = {{"n_draws", partition[i].n_draws}, {"classes", classes}};
    }
    j["students"] = students;
    return j.dump(1);
}

std::pair<FeasiblePartition, int> partition_from_json(std::string const& text)
{
    auto const j = parse_json(text, "partition");
    try
    {
        int const n_programs = j.at("n_programs").get<int>();
        auto const& students = j.at("students");
        FeasiblePartition out(students.size());
        for (auto const& [key, value] : students.items())
        {
            auto const i = to_int(key, "partition student id");
            if (i < 0 || i >= static_cast<std::int64_t>(out.size()))
                throw ValidationError("partition student ids must be 0..n-1, found " + key);
            auto& p = out[static_cast<std::size_t>(i)];
            p.n_draws = value.at("n_draws").get<std::uint64_t>();
            for (auto const& w : value.at("classes"))
            {
                FeasibleClass fc;
                fc.feasible = w.at("bitmask").get<std::uint64_t>();
                fc.assigned = w.at("assigned").get<int>();
                fc.count = w.at("count").get<std::uint64_t>();
                fc.prob = w.at("prob").get<double>();
                p.classes.push_back(fc);
            }
        }
        return {std::move(out), n_programs};
    }
    catch (json::exception const& e)
    {
        throw ValidationError(std::string("malformed partition JSON: ") + e.what());
    }
}

std::string to_json(RelationTable const& relations, int n_nodes)
{
    json j;
    j["n_nodes"] = n_nodes;
    json methods = json::object();
    for (auto const& [label, sets] : relations)
    {
        json per = json::object();
        for (std::size_t i = 0; i < sets.size(); ++i)
        {
            json pairs = json::array();
            for (auto const& [x, y] : sets[i].pairs())
                pairs.push_back({x, y});
            per[std::to_string(i)] = pairs;
        }
        methods[label] = per;
    }
    j["methods"] = methods;
    return j.dump(1);
}

RelationTable relations_from_json(std::string const& text)
{
    auto const j = parse_json(text, "relations");
    try
    {
        int const n = j.at("n_nodes").get<int>();
        RelationTable out;
        for (auto const& [label, per] : j.at("methods").items())
        {
            std::vector<RelationSet> sets(per.size(), RelationSet(n));
            for (auto const& [key, pairs] : per.items())
            {
                auto const i = to_int(key, "relations student id");
                if (i < 0 || i >= static_cast<std::int64_t>(sets.size()))
                    throw ValidationError("relation student ids must be 0..n-1, found " + key);
                for (auto const& p : pairs)
                    sets[static_cast<std::size_t>(i)].add(p.at(0).get<int>(), p.at(1).get<int>());
            }
            out[label] = std::move(sets);
        }
        return out;
    }
    catch (json::exception const& e)
    {
        throw ValidationError(std::string("malformed relations JSON: ") + e.what());
    }
}

std::string to_json(std::map<std::string, EstimateSummary> const& estimates,
                    std::map<std::string, std::vector<double>> const& psrf,
                    std::vector<std::string> const& param_names)
{
    json j;
    j["param_names"] = param_names;
    json all = json::object();
    for (auto const& [label, e] : estimates)
    {
        json cov = json::array();
        for (Eigen::Index r = 0; r < e.covariance.rows(); ++r)
        {
            json row = json::array();
            for (Eigen::Index c = 0; c < e.covariance.cols(); ++c)
                row.push_back(e.covariance(r, c));
            cov.push_back(row);
        }
        json entry{{"beta", std::vector<double>(e.beta.data(), e.beta.data() + e.beta.size())},
                   {"covariance", cov}};
        if (auto const it = psrf.find(label); it != psrf.end())
            entry["psrf"] = it->second;
        all[label] = entry;
    }
    j["estimates"] = all;
    return j.dump(1);
}

std::map<std::string, EstimateSummary> estimates_from_json(std::string const& text)
{
    auto const j = parse_json(text, "estimates");
    try
    {
        std::map<std::string, EstimateSummary> out;
        for (auto const& [label, e] : j.at("estimates").items())
        {
            auto const beta = e.at("beta").get<std::vector<double>>();
            auto const cov = e.at("covariance").get<std::vector<std::vector<double>>>();
            EstimateSummary s;
            s.label = label;
            auto const p = static_cast<Eigen::Index>(beta.size());
            s.beta = Eigen::Map<Eigen::VectorXd const>(beta.data(), p);
            s.covariance.resize(p, p);
            if (static_cast<Eigen::Index>(cov.size()) != p)
                throw ValidationError("covariance of " + label + " has the wrong size");
            for (Eigen::Index r = 0; r < p; ++r)
            {
                if (static_cast<Eigen::Index>(cov[r].size()) != p)
                    throw ValidationError("covariance of " + label + " has the wrong size");
                for (Eigen::Index c = 0; c < p; ++c)
                    s.covariance(r, c) = cov[r][c];
            }
            out[label] = std::move(s);
        }
        return out;
    }
    catch (json::exception const& e)
    {
        throw ValidationError(std::string("malformed estimates JSON: ") + e.what());
    }
}

std::string to_json(SelectionResult const& selection)
{
    json ladder = json::array();
    for (auto const& s : selection.ladder)
    {
        ladder.push_back({{"robust", s.robust},
                          {"efficient", s.efficient},
                          {"statistic", s.test.statistic},
                          {"df", s.test.df},
                          {"p_value", s.test.p_value},
                          {"rejected", s.rejected}});
    }
    json j{{"chosen", selection.chosen}, {"alpha", selection.alpha}, {"ladder", ladder}};
    return j.dump(1);
}

void write_draws(PosteriorDraws const& d, fs::path const& path, std::string const& header)
{
    std::ostringstream os;
    os << header << "\nchain,draw";
    for (auto const& n : d.param_names)
        os << ',' << n;
    for (int t = 0; t < d.n_types; ++t)
        os << ",sigma2_" << t << (t == d.pinned_type ? "_pinned" : "");
    os << '\n';
    for (int ch = 0; ch < d.n_chains(); ++ch)
    {
        for (Eigen::Index r = 0; r < d.beta[ch].rows(); ++r)
        {
            os << ch << ',' << r;
            for (Eigen::Index j = 0; j < d.beta[ch].cols(); ++j)
                os << ',' << num(d.beta[ch](r, j));
            for (Eigen::Index t = 0; t < d.sigma2[ch].cols(); ++t)
                os << ',' << num(d.sigma2[ch](r, t));
            os << '\n';
        }
    }
    write_text(path, os.str());
}

PosteriorDraws read_draws(fs::path const& path)
{
    auto const t = read_csv(path);
    int const c_chain = t.require("chain");
    t.require("draw");
    PosteriorDraws d;
    std::vector<int> beta_cols, sigma_cols;
    for (int j = 2; j < static_cast<int>(t.header.size()); ++j)
    {
        auto const& h = t.header[j];
        if (h.rfind("sigma2_", 0) == 0)
        {
            if (h.size() > 7 && h.ends_with("_pinned"))
                d.pinned_type = static_cast<int>(sigma_cols.size());
            sigma_cols.push_back(j);
        }
        else
        {
            beta_cols.push_back(j);
            d.param_names.push_back(h);
        }
    }
    if (beta_cols.empty() || sigma_cols.empty())
        throw ValidationError(t.source + ": draws need beta and sigma2 columns");
    d.n_types = static_cast<int>(sigma_cols.size());
    std::vector<std::vector<std::vector<double>>> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
    {
        auto const ctx = where(t, r);
        auto const ch = to_int(t.rows[r][c_chain], ctx);
        if (ch < 0 || ch > static_cast<std::int64_t>(rows.size()))
            throw ValidationError(ctx + ": chains must appear in order");
        if (ch == static_cast<std::int64_t>(rows.size()))
            rows.emplace_back();
        std::vector<double> v;
        for (int j : beta_cols)
            v.push_back(to_real(t.rows[r][j], ctx));
        for (int j : sigma_cols)
            v.push_back(to_real(t.rows[r][j], ctx));
        rows[static_cast<std::size_t>(ch)].push_back(std::move(v));
    }
    auto const p = static_cast<Eigen::Index>(beta_cols.size());
    for (auto const& chain : rows)
    {
        auto const n = static_cast<Eigen::Index>(chain.size());
        Eigen::MatrixXd b(n, p), s(n, d.n_types);
        for (Eigen::Index r = 0; r < n; ++r)
        {
            for (Eigen::Index j = 0; j < p; ++j)
                b(r, j) = chain[r][j];
            for (int q = 0; q < d.n_types; ++q)
                s(r, q) = chain[r][p + q];
        }
        d.beta.push_back(std::move(b));
        d.sigma2.push_back(std::move(s));
    }
    if (d.beta.empty())
        throw ValidationError(t.source + ": no posterior draws");
    return d;
}

//---------------------------------------------------------------------------//

namespace
{
std::vector<std::string> const kFileKeys{"programs",  "students",  "rols",
                                         "priorities", "pair_vars", "partition",
                                         "relations", "estimates", "selection",
                                         "draws"};
}

std::vector<std::string> const& RunConfig::known_keys()
{
    static std::vector<std::string> const keys{
        // inputs and outputs
        "programs", "students", "rols", "priorities", "pair_vars", "partition",
        "relations", "estimates", "selection", "draws", "out_dir",
        // market
        "tiebreak", "exam_spread",
        // randomness and parallelism
        "seed", "threads",
        // partitions and inference
        "n_draws", "partition_mode", "n_own_draws", "tau_grid", "outside_option",
        // estimation
        "terms", "variance_types", "pinned_type", "gibbs_iter", "gibbs_burn_in",
        "gibbs_thin", "gibbs_chains", "prior_precision", "validate_draws",
        // selection
        "alpha", "nominal_df", "wald_tolerance",
        // Monte Carlo
        "dgp", "mc_samples", "mc_students", "mc_cutoff_draws", "mc_pool_samples",
        "mc_pool_draws", "mc_behavior_draws", "mc_behavior_only", "rel_threshold",
        "rel_on_admission",
        // counterfactuals
        "policy", "label", "group_by", "cf_pref_draws", "cf_lottery_draws",
        "cf_dgp", "cf_metric"};
    return keys;
}

void RunConfig::set(std::string const& key, std::string const& value)
{
    auto const& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
        throw ValidationError("unknown configuration key '" + key + "'");
    values_[key] = value;
}

RunConfig RunConfig::parse(std::string const& text, std::string const& source)
{
    RunConfig cfg;
    std::istringstream is(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw))
    {
        ++lineno;
        auto const s = trim(raw.substr(0, raw.find('#')));
        if (s.empty())
            continue;
        auto const eq = s.find('=');
        if (eq == std::string::npos)
            throw ValidationError(source + " line " + std::to_string(lineno)
                                  + ": expected key=value");
        auto const key = trim(s.substr(0, eq));
        if (cfg.has(key))
            throw ValidationError(source + " line " + std::to_string(lineno)
                                  + ": duplicate key '" + key + "'");
        try
        {
            cfg.set(key, trim(s.substr(eq + 1)));
        }
        catch (ValidationError const& e)
        {
            throw ValidationError(source + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig RunConfig::load(fs::path const& path)
{
    auto cfg = parse(read_text(path), path.string());
    // relative input paths are relative to the configuration file
    for (auto const& key : kFileKeys)
    {
        if (cfg.has(key))
        {
            fs::path p = cfg.values_[key];
            if (p.is_relative())
                cfg.values_[key] = (path.parent_path() / p).lexically_normal().string();
        }
    }
    return cfg;
}

std::string RunConfig::text(std::string const& key, std::string const& fallback) const
{
    auto const it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::int64_t RunConfig::integer(std::string const& key, std::int64_t fallback) const
{
    return has(key) ? to_int(values_.at(key), "config key " + key) : fallback;
}

std::uint64_t RunConfig::seed() const
{
    if (!has("seed"))
        return 20240601;
    auto const& s = values_.at("seed");
    std::uint64_t v = 0;
    auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ValidationError("config key seed: '" + s + "' is not an unsigned integer");
    return v;
}

double RunConfig::real(std::string const& key, double fallback) const
{
    return has(key) ? to_real(values_.at(key), "config key " + key) : fallback;
}

bool RunConfig::flag(std::string const& key, bool fallback) const
{
    if (!has(key))
        return fallback;
    auto const& v = values_.at(key);
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw ValidationError("config key " + key + ": expected true or false");
}

std::vector<double> RunConfig::reals(std::string const& key,
                                     std::vector<double> const& fallback) const
{
    if (!has(key))
        return fallback;
    std::vector<double> out;
    for (auto const& f : split(values_.at(key), ','))
        out.push_back(to_real(f, "config key " + key));
    return out;
}

std::vector<std::string> RunConfig::list(std::string const& key,
                                         std::vector<std::string> const& fallback) const
{
    if (!has(key))
        return fallback;
    auto out = split(values_.at(key), ',');
    std::erase(out, std::string{});
    return out;
}

void RunConfig::check_files() const
{
    for (auto const& key : kFileKeys)
    {
        if (has(key) && !fs::is_regular_file(values_.at(key)))
            throw ValidationError("config key " + key + ": file '" + values_.at(key)
                                  + "' does not exist");
    }
}

std::uint64_t fnv1a(std::string const& text)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text)
    {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string RunConfig::str() const
{
    std::ostringstream os;
    for (auto const& [k, v] : values_)
        os << k << '=' << v << '\n';
    return os.str();
}

std::string RunConfig::hash() const
{
    std::ostringstream os;
    for (auto const& [k, v] : values_)
    {
        if (k != "out_dir" && k != "threads")
            os << k << '=' << v << '\n';
    }
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(os.str());
    return hex.str();
}

}  // namespace teps
