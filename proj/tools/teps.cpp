// Command-line driver: one subcommand per pipeline stage.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "teps/errors.hpp"
#include "teps/estimation.hpp"
#include "teps/experiments.hpp"
#include "teps/inference.hpp"
#include "teps/io.hpp"
#include "teps/selection.hpp"
#include "teps/uncertainty.hpp"

#ifndef TEPS_VERSION
#define TEPS_VERSION "0.0.0"
#endif

namespace
{
using namespace teps;
using nlohmann::json;

std::vector<double> const kDefaultTauGrid{20, 40, 60, 80, 100};
std::vector<std::string> const kInputKeys{"programs",  "students",  "rols",
                                          "priorities", "pair_vars", "partition",
                                          "relations", "estimates", "selection",
                                          "draws"};

std::string num(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto const [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

// File-system-safe form of a method label, e.g. TEPS^top -> TEPS_top.
std::string file_label(std::string label)
{
    std::replace(label.begin(), label.end(), '^', '_');
    return label;
}

//---------------------------------------------------------------------------//

struct Run
{
    std::string command;
    RunConfig cfg;
    fs::path out;
    std::uint64_t seed = 0;
    std::string hash;
    int threads = 1;
    std::vector<std::string> outputs;

    Run(std::string cmd, RunConfig c) : command(std::move(cmd)), cfg(std::move(c))
    {
        // Canonical config: absolute input paths and an explicit seed, so
        // that the manifest alone replays the run.
        for (auto const& key : kInputKeys)
        {
            if (cfg.has(key))
                cfg.set(key, fs::absolute(cfg.text(key, "")).lexically_normal().string());
        }
        cfg.check_files();
        seed = cfg.seed();
        cfg.set("seed", std::to_string(seed));
        threads = static_cast<int>(cfg.integer("threads", 1));
        if (threads < 1)
            throw ValidationError("threads must be at least 1");
        out = cfg.text("out_dir", ".");
        hash = cfg.hash();
        fs::create_directories(out);
    }

    std::string header() const
    {
        return "# seed=" + std::to_string(seed) + " config_hash=" + hash;
    }

    void csv(std::string const& name, std::string const& body)
    {
        write_text(out / name, header() + "\n" + body);
        outputs.push_back(name);
    }

    void json_file(std::string const& name, std::string const& text)
    {
        auto j = json::parse(text);
        j["seed"] = seed;
        j["config_hash"] = hash;
        write_text(out / name, j.dump(1) + "\n");
        outputs.push_back(name);
    }

    void text_file(std::string const& name, std::string const& body)
    {
        write_text(out / name, header() + "\n" + body);
        outputs.push_back(name);
    }

    //! A prior stage's artifact: an explicit config key or out_dir/name.
    fs::path artifact(std::string const& key, std::string const& name,
                      std::string const& stage) const
    {
        if (cfg.has(key))
            return cfg.text(key, "");
        auto const p = out / name;
        if (!fs::is_regular_file(p))
            throw DependencyError("missing " + p.string() + "; run `teps " + stage
                                  + "` first or set " + key + "=<file>");
        return p;
    }

    void write_manifest() const
    {
        json config = json::object();
        for (auto const& [k, v] : cfg.values())
        {
            // neither affects any output
            if (k != "out_dir" && k != "threads")
                config[k] = v;
        }
        json j{{"tool", "teps"},
               {"version", TEPS_VERSION},
               {"command", command},
               {"seed", seed},
               {"config_hash", hash},
               {"config", config},
               {"outputs", outputs}};
        write_text(out / "manifest.json", j.dump(1) + "\n");
    }
};

//---------------------------------------------------------------------------//

MarketData load_market(RunConfig const& cfg)
{
    for (auto const* key : {"programs", "students", "rols"})
    {
        if (!cfg.has(key))
            throw ValidationError(std::string("config key ") + key + " is required");
    }
    InputPaths paths{cfg.text("programs", ""), cfg.text("students", ""), cfg.text("rols", ""),
                     cfg.text("priorities", ""), cfg.text("pair_vars", "")};
    auto const tb = cfg.text("tiebreak", "stb");
    if (tb != "stb" && tb != "mtb")
        throw ValidationError("tiebreak must be stb or mtb");
    return parse_inputs(paths, tb == "stb" ? TieBreak::stb : TieBreak::mtb,
                        cfg.real("exam_spread", 0.5));
}

GibbsConfig gibbs_config(Run const& run)
{
    GibbsConfig g;
    auto const& c = run.cfg;
    g.n_iter = static_cast<int>(c.integer("gibbs_iter", g.n_iter));
    g.burn_in = static_cast<int>(c.integer("gibbs_burn_in", g.burn_in));
    g.thin = static_cast<int>(c.integer("gibbs_thin", g.thin));
    g.n_chains = static_cast<int>(c.integer("gibbs_chains", g.n_chains));
    g.prior_precision = c.real("prior_precision", g.prior_precision);
    g.validate_draws = c.flag("validate_draws", false);
    g.seed = run.seed;
    g.threads = run.threads;
    return g;
}

WaldOptions wald_options(RunConfig const& cfg)
{
    WaldOptions w;
    w.tolerance = cfg.real("wald_tolerance", w.tolerance);
    w.nominal_df = cfg.flag("nominal_df", w.nominal_df);
    return w;
}

/*!
 * Regressors from `terms`: each term is a product of factors joined by '*',
 * each factor a program attribute, a student covariate or a pair variable.
 */
UtilityDesign build_design(MarketData const& m, RunConfig const& cfg)
{
    auto const& e = m.economy;
    int const k = e.n_students();
    int const n_c = e.n_programs();
    auto const terms = cfg.list("terms", e.attribute_names);
    if (terms.empty())
        throw ValidationError("no design terms; set terms=<attribute>,...");

    UtilityDesign d;
    d.n_students = k;
    d.n_programs = n_c;
    d.param_names = terms;
    d.x.resize(static_cast<Eigen::Index>(k) * n_c, static_cast<Eigen::Index>(terms.size()));
    d.x.setOnes();
    for (std::size_t t = 0; t < terms.size(); ++t)
    {
        std::istringstream is(terms[t]);
        std::string f;
        while (std::getline(is, f, '*'))
        {
            auto const index_of = [&](std::vector<std::string> const& names) {
                auto const it = std::find(names.begin(), names.end(), f);
                return it == names.end() ? -1 : static_cast<int>(it - names.begin());
            };
            int const a = index_of(e.attribute_names);
            int const v = index_of(e.covariate_names);
            auto const pv = m.pair_vars.find(f);
            if (a < 0 && v < 0 && pv == m.pair_vars.end())
                throw ValidationError("design term '" + terms[t] + "': unknown factor '" + f
                                      + "'");
            for (int i = 0; i < k; ++i)
            {
                for (int c = 0; c < n_c; ++c)
                {
                    double const x = a >= 0   ? e.programs[c].attributes[a]
                                     : v >= 0 ? e.covariates(i, v)
                                              : pv->second(i, c);
                    d.x(static_cast<Eigen::Index>(i) * n_c + c, static_cast<Eigen::Index>(t))
                        *= x;
                }
            }
        }
    }
    if (cfg.has("variance_types"))
    {
        for (double v : cfg.reals("variance_types", {}))
        {
            if (v != std::floor(v))
                throw ValidationError("variance_types must be integers");
            d.program_type.push_back(static_cast<int>(v));
        }
        if (static_cast<int>(d.program_type.size()) != n_c)
            throw ValidationError("variance_types needs one entry per program");
        d.pinned_type = static_cast<int>(cfg.integer("pinned_type", 0));
    }
    validate_design(d);
    return d;
}

std::vector<double> tau_grid(RunConfig const& cfg)
{
    auto grid = cfg.reals("tau_grid", kDefaultTauGrid);
    for (double t : grid)
    {
        if (!(t >= 0.0 && t <= 100.0))
            throw ValidationError("tau values must lie in [0, 100]");
    }
    return grid;
}

//---------------------------------------------------------------------------//
// Stages
//---------------------------------------------------------------------------//

void simulate_cutoffs(Run& run)
{
    auto const m = load_market(run.cfg);
    int const n = static_cast<int>(run.cfg.integer("n_draws", 1000));
    if (n < 1)
        throw ValidationError("n_draws must be at least 1");
    auto const cut
        = simulate_cutoff_distribution(m.economy, m.rols, n, run.seed, run.threads);
    std::ostringstream os;
    os << "draw";
    for (int c = 0; c < m.economy.n_programs(); ++c)
        os << ",program_" << c;
    os << '\n';
    for (std::size_t d = 0; d < cut.size(); ++d)
    {
        os << d;
        for (double v : cut[d])
            os << ',' << num(v);
        os << '\n';
    }
    run.csv("cutoffs.csv", os.str());
}

void partition(Run& run)
{
    auto const m = load_market(run.cfg);
    PartitionOptions o;
    auto const mode = run.cfg.text("partition_mode", "joint");
    if (mode == "joint")
        o.mode = PartitionMode::joint;
    else if (mode == "independent")
        o.mode = PartitionMode::independent;
    else
        throw ValidationError("partition_mode must be joint or independent");
    o.n_draws = static_cast<int>(run.cfg.integer("n_draws", o.n_draws));
    o.n_own_draws = static_cast<int>(run.cfg.integer("n_own_draws", 0));
    o.seed = run.seed;
    o.threads = run.threads;
    auto const p = build_feasible_partition(m.economy, m.rols, o);
    run.json_file("partition.json", to_json(p, m.economy.n_programs()));
}

void infer(Run& run)
{
    auto const m = load_market(run.cfg);
    int const n_c = m.economy.n_programs();
    auto const [parts, n_prog]
        = partition_from_json(read_text(run.artifact("partition", "partition.json", "partition")));
    if (n_prog != n_c || parts.size() != m.rols.size())
        throw ValidationError("partition does not match the inputs");
    for (std::size_t i = 0; i < parts.size(); ++i)
        validate_partition(parts[i], m.rols[i]);

    InferenceOptions io;
    io.outside_option = run.cfg.flag("outside_option", false);
    int const n_nodes = n_c + (io.outside_option ? 1 : 0);

    std::vector<double> taus{0.0};
    for (double t : tau_grid(run.cfg))
    {
        if (std::find(taus.begin(), taus.end(), t) == taus.end())
            taus.push_back(t);
    }
    RelationTable table;
    auto& wtt = table[kWttLabel];
    for (auto const& rol : m.rols)
    {
        auto r = wtt_infer(rol, n_c);
        if (io.outside_option)
        {
            RelationSet ext(n_nodes);
            for (auto const& [x, y] : r.pairs())
                ext.add(x, y);
            r = std::move(ext);
        }
        wtt.push_back(std::move(r));
    }
    for (double t : taus)
    {
        auto& sets = table[teps_label(t)];
        for (std::size_t i = 0; i < parts.size(); ++i)
            sets.push_back(teps_infer(parts[i], m.rols[i], t, n_c, io));
    }
    run.json_file("relations.json", to_json(table, n_nodes));

    std::ostringstream os;
    os << "method,student,better,worse\n";
    for (auto const& [label, sets] : table)
    {
        for (std::size_t i = 0; i < sets.size(); ++i)
        {
            for (auto const& [x, y] : sets[i].pairs())
                os << label << ',' << i << ',' << x << ',' << y << '\n';
        }
    }
    run.csv("relations.csv", os.str());
}

void estimate(Run& run)
{
    auto const m = load_market(run.cfg);
    auto const design = build_design(m, run.cfg);
    auto const table = relations_from_json(
        read_text(run.artifact("relations", "relations.json", "infer")));
    std::vector<std::string> labels;
    for (auto const& [label, sets] : table)
        labels.push_back(label);
    labels = run.cfg.list("label", labels);
    auto const g = gibbs_config(run);

    std::map<std::string, EstimateSummary> est;
    std::map<std::string, std::vector<double>> psrf;
    std::map<std::string, PosteriorDraws> done;
    fs::create_directories(run.out / "draws");
    for (auto const& label : labels)
    {
        auto const it = table.find(label);
        if (it == table.end())
            throw ValidationError("relations have no method '" + label + "'");
        if (static_cast<int>(it->second.size()) != design.n_students)
            throw ValidationError("relations of " + label + " do not match the inputs");
        if (it->second.empty() || it->second[0].n_nodes() != design.n_programs)
            throw ValidationError("estimation needs relations without the outside option");
        // identical relation sets share one posterior
        PosteriorDraws const* reuse = nullptr;
        for (auto const& [other, post] : done)
        {
            if (table.at(other) == it->second)
                reuse = &post;
        }
        auto post = reuse ? *reuse : gibbs_estimate(it->second, design, g);
        est[label] = {label, post.mean(), post.covariance()};
        psrf[label] = post.psrf();
        auto const name = "draws/" + file_label(label) + ".csv";
        write_draws(post, run.out / name, run.header());
        run.outputs.push_back(name);
        done.emplace(label, std::move(post));
    }
    run.json_file("estimates.json", to_json(est, psrf, design.param_names));
}

void select(Run& run)
{
    auto const est = estimates_from_json(
        read_text(run.artifact("estimates", "estimates.json", "estimate")));
    auto const top = est.find(teps_label(0.0));
    if (top == est.end())
        throw DependencyError("estimates lack " + teps_label(0.0));
    auto const wtt = est.contains(kWttLabel) ? std::string(kWttLabel) : std::string();
    auto const sel = select_model(est, top->second, tau_grid(run.cfg),
                                  run.cfg.real("alpha", 0.05), wald_options(run.cfg), wtt);
    run.json_file("selection.json", to_json(sel));
    std::cout << "selected " << sel.chosen << '\n';
}

std::string report_rows(SegregationReport const& r, std::string const& scenario)
{
    std::ostringstream os;
    for (Eigen::Index g = 0; g < r.group_mean.rows(); ++g)
    {
        os << scenario << ",group=" << num(r.groups[g]);
        for (Eigen::Index j = 0; j < r.group_mean.cols(); ++j)
            os << ',' << num(r.group_mean(g, j));
        os << '\n';
    }
    os << scenario << ",gap";
    for (Eigen::Index j = 0; j < r.gap.size(); ++j)
        os << ',' << num(r.gap(j));
    os << '\n';
    return os.str();
}

void counterfactual(Run& run)
{
    auto const m = load_market(run.cfg);
    auto const design = build_design(m, run.cfg);
    std::string label = run.cfg.text("label", "");
    if (label.empty())
    {
        auto const sel = json::parse(
            read_text(run.artifact("selection", "selection.json", "select")));
        label = sel.at("chosen").get<std::string>();
    }
    fs::path const draws = run.cfg.has("draws")
                               ? run.artifact("draws", "", "estimate")
                               : run.artifact("draws", "draws/" + file_label(label) + ".csv",
                                              "estimate");
    auto const post = read_draws(draws);

    CounterfactualOptions o;
    o.policy = parse_policy(run.cfg.text("policy", "NO_PRIORITIES"));
    o.n_pref_draws = static_cast<int>(run.cfg.integer("cf_pref_draws", o.n_pref_draws));
    o.n_lottery_draws = static_cast<int>(run.cfg.integer("cf_lottery_draws", o.n_lottery_draws));
    o.group_by = run.cfg.text("group_by", o.group_by);
    o.seed = run.seed;
    o.threads = run.threads;
    auto base = o;
    base.policy = Policy::none;
    auto const before = evaluate_counterfactual(m.economy, design, post, base);
    auto const after = evaluate_counterfactual(m.economy, design, post, o);

    std::ostringstream os;
    os << "scenario,row";
    for (auto const& name : before.metrics)
        os << ',' << name;
    os << '\n' << report_rows(before, to_string(Policy::none));
    os << report_rows(after, to_string(o.policy));
    os << "effect,gap";
    for (Eigen::Index j = 0; j < before.gap.size(); ++j)
        os << ',' << num(after.gap(j) - before.gap(j));
    os << '\n';
    run.csv("counterfactual.csv", "# estimates=" + label + "\n" + os.str());
}

McConfig mc_config(Run const& run)
{
    auto const& c = run.cfg;
    McConfig m;
    m.n_samples = static_cast<int>(c.integer("mc_samples", m.n_samples));
    m.n_students = static_cast<int>(c.integer("mc_students", m.n_students));
    m.n_cutoff_draws = static_cast<int>(c.integer("mc_cutoff_draws", m.n_cutoff_draws));
    m.n_pool_samples = static_cast<int>(c.integer("mc_pool_samples", m.n_pool_samples));
    m.n_pool_draws = static_cast<int>(c.integer("mc_pool_draws", m.n_pool_draws));
    m.n_behavior_draws = static_cast<int>(c.integer("mc_behavior_draws", m.n_behavior_draws));
    m.rel_threshold = c.real("rel_threshold", m.rel_threshold);
    m.rel_on_admission = c.flag("rel_on_admission", m.rel_on_admission);
    m.seed = run.seed;
    m.threads = run.threads;
    m.validate();
    return m;
}

void montecarlo(Run& run)
{
    auto const cfg = mc_config(run);
    McOptions o;
    o.dgps.clear();
    for (auto const& d : run.cfg.list("dgp", {"TT", "MIS-IRR", "MIS-REL"}))
        o.dgps.push_back(parse_dgp(d));
    o.tau_grid = tau_grid(run.cfg);
    o.estimate = !run.cfg.flag("mc_behavior_only", false);
    o.gibbs = gibbs_config(run);
    o.gibbs.seed = 0;
    o.alpha = run.cfg.real("alpha", o.alpha);
    o.wald = wald_options(run.cfg);
    o.counterfactual_dgps.clear();
    for (auto const& d : run.cfg.list("cf_dgp", {"MIS-IRR"}))
    {
        if (d != "none")
            o.counterfactual_dgps.push_back(parse_dgp(d));
    }
    o.counterfactual.policy = parse_policy(run.cfg.text("policy", "NO_PRIORITIES"));
    o.counterfactual.n_pref_draws
        = static_cast<int>(run.cfg.integer("cf_pref_draws", o.counterfactual.n_pref_draws));
    o.counterfactual.n_lottery_draws
        = static_cast<int>(run.cfg.integer("cf_lottery_draws", o.counterfactual.n_lottery_draws));
    o.counterfactual.group_by = run.cfg.text("group_by", o.counterfactual.group_by);
    o.counterfactual.threads = run.threads;
    o.counterfactual_metric = run.cfg.text("cf_metric", o.counterfactual_metric);
    o.log = [](std::string const& s) { std::cerr << s << '\n'; };

    auto const result = run_monte_carlo(cfg, o);
    for (auto const& p : write_tables(result, run.out, run.header()))
        run.outputs.push_back(p.filename().string());
}

void report(Run& run)
{
    std::ostringstream os;
    auto const have = [&](std::string const& name) { return fs::is_regular_file(run.out / name); };
    auto const body = [&](std::string const& name) {
        // skip the provenance header line
        auto const text = read_text(run.out / name);
        auto const nl = text.find('\n');
        return text.compare(0, 2, "# ") == 0 && nl != std::string::npos ? text.substr(nl + 1)
                                                                         : text;
    };
    bool any = false;
    if (have("estimates.json"))
    {
        any = true;
        auto const j = json::parse(read_text(run.out / "estimates.json"));
        auto const names = j.at("param_names").get<std::vector<std::string>>();
        os << "Posterior means (sd)\n" << std::setw(12) << "method";
        for (auto const& n : names)
            os << std::setw(22) << n;
        os << std::setw(10) << "max psrf" << '\n';
        for (auto const& [label, e] : j.at("estimates").items())
        {
            auto const b = e.at("beta").get<std::vector<double>>();
            auto const v = e.at("covariance").get<std::vector<std::vector<double>>>();
            os << std::setw(12) << label;
            for (std::size_t p = 0; p < b.size(); ++p)
            {
                std::ostringstream cell;
                cell << std::fixed << std::setprecision(3) << b[p] << " ("
                     << std::sqrt(v[p][p]) << ")";
                os << std::setw(22) << cell.str();
            }
            double worst = 0;
            if (e.contains("psrf"))
            {
                for (double r : e.at("psrf").get<std::vector<double>>())
                    worst = std::max(worst, r);
            }
            os << std::setw(10) << std::fixed << std::setprecision(3) << worst << '\n';
        }
        os << '\n';
    }
    if (have("selection.json"))
    {
        any = true;
        auto const j = json::parse(read_text(run.out / "selection.json"));
        os << std::defaultfloat << "Selection at alpha " << j.at("alpha").get<double>() << ": "
           << j.at("chosen").get<std::string>() << '\n';
        for (auto const& s : j.at("ladder"))
        {
            os << "  " << s.at("robust").get<std::string>() << " vs "
               << s.at("efficient").get<std::string>() << ": W=" << std::setprecision(4)
               << s.at("statistic").get<double>() << " df=" << s.at("df").get<int>()
               << " p=" << s.at("p_value").get<double>()
               << (s.at("rejected").get<bool>() ? " rejected" : " accepted") << '\n';
        }
        os << '\n';
    }
    for (auto const* name : {"counterfactual.csv", "table_c1.csv", "table_c2.csv",
                             "table_c3.csv"})
    {
        if (have(name))
        {
            any = true;
            os << name << '\n' << body(name) << '\n';
        }
    }
    if (!any)
        throw DependencyError("nothing to report in " + run.out.string()
                              + "; run an estimation stage or montecarlo first");
    run.text_file("report.txt", os.str());
    std::cout << os.str();
}

using Stage = void (*)(Run&);
std::map<std::string, Stage> const kStages{
    {"simulate-cutoffs", simulate_cutoffs}, {"partition", partition},
    {"infer", infer},                       {"estimate", estimate},
    {"select", select},                     {"montecarlo", montecarlo},
    {"counterfactual", counterfactual},     {"report", report}};

std::map<std::string, std::string> const kStageHelp{
    {"simulate-cutoffs", "draw cutoff vectors under lottery uncertainty"},
    {"partition", "per-student feasible-set classes"},
    {"infer", "WTT and TEPS preference relations"},
    {"estimate", "Gibbs posterior for each relation set"},
    {"select", "Wald specification ladder"},
    {"montecarlo", "synthetic-economy experiments and tables"},
    {"counterfactual", "policy effect on the between-group gap"},
    {"report", "summary of the staged outputs"}};

int execute(std::string const& command, RunConfig cfg)
{
    Run run(command, std::move(cfg));
    kStages.at(command)(run);
    run.write_manifest();
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"School-choice preference inference toolkit", "teps"};
    app.set_version_flag("--version", TEPS_VERSION);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> sets;
    std::string seed, threads, tau, alpha, out_dir;
    app.add_option("-c,--config", config_path, "key=value configuration file")
        ->envname("TEPS_CONFIG");
    app.add_option("--set", sets, "override a configuration key (key=value)");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--threads", threads, "worker threads");
    app.add_option("--tau-grid", tau, "comma-separated tau values in percent");
    app.add_option("--alpha", alpha, "significance level for model selection");
    app.add_option("-o,--out-dir", out_dir, "directory for outputs");

    for (auto const& [name, stage] : kStages)
        app.add_subcommand(name, kStageHelp.at(name));
    std::string manifest;
    auto* replay = app.add_subcommand("replay", "re-run a recorded manifest");
    replay->add_option("manifest", manifest, "manifest.json of an earlier run")->required();

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        int const code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try
    {
        RunConfig cfg;
        std::string command = app.get_subcommands().front()->get_name();
        if (command == "replay")
        {
            auto const j = json::parse(read_text(manifest));
            command = j.at("command").get<std::string>();
            for (auto const& [k, v] : j.at("config").items())
                cfg.set(k, v.get<std::string>());
        }
        else if (!config_path.empty())
        {
            cfg = RunConfig::load(config_path);
        }
        for (auto const& kv : sets)
        {
            auto const eq = kv.find('=');
            if (eq == std::string::npos)
                throw ValidationError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        for (auto const& [key, value] : {std::pair{"seed", &seed}, std::pair{"threads", &threads},
                                         std::pair{"tau_grid", &tau}, std::pair{"alpha", &alpha},
                                         std::pair{"out_dir", &out_dir}})
        {
            if (!value->empty())
                cfg.set(key, *value);
        }
        return execute(command, std::move(cfg));
    }
    catch (CycleError const& e)
    {
        std::cerr << "teps: inconsistent preferences: " << e.what() << '\n';
        return 2;
    }
    catch (ValidationError const& e)
    {
        std::cerr << "teps: invalid input: " << e.what() << '\n';
        return 2;
    }
    catch (NumericalError const& e)
    {
        std::cerr << "teps: numerical failure: " << e.what() << '\n';
        return 3;
    }
    catch (DependencyError const& e)
    {
        std::cerr << "teps: missing dependency: " << e.what() << '\n';
        return 4;
    }
    catch (nlohmann::json::exception const& e)
    {
        std::cerr << "teps: malformed JSON: " << e.what() << '\n';
        return 2;
    }
    catch (std::exception const& e)
    {
        std::cerr << "teps: " << e.what() << '\n';
        return 1;
    }
}
