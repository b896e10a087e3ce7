// ssnal: Lasso solver benchmark front end.
//
//   ssnal solve    --data FILE | --synth K=V,...  --lambda-c LIST --solver LIST ...
//   ssnal spectrum --data FILE | --synth K=V,...  [--expand K]
//   ssnal synth    --synth K=V,...  --out FILE
//   ssnal expand   --data FILE --expand K --out FILE
//   ssnal normalize --data FILE --out FILE
//
// Output files ending in .ssds use the binary cache format; anything else is LIBSVM text.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "ssnal/bench.hpp"

namespace {

using namespace ssnal;
using namespace ssnal::bench;

struct Options {
    std::string data;
    std::string synth;
    std::string lambda_c = "1e-3";
    std::string solver = "ssnal";
    double tol = 1e-6;
    int max_iter = 0;
    double time_limit = 0.0;
    int expand = 0;
    bool normalize = false;
    bool noise = false;
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string output = "table";
    bool trace = false;
    std::string out;
    std::string config;
    std::vector<std::string> sets;
};

void add_data_options(CLI::App* cmd, Options& o)
{
    cmd->add_option("--data", o.data, "LIBSVM file (optionally gzip-compressed) or .ssds cache");
    cmd->add_option("--synth", o.synth, "synthetic instance, e.g. m=100,n=500,k=10,seed=7");
    cmd->add_option("--expand", o.expand, "polynomial expansion order (>= 2)");
    cmd->add_flag("--noise-60db", o.noise, "add 60 dB white Gaussian noise to b");
    cmd->add_option("--seed", o.seed, "seed for noise");
}

bool has_suffix(const std::string& s, const std::string& suffix)
{
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void save(const Dataset& ds, const std::string& path)
{
    if (has_suffix(path, ".ssds")) {
        write_cache_file(ds, path);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    write_libsvm(ds, f);
    if (!f) throw std::runtime_error("write failed: " + path);
}

RunSpec make_spec(const Options& o)
{
    RunSpec spec;
    if (!o.data.empty()) spec.data_path = o.data;
    if (!o.synth.empty()) spec.synth = parse_synth_spec(o.synth);
    spec.expand_order = o.expand;
    spec.normalize = o.normalize;
    spec.noise_60db = o.noise;
    spec.seed = o.seed;
    spec.lambda_ratios = parse_double_list(o.lambda_c);
    spec.solvers = split(o.solver, ',');
    spec.tol = o.tol;
    if (o.max_iter > 0) spec.max_iterations = o.max_iter;
    if (o.time_limit > 0.0) spec.time_limit_seconds = o.time_limit;
    spec.jobs = o.jobs;
    spec.output = o.output == "records" ? OutputFormat::records : OutputFormat::table;
    spec.trace = o.trace;
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || kv.find('.') > eq) {
            throw std::invalid_argument("--set expects solver.key=value, got '" + kv + "'");
        }
        spec.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return spec;
}

Dataset load_for(const Options& o)
{
    RunSpec spec;
    if (!o.data.empty()) spec.data_path = o.data;
    if (!o.synth.empty()) spec.synth = parse_synth_spec(o.synth);
    if (!spec.data_path && !spec.synth) throw std::invalid_argument("no data source: give --data or --synth");
    if (spec.data_path && spec.synth) throw std::invalid_argument("--data and --synth are mutually exclusive");
    spec.expand_order = o.expand;
    spec.noise_60db = o.noise;
    spec.seed = o.seed;
    if (spec.data_path && has_suffix(*spec.data_path, ".ssds")) {
        Dataset ds = read_cache_file(*spec.data_path);
        if (spec.expand_order >= 2) ds = polynomial_expand(ds, spec.expand_order);
        if (spec.noise_60db) {
            ds.targets = add_noise_60db(ds.targets, spec.seed);
            ds.transforms.push_back("noise60db:seed=" + std::to_string(spec.seed));
        }
        return ds;
    }
    return load_dataset(spec);
}

int cmd_solve(const Options& o)
{
    RunSpec spec = make_spec(o);
    spec.validate();
    const Dataset ds = load_for(o);
    const auto cells = run_cells(spec, ds, spec.trace ? &std::cerr : nullptr);
    const std::string text = spec.output == OutputFormat::records ? format_records(cells) : format_table(cells);
    if (o.out.empty()) {
        std::cout << text << std::flush;
    } else {
        std::ofstream f(o.out);
        if (!f) throw std::runtime_error("cannot open " + o.out + " for writing");
        f << text;
    }
    const bool all = std::all_of(cells.begin(), cells.end(), [](const Cell& c) { return c.passed; });
    return all ? 0 : 1;
}

int cmd_spectrum(const Options& o)
{
    RunSpec spec;
    if (!o.data.empty()) spec.data_path = o.data;
    if (!o.synth.empty()) spec.synth = parse_synth_spec(o.synth);
    spec.expand_order = o.expand;
    const Dataset ds = load_for(o);
    const SpectrumRow row = spectrum_row(problem_name(spec), ds);
    std::cout << (o.output == "records" ? format_spectrum_record(row) : format_spectrum(row)) << std::flush;
    return row.estimate.converged ? 0 : 1;
}

int cmd_synth(const Options& o)
{
    if (o.synth.empty()) throw std::invalid_argument("synth needs --synth K=V,...");
    if (o.out.empty()) throw std::invalid_argument("synth needs --out PATH");
    save(synth_instance(parse_synth_spec(o.synth)).data, o.out);
    return 0;
}

int cmd_expand(const Options& o)
{
    if (o.expand < 2) throw std::invalid_argument("expand needs --expand ORDER >= 2");
    if (o.out.empty()) throw std::invalid_argument("expand needs --out PATH");
    save(load_for(o), o.out);
    return 0;
}

int cmd_normalize(const Options& o)
{
    if (o.out.empty()) throw std::invalid_argument("normalize needs --out PATH");
    const Dataset ds = load_for(o);
    save(normalize_columns(ds, 1.0).data, o.out);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Semismooth Newton augmented Lagrangian Lasso solver and benchmark driver"};
    app.require_subcommand(1);
    Options o;

    auto* solve = app.add_subcommand("solve", "run (solver, lambda_c) cells and report");
    add_data_options(solve, o);
    solve->add_option("--lambda-c", o.lambda_c, "comma-separated lambda_c list");
    solve->add_option("--solver", o.solver, "comma-separated solvers: ssnal,apg,admm,ladmm");
    solve->add_option("--tol", o.tol, "stopping tolerance on eta")->capture_default_str();
    solve->add_option("--max-iter", o.max_iter, "iteration cap (solver default when omitted)");
    solve->add_option("--time-limit", o.time_limit, "wall-time limit per cell in seconds");
    solve->add_flag("--normalize", o.normalize, "scale columns to at most unit norm, weighting lambda");
    solve->add_option("--jobs", o.jobs, "cells run in parallel");
    solve->add_option("--output", o.output, "table or records")->check(CLI::IsMember({"table", "records"}));
    solve->add_flag("--trace", o.trace, "per-iteration trace on stderr");
    solve->add_option("--out", o.out, "write the report here instead of stdout");
    solve->add_option("--config", o.config, "flat key = value file; flags override it");
    solve->add_option("--set", o.sets, "solver parameter override, e.g. admm.rho=10");

    auto* spectrum = app.add_subcommand("spectrum", "estimate lambda_max(A A^T) by power iteration");
    add_data_options(spectrum, o);
    spectrum->add_option("--output", o.output, "table or records")->check(CLI::IsMember({"table", "records"}));

    auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
    synth->add_option("--synth", o.synth, "m=..,n=..,k=..,seed=..[,profile=geometric,cond=..]")->required();
    synth->add_option("--out", o.out, "output file")->required();

    auto* expand = app.add_subcommand("expand", "write the polynomial expansion of a dataset");
    add_data_options(expand, o);
    expand->add_option("--out", o.out, "output file")->required();

    auto* normalize = app.add_subcommand("normalize", "write a dataset with columns of at most unit norm");
    add_data_options(normalize, o);
    normalize->add_option("--out", o.out, "output file")->required();

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        // Merge the config file under the command-line flags before the real parse.
        for (std::size_t i = 0; i + 1 < args.size(); ++i) {
            if (args[i] == "--config") {
                std::ifstream f(args[i + 1]);
                if (!f) throw std::runtime_error("cannot read config " + args[i + 1]);
                std::stringstream text;
                text << f.rdbuf();
                args = merge_config_args(args, text.str());
                break;
            }
        }
        std::vector<char*> cargs{argv[0]};
        for (auto& a : args) cargs.push_back(a.data());
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (solve->parsed()) return cmd_solve(o);
        if (spectrum->parsed()) return cmd_spectrum(o);
        if (synth->parsed()) return cmd_synth(o);
        if (expand->parsed()) return cmd_expand(o);
        if (normalize->parsed()) return cmd_normalize(o);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
