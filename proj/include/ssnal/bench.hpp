#pragma once

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ssnal/alm.hpp"
#include "ssnal/baselines.hpp"
#include "ssnal/data_io.hpp"
#include "ssnal/spectrum.hpp"

namespace ssnal::bench {

enum class OutputFormat { table, records };

/// Everything a `solve` run needs: where the data comes from, how it is
/// transformed, and which (solver, lambda_c) cells to run.
struct RunSpec {
    std::optional<std::string> data_path;
    std::optional<SynthSpec> synth;
    int expand_order = 0;
    bool normalize = false;
    bool noise_60db = false;
    std::uint64_t seed = 1;

    std::vector<double> lambda_ratios;
    std::vector<std::string> solvers;
    std::map<std::string, std::string> overrides; // "solver.key" -> value
    double tol = 1e-6;
    std::optional<int> max_iterations;
    double time_limit_seconds = std::numeric_limits<double>::infinity();
    int jobs = 1;
    OutputFormat output = OutputFormat::table;
    bool trace = false;

    void validate() const
    {
        if (!data_path && !synth) throw std::invalid_argument("no data source: give --data or --synth");
        if (data_path && synth) throw std::invalid_argument("--data and --synth are mutually exclusive");
        if (lambda_ratios.empty()) throw std::invalid_argument("at least one lambda_c is required");
        if (solvers.empty()) throw std::invalid_argument("at least one solver is required");
        if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
        if (jobs < 1) throw std::invalid_argument("--jobs must be >= 1");
        for (const auto& s : solvers) {
            if (s != "ssnal" && s != "apg" && s != "admm" && s != "ladmm") {
                throw std::invalid_argument("unknown solver '" + s + "'");
            }
        }
        if (expand_order == 1 || expand_order < 0) throw std::invalid_argument("--expand needs an order >= 2");
    }
};

// ---------------------------------------------------------------------------
// Small parsers
// ---------------------------------------------------------------------------

inline std::vector<std::string> split(const std::string& text, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(text);
    while (std::getline(in, cur, sep)) {
        const auto b = cur.find_first_not_of(" \t");
        const auto e = cur.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
    }
    return out;
}

inline std::vector<double> parse_double_list(const std::string& text)
{
    std::vector<double> out;
    for (const auto& tok : split(text, ',')) {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument("not a number: '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

/// "m=100,n=500,k=10,seed=7[,profile=geometric,cond=1e4,scale=1,noise=0]".
inline SynthSpec parse_synth_spec(const std::string& text)
{
    SynthSpec spec;
    for (const auto& kv : split(text, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--synth expects K=V pairs, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        if (key == "m") spec.m = std::stol(val);
        else if (key == "n") spec.n = std::stol(val);
        else if (key == "k") spec.k = std::stol(val);
        else if (key == "seed") spec.seed = std::stoull(val);
        else if (key == "cond") spec.condition = std::stod(val);
        else if (key == "scale") spec.scale = std::stod(val);
        else if (key == "noise") spec.noise = val != "0" && val != "false";
        else if (key == "profile") {
            if (val == "gaussian") spec.profile = SynthProfile::gaussian;
            else if (val == "geometric") spec.profile = SynthProfile::geometric;
            else throw std::invalid_argument("unknown synth profile '" + val + "'");
        } else {
            throw std::invalid_argument("unknown --synth key '" + key + "'");
        }
    }
    return spec;
}

/**
 * Flat key-value config: one `key = value` per line, `#` starts a comment.
 * Keys are long flag names without dashes; `true`/`false` toggle flags.
 * Returns `args` extended with the config entries whose flag is not already
 * present, so command-line flags take precedence over the file.
 */
inline std::vector<std::string> merge_config_args(const std::vector<std::string>& args, const std::string& config_text)
{
    std::vector<std::string> out = args;
    std::istringstream in(config_text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const auto eq = line.find('=');
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (trim(line).empty()) continue;
        if (eq == std::string::npos) throw parse_error("config: expected key = value", lineno);
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        const std::string flag = "--" + key;
        const bool present = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (present) continue;
        if (value == "true") {
            out.push_back(flag);
        } else if (value != "false") {
            out.push_back(flag);
            out.push_back(value);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Data loading
// ---------------------------------------------------------------------------

inline std::string cache_key(const std::string& path, int expand_order)
{
    namespace fs = std::filesystem;
    const auto abs = fs::weakly_canonical(fs::path(path)).string();
    const auto size = fs::file_size(path);
    const auto mtime = fs::last_write_time(path).time_since_epoch().count();
    std::ostringstream key;
    key << abs << '|' << size << '|' << mtime << '|' << expand_order;
    const auto h = std::hash<std::string>{}(key.str());
    std::ostringstream name;
    name << std::hex << std::setw(16) << std::setfill('0') << h << ".ssds";
    return name.str();
}

/// Reads (or synthesizes) and expands the data; noise is applied here too.
/// Parsed-and-expanded files are cached under $SSNAL_CACHE_DIR when it is set.
inline Dataset load_dataset(const RunSpec& spec)
{
    Dataset ds;
    if (spec.synth) {
        ds = synth_instance(*spec.synth).data;
        if (spec.expand_order >= 2) ds = polynomial_expand(ds, spec.expand_order);
    } else {
        const char* cache_dir = std::getenv("SSNAL_CACHE_DIR");
        std::optional<std::filesystem::path> cached;
        if (cache_dir && *cache_dir) {
            std::filesystem::create_directories(cache_dir);
            cached = std::filesystem::path(cache_dir) / cache_key(*spec.data_path, spec.expand_order);
        }
        if (cached && std::filesystem::exists(*cached)) {
            ds = read_cache_file(cached->string());
        } else {
            ds = read_libsvm(*spec.data_path);
            if (spec.expand_order >= 2) ds = polynomial_expand(ds, spec.expand_order);
            if (cached) write_cache_file(ds, cached->string());
        }
    }
    if (spec.noise_60db) {
        ds.targets = add_noise_60db(ds.targets, spec.seed);
        ds.transforms.push_back("noise60db:seed=" + std::to_string(spec.seed));
    }
    if (ds.samples() == 0 || ds.feature_count() == 0) throw validation_error("dataset is empty");
    return ds;
}

inline std::string problem_name(const RunSpec& spec)
{
    std::string name;
    if (spec.synth) {
        name = "synth";
    } else {
        name = std::filesystem::path(*spec.data_path).filename().string();
        for (const char* ext : {".gz", ".bz2", ".ssds", ".txt", ".svm", ".libsvm"}) {
            const std::string e(ext);
            if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0) {
                name.resize(name.size() - e.size());
            }
        }
    }
    if (spec.expand_order >= 2) name += std::to_string(spec.expand_order);
    return name;
}

// ---------------------------------------------------------------------------
// Running cells
// ---------------------------------------------------------------------------

struct Cell {
    std::string probname;
    Index m = 0;
    Index n = 0;
    double lambda_ratio = 0.0;
    std::string solver;
    SolveReport report;
    bool passed = false;   // eta < tol
};

inline double override_or(const RunSpec& spec, const std::string& key, double fallback)
{
    auto it = spec.overrides.find(key);
    return it == spec.overrides.end() ? fallback : std::stod(it->second);
}

inline OuterConfig ssnal_config(const RunSpec& spec)
{
    OuterConfig cfg;
    cfg.tol = spec.tol;
    cfg.time_limit_seconds = spec.time_limit_seconds;
    if (spec.max_iterations) cfg.max_iterations = *spec.max_iterations;
    if (spec.overrides.count("ssnal.sigma0")) cfg.sigma0 = override_or(spec, "ssnal.sigma0", 1.0);
    cfg.sigma_growth = override_or(spec, "ssnal.sigma_growth", cfg.sigma_growth);
    cfg.sigma_max = override_or(spec, "ssnal.sigma_max", cfg.sigma_max);
    cfg.inner.smw_max_rank = static_cast<Index>(override_or(spec, "ssnal.smw_max_rank", static_cast<double>(cfg.inner.smw_max_rank)));
    cfg.inner.cholesky_max_rows = static_cast<Index>(
        override_or(spec, "ssnal.cholesky_max_rows", static_cast<double>(cfg.inner.cholesky_max_rows)));
    cfg.inner.cg_max_iterations = static_cast<int>(override_or(spec, "ssnal.cg_max_iterations", cfg.inner.cg_max_iterations));
    return cfg;
}

inline BaselineConfig baseline_config(const RunSpec& spec, const std::string& solver)
{
    BaselineConfig cfg;
    cfg.kind = solver == "apg" ? BaselineKind::apg : solver == "admm" ? BaselineKind::admm : BaselineKind::ladmm;
    cfg.tol = spec.tol;
    cfg.time_limit_seconds = spec.time_limit_seconds;
    if (spec.max_iterations) cfg.max_iterations = *spec.max_iterations;
    cfg.rho = override_or(spec, solver + ".rho", cfg.rho);
    cfg.step_length = override_or(spec, solver + ".step_length", cfg.step_length);
    return cfg;
}

/// Runs one solver on one problem; exceptions become failure reports.
inline SolveReport run_solver(const LassoProblem& prob, const RunSpec& spec, const std::string& solver,
                              std::ostream* trace)
{
    static std::mutex trace_mutex;
    auto outer_trace = [&](const OuterTraceRecord& r) {
        std::lock_guard lock(trace_mutex);
        *trace << solver << " k=" << r.iteration << " eta=" << r.eta << " feas=" << r.feasibility
               << " sigma=" << r.sigma << " inner=" << r.inner_steps << '\n';
    };
    try {
        if (solver == "ssnal") {
            SsnalCallbacks cb;
            if (trace) {
                cb.outer = outer_trace;
                cb.inner = [&](const InnerTraceRecord& r) {
                    std::lock_guard lock(trace_mutex);
                    *trace << "  ssn j=" << r.step << " |grad|=" << r.grad_norm << " r=" << r.rank
                           << " " << to_string(r.strategy) << " cg=" << r.cg_iterations << " alpha=" << r.step_size
                           << '\n';
                };
            }
            return ssnal_solve(prob, ssnal_config(spec), cb);
        }
        BaselineConfig cfg = baseline_config(spec, solver);
        if (trace) {
            cfg.trace = outer_trace;
            cfg.trace_every = 100;
        }
        return baseline_solve(prob, cfg);
    } catch (const std::exception& e) {
        SolveReport rep;
        rep.solver = solver;
        rep.termination = Termination::failure;
        rep.message = e.what();
        rep.eta = std::numeric_limits<double>::quiet_NaN();
        return rep;
    }
}

/**
 * Runs every (lambda_c, solver) cell, lambda_c-major, on up to spec.jobs
 * threads. Results come back in cell order regardless of scheduling.
 */
inline std::vector<Cell> run_cells(const RunSpec& spec, const Dataset& ds, std::ostream* trace = nullptr)
{
    spec.validate();
    const LinearOperator op = make_operator(ds);
    const std::string name = problem_name(spec);

    struct Job {
        std::size_t cell;
        std::size_t lambda_index;
    };
    std::vector<Cell> cells;
    std::vector<Job> jobs;
    for (std::size_t li = 0; li < spec.lambda_ratios.size(); ++li) {
        for (const auto& solver : spec.solvers) {
            Cell c;
            c.probname = name;
            c.m = ds.samples();
            c.n = ds.feature_count();
            c.lambda_ratio = spec.lambda_ratios[li];
            c.solver = solver;
            jobs.push_back({cells.size(), li});
            cells.push_back(std::move(c));
        }
    }

    // One problem per lambda_c, shared read-only by its cells.
    std::vector<std::optional<LassoProblem>> problems(spec.lambda_ratios.size());
    std::vector<std::string> problem_errors(spec.lambda_ratios.size());
    for (std::size_t li = 0; li < spec.lambda_ratios.size(); ++li) {
        try {
            const double lambda = lambda_from_ratio(op, ds.targets, spec.lambda_ratios[li]);
            if (spec.normalize) {
                NormalizedDataset nd = normalize_columns(ds, lambda);
                problems[li].emplace(make_operator(nd.data), nd.data.targets, WeightedL1(nd.weights));
            } else {
                problems[li].emplace(op, ds.targets, WeightedL1(lambda, op.cols()));
            }
        } catch (const std::exception& e) {
            problem_errors[li] = e.what();
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            Cell& c = cells[jobs[j].cell];
            const auto li = jobs[j].lambda_index;
            if (!problems[li]) {
                c.report.solver = c.solver;
                c.report.termination = Termination::failure;
                c.report.message = problem_errors[li];
                c.report.eta = std::numeric_limits<double>::quiet_NaN();
            } else {
                c.report = run_solver(*problems[li], spec, c.solver, trace);
            }
            c.passed = c.report.eta < spec.tol;
        }
    };
    const int nthreads = std::min<int>(spec.jobs, static_cast<int>(jobs.size()));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return cells;
}

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

/// hours:minutes:seconds, dropping leading zero fields; "00" means under half a second.
inline std::string format_hms(std::int64_t nanoseconds)
{
    const auto total = static_cast<std::int64_t>(std::llround(static_cast<double>(nanoseconds) * 1e-9));
    const auto h = total / 3600;
    const auto m = (total / 60) % 60;
    const auto s = total % 60;
    char buf[48];
    if (h > 0) std::snprintf(buf, sizeof buf, "%lld:%02lld:%02lld", static_cast<long long>(h),
                             static_cast<long long>(m), static_cast<long long>(s));
    else if (m > 0) std::snprintf(buf, sizeof buf, "%lld:%02lld", static_cast<long long>(m), static_cast<long long>(s));
    else std::snprintf(buf, sizeof buf, "%02lld", static_cast<long long>(s));
    return buf;
}

inline std::string format_sci(double v, int digits = 1)
{
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*e", digits, v);
    return buf;
}

inline std::string iteration_column(const Cell& c)
{
    const auto& r = c.report;
    if (c.solver == "ssnal") return std::to_string(r.outer_iterations) + "(" + std::to_string(r.inner_iterations) + ")";
    return std::to_string(r.outer_iterations);
}

/// Aligned text table; cells with eta >= tol carry a `*` after eta.
inline std::string format_table(const std::vector<Cell>& cells)
{
    const std::vector<std::string> header = {"probname", "m;n", "lambda_c", "solver", "nnz", "eta", "time", "iter", "status"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& c : cells) {
        rows.push_back({c.probname,
                        std::to_string(c.m) + ";" + std::to_string(c.n),
                        format_sci(c.lambda_ratio, 0),
                        c.solver,
                        std::to_string(c.report.nnz),
                        format_sci(c.report.eta) + (c.passed ? "" : "*"),
                        format_hms(c.report.wall_time_ns),
                        iteration_column(c),
                        to_string(c.report.termination)});
    }
    std::vector<std::size_t> width(header.size());
    for (std::size_t j = 0; j < header.size(); ++j) {
        width[j] = header[j].size();
        for (const auto& r : rows) width[j] = std::max(width[j], r[j].size());
    }
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& r) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j) out << "  ";
            if (j + 1 == r.size()) out << r[j];
            else if (j == 0 || j == 3) out << std::left << std::setw(static_cast<int>(width[j])) << r[j];
            else out << std::right << std::setw(static_cast<int>(width[j])) << r[j];
        }
        out << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (auto w : width) total += w;
    out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    for (const auto& r : rows) emit(r);
    return out.str();
}

/// One flat record per cell.
struct Record {
    std::string probname;
    Index m = 0;
    Index n = 0;
    double lambda_c = 0.0;
    std::string solver;
    Index nnz = 0;
    double eta = 0.0;
    double objective = 0.0;
    std::int64_t time_ns = 0;
    int outer_iterations = 0;
    int inner_iterations = 0;
    int cg_iterations = 0;
    std::uint64_t matvecs = 0;
    std::string termination;
    bool passed = false;
    std::string message;

    bool operator==(const Record&) const = default;
};

inline Record to_record(const Cell& c)
{
    Record r;
    r.probname = c.probname;
    r.m = c.m;
    r.n = c.n;
    r.lambda_c = c.lambda_ratio;
    r.solver = c.solver;
    r.nnz = c.report.nnz;
    r.eta = c.report.eta;
    r.objective = c.report.objective;
    r.time_ns = c.report.wall_time_ns;
    r.outer_iterations = c.report.outer_iterations;
    r.inner_iterations = c.report.inner_iterations;
    r.cg_iterations = c.report.cg_iterations;
    r.matvecs = c.report.matvecs;
    r.termination = to_string(c.report.termination);
    r.passed = c.passed;
    r.message = c.report.message;
    return r;
}

inline nlohmann::json to_json(const Record& r)
{
    nlohmann::json j;
    j["probname"] = r.probname;
    j["m"] = r.m;
    j["n"] = r.n;
    j["lambda_c"] = r.lambda_c;
    j["solver"] = r.solver;
    j["nnz"] = r.nnz;
    j["eta"] = std::isfinite(r.eta) ? nlohmann::json(r.eta) : nlohmann::json(nullptr);
    j["objective"] = std::isfinite(r.objective) ? nlohmann::json(r.objective) : nlohmann::json(nullptr);
    j["time_ns"] = r.time_ns;
    j["outer_iterations"] = r.outer_iterations;
    j["inner_iterations"] = r.inner_iterations;
    j["cg_iterations"] = r.cg_iterations;
    j["matvecs"] = r.matvecs;
    j["termination"] = r.termination;
    j["passed"] = r.passed;
    j["message"] = r.message;
    return j;
}

/// JSON Lines: one object per cell.
inline std::string format_records(const std::vector<Cell>& cells)
{
    std::string out;
    for (const auto& c : cells) {
        out += to_json(to_record(c)).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<Record> read_records(std::istream& in)
{
    std::vector<Record> out;
    std::string line;
    std::size_t lineno = 0;
    auto number = [](const nlohmann::json& v) {
        return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            Record r;
            r.probname = j.at("probname").get<std::string>();
            r.m = j.at("m").get<Index>();
            r.n = j.at("n").get<Index>();
            r.lambda_c = j.at("lambda_c").get<double>();
            r.solver = j.at("solver").get<std::string>();
            r.nnz = j.at("nnz").get<Index>();
            r.eta = number(j.at("eta"));
            r.objective = number(j.at("objective"));
            r.time_ns = j.at("time_ns").get<std::int64_t>();
            r.outer_iterations = j.at("outer_iterations").get<int>();
            r.inner_iterations = j.at("inner_iterations").get<int>();
            r.cg_iterations = j.at("cg_iterations").get<int>();
            r.matvecs = j.at("matvecs").get<std::uint64_t>();
            r.termination = j.at("termination").get<std::string>();
            r.passed = j.at("passed").get<bool>();
            r.message = j.value("message", "");
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(std::string("bad record: ") + e.what(), lineno);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spectrum report
// ---------------------------------------------------------------------------

struct SpectrumRow {
    std::string probname;
    Index m = 0;
    Index n = 0;
    SpectrumEstimate estimate;
};

inline SpectrumRow spectrum_row(const std::string& name, const Dataset& ds)
{
    SpectrumRow row;
    row.probname = name;
    row.m = ds.samples();
    row.n = ds.feature_count();
    row.estimate = estimate_lambda_max(make_operator(ds), 1e-6, 10000);
    return row;
}

inline std::string format_spectrum_record(const SpectrumRow& row)
{
    nlohmann::json j;
    j["probname"] = row.probname;
    j["m"] = row.m;
    j["n"] = row.n;
    j["lambda_max"] = row.estimate.lambda_max;
    j["iterations"] = row.estimate.iterations;
    j["achieved_tol"] = row.estimate.achieved_tol;
    j["converged"] = row.estimate.converged;
    return j.dump() + '\n';
}

inline std::string format_spectrum(const SpectrumRow& row)
{
    std::ostringstream out;
    out << std::left << std::setw(20) << "probname" << "  " << std::setw(18) << "m;n" << "  lambda_max(AA^T)\n";
    out << std::left << std::setw(20) << row.probname << "  " << std::setw(18)
        << (std::to_string(row.m) + ";" + std::to_string(row.n)) << "  " << format_sci(row.estimate.lambda_max, 2);
    if (!row.estimate.converged) {
        out << "  (stagnated after " << row.estimate.iterations << " iterations, achieved relative tolerance "
            << format_sci(row.estimate.achieved_tol, 1) << ")";
    }
    out << '\n';
    return out.str();
}

} // namespace ssnal::bench
