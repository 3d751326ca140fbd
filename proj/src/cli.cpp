#include "hypass/cli.hpp"

#include "hypass/hypass_loop.hpp"
#include "hypass/io.hpp"
#include "hypass/theory_suite.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef HYPASS_VERSION
#define HYPASS_VERSION "unknown"
#endif

namespace hypass::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string version() { return HYPASS_VERSION; }

namespace {

class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Files are written under "<dir>.tmp-<pid>" and renamed into place on
// commit, so a half-written run never shows up under the final name.
class StagedDir {
public:
    StagedDir(fs::path final_dir, bool force) : final_(std::move(final_dir)), force_(force)
    {
        if (fs::exists(final_) && !force_)
            throw ArgumentError("output directory '" + final_.string() + "' exists (use --force to replace it)");
        tmp_ = final_;
        tmp_ += ".tmp-" + std::to_string(::getpid());
        std::error_code ec;
        fs::remove_all(tmp_, ec);
        fs::create_directories(tmp_, ec);
        if (ec) throw DataError("cannot create '" + tmp_.string() + "': " + ec.message());
    }
    StagedDir(const StagedDir&) = delete;
    StagedDir& operator=(const StagedDir&) = delete;
    ~StagedDir()
    {
        std::error_code ec;
        if (!committed_) fs::remove_all(tmp_, ec);
    }

    std::string file(const std::string& name) const { return (tmp_ / name).string(); }

    void commit()
    {
        std::error_code ec;
        fs::path old;
        if (fs::exists(final_)) {
            old = final_;
            old += ".old-" + std::to_string(::getpid());
            fs::rename(final_, old, ec);
            if (ec) throw DataError("cannot move aside '" + final_.string() + "': " + ec.message());
        }
        fs::rename(tmp_, final_, ec);
        if (ec) throw DataError("cannot rename output into '" + final_.string() + "': " + ec.message());
        committed_ = true;
        if (!old.empty()) fs::remove_all(old, ec);
    }

    const fs::path& path() const { return final_; }

private:
    fs::path final_;
    fs::path tmp_;
    bool force_ = false;
    bool committed_ = false;
};

fs::path output_root()
{
    const char* env = std::getenv("HYPASS_OUTPUT_ROOT");
    return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path output_dir(const std::string& out, const std::string& name)
{
    return out.empty() ? output_root() / name : fs::path(out);
}

std::string utc_now()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

// Everything but created_utc is a function of the flags.
void write_manifest(const StagedDir& dir, const std::string& id, const std::string& command,
                    const std::string& config_path, std::uint64_t seed, const json& extra)
{
    json m;
    m["experiment_id"] = id;
    m["command"] = command;
    m["config_path"] = config_path;
    m["output_dir"] = dir.path().string();
    m["master_seed"] = seed;
    m["version"] = version();
    for (const auto& [k, v] : extra.items()) m[k] = v;
    m["created_utc"] = utc_now();
    write_text_file(dir.file("manifest.json"), m.dump(2) + "\n");
}

template <typename Writer>
void write_with(const std::string& path, Writer&& w)
{
    std::ostringstream os;
    w(os);
    write_text_file(path, os.str());
}

// About 10x smaller training and search budgets.
void shrink(LoopConfig& l)
{
    l.n_epochs = std::max(1, l.n_epochs / 10);
    if (l.init_epochs > 0) l.init_epochs = std::max(1, l.init_epochs / 10);
    l.search_budget = std::max(5, l.search_budget / 10);
}

struct LoadedConfig {
    ExperimentConfig config;
    std::string path;
};

LoadedConfig load(const std::string& path, std::optional<std::uint64_t> seed, bool quick)
{
    LoadedConfig r;
    r.path = path;
    if (!path.empty()) {
        r.config = load_config(path);
        // Dataset paths are relative to the config file.
        const fs::path base = fs::path(path).parent_path();
        for (std::string* p : {&r.config.source_csv, &r.config.target_csv})
            if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).string();
    }
    if (seed) r.config.data.seed = r.config.loop.seed = *seed;
    if (quick) shrink(r.config.loop);
    return r;
}

// "hypass", "fixed:<lambda>" or "ablation:<1..5>".
LoopConfig apply_mode(const std::string& mode, const LoopConfig& base, std::optional<double> empirical)
{
    LoopConfig c = base;
    if (mode == "hypass") return apply_variant(c, 5, 0.0);
    const auto colon = mode.find(':');
    const std::string kind = mode.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : mode.substr(colon + 1);
    try {
        if (kind == "fixed" && !arg.empty()) {
            c.losses = {true, true, true};
            c.hp_mode = HPMode::Fixed;
            c.fixed_lambda = parse_double(arg);
            c.validate();
            return c;
        }
        if (kind == "ablation" && !arg.empty()) {
            const long long v = parse_int(arg);
            if (v < 1 || v > 5) throw ArgumentError("ablation variant must be in 1..5");
            if (v == 4 && !empirical && !c.fixed_lambda)
                throw ArgumentError("ablation:4 needs --empirical-lambda or fixed_lambda in the config");
            c = apply_variant(c, static_cast<int>(v), empirical ? *empirical : c.fixed_lambda.value_or(0.0));
            c.validate();
            return c;
        }
    } catch (const ArgumentError&) {
        throw;
    } catch (const std::exception& e) {
        throw ArgumentError("--mode " + mode + ": " + e.what());
    }
    throw ArgumentError("--mode must be hypass, fixed:<lambda> or ablation:<1..5>, got '" + mode + "'");
}

std::string slug(std::string s)
{
    for (char& c : s)
        if (c == ':' || c == '/') c = '-';
    return s;
}

// ------------------------------------------------------------------ gen

struct GenArgs {
    std::uint64_t seed = 1;
    std::string preset = "standard";
    std::optional<int> ids, target_ids, samples_per_id, dim;
    std::string out;
    bool force = false;
};

json shift_json(const ShiftSpec& s)
{
    if (s.is_identity()) return "identity";
    json j;
    j["rotation_angle"] = s.rotation_angle;
    j["translation"] = std::vector<double>(s.translation.data(), s.translation.data() + s.translation.size());
    j["scale"] = s.scale;
    j["noise_sigma_source"] = s.noise_sigma_source;
    j["noise_sigma_target"] = s.noise_sigma_target;
    return j;
}

int cmd_gen(const GenArgs& a, std::ostream& out)
{
    GenerationParams p;
    try {
        p = preset(a.preset, a.seed);
    } catch (const std::invalid_argument& e) {
        throw ArgumentError(e.what());
    }
    if (a.ids) p.n_ids_source = *a.ids;
    if (a.target_ids) p.n_ids_target = *a.target_ids;
    if (a.samples_per_id) p.samples_per_id = *a.samples_per_id;
    if (a.dim) {
        p.dim = *a.dim;
        if (p.shift.translation.size() != 0) p.shift.translation = Vector::Constant(p.dim, p.shift.translation(0));
    }
    DomainPair pair;
    try {
        pair = generate_domain_pair(p);
    } catch (const std::invalid_argument& e) {
        throw ArgumentError(e.what());
    }

    StagedDir dir(output_dir(a.out, "gen-" + a.preset + "-seed" + std::to_string(a.seed)), a.force);
    write_csv(dir.file("source.csv"), pair.source);
    write_csv(dir.file("target.csv"), pair.target);
    json meta;
    meta["preset"] = a.preset;
    meta["seed"] = p.seed;
    meta["n_ids_source"] = p.n_ids_source;
    meta["n_ids_target"] = p.n_ids_target;
    meta["samples_per_id"] = p.samples_per_id;
    meta["dim"] = p.dim;
    meta["source_rows"] = pair.source.size();
    meta["target_rows"] = pair.target.size();
    meta["shift"] = shift_json(p.shift);
    meta["version"] = version();
    write_text_file(dir.file("metadata.json"), meta.dump(2) + "\n");
    dir.commit();
    out << "wrote " << pair.source.size() << " source and " << pair.target.size() << " target rows to "
        << dir.path().string() << '\n';
    return kOk;
}

// ------------------------------------------------------------------ run

struct RunArgs {
    std::string config;
    std::string mode = "hypass";
    std::optional<std::uint64_t> seed;
    std::optional<double> empirical;
    bool quick = false;
    std::string out;
    std::string name;
    bool force = false;
};

int cmd_run(const RunArgs& a, std::ostream& out)
{
    LoadedConfig lc = load(a.config, a.seed, a.quick);
    lc.config.loop = apply_mode(a.mode, lc.config.loop, a.empirical);
    const PreparedData data = prepare_data(lc.config);

    const std::string id =
        a.name.empty() ? "run-" + slug(a.mode) + "-seed" + std::to_string(lc.config.loop.seed) : a.name;
    StagedDir dir(output_dir(a.out, id), a.force);
    const RunOutput result = run(data.source_train, data.source_val, data.target, lc.config.loop);

    write_text_file(dir.file("config.txt"), format_config(lc.config));
    write_with(dir.file("records.csv"), [&](std::ostream& os) { write_records_csv(os, result.records); });
    write_text_file(dir.file("result.json"), to_json(make_result(a.mode, lc.config.loop, result)));
    write_manifest(dir, id, "run", lc.path, lc.config.loop.seed, json{{"mode", a.mode}, {"quick", a.quick}});
    dir.commit();

    const auto& f = result.final;
    out << "final lambda " << format_double(f.lambda) << " target ARI " << format_double(f.target_ari)
        << " NMI " << format_double(f.target_nmi) << " mAP " << format_double(f.mean_ap) << '\n'
        << "wrote " << dir.path().string() << '\n';
    return kOk;
}

// ------------------------------------------------------------------ sweep

struct SweepArgs {
    std::string config;
    std::string param = "eps";
    double from = 0.1;
    double to = 1.9;
    int steps = 19;
    std::optional<std::uint64_t> seed;
    bool quick = false;
    std::string out;
    std::string name;
    bool force = false;
};

std::vector<double> sweep_values(const SweepArgs& a)
{
    if (!(a.from < a.to) || a.steps < 2) throw ArgumentError("sweep: empty range (need from < to and steps >= 2)");
    std::vector<double> v;
    for (int i = 0; i < a.steps; ++i) {
        double x = a.from + (a.to - a.from) * i / (a.steps - 1);
        if (a.param == "k") x = std::round(x);
        if (v.empty() || x != v.back()) v.push_back(x);
    }
    if (a.param == "k" && v.front() < 1) throw ArgumentError("sweep: k must be >= 1");
    if (v.size() < 2) throw ArgumentError("sweep: range holds fewer than 2 distinct values");
    return v;
}

int cmd_sweep(const SweepArgs& a, std::ostream& out)
{
    LoadedConfig lc = load(a.config, a.seed, a.quick);
    auto& loop = lc.config.loop;
    if (a.param == "k")
        loop.clustering.algorithm = ClusteringAlgorithm::KMeans;
    else if (loop.clustering.algorithm == ClusteringAlgorithm::KMeans)
        throw ArgumentError("sweep --param eps needs a DBSCAN or agglomerative config");
    const std::vector<double> values = sweep_values(a);
    const PreparedData data = prepare_data(lc.config);

    const std::string id = a.name.empty() ? "sweep-" + a.param + "-seed" + std::to_string(loop.seed) : a.name;
    StagedDir dir(output_dir(a.out, id), a.force);
    const auto rows = sensitivity_sweep(data.source_train, data.source_val, data.target, values, loop);

    write_text_file(dir.file("config.txt"), format_config(lc.config));
    write_with(dir.file("sweep.csv"), [&](std::ostream& os) { write_sweep_csv(os, rows); });
    write_manifest(dir, id, "sweep", lc.path, loop.seed,
                   json{{"param", a.param}, {"values", values}, {"quick", a.quick}});
    dir.commit();

    out << "best " << a.param << ' ' << format_double(sweep_argmax(rows)) << "; wrote " << dir.path().string() << '\n';
    return kOk;
}

// ------------------------------------------------------------------ verify-theory

struct TheoryArgs {
    std::vector<double> alphas{1.0, 2.0};
    std::optional<std::size_t> n_mc, replicates;
    std::uint64_t seed = 1;
    bool quick = false;
    std::string out;
};

int cmd_verify_theory(const TheoryArgs& a, std::ostream& out)
{
    theory::TheorySuiteOptions opt;
    opt.alphas = a.alphas;
    opt.seed = a.seed;
    if (a.n_mc) opt.n_mc = *a.n_mc;
    if (a.replicates) opt.replicates = *a.replicates;
    if (a.quick) opt = opt.quick();
    try {
        opt.validate();
    } catch (const std::invalid_argument& e) {
        throw ArgumentError(e.what());
    }
    const auto rows = theory::run_theory_suite(opt);
    if (a.out.empty()) {
        theory::write_theory_csv(out, rows);
    } else {
        write_with(a.out, [&](std::ostream& os) { theory::write_theory_csv(os, rows); });
        std::size_t ok = 0;
        for (const auto& r : rows) ok += r.pass;
        out << ok << '/' << rows.size() << " checks pass; wrote " << a.out << '\n';
    }
    return theory::all_pass(rows) ? kOk : kCheckFailed;
}

}  // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Pseudo-label UDA harness with source-validated clustering hyperparameters"};
    app.set_version_flag("--version", version());
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "generate a source/target dataset pair");
    g->add_option("--seed", gen.seed, "master seed");
    g->add_option("--preset", gen.preset, "shift preset")->check(CLI::IsMember(preset_names()));
    g->add_option("--ids", gen.ids, "source identities")->check(CLI::PositiveNumber);
    g->add_option("--target-ids", gen.target_ids, "target identities")->check(CLI::PositiveNumber);
    g->add_option("--samples-per-id", gen.samples_per_id, "samples per identity")->check(CLI::PositiveNumber);
    g->add_option("--dim", gen.dim, "input dimension (>= 2)")->check(CLI::Range(2, 4096));
    g->add_option("--out", gen.out, "output directory");
    g->add_flag("--force", gen.force, "replace an existing output directory");

    RunArgs run_args;
    auto* r = app.add_subcommand("run", "train and evaluate one configuration");
    r->add_option("--config", run_args.config, "config file (key = value lines)")->check(CLI::ExistingFile);
    r->add_option("--mode", run_args.mode, "hypass | fixed:<lambda> | ablation:<1..5>");
    r->add_option("--seed", run_args.seed, "overrides the config seed");
    r->add_option("--empirical-lambda", run_args.empirical, "fixed lambda of ablation variant 4");
    r->add_flag("--quick", run_args.quick, "about 10x smaller budgets");
    r->add_option("--out", run_args.out, "output directory");
    r->add_option("--name", run_args.name, "experiment id (default derived from mode and seed)");
    r->add_flag("--force", run_args.force, "replace an existing output directory");

    SweepArgs sweep;
    auto* s = app.add_subcommand("sweep", "final scores over a fixed-lambda range");
    s->add_option("--config", sweep.config, "config file")->check(CLI::ExistingFile);
    s->add_option("--param", sweep.param, "eps or k")->check(CLI::IsMember({"eps", "k"}));
    s->add_option("--from", sweep.from, "first value");
    s->add_option("--to", sweep.to, "last value");
    s->add_option("--steps", sweep.steps, "number of values");
    s->add_option("--seed", sweep.seed, "overrides the config seed");
    s->add_flag("--quick", sweep.quick, "about 10x smaller budgets");
    s->add_option("--out", sweep.out, "output directory");
    s->add_option("--name", sweep.name, "experiment id");
    s->add_flag("--force", sweep.force, "replace an existing output directory");

    TheoryArgs th;
    auto* t = app.add_subcommand("verify-theory", "weighted-risk checks on analytic toys");
    t->add_option("--alpha", th.alphas, "divergence orders")->delimiter(',');
    t->add_option("--n-mc", th.n_mc, "Monte-Carlo draws per divergence");
    t->add_option("--replicates", th.replicates, "estimates per variance measurement");
    t->add_option("--seed", th.seed, "seed");
    t->add_flag("--quick", th.quick, "reduced budgets");
    t->add_option("--out", th.out, "CSV path (default stdout)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kArgumentError;
    }

    try {
        if (g->parsed()) return cmd_gen(gen, out);
        if (r->parsed()) return cmd_run(run_args, out);
        if (s->parsed()) return cmd_sweep(sweep, out);
        if (t->parsed()) return cmd_verify_theory(th, out);
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::invalid_argument& e) {
        // ConfigError and validation failures of flag values.
        err << "argument error: " << e.what() << '\n';
        return kArgumentError;
    }
    return kArgumentError;
}

}  // namespace hypass::cli
