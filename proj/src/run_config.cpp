#include "hypass/hypass_loop.hpp"

#include "hypass/io.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace hypass {

namespace {

bool parse_bool(const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

int parse_count(const std::string& v)
{
    const long long n = parse_int(v);
    if (n < 0 || n > 1'000'000'000) throw std::invalid_argument("value out of range: " + v);
    return static_cast<int>(n);
}

std::uint64_t parse_seed(const std::string& v)
{
    const long long n = parse_int(v);
    if (n < 0) throw std::invalid_argument("seed must be >= 0");
    return static_cast<std::uint64_t>(n);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = {
        {"seed", [](ExperimentConfig& c, const std::string& v) { c.data.seed = c.loop.seed = parse_seed(v); }},
        {"data_seed", [](ExperimentConfig& c, const std::string& v) { c.data.seed = parse_seed(v); }},
        {"n_ids_source", [](ExperimentConfig& c, const std::string& v) { c.data.n_ids_source = parse_count(v); }},
        {"n_ids_target", [](ExperimentConfig& c, const std::string& v) { c.data.n_ids_target = parse_count(v); }},
        {"samples_per_id", [](ExperimentConfig& c, const std::string& v) { c.data.samples_per_id = parse_count(v); }},
        {"dim",
         [](ExperimentConfig& c, const std::string& v) {
             c.data.dim = parse_count(v);
             // Preset translations are constant vectors; keep them sized to dim.
             auto& t = c.data.shift.translation;
             if (t.size() != 0) t = Vector::Constant(c.data.dim, t(0));
         }},
        {"n_val", [](ExperimentConfig& c, const std::string& v) { c.n_val = static_cast<std::size_t>(parse_count(v)); }},
        {"source_csv", [](ExperimentConfig& c, const std::string& v) { c.source_csv = v; }},
        {"target_csv", [](ExperimentConfig& c, const std::string& v) { c.target_csv = v; }},
        {"n_epochs", [](ExperimentConfig& c, const std::string& v) { c.loop.n_epochs = parse_count(v); }},
        {"init_epochs", [](ExperimentConfig& c, const std::string& v) { c.loop.init_epochs = parse_count(v); }},
        {"batches_per_epoch", [](ExperimentConfig& c, const std::string& v) { c.loop.batches_per_epoch = parse_count(v); }},
        {"algorithm", [](ExperimentConfig& c, const std::string& v) { c.loop.clustering.algorithm = clustering_algorithm_from_string(v); }},
        {"min_samples", [](ExperimentConfig& c, const std::string& v) { c.loop.clustering.min_samples = parse_count(v); }},
        {"hp_mode", [](ExperimentConfig& c, const std::string& v) { c.loop.hp_mode = hp_mode_from_string(v); }},
        {"fixed_lambda", [](ExperimentConfig& c, const std::string& v) { c.loop.fixed_lambda = parse_double(v); }},
        {"metric", [](ExperimentConfig& c, const std::string& v) { c.loop.metric = metric_kind_from_string(v); }},
        {"search_budget", [](ExperimentConfig& c, const std::string& v) { c.loop.search_budget = parse_count(v); }},
        {"grid_step", [](ExperimentConfig& c, const std::string& v) { c.loop.grid_step = parse_double(v); }},
        {"eps0", [](ExperimentConfig& c, const std::string& v) { c.loop.eps0 = parse_double(v); }},
        {"loss_target_id", [](ExperimentConfig& c, const std::string& v) { c.loop.losses.target_id = parse_bool(v); }},
        {"loss_source_id", [](ExperimentConfig& c, const std::string& v) { c.loop.losses.source_id = parse_bool(v); }},
        {"loss_alignment", [](ExperimentConfig& c, const std::string& v) { c.loop.losses.alignment = parse_bool(v); }},
        {"drop_noise", [](ExperimentConfig& c, const std::string& v) { c.loop.drop_noise = parse_bool(v); }},
        {"batch_p", [](ExperimentConfig& c, const std::string& v) { c.loop.p = parse_count(v); }},
        {"batch_k", [](ExperimentConfig& c, const std::string& v) { c.loop.k = parse_count(v); }},
        {"margin", [](ExperimentConfig& c, const std::string& v) { c.loop.margin = parse_double(v); }},
        {"learning_rate", [](ExperimentConfig& c, const std::string& v) { c.loop.sgd.learning_rate = parse_double(v); }},
        {"momentum", [](ExperimentConfig& c, const std::string& v) { c.loop.sgd.momentum = parse_double(v); }},
        {"weight_decay", [](ExperimentConfig& c, const std::string& v) { c.loop.sgd.weight_decay = parse_double(v); }},
        {"hidden_dim", [](ExperimentConfig& c, const std::string& v) { c.loop.hidden_dim = parse_count(v); }},
        {"feature_dim", [](ExperimentConfig& c, const std::string& v) { c.loop.feature_dim = parse_count(v); }},
        {"max_pairs", [](ExperimentConfig& c, const std::string& v) { c.loop.max_pairs = static_cast<std::size_t>(parse_count(v)); }},
        {"head_scale", [](ExperimentConfig& c, const std::string& v) { c.loop.head_scale = parse_double(v); }},
    };
    return table;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text)
{
    struct Entry {
        int line;
        std::string key;
        std::string value;
    };
    std::vector<Entry> entries;
    std::set<std::string> keys;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        Entry e{line_no, trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
        if (e.key != "preset" && !setters().count(e.key))
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + e.key + "'");
        if (!keys.insert(e.key).second)
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + e.key + "'");
        if (e.value.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty value for '" + e.key + "'");
        entries.push_back(std::move(e));
    }

    // The preset supplies data defaults that later keys may override,
    // wherever it appears in the file.
    ExperimentConfig c;
    for (const auto& e : entries) {
        if (e.key != "preset") continue;
        try {
            c.preset_name = e.value;
            c.data = preset(e.value, c.data.seed);
        } catch (const std::exception& ex) {
            throw ConfigError("config line " + std::to_string(e.line) + ": " + ex.what());
        }
    }
    for (const auto& e : entries) {
        if (e.key == "preset") continue;
        try {
            setters().at(e.key)(c, e.value);
        } catch (const std::exception& ex) {
            throw ConfigError("config line " + std::to_string(e.line) + ": " + e.key + ": " + ex.what());
        }
    }
    if (c.source_csv.empty() != c.target_csv.empty())
        throw ConfigError("config: source_csv and target_csv must be given together");
    try {
        c.loop.validate();
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("config: ") + ex.what());
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

std::string format_config(const ExperimentConfig& c)
{
    std::ostringstream os;
    auto b = [](bool v) { return v ? "true" : "false"; };
    os << "preset = " << c.preset_name << '\n'
       << "seed = " << c.loop.seed << '\n'
       << "data_seed = " << c.data.seed << '\n'
       << "n_ids_source = " << c.data.n_ids_source << '\n'
       << "n_ids_target = " << c.data.n_ids_target << '\n'
       << "samples_per_id = " << c.data.samples_per_id << '\n'
       << "dim = " << c.data.dim << '\n'
       << "n_val = " << c.n_val << '\n';
    if (!c.source_csv.empty()) os << "source_csv = " << c.source_csv << "\ntarget_csv = " << c.target_csv << '\n';
    const auto& l = c.loop;
    os << "n_epochs = " << l.n_epochs << '\n'
       << "init_epochs = " << l.init_epochs << '\n'
       << "batches_per_epoch = " << l.batches_per_epoch << '\n'
       << "algorithm = " << to_string(l.clustering.algorithm) << '\n'
       << "min_samples = " << l.clustering.min_samples << '\n'
       << "hp_mode = " << to_string(l.hp_mode) << '\n';
    if (l.fixed_lambda) os << "fixed_lambda = " << format_double(*l.fixed_lambda) << '\n';
    os << "metric = " << to_string(l.metric) << '\n'
       << "search_budget = " << l.search_budget << '\n'
       << "grid_step = " << format_double(l.grid_step) << '\n';
    if (l.eps0) os << "eps0 = " << format_double(*l.eps0) << '\n';
    os << "loss_target_id = " << b(l.losses.target_id) << '\n'
       << "loss_source_id = " << b(l.losses.source_id) << '\n'
       << "loss_alignment = " << b(l.losses.alignment) << '\n'
       << "drop_noise = " << b(l.drop_noise) << '\n'
       << "batch_p = " << l.p << '\n'
       << "batch_k = " << l.k << '\n'
       << "margin = " << format_double(l.margin) << '\n'
       << "learning_rate = " << format_double(l.sgd.learning_rate) << '\n'
       << "momentum = " << format_double(l.sgd.momentum) << '\n'
       << "weight_decay = " << format_double(l.sgd.weight_decay) << '\n'
       << "hidden_dim = " << l.hidden_dim << '\n'
       << "feature_dim = " << l.feature_dim << '\n'
       << "max_pairs = " << l.max_pairs << '\n'
       << "head_scale = " << format_double(l.head_scale) << '\n';
    return os.str();
}

PreparedData prepare_data(const ExperimentConfig& c)
{
    DomainDataset source, target;
    if (!c.source_csv.empty()) {
        source = read_csv(c.source_csv);
        target = read_csv(c.target_csv);
        if (source.domain != Domain::Source || target.domain != Domain::Target)
            throw DataError("dataset files have the wrong domain column");
    } else {
        auto pair = generate_domain_pair(c.data);
        source = std::move(pair.source);
        target = std::move(pair.target);
    }
    auto split = split_validation(source, c.n_val, derive_seed(c.data.seed, 7));
    return {std::move(split.train), std::move(split.val), std::move(target)};
}

RunResult make_result(const std::string& mode, const LoopConfig& config, const RunOutput& out)
{
    RunResult r;
    r.mode = mode;
    r.seed = config.seed;
    r.n_epochs = config.n_epochs;
    r.final = out.final;
    for (const auto& rec : out.records) {
        r.lambda_history.push_back(rec.lambda);
        r.target_ari_history.push_back(rec.target_ari);
    }
    return r;
}

std::string to_json(const RunResult& r)
{
    nlohmann::json j;
    j["schema_version"] = RunResult::kSchemaVersion;
    j["mode"] = r.mode;
    j["seed"] = r.seed;
    j["n_epochs"] = r.n_epochs;
    j["final"] = {{"lambda", r.final.lambda},         {"target_ari", r.final.target_ari},
                  {"target_nmi", r.final.target_nmi}, {"n_clusters", r.final.n_clusters},
                  {"n_noise", r.final.n_noise},       {"mean_ap", r.final.mean_ap},
                  {"rank1", r.final.rank1}};
    j["lambda_history"] = r.lambda_history;
    j["target_ari_history"] = r.target_ari_history;
    return j.dump(2) + "\n";
}

namespace {

void expect_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) throw DataError(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw DataError(where + ": unknown field '" + k + "'");
    for (const auto& k : allowed)
        if (!j.contains(k)) throw DataError(where + ": missing field '" + k + "'");
}

}  // namespace

RunResult result_from_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("result.json: ") + e.what());
    }
    expect_keys(j, {"schema_version", "mode", "seed", "n_epochs", "final", "lambda_history", "target_ari_history"},
                "result.json");
    if (j.at("schema_version") != RunResult::kSchemaVersion)
        throw DataError("result.json: unsupported schema_version");
    expect_keys(j.at("final"), {"lambda", "target_ari", "target_nmi", "n_clusters", "n_noise", "mean_ap", "rank1"},
                "result.json final");
    RunResult r;
    try {
        r.mode = j.at("mode").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.n_epochs = j.at("n_epochs").get<int>();
        const auto& f = j.at("final");
        r.final.lambda = f.at("lambda").get<double>();
        r.final.target_ari = f.at("target_ari").get<double>();
        r.final.target_nmi = f.at("target_nmi").get<double>();
        r.final.n_clusters = f.at("n_clusters").get<int>();
        r.final.n_noise = f.at("n_noise").get<int>();
        r.final.mean_ap = f.at("mean_ap").get<double>();
        r.final.rank1 = f.at("rank1").get<double>();
        r.lambda_history = j.at("lambda_history").get<std::vector<double>>();
        r.target_ari_history = j.at("target_ari_history").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("result.json: ") + e.what());
    }
    return r;
}

}  // namespace hypass
