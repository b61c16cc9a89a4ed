#include "mixagent/cli/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mixagent/agent/agent.hpp"
#include "mixagent/core/serialize.hpp"
#include "mixagent/env/proxy.hpp"
#include "mixagent/errors.hpp"
#include "mixagent/hash.hpp"
#include "mixagent/orch/orchestrator.hpp"
#include "mixagent/sampler/sampler.hpp"

namespace mixagent::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path, bool is_config) {
    std::ifstream in(path);
    if (!in) {
        if (is_config) throw ConfigError("cannot open config file: " + path);
        throw DataError("cannot open file: " + path);
    }
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        if (is_config) throw ConfigError("config parse error in " + path + ": " + e.what());
        throw DataError("parse error in " + path + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

// Strict schema: every key must exist in the defaults tree; nested objects
// recurse; null defaults mark free-form slots validated later.
json merge_strict(const json& user, const json& defaults, const std::string& where) {
    if (!user.is_object()) throw ConfigError("'" + (where.empty() ? std::string("config") : where) + "' must be an object");
    json out = defaults;
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = where.empty() ? it.key() : where + "." + it.key();
        if (!defaults.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
        const json& d = defaults.at(it.key());
        if (d.is_object() && it.value().is_object())
            out[it.key()] = merge_strict(it.value(), d, key);
        else
            out[it.key()] = it.value();
    }
    return out;
}

json root_defaults() {
    return json{
        {"version", 1},
        {"seed", 1},
        {"env",
         {{"domains", nullptr},
          {"vocab", 64},
          {"seq_len", 16},
          {"train_pool", 4096},
          {"heldout_pool", 256},
          {"eval_pairs_per_field", 8}}},
        {"start_state", nullptr},
        {"target_empirical", nullptr},
        {"sampler",
         {{"trajectories_per_run", 4},
          {"max_steps", 20},
          {"samples_per_step", 8000},
          {"candidate_count", 20000},
          {"alpha", 1.0},
          {"beta", 1.0},
          {"gamma", 0.5},
          {"target_pool_size", -1},
          {"tiers", json::array({1, 100, 1000, 10000})},
          {"share_prior_trajectories", false}}},
        {"collect", {{"samples_per_step", 256}, {"workers", 1}}},
        {"actor", {{"profile", "desk"}}},
        {"sft", {{"epochs", 60}, {"batch_size", 4}, {"lr", 3e-3}}},
        {"cql",
         {{"alpha_cql", 1.0},
          {"discount", 0.99},
          {"ood_action_samples", 10},
          {"target_sync_period", 25},
          {"critic_lr", 1e-3},
          {"actor_lr", 3e-4},
          {"bc_anchor", 0.0},
          {"batch_size", 16},
          {"iterations", 400}}},
        {"guide",
         {{"max_steps", 40},
          {"samples_per_step", 4096},
          {"target_pool_size", 65536},
          {"pretrain_steps", 0},
          {"space", "native"}}},
        {"baseline",
         {{"mode", "naive"},
          {"static_mixture", nullptr},
          {"regmix", {{"proxy_runs", 64}, {"steps_per_run", 8}, {"samples_per_step", 256}}}}},
        {"paths", {{"trajectories_dir", ""}, {"collected_dir", ""}, {"actor_sft", ""}, {"actor_rl", ""}}},
    };
}

template <typename T>
T get_as(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + where + "." + key + "': " + e.what());
    }
}

json load_config(const std::string& path) {
    const json resolved = merge_strict(load_json_file(path, true), root_defaults(), "");
    if (get_as<int>(resolved, "version", "") != 1) throw ConfigError("unsupported config version");
    return resolved;
}

core::DomainSpace space_from_config(const json& envj) {
    const json& domains = envj.at("domains");
    if (!domains.is_array()) throw ConfigError("'env.domains' must be an array");
    std::vector<core::Domain> out;
    for (const auto& d : domains) {
        if (!d.is_object()) throw ConfigError("'env.domains' entries must be objects");
        for (auto it = d.begin(); it != d.end(); ++it)
            if (it.key() != "name" && it.key() != "field")
                throw ConfigError("unknown config key 'env.domains." + it.key() + "'");
        const std::string f = get_as<std::string>(d, "field", "env.domains");
        if (f != "source" && f != "target") throw ConfigError("'env.domains.field' must be source or target");
        out.push_back({get_as<std::string>(d, "name", "env.domains"),
                       f == "source" ? core::Field::Source : core::Field::Target});
    }
    return core::DomainSpace(std::move(out));
}

env::CorpusSpec corpus_spec_from_config(const json& config) {
    const json& envj = config.at("env");
    env::CorpusSpec spec{space_from_config(envj),
                         get_as<int>(envj, "vocab", "env"),
                         get_as<int>(envj, "seq_len", "env"),
                         get_as<int>(envj, "train_pool", "env"),
                         get_as<int>(envj, "heldout_pool", "env"),
                         derive_seed(get_as<std::uint64_t>(config, "seed", ""), "env")};
    spec.validate();
    return spec;
}

struct EnvBundle {
    env::DomainCorpora corpora;
    env::EvalSets evals;
};

EnvBundle build_env(const json& config) {
    auto corpora = env::generate_corpus(corpus_spec_from_config(config));
    const int pairs = get_as<int>(config.at("env"), "eval_pairs_per_field", "env");
    auto evals = env::build_eval_sets(corpora, pairs,
                                      derive_seed(get_as<std::uint64_t>(config, "seed", ""), "env.eval"));
    return {std::move(corpora), std::move(evals)};
}

// Fills the start_state / target_empirical defaults into the resolved config
// so the manifest shows the values actually used.
core::MixtureDistribution resolve_start_state(json& config, const core::DomainSpace& space) {
    if (config.at("start_state").is_null()) {
        std::vector<double> w(space.dimension(), 0.0);
        const auto src = space.field_indices(core::Field::Source);
        if (src.empty()) throw ConfigError("no source domains to build a default start state");
        for (std::size_t i : src) w[i] = 1.0 / static_cast<double>(src.size());
        double s = 0.0;
        for (double x : w) s += x;
        w[src.front()] += 1.0 - s;
        config["start_state"] = w;
    }
    try {
        return core::validate_distribution(config.at("start_state").get<std::vector<double>>(), space.dimension());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad 'start_state': ") + e.what());
    }
}

core::MixtureDistribution resolve_target_state(json& config, const core::DomainSpace& space) {
    const std::size_t t = space.target_count();
    if (config.at("target_empirical").is_null())
        config["target_empirical"] = std::vector<double>(t, 1.0 / static_cast<double>(t));
    try {
        return core::make_target_state(config.at("target_empirical").get<std::vector<double>>(), space);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad 'target_empirical': ") + e.what());
    }
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// RunManifest: command, resolved config (defaults included), master seed,
// hashes of every input and output artifact. The timestamp is the one field
// allowed to vary between identical replays.
void write_manifest(const fs::path& dir, const std::string& command, const json& resolved,
                    const std::map<std::string, std::string>& inputs, const std::vector<std::string>& outputs,
                    json extra = json::object()) {
    json in_hashes = json::object();
    for (const auto& [name, path] : inputs) in_hashes[name] = file_hash(path);
    json out_hashes = json::object();
    for (const auto& name : outputs) out_hashes[name] = file_hash((dir / name).string());
    json manifest{{"tool_version", kToolVersion}, {"command", command},
                  {"seed", resolved.at("seed")},   {"config", resolved},
                  {"inputs", in_hashes},           {"outputs", out_hashes},
                  {"timestamp", timestamp_utc()}};
    for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::string tier_file(int k) { return "trajectories_k" + std::to_string(k) + ".jsonl"; }
std::string collected_file(int k) { return "collected_k" + std::to_string(k) + ".jsonl"; }

std::vector<int> read_tier_list(const fs::path& dir) {
    const json j = load_json_file((dir / "tiers.json").string(), false);
    try {
        return j.at("tiers").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw DataError("bad tiers.json in " + dir.string() + ": " + e.what());
    }
}

int resolve_workers(const json& config, int flag_workers) {
    int workers = get_as<int>(config.at("collect"), "workers", "collect");
    if (flag_workers > 0) workers = flag_workers;
    if (const char* e = std::getenv("MIXAGENT_WORKERS")) workers = std::atoi(e);
    if (workers < 1) throw ConfigError("worker count must be >= 1");
    return workers;
}

int cmd_gen_env(const std::string& config_path, const std::string& out_dir) {
    json config = load_config(config_path);
    const auto spec = corpus_spec_from_config(config);
    env::generate_corpus(spec);  // validates domain separation before writing anything

    fs::create_directories(out_dir);
    json spec_json{{"version", 1},
                   {"space", core::space_to_json(spec.space)},
                   {"vocab", spec.vocab},
                   {"seq_len", spec.seq_len},
                   {"train_pool", spec.train_pool},
                   {"heldout_pool", spec.heldout_pool},
                   {"eval_pairs_per_field", get_as<int>(config.at("env"), "eval_pairs_per_field", "env")},
                   {"seed", spec.seed}};
    write_text(fs::path(out_dir) / "env_spec.json", spec_json.dump(2) + "\n");
    write_manifest(out_dir, "gen-env", config, {{"config", config_path}}, {"env_spec.json"});
    return 0;
}

int cmd_sample(const std::string& config_path, const std::string& out_dir) {
    json config = load_config(config_path);
    const auto space = space_from_config(config.at("env"));
    const auto start = resolve_start_state(config, space);
    const auto target = resolve_target_state(config, space);
    const json& sj = config.at("sampler");
    const auto tiers = get_as<std::vector<int>>(sj, "tiers", "sampler");
    if (tiers.empty()) throw ConfigError("'sampler.tiers' must be non-empty");
    const std::uint64_t master = get_as<std::uint64_t>(config, "seed", "");
    const std::string config_hash = content_hash(config.dump());

    fs::create_directories(out_dir);
    std::vector<std::string> outputs;
    for (int k : tiers) {
        sampler::SamplerConfig cfg;
        cfg.trajectories_per_run = get_as<int>(sj, "trajectories_per_run", "sampler");
        cfg.max_steps = get_as<int>(sj, "max_steps", "sampler");
        cfg.samples_per_step = get_as<int>(sj, "samples_per_step", "sampler");
        cfg.candidate_count = get_as<int>(sj, "candidate_count", "sampler");
        cfg.weights = {get_as<double>(sj, "alpha", "sampler"), get_as<double>(sj, "beta", "sampler"),
                       get_as<double>(sj, "gamma", "sampler")};
        cfg.target_pool_size = get_as<long>(sj, "target_pool_size", "sampler");
        cfg.share_prior_trajectories = get_as<bool>(sj, "share_prior_trajectories", "sampler");
        cfg.top_k = k;
        cfg.seed = derive_seed(master, "sampler", static_cast<std::uint64_t>(k));
        auto set = sampler::sample_trajectories(cfg, start, target, space);
        for (auto& t : set.trajectories) t.provenance.config_hash = config_hash;
        core::write_trajectories((fs::path(out_dir) / tier_file(k)).string(), set.trajectories);
        outputs.push_back(tier_file(k));
    }
    write_text(fs::path(out_dir) / "tiers.json", json{{"version", 1}, {"tiers", tiers}}.dump(2) + "\n");
    outputs.push_back("tiers.json");
    write_manifest(out_dir, "sample", config, {{"config", config_path}}, outputs);
    return 0;
}

int cmd_collect(const std::string& config_path, std::string input_dir, const std::string& out_dir, int flag_workers,
                bool resume) {
    json config = load_config(config_path);
    if (input_dir.empty()) input_dir = get_as<std::string>(config.at("paths"), "trajectories_dir", "paths");
    if (input_dir.empty()) throw ConfigError("collect needs an input directory (--input or paths.trajectories_dir)");
    config["paths"]["trajectories_dir"] = input_dir;
    const int workers = resolve_workers(config, flag_workers);
    config["collect"]["workers"] = workers;

    const auto bundle = build_env(config);
    const std::size_t dim = bundle.corpora.space().dimension();
    env::CollectConfig ccfg{get_as<int>(config.at("collect"), "samples_per_step", "collect"),
                            derive_seed(get_as<std::uint64_t>(config, "seed", ""), "proxy"), workers};

    const auto tiers = read_tier_list(input_dir);
    fs::create_directories(out_dir);
    std::map<std::string, std::string> inputs{{"config", config_path}};
    std::vector<std::string> outputs;
    for (int k : tiers) {
        const fs::path in_path = fs::path(input_dir) / tier_file(k);
        const fs::path out_path = fs::path(out_dir) / collected_file(k);
        auto raw = core::read_trajectories(in_path.string(), dim);

        // Completed trajectories are keyed by the hash of their raw
        // (feedback-free) line; resume reuses them byte for byte.
        std::map<std::string, core::TrajectoryRecord> done;
        if (resume && fs::exists(out_path)) {
            for (auto& rec : core::read_trajectories(out_path.string(), dim)) {
                core::TrajectoryRecord bare = rec;
                bare.feedback.clear();
                done.emplace(content_hash(core::trajectory_to_line(bare)), std::move(rec));
            }
        }
        std::vector<core::TrajectoryRecord> todo;
        std::vector<std::size_t> todo_at;
        std::vector<core::TrajectoryRecord> collected(raw.size(), core::TrajectoryRecord{
            core::validate_distribution(std::vector<double>(dim, 1.0 / static_cast<double>(dim)), dim), {}, {}, {}});
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const auto it = done.find(content_hash(core::trajectory_to_line(raw[i])));
            if (it != done.end()) {
                collected[i] = it->second;
            } else {
                todo.push_back(raw[i]);
                todo_at.push_back(i);
            }
        }
        auto fresh = env::collect_feedback(todo, bundle.corpora, bundle.evals, ccfg);
        for (std::size_t j = 0; j < fresh.size(); ++j) collected[todo_at[j]] = std::move(fresh[j]);
        core::write_trajectories(out_path.string(), collected);
        inputs[tier_file(k)] = in_path.string();
        outputs.push_back(collected_file(k));
    }
    write_text(fs::path(out_dir) / "tiers.json", json{{"version", 1}, {"tiers", tiers}}.dump(2) + "\n");
    outputs.push_back("tiers.json");
    write_manifest(out_dir, "collect", config, inputs, outputs);
    return 0;
}

nn::Descriptor actor_descriptor(const json& config, std::size_t n_domains, std::size_t n_fields) {
    const std::string profile = get_as<std::string>(config.at("actor"), "profile", "actor");
    if (profile == "desk") return agent::desk_actor_descriptor(static_cast<int>(n_domains), static_cast<int>(n_fields));
    if (profile == "paper") return agent::paper_actor_descriptor();
    throw ConfigError("'actor.profile' must be desk or paper");
}

int cmd_train(const std::string& config_path, const std::string& phase, std::string input_dir,
              std::string actor_path, const std::string& out_dir) {
    json config = load_config(config_path);
    if (input_dir.empty()) input_dir = get_as<std::string>(config.at("paths"), "collected_dir", "paths");
    if (input_dir.empty()) throw ConfigError("train needs a collected directory (--input or paths.collected_dir)");
    config["paths"]["collected_dir"] = input_dir;
    const auto space = space_from_config(config.at("env"));
    const std::size_t dim = space.dimension();
    const std::uint64_t master = get_as<std::uint64_t>(config, "seed", "");
    const auto tiers = read_tier_list(input_dir);

    fs::create_directories(out_dir);
    std::map<std::string, std::string> inputs{{"config", config_path}};

    if (phase == "sft") {
        // SFT consumes only the top-1 tier.
        if (std::find(tiers.begin(), tiers.end(), 1) == tiers.end())
            throw DataError("sft needs the K=1 tier in " + input_dir);
        const fs::path in_path = fs::path(input_dir) / collected_file(1);
        auto corpus = core::read_trajectories(in_path.string(), dim);
        if (corpus.empty()) throw EmptyCorpus("no trajectories in " + in_path.string());
        env::standardize_corpus(corpus);
        const std::size_t fields = corpus.front().feedback.front().scores.size();
        agent::SftConfig cfg{get_as<int>(config.at("sft"), "epochs", "sft"),
                             get_as<int>(config.at("sft"), "batch_size", "sft"),
                             get_as<double>(config.at("sft"), "lr", "sft"), derive_seed(master, "agent.sft")};
        const auto result = agent::train_sft(corpus, actor_descriptor(config, dim, fields), cfg);
        result.actor.save((fs::path(out_dir) / "actor_sft.json").string());
        agent::write_curve_csv((fs::path(out_dir) / "sft_curve.csv").string(), result.curve);
        inputs[collected_file(1)] = in_path.string();
        write_manifest(out_dir, "train sft", config, inputs, {"actor_sft.json", "sft_curve.csv"});
        return 0;
    }
    if (phase != "cql") throw ConfigError("train phase must be sft or cql");

    if (actor_path.empty()) actor_path = get_as<std::string>(config.at("paths"), "actor_sft", "paths");
    if (actor_path.empty()) throw ConfigError("cql needs the sft checkpoint (--actor or paths.actor_sft)");
    config["paths"]["actor_sft"] = actor_path;
    if (!fs::exists(actor_path)) throw DataError("sft checkpoint not found: " + actor_path);
    const auto actor_init = nn::NetworkParams::load(actor_path);

    std::vector<core::TrajectoryRecord> corpus;
    for (int k : tiers) {
        const fs::path in_path = fs::path(input_dir) / collected_file(k);
        auto part = core::read_trajectories(in_path.string(), dim);
        corpus.insert(corpus.end(), part.begin(), part.end());
        inputs[collected_file(k)] = in_path.string();
    }
    if (corpus.empty()) throw EmptyCorpus("no trajectories under " + input_dir);
    env::standardize_corpus(corpus);
    const std::size_t fields = corpus.front().feedback.front().scores.size();
    const std::vector<double> lambda(fields, 1.0 / static_cast<double>(fields));
    const auto transitions = agent::build_transitions(corpus, lambda);

    const json& cj = config.at("cql");
    agent::CqlConfig cfg;
    cfg.alpha_cql = get_as<double>(cj, "alpha_cql", "cql");
    cfg.discount = get_as<double>(cj, "discount", "cql");
    cfg.ood_action_samples = get_as<int>(cj, "ood_action_samples", "cql");
    cfg.target_sync_period = get_as<int>(cj, "target_sync_period", "cql");
    cfg.critic_lr = get_as<double>(cj, "critic_lr", "cql");
    cfg.actor_lr = get_as<double>(cj, "actor_lr", "cql");
    cfg.bc_anchor = get_as<double>(cj, "bc_anchor", "cql");
    cfg.batch_size = get_as<int>(cj, "batch_size", "cql");
    cfg.iterations = get_as<int>(cj, "iterations", "cql");
    cfg.seed = derive_seed(master, "agent.cql");
    const auto result = agent::train_cql(actor_init, transitions, agent::desk_critic_descriptor(static_cast<int>(dim)), cfg);
    result.actor.save((fs::path(out_dir) / "actor_rl.json").string());
    result.critic.save((fs::path(out_dir) / "critic.json").string());
    agent::write_curve_csv((fs::path(out_dir) / "cql_critic_curve.csv").string(), result.critic_curve);
    agent::write_curve_csv((fs::path(out_dir) / "cql_actor_curve.csv").string(), result.actor_curve);
    inputs["actor_sft"] = actor_path;
    write_manifest(out_dir, "train cql", config, inputs,
                   {"actor_rl.json", "critic.json", "cql_critic_curve.csv", "cql_actor_curve.csv"},
                   json{{"reward_map", {{"offset", result.reward_map.offset}, {"scale", result.reward_map.scale}}}});
    return 0;
}

orch::GuidedRunConfig guided_config(json& config, const std::string& space_flag) {
    if (!space_flag.empty()) config["guide"]["space"] = space_flag;
    const json& gj = config.at("guide");
    const std::string mode = get_as<std::string>(gj, "space", "guide");
    if (mode != "native" && mode != "fields") throw ConfigError("'guide.space' must be native or fields");
    orch::GuidedRunConfig cfg;
    cfg.max_steps = get_as<int>(gj, "max_steps", "guide");
    cfg.samples_per_step = get_as<int>(gj, "samples_per_step", "guide");
    cfg.target_pool_size = get_as<long>(gj, "target_pool_size", "guide");
    cfg.pretrain_steps = get_as<int>(gj, "pretrain_steps", "guide");
    cfg.space_mode = mode == "fields" ? orch::SpaceMode::Fields : orch::SpaceMode::Native;
    cfg.seed = derive_seed(get_as<std::uint64_t>(config, "seed", ""), "guide");
    cfg.validate();
    return cfg;
}

json report_extra(const orch::RunReport& report) {
    return json{{"early_stop_step", report.early_stop_step ? json(*report.early_stop_step) : json()},
                {"coverage", report.coverage},
                {"source_samples", report.source_samples}};
}

int cmd_guide(const std::string& config_path, std::string actor_path, const std::string& space_flag,
              const std::string& out_dir) {
    json config = load_config(config_path);
    if (actor_path.empty()) actor_path = get_as<std::string>(config.at("paths"), "actor_rl", "paths");
    if (actor_path.empty()) throw ConfigError("guide needs an agent checkpoint (--actor or paths.actor_rl)");
    config["paths"]["actor_rl"] = actor_path;
    if (!fs::exists(actor_path)) throw DataError("agent checkpoint not found: " + actor_path);

    const auto bundle = build_env(config);
    const auto& space = bundle.corpora.space();
    const auto start = resolve_start_state(config, space);
    const auto target = resolve_target_state(config, space);
    const auto cfg = guided_config(config, space_flag);

    auto actor = nn::NetworkParams::load(actor_path);
    const int expect_in = static_cast<int>(space.dimension() + bundle.evals.size());
    if (actor.descriptor().input_dim != expect_in || actor.descriptor().output_dim != static_cast<int>(space.dimension()))
        throw CheckpointInvalid("agent checkpoint shape does not match the domain space");

    orch::AgentPolicy policy(std::move(actor));
    const auto report = orch::guide_training(policy, cfg, bundle.corpora, bundle.evals, start, &target);
    orch::write_run_report(out_dir, report, space, config.dump());
    write_manifest(out_dir, "guide", config, {{"config", config_path}, {"actor", actor_path}},
                   {"trajectory.jsonl", "timeseries.csv"}, report_extra(report));
    return 0;
}

int cmd_baseline(const std::string& config_path, std::string mode_flag, const std::string& out_dir) {
    json config = load_config(config_path);
    if (!mode_flag.empty()) config["baseline"]["mode"] = mode_flag;
    const std::string mode = get_as<std::string>(config.at("baseline"), "mode", "baseline");

    const auto bundle = build_env(config);
    const auto& space = bundle.corpora.space();
    const auto start = resolve_start_state(config, space);
    const auto target = resolve_target_state(config, space);
    const auto cfg = guided_config(config, "");

    orch::BaselineMode bm;
    std::optional<core::MixtureDistribution> mixture;
    json extra = json::object();
    if (mode == "naive") {
        bm = orch::BaselineMode::Naive;
    } else if (mode == "static") {
        bm = orch::BaselineMode::StaticMixture;
        const json& mj = config.at("baseline").at("static_mixture");
        if (mj.is_null()) throw ConfigError("static baseline needs 'baseline.static_mixture'");
        try {
            mixture = core::validate_distribution(mj.get<std::vector<double>>(), space.dimension());
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad 'baseline.static_mixture': ") + e.what());
        }
    } else if (mode == "regmix") {
        bm = orch::BaselineMode::RegMixLite;
        const json& rj = config.at("baseline").at("regmix");
        orch::RegMixLiteConfig rcfg{get_as<int>(rj, "proxy_runs", "baseline.regmix"),
                                    get_as<int>(rj, "steps_per_run", "baseline.regmix"),
                                    get_as<int>(rj, "samples_per_step", "baseline.regmix"),
                                    derive_seed(get_as<std::uint64_t>(config, "seed", ""), "regmix")};
        const std::vector<double> lambda(bundle.evals.size(), 1.0 / static_cast<double>(bundle.evals.size()));
        mixture = orch::regmix_lite_mixture(rcfg, bundle.corpora, bundle.evals, lambda);
        extra["fitted_mixture"] = mixture->weights();
    } else {
        throw ConfigError("'baseline.mode' must be naive, static or regmix");
    }

    const auto report = orch::run_baseline(bm, cfg, bundle.corpora, bundle.evals, start, target, mixture);
    orch::write_run_report(out_dir, report, space, config.dump());
    const json run_info = report_extra(report);
    for (auto it = run_info.begin(); it != run_info.end(); ++it) extra[it.key()] = it.value();
    write_manifest(out_dir, "baseline", config, {{"config", config_path}}, {"trajectory.jsonl", "timeseries.csv"},
                   extra);
    return 0;
}

int cmd_analyze(const std::string& input_path, int field, const std::string& config_path,
                const std::string& out_dir) {
    if (field < 0) throw ConfigError("--field must be >= 0");
    std::ifstream probe(input_path);
    if (!probe) throw DataError("cannot open " + input_path);
    std::string first_line;
    while (std::getline(probe, first_line) && first_line.empty()) {
    }
    if (first_line.empty()) throw EmptyCorpus("no trajectories in " + input_path);
    std::size_t dim = 0;
    try {
        dim = json::parse(first_line).at("start").size();
    } catch (const json::exception& e) {
        throw DataError("bad trajectory line: " + std::string(e.what()));
    }

    std::vector<std::string> names;
    if (!config_path.empty()) {
        const auto space = space_from_config(load_config(config_path).at("env"));
        if (space.dimension() != dim) throw DataError("config domain count does not match the trajectory file");
        for (const auto& d : space.domains()) names.push_back(d.name);
    } else {
        for (std::size_t i = 0; i < dim; ++i) names.push_back("d" + std::to_string(i));
    }

    const auto corpus = core::read_trajectories(input_path, dim);
    const auto analysis = orch::analyze_trajectories(corpus, static_cast<std::size_t>(field));

    std::ostringstream csv;
    csv << "domain,side,mean_weight\n";
    csv.precision(12);
    auto emit = [&](const char* side, const std::optional<core::MixtureDistribution>& mean) {
        if (!mean) {
            csv << "-," << side << ",empty\n";
            return;
        }
        for (std::size_t i = 0; i < dim; ++i) csv << names[i] << ',' << side << ',' << (*mean)[i] << '\n';
    };
    emit("increase", analysis.increase_mean);
    emit("decrease", analysis.decrease_mean);

    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "analysis.csv", csv.str());
    json resolved{{"version", 1}, {"seed", 0}, {"field", field},
                  {"increase_count", analysis.increase_count}, {"decrease_count", analysis.decrease_count}};
    write_manifest(out_dir, "analyze", resolved, {{"trajectories", input_path}}, {"analysis.csv"});
    return 0;
}

int cmd_estimate_start(const std::string& input_path, const std::string& out_dir) {
    const json in = load_json_file(input_path, false);
    for (auto it = in.begin(); it != in.end(); ++it) {
        const std::string& k = it.key();
        if (k != "version" && k != "counts" && k != "truth" && k != "sample_grid" && k != "repeats" && k != "seed")
            throw DataError("unknown key '" + k + "' in " + input_path);
    }
    fs::create_directories(out_dir);
    std::vector<std::string> outputs;
    json extra = json::object();

    if (in.contains("counts")) {
        const auto counts = in.at("counts").get<std::vector<std::uint64_t>>();
        const auto estimate = core::estimate_state_from_counts(counts);
        write_text(fs::path(out_dir) / "start_state.json",
                   json{{"version", 1}, {"start_state", estimate.weights()}}.dump(2) + "\n");
        outputs.push_back("start_state.json");
    } else if (in.contains("truth")) {
        const auto truth_w = in.at("truth").get<std::vector<double>>();
        const auto truth = core::validate_distribution(truth_w, truth_w.size());
        const auto grid = in.value("sample_grid", std::vector<long>{500, 1000, 2000, 3000, 5000});
        const int repeats = in.value("repeats", 31);
        const std::uint64_t seed = in.value("seed", std::uint64_t{1});
        if (repeats < 1) throw DataError("repeats must be >= 1");

        std::ostringstream csv;
        csv << "n,median_kl\n";
        csv.precision(12);
        std::vector<double> last_estimate;
        for (long n : grid) {
            if (n < 1) throw DataError("sample_grid entries must be >= 1");
            std::vector<double> kls;
            for (int r = 0; r < repeats; ++r) {
                Rng rng(derive_seed(seed, "estimate", static_cast<std::uint64_t>(n) * 1000 + r));
                std::vector<std::uint64_t> counts(truth.dimension(), 0);
                for (long i = 0; i < n; ++i) ++counts[rng.categorical(truth.weights(), 1.0)];
                const auto est = core::estimate_state_from_counts(counts);
                kls.push_back(core::kl_divergence(est, truth));
                if (r == 0 && n == grid.back()) last_estimate = est.weights();
            }
            std::nth_element(kls.begin(), kls.begin() + kls.size() / 2, kls.end());
            csv << n << ',' << kls[kls.size() / 2] << '\n';
        }
        write_text(fs::path(out_dir) / "kl_curve.csv", csv.str());
        write_text(fs::path(out_dir) / "start_state.json",
                   json{{"version", 1}, {"start_state", last_estimate}}.dump(2) + "\n");
        outputs = {"kl_curve.csv", "start_state.json"};
        extra["repeats"] = repeats;
    } else {
        throw DataError("input needs either 'counts' or 'truth'");
    }
    json resolved{{"version", 1}, {"seed", in.value("seed", std::uint64_t{0})}};
    write_manifest(out_dir, "estimate-start", resolved, {{"input", input_path}}, outputs, extra);
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"data mixing agent laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir, input_path, actor_path, space_flag, mode_flag, phase;
    int workers = 0, field = 0;
    bool resume = false;

    auto* gen = app.add_subcommand("gen-env", "write the seeded environment spec");
    gen->add_option("--config", config_path)->required();
    gen->add_option("--out", out_dir)->required();

    auto* sample = app.add_subcommand("sample", "sample trajectory tiers");
    sample->add_option("--config", config_path)->required();
    sample->add_option("--out", out_dir)->required();

    auto* collect = app.add_subcommand("collect", "attach proxy feedback to trajectories");
    collect->add_option("--config", config_path)->required();
    collect->add_option("--input", input_path);
    collect->add_option("--out", out_dir)->required();
    collect->add_option("--workers", workers);
    collect->add_flag("--resume", resume);

    auto* train = app.add_subcommand("train", "train the agent (sft or cql phase)");
    train->add_option("--config", config_path)->required();
    train->add_option("--phase", phase)->required()->check(CLI::IsMember({"sft", "cql"}));
    train->add_option("--input", input_path);
    train->add_option("--actor", actor_path);
    train->add_option("--out", out_dir)->required();

    auto* guide = app.add_subcommand("guide", "agent-guided continual training run");
    guide->add_option("--config", config_path)->required();
    guide->add_option("--actor", actor_path);
    guide->add_option("--space", space_flag)->check(CLI::IsMember({"native", "fields"}));
    guide->add_option("--out", out_dir)->required();

    auto* baseline = app.add_subcommand("baseline", "baseline continual training run");
    baseline->add_option("--config", config_path)->required();
    baseline->add_option("--mode", mode_flag)->check(CLI::IsMember({"naive", "static", "regmix"}));
    baseline->add_option("--out", out_dir)->required();

    auto* analyze = app.add_subcommand("analyze", "increase/decrease mean mixtures per feedback field");
    analyze->add_option("--input", input_path)->required();
    analyze->add_option("--field", field)->required();
    analyze->add_option("--config", config_path);
    analyze->add_option("--out", out_dir)->required();

    auto* estimate = app.add_subcommand("estimate-start", "start state from counts or Monte-Carlo KL curve");
    estimate->add_option("--input", input_path)->required();
    estimate->add_option("--out", out_dir)->required();

    std::vector<std::string> argv{"mixagent"};
    argv.insert(argv.end(), args.begin(), args.end());
    std::vector<char*> raw;
    raw.reserve(argv.size());
    for (auto& a : argv) raw.push_back(a.data());

    try {
        app.parse(static_cast<int>(raw.size()), raw.data());
        if (gen->parsed()) return cmd_gen_env(config_path, out_dir);
        if (sample->parsed()) return cmd_sample(config_path, out_dir);
        if (collect->parsed()) return cmd_collect(config_path, input_path, out_dir, workers, resume);
        if (train->parsed()) return cmd_train(config_path, phase, input_path, actor_path, out_dir);
        if (guide->parsed()) return cmd_guide(config_path, actor_path, space_flag, out_dir);
        if (baseline->parsed()) return cmd_baseline(config_path, mode_flag, out_dir);
        if (analyze->parsed()) return cmd_analyze(input_path, field, config_path, out_dir);
        if (estimate->parsed()) return cmd_estimate_start(input_path, out_dir);
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
}

int run(int argc, char** argv) { return dispatch(std::vector<std::string>(argv + 1, argv + argc)); }

}  // namespace mixagent::cli
