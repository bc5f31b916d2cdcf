#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "collider_demo.hpp"
#include "manifest.hpp"
#include "ust/causal_graph.hpp"
#include "ust/classifiers.hpp"
#include "ust/dataset.hpp"
#include "ust/errors.hpp"
#include "ust/evaluation.hpp"
#include "ust/scm.hpp"
#include "ust/situation_test.hpp"

namespace ust::cli {

namespace {

namespace fs = std::filesystem;

enum class LogLevel { quiet, error, warn, info, debug };

LogLevel log_level_from_env() {
    const char* v = std::getenv("UST_LOG");
    if (!v) return LogLevel::warn;
    const std::string s(v);
    if (s == "quiet") return LogLevel::quiet;
    if (s == "error") return LogLevel::error;
    if (s == "info") return LogLevel::info;
    if (s == "debug") return LogLevel::debug;
    return LogLevel::warn;
}

class Session {
public:
    Session(std::ostream& out, std::ostream& err) : out(out), err(err), m_level(log_level_from_env()) {}

    std::ostream& out;
    std::ostream& err;
    RunManifest manifest;

    void log(LogLevel level, const std::string& msg) {
        if (level > m_level) return;
        static constexpr const char* names[] = {"", "error", "warn", "info", "debug"};
        err << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
    }

    std::string read_input(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ValidationError("cannot read '" + path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        std::string bytes = buf.str();
        manifest.inputs.push_back({path, bytes.size(), sha256_hex(bytes)});
        log(LogLevel::debug, "read " + path + " (" + std::to_string(bytes.size()) + " bytes)");
        return bytes;
    }

    void write_output(const std::string& path, const std::string& bytes) {
        const fs::path p(path);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream o(path, std::ios::binary);
        if (!o) throw RuntimeFailure("cannot write '" + path + "'");
        o << bytes;
        if (!o) throw RuntimeFailure("write to '" + path + "' failed");
        manifest.outputs.push_back(path);
        log(LogLevel::info, "wrote " + path);
    }

private:
    LogLevel m_level;
};

// ------------------------------------------------------------------ options

struct GenOptions {
    std::size_t n = 10'000;
    std::uint64_t seed = 1;
    double delta = 1.0;
    double collider_y = 1.0;
    double collider_a = 1.0;
    double noise = 0.01;
    std::string out;
    std::string dag_out;
};

struct AuditOptions {
    std::string dag;
    std::string data;
    std::string train;
    std::string model;
    std::string schema;
    std::string dist;
    std::string fit_dist_from;
    std::string dist_out;
    std::size_t bins = 10;
    std::string protected_attribute;
    std::string outcome;
    double alpha = 0.0;
    std::vector<std::string> features;
    std::vector<std::string> exclude;
    std::uint64_t seed = 0;
    double l2 = 1e-4;
    std::size_t iterations = 5000;
    std::size_t threads = 0;
    std::string out_csv;
    std::string out_json;
};

struct EvalOptions {
    std::string truth = "true_ds";
    std::string out_json;
    std::string out_records;
    std::vector<std::size_t> example_ids;
};

struct CheckDagOptions {
    std::string dag;
    std::string protected_attribute;
    std::string outcome;
    std::string out_json;
};

struct DemoOptions {
    std::string out_dir = "collider_demo";
    std::size_t n = 200;
    std::uint64_t seed = 1;
    double alpha = 0.05;
};

void add_audit_options(CLI::App* cmd, AuditOptions& o) {
    cmd->add_option("--dag", o.dag, "Causal DAG (edge list or JSON)")->required();
    cmd->add_option("--data", o.data, "Test records to audit (CSV)")->required();
    cmd->add_option("--model", o.model, "lr | nb | knn[:k=K] | external:<command> | lookup:<file>")->required();
    cmd->add_option("--train", o.train, "Training CSV for built-in models");
    cmd->add_option("--schema", o.schema, "Schema JSON; inferred from the CSV when absent");
    cmd->add_option("--dist", o.dist, "Collider distribution JSON");
    cmd->add_option("--fit-dist-from", o.fit_dist_from, "CSV to fit the collider distribution from");
    cmd->add_option("--dist-out", o.dist_out, "Write the fitted collider distribution here");
    cmd->add_option("--bins", o.bins, "Bins per continuous collider variable")->check(CLI::PositiveNumber);
    cmd->add_option("--protected", o.protected_attribute, "Protected attribute")->required();
    cmd->add_option("--outcome", o.outcome, "Outcome attribute")->required();
    cmd->add_option("--alpha", o.alpha, "Discrimination threshold")->required()->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--features", o.features, "Model inputs (default: DAG nodes in the data except the outcome)")
        ->delimiter(',');
    cmd->add_option("--exclude", o.exclude, "Attributes to drop from the default feature list")->delimiter(',');
    cmd->add_option("--seed", o.seed, "Training seed");
    cmd->add_option("--l2", o.l2, "L2 penalty for logistic regression");
    cmd->add_option("--iterations", o.iterations, "Maximum gradient steps for logistic regression");
    cmd->add_option("--threads", o.threads, "Worker threads (0 = available parallelism)");
}

// ------------------------------------------------------------------- audit

struct ModelSpec {
    ModelKind kind = ModelKind::logistic;
    std::size_t k = 5;
    std::string argument;  // command or lookup file
};

ModelSpec parse_model_spec(const std::string& spec) {
    ModelSpec m;
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (head == "lr" || head == "logistic") {
        m.kind = ModelKind::logistic;
    } else if (head == "nb" || head == "naive_bayes") {
        m.kind = ModelKind::naive_bayes;
    } else if (head == "knn") {
        m.kind = ModelKind::knn;
        if (!rest.empty()) {
            if (rest.rfind("k=", 0) != 0) throw ValidationError("bad knn spec '" + spec + "', expected knn:k=<int>");
            try {
                std::size_t used = 0;
                const long k = std::stol(rest.substr(2), &used);
                if (used != rest.size() - 2 || k <= 0) throw std::invalid_argument("k");
                m.k = static_cast<std::size_t>(k);
            } catch (const std::exception&) {
                throw ValidationError("bad knn spec '" + spec + "', k must be a positive integer");
            }
        }
    } else if (head == "external") {
        m.kind = ModelKind::external;
        if (rest.empty()) throw ValidationError("external model spec needs a command: external:<command>");
        m.argument = rest;
    } else if (head == "lookup") {
        m.kind = ModelKind::lookup;
        if (rest.empty()) throw ValidationError("lookup model spec needs a file: lookup:<file>");
        m.argument = rest;
    } else {
        throw ValidationError("unknown model '" + spec + "'");
    }
    if ((m.kind == ModelKind::logistic || m.kind == ModelKind::naive_bayes) && !rest.empty()) {
        throw ValidationError("model '" + head + "' takes no parameters");
    }
    return m;
}

struct PreparedAudit {
    Dag dag;
    AuditRoles roles;
    Dataset test;
    std::shared_ptr<const ClassifierModel> model;
    AuditConfig config;
};

std::vector<FeatureSpec> feature_specs(const Schema& schema, const std::vector<std::string>& names) {
    std::vector<FeatureSpec> out;
    for (const auto& n : names) {
        const auto& a = schema.attribute(n);
        out.push_back({a.name, a.kind, a.discrete() ? a.cardinality() : 0});
    }
    return out;
}

PreparedAudit prepare_audit(Session& s, const AuditOptions& o) {
    PreparedAudit p;
    p.roles = {o.protected_attribute, o.outcome};
    p.dag = parse_dag(s.read_input(o.dag));
    const auto check = validate_for_audit(p.dag, p.roles);
    if (!check.ok()) {
        std::string msg = "DAG is not usable for this audit:";
        for (const auto& e : check.errors) msg += " " + e + ";";
        msg.pop_back();
        throw ValidationError(msg);
    }
    for (const auto& w : check.warnings) s.log(LogLevel::warn, w);

    const auto spec = parse_model_spec(o.model);
    const bool builtin = spec.kind == ModelKind::logistic || spec.kind == ModelKind::naive_bayes ||
                         spec.kind == ModelKind::knn;
    if (builtin && o.train.empty()) throw ValidationError("--train is required for built-in model '" + o.model + "'");
    if (!builtin && !o.train.empty()) s.log(LogLevel::warn, "--train is ignored for model '" + o.model + "'");

    std::optional<Schema> schema;
    if (!o.schema.empty()) {
        schema = Schema::from_json(s.read_input(o.schema));
        if (schema->roles().protected_attribute != p.roles.protected_attribute ||
            schema->roles().outcome != p.roles.outcome) {
            throw ValidationError("schema roles disagree with --protected/--outcome");
        }
    }
    std::optional<Dataset> train;
    if (builtin) {
        const auto text = s.read_input(o.train);
        train = schema ? load_csv(text, *schema) : load_csv_infer(text, p.roles);
        if (!schema) schema = train->schema;
    }
    {
        const auto text = s.read_input(o.data);
        p.test = schema ? load_csv(text, *schema) : load_csv_infer(text, p.roles);
    }
    const Schema& sch = p.test.schema;

    std::vector<std::string> features = o.features;
    if (features.empty() && spec.kind != ModelKind::lookup) {
        for (const auto& a : sch.attributes()) {
            if (a.name == p.roles.outcome || !p.dag.contains(a.name)) continue;
            if (std::find(o.exclude.begin(), o.exclude.end(), a.name) != o.exclude.end()) continue;
            features.push_back(a.name);
        }
    }
    for (const auto& f : features) sch.require(f);

    switch (spec.kind) {
    case ModelKind::logistic:
    case ModelKind::naive_bayes:
    case ModelKind::knn: {
        TrainingOptions t;
        t.seed = o.seed;
        t.l2 = o.l2;
        t.iterations = o.iterations;
        t.k = spec.k;
        s.manifest.seeds["training"] = o.seed;
        const auto start = std::chrono::steady_clock::now();
        p.model = ust::train(spec.kind, *train, features, t);
        const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
        s.log(LogLevel::info, "trained " + p.model->describe() + " in " + std::to_string(took.count()) + " s");
        break;
    }
    case ModelKind::external:
        p.model = std::make_shared<ExternalModel>(feature_specs(sch, features), spec.argument);
        break;
    case ModelKind::lookup:
        p.model = LookupModel::from_json(s.read_input(spec.argument));
        break;
    }
    const auto names = p.model->feature_names();
    sch.check_against(p.dag, NodeSet(names.begin(), names.end()));

    const auto partition = partition_nodes(p.dag, p.roles);
    EmpiricalJointDistribution dist;
    if (!o.dist.empty()) {
        dist = load_distribution(s.read_input(o.dist));
    } else if (!o.fit_dist_from.empty()) {
        const auto source = load_csv(s.read_input(o.fit_dist_from), sch);
        std::vector<std::string> vars;
        for (auto v : p.dag.topological_order()) {
            if (partition.descendants.count(p.dag.name(v))) vars.push_back(p.dag.name(v));
        }
        std::vector<std::string> warnings;
        dist = fit_distribution(source, vars, o.bins, &warnings);
        for (const auto& w : warnings) s.log(LogLevel::warn, w);
        s.log(LogLevel::info, "collider distribution has " + std::to_string(dist.support_size()) + " support tuples");
    } else if (!partition.descendants.empty()) {
        throw ValidationError("--dist or --fit-dist-from is required: " + o.outcome + " has descendants in the DAG");
    }
    if (!o.dist_out.empty()) s.write_output(o.dist_out, dist.to_json());

    p.config = make_audit_config(p.dag, p.roles, o.alpha, std::move(dist));
    p.config.threads = o.threads;
    return p;
}

std::string audit_summary(const DiscriminationReport& report) {
    const auto sum = report.summary();
    std::ostringstream o;
    o << "audited " << sum.count << " individuals: " << sum.flagged << " flagged by UST, " << sum.naive_flagged
      << " by NST (alpha=" << format_number(report.threshold) << ")\n";
    o << "mean ds " << format_number(sum.mean_ds) << ", mean |nds| " << format_number(sum.mean_abs_nds) << "\n";
    return o.str();
}

int cmd_audit(Session& s, const AuditOptions& o) {
    auto p = prepare_audit(s, o);
    const auto start = std::chrono::steady_clock::now();
    const auto report = audit(*p.model, p.test, p.config);
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    s.log(LogLevel::info, "audit took " + std::to_string(took.count()) + " s");
    if (!o.out_csv.empty()) s.write_output(o.out_csv, report.to_csv());
    if (!o.out_json.empty()) s.write_output(o.out_json, report.to_json());
    s.out << audit_summary(report);
    return kExitOk;
}

int cmd_eval(Session& s, const AuditOptions& o, const EvalOptions& e) {
    auto p = prepare_audit(s, o);
    const auto truths = p.test.column(e.truth);
    const auto cmp = compare(*p.model, p.test, p.config, truths);
    if (!e.out_json.empty()) s.write_output(e.out_json, cmp.to_json());
    if (!e.out_records.empty()) s.write_output(e.out_records, cmp.per_record_csv());
    s.out << cmp.to_text(p.model->describe());
    if (!e.example_ids.empty()) s.out << cmp.example_table(e.example_ids);
    return kExitOk;
}

int cmd_gen(Session& s, const GenOptions& o) {
    SyntheticConfig cfg;
    cfg.n = o.n;
    cfg.seed = o.seed;
    cfg.delta = o.delta;
    cfg.collider_y_weight = o.collider_y;
    cfg.collider_a_weight = o.collider_a;
    cfg.noise_bound = o.noise;
    cfg.validate();
    s.manifest.seeds["generator"] = o.seed;
    const auto data = generate_synthetic(cfg);
    s.write_output(o.out, to_csv(data));
    if (!o.dag_out.empty()) s.write_output(o.dag_out, synthetic_dag().to_edge_list());
    s.out << "wrote " << data.size() << " rows to " << o.out << "\n";
    return kExitOk;
}

int cmd_check_dag(Session& s, const CheckDagOptions& o) {
    const auto report = validate_for_audit(std::string_view(s.read_input(o.dag)), {o.protected_attribute, o.outcome});
    if (!o.out_json.empty()) s.write_output(o.out_json, report.to_json());
    s.out << report.to_text();
    return report.ok() ? kExitOk : kExitValidation;
}

int cmd_demo(Session& s, const DemoOptions& o) {
    if (o.n == 0) throw ValidationError("--n must be positive");
    const auto scm = collider_demo_scm();
    const auto model = collider_demo_model(scm);
    const auto dist = collider_demo_distribution(scm);
    const auto data = collider_demo_data(scm, o.n, o.seed);
    s.manifest.seeds["sampling"] = o.seed;

    const fs::path dir(o.out_dir);
    s.write_output((dir / "dag.txt").string(), scm.dag().to_edge_list());
    s.write_output((dir / "scm.json").string(), scm.to_json());
    s.write_output((dir / "model.json").string(), model->to_json());
    s.write_output((dir / "dist.json").string(), dist.to_json());
    s.write_output((dir / "test.csv").string(), to_csv(data));

    const auto config = make_audit_config(scm.dag(), kColliderDemoRoles, o.alpha, dist);
    const auto report = audit(*model, data, config);
    s.write_output((dir / "report.csv").string(), report.to_csv());
    s.write_output((dir / "report.json").string(), report.to_json());

    double max_ds = 0.0, min_nds = 1.0;
    for (const auto& r : report.individuals) {
        max_ds = std::max(max_ds, r.ds);
        min_nds = std::min(min_nds, std::abs(r.nds));
    }
    s.out << audit_summary(report);
    s.out << "min |nds| " << format_number(min_nds) << ", max ds " << format_number(max_ds) << "\n";
    return kExitOk;
}

// --------------------------------------------------------------- plumbing

void record_flags(const CLI::App* cmd, RunManifest& m) {
    for (const auto* opt : cmd->get_options()) {
        if (opt->get_name() == "--help" || opt->count() == 0) continue;
        std::string joined;
        for (const auto& r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
        std::string name = opt->get_name();
        while (!name.empty() && name.front() == '-') name.erase(0, 1);
        m.flags[name] = joined;
    }
}

std::string default_manifest_path(const RunManifest& m) {
    if (m.outputs.empty()) return "";
    return m.outputs.front() + ".manifest.json";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Session s(out, err);

    CLI::App app{"Situation testing audit of binary classifiers", "ust"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);
    std::string manifest_path;
    app.add_option("--manifest", manifest_path, "Where to write the run manifest");
    app.fallthrough();

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate synthetic data with a collider");
    gen_cmd->add_option("--n", gen.n, "Rows")->required();
    gen_cmd->add_option("--seed", gen.seed, "RNG seed");
    gen_cmd->add_option("--delta", gen.delta, "Direct-effect scale");
    gen_cmd->add_option("--collider-y", gen.collider_y, "Weight of Y in C");
    gen_cmd->add_option("--collider-a", gen.collider_a, "Weight of A in C");
    gen_cmd->add_option("--noise", gen.noise, "Upper bound of the uniform noise in C");
    gen_cmd->add_option("--out", gen.out, "Output CSV")->required();
    gen_cmd->add_option("--dag-out", gen.dag_out, "Also write the generating DAG");

    AuditOptions aud;
    auto* audit_cmd = app.add_subcommand("audit", "Score individuals with NST and UST");
    add_audit_options(audit_cmd, aud);
    audit_cmd->add_option("--out-csv", aud.out_csv, "Per-individual report CSV");
    audit_cmd->add_option("--out-json", aud.out_json, "Report JSON");

    AuditOptions ev_aud;
    EvalOptions ev;
    auto* eval_cmd = app.add_subcommand("eval", "Compare NST and UST against a ground-truth column");
    add_audit_options(eval_cmd, ev_aud);
    eval_cmd->add_option("--truth", ev.truth, "Ground-truth column");
    eval_cmd->add_option("--out-json", ev.out_json, "Comparison JSON");
    eval_cmd->add_option("--out-records", ev.out_records, "Per-record scores CSV");
    eval_cmd->add_option("--examples", ev.example_ids, "Record ids to print side by side")->delimiter(',');

    CheckDagOptions chk;
    auto* check_cmd = app.add_subcommand("check-dag", "Validate a DAG for an audit");
    check_cmd->add_option("--dag", chk.dag, "Causal DAG")->required();
    check_cmd->add_option("--protected", chk.protected_attribute, "Protected attribute")->required();
    check_cmd->add_option("--outcome", chk.outcome, "Outcome attribute")->required();
    check_cmd->add_option("--out-json", chk.out_json, "Report JSON");

    DemoOptions demo;
    auto* demo_cmd = app.add_subcommand("demo-collider", "Regenerate and audit the Race/Salary/Suburb scenario");
    demo_cmd->add_option("--out-dir", demo.out_dir, "Output directory");
    demo_cmd->add_option("--n", demo.n, "Individuals to sample");
    demo_cmd->add_option("--seed", demo.seed, "Sampling seed");
    demo_cmd->add_option("--alpha", demo.alpha, "Discrimination threshold")->check(CLI::Range(0.0, 1.0));

    std::string replay_path;
    auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    replay_cmd->add_option("manifest", replay_path, "Manifest JSON")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help(e.get_name() == "--help" ? "" : e.get_name());
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        if (!app.get_subcommands().empty()) err << "run with " << app.get_subcommands().front()->get_name() << " --help for usage\n";
        return kExitValidation;
    }

    CLI::App* cmd = app.get_subcommands().front();
    s.manifest.command = cmd->get_name();
    s.manifest.argv = args;
    s.manifest.timestamp = utc_timestamp();
    record_flags(cmd, s.manifest);

    int code = kExitOk;
    try {
        if (cmd == replay_cmd) {
            const auto m = RunManifest::from_json(s.read_input(replay_path));
            for (const auto& in : m.inputs) {
                std::ifstream f(in.path, std::ios::binary);
                std::ostringstream buf;
                buf << f.rdbuf();
                if (!f || sha256_hex(buf.str()) != in.sha256) {
                    s.log(LogLevel::warn, "input '" + in.path + "' differs from the recorded digest");
                }
            }
            if (!m.argv.empty() && m.argv.front() == "replay") throw ValidationError("manifest records a replay");
            return run(m.argv, out, err);
        }
        if (cmd == gen_cmd) {
            if (gen.n == 0) throw ValidationError("--n must be positive");
            code = cmd_gen(s, gen);
        } else if (cmd == audit_cmd) {
            code = cmd_audit(s, aud);
        } else if (cmd == eval_cmd) {
            code = cmd_eval(s, ev_aud, ev);
        } else if (cmd == check_cmd) {
            code = cmd_check_dag(s, chk);
        } else if (cmd == demo_cmd) {
            code = cmd_demo(s, demo);
        }
        std::string path = manifest_path;
        if (path.empty() && cmd == demo_cmd) path = (fs::path(demo.out_dir) / "manifest.json").string();
        if (path.empty()) path = default_manifest_path(s.manifest);
        if (!path.empty()) {
            std::ofstream o(path, std::ios::binary);
            if (!o) throw RuntimeFailure("cannot write manifest '" + path + "'");
            o << s.manifest.to_json();
        }
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const RuntimeFailure& e) {
        err << "failure: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << "\n";
        return kExitRuntime;
    }
    return code;
}

}  // namespace ust::cli
