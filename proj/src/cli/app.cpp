#include "codebench/cli/app.hpp"

#include "codebench/analysis/breakdown.hpp"
#include "codebench/analysis/metrics.hpp"
#include "codebench/cli/config.hpp"
#include "codebench/corpus/corpus.hpp"
#include "codebench/corpus/keywords.hpp"
#include "codebench/eval/harness.hpp"
#include "codebench/pipeline/checks.hpp"
#include "codebench/pipeline/pipeline.hpp"
#include "codebench/pipeline/slots.hpp"
#include "codebench/pipeline/templates.hpp"
#include "codebench/python/syntax_tree.hpp"
#include "codebench/python/tokenizer.hpp"
#include "codebench/study/http.hpp"
#include "codebench/util/errors.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <csignal>
#include <ostream>
#include <set>

namespace codebench::cli {

namespace {

struct Options {
    std::string config;
    std::optional<std::string> output_dir;
    std::optional<std::size_t> jobs;
    std::optional<std::string> corpus;
    std::optional<std::size_t> limit;
    std::optional<std::string> io_keywords;
    std::optional<std::string> fragments;
    std::optional<std::string> dataset;
    std::optional<std::string> results;
    std::optional<std::string> model;
    std::optional<std::string> replay_mode;
    std::optional<std::string> transcript;
    std::optional<std::size_t> regenerations;
    std::optional<std::size_t> debug_iterations;
    std::optional<std::size_t> augment_k;
    std::optional<std::size_t> n_samples;
    std::optional<std::size_t> rounds;
    std::vector<std::size_t> k_list;
    std::optional<std::string> host;
    std::optional<int> port;
    std::optional<std::string> static_dir;
};

std::filesystem::path cwd_path(const std::string& p)
{
    return std::filesystem::absolute(p);
}

RunConfig make_config(const Options& o)
{
    RunConfig c = o.config.empty() ? config_from_json(json::object(), std::filesystem::current_path())
                                   : load_run_config(o.config);
    if (o.output_dir) c.output_dir = cwd_path(*o.output_dir);
    if (o.jobs) c.jobs = *o.jobs;
    if (o.corpus) c.corpus = cwd_path(*o.corpus);
    if (o.limit) c.limit = *o.limit;
    if (o.io_keywords) c.io_keywords = cwd_path(*o.io_keywords);
    if (o.transcript) c.transcript = cwd_path(*o.transcript);
    if (o.replay_mode) {
        try {
            c.replay_mode = llm::parse_replay_mode(*o.replay_mode);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    if (o.regenerations) c.regenerations = *o.regenerations;
    if (o.debug_iterations) c.debug_iterations = *o.debug_iterations;
    if (o.augment_k) c.augment_k = *o.augment_k;
    if (o.n_samples) c.n_samples = *o.n_samples;
    if (o.rounds) c.rounds = *o.rounds;
    if (!o.k_list.empty()) c.k_list = o.k_list;
    if (o.host) c.study_host = *o.host;
    if (o.port) c.study_port = *o.port;
    if (o.static_dir) c.static_dir = cwd_path(*o.static_dir);
    c.validate();
    return c;
}

std::filesystem::path input_path(const std::optional<std::string>& flag, const RunConfig& c, const std::string& name,
                                  const std::string& what)
{
    auto p = flag ? cwd_path(*flag) : c.output(name);
    require_exists(p, what);
    return p;
}

executor::Executor make_executor(const RunConfig& c)
{
    if (c.shim_command.empty()) throw ConfigError("executor.shim is required (the runner shim invocation)");
    executor::ExecutorConfig ec;
    ec.shim_command = c.shim_command;
    ec.scratch_root = c.scratch_dir ? *c.scratch_dir : c.output("scratch");
    return executor::Executor(ec);
}

std::unique_ptr<executor::EnvironmentManager> make_environments(const RunConfig& c, const Hooks& hooks)
{
    std::shared_ptr<executor::PackageInstaller> installer =
        hooks.installer ? hooks.installer : std::make_shared<executor::PipInstaller>(c.pip_args);
    return std::make_unique<executor::EnvironmentManager>(c.env_cache ? *c.env_cache : c.output("envs"), installer,
                                                          c.python);
}

std::shared_ptr<const executor::Environment> dataset_environment(const std::vector<pipeline::EvalExample>& ds,
                                                                 executor::EnvironmentManager& envs, std::ostream& err)
{
    std::vector<std::vector<std::string>> lists;
    for (const auto& ex : ds) lists.push_back(ex.dependencies);
    auto merged = executor::merge_requirements(lists);
    for (const auto& o : merged.overridden) err << "warning: pin overridden in shared environment: " << o << "\n";
    return envs.build(merged.requirements);
}

// Registers a backend for every alias in use. Credentials are checked up front so live runs
// fail before any work is done.
std::unique_ptr<llm::Gateway> make_gateway(const RunConfig& c, const std::set<std::string>& aliases, const Hooks& hooks)
{
    llm::GatewayOptions go;
    go.mode = c.replay_mode;
    go.max_in_flight = c.max_in_flight;
    go.transcript_path = c.transcript;
    if (c.replay_mode != llm::ReplayMode::live && !c.transcript)
        throw ConfigError("replay mode " + llm::to_string(c.replay_mode) + " needs a transcript path");
    if ((c.replay_mode == llm::ReplayMode::replay || c.replay_mode == llm::ReplayMode::replay_strict))
        require_exists(*c.transcript, "transcript");
    std::vector<std::pair<std::string, std::shared_ptr<llm::ChatBackend>>> backends;
    for (const auto& alias : aliases) {
        if (auto it = hooks.backends.find(alias); it != hooks.backends.end()) {
            backends.emplace_back(alias, it->second);
            continue;
        }
        auto p = c.providers.find(alias);
        if (p == c.providers.end()) {
            if (c.replay_mode == llm::ReplayMode::replay_strict) continue;
            throw ConfigError("unknown model alias '" + alias + "' (no provider configured)");
        }
        if (c.replay_mode == llm::ReplayMode::replay_strict) continue;
        try {
            llm::ProviderConfig pc = p->second;
            if (pc.model.empty()) pc.model = alias;
            backends.emplace_back(alias, llm::make_http_backend(pc));
        } catch (const llm::LlmError& e) {
            // Replay falls back to a provider only on a fixture miss, so a missing key is not fatal there.
            if (c.replay_mode != llm::ReplayMode::replay) throw;
        }
    }
    auto gw = std::make_unique<llm::Gateway>(go);
    for (auto& [alias, b] : backends) gw->add_model(alias, b);
    return gw;
}

pipeline::PipelineConfig pipeline_config(const RunConfig& c)
{
    pipeline::PipelineConfig p;
    p.regeneration_cap = c.regenerations;
    p.debug_iterations = c.debug_iterations;
    p.augment_k = c.augment_k;
    p.timeout = std::chrono::duration<double>(c.pipeline_timeout_s);
    p.jobs = c.jobs;
    if (c.banned_keywords) p.banned_keywords = corpus::load_keyword_file(*c.banned_keywords);
    auto stage = [&](const std::string& name, pipeline::StageSampling& s) {
        s.model = c.model_for(name);
        if (auto it = c.sampling.find(name); it != c.sampling.end()) {
            s.temperature = it->second.temperature;
            s.top_p = it->second.top_p;
            s.n = it->second.n;
        }
    };
    stage("sandbox", p.sandbox);
    stage("tests", p.tests);
    stage("debug", p.debug);
    stage("instruction", p.instruction);
    stage("augment", p.augment);
    return p;
}

eval::EvalConfig eval_config(const RunConfig& c)
{
    eval::EvalConfig e;
    e.n_samples = c.n_samples;
    e.temperature = c.eval_temperature;
    e.top_p = c.eval_top_p;
    e.k_list = c.k_list;
    e.max_rounds = c.rounds;
    e.timeout = std::chrono::duration<double>(c.evaluation_timeout_s);
    e.jobs = c.jobs;
    e.stderr_lines = c.stderr_lines;
    e.validate();
    return e;
}

// Wall-clock durations are dropped so that replayed runs write identical files.
json stable_sample(const eval::GenerationSample& s)
{
    auto j = eval::to_json(s);
    for (auto& r : j["reports"]) r.erase("duration");
    return j;
}

int cmd_ingest(const RunConfig& c, std::ostream& out, std::ostream& err)
{
    if (!c.corpus) throw ConfigError("no corpus given (--corpus or config corpus)");
    require_exists(*c.corpus, "corpus");
    auto io = c.io_keywords ? corpus::load_keyword_file(*c.io_keywords) : corpus::default_io_keywords();
    auto loaded = corpus::load_fragments(*c.corpus, c.limit);
    std::vector<json> kept;
    std::map<std::string, std::size_t> dropped;
    for (const auto& f : loaded.fragments) {
        auto d = corpus::prefilter(f, io);
        if (d.keep) kept.push_back(corpus::to_json(f));
        else ++dropped[d.reason];
    }
    for (const auto& w : loaded.warnings) err << "warning: " << w << "\n";
    write_jsonl(c.output("fragments.jsonl"), kept);
    json report = {{"loaded", loaded.fragments.size()},
                   {"skipped_malformed", loaded.skipped},
                   {"prefiltered", dropped},
                   {"kept", kept.size()},
                   {"warnings", loaded.warnings}};
    write_text(c.output("ingest_report.json"), report.dump(2) + "\n");
    out << fmt::format("ingest: {} loaded, {} malformed, {} prefiltered, {} kept\n", loaded.fragments.size(),
                       loaded.skipped, loaded.fragments.size() - kept.size(), kept.size());
    return loaded.skipped > 0 ? exit_content : exit_ok;
}

int cmd_generate(RunConfig c, const Options& o, std::ostream& out, std::ostream& err, const Hooks& hooks)
{
    auto frag_path = input_path(o.fragments, c, "fragments.jsonl", "fragments file");
    if (o.model) {
        for (const auto& s : pipeline_stages) c.models[s] = *o.model;
    }
    auto pcfg = pipeline_config(c);
    std::set<std::string> aliases = {pcfg.sandbox.model, pcfg.tests.model, pcfg.debug.model, pcfg.instruction.model,
                                     pcfg.augment.model};
    auto gateway = make_gateway(c, aliases, hooks);
    auto executor = make_executor(c);
    auto envs = make_environments(c, hooks);
    auto templates = pipeline::TemplateSet::load(pipeline::default_data_dir() / "templates");
    auto loaded = corpus::load_fragments(frag_path);
    for (const auto& w : loaded.warnings) err << "warning: " << w << "\n";

    pipeline::PipelineServices svc{*gateway, executor, *envs, templates};
    auto result = pipeline::run_pipeline(loaded.fragments, pcfg, svc);
    pipeline::save_dataset(c.output("dataset.jsonl"), result.emitted);
    write_text(c.output("funnel.json"), result.funnel.to_json().dump(2) + "\n");
    write_text(c.output("funnel.txt"), result.funnel.to_text());
    for (const auto& o2 : result.filter.overridden_pins) err << "warning: pin overridden: " << o2 << "\n";
    out << result.funnel.to_text();
    if (!loaded.fragments.empty() && result.emitted.empty()) {
        err << "no example survived the pipeline\n";
        return exit_content;
    }
    return exit_ok;
}

int cmd_evaluate(const RunConfig& c, const Options& o, std::ostream& out, std::ostream& err, const Hooks& hooks)
{
    auto ds_path = input_path(o.dataset, c, "dataset.jsonl", "dataset");
    std::string model = o.model ? *o.model : c.model_for("eval");
    auto ecfg = eval_config(c);
    std::unique_ptr<llm::Gateway> gateway;
    std::unique_ptr<eval::Generator> generator;
    if (model == "oracle") {
        generator = std::make_unique<eval::OracleGenerator>();
    } else {
        gateway = make_gateway(c, {model}, hooks);
        generator = std::make_unique<eval::LlmGenerator>(*gateway, model, ecfg.temperature, ecfg.top_p);
    }
    auto dataset = pipeline::load_dataset(ds_path);
    auto executor = make_executor(c);
    auto envs = make_environments(c, hooks);
    auto env = dataset_environment(dataset, *envs, err);

    std::vector<eval::GenerationSample> samples;
    auto report = eval::evaluate(dataset, *generator, executor, *env, ecfg, &samples);
    std::vector<json> records;
    for (const auto& s : samples) records.push_back(stable_sample(s));
    json rep = report.to_json();
    std::string text = eval::render_pass_table({report});
    if (c.rounds > 0) {
        auto trajectories = eval::refine_all(dataset, *generator, executor, *env, ecfg);
        for (const auto& t : trajectories) {
            for (const auto& s : t) records.push_back(stable_sample(s));
        }
        auto acc = eval::accuracy_by_round(trajectories, c.rounds + 1);
        rep["accuracy_by_round"] = acc;
        text += "\nRound | Accuracy\n";
        for (std::size_t r = 0; r < acc.size(); ++r) text += fmt::format("{} | {:.1f}\n", r, acc[r] * 100.0);
    }
    write_jsonl(c.output("results.jsonl"), records);
    write_text(c.output("report.json"), rep.dump(2) + "\n");
    write_text(c.output("report.txt"), text);
    out << text;
    return dataset.empty() ? exit_content : exit_ok;
}

struct ExampleStats {
    std::string id;
    double program_tokens, context_tokens, target_tokens, ast_depth, test_cases, function_calls, import_class;
};

ExampleStats example_stats(const pipeline::EvalExample& ex)
{
    auto program = pipeline::assemble(ex.context, ex.target);
    auto whole = analysis::compute_metrics(program);
    auto target = analysis::compute_metrics(ex.target, analysis::TextSpan{0, ex.target.size()});
    std::size_t asserts = 0;
    for (const auto& t : ex.test_codes()) asserts += pipeline::check_test_set(t, ex.function_name()).asserts;
    double import_class = !whole.external_imports.empty()  ? 2.0
                          : !whole.stdlib_imports.empty() ? 1.0
                                                          : 0.0;
    return {ex.id,
            double(whole.code_tokens),
            double(python::count_code_tokens(ex.context)),
            double(target.code_tokens),
            double(whole.ast_depth),
            double(asserts),
            double(target.function_calls_in_target),
            import_class};
}

int cmd_analyze(const RunConfig& c, const Options& o, std::ostream& out)
{
    auto ds_path = input_path(o.dataset, c, "dataset.jsonl", "dataset");
    auto dataset = pipeline::load_dataset(ds_path);
    if (dataset.empty()) throw std::invalid_argument("dataset is empty");
    std::vector<ExampleStats> stats;
    for (const auto& ex : dataset) stats.push_back(example_stats(ex));

    auto mean = [&](double ExampleStats::*f) {
        double s = 0;
        for (const auto& e : stats) s += e.*f;
        return s / double(stats.size());
    };
    json means = {{"program_tokens", mean(&ExampleStats::program_tokens)},
                  {"context_tokens", mean(&ExampleStats::context_tokens)},
                  {"target_tokens", mean(&ExampleStats::target_tokens)},
                  {"ast_depth", mean(&ExampleStats::ast_depth)},
                  {"test_cases", mean(&ExampleStats::test_cases)},
                  {"function_calls", mean(&ExampleStats::function_calls)}};
    json realism = json::object();
    double bleu_sum = 0, jac_sum = 0;
    std::size_t with_realism = 0;
    for (const auto& ex : dataset) {
        if (!ex.metadata.contains("realism")) continue;
        ++with_realism;
        bleu_sum += ex.metadata["realism"].value("bleu_vs_source", 0.0);
        jac_sum += ex.metadata["realism"].value("jaccard_vs_source", 0.0);
    }
    if (with_realism) realism = {{"bleu_vs_source", bleu_sum / with_realism}, {"jaccard_vs_source", jac_sum / with_realism}};
    json report = {{"examples", dataset.size()}, {"means", means}, {"realism", realism}};
    std::string text = fmt::format("Examples: {}\n", dataset.size());
    for (const auto& [k, v] : means.items()) text += fmt::format("mean {}: {:.2f}\n", k, v.get<double>());

    if (o.results) {
        auto res_path = cwd_path(*o.results);
        require_exists(res_path, "results file");
        std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // id -> (passed, n) at round 0
        auto loaded = read_jsonl(res_path);
        if (loaded.malformed) throw std::invalid_argument("results file has malformed records");
        for (const auto& r : loaded.records) {
            auto s = eval::sample_from_json(r);
            if (s.round != 0) continue;
            auto& [p, n] = counts[s.example_id];
            p += s.passed;
            ++n;
        }
        json bds = json::object();
        std::vector<std::pair<analysis::Factor, double ExampleStats::*>> factors = {
            {analysis::Factor::target_length, &ExampleStats::target_tokens},
            {analysis::Factor::context_length, &ExampleStats::context_tokens},
            {analysis::Factor::function_calls, &ExampleStats::function_calls},
            {analysis::Factor::import_class, &ExampleStats::import_class}};
        for (const auto& [factor, field] : factors) {
            std::vector<analysis::BreakdownPoint> pts;
            for (const auto& e : stats) {
                auto it = counts.find(e.id);
                if (it == counts.end() || it->second.second == 0) continue;
                pts.push_back({e.id, e.*field, double(it->second.first) / double(it->second.second)});
            }
            json bins = json::array();
            text += fmt::format("\n{}\n", analysis::to_string(factor));
            try {
                for (const auto& b : analysis::breakdown(factor, pts)) {
                    bins.push_back({{"low", b.low}, {"high", b.high}, {"label", b.label}, {"ids", b.ids}, {"mean", b.mean}});
                    text += fmt::format("  {:<12} n={} pass@1={:.3f}\n", b.label, b.ids.size(), b.mean);
                }
            } catch (const std::invalid_argument& e) {
                text += fmt::format("  skipped: {}\n", e.what());
            }
            bds[std::string(analysis::to_string(factor))] = bins;
        }
        report["breakdowns"] = bds;
    }
    write_text(c.output("analysis.json"), report.dump(2) + "\n");
    write_text(c.output("analysis.txt"), text);
    out << text;
    return exit_ok;
}

int cmd_serve(const RunConfig& c, const Options& o, std::ostream& out, std::ostream& err, const Hooks& hooks)
{
    auto ds_path = input_path(o.dataset, c, "dataset.jsonl", "dataset");
    auto dataset = pipeline::load_dataset(ds_path);
    if (dataset.empty()) throw ConfigError("dataset has no examples; refusing to start");
    auto executor = make_executor(c);
    auto envs = make_environments(c, hooks);
    auto env = dataset_environment(dataset, *envs, err);
    study::StudyConfig sc;
    sc.timeout = std::chrono::duration<double>(c.evaluation_timeout_s);
    sc.state_dir = c.resolve(c.output_dir);
    sc.snapshot_every = c.snapshot_every;
    study::StudyService service(std::move(dataset), executor, env, sc);
    study::StudyServer server(service, c.static_dir);
    int port = server.bind(c.study_host, c.study_port);
    out << fmt::format("serving study on http://{}:{}\n", c.study_host, port) << std::flush;
    if (hooks.on_serving) {
        server.start();
        hooks.on_serving(port, server);
        server.stop();
        return exit_ok;
    }
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    server.start();
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
    out << "stopped\n";
    return exit_ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Hooks& hooks)
{
    CLI::App app{"Build and evaluate execution-based code generation benchmarks", "codebench"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config, "JSON run configuration");
        sub->add_option("-o,--output-dir", o.output_dir, "Artifact directory");
        sub->add_option("-j,--jobs", o.jobs, "Worker bound");
    };
    auto* ingest = app.add_subcommand("ingest", "Load a corpus dump and apply the I/O pre-filter");
    common(ingest);
    ingest->add_option("--corpus", o.corpus, "Corpus records (JSON lines)");
    ingest->add_option("--limit", o.limit, "Stop after this many fragments");
    ingest->add_option("--io-keywords", o.io_keywords, "Keyword file for the pre-filter");

    auto* generate = app.add_subcommand("generate", "Turn fragments into benchmark examples");
    common(generate);
    generate->add_option("--fragments", o.fragments, "Fragments file (default <out>/fragments.jsonl)");
    generate->add_option("--model", o.model, "Model alias for every stage");
    generate->add_option("--replay-mode", o.replay_mode, "live, record, replay or replay-strict");
    generate->add_option("--transcript", o.transcript, "LLM transcript file");
    generate->add_option("--regenerations", o.regenerations, "Regeneration cap");
    generate->add_option("--debug-iterations", o.debug_iterations, "Debug iteration cap");
    generate->add_option("--augment-k", o.augment_k, "Augmentation candidates");

    auto* evaluate = app.add_subcommand("evaluate", "Score a generator on a dataset");
    common(evaluate);
    evaluate->add_option("--dataset", o.dataset, "Dataset file (default <out>/dataset.jsonl)");
    evaluate->add_option("--model", o.model, "Model alias, or 'oracle'");
    evaluate->add_option("--replay-mode", o.replay_mode, "live, record, replay or replay-strict");
    evaluate->add_option("--transcript", o.transcript, "LLM transcript file");
    evaluate->add_option("-n,--n-samples", o.n_samples, "Samples per example");
    evaluate->add_option("--rounds", o.rounds, "Refinement rounds after the first attempt");
    evaluate->add_option("-k", o.k_list, "pass@k values");

    auto* analyze = app.add_subcommand("analyze", "Complexity metrics and breakdowns");
    common(analyze);
    analyze->add_option("--dataset", o.dataset, "Dataset file (default <out>/dataset.jsonl)");
    analyze->add_option("--results", o.results, "Results file from evaluate");

    auto* serve = app.add_subcommand("serve-study", "Serve the human-study API");
    common(serve);
    serve->add_option("--dataset", o.dataset, "Dataset file (default <out>/dataset.jsonl)");
    serve->add_option("--host", o.host, "Bind address");
    serve->add_option("--port", o.port, "Port (0 picks a free one)");
    serve->add_option("--static-dir", o.static_dir, "Directory served at /");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return exit_config;
    }

    try {
        auto cfg = make_config(o);
        if (ingest->parsed()) return cmd_ingest(cfg, out, err);
        if (generate->parsed()) return cmd_generate(cfg, o, out, err, hooks);
        if (evaluate->parsed()) return cmd_evaluate(cfg, o, out, err, hooks);
        if (analyze->parsed()) return cmd_analyze(cfg, o, out);
        return cmd_serve(cfg, o, out, err, hooks);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const llm::LlmError& e) {
        bool config = e.kind() == llm::LlmError::Kind::auth || e.kind() == llm::LlmError::Kind::config ||
                      e.kind() == llm::LlmError::Kind::fixture_miss;
        err << (config ? "config error: " : "provider error: ") << e.what() << "\n";
        return config ? exit_config : exit_infra;
    } catch (const InfrastructureError& e) {
        err << "infrastructure error: " << e.what() << "\n";
        return exit_infra;
    } catch (const std::invalid_argument& e) {
        err << "content error: " << e.what() << "\n";
        return exit_content;
    } catch (const json::exception& e) {
        err << "content error: " << e.what() << "\n";
        return exit_content;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_infra;
    }
}

}  // namespace codebench::cli
