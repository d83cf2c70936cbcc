#include "factcheck/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "factcheck/corpus.hpp"
#include "factcheck/dense.hpp"
#include "factcheck/error.hpp"
#include "factcheck/eval.hpp"
#include "factcheck/llm.hpp"
#include "factcheck/pipeline.hpp"
#include "factcheck/run_config.hpp"
#include "factcheck/tfidf.hpp"

namespace factcheck {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kRunSnapshot = "run_config.json";

// Index or embedding store plus the retriever that borrows it. Heap-allocated so the
// borrowed references stay put.
struct LoadedRetriever {
    std::optional<InvertedIndex> index;
    std::optional<EmbeddingStore> store;
    std::unique_ptr<EmbeddingProvider> embedder;
    std::unique_ptr<Retriever> retriever;
};

std::unique_ptr<LoadedRetriever> load_retriever(const RunConfig& c, RetrieverKind kind) {
    auto out = std::make_unique<LoadedRetriever>();
    if (kind == RetrieverKind::TFIDF) {
        out->index.emplace(InvertedIndex::load(c.index));
        out->retriever = std::make_unique<TfidfRetriever>(*out->index);
    } else {
        out->store.emplace(EmbeddingStore::load(c.embeddings_store));
        out->embedder = make_embedding_provider(c.embeddings);
        out->retriever = std::make_unique<DenseRetriever>(*out->store, *out->embedder);
    }
    return out;
}

struct LlmChoice {
    fs::path mock_script;
    std::string fallback = "error";
};

std::unique_ptr<LlmProvider> make_llm(const RunConfig& c, const LlmChoice& choice) {
    auto script = !choice.mock_script.empty() ? choice.mock_script : c.llm_script;
    if (!script.empty()) {
        auto fb = choice.fallback == "echo" ? ScriptFallback::Echo : ScriptFallback::Error;
        return std::make_unique<ScriptedProvider>(ScriptedProvider::load(script, fb));
    }
    if (!c.llm.api_key_env.empty() && !std::getenv(c.llm.api_key_env.c_str())) {
        throw ConfigError("environment variable " + c.llm.api_key_env +
                          " is not set (needed for " + c.llm.base_url + ")");
    }
    return std::make_unique<OpenAiChatProvider>(c.llm);
}

void set_seed(RunConfig& c, std::uint64_t seed) {
    c.seed = seed;
    c.llm.seed = seed;
    c.llm.retry.seed = seed;
    c.embeddings.retry.seed = seed;
    c.pipeline.llm.seed = seed;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw Error("failed writing " + path.string());
}

std::vector<ReportFormat> parse_formats(const std::vector<std::string>& names) {
    std::vector<ReportFormat> out;
    for (const auto& n : names) {
        auto f = report_format_from_string(n);
        if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    }
    return out;
}

/// Runs one configuration end to end and leaves traces, manifest and the config snapshot in
/// c.output_dir.
RunSummary execute_run(const RunConfig& c, const Retriever& retriever, const PassageStore& passages,
                       LlmProvider& llm, const std::vector<ClaimRecord>& records) {
    fs::create_directories(c.output_dir);
    auto summary = run_dataset(records, c.pipeline, PipelineContext{retriever, passages, llm},
                               c.output_dir, c.concurrency);
    write_text(c.output_dir / kRunSnapshot, to_json(c).dump(2) + "\n");
    return summary;
}

void print_summary(std::ostream& out, const RunSummary& s) {
    out << "traces: " << s.trace_dir.string() << "\n"
        << "manifest: " << s.manifest.string() << "\n"
        << "claims: " << (s.ok + s.failed) << " ok: " << s.ok << " failed: " << s.failed
        << " parse_warnings: " << s.parse_warnings << "\n";
}

RunReport score_run(const fs::path& run_dir, const RunConfig& c, const std::vector<ClaimRecord>& records,
                    const PassageStore& passages, const std::vector<std::size_t>& ks,
                    const std::string& system) {
    auto traces = load_traces(run_dir);
    auto report = evaluate_run(traces, records, passages, ks, c.match);
    report.system = system;
    report.retriever = std::string(to_string(c.pipeline.retriever));
    report.config = to_json(c);
    report.config_hash = config_hash(report.config);
    report.seed = c.seed;
    return report;
}

std::vector<fs::path> write_reports(const RunReport& r, const fs::path& dir,
                                    const std::vector<ReportFormat>& formats) {
    std::vector<fs::path> paths;
    for (auto f : formats) {
        auto p = dir / ("report." + std::string(extension(f)));
        emit_report(r, f, p);
        paths.push_back(p);
    }
    return paths;
}

// --- subcommands -------------------------------------------------------------------------------

struct IngestArgs {
    fs::path pages, out;
    std::size_t words = 100;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
    auto m = ingest_jsonl(a.pages, a.out, a.words);
    out << (a.out / "manifest.json").string() << "\n";
    out << "passages: " << m.passages << " pages: " << m.pages << " skipped: " << m.skipped << "\n";
    return kExitOk;
}

struct IndexArgs {
    fs::path corpus, out;
    bool index_title = false, stopwords = false, stem = false;
};

int cmd_index(const IndexArgs& a, std::ostream& out) {
    auto corpus = Corpus::open(a.corpus);
    IndexOptions opts;
    opts.index_title = a.index_title;
    opts.tokenizer.remove_stopwords = a.stopwords;
    opts.tokenizer.stem = a.stem;
    auto index = InvertedIndex::build(corpus, opts);
    index.save(a.out);
    out << a.out.string() << "\n";
    out << "passages: " << index.passage_count() << " terms: " << index.vocabulary_size() << "\n";
    return kExitOk;
}

struct EmbedArgs {
    fs::path corpus, out;
    EmbeddingConfig cfg;
    std::size_t workers = 1;
    std::size_t timeout_ms = 60'000;
};

int cmd_embed(EmbedArgs a, std::ostream& out) {
    a.cfg.timeout = std::chrono::milliseconds(a.timeout_ms);
    auto corpus = Corpus::open(a.corpus);
    auto provider = make_embedding_provider(a.cfg);
    auto store = build_embedding_store(corpus, *provider, a.cfg.batch_size, a.workers);
    store.save(a.out);
    out << a.out.string() << "\n";
    out << "vectors: " << store.size() << " dim: " << store.dim() << " provider: "
        << store.provider_id() << "\n";
    return kExitOk;
}

struct RunArgs {
    fs::path config, claims, output;
    std::string mode, retriever;
    std::optional<int> edit_rounds;
    std::optional<std::size_t> k, workers;
    std::optional<std::uint64_t> seed;
    LlmChoice llm;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
    auto c = load_run_config(a.config);
    if (!a.claims.empty()) c.dataset = a.claims;
    if (!a.mode.empty()) c.pipeline.mode = pipeline_mode_from_string(a.mode);
    if (a.edit_rounds) c.pipeline.edit_rounds = *a.edit_rounds;
    if (!a.retriever.empty()) c.pipeline.retriever = retriever_kind_from_string(a.retriever);
    if (a.k) c.pipeline.k = *a.k;
    if (a.workers) c.concurrency = *a.workers;
    if (a.seed) set_seed(c, *a.seed);
    if (!a.output.empty()) c.output_dir = a.output;
    c.validate();

    auto llm = make_llm(c, a.llm);
    auto records = load_dataset(c.dataset, c.dataset_kind);
    auto corpus = Corpus::open(c.corpus);
    auto retriever = load_retriever(c, c.pipeline.retriever);
    auto summary = execute_run(c, *retriever->retriever, corpus, *llm, records);
    print_summary(out, summary);
    return kExitOk;
}

struct EvalArgs {
    std::vector<fs::path> runs;
    std::vector<std::string> systems;
    fs::path dataset, corpus, out;
    std::vector<std::size_t> ks;
    std::vector<std::string> formats{"md", "csv", "json"};
    std::optional<double> jaccard;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (!a.systems.empty() && a.systems.size() != a.runs.size()) {
        throw ConfigError("--system must be given once per --run");
    }
    auto formats = parse_formats(a.formats);
    std::vector<RunReport> reports;
    for (std::size_t i = 0; i < a.runs.size(); ++i) {
        const auto& run = a.runs[i];
        auto snapshot = run / kRunSnapshot;
        RunConfig c;
        if (fs::exists(snapshot)) {
            c = load_run_config(snapshot);
        } else if (a.dataset.empty() || a.corpus.empty()) {
            throw NotFoundError("no " + snapshot.string() + "; pass --dataset and --corpus");
        }
        if (!a.dataset.empty()) c.dataset = a.dataset;
        if (!a.corpus.empty()) c.corpus = a.corpus;
        if (a.jaccard) c.match.jaccard_threshold = *a.jaccard;
        if (c.match.jaccard_threshold <= 0.0 || c.match.jaccard_threshold > 1.0) {
            throw ConfigError("--jaccard must be in (0, 1]");
        }
        auto ks = a.ks.empty() ? c.eval_ks : a.ks;
        auto records = load_dataset(c.dataset, c.dataset_kind);
        auto corpus = Corpus::open(c.corpus);
        auto system = a.systems.empty() ? system_label(c.pipeline) : a.systems[i];
        auto report = score_run(run, c, records, corpus, ks, system);
        for (const auto& p : write_reports(report, run, formats)) out << p.string() << "\n";
        reports.push_back(std::move(report));
    }
    auto dir = a.out.empty() ? a.runs.front() : a.out;
    fs::create_directories(dir);
    for (auto f : formats) {
        auto p = dir / ("retrieval_table." + std::string(extension(f)));
        write_text(p, render_retrieval_table(reports, f));
        out << p.string() << "\n";
    }
    return kExitOk;
}

struct AblateArgs {
    fs::path config, grid, out;
    std::optional<std::size_t> workers;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> formats{"md", "csv", "json"};
    LlmChoice llm;
};

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
    auto base = load_run_config(a.config);
    auto grid = load_ablation_grid(a.grid, base.pipeline.retriever);
    if (a.workers) base.concurrency = *a.workers;
    if (a.seed) set_seed(base, *a.seed);
    base.eval_ks = grid.ks;
    // Every cutoff in the grid is scored on a prefix of one ranked list, so keep the deepest.
    base.pipeline.k = std::max(base.pipeline.k, *std::max_element(grid.ks.begin(), grid.ks.end()));
    auto root = a.out.empty() ? base.output_dir / "ablation" : a.out;
    auto formats = parse_formats(a.formats);

    // Validate every cell before the first model call.
    for (auto kind : grid.retrievers) {
        for (const auto& v : grid.variants) {
            RunConfig c = base;
            c.pipeline = ablation_variant(base.pipeline, v);
            c.pipeline.retriever = kind;
            c.validate();
        }
    }

    auto llm = make_llm(base, a.llm);
    auto records = load_dataset(base.dataset, base.dataset_kind);
    auto corpus = Corpus::open(base.corpus);
    std::vector<RunReport> reports;
    for (auto kind : grid.retrievers) {
        auto retriever = load_retriever(base, kind);
        for (const auto& v : grid.variants) {
            RunConfig c = base;
            c.pipeline = ablation_variant(base.pipeline, v);
            c.pipeline.retriever = kind;
            c.output_dir = root / std::string(to_string(kind)) / v;
            auto summary = execute_run(c, *retriever->retriever, corpus, *llm, records);
            out << v << " / " << to_string(kind) << ": ok " << summary.ok << " failed "
                << summary.failed << " parse_warnings " << summary.parse_warnings << "\n";
            auto report = score_run(c.output_dir, c, records, corpus, grid.ks, v);
            write_reports(report, c.output_dir, formats);
            reports.push_back(std::move(report));
        }
    }
    fs::create_directories(root);
    for (auto f : formats) {
        auto wide = root / ("ablation_table." + std::string(extension(f)));
        write_text(wide, render_retrieval_table(reports, f));
        out << wide.string() << "\n";
        if (f == ReportFormat::JSON) continue;
        auto long_table = root / ("ablation_long." + std::string(extension(f)));
        write_text(long_table, render_ablation_table(reports, f));
        out << long_table.string() << "\n";
    }
    return kExitOk;
}

void add_llm_flags(CLI::App* cmd, LlmChoice& llm) {
    cmd->add_option("--mock-script", llm.mock_script,
                    "Answer model calls from a JSONL script instead of the configured endpoint")
        ->check(CLI::ExistingFile);
    cmd->add_option("--mock-fallback", llm.fallback,
                    "Unscripted calls: error (fail the claim) or echo (return the primary input)")
        ->check(CLI::IsMember({"error", "echo"}))
        ->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Claim verification pipeline: corpus building, retrieval, runs and evaluation",
                 "factcheck"};
    app.require_subcommand(1, 1);
    app.set_help_all_flag("--help-all", "Print help for every subcommand and exit");

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Chunk a JSONL pages file into a passage corpus");
    c_ingest->add_option("--pages", ingest.pages, "JSONL file of {title, text} pages")->required();
    c_ingest->add_option("--out", ingest.out, "Output corpus directory")->required();
    c_ingest->add_option("--words", ingest.words, "Words per passage")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    IndexArgs index;
    auto* c_index = app.add_subcommand("index", "Build the TF-IDF inverted index of a corpus");
    c_index->add_option("--corpus", index.corpus, "Corpus directory")->required();
    c_index->add_option("--out", index.out, "Output index directory")->required();
    c_index->add_flag("--index-title", index.index_title, "Prepend the page title to passage text");
    c_index->add_flag("--stopwords", index.stopwords, "Drop English stopwords");
    c_index->add_flag("--stem", index.stem, "Apply the S plural stemmer");

    EmbedArgs embed;
    auto* c_embed = app.add_subcommand("embed", "Embed every passage into a dense vector store");
    c_embed->add_option("--corpus", embed.corpus, "Corpus directory")->required();
    c_embed->add_option("--out", embed.out, "Output store directory")->required();
    c_embed->add_option("--kind", embed.cfg.kind, "Embedding backend: http or hash")
        ->check(CLI::IsMember({"http", "hash"}))
        ->capture_default_str();
    c_embed->add_option("--base-url", embed.cfg.base_url, "Embeddings endpoint base URL")
        ->capture_default_str();
    c_embed->add_option("--model", embed.cfg.model, "Embedding model name")->capture_default_str();
    c_embed->add_option("--api-key-env", embed.cfg.api_key_env,
                        "Environment variable holding the API key");
    c_embed->add_option("--dim", embed.cfg.dim, "Vector size for the hash backend")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_embed->add_option("--batch-size", embed.cfg.batch_size, "Texts per request")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_embed->add_option("--workers", embed.workers, "Batches in flight")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_embed->add_option("--timeout-ms", embed.timeout_ms, "Per-request timeout")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    RunArgs run;
    auto* c_run = app.add_subcommand("run", "Run the pipeline over a claim dataset");
    c_run->add_option("--config", run.config, "Run config JSON")->required()->check(CLI::ExistingFile);
    c_run->add_option("--claims", run.claims, "Dataset JSONL overriding the config");
    c_run->add_option("--mode", run.mode, "sucea or ralm")->check(CLI::IsMember({"sucea", "ralm"}));
    c_run->add_option("--edit-rounds", run.edit_rounds, "Retrieve-edit rounds per sub-claim")
        ->check(CLI::NonNegativeNumber);
    c_run->add_option("--retriever", run.retriever, "tfidf or dense")
        ->check(CLI::IsMember({"tfidf", "dense"}));
    c_run->add_option("--k", run.k, "Evidence passages kept after reranking")
        ->check(CLI::PositiveNumber);
    c_run->add_option("--workers", run.workers, "Claims processed concurrently")
        ->check(CLI::PositiveNumber);
    c_run->add_option("--seed", run.seed, "Seed for sampling and retry jitter");
    c_run->add_option("--output", run.output, "Run directory overriding the config");
    add_llm_flags(c_run, run.llm);

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Score finished runs and write report tables");
    c_eval->add_option("--run", ev.runs, "Run directory (repeat for a multi-system table)")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_eval->add_option("--system", ev.systems, "Row label per --run (default from the run mode)");
    c_eval->add_option("--dataset", ev.dataset, "Dataset JSONL (default from the run config)");
    c_eval->add_option("--corpus", ev.corpus, "Corpus directory (default from the run config)");
    c_eval->add_option("--k", ev.ks, "Cutoffs, e.g. --k 3,5,10 (default from the run config)")
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    c_eval->add_option("--format", ev.formats, "Report formats: md, csv, json")
        ->delimiter(',')
        ->check(CLI::IsMember({"md", "markdown", "csv", "json"}))
        ->capture_default_str();
    c_eval->add_option("--jaccard", ev.jaccard, "Token Jaccard threshold for fuzzy gold matching");
    c_eval->add_option("--out", ev.out, "Directory for the combined table (default: first run)");

    AblateArgs ab;
    auto* c_ablate = app.add_subcommand("ablate", "Run an ablation grid and tabulate retrieval metrics");
    c_ablate->add_option("--config", ab.config, "Base run config JSON")->required()->check(CLI::ExistingFile);
    c_ablate->add_option("--grid", ab.grid, "Grid JSON {variants, retrievers, k}")
        ->required()
        ->check(CLI::ExistingFile);
    c_ablate->add_option("--out", ab.out, "Output directory (default: <output_dir>/ablation)");
    c_ablate->add_option("--workers", ab.workers, "Claims processed concurrently")
        ->check(CLI::PositiveNumber);
    c_ablate->add_option("--seed", ab.seed, "Seed for sampling and retry jitter");
    c_ablate->add_option("--format", ab.formats, "Report formats: md, csv, json")
        ->delimiter(',')
        ->check(CLI::IsMember({"md", "markdown", "csv", "json"}))
        ->capture_default_str();
    add_llm_flags(c_ablate, ab.llm);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (c_ingest->parsed()) return cmd_ingest(ingest, out);
        if (c_index->parsed()) return cmd_index(index, out);
        if (c_embed->parsed()) return cmd_embed(embed, out);
        if (c_run->parsed()) return cmd_run(run, out);
        if (c_eval->parsed()) return cmd_eval(ev, out);
        if (c_ablate->parsed()) return cmd_ablate(ab, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace factcheck
