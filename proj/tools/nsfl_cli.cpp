// nsfl: batch front end for the logical dense-retrieval engine.
// Subcommands: index, optimize, search, rerank, eval, ablate.
// Exit codes: 0 clean, 1 some per-query work failed, 2 bad config or input.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nsfl/detail/vecmath.hpp"
#include "nsfl/embedding_store.hpp"
#include "nsfl/errors.hpp"
#include "nsfl/evaluation.hpp"
#include "nsfl/logic_formula.hpp"
#include "nsfl/pipeline.hpp"
#include "nsfl/sqo.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw nsfl::FormatError("cannot hash input: " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= std::uint64_t(static_cast<unsigned char>(buf[i]));
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
    return buf;
}

// Everything a manifest needs, accumulated as the command runs.
struct ManifestBuilder {
    std::string command;
    std::map<std::string, std::string> flags;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::map<std::string, double> timings_ms;

    void write(const std::string& path) const {
        nlohmann::json j;
        j["tool"] = "nsfl";
        j["version"] = kVersion;
        j["command"] = command;
        j["flags"] = flags;
        j["seed"] = seed;
        nlohmann::json ins;
        for (const auto& p : inputs) ins[p] = hex64(fnv1a64_file(p));
        j["inputs"] = std::move(ins);
        j["outputs"] = outputs;
        j["timings_ms"] = timings_ms;
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw nsfl::FormatError("cannot write manifest: " + path);
        out << j.dump(2) << '\n';
    }
};

std::uint64_t resolve_seed(std::uint64_t flag_seed) {
    if (const char* env = std::getenv("NSFL_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (!end || *end != '\0')
            throw nsfl::ConfigError(std::string("NSFL_SEED is not an integer: ") +
                                    env);
        return v;
    }
    return flag_seed;
}

// Per-line pack loading that keeps going past broken queries.
std::vector<nsfl::QueryPack> load_packs_tolerant(const std::string& path,
                                                 bool* had_failures) {
    std::ifstream in(path);
    if (!in) throw nsfl::FormatError("cannot open query pack: " + path);
    std::vector<nsfl::QueryPack> packs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            nsfl::QueryPack p = nsfl::parse_query_json(line, lineno);
            nsfl::validate_pack(p);
            packs.push_back(std::move(p));
        } catch (const nsfl::Error& e) {
            std::cerr << "nsfl: " << path << ":" << lineno << ": " << e.what()
                      << "\n";
            if (had_failures) *had_failures = true;
        }
    }
    return packs;
}

template <typename F>
void parallel_for(std::size_t n, int threads, F&& f) {
    threads = std::max(1, std::min(threads, int(n == 0 ? 1 : n)));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(threads));
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                f(i);
            }
        });
    for (auto& th : pool) th.join();
}

// Flags shared by search, rerank, and ablate.
struct PipelineOpts {
    std::string vectors, ids, pack_path, out;
    std::string method = "nsfl";
    std::string stage = "rerank";
    std::size_t oversample_k = 1000;
    std::size_t final_k = 100;
    std::uint64_t seed = 42;
    double coefficient_c = 1.0;
    double epsilon = 1e-8;
    std::string s_max_mode = "pool";
    bool raw_not = false;
    bool no_stability = false;
    bool rescale = false;
    bool geo_or_passthrough = false;
    bool warm_start_monolithic = false;
    bool return_final = false;
    double sqo_alpha = 0.2;
    int sqo_steps = 100;
    int sqo_patience = 10;
    double sqo_tol = 1e-6;
    int threads = 1;
};

void add_operator_flags(CLI::App* cmd, PipelineOpts& o) {
    cmd->add_option("--coefficient-c", o.coefficient_c,
                    "correction weight on non-stable branches, in [0,2]");
    cmd->add_option("--epsilon", o.epsilon, "smoothing denominator guard");
    cmd->add_flag("--raw-not", o.raw_not,
                  "ungated two-sided NOT instead of the smoothed form");
    cmd->add_flag("--no-stability", o.no_stability,
                  "disable the branch triggers (always apply corrections)");
    cmd->add_option("--s-max-mode", o.s_max_mode,
                    "gate denominator source: pool or corpus")
        ->check(CLI::IsMember({"pool", "corpus"}));
    cmd->add_flag("--rescale-scores", o.rescale,
                  "map similarities through (s+1)/2 everywhere");
}

void add_sqo_flags(CLI::App* cmd, PipelineOpts& o) {
    cmd->add_option("--sqo-alpha", o.sqo_alpha, "step size");
    cmd->add_option("--sqo-steps", o.sqo_steps, "max update steps");
    cmd->add_option("--sqo-patience", o.sqo_patience,
                    "non-improving steps before stopping");
    cmd->add_option("--sqo-tol", o.sqo_tol, "improvement threshold");
    cmd->add_flag("--warm-start-monolithic", o.warm_start_monolithic,
                  "start optimization at the monolithic vector");
    cmd->add_flag("--return-final", o.return_final,
                  "return the last iterate instead of the best one");
}

nsfl::OperatorConfig make_operator_config(const PipelineOpts& o) {
    nsfl::OperatorConfig cfg;
    cfg.coefficient_c = o.coefficient_c;
    cfg.epsilon = o.epsilon;
    cfg.use_smoothed_not = !o.raw_not;
    cfg.use_stability = !o.no_stability;
    cfg.s_b_max_mode = o.s_max_mode == "corpus"
                           ? nsfl::OperatorConfig::MaxMode::CORPUS_MAX
                           : nsfl::OperatorConfig::MaxMode::POOL_MAX;
    nsfl::validate(cfg);
    return cfg;
}

nsfl::SqoConfig make_sqo_config(const PipelineOpts& o, std::uint64_t seed) {
    nsfl::SqoConfig cfg;
    cfg.learning_rate = o.sqo_alpha;
    cfg.max_steps = o.sqo_steps;
    cfg.patience = o.sqo_patience;
    cfg.tolerance = o.sqo_tol;
    cfg.seed = seed;
    cfg.return_final = o.return_final;
    nsfl::validate(cfg);
    return cfg;
}

nsfl::PipelineConfig make_pipeline_config(const PipelineOpts& o,
                                          std::uint64_t seed) {
    nsfl::PipelineConfig cfg;
    cfg.method = nsfl::method_from_string(o.method);
    cfg.stage = nsfl::stage_from_string(o.stage);
    cfg.oversample_k = o.oversample_k;
    cfg.final_k = o.final_k;
    cfg.operator_config = make_operator_config(o);
    cfg.sqo_config = make_sqo_config(o, seed);
    cfg.rescale_scores = o.rescale;
    cfg.geometric_or_passthrough = o.geo_or_passthrough;
    cfg.warm_start_monolithic = o.warm_start_monolithic;
    nsfl::validate(cfg);
    return cfg;
}

void snapshot_flags(ManifestBuilder& mb, const PipelineOpts& o) {
    mb.flags["method"] = o.method;
    mb.flags["stage"] = o.stage;
    mb.flags["K"] = std::to_string(o.oversample_k);
    mb.flags["k"] = std::to_string(o.final_k);
    mb.flags["coefficient_c"] = std::to_string(o.coefficient_c);
    mb.flags["epsilon"] = std::to_string(o.epsilon);
    mb.flags["s_max_mode"] = o.s_max_mode;
    mb.flags["raw_not"] = o.raw_not ? "true" : "false";
    mb.flags["no_stability"] = o.no_stability ? "true" : "false";
    mb.flags["rescale_scores"] = o.rescale ? "true" : "false";
    mb.flags["geo_or_passthrough"] = o.geo_or_passthrough ? "true" : "false";
    mb.flags["warm_start_monolithic"] =
        o.warm_start_monolithic ? "true" : "false";
    mb.flags["return_final"] = o.return_final ? "true" : "false";
    mb.flags["sqo_alpha"] = std::to_string(o.sqo_alpha);
    mb.flags["sqo_steps"] = std::to_string(o.sqo_steps);
    mb.flags["sqo_patience"] = std::to_string(o.sqo_patience);
    mb.flags["sqo_tol"] = std::to_string(o.sqo_tol);
    mb.flags["threads"] = std::to_string(o.threads);
}

// Runs every pack through one pipeline configuration. Failed queries are
// reported on stderr in input order; survivors land in `results`.
bool run_pack_batch(const std::vector<nsfl::QueryPack>& packs,
                    const nsfl::EmbeddingMatrix& store,
                    const nsfl::PipelineConfig& cfg, int threads,
                    std::vector<nsfl::RankedResult>& results) {
    std::vector<std::string> errors(packs.size());
    std::vector<std::optional<nsfl::RankedResult>> slot(packs.size());
    parallel_for(packs.size(), threads, [&](std::size_t i) {
        try {
            slot[i] = nsfl::run_query(packs[i], store, cfg);
        } catch (const nsfl::Error& e) {
            errors[i] = e.what();
        }
    });
    bool had_failures = false;
    for (std::size_t i = 0; i < packs.size(); ++i) {
        if (slot[i]) {
            results.push_back(std::move(*slot[i]));
        } else {
            std::cerr << "nsfl: query \"" << packs[i].qid
                      << "\" failed: " << errors[i] << "\n";
            had_failures = true;
        }
    }
    return had_failures;
}

void write_results_sorted(std::vector<nsfl::RankedResult>& results,
                          const std::string& path) {
    std::stable_sort(results.begin(), results.end(),
                     [](const nsfl::RankedResult& l, const nsfl::RankedResult& r) {
                         if (l.method != r.method) return l.method < r.method;
                         if (l.stage != r.stage) return l.stage < r.stage;
                         return l.qid < r.qid;
                     });
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw nsfl::FormatError("cannot write results: " + path);
    for (const auto& r : results) out << nsfl::to_json(r) << '\n';
    if (!out) throw nsfl::FormatError("write failed: " + path);
}

int cmd_index(const std::string& vectors, const std::string& ids) {
    const auto store = nsfl::EmbeddingMatrix::load(vectors, ids);
    std::cout << "count: " << store.size() << "\n"
              << "dim: " << store.dim() << "\n"
              << "min_raw_norm: " << store.min_raw_norm() << "\n"
              << "max_raw_norm: " << store.max_raw_norm() << "\n";
    return 0;
}

int cmd_optimize(const PipelineOpts& o) {
    const auto t0 = Clock::now();
    const std::uint64_t seed = resolve_seed(o.seed);
    const auto op_cfg = make_operator_config(o);
    const auto sqo_cfg = make_sqo_config(o, seed);

    bool had_failures = false;
    auto packs = load_packs_tolerant(o.pack_path, &had_failures);
    const double load_ms = ms_since(t0);

    std::ofstream out(o.out, std::ios::trunc);
    if (!out) throw nsfl::FormatError("cannot write output: " + o.out);

    const auto t1 = Clock::now();
    std::sort(packs.begin(), packs.end(),
              [](const auto& l, const auto& r) { return l.qid < r.qid; });
    for (const auto& pack : packs) {
        try {
            nsfl::SqoConfig per_query = sqo_cfg;
            if (o.warm_start_monolithic)
                per_query.warm_start = nsfl::detail::to_f64(pack.component("M"));
            const nsfl::SqoResult res =
                nsfl::optimize(pack, per_query, op_cfg, o.rescale);
            nlohmann::json j;
            j["qid"] = pack.qid;
            j["x_star"] = nsfl::detail::to_f32(res.x_star);
            j["final_objective"] = res.final_objective;
            j["steps_taken"] = res.steps_taken;
            j["stop_reason"] = nsfl::to_string(res.stop_reason);
            j["trace"] = res.objective_trace;
            j["provenance"] = {{"smoothing_gate_bound", 1.0},
                               {"returns", o.return_final ? "final" : "best"},
                               {"kind", nsfl::to_string(pack.kind)}};
            out << j.dump() << '\n';
        } catch (const nsfl::Error& e) {
            std::cerr << "nsfl: query \"" << pack.qid << "\" failed: "
                      << e.what() << "\n";
            had_failures = true;
        }
    }
    out.close();

    ManifestBuilder mb;
    mb.command = "optimize";
    snapshot_flags(mb, o);
    mb.seed = seed;
    mb.inputs = {o.pack_path};
    mb.outputs = {o.out};
    mb.timings_ms["load"] = load_ms;
    mb.timings_ms["optimize"] = ms_since(t1);
    mb.timings_ms["total"] = ms_since(t0);
    mb.write(o.out + ".manifest.json");
    return had_failures ? 1 : 0;
}

int cmd_search(const PipelineOpts& o, const char* command_name) {
    const auto t0 = Clock::now();
    const std::uint64_t seed = resolve_seed(o.seed);
    const auto cfg = make_pipeline_config(o, seed);

    const auto store = nsfl::EmbeddingMatrix::load(o.vectors, o.ids);
    bool had_failures = false;
    const auto packs = load_packs_tolerant(o.pack_path, &had_failures);
    const double load_ms = ms_since(t0);

    const auto t1 = Clock::now();
    std::vector<nsfl::RankedResult> results;
    had_failures |= run_pack_batch(packs, store, cfg, o.threads, results);
    write_results_sorted(results, o.out);

    ManifestBuilder mb;
    mb.command = command_name;
    snapshot_flags(mb, o);
    mb.seed = seed;
    mb.inputs = {o.vectors, o.ids, o.pack_path};
    mb.outputs = {o.out};
    mb.timings_ms["load"] = load_ms;
    mb.timings_ms["search"] = ms_since(t1);
    mb.timings_ms["total"] = ms_since(t0);
    mb.write(o.out + ".manifest.json");
    return had_failures ? 1 : 0;
}

struct EvalOpts {
    std::string results_path;
    std::string judgments_path;
    std::string from_pack;
    std::string out_prefix;
    std::size_t cutoff = 100;
    std::vector<std::size_t> recall_ks = {20, 100};
    bool best_of_fusion = false;
    bool emit_plot_data = false;
    std::uint64_t seed = 42;
    int bootstrap = 10000;
};

void write_text(const std::string& path, const std::string& text,
                ManifestBuilder& mb) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw nsfl::FormatError("cannot write: " + path);
    out << text;
    if (!out) throw nsfl::FormatError("write failed: " + path);
    mb.outputs.push_back(path);
}

int cmd_eval(const EvalOpts& eo) {
    const auto t0 = Clock::now();
    const std::uint64_t seed = resolve_seed(eo.seed);
    if (eo.judgments_path.empty() == eo.from_pack.empty())
        throw nsfl::ConfigError(
            "need exactly one of --judgments or --from-pack");

    const auto results = nsfl::load_ranked_results(eo.results_path);
    nsfl::JudgmentMap judgments;
    if (!eo.judgments_path.empty()) {
        judgments = nsfl::load_judgments(eo.judgments_path);
    } else {
        const auto packs = nsfl::load_query_pack(eo.from_pack);
        judgments = nsfl::judgments_from_packs(packs);
    }

    nsfl::EvalOptions opt;
    opt.cutoff = eo.cutoff;
    opt.recall_ks = eo.recall_ks;
    opt.best_of_fusion = eo.best_of_fusion;

    nsfl::WilcoxonOptions wopt;
    wopt.seed = seed;
    wopt.bootstrap_resamples = eo.bootstrap;

    const auto reports = nsfl::evaluate_results(results, judgments, opt);
    std::vector<std::string> warnings;
    const auto sig =
        nsfl::significance_vs_baseline(results, judgments, opt, wopt, &warnings);
    for (const auto& w : warnings) std::cerr << "nsfl: warning: " << w << "\n";

    ManifestBuilder mb;
    mb.command = "eval";
    mb.flags["cutoff"] = std::to_string(eo.cutoff);
    mb.flags["best_of_fusion"] = eo.best_of_fusion ? "true" : "false";
    mb.flags["bootstrap"] = std::to_string(eo.bootstrap);
    mb.seed = seed;
    mb.inputs = {eo.results_path};
    mb.inputs.push_back(eo.judgments_path.empty() ? eo.from_pack
                                                  : eo.judgments_path);

    write_text(eo.out_prefix + ".metrics.csv", nsfl::metrics_csv(reports), mb);
    write_text(eo.out_prefix + ".metrics.json", nsfl::metrics_json(reports), mb);
    write_text(eo.out_prefix + ".significance.csv", nsfl::significance_csv(sig),
               mb);
    if (eo.emit_plot_data)
        write_text(eo.out_prefix + ".plot.csv", nsfl::plot_data_csv(reports), mb);

    mb.timings_ms["total"] = ms_since(t0);
    mb.write(eo.out_prefix + ".manifest.json");
    return 0;
}

int cmd_ablate(PipelineOpts o, const EvalOpts& eo_in) {
    const auto t0 = Clock::now();
    const std::uint64_t seed = resolve_seed(o.seed);

    const auto store = nsfl::EmbeddingMatrix::load(o.vectors, o.ids);
    bool had_failures = false;
    const auto packs = load_packs_tolerant(o.pack_path, &had_failures);
    const double load_ms = ms_since(t0);

    EvalOpts eo = eo_in;
    nsfl::JudgmentMap judgments;
    if (!eo.judgments_path.empty())
        judgments = nsfl::load_judgments(eo.judgments_path);
    else if (!eo.from_pack.empty())
        judgments = nsfl::judgments_from_packs(nsfl::load_query_pack(eo.from_pack));
    else
        judgments = nsfl::judgments_from_packs(packs);

    const auto t1 = Clock::now();
    struct Cell {
        const char* method;
        const char* stage;
    };
    const Cell matrix[] = {{"baseline", "rerank"}, {"nsfl", "rerank"},
                           {"nsfl", "opt"},        {"nsfl", "hybrid"},
                           {"geometric", "rerank"}, {"geometric", "opt"},
                           {"geometric", "hybrid"}};
    std::vector<nsfl::RankedResult> results;
    for (const auto& cell : matrix) {
        PipelineOpts run = o;
        run.method = cell.method;
        run.stage = cell.stage;
        const auto cfg = make_pipeline_config(run, seed);
        had_failures |= run_pack_batch(packs, store, cfg, o.threads, results);
    }
    const double search_ms = ms_since(t1);

    ManifestBuilder mb;
    mb.command = "ablate";
    snapshot_flags(mb, o);
    mb.seed = seed;
    mb.inputs = {o.vectors, o.ids, o.pack_path};
    if (!eo.judgments_path.empty()) mb.inputs.push_back(eo.judgments_path);

    const std::string results_path = eo.out_prefix + ".results.jsonl";
    write_results_sorted(results, results_path);
    mb.outputs.push_back(results_path);

    nsfl::EvalOptions opt;
    opt.cutoff = eo.cutoff;
    opt.recall_ks = eo.recall_ks;
    opt.best_of_fusion = eo.best_of_fusion;
    const auto matrix_report = nsfl::ablation_report(results, judgments, opt);
    write_text(eo.out_prefix + ".ablation.csv", nsfl::to_csv(matrix_report), mb);
    write_text(eo.out_prefix + ".ablation.json", nsfl::to_json(matrix_report),
               mb);
    const auto reports = nsfl::evaluate_results(results, judgments, opt);
    write_text(eo.out_prefix + ".metrics.csv", nsfl::metrics_csv(reports), mb);

    mb.timings_ms["load"] = load_ms;
    mb.timings_ms["search"] = search_ms;
    mb.timings_ms["total"] = ms_since(t0);
    mb.write(eo.out_prefix + ".manifest.json");
    return had_failures ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"logical dense retrieval over unit-normalized embeddings"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // index
    std::string idx_vectors, idx_ids;
    auto* index = app.add_subcommand("index", "validate an embedding file");
    index->add_option("--vectors", idx_vectors, "binary vector file")
        ->required();
    index->add_option("--ids", idx_ids, "ids sidecar (jsonl)")->required();

    // optimize
    PipelineOpts opt_o;
    auto* optimize = app.add_subcommand(
        "optimize", "compile query packs into optimized query vectors");
    optimize->add_option("--pack", opt_o.pack_path, "query pack (jsonl)")
        ->required();
    optimize->add_option("--out", opt_o.out, "output (jsonl)")->required();
    optimize->add_option("--seed", opt_o.seed, "RNG seed (NSFL_SEED overrides)");
    add_operator_flags(optimize, opt_o);
    add_sqo_flags(optimize, opt_o);

    // search / rerank
    PipelineOpts s_o;
    auto add_search_flags = [&](CLI::App* cmd, bool with_stage) {
        cmd->add_option("--vectors", s_o.vectors, "binary vector file")
            ->required();
        cmd->add_option("--ids", s_o.ids, "ids sidecar (jsonl)")->required();
        cmd->add_option("--pack", s_o.pack_path, "query pack (jsonl)")
            ->required();
        cmd->add_option("--out", s_o.out, "results output (jsonl)")->required();
        cmd->add_option("--method", s_o.method, "baseline | nsfl | geometric")
            ->check(CLI::IsMember({"baseline", "nsfl", "geometric"}));
        if (with_stage)
            cmd->add_option("--stage", s_o.stage, "rerank | opt | hybrid")
                ->check(CLI::IsMember({"rerank", "opt", "hybrid"}));
        cmd->add_option("--K", s_o.oversample_k, "candidate pool size");
        cmd->add_option("--k", s_o.final_k, "returned ranking length");
        cmd->add_option("--seed", s_o.seed, "RNG seed (NSFL_SEED overrides)");
        cmd->add_option("--threads", s_o.threads, "worker threads");
        cmd->add_flag("--geo-or-passthrough", s_o.geo_or_passthrough,
                      "geometric OR uses the monolithic vector verbatim");
        add_operator_flags(cmd, s_o);
        add_sqo_flags(cmd, s_o);
    };
    auto* search = app.add_subcommand("search", "run queries end to end");
    add_search_flags(search, true);
    auto* rerank =
        app.add_subcommand("rerank", "search with the rerank stage fixed");
    add_search_flags(rerank, false);

    // eval
    EvalOpts e_o;
    auto* eval = app.add_subcommand("eval", "score results against judgments");
    eval->add_option("--results", e_o.results_path, "ranked results (jsonl)")
        ->required();
    eval->add_option("--judgments", e_o.judgments_path, "judgments (jsonl)");
    eval->add_option("--from-pack", e_o.from_pack,
                     "derive judgments from a pack's relevant_ids");
    eval->add_option("--out-prefix", e_o.out_prefix, "output path prefix")
        ->required();
    eval->add_option("--cutoff", e_o.cutoff, "AP cutoff");
    eval->add_option("--recall-k", e_o.recall_ks, "recall depths");
    eval->add_flag("--best-of-fusion", e_o.best_of_fusion,
                   "report the better fusion style per cell");
    eval->add_flag("--emit-plot-data", e_o.emit_plot_data,
                   "write per-template bar-chart series");
    eval->add_option("--seed", e_o.seed, "bootstrap seed (NSFL_SEED overrides)");
    eval->add_option("--bootstrap", e_o.bootstrap, "bootstrap resamples");

    // ablate
    PipelineOpts a_o;
    EvalOpts ae_o;
    auto* ablate =
        app.add_subcommand("ablate", "run the full method-by-stage matrix");
    ablate->add_option("--vectors", a_o.vectors, "binary vector file")
        ->required();
    ablate->add_option("--ids", a_o.ids, "ids sidecar (jsonl)")->required();
    ablate->add_option("--pack", a_o.pack_path, "query pack (jsonl)")
        ->required();
    ablate->add_option("--out-prefix", ae_o.out_prefix, "output path prefix")
        ->required();
    ablate->add_option("--judgments", ae_o.judgments_path,
                       "judgments (jsonl); defaults to pack relevant_ids");
    ablate->add_option("--K", a_o.oversample_k, "candidate pool size");
    ablate->add_option("--k", a_o.final_k, "returned ranking length");
    ablate->add_option("--cutoff", ae_o.cutoff, "AP cutoff");
    ablate->add_option("--seed", a_o.seed, "RNG seed (NSFL_SEED overrides)");
    ablate->add_option("--threads", a_o.threads, "worker threads");
    ablate->add_flag("--best-of-fusion", ae_o.best_of_fusion,
                     "report the better fusion style per cell");
    ablate->add_flag("--geo-or-passthrough", a_o.geo_or_passthrough,
                     "geometric OR uses the monolithic vector verbatim");
    add_operator_flags(ablate, a_o);
    add_sqo_flags(ablate, a_o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (index->parsed()) return cmd_index(idx_vectors, idx_ids);
        if (optimize->parsed()) return cmd_optimize(opt_o);
        if (search->parsed()) return cmd_search(s_o, "search");
        if (rerank->parsed()) {
            s_o.stage = "rerank";
            return cmd_search(s_o, "rerank");
        }
        if (eval->parsed()) return cmd_eval(e_o);
        if (ablate->parsed()) return cmd_ablate(a_o, ae_o);
    } catch (const nsfl::Error& e) {
        std::cerr << "nsfl: error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "nsfl: unexpected error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
