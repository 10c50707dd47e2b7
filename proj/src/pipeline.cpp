#include "nsfl/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "nsfl/detail/vecmath.hpp"
#include "nsfl/errors.hpp"
#include "nsfl/geometric.hpp"

namespace nsfl {

namespace {

// (s + 1) / 2 when rescaling is on; identity otherwise.
double sim_transform(double s, bool rescale) {
    return rescale ? (s + 1.0) * 0.5 : s;
}

void sort_top_k(std::vector<std::pair<std::size_t, double>>& scored,
                const EmbeddingMatrix& store, std::size_t k) {
    auto better = [&](const auto& l, const auto& r) {
        if (l.second != r.second) return l.second > r.second;
        return store.id(l.first) < store.id(r.first);
    };
    if (k < scored.size()) {
        std::partial_sort(scored.begin(), scored.begin() + std::ptrdiff_t(k),
                          scored.end(), better);
        scored.resize(k);
    } else {
        std::sort(scored.begin(), scored.end(), better);
    }
}

// Dots of every pool candidate against one pack component.
std::vector<double> component_scores(
    const EmbeddingMatrix& store,
    const std::vector<std::pair<std::size_t, double>>& pool,
    const QueryPack& pack, const char* key, bool rescale) {
    const auto& v = pack.component(key);
    std::vector<double> out(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        out[i] = sim_transform(
            store.cosine(std::span<const float>(v), pool[i].first), rescale);
    return out;
}

double corpus_max_similarity(const EmbeddingMatrix& store,
                             const std::vector<float>& v, bool rescale) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < store.size(); ++i)
        best = std::max(best,
                        sim_transform(store.cosine(std::span<const float>(v), i),
                                      rescale));
    return best;
}

struct RescoreOutcome {
    std::vector<std::pair<std::size_t, double>> scored;
    std::size_t stable = 0;
    std::size_t corrected = 0;
    std::size_t clamped = 0;
};

// Scores the pool with the formula operator. Pass 1 (pool maxima for the
// smoothing gates) happens before any candidate is scored.
RescoreOutcome rescore_pool(const QueryPack& pack, const EmbeddingMatrix& store,
                            const std::vector<std::pair<std::size_t, double>>& pool,
                            const OperatorConfig& op_cfg, bool rescale) {
    const QueryKind kind = pack.kind;
    const bool ternary = arity(kind) == 3;
    const bool wants_ab = kind == QueryKind::AND2 || kind == QueryKind::NOT2 ||
                          kind == QueryKind::OR2 || kind == QueryKind::AND_NOT3;
    const bool wants_abc = ternary;
    const bool wants_m = kind == QueryKind::OR2 || kind == QueryKind::OR3;

    const auto s_a = component_scores(store, pool, pack, "A", rescale);
    const auto s_b = component_scores(store, pool, pack, "B", rescale);
    std::vector<double> s_c, s_ab, s_abc, s_m;
    if (ternary) s_c = component_scores(store, pool, pack, "C", rescale);
    if (wants_ab) s_ab = component_scores(store, pool, pack, "AB", rescale);
    if (wants_abc) s_abc = component_scores(store, pool, pack, "ABC", rescale);
    if (wants_m) s_m = component_scores(store, pool, pack, "M", rescale);

    PoolMaxima maxima;
    if (op_cfg.s_b_max_mode == OperatorConfig::MaxMode::CORPUS_MAX) {
        if (kind == QueryKind::NOT2)
            maxima.s_b_max = corpus_max_similarity(store, pack.component("B"),
                                                   rescale);
        if (kind == QueryKind::AND_NOT3)
            maxima.s_c_max = corpus_max_similarity(store, pack.component("C"),
                                                   rescale);
    } else {
        if (!s_b.empty())
            maxima.s_b_max = *std::max_element(s_b.begin(), s_b.end());
        if (!s_c.empty())
            maxima.s_c_max = *std::max_element(s_c.begin(), s_c.end());
    }

    RescoreOutcome out;
    out.scored.resize(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        ScoreBundle b;
        b.s_a = s_a[i];
        b.s_b = s_b[i];
        if (ternary) b.s_c = s_c[i];
        if (wants_ab) b.s_ab = s_ab[i];
        if (wants_abc) b.s_abc = s_abc[i];
        if (wants_m) b.s_m = s_m[i];
        const OperatorResult r = score_formula_detail(kind, b, op_cfg, maxima);
        out.scored[i] = {pool[i].first, r.score};
        if (r.branch == StabilityBranch::STABLE)
            ++out.stable;
        else
            ++out.corrected;
        if (r.gate_clamped) ++out.clamped;
    }
    return out;
}

} // namespace

const char* to_string(Method m) {
    switch (m) {
        case Method::BASELINE: return "baseline";
        case Method::NSFL: return "nsfl";
        case Method::GEOMETRIC: return "geometric";
    }
    return "?";
}

const char* to_string(Stage s) {
    switch (s) {
        case Stage::RERANK_ONLY: return "rerank";
        case Stage::OPT_ONLY: return "opt";
        case Stage::HYBRID: return "hybrid";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "baseline") return Method::BASELINE;
    if (s == "nsfl") return Method::NSFL;
    if (s == "geometric") return Method::GEOMETRIC;
    throw ConfigError("unknown method: \"" + s + "\"");
}

Stage stage_from_string(const std::string& s) {
    if (s == "rerank") return Stage::RERANK_ONLY;
    if (s == "opt") return Stage::OPT_ONLY;
    if (s == "hybrid") return Stage::HYBRID;
    throw ConfigError("unknown stage: \"" + s + "\"");
}

std::vector<std::pair<std::size_t, double>> ExactScanBackend::top_k(
    const EmbeddingMatrix& store, std::span<const double> query,
    std::size_t k) {
    std::vector<double> scores = store.score_all(query);
    std::vector<std::pair<std::size_t, double>> scored(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) scored[i] = {i, scores[i]};
    sort_top_k(scored, store, k);
    return scored;
}

void validate(const PipelineConfig& cfg) {
    if (cfg.final_k < 1) throw ConfigError("final_k must be >= 1");
    if (cfg.final_k > cfg.oversample_k)
        throw ConfigError("final_k " + std::to_string(cfg.final_k) +
                          " exceeds oversample_k " +
                          std::to_string(cfg.oversample_k));
    validate(cfg.operator_config);
    validate(cfg.sqo_config);
}

std::vector<std::pair<std::size_t, double>> retrieve_candidates(
    std::span<const double> query, const EmbeddingMatrix& store, std::size_t k,
    AnnBackend* ann, bool* clamped) {
    if (store.size() == 0) throw EmptyCorpusError("corpus is empty");
    if (k < 1) throw ConfigError("retrieval k must be >= 1");
    if (k > store.size()) {
        k = store.size();
        if (clamped) *clamped = true;
    }
    ExactScanBackend exact;
    AnnBackend* backend = ann ? ann : &exact;
    return backend->top_k(store, query, k);
}

RankedResult run_query(const QueryPack& pack, const EmbeddingMatrix& store,
                       const PipelineConfig& cfg) {
    validate(cfg);
    if (store.size() == 0) throw EmptyCorpusError("corpus is empty");

    RankedResult res;
    res.qid = pack.qid;
    res.method = cfg.method;
    res.stage = cfg.stage;
    res.kind = pack.kind;
    res.fusion_style = pack.fusion_style;
    res.provenance.rescaled = cfg.rescale_scores;

    const auto v_m = detail::to_f64(pack.component("M"));
    const bool rescale = cfg.rescale_scores;

    // The query vector driving candidate retrieval, and whether the pool
    // gets operator-rescored afterwards.
    std::vector<double> retrieval_vec;
    std::optional<std::vector<double>> rerank_vec;  // geometric rescoring
    bool operator_rescore = false;
    std::size_t pool_k = cfg.final_k;

    switch (cfg.method) {
        case Method::BASELINE:
            retrieval_vec = v_m;
            break;
        case Method::NSFL: {
            if (cfg.stage == Stage::RERANK_ONLY) {
                retrieval_vec = v_m;
                operator_rescore = true;
                pool_k = cfg.oversample_k;
            } else {
                SqoConfig sqo = cfg.sqo_config;
                if (cfg.warm_start_monolithic) sqo.warm_start = v_m;
                const SqoResult opt =
                    optimize(pack, sqo, cfg.operator_config, rescale);
                retrieval_vec = opt.x_star;
                res.provenance.sqo_steps = opt.steps_taken;
                res.provenance.sqo_stop_reason = to_string(opt.stop_reason);
                res.provenance.sqo_objective = opt.final_objective;
                res.provenance.notes.push_back("sqo-smoothing-gate=1");
                if (cfg.warm_start_monolithic)
                    res.provenance.notes.push_back("warm-start=monolithic");
                res.provenance.notes.push_back(
                    sqo.return_final ? "sqo-return=final" : "sqo-return=best");
                if (cfg.stage == Stage::HYBRID) {
                    operator_rescore = true;
                    pool_k = cfg.oversample_k;
                }
            }
            break;
        }
        case Method::GEOMETRIC: {
            auto gq = geometric_query(pack, cfg.geometric_or_passthrough);
            if (cfg.geometric_or_passthrough &&
                (pack.kind == QueryKind::OR2 || pack.kind == QueryKind::OR3))
                res.provenance.notes.push_back("geo-or-passthrough");
            if (pack.kind == QueryKind::AND_NOT3)
                res.provenance.notes.push_back("extrapolated-baseline");
            if (cfg.stage == Stage::RERANK_ONLY) {
                retrieval_vec = v_m;
                rerank_vec = std::move(gq);
                pool_k = cfg.oversample_k;
                res.provenance.notes.push_back("rerank=cosine-to-geometric");
            } else {
                retrieval_vec = std::move(gq);
                if (cfg.stage == Stage::HYBRID) {
                    rerank_vec = retrieval_vec;
                    pool_k = cfg.oversample_k;
                }
            }
            break;
        }
    }

    bool clamped = false;
    auto pool = retrieve_candidates(retrieval_vec, store, pool_k, cfg.ann,
                                    &clamped);
    res.provenance.pool_size = pool.size();
    res.provenance.pool_clamped = clamped;

    std::vector<std::pair<std::size_t, double>> scored;
    if (operator_rescore) {
        if (pack.kind == QueryKind::OR3)
            res.provenance.notes.push_back("extrapolated-ternary");
        if (pack.kind == QueryKind::AND_NOT3)
            res.provenance.notes.push_back("inner-and=stable");
        RescoreOutcome rr = rescore_pool(pack, store, pool,
                                         cfg.operator_config, rescale);
        res.provenance.stable_hits = rr.stable;
        res.provenance.corrected_hits = rr.corrected;
        res.provenance.gate_clamp_hits = rr.clamped;
        scored = std::move(rr.scored);
    } else if (rerank_vec) {
        scored.resize(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i)
            scored[i] = {pool[i].first,
                         sim_transform(store.cosine(
                                           std::span<const double>(*rerank_vec),
                                           pool[i].first),
                                       rescale)};
    } else {
        scored = std::move(pool);
        for (auto& [idx, s] : scored) s = sim_transform(s, rescale);
    }

    sort_top_k(scored, store, std::min(cfg.final_k, scored.size()));
    res.entries.reserve(scored.size());
    for (const auto& [idx, s] : scored)
        res.entries.push_back({store.id(idx), s});
    return res;
}

std::string to_json(const RankedResult& r) {
    nlohmann::json j;
    j["qid"] = r.qid;
    j["method"] = to_string(r.method);
    j["stage"] = to_string(r.stage);
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries)
        entries.push_back({{"id", e.id}, {"score", e.score}});
    j["entries"] = std::move(entries);

    nlohmann::json prov;
    prov["kind"] = to_string(r.kind);
    prov["fusion_style"] = to_string(r.fusion_style);
    prov["pool_size"] = r.provenance.pool_size;
    if (r.provenance.stable_hits) prov["stable_hits"] = *r.provenance.stable_hits;
    if (r.provenance.corrected_hits)
        prov["corrected_hits"] = *r.provenance.corrected_hits;
    if (r.provenance.gate_clamp_hits)
        prov["gate_clamp_hits"] = *r.provenance.gate_clamp_hits;
    prov["rescaled"] = r.provenance.rescaled;
    if (r.provenance.pool_clamped) prov["pool_clamped"] = true;
    if (r.provenance.sqo_steps) prov["sqo_steps"] = *r.provenance.sqo_steps;
    if (r.provenance.sqo_stop_reason)
        prov["sqo_stop_reason"] = *r.provenance.sqo_stop_reason;
    if (r.provenance.sqo_objective)
        prov["sqo_objective"] = *r.provenance.sqo_objective;
    if (!r.provenance.notes.empty()) prov["notes"] = r.provenance.notes;
    j["provenance"] = std::move(prov);
    return j.dump();
}

RankedResult ranked_result_from_json(const std::string& line,
                                     std::size_t lineno) {
    const std::string where =
        lineno ? "line " + std::to_string(lineno) + ": " : "";
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(where + e.what());
    }
    RankedResult r;
    try {
        r.qid = j.at("qid").get<std::string>();
        r.method = method_from_string(j.at("method").get<std::string>());
        r.stage = stage_from_string(j.at("stage").get<std::string>());
        for (const auto& e : j.at("entries"))
            r.entries.push_back({e.at("id").get<std::string>(),
                                 e.at("score").get<double>()});
        const auto& prov = j.at("provenance");
        r.kind = query_kind_from_string(prov.at("kind").get<std::string>());
        if (prov.contains("fusion_style"))
            r.fusion_style = fusion_style_from_string(
                prov["fusion_style"].get<std::string>());
        if (prov.contains("pool_size"))
            r.provenance.pool_size = prov["pool_size"].get<std::size_t>();
        if (prov.contains("stable_hits"))
            r.provenance.stable_hits = prov["stable_hits"].get<std::size_t>();
        if (prov.contains("corrected_hits"))
            r.provenance.corrected_hits =
                prov["corrected_hits"].get<std::size_t>();
        if (prov.contains("gate_clamp_hits"))
            r.provenance.gate_clamp_hits =
                prov["gate_clamp_hits"].get<std::size_t>();
        if (prov.contains("rescaled"))
            r.provenance.rescaled = prov["rescaled"].get<bool>();
        if (prov.contains("pool_clamped"))
            r.provenance.pool_clamped = prov["pool_clamped"].get<bool>();
        if (prov.contains("notes"))
            r.provenance.notes = prov["notes"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(where + "ranked result: " + e.what());
    }
    return r;
}

std::vector<RankedResult> load_ranked_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open results file: " + path);
    std::vector<RankedResult> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        out.push_back(ranked_result_from_json(line, lineno));
    }
    return out;
}

} // namespace nsfl
