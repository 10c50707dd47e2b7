#include "nsfl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <tuple>

#include <nlohmann/json.hpp>

#include "nsfl/errors.hpp"

namespace nsfl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Unbiased-enough bounded draw that does not depend on the standard
// library's distribution internals (keeps CI bounds reproducible).
std::size_t bounded(std::uint64_t r, std::size_t n) {
    return std::size_t((unsigned __int128)(r) * n >> 64);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double mean_of(const std::map<std::string, double>& m) {
    if (m.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [k, v] : m) s += v;
    return s / double(m.size());
}

} // namespace

const std::array<QueryKind, 6> kAblationTemplates = {
    QueryKind::AND2, QueryKind::AND3,     QueryKind::NOT2,
    QueryKind::AND_NOT3, QueryKind::OR2,  QueryKind::OR3};

JudgmentMap load_judgments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open judgments file: " + path);
    JudgmentMap out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            const auto qid = j.at("qid").get<std::string>();
            auto ids = j.at("relevant_ids").get<std::vector<std::string>>();
            out[qid] = {ids.begin(), ids.end()};
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": " +
                              e.what());
        }
    }
    return out;
}

JudgmentMap judgments_from_packs(std::span<const QueryPack> packs) {
    JudgmentMap out;
    for (const auto& p : packs)
        out[p.qid] = {p.relevant_ids.begin(), p.relevant_ids.end()};
    return out;
}

JudgmentMap judgments_from_labels(const EmbeddingMatrix& store,
                                  std::span<const QueryPack> packs) {
    JudgmentMap out;
    for (const auto& p : packs) {
        auto& rel = out[p.qid];
        for (std::size_t i = 0; i < store.size(); ++i) {
            const auto& labels = store.labels(i);
            auto has = [&](const std::string& atom) {
                return std::find(labels.begin(), labels.end(), atom) !=
                       labels.end();
            };
            bool keep = false;
            switch (p.kind) {
                case QueryKind::AND2:
                    keep = has(p.atoms[0]) && has(p.atoms[1]);
                    break;
                case QueryKind::AND3:
                    keep = has(p.atoms[0]) && has(p.atoms[1]) && has(p.atoms[2]);
                    break;
                case QueryKind::NOT2:
                    keep = has(p.atoms[0]) && !has(p.atoms[1]);
                    break;
                case QueryKind::AND_NOT3:
                    keep = has(p.atoms[0]) && has(p.atoms[1]) && !has(p.atoms[2]);
                    break;
                case QueryKind::OR2:
                    keep = has(p.atoms[0]) || has(p.atoms[1]);
                    break;
                case QueryKind::OR3:
                    keep = has(p.atoms[0]) || has(p.atoms[1]) || has(p.atoms[2]);
                    break;
            }
            if (keep) rel.insert(store.id(i));
        }
    }
    return out;
}

double average_precision(std::span<const std::string> ranking,
                         const std::unordered_set<std::string>& relevant,
                         std::size_t cutoff) {
    if (relevant.empty())
        throw UndefinedMetricError("average precision over an empty relevant set");
    if (cutoff < 1) throw ConfigError("cutoff must be >= 1");
    std::size_t hits = 0;
    double sum = 0.0;
    const std::size_t upto = std::min(cutoff, ranking.size());
    for (std::size_t r = 0; r < upto; ++r) {
        if (relevant.count(ranking[r])) {
            ++hits;
            sum += double(hits) / double(r + 1);
        }
    }
    return sum / double(std::min(relevant.size(), cutoff));
}

double recall_at_k(std::span<const std::string> ranking,
                   const std::unordered_set<std::string>& relevant,
                   std::size_t k) {
    if (relevant.empty())
        throw UndefinedMetricError("recall over an empty relevant set");
    if (k < 1) throw ConfigError("K must be >= 1");
    std::size_t hits = 0;
    const std::size_t upto = std::min(k, ranking.size());
    for (std::size_t r = 0; r < upto; ++r)
        if (relevant.count(ranking[r])) ++hits;
    return double(hits) / double(relevant.size());
}

SignificanceResult wilcoxon_signed_rank(std::span<const double> a,
                                        std::span<const double> b,
                                        const WilcoxonOptions& opt) {
    if (a.size() != b.size())
        throw DimensionError("paired series of lengths " +
                             std::to_string(a.size()) + " and " +
                             std::to_string(b.size()));
    std::vector<double> diffs(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diffs[i] = a[i] - b[i];

    std::vector<double> nz;
    for (double d : diffs)
        if (d != 0.0) nz.push_back(d);
    const std::size_t n = nz.size();
    if (n < 5)
        throw InsufficientDataError("only " + std::to_string(n) +
                                    " non-zero differences, need >= 5");

    // Average ranks of |d|, ascending. Tied magnitudes share their ranks'
    // mean, which keeps every rank a multiple of 1/2.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        return std::abs(nz[l]) < std::abs(nz[r]);
    });
    std::vector<double> rank(n, 0.0);
    std::vector<std::size_t> tie_sizes;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && std::abs(nz[order[j]]) == std::abs(nz[order[i]])) ++j;
        const double avg = (double(i + 1) + double(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t) rank[order[t]] = avg;
        tie_sizes.push_back(j - i);
        i = j;
    }

    double w_plus = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (nz[i] > 0.0) w_plus += rank[i];
    const double total = double(n) * double(n + 1) / 2.0;
    const double w_minus = total - w_plus;

    SignificanceResult res;
    res.n_effective = n;
    res.statistic = std::min(w_plus, w_minus);

    if (n <= 25) {
        // Exact permutation distribution, computed over doubled ranks so
        // every achievable sum is an integer.
        std::vector<long long> dr(n);
        long long total2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            dr[i] = llround(2.0 * rank[i]);
            total2 += dr[i];
        }
        std::vector<std::uint64_t> counts(std::size_t(total2) + 1, 0);
        counts[0] = 1;
        long long reach = 0;
        for (std::size_t i = 0; i < n; ++i) {
            reach += dr[i];
            for (long long w = reach; w >= dr[i]; --w)
                counts[std::size_t(w)] += counts[std::size_t(w - dr[i])];
        }
        const long long mu2_twice = total2;  // 2 * mean of (2 W+)
        const long long obs2 = llround(2.0 * w_plus);
        // Extremeness in units of |2*(2W) - 2*mu2| avoids halves entirely.
        const long long obs_dev = std::llabs(2 * obs2 - mu2_twice);
        std::uint64_t extreme = 0;
        for (long long w = 0; w <= total2; ++w)
            if (std::llabs(2 * w - mu2_twice) >= obs_dev)
                extreme += counts[std::size_t(w)];
        res.p_value = double(extreme) / std::ldexp(1.0, int(n));
    } else {
        const double mu = double(n) * double(n + 1) / 4.0;
        double var = double(n) * double(n + 1) * double(2 * n + 1) / 24.0;
        for (std::size_t t : tie_sizes)
            var -= (double(t) * t * t - double(t)) / 48.0;
        if (var <= 0.0) {
            res.p_value = 1.0;
        } else {
            const double dev = std::abs(w_plus - mu);
            const double z = std::max(0.0, (dev - 0.5) / std::sqrt(var));
            res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
        }
    }

    // Percentile bootstrap over the mean difference, zeros included.
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= double(diffs.size());
    res.mean_delta = mean;

    const int R = opt.bootstrap_resamples;
    if (R > 0) {
        std::vector<double> means(static_cast<std::size_t>(R));
        for (int r = 0; r < R; ++r) {
            std::uint64_t s = splitmix64(opt.seed + 1 + std::uint64_t(r));
            double acc = 0.0;
            for (std::size_t i = 0; i < diffs.size(); ++i) {
                s = splitmix64(s);
                acc += diffs[bounded(s, diffs.size())];
            }
            means[std::size_t(r)] = acc / double(diffs.size());
        }
        std::sort(means.begin(), means.end());
        auto quant = [&](double q) {
            return means[std::size_t(llround(q * double(R - 1)))];
        };
        res.ci_95 = {quant(0.025), quant(0.975)};
    } else {
        res.ci_95 = {mean, mean};
    }
    return res;
}

namespace {

struct GroupKey {
    int method, stage, kind, fusion;
    auto operator<=>(const GroupKey&) const = default;
};

struct GroupAccum {
    std::map<std::string, double> ap;
    std::map<std::size_t, std::map<std::string, double>> recall;
    std::vector<std::string> skipped;
};

} // namespace

std::vector<EvalReport> evaluate_results(std::span<const RankedResult> results,
                                         const JudgmentMap& judgments,
                                         const EvalOptions& opt) {
    std::map<GroupKey, GroupAccum> groups;
    for (const auto& r : results) {
        auto it = judgments.find(r.qid);
        if (it == judgments.end()) throw MissingJudgmentError(r.qid);
        GroupKey key{int(r.method), int(r.stage), int(r.kind),
                     opt.best_of_fusion ? int(r.fusion_style) : -1};
        auto& acc = groups[key];
        if (it->second.empty()) {
            acc.skipped.push_back(r.qid);
            continue;
        }
        std::vector<std::string> ranking;
        ranking.reserve(r.entries.size());
        for (const auto& e : r.entries) ranking.push_back(e.id);
        acc.ap[r.qid] = average_precision(ranking, it->second, opt.cutoff);
        for (std::size_t k : opt.recall_ks)
            acc.recall[k][r.qid] = recall_at_k(ranking, it->second, k);
    }

    std::vector<EvalReport> reports;
    for (auto& [key, acc] : groups) {
        EvalReport rep;
        rep.method = Method(key.method);
        rep.stage = Stage(key.stage);
        rep.kind = QueryKind(key.kind);
        if (key.fusion >= 0) rep.fusion_style = FusionStyle(key.fusion);
        rep.cutoff = opt.cutoff;
        rep.per_query_ap = std::move(acc.ap);
        rep.map_at_k = mean_of(rep.per_query_ap);
        for (auto& [k, per_query] : acc.recall)
            rep.recall_at[k] = mean_of(per_query);
        rep.skipped_qids = std::move(acc.skipped);
        reports.push_back(std::move(rep));
    }

    if (opt.best_of_fusion) {
        // Keep the better-scoring fusion style per (method, stage, template);
        // simple wins ties by enum order.
        std::map<std::tuple<int, int, int>, std::size_t> winner;
        for (std::size_t i = 0; i < reports.size(); ++i) {
            auto cell = std::make_tuple(int(reports[i].method),
                                        int(reports[i].stage),
                                        int(reports[i].kind));
            auto it = winner.find(cell);
            if (it == winner.end() ||
                reports[i].map_at_k > reports[it->second].map_at_k)
                winner[cell] = i;
        }
        std::vector<EvalReport> kept;
        for (auto& [cell, idx] : winner) kept.push_back(std::move(reports[idx]));
        reports = std::move(kept);
    }
    return reports;
}

AblationMatrix ablation_report(std::span<const RankedResult> results,
                               const JudgmentMap& judgments,
                               const EvalOptions& opt) {
    const auto reports = evaluate_results(results, judgments, opt);

    auto cell_value = [&](Method m, std::optional<Stage> s,
                          QueryKind kind) -> std::optional<double> {
        // The baseline is stage-independent, so its row pools every stage.
        std::map<std::string, double> pooled;
        for (const auto& rep : reports) {
            if (rep.method != m || rep.kind != kind) continue;
            if (s && rep.stage != *s) continue;
            for (const auto& [qid, ap] : rep.per_query_ap) pooled[qid] = ap;
        }
        if (pooled.empty()) return std::nullopt;
        return mean_of(pooled);
    };

    AblationMatrix mat;
    std::vector<std::pair<Method, std::optional<Stage>>> layout = {
        {Method::BASELINE, std::nullopt},
        {Method::NSFL, Stage::RERANK_ONLY},
        {Method::NSFL, Stage::OPT_ONLY},
        {Method::NSFL, Stage::HYBRID},
        {Method::GEOMETRIC, Stage::RERANK_ONLY},
        {Method::GEOMETRIC, Stage::OPT_ONLY},
        {Method::GEOMETRIC, Stage::HYBRID},
    };
    for (const auto& [m, s] : layout) {
        AblationRow row;
        row.method = m;
        row.stage = s;
        double sum = 0.0;
        int present = 0;
        for (std::size_t c = 0; c < kAblationTemplates.size(); ++c) {
            row.cells[c] = cell_value(m, s, kAblationTemplates[c]);
            if (row.cells[c]) {
                sum += *row.cells[c];
                ++present;
            }
        }
        if (present > 0) row.avg = sum / present;
        mat.rows.push_back(std::move(row));
    }
    return mat;
}

std::string to_csv(const AblationMatrix& m) {
    std::string out = "method,stage";
    for (QueryKind k : kAblationTemplates) {
        out += ',';
        out += to_string(k);
    }
    out += ",avg\n";
    for (const auto& row : m.rows) {
        out += to_string(row.method);
        out += ',';
        out += row.stage ? to_string(*row.stage) : "-";
        for (const auto& cell : row.cells) {
            out += ',';
            if (cell) out += fmt("%.4f", *cell);
        }
        out += ',';
        if (row.avg) out += fmt("%.4f", *row.avg);
        out += '\n';
    }
    return out;
}

std::string to_json(const AblationMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : m.rows) {
        nlohmann::json j;
        j["method"] = to_string(row.method);
        j["stage"] = row.stage ? to_string(*row.stage) : "-";
        nlohmann::json cells;
        for (std::size_t c = 0; c < kAblationTemplates.size(); ++c) {
            const char* name = to_string(kAblationTemplates[c]);
            if (row.cells[c])
                cells[name] = *row.cells[c];
            else
                cells[name] = nullptr;
        }
        j["map"] = std::move(cells);
        if (row.avg)
            j["avg"] = *row.avg;
        else
            j["avg"] = nullptr;
        rows.push_back(std::move(j));
    }
    nlohmann::json top;
    top["rows"] = std::move(rows);
    return top.dump(2) + "\n";
}

std::string metrics_csv(std::span<const EvalReport> reports) {
    std::string out = "method,stage,template,metric,value\n";
    for (const auto& rep : reports) {
        const std::string prefix = std::string(to_string(rep.method)) + "," +
                                   to_string(rep.stage) + "," +
                                   to_string(rep.kind) + ",";
        out += prefix + "map@" + std::to_string(rep.cutoff) + ',' +
               fmt("%.6f", rep.map_at_k) + '\n';
        for (const auto& [k, v] : rep.recall_at)
            out += prefix + "recall@" + std::to_string(k) + ',' +
                   fmt("%.6f", v) + '\n';
    }
    return out;
}

std::string metrics_json(std::span<const EvalReport> reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& rep : reports) {
        nlohmann::json j;
        j["method"] = to_string(rep.method);
        j["stage"] = to_string(rep.stage);
        j["template"] = to_string(rep.kind);
        if (rep.fusion_style) j["fusion_style"] = to_string(*rep.fusion_style);
        j["map"] = rep.map_at_k;
        nlohmann::json rec;
        for (const auto& [k, v] : rep.recall_at) rec[std::to_string(k)] = v;
        j["recall"] = std::move(rec);
        nlohmann::json aps;
        for (const auto& [qid, ap] : rep.per_query_ap) aps[qid] = ap;
        j["per_query_ap"] = std::move(aps);
        if (!rep.skipped_qids.empty()) j["skipped_qids"] = rep.skipped_qids;
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

std::string plot_data_csv(std::span<const EvalReport> reports) {
    std::string out = "template,method,stage,map\n";
    for (QueryKind k : kAblationTemplates)
        for (const auto& rep : reports)
            if (rep.kind == k)
                out += std::string(to_string(k)) + ',' + to_string(rep.method) +
                       ',' + to_string(rep.stage) + ',' +
                       fmt("%.6f", rep.map_at_k) + '\n';
    return out;
}

std::vector<SignificanceRow> significance_vs_baseline(
    std::span<const RankedResult> results, const JudgmentMap& judgments,
    const EvalOptions& opt, const WilcoxonOptions& wopt,
    std::vector<std::string>* warnings) {
    const auto reports = evaluate_results(results, judgments, opt);

    // Baseline per-query APs per template, pooled across stages.
    std::map<int, std::map<std::string, double>> baseline;
    for (const auto& rep : reports)
        if (rep.method == Method::BASELINE)
            for (const auto& [qid, ap] : rep.per_query_ap)
                baseline[int(rep.kind)][qid] = ap;

    std::vector<SignificanceRow> rows;
    for (const auto& rep : reports) {
        if (rep.method == Method::BASELINE) continue;
        auto base_it = baseline.find(int(rep.kind));
        const std::string label = std::string(to_string(rep.method)) + "/" +
                                  to_string(rep.stage) + "/" +
                                  to_string(rep.kind);
        if (base_it == baseline.end()) {
            if (warnings)
                warnings->push_back("no baseline results for template " +
                                    std::string(to_string(rep.kind)) +
                                    "; skipping " + label);
            continue;
        }
        std::vector<double> a, b;
        for (const auto& [qid, ap] : rep.per_query_ap) {
            auto it = base_it->second.find(qid);
            if (it == base_it->second.end()) continue;
            a.push_back(ap);
            b.push_back(it->second);
        }
        try {
            SignificanceRow row;
            row.method = rep.method;
            row.stage = rep.stage;
            row.kind = rep.kind;
            row.result = wilcoxon_signed_rank(a, b, wopt);
            rows.push_back(std::move(row));
        } catch (const InsufficientDataError& e) {
            if (warnings)
                warnings->push_back(label + ": " + e.what() + "; skipping");
        }
    }
    return rows;
}

std::string significance_csv(std::span<const SignificanceRow> rows) {
    std::string out =
        "method,stage,template,n_effective,statistic,p_value,mean_delta,"
        "ci_lo,ci_hi\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.method)) + ',' + to_string(r.stage) +
               ',' + to_string(r.kind) + ',' +
               std::to_string(r.result.n_effective) + ',' +
               fmt("%.1f", r.result.statistic) + ',' +
               fmt("%.9g", r.result.p_value) + ',' +
               fmt("%.6f", r.result.mean_delta) + ',' +
               fmt("%.6f", r.result.ci_95.first) + ',' +
               fmt("%.6f", r.result.ci_95.second) + '\n';
    }
    return out;
}

} // namespace nsfl
