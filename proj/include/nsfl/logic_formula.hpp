#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nsfl {

enum class QueryKind { AND2, AND3, NOT2, AND_NOT3, OR2, OR3 };
enum class FusionStyle { SIMPLE, CONTEXTUAL };

const char* to_string(QueryKind k);
const char* to_string(FusionStyle f);
QueryKind query_kind_from_string(const std::string& s);
FusionStyle fusion_style_from_string(const std::string& s);

/// Number of atomic operands (2 or 3) for a kind.
int arity(QueryKind k);

/// Component keys that must be present for a kind. AND3/OR3 additionally
/// accept an optional "AB" pair carrier; AND_NOT3 requires it.
const std::vector<std::string>& required_components(QueryKind k);

/// One logical query: embeddings for each atom plus the fused carriers.
///
/// Component keys by kind:
///   and2 / not2 / or2 : A, B, AB, M
///   and3 / or3        : A, B, C, ABC, M   (AB accepted if present)
///   and_not3          : A, B, C, AB, ABC, M
/// "M" is the monolithic phrase embedding used by baselines and as the
/// fallback comparator in OR scoring.
struct QueryPack {
    std::string qid;
    QueryKind kind = QueryKind::AND2;
    FusionStyle fusion_style = FusionStyle::SIMPLE;
    std::map<std::string, std::vector<float>> components;
    std::vector<std::string> relevant_ids;
    // Label names the atoms stand for, used only when synthesizing
    // judgments from corpus labels. Defaults to {"A","B","C"} positionally.
    std::vector<std::string> atoms;

    const std::vector<float>& component(const std::string& key) const;
    bool has_component(const std::string& key) const;
    std::size_t dim() const;
};

/// Parses one JSON object (a single JSONL line) into a pack.
QueryPack parse_query_json(const std::string& line, std::size_t lineno = 0);

/// Reads a whole .jsonl file of query packs, validating each.
std::vector<QueryPack> load_query_pack(const std::string& path);

/// Checks required keys, consistent dimensions, and near-unit norms.
/// Vectors with |norm - 1| > 1e-6 are renormalized in place when the norm
/// lies in [0.99, 1.01]; anything further out raises DegenerateVectorError.
/// Validating an already-validated pack changes nothing.
void validate_pack(QueryPack& pack);

std::string to_json(const QueryPack& pack);

} // namespace nsfl
