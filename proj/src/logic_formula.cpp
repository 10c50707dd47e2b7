#include "nsfl/logic_formula.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "nsfl/detail/vecmath.hpp"
#include "nsfl/errors.hpp"

namespace nsfl {

const char* to_string(QueryKind k) {
    switch (k) {
        case QueryKind::AND2: return "and2";
        case QueryKind::AND3: return "and3";
        case QueryKind::NOT2: return "not2";
        case QueryKind::AND_NOT3: return "and_not3";
        case QueryKind::OR2: return "or2";
        case QueryKind::OR3: return "or3";
    }
    return "?";
}

const char* to_string(FusionStyle f) {
    return f == FusionStyle::SIMPLE ? "simple" : "contextual";
}

QueryKind query_kind_from_string(const std::string& s) {
    if (s == "and2") return QueryKind::AND2;
    if (s == "and3") return QueryKind::AND3;
    if (s == "not2") return QueryKind::NOT2;
    if (s == "and_not3") return QueryKind::AND_NOT3;
    if (s == "or2") return QueryKind::OR2;
    if (s == "or3") return QueryKind::OR3;
    throw FormatError("unknown query kind: \"" + s + "\"");
}

FusionStyle fusion_style_from_string(const std::string& s) {
    if (s == "simple") return FusionStyle::SIMPLE;
    if (s == "contextual") return FusionStyle::CONTEXTUAL;
    throw FormatError("unknown fusion style: \"" + s + "\"");
}

int arity(QueryKind k) {
    switch (k) {
        case QueryKind::AND2:
        case QueryKind::NOT2:
        case QueryKind::OR2: return 2;
        default: return 3;
    }
}

const std::vector<std::string>& required_components(QueryKind k) {
    static const std::vector<std::string> pair{"A", "B", "AB", "M"};
    static const std::vector<std::string> triple{"A", "B", "C", "ABC", "M"};
    static const std::vector<std::string> and_not{"A", "B", "C", "AB", "ABC", "M"};
    switch (k) {
        case QueryKind::AND2:
        case QueryKind::NOT2:
        case QueryKind::OR2: return pair;
        case QueryKind::AND3:
        case QueryKind::OR3: return triple;
        case QueryKind::AND_NOT3: return and_not;
    }
    return pair;
}

const std::vector<float>& QueryPack::component(const std::string& key) const {
    auto it = components.find(key);
    if (it == components.end()) throw MissingComponentError(key);
    return it->second;
}

bool QueryPack::has_component(const std::string& key) const {
    return components.count(key) > 0;
}

std::size_t QueryPack::dim() const {
    return components.empty() ? 0 : components.begin()->second.size();
}

QueryPack parse_query_json(const std::string& line, std::size_t lineno) {
    const std::string where =
        lineno ? "line " + std::to_string(lineno) + ": " : "";
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(where + e.what());
    }
    if (!j.is_object()) throw FormatError(where + "expected a JSON object");

    QueryPack p;
    try {
        p.qid = j.at("qid").get<std::string>();
        p.kind = query_kind_from_string(j.at("kind").get<std::string>());
        if (j.contains("fusion_style"))
            p.fusion_style =
                fusion_style_from_string(j["fusion_style"].get<std::string>());
        for (const auto& [key, val] : j.at("components").items()) {
            if (!val.is_array())
                throw FormatError(where + "component \"" + key +
                                  "\" must be a number array");
            p.components[key] = val.get<std::vector<float>>();
        }
        if (j.contains("relevant_ids"))
            p.relevant_ids = j["relevant_ids"].get<std::vector<std::string>>();
        if (j.contains("atoms"))
            p.atoms = j["atoms"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(where + "query \"" + p.qid + "\": " + e.what());
    }
    if (p.qid.empty()) throw FormatError(where + "empty qid");
    return p;
}

std::vector<QueryPack> load_query_pack(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open query pack: " + path);
    std::vector<QueryPack> packs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        QueryPack p = parse_query_json(line, lineno);
        validate_pack(p);
        packs.push_back(std::move(p));
    }
    return packs;
}

void validate_pack(QueryPack& pack) {
    for (const auto& key : required_components(pack.kind))
        if (!pack.has_component(key)) throw MissingComponentError(key);

    std::size_t dim = 0;
    for (auto& [key, vec] : pack.components) {
        if (vec.empty())
            throw DimensionError("query \"" + pack.qid + "\" component \"" +
                                 key + "\" is empty");
        if (dim == 0) dim = vec.size();
        if (vec.size() != dim)
            throw DimensionError("query \"" + pack.qid + "\" component \"" +
                                 key + "\" has dim " +
                                 std::to_string(vec.size()) + ", expected " +
                                 std::to_string(dim));
        const double n = detail::norm(std::span<const float>(vec));
        if (std::abs(n - 1.0) <= 1e-6) continue;
        if (n < 0.99 || n > 1.01)
            throw DegenerateVectorError("query \"" + pack.qid +
                                        "\" component \"" + key +
                                        "\" has norm " + std::to_string(n) +
                                        " outside [0.99, 1.01]");
        for (float& x : vec) x = float(double(x) / n);
    }

    const int n_atoms = arity(pack.kind);
    if (pack.atoms.empty()) {
        pack.atoms = {"A", "B"};
        if (n_atoms == 3) pack.atoms.push_back("C");
    }
    if (int(pack.atoms.size()) != n_atoms)
        throw FormatError("query \"" + pack.qid + "\" has " +
                          std::to_string(pack.atoms.size()) + " atoms, kind " +
                          to_string(pack.kind) + " needs " +
                          std::to_string(n_atoms));
}

std::string to_json(const QueryPack& pack) {
    nlohmann::json j;
    j["qid"] = pack.qid;
    j["kind"] = to_string(pack.kind);
    j["fusion_style"] = to_string(pack.fusion_style);
    nlohmann::json comps = nlohmann::json::object();
    for (const auto& [key, vec] : pack.components) comps[key] = vec;
    j["components"] = std::move(comps);
    if (!pack.relevant_ids.empty()) j["relevant_ids"] = pack.relevant_ids;
    if (!pack.atoms.empty()) j["atoms"] = pack.atoms;
    return j.dump();
}

} // namespace nsfl
