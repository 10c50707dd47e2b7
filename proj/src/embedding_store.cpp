#include "nsfl/embedding_store.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "nsfl/detail/vecmath.hpp"
#include "nsfl/errors.hpp"

namespace nsfl {

namespace {

constexpr char kMagic[8] = {'N', 'S', 'F', 'L', 'E', 'M', 'B', '1'};
constexpr double kMinRowNorm = 1e-12;

std::uint32_t read_u32_le(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
           std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char buf[4] = {
        (unsigned char)(v & 0xff), (unsigned char)(v >> 8 & 0xff),
        (unsigned char)(v >> 16 & 0xff), (unsigned char)(v >> 24 & 0xff)};
    os.write(reinterpret_cast<const char*>(buf), 4);
}

static_assert(std::numeric_limits<float>::is_iec559, "float32 storage format");

} // namespace

EmbeddingMatrix EmbeddingMatrix::load(const std::string& vectors_path,
                                      const std::string& ids_path) {
    std::ifstream vf(vectors_path, std::ios::binary);
    if (!vf) throw FormatError("cannot open vector file: " + vectors_path);

    unsigned char header[16];
    if (!vf.read(reinterpret_cast<char*>(header), 16))
        throw FormatError(vectors_path + ": truncated header");
    if (std::memcmp(header, kMagic, 8) != 0)
        throw FormatError(vectors_path + ": bad magic, expected NSFLEMB1");

    const std::uint32_t count = read_u32_le(header + 8);
    const std::uint32_t dim = read_u32_le(header + 12);
    if (dim == 0) throw FormatError(vectors_path + ": zero dimension");

    const std::uintmax_t expected = 16 + std::uintmax_t(count) * dim * 4;
    std::error_code ec;
    const std::uintmax_t actual = std::filesystem::file_size(vectors_path, ec);
    if (ec || actual != expected)
        throw FormatError(vectors_path + ": size mismatch, expected " +
                          std::to_string(expected) + " bytes, got " +
                          std::to_string(actual));

    EmbeddingMatrix m;
    m.dim_ = dim;
    m.data_.resize(std::size_t(count) * dim);
    if (count > 0 &&
        !vf.read(reinterpret_cast<char*>(m.data_.data()),
                 std::streamsize(m.data_.size() * sizeof(float))))
        throw FormatError(vectors_path + ": truncated payload");
    if constexpr (std::endian::native == std::endian::big) {
        for (float& x : m.data_) {
            auto bits = std::bit_cast<std::uint32_t>(x);
            bits = __builtin_bswap32(bits);
            x = std::bit_cast<float>(bits);
        }
    }

    std::ifstream idf(ids_path);
    if (!idf) throw FormatError("cannot open ids file: " + ids_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(idf, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(ids_path + ":" + std::to_string(lineno) + ": " +
                              e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
            throw FormatError(ids_path + ":" + std::to_string(lineno) +
                              ": expected object with string \"id\"");
        m.ids_.push_back(j["id"].get<std::string>());
        std::vector<std::string> labels;
        if (j.contains("labels")) {
            if (!j["labels"].is_array())
                throw FormatError(ids_path + ":" + std::to_string(lineno) +
                                  ": \"labels\" must be an array");
            for (const auto& l : j["labels"]) {
                if (!l.is_string())
                    throw FormatError(ids_path + ":" + std::to_string(lineno) +
                                      ": labels must be strings");
                labels.push_back(l.get<std::string>());
            }
        }
        m.labels_.push_back(std::move(labels));
    }
    if (m.ids_.size() != count)
        throw FormatError(ids_path + ": " + std::to_string(m.ids_.size()) +
                          " ids for " + std::to_string(count) + " vectors");

    m.normalize_rows();
    m.build_index();
    return m;
}

EmbeddingMatrix::EmbeddingMatrix(std::uint32_t dim, std::vector<std::string> ids,
                                 std::vector<float> data,
                                 std::vector<std::vector<std::string>> labels)
    : dim_(dim), ids_(std::move(ids)), data_(std::move(data)),
      labels_(std::move(labels)) {
    if (dim_ == 0) throw FormatError("zero dimension");
    if (data_.size() != ids_.size() * std::size_t(dim_))
        throw DimensionError("data size " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(ids_.size()) +
                             " rows of dim " + std::to_string(dim_));
    if (labels_.empty()) labels_.resize(ids_.size());
    if (labels_.size() != ids_.size())
        throw DimensionError("labels count does not match id count");
    normalize_rows();
    build_index();
}

void EmbeddingMatrix::normalize_rows() {
    min_raw_norm_ = std::numeric_limits<double>::infinity();
    max_raw_norm_ = 0.0;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        std::span<float> r{data_.data() + i * dim_, dim_};
        const double n = detail::norm(std::span<const float>(r));
        if (!(n >= kMinRowNorm))
            throw DegenerateVectorError("row \"" + ids_[i] +
                                        "\" has degenerate norm " +
                                        std::to_string(n));
        min_raw_norm_ = std::min(min_raw_norm_, n);
        max_raw_norm_ = std::max(max_raw_norm_, n);
        for (float& x : r) x = float(double(x) / n);
    }
    if (ids_.empty()) min_raw_norm_ = 0.0;
}

void EmbeddingMatrix::build_index() {
    by_id_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        auto [it, inserted] = by_id_.emplace(ids_[i], i);
        if (!inserted) throw DuplicateIdError(ids_[i]);
    }
}

void EmbeddingMatrix::save(const std::string& vectors_path,
                           const std::string& ids_path) const {
    std::ofstream vf(vectors_path, std::ios::binary | std::ios::trunc);
    if (!vf) throw FormatError("cannot write vector file: " + vectors_path);
    vf.write(kMagic, 8);
    write_u32_le(vf, std::uint32_t(ids_.size()));
    write_u32_le(vf, dim_);
    if (!data_.empty()) {
        if constexpr (std::endian::native == std::endian::big) {
            for (float x : data_) {
                auto bits = __builtin_bswap32(std::bit_cast<std::uint32_t>(x));
                vf.write(reinterpret_cast<const char*>(&bits), 4);
            }
        } else {
            vf.write(reinterpret_cast<const char*>(data_.data()),
                     std::streamsize(data_.size() * sizeof(float)));
        }
    }
    if (!vf) throw FormatError("write failed: " + vectors_path);

    std::ofstream idf(ids_path, std::ios::trunc);
    if (!idf) throw FormatError("cannot write ids file: " + ids_path);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        nlohmann::json j;
        j["id"] = ids_[i];
        if (!labels_[i].empty()) j["labels"] = labels_[i];
        idf << j.dump() << '\n';
    }
    if (!idf) throw FormatError("write failed: " + ids_path);
}

std::optional<std::size_t> EmbeddingMatrix::find(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

double EmbeddingMatrix::cosine(std::span<const float> query, std::size_t i) const {
    if (query.size() != dim_)
        throw DimensionError("query dim " + std::to_string(query.size()) +
                             " vs corpus dim " + std::to_string(dim_));
    return detail::dot(query, row(i));
}

double EmbeddingMatrix::cosine(std::span<const double> query, std::size_t i) const {
    if (query.size() != dim_)
        throw DimensionError("query dim " + std::to_string(query.size()) +
                             " vs corpus dim " + std::to_string(dim_));
    return detail::dot(query, row(i));
}

std::vector<double> EmbeddingMatrix::score_all(std::span<const float> query) const {
    if (query.size() != dim_)
        throw DimensionError("query dim " + std::to_string(query.size()) +
                             " vs corpus dim " + std::to_string(dim_));
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = detail::dot(query, row(i));
    return out;
}

std::vector<double> EmbeddingMatrix::score_all(std::span<const double> query) const {
    if (query.size() != dim_)
        throw DimensionError("query dim " + std::to_string(query.size()) +
                             " vs corpus dim " + std::to_string(dim_));
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = detail::dot(query, row(i));
    return out;
}

} // namespace nsfl
