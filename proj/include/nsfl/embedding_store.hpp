#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace nsfl {

/// Immutable, unit-normalized embedding matrix with string ids.
///
/// On-disk layout of the vector file:
///   bytes 0..7   magic "NSFLEMB1"
///   bytes 8..11  row count, u32 little-endian
///   bytes 12..15 dimension, u32 little-endian
///   then count*dim float32 values, row-major little-endian.
/// The file size must match the header exactly.
///
/// Ids live in a sidecar, one JSON object per line:
///   {"id": "doc-17", "labels": ["cat", "indoor"]}
/// "labels" is optional and used only by synthetic-judgment tooling.
class EmbeddingMatrix {
public:
    /// Loads and validates both files. Every row is renormalized to unit
    /// length; rows with norm below 1e-12 are rejected rather than patched.
    static EmbeddingMatrix load(const std::string& vectors_path,
                                const std::string& ids_path);

    /// In-memory construction with the same validation as load().
    /// `data` is row-major, ids.size()*dim floats.
    EmbeddingMatrix(std::uint32_t dim, std::vector<std::string> ids,
                    std::vector<float> data,
                    std::vector<std::vector<std::string>> labels = {});

    void save(const std::string& vectors_path, const std::string& ids_path) const;

    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }

    std::span<const float> row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    const std::string& id(std::size_t i) const { return ids_[i]; }
    const std::vector<std::string>& labels(std::size_t i) const { return labels_[i]; }

    /// Index of an id, or nullopt when absent.
    std::optional<std::size_t> find(const std::string& id) const;

    /// Cosine of `query` against row i. Both sides are unit vectors, so this
    /// is a plain dot product; kept as a named operation for readability.
    double cosine(std::span<const float> query, std::size_t i) const;
    double cosine(std::span<const double> query, std::size_t i) const;

    /// Cosine of `query` against every row, in row order.
    std::vector<double> score_all(std::span<const float> query) const;
    std::vector<double> score_all(std::span<const double> query) const;

    /// Smallest / largest raw row norm seen before normalization.
    double min_raw_norm() const { return min_raw_norm_; }
    double max_raw_norm() const { return max_raw_norm_; }

private:
    EmbeddingMatrix() = default;
    void normalize_rows();
    void build_index();

    std::uint32_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<float> data_;
    std::vector<std::vector<std::string>> labels_;
    std::unordered_map<std::string, std::size_t> by_id_;
    double min_raw_norm_ = 0.0;
    double max_raw_norm_ = 0.0;
};

} // namespace nsfl
