#pragma once

#include <stdexcept>
#include <string>

namespace nsfl {

// Base class for all library errors. Subclasses exist so callers can map
// failure classes onto exit codes / retry policy without string matching.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file (bad magic, truncated payload, unparsable record).
class FormatError : public Error {
public:
    using Error::Error;
};

// Invalid run configuration (flag combinations, out-of-range parameters).
class ConfigError : public Error {
public:
    using Error::Error;
};

class DuplicateIdError : public Error {
public:
    explicit DuplicateIdError(const std::string& id)
        : Error("duplicate id: " + id), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

// Vector whose norm is too small to normalize (or too far from unit).
class DegenerateVectorError : public Error {
public:
    explicit DegenerateVectorError(const std::string& what) : Error(what) {}
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class MissingComponentError : public Error {
public:
    explicit MissingComponentError(const std::string& key)
        : Error("missing query component: " + key), key_(key) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// Smoothing denominator s_max + epsilon would be non-positive.
class NonPositiveMaxError : public Error {
public:
    using Error::Error;
};

class RankOutOfRangeError : public Error {
public:
    using Error::Error;
};

// Rejection target parallel to the source vector; the residual is ~zero.
class CollinearError : public Error {
public:
    using Error::Error;
};

// Summed vectors cancel to ~zero; no direction to normalize.
class CancellationError : public Error {
public:
    using Error::Error;
};

class DegenerateRetractionError : public Error {
public:
    using Error::Error;
};

class EmptyCorpusError : public Error {
public:
    using Error::Error;
};

// Metric undefined for the given inputs (e.g. empty relevant set).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

// Too few usable pairs for the statistical test.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class MissingJudgmentError : public Error {
public:
    explicit MissingJudgmentError(const std::string& qid)
        : Error("no judgment for query: " + qid), qid_(qid) {}
    const std::string& qid() const { return qid_; }

private:
    std::string qid_;
};

} // namespace nsfl
