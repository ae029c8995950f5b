#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scauth/access.hpp"

namespace scauth {

// Eight attributes; schema is fixed.
struct PatientRecord {
    std::string id;
    std::string name;
    std::string dob;  // ISO-8601 date
    std::string gender;
    std::string city;
    std::string phone;
    std::string condition;
    uint32_t age{0};

    bool operator==(const PatientRecord&) const = default;
};

inline const std::vector<std::string>& record_fields() {
    static const std::vector<std::string> f = {"id",   "name",  "dob",       "gender",
                                               "city", "phone", "condition", "age"};
    return f;
}

std::string get_field(const PatientRecord& r, const std::string& field);

struct ViewPolicy {
    std::set<std::string> sensitive_fields{"id", "name", "dob", "condition"};
    std::string mask_token{"***"};
    std::set<std::string> aggregate_fields{"age"};
};

enum class FilterOp { Eq, Ne, Lt, Le, Gt, Ge, Contains };
std::optional<FilterOp> parse_op(std::string_view op);
const char* to_string(FilterOp op);

struct Predicate {
    std::string field;
    FilterOp op{FilterOp::Eq};
    std::string value;
};

struct QuerySpec {
    std::vector<Predicate> filter;  // conjunction
    std::optional<size_t> limit;
};

enum class ViewMode { Full, Masked, Aggregate, Denied };
const char* to_string(ViewMode m);

struct FieldStats {
    double mean{0};
    double min{0};
    double max{0};
};

struct Aggregates {
    size_t count{0};
    std::map<std::string, FieldStats> stats;  // empty when count == 0
};

struct RecordSet {
    ViewMode mode{ViewMode::Denied};
    std::vector<PatientRecord> rows;      // Full / Masked
    std::optional<Aggregates> aggregates;  // Aggregate
};

struct QueryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownField : QueryError {
    explicit UnknownField(const std::string& f) : QueryError("UnknownField: " + f) {}
};
struct BadFilterValue : QueryError {
    explicit BadFilterValue(const std::string& v) : QueryError("BadFilterValue: " + v) {}
};

// Row numbers are 1-based and count the header as row 1.
struct CsvError : std::runtime_error {
    size_t row;
    CsvError(const std::string& what, size_t row_) : std::runtime_error(what), row(row_) {}
};
struct MissingColumn : CsvError {
    explicit MissingColumn(const std::string& col)
        : CsvError("MissingColumn: " + col, 1) {}
};
struct DuplicateId : CsvError {
    DuplicateId(const std::string& id, size_t row_)
        : CsvError("DuplicateId: " + id + " at row " + std::to_string(row_), row_) {}
};
struct MalformedRow : CsvError {
    MalformedRow(const std::string& what, size_t row_)
        : CsvError("MalformedRow at row " + std::to_string(row_) + ": " + what, row_) {}
};

PatientRecord mask_record(const PatientRecord& r, const ViewPolicy& policy);
Aggregates aggregate_records(const std::vector<PatientRecord>& rows, const ViewPolicy& policy);

// Immutable after ingestion; reads need no locking.
class RecordStore {
public:
    static RecordStore ingest_csv(const std::string& path);
    static RecordStore from_rows(std::vector<PatientRecord> rows);

    size_t size() const { return rows_.size(); }
    const std::vector<PatientRecord>& rows() const { return rows_; }

    // Matching rows computed once; the decision only shapes the output.
    // aggregates.count ignores limit, so every view agrees on match count.
    RecordSet execute_query(const QuerySpec& query, AccessDecision decision,
                            const ViewPolicy& policy, bool anonymous_aggregate) const;

    std::vector<PatientRecord> match(const QuerySpec& query) const;

private:
    std::vector<PatientRecord> rows_;
};

// Seeded synthetic dataset; same (rows, seed) always emits identical bytes.
void write_synthetic_csv(const std::string& path, size_t rows, uint64_t seed);
std::vector<PatientRecord> synthetic_rows(size_t rows, uint64_t seed);

}  // namespace scauth
