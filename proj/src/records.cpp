#include "scauth/records.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

namespace scauth {

std::string get_field(const PatientRecord& r, const std::string& field) {
    if (field == "id") return r.id;
    if (field == "name") return r.name;
    if (field == "dob") return r.dob;
    if (field == "gender") return r.gender;
    if (field == "city") return r.city;
    if (field == "phone") return r.phone;
    if (field == "condition") return r.condition;
    if (field == "age") return std::to_string(r.age);
    throw UnknownField(field);
}

static void set_field(PatientRecord& r, const std::string& field, const std::string& value,
                      size_t row) {
    if (field == "id") {
        r.id = value;
    } else if (field == "name") {
        r.name = value;
    } else if (field == "dob") {
        r.dob = value;
    } else if (field == "gender") {
        r.gender = value;
    } else if (field == "city") {
        r.city = value;
    } else if (field == "phone") {
        r.phone = value;
    } else if (field == "condition") {
        r.condition = value;
    } else if (field == "age") {
        uint32_t age = 0;
        auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), age);
        if (ec != std::errc() || p != value.data() + value.size())
            throw MalformedRow("age is not a non-negative integer: \"" + value + "\"", row);
        r.age = age;
    }
}

std::optional<FilterOp> parse_op(std::string_view op) {
    if (op == "=" || op == "==") return FilterOp::Eq;
    if (op == "!=") return FilterOp::Ne;
    if (op == "<") return FilterOp::Lt;
    if (op == "<=") return FilterOp::Le;
    if (op == ">") return FilterOp::Gt;
    if (op == ">=") return FilterOp::Ge;
    if (op == "contains") return FilterOp::Contains;
    return std::nullopt;
}

const char* to_string(FilterOp op) {
    switch (op) {
        case FilterOp::Eq: return "=";
        case FilterOp::Ne: return "!=";
        case FilterOp::Lt: return "<";
        case FilterOp::Le: return "<=";
        case FilterOp::Gt: return ">";
        case FilterOp::Ge: return ">=";
        case FilterOp::Contains: return "contains";
    }
    return "?";
}

const char* to_string(ViewMode m) {
    switch (m) {
        case ViewMode::Full: return "Full";
        case ViewMode::Masked: return "Masked";
        case ViewMode::Aggregate: return "Aggregate";
        case ViewMode::Denied: return "Denied";
    }
    return "?";
}

// ---- CSV ----

namespace {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // rows[i] is file row i+2
};

// RFC 4180: quoted fields may contain commas, newlines, and doubled quotes.
CsvTable parse_csv(std::istream& in) {
    CsvTable table;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    size_t row_no = 1;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        if (table.header.empty())
            table.header = std::move(row);
        else
            table.rows.push_back(std::move(row));
        row.clear();
        row_started = false;
        ++row_no;
    };

    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field.empty())
                    in_quotes = true;
                else
                    field.push_back(c);  // stray quote mid-field kept literal
                row_started = true;
                break;
            case ',':
                end_field();
                row_started = true;
                break;
            case '\r':
                break;
            case '\n':
                if (row_started || !field.empty() || !row.empty()) end_row();
                break;
            default:
                field.push_back(c);
                row_started = true;
        }
    }
    if (in_quotes) throw MalformedRow("unterminated quoted field", row_no);
    if (row_started || !field.empty() || !row.empty()) end_row();
    return table;
}

}  // namespace

RecordStore RecordStore::ingest_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedRow("cannot open file: " + path, 0);

    CsvTable table = parse_csv(in);
    if (table.header.empty()) throw MissingColumn("id");

    std::map<std::string, size_t> col;
    for (size_t i = 0; i < table.header.size(); ++i) {
        const std::string& name = table.header[i];
        if (col.count(name)) throw MalformedRow("duplicate column \"" + name + "\"", 1);
        col[name] = i;
    }
    for (const std::string& want : record_fields())
        if (!col.count(want)) throw MissingColumn(want);
    if (table.header.size() != record_fields().size())
        throw MalformedRow("unexpected extra column", 1);

    std::vector<PatientRecord> rows;
    rows.reserve(table.rows.size());
    std::unordered_set<std::string> seen_ids;
    for (size_t i = 0; i < table.rows.size(); ++i) {
        size_t row_no = i + 2;  // header is row 1
        const auto& cells = table.rows[i];
        if (cells.size() != record_fields().size())
            throw MalformedRow("expected 8 fields, got " + std::to_string(cells.size()), row_no);
        PatientRecord r;
        for (const std::string& f : record_fields()) set_field(r, f, cells[col[f]], row_no);
        if (r.id.empty()) throw MalformedRow("empty id", row_no);
        if (!seen_ids.insert(r.id).second) throw DuplicateId(r.id, row_no);
        rows.push_back(std::move(r));
    }

    RecordStore store;
    store.rows_ = std::move(rows);
    return store;
}

RecordStore RecordStore::from_rows(std::vector<PatientRecord> rows) {
    RecordStore store;
    std::unordered_set<std::string> seen;
    for (size_t i = 0; i < rows.size(); ++i)
        if (rows[i].id.empty() || !seen.insert(rows[i].id).second)
            throw DuplicateId(rows[i].id, i + 2);
    store.rows_ = std::move(rows);
    return store;
}

// ---- queries ----

namespace {

bool is_numeric_field(const std::string& field) {
    return field == "age";
}

bool compare_ordered(int cmp, FilterOp op) {
    switch (op) {
        case FilterOp::Eq: return cmp == 0;
        case FilterOp::Ne: return cmp != 0;
        case FilterOp::Lt: return cmp < 0;
        case FilterOp::Le: return cmp <= 0;
        case FilterOp::Gt: return cmp > 0;
        case FilterOp::Ge: return cmp >= 0;
        case FilterOp::Contains: return false;
    }
    return false;
}

bool matches(const PatientRecord& r, const Predicate& p) {
    std::string value = get_field(r, p.field);
    if (p.op == FilterOp::Contains) return value.find(p.value) != std::string::npos;
    if (is_numeric_field(p.field)) {
        long long want = 0;
        auto [ptr, ec] = std::from_chars(p.value.data(), p.value.data() + p.value.size(), want);
        if (ec != std::errc() || ptr != p.value.data() + p.value.size())
            throw BadFilterValue(p.value);
        long long have = static_cast<long long>(r.age);
        return compare_ordered(have < want ? -1 : (have > want ? 1 : 0), p.op);
    }
    int cmp = value.compare(p.value);
    return compare_ordered(cmp < 0 ? -1 : (cmp > 0 ? 1 : 0), p.op);
}

}  // namespace

std::vector<PatientRecord> RecordStore::match(const QuerySpec& query) const {
    const auto& schema = record_fields();
    for (const Predicate& p : query.filter)
        if (std::find(schema.begin(), schema.end(), p.field) == schema.end())
            throw UnknownField(p.field);

    std::vector<PatientRecord> out;
    for (const PatientRecord& r : rows_) {
        bool ok = true;
        for (const Predicate& p : query.filter) {
            if (!matches(r, p)) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(r);
    }
    return out;
}

PatientRecord mask_record(const PatientRecord& r, const ViewPolicy& policy) {
    PatientRecord out = r;
    // Only string attributes can carry the token in-struct; a sensitive
    // numeric attribute is masked at serialization instead.
    if (policy.sensitive_fields.count("id")) out.id = policy.mask_token;
    if (policy.sensitive_fields.count("name")) out.name = policy.mask_token;
    if (policy.sensitive_fields.count("dob")) out.dob = policy.mask_token;
    if (policy.sensitive_fields.count("gender")) out.gender = policy.mask_token;
    if (policy.sensitive_fields.count("city")) out.city = policy.mask_token;
    if (policy.sensitive_fields.count("phone")) out.phone = policy.mask_token;
    if (policy.sensitive_fields.count("condition")) out.condition = policy.mask_token;
    return out;
}

Aggregates aggregate_records(const std::vector<PatientRecord>& rows, const ViewPolicy& policy) {
    Aggregates agg;
    agg.count = rows.size();
    if (rows.empty()) return agg;
    for (const std::string& field : policy.aggregate_fields) {
        if (!is_numeric_field(field)) continue;
        double sum = 0;
        double lo = 0;
        double hi = 0;
        bool first = true;
        for (const PatientRecord& r : rows) {
            double v = static_cast<double>(r.age);
            sum += v;
            if (first) {
                lo = hi = v;
                first = false;
            } else {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        agg.stats[field] = FieldStats{sum / static_cast<double>(rows.size()), lo, hi};
    }
    return agg;
}

RecordSet RecordStore::execute_query(const QuerySpec& query, AccessDecision decision,
                                     const ViewPolicy& policy, bool anonymous_aggregate) const {
    std::vector<PatientRecord> found = match(query);

    auto truncate = [&](std::vector<PatientRecord>& rows) {
        if (query.limit && rows.size() > *query.limit) rows.resize(*query.limit);
    };

    RecordSet out;
    switch (decision) {
        case AccessDecision::FullView:
            out.mode = ViewMode::Full;
            truncate(found);
            out.rows = std::move(found);
            break;
        case AccessDecision::RestrictedView:
            out.mode = ViewMode::Masked;
            truncate(found);
            out.rows.reserve(found.size());
            for (const PatientRecord& r : found) out.rows.push_back(mask_record(r, policy));
            break;
        case AccessDecision::AnonymizedOrDenied:
            if (anonymous_aggregate) {
                out.mode = ViewMode::Aggregate;
                // Aggregates cover every match; limit shapes rows, not counts.
                out.aggregates = aggregate_records(found, policy);
            } else {
                out.mode = ViewMode::Denied;
            }
            break;
    }
    return out;
}

// ---- synthetic dataset ----

namespace {

const char* kNameParts[] = {"kora", "belun", "tarek", "sova",  "mirel", "danto", "lysa",
                            "rovan", "petra", "ilma",  "quen",  "zara",  "nilo",  "fenra",
                            "odet",  "sile",  "varn",  "tessa", "miko",  "rhea"};
const char* kCities[] = {"arlen",  "breva",  "corin", "delmas", "evora",  "fallow",
                         "gerna",  "holt",   "istra", "jendal", "kovan",  "lirem",
                         "mondra", "nerith", "oswel", "pruna"};
const char* kConditions[] = {"alpha", "beta",  "gamma",  "delta", "epsilon", "zeta",
                             "theta", "iota",  "kappa",  "lambda", "sigma",  "omega"};
const char* kGenders[] = {"M", "F", "X"};

}  // namespace

std::vector<PatientRecord> synthetic_rows(size_t rows, uint64_t seed) {
    // Field vocabularies carry distinct prefixes (nm-, ct-, cnd-) so no
    // sensitive value can occur as a substring of a non-sensitive one.
    std::mt19937_64 rng(seed);
    std::vector<PatientRecord> out;
    out.reserve(rows);
    char buf[32];
    for (size_t i = 0; i < rows; ++i) {
        PatientRecord r;
        std::snprintf(buf, sizeof(buf), "P%05zu", i + 1);
        r.id = buf;
        r.name = std::string("nm-") + kNameParts[rng() % 20] + "-" + kNameParts[rng() % 20];
        unsigned year = 1930 + static_cast<unsigned>(rng() % 80);
        unsigned month = 1 + static_cast<unsigned>(rng() % 12);
        unsigned day = 1 + static_cast<unsigned>(rng() % 28);
        std::snprintf(buf, sizeof(buf), "%04u-%02u-%02u", year, month, day);
        r.dob = buf;
        r.gender = kGenders[rng() % 3];
        r.city = std::string("ct-") + kCities[rng() % 16];
        std::snprintf(buf, sizeof(buf), "555-%04u", static_cast<unsigned>(rng() % 10000));
        r.phone = buf;
        r.condition = std::string("cnd-") + kConditions[rng() % 12];
        r.age = 2026 - year;
        out.push_back(std::move(r));
    }
    return out;
}

static void write_csv_field(std::ostream& out, const std::string& v) {
    if (v.find_first_of(",\"\n\r") == std::string::npos) {
        out << v;
        return;
    }
    out << '"';
    for (char c : v) {
        if (c == '"') out << '"';
        out << c;
    }
    out << '"';
}

void write_synthetic_csv(const std::string& path, size_t rows, uint64_t seed) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "id,name,dob,gender,city,phone,condition,age\n";
    for (const PatientRecord& r : synthetic_rows(rows, seed)) {
        write_csv_field(out, r.id);
        out << ',';
        write_csv_field(out, r.name);
        out << ',';
        write_csv_field(out, r.dob);
        out << ',';
        write_csv_field(out, r.gender);
        out << ',';
        write_csv_field(out, r.city);
        out << ',';
        write_csv_field(out, r.phone);
        out << ',';
        write_csv_field(out, r.condition);
        out << ',' << r.age << '\n';
    }
    out.flush();
    if (!out) throw std::runtime_error("short write: " + path);
}

}  // namespace scauth
