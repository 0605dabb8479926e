#include "opcal/ingest.hpp"

#include "opcal/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace opcal {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::optional<double> to_number(const std::string& text) {
    double v = 0.0;
    const char* b = text.data();
    const char* e = b + text.size();
    if (b != e && *b == '+') ++b;
    const auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e || b == e) return std::nullopt;
    return v;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw UnknownColumn(name);
    return static_cast<std::size_t>(it - header.begin());
}

} // namespace

IngestSchema IngestSchema::prob(std::string column) {
    IngestSchema s;
    s.kind = Kind::ProbColumn;
    s.prob_column = std::move(column);
    return s;
}

IngestSchema IngestSchema::two_scores(std::string s0, std::string s1) {
    IngestSchema s;
    s.kind = Kind::TwoScoreColumns;
    s.s0_column = std::move(s0);
    s.s1_column = std::move(s1);
    return s;
}

IngestSchema IngestSchema::parse(const std::string& text) {
    const auto parts = split_fields(text);
    if (parts.size() == 1 && !parts[0].empty()) return prob(parts[0]);
    if (parts.size() == 2 && !parts[0].empty() && !parts[1].empty()) return two_scores(parts[0], parts[1]);
    throw DomainError("bad ingest schema '" + text + "', expected <p1-column> or <s0-column>,<s1-column>");
}

bool RowFilter::keep(double x) const noexcept {
    switch (op) {
    case Op::Gt: return x > value;
    case Op::Lt: return x < value;
    case Op::Ge: return x >= value;
    case Op::Le: return x <= value;
    }
    return false;
}

RowFilter RowFilter::parse(const std::string& text) {
    const auto pos = text.find_first_of("<>");
    if (pos == std::string::npos) throw DomainError("filter '" + text + "' has no comparison (>, <, >=, <=)");
    RowFilter f;
    f.text = text;
    f.column = trim(text.substr(0, pos));
    const bool eq = pos + 1 < text.size() && text[pos + 1] == '=';
    f.op = text[pos] == '>' ? (eq ? Op::Ge : Op::Gt) : (eq ? Op::Le : Op::Lt);
    const auto value = to_number(trim(text.substr(pos + (eq ? 2 : 1))));
    if (f.column.empty() || !value) throw DomainError("filter '" + text + "' must look like 'column > number'");
    f.value = *value;
    return f;
}

Dataset ingest_csv(std::istream& in, const std::string& id, const IngestSchema& schema,
                   const std::optional<RowFilter>& filter, const std::string& source) {
    validate_id(id);
    std::string line;
    long line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_fields(line);
            break;
        }
    }
    if (header.empty()) throw MalformedRow(line_no, "missing header row");

    const std::size_t label_col = column_index(header, schema.label_column);
    std::size_t a_col = 0;
    std::size_t b_col = 0;
    if (schema.kind == IngestSchema::Kind::ProbColumn) {
        a_col = column_index(header, schema.prob_column);
    } else {
        a_col = column_index(header, schema.s0_column);
        b_col = column_index(header, schema.s1_column);
    }
    const std::optional<std::size_t> filter_col =
        filter ? std::optional<std::size_t>(column_index(header, filter->column)) : std::nullopt;

    auto numeric = [&](const std::vector<std::string>& fields, std::size_t col) {
        const auto v = to_number(fields[col]);
        if (!v || !std::isfinite(*v)) {
            throw MalformedRow(line_no, "column '" + header[col] + "' is not a finite number: '" + fields[col] + "'");
        }
        return *v;
    };

    Dataset d;
    d.id = id;
    d.sample.prob_normalized = schema.kind == IngestSchema::Kind::ProbColumn;
    d.provenance.source = source;
    d.provenance.filter = filter ? filter->text : "";
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw MalformedRow(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                            std::to_string(fields.size()));
        }
        ++d.provenance.rows_read;
        const double yv = numeric(fields, label_col);
        if (yv != 0.0 && yv != 1.0) throw MalformedRow(line_no, "label must be 0 or 1, found '" + fields[label_col] + "'");
        ScoredItem item{};
        item.label = static_cast<int>(yv);
        if (schema.kind == IngestSchema::Kind::ProbColumn) {
            const double p1 = numeric(fields, a_col);
            if (p1 < 0.0 || p1 > 1.0) throw MalformedRow(line_no, "probability outside [0, 1]");
            item.s0 = p1;
            item.s1 = 1.0 - p1;
        } else {
            item.s0 = numeric(fields, a_col);
            item.s1 = numeric(fields, b_col);
        }
        if (filter_col && !filter->keep(numeric(fields, *filter_col))) continue;
        d.sample.items.push_back(item);
    }
    d.provenance.rows_kept = static_cast<long>(d.sample.items.size());
    if (d.sample.empty()) {
        if (filter) throw EmptyAfterFilter(filter->text);
        throw MalformedRow(line_no, "no data rows");
    }
    return d;
}

Dataset ingest_csv(const std::filesystem::path& path, const std::string& id, const IngestSchema& schema,
                   const std::optional<RowFilter>& filter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound("cannot open '" + path.string() + "'");
    return ingest_csv(in, id, schema, filter, path.string());
}

} // namespace opcal
