#pragma once

#include "opcal/store.hpp"

#include <filesystem>
#include <istream>
#include <optional>
#include <string>

namespace opcal {

/// Which columns carry the scores. The label column is always `y`.
struct IngestSchema {
    enum class Kind { ProbColumn, TwoScoreColumns };
    Kind kind = Kind::ProbColumn;
    std::string prob_column = "p1";
    std::string s0_column = "s0";
    std::string s1_column = "s1";
    std::string label_column = "y";

    static IngestSchema prob(std::string column = "p1");
    static IngestSchema two_scores(std::string s0 = "s0", std::string s1 = "s1");
    /// "p1" (or any single column name) or "s0,s1".
    static IngestSchema parse(const std::string& text);
};

/// `<column> <op> <number>` with op one of >, <, >=, <=.
struct RowFilter {
    enum class Op { Gt, Lt, Ge, Le };
    std::string column;
    Op op = Op::Gt;
    double value = 0.0;
    std::string text;

    bool keep(double x) const noexcept;
    static RowFilter parse(const std::string& text);
};

Dataset ingest_csv(std::istream& in, const std::string& id, const IngestSchema& schema,
                   const std::optional<RowFilter>& filter, const std::string& source = "<stream>");
Dataset ingest_csv(const std::filesystem::path& path, const std::string& id, const IngestSchema& schema,
                   const std::optional<RowFilter>& filter = std::nullopt);

} // namespace opcal
