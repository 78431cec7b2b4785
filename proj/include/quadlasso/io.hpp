#pragma once

#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "quadlasso/diagnostics.hpp"
#include "quadlasso/simulate.hpp"
#include "quadlasso/solver.hpp"

namespace quadlasso {

/// Malformed or unreadable input; the message names the source and line where it can.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Locale-independent; rejects trailing garbage and non-finite values.
double parse_double(std::string_view text);

/// 17 significant digits in the classic locale, so values round-trip.
std::string format_double(double v);

/// Comma-separated rows, no header. Blank lines are skipped; rows must agree in length.
DenseMatrix read_matrix_csv(std::istream& in, const std::string& source = "<stream>");
/// One value per line.
DenseVector read_vector_csv(std::istream& in, const std::string& source = "<stream>");

DenseMatrix read_matrix_csv_file(const std::filesystem::path& path);
DenseVector read_vector_csv_file(const std::filesystem::path& path);

void write_matrix_csv(const DenseMatrix& a, std::ostream& out);
void write_vector_csv(const DenseVector& v, std::ostream& out);

nlohmann::json to_json(const DenseVector& v);
nlohmann::json to_json(const FitResult& r);
nlohmann::json to_json(const BoundRecord& b);
nlohmann::json to_json(const DiagnosticsReport& r);
nlohmann::json to_json(const std::vector<GroupSummary>& groups);

}  // namespace quadlasso
