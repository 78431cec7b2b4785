#include "quadlasso/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <locale>
#include <sstream>

namespace quadlasso {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void fail_at(const std::string& source, std::size_t line, const std::string& what) {
    throw InputError(source + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_for_reading(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return in;
}

template <class T>
nlohmann::json optional_json(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

double parse_double(std::string_view text) {
    text = trim(text);
    if (text.empty()) throw InputError("empty number");
    // from_chars rejects a leading '+'
    std::string_view body = text;
    if (body.front() == '+') body.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
    if (ec == std::errc::result_out_of_range)
        throw InputError("number out of range: '" + std::string(text) + "'");
    if (ec != std::errc() || ptr != body.data() + body.size())
        throw InputError("not a number: '" + std::string(text) + "'");
    if (!std::isfinite(v)) throw InputError("non-finite number: '" + std::string(text) + "'");
    return v;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(17) << v;
    return os.str();
}

DenseMatrix read_matrix_csv(std::istream& in, const std::string& source) {
    std::vector<double> entries;
    std::size_t cols = 0, rows = 0, line_no = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = trim(line);
        if (row.empty()) continue;
        std::size_t count = 0, start = 0;
        while (true) {
            const auto comma = row.find(',', start);
            const std::string_view field =
                row.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                  : comma - start);
            try {
                entries.push_back(parse_double(field));
            } catch (const InputError& e) {
                fail_at(source, line_no, "field " + std::to_string(count + 1) + ": " + e.what());
            }
            ++count;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (rows == 0) {
            cols = count;
        } else if (count != cols) {
            fail_at(source, line_no,
                    "expected " + std::to_string(cols) + " fields, found " + std::to_string(count));
        }
        ++rows;
    }
    if (rows == 0) throw InputError(source + ": no data");
    DenseMatrix a(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) a(i, j) = entries[i * cols + j];
    return a;
}

DenseVector read_vector_csv(std::istream& in, const std::string& source) {
    std::vector<double> entries;
    std::size_t line_no = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = trim(line);
        if (row.empty()) continue;
        if (row.find(',') != std::string_view::npos)
            fail_at(source, line_no, "expected one value per line");
        try {
            entries.push_back(parse_double(row));
        } catch (const InputError& e) {
            fail_at(source, line_no, e.what());
        }
    }
    if (entries.empty()) throw InputError(source + ": no data");
    return DenseVector(std::move(entries));
}

DenseMatrix read_matrix_csv_file(const std::filesystem::path& path) {
    std::ifstream in = open_for_reading(path);
    return read_matrix_csv(in, path.string());
}

DenseVector read_vector_csv_file(const std::filesystem::path& path) {
    std::ifstream in = open_for_reading(path);
    return read_vector_csv(in, path.string());
}

void write_matrix_csv(const DenseMatrix& a, std::ostream& out) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (j > 0) out << ',';
            out << format_double(a(i, j));
        }
        out << '\n';
    }
}

void write_vector_csv(const DenseVector& v, std::ostream& out) {
    for (double x : v) out << format_double(x) << '\n';
}

nlohmann::json to_json(const DenseVector& v) { return nlohmann::json(v.values()); }

nlohmann::json to_json(const FitResult& r) {
    return {{"beta", to_json(r.beta)},
            {"objective", r.objective},
            {"kkt_residual", r.kkt_residual},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"active_set", r.active_set}};
}

nlohmann::json to_json(const BoundRecord& b) {
    return {{"variant", std::string(to_string(b.variant))},
            {"phi", b.phi},
            {"rho_n", b.rho_n},
            {"sparsity", b.sparsity},
            {"degenerate", b.degenerate},
            {"prediction", optional_json(b.prediction)},
            {"seminorm", optional_json(b.seminorm)},
            {"l1", optional_json(b.l1)},
            {"l2", optional_json(b.l2)},
            {"sup", optional_json(b.sup)},
            {"c_tilde", optional_json(b.c_tilde)}};
}

nlohmann::json to_json(const DiagnosticsReport& r) {
    nlohmann::json j = {{"n", r.n},
                        {"p", r.p},
                        {"mu", r.mu},
                        {"phi_estimate", r.phi_estimate},
                        {"phi_lower_bound", r.phi_lower_bound},
                        {"theta", r.theta},
                        {"rho_n", r.rho_n},
                        {"L", r.L},
                        {"k_nem", r.k_nem},
                        {"psi_eig_min", r.psi_eig_min},
                        {"psi_eig_max", r.psi_eig_max},
                        {"kn_eig_min", r.kn_eig_min},
                        {"kn_eig_max", r.kn_eig_max}};
    if (r.coherence) {
        j["coherence"] = {{"t", r.coherence->t},
                          {"passes", r.coherence->passes},
                          {"phi_for_threshold", r.coherence->phi_for_threshold},
                          {"mutual_coherence_t", r.coherence->mutual_coherence_t}};
    }
    if (r.alpha) j["alpha"] = *r.alpha;
    if (r.lambda) j["lambda"] = *r.lambda;
    if (r.bound_values) j["bounds"] = to_json(*r.bound_values);
    return j;
}

nlohmann::json to_json(const std::vector<GroupSummary>& groups) {
    nlohmann::json out = nlohmann::json::array();
    for (const GroupSummary& g : groups) {
        nlohmann::json metrics = nlohmann::json::object();
        for (const auto& [name, m] : g.metrics)
            metrics[name] = {{"q1", m.q1}, {"median", m.median}, {"q3", m.q3}};
        out.push_back({{"method", std::string(to_string(g.method))},
                       {"tuning", std::string(to_string(g.tuning))},
                       {"count", g.count},
                       {"not_converged", g.not_converged},
                       {"metrics", metrics}});
    }
    return out;
}

}  // namespace quadlasso
