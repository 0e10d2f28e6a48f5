#include "dirfdr/data_io.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <system_error>

#include "dirfdr/errors.hpp"

namespace dirfdr {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

bool parse_number(std::string_view field, double& value) {
    if (field.empty()) return false;
    if (field.front() == '+') field.remove_prefix(1);
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    const auto res = std::from_chars(first, last, value, std::chars_format::general);
    return res.ec == std::errc() && res.ptr == last;
}

std::string unquote(std::string_view s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return std::string(s);
}

std::atomic<unsigned long> temp_counter{0};

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");

    CsvTable table;
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (first) {
            first = false;
            double dummy = 0.0;
            const bool numeric = std::all_of(fields.begin(), fields.end(), [&](std::string_view f) {
                return parse_number(f, dummy);
            });
            cols = fields.size();
            if (!numeric) {
                for (auto f : fields) table.header.push_back(unquote(f));
                continue;
            }
        }
        if (fields.size() != cols) {
            throw DataError(path.string() + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(cols));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v = 0.0;
            if (!parse_number(fields[c], v)) {
                throw DataError(path.string() + ": cannot parse '" + std::string(fields[c]) +
                                "' at line " + std::to_string(line_no) + ", column " +
                                std::to_string(c + 1));
            }
            if (!std::isfinite(v)) {
                throw DataError(path.string() + ": non-finite value at line " +
                                std::to_string(line_no) + ", column " + std::to_string(c + 1));
            }
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw DataError(path.string() + ": no data rows");

    table.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                values[r * cols + c];
        }
    }
    return table;
}

Dataset load_dataset(const std::filesystem::path& design_path, const ResponseSource& response,
                     GlmFamily family) {
    CsvTable design = read_csv(design_path);
    Eigen::VectorXd y;
    if (response.kind == ResponseSource::Kind::Column) {
        const auto it = std::find(design.header.begin(), design.header.end(), response.column);
        if (it == design.header.end()) {
            throw DataError(design_path.string() + ": no column named '" + response.column + "'");
        }
        const auto col = static_cast<Eigen::Index>(it - design.header.begin());
        y = design.values.col(col);
        Eigen::MatrixXd rest(design.values.rows(), design.values.cols() - 1);
        Eigen::Index k = 0;
        for (Eigen::Index c = 0; c < design.values.cols(); ++c) {
            if (c != col) rest.col(k++) = design.values.col(c);
        }
        design.values = std::move(rest);
    } else {
        const CsvTable resp = read_csv(response.file);
        if (resp.values.cols() != 1) {
            throw DataError(response.file.string() + ": response file must have exactly one column");
        }
        if (resp.values.rows() != design.values.rows()) {
            throw DataError("row-count mismatch: design has " +
                            std::to_string(design.values.rows()) + " rows, response has " +
                            std::to_string(resp.values.rows()));
        }
        y = resp.values.col(0);
    }
    Dataset data(std::move(design.values), std::move(y));
    validate_response(data, family);
    return data;
}

DatasetDiagnostics diagnose(const Dataset& data) {
    DatasetDiagnostics d;
    d.n = data.n();
    d.p = data.p();
    d.max_abs_covariate = data.design().size() > 0 ? data.design().cwiseAbs().maxCoeff() : 0.0;
    if (data.n() > 0) {
        d.response_range = {data.response().minCoeff(), data.response().maxCoeff()};
    }
    return d;
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

AtomicFile::AtomicFile(std::filesystem::path target) : target_(std::move(target)) {
    temp_ = target_;
    temp_ += ".tmp." + std::to_string(temp_counter.fetch_add(1));
    out_.open(temp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw DataError("cannot open '" + temp_.string() + "' for writing");
}

AtomicFile::~AtomicFile() {
    if (!committed_) {
        out_.close();
        std::error_code ec;
        std::filesystem::remove(temp_, ec);
    }
}

void AtomicFile::commit() {
    out_.flush();
    if (!out_) throw DataError("write to '" + temp_.string() + "' failed");
    out_.close();
    std::error_code ec;
    std::filesystem::rename(temp_, target_, ec);
    if (ec) throw DataError("cannot move output into place at '" + target_.string() + "': " + ec.message());
    committed_ = true;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    AtomicFile file(path);
    auto& out = file.stream();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
    file.commit();
}

Eigen::VectorXd read_coefficients(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (!t.header.empty()) {
        const auto it = std::find(t.header.begin(), t.header.end(), "beta_hat");
        if (it != t.header.end()) return t.values.col(it - t.header.begin());
    }
    if (t.values.cols() != 1) {
        throw DataError(path.string() + ": expected one column or a 'beta_hat' column");
    }
    return t.values.col(0);
}

}  // namespace dirfdr
