#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "dirfdr/families.hpp"

namespace dirfdr {

/// Numeric CSV contents. `header` is empty when the file has no header row.
struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

/// Comma-delimited, '.' decimal, optional single header row (detected when any
/// field of the first row is non-numeric). Throws DataError with row/column on
/// parse failures and rejects NaN/Inf.
CsvTable read_csv(const std::filesystem::path& path);

/// Where the response vector comes from.
struct ResponseSource {
    enum class Kind { File, Column };
    Kind kind = Kind::File;
    std::filesystem::path file;
    std::string column;

    static ResponseSource from_file(std::filesystem::path path) {
        return {Kind::File, std::move(path), {}};
    }
    static ResponseSource from_column(std::string name) { return {Kind::Column, {}, std::move(name)}; }
};

Dataset load_dataset(const std::filesystem::path& design_path, const ResponseSource& response,
                     GlmFamily family);

struct DatasetDiagnostics {
    Eigen::Index n = 0;
    Eigen::Index p = 0;
    double max_abs_covariate = 0.0;
    std::pair<double, double> response_range{0.0, 0.0};
};

DatasetDiagnostics diagnose(const Dataset& data);

/// 17 significant digits; round-trips every finite double.
std::string format_double(double x);

/// Writes to a sibling temporary file and renames over the target on commit().
/// Nothing is left behind if the object is destroyed without committing.
class AtomicFile {
public:
    explicit AtomicFile(std::filesystem::path target);
    AtomicFile(const AtomicFile&) = delete;
    AtomicFile& operator=(const AtomicFile&) = delete;
    ~AtomicFile();

    std::ofstream& stream() { return out_; }
    void commit();

private:
    std::filesystem::path target_;
    std::filesystem::path temp_;
    std::ofstream out_;
    bool committed_ = false;
};

/// Matrix as headerless CSV in the 17-digit convention.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);

/// Reads a coefficient vector: either a single column, or a file whose header
/// names a `beta_hat` column (the output of `dirfdr fit`).
Eigen::VectorXd read_coefficients(const std::filesystem::path& path);

}  // namespace dirfdr
