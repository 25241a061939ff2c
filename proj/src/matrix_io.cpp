#include "fdi/matrix_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fdi/error.hpp"

namespace fdi::io {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_matrix_csv(std::ostream& os, const Matrix& M) {
    os << "# " << M.rows() << ' ' << M.cols() << '\n';
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            if (j) os << ',';
            os << format_double(M(i, j));
        }
        os << '\n';
    }
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& M) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    write_matrix_csv(os, M);
}

Matrix read_matrix_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.size() < 2 || line[0] != '#') {
        throw ConfigError("matrix CSV must start with '# rows cols'");
    }
    std::istringstream header(line.substr(1));
    Eigen::Index rows = -1, cols = -1;
    header >> rows >> cols;
    if (!header || rows < 0 || cols < 0) throw ConfigError("malformed matrix CSV header: " + line);

    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (!std::getline(is, line)) throw ConfigError("matrix CSV ended early");
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (Eigen::Index j = 0; j < cols; ++j) {
            while (p < end && (*p == ' ' || *p == ',')) ++p;
            double v = 0.0;
            auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc()) throw ConfigError("bad number in matrix CSV row " + std::to_string(i));
            M(i, j) = v;
            p = res.ptr;
        }
    }
    return M;
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path.string());
    return read_matrix_csv(is);
}

}  // namespace fdi::io
