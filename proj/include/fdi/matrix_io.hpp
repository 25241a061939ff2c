#pragma once

#include <filesystem>
#include <iosfwd>

#include "fdi/types.hpp"

namespace fdi::io {

// Plain CSV dump: a header line "# rows cols" followed by one comma-separated
// line per row, 17 significant digits. Debugging format only.
void write_matrix_csv(std::ostream& os, const Matrix& M);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& M);

Matrix read_matrix_csv(std::istream& is);
Matrix read_matrix_csv(const std::filesystem::path& path);

// Shortest decimal that round-trips the double exactly.
std::string format_double(double v);

}  // namespace fdi::io
