#pragma once

#include <string>
#include <vector>

#include "sppca/tensor.hpp"

namespace sppca {

// Plain rectangular numeric CSV. A header row is detected automatically:
// if any field of the first line does not parse as a finite number, the
// line is treated as column names. No quoting or embedded commas.
struct CsvTable {
    std::vector<std::string> header;  // empty when the file had none
    DenseMatrix values;
    bool had_header = false;
};

CsvTable read_csv(const std::string& path);

// Writes values with enough digits to round-trip doubles exactly. Pass an
// empty header to omit the header row.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const DenseMatrix& values);

}  // namespace sppca
