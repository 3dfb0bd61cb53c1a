#pragma once

// Minimal CSV table IO: comma delimiter, '.' decimal point, header row,
// numeric cells printed with 17 significant digits so reruns reproduce
// files byte for byte.

#include <string>
#include <vector>

namespace ldet {

std::string format_g17(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

}  // namespace ldet
