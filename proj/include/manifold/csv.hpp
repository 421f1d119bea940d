#pragma once

#include <string>
#include <vector>

namespace manifold {

// Round-trip-exact double formatting ("%.17g"). Keeps CSV artifacts
// byte-stable across reruns of the same configuration.
std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

}  // namespace manifold
