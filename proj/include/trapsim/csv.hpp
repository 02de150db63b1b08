#pragma once

#include <string>
#include <vector>

namespace trapsim::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 if absent
  std::vector<double> col(const std::string& name) const;
  std::string to_string() const;
};

Table read(const std::string& path);
Table parse(const std::string& text, const std::string& origin = "<string>");
void write(const std::string& path, const Table& table);

}  // namespace trapsim::csv
