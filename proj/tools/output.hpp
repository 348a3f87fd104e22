#pragma once

#include <string>
#include <vector>

namespace qdcli {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

/// Static SVG line chart; non-finite points are skipped. `comment` goes into an XML comment.
std::string line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                       const std::vector<Series>& series, const std::string& comment);

void write_file(const std::string& path, const std::string& content);

}  // namespace qdcli
