#include "hesskit/textio.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hesskit {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_text_file(const std::string& path,
                     const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const std::string& line : lines) {
    out << line << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_vector_file(const std::string& path,
                       const std::vector<double>& values) {
  std::vector<std::string> lines;
  lines.reserve(values.size());
  for (double v : values) lines.push_back(format_double(v));
  write_text_file(path, lines);
}

std::vector<double> read_vector_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // strtod instead of stod: stod throws out_of_range on subnormals.
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str()) {
      throw std::runtime_error("not a number in " + path + ": " + line);
    }
    values.push_back(v);
  }
  return values;
}

}  // namespace hesskit
