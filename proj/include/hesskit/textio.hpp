#pragma once

#include <string>
#include <vector>

namespace hesskit {

/// Formats a double with 17 significant digits: round-trips the exact
/// 64-bit value while staying text-diffable.
std::string format_double(double x);

/// Writes lines joined with '\n' plus a trailing newline. Throws on I/O
/// failure.
void write_text_file(const std::string& path,
                     const std::vector<std::string>& lines);

std::string read_text_file(const std::string& path);

/// One value per line, format_double encoding. Used for parameter vectors.
void write_vector_file(const std::string& path,
                       const std::vector<double>& values);
std::vector<double> read_vector_file(const std::string& path);

}  // namespace hesskit
