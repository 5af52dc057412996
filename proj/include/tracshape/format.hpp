#pragma once

#include <string>
#include <string_view>

namespace tracshape {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

/// printf-style %.<digits>g.
std::string format_significant(double value, int digits);

/// Writes `contents` to `path` through a temporary sibling file and a rename, so readers
/// see either the previous file or the complete new one.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace tracshape
