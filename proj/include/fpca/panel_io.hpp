#pragma once

#include <iosfwd>
#include <string>

#include "fpca/panel.hpp"

namespace fpca {

// Panel CSV: header "subject,t,y", one row per observation, times and values
// as round-trippable decimal literals, rows sorted by (subject, t).
void write_panel_csv(const SparsePanel& panel, std::ostream& out);
void write_panel_csv_file(const SparsePanel& panel, const std::string& path);

// Throws DataError naming the offending line on malformed input.
SparsePanel read_panel_csv(std::istream& in);
SparsePanel read_panel_csv_file(const std::string& path);

// shortest decimal form that parses back to the identical double
std::string format_double(double x);

}  // namespace fpca
