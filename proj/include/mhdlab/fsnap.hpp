#pragma once

#include "mhdlab/grid.hpp"

#include <iosfwd>
#include <string>

namespace mhdlab {

// FSNAP1: one JSON header line, then little-endian float64 payload in (t, c, z, y, x) order.
void write_fsnap(const FieldSnapshot& f, const std::string& path);
void write_fsnap(const FieldSnapshot& f, std::ostream& os);
FieldSnapshot read_fsnap(const std::string& path);
FieldSnapshot read_fsnap(std::istream& is);

} // namespace mhdlab
