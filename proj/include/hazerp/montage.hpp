#pragma once

#include "hazerp/types.hpp"

#include <string>

namespace hazerp {

// Idealized 10-10 positions on the unit sphere for the 64-channel cap's
// scalp sites plus the M1/M2 mastoids. Left/right homologues are exact
// x-mirrors; midline sites have x = 0.
Montage builtin_montage();

Montage read_montage(const std::string& path);
void write_montage(const Montage& montage, const std::string& path);

} // namespace hazerp
