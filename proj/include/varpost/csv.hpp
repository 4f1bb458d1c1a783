#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace varpost {

// Decimal rendering used by every CSV writer: 15 significant digits.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

}  // namespace varpost
