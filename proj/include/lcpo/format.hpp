#pragma once

#include <cstdio>
#include <string>

namespace lcpo {

/// Fixed-point rendering used by every CSV and report writer, so artifact
/// bytes do not depend on iostream locale or libstdc++ version.
inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string out(buf);
    // A value that rounds to zero prints without the sign bit.
    if (out.find_first_not_of("-0.") == std::string::npos && out[0] == '-') {
        out.erase(0, 1);
    }
    return out;
}

}  // namespace lcpo
