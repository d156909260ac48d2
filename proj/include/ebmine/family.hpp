#pragma once

#include <array>
#include <string>

namespace ebmine {

// Strategy family labels. The six canonical families combine a signal class
// with a portfolio weighting. Other labels are accepted only when the caller
// opts in to custom families.
inline constexpr std::array<const char*, 6> kCanonicalFamilies = {
    "acct_ew", "acct_vw", "pastret_ew", "pastret_vw", "ticker_ew", "ticker_vw",
};

inline bool is_canonical_family(const std::string& label) {
    for (const char* f : kCanonicalFamilies)
        if (label == f) return true;
    return false;
}

} // namespace ebmine
