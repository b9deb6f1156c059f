#pragma once

// Global work budget.  One integer bounds the exact solver's search nodes
// and the rule generator's output; the image pool gets budget/100 (at
// least 100).  The CLI seeds this from the CAUSALDB_BUDGET environment
// variable.

#include <algorithm>
#include <cstdint>

namespace causal {

inline std::int64_t& budget_ref() {
    static std::int64_t value = 2'000'000;
    return value;
}

inline std::int64_t budget() { return budget_ref(); }
inline void set_budget(std::int64_t b) { budget_ref() = b; }
inline std::int64_t images_budget() { return std::max<std::int64_t>(100, budget() / 100); }

}  // namespace causal
