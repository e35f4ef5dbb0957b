#pragma once

#include <celluda/errors.hpp>

#include <vector>

namespace celluda {

/// Largest detected-cell count admissible at iteration k (1-based):
/// two cells at the first iteration, growing by `increment` afterwards.
inline int cap_for_iteration(int k, int increment)
{
    if (k < 1) throw UsageError("cap_for_iteration: iteration must be >= 1");
    if (increment < 0) throw UsageError("cap_for_iteration: increment must be >= 0");
    return 2 + (k - 1) * increment;
}

struct CurriculumState
{
    int iteration = 1;
    int increment = 1;

    int cap() const { return cap_for_iteration(iteration, increment); }
};

/// Keeps candidates whose detected count lies in [1, cap], in input order.
/// `count_of` maps a candidate to its number of detected points.
template <class Candidate, class CountFn>
std::vector<Candidate> filter_by_count(const std::vector<Candidate>& selected, int cap, CountFn count_of)
{
    std::vector<Candidate> kept;
    for (const auto& c : selected) {
        const auto n = static_cast<long>(count_of(c));
        if (n >= 1 && n <= cap) kept.push_back(c);
    }
    return kept;
}

} // namespace celluda
