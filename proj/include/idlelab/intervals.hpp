#pragma once

#include "idlelab/units.hpp"

#include <vector>

namespace idlelab {

// Half-open [begin, end) span in nanoseconds. Adjacent intervals share a
// boundary tick without double counting.
struct Interval {
    Nanos begin = 0;
    Nanos end = 0;

    Nanos length() const { return end - begin; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

// Sum of lengths; intervals assumed disjoint.
Nanos total_length(const std::vector<Interval>& intervals);

// True if sorted by begin, each begin < end, and pairwise disjoint.
bool is_sorted_disjoint(const std::vector<Interval>& intervals);

// Intersection of two sorted disjoint interval lists.
std::vector<Interval> intersect(const std::vector<Interval>& a,
                                const std::vector<Interval>& b);

// Intersection across all lists; empty input yields an empty list.
std::vector<Interval> intersect_all(const std::vector<std::vector<Interval>>& lists);

// Complement of a sorted disjoint list within [lo, hi), clipped.
std::vector<Interval> complement(const std::vector<Interval>& intervals,
                                 Nanos lo, Nanos hi);

// Clip a sorted disjoint list to [lo, hi) and shift so lo maps to 0.
std::vector<Interval> clip_shift(const std::vector<Interval>& intervals,
                                 Nanos lo, Nanos hi);

} // namespace idlelab
