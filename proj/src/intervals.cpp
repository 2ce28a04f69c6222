#include "idlelab/intervals.hpp"

#include <algorithm>

namespace idlelab {

Nanos total_length(const std::vector<Interval>& intervals) {
    Nanos sum = 0;
    for (const auto& iv : intervals)
        sum += iv.length();
    return sum;
}

bool is_sorted_disjoint(const std::vector<Interval>& intervals) {
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        if (intervals[i].begin >= intervals[i].end)
            return false;
        if (i > 0 && intervals[i].begin < intervals[i - 1].end)
            return false;
    }
    return true;
}

std::vector<Interval> intersect(const std::vector<Interval>& a,
                                const std::vector<Interval>& b) {
    std::vector<Interval> out;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        Nanos lo = std::max(a[i].begin, b[j].begin);
        Nanos hi = std::min(a[i].end, b[j].end);
        if (lo < hi)
            out.push_back({lo, hi});
        if (a[i].end < b[j].end)
            ++i;
        else
            ++j;
    }
    return out;
}

std::vector<Interval> intersect_all(const std::vector<std::vector<Interval>>& lists) {
    if (lists.empty())
        return {};
    std::vector<Interval> acc = lists.front();
    for (std::size_t k = 1; k < lists.size() && !acc.empty(); ++k)
        acc = intersect(acc, lists[k]);
    return acc;
}

std::vector<Interval> complement(const std::vector<Interval>& intervals,
                                 Nanos lo, Nanos hi) {
    std::vector<Interval> out;
    Nanos cursor = lo;
    for (const auto& iv : intervals) {
        if (iv.end <= lo)
            continue;
        if (iv.begin >= hi)
            break;
        Nanos b = std::max(iv.begin, lo);
        if (b > cursor)
            out.push_back({cursor, b});
        cursor = std::max(cursor, std::min(iv.end, hi));
    }
    if (cursor < hi)
        out.push_back({cursor, hi});
    return out;
}

std::vector<Interval> clip_shift(const std::vector<Interval>& intervals,
                                 Nanos lo, Nanos hi) {
    std::vector<Interval> out;
    for (const auto& iv : intervals) {
        Nanos b = std::max(iv.begin, lo);
        Nanos e = std::min(iv.end, hi);
        if (b < e)
            out.push_back({b - lo, e - lo});
    }
    return out;
}

} // namespace idlelab
