/* Copyright 2026 The reshard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "reshard/common.hpp"
#include "reshard/model.hpp"

namespace reshard {

/// Half-open index interval [lo, hi).
struct Interval {
    std::int64_t lo = 0;
    std::int64_t hi = 0;

    bool empty() const { return lo >= hi; }
    std::int64_t length() const { return empty() ? 0 : hi - lo; }
    bool contains(const Interval& o) const { return o.empty() || (lo <= o.lo && o.hi <= hi); }
    auto operator<=>(const Interval&) const = default;
};

inline Interval intersect(const Interval& a, const Interval& b) {
    return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

/// Axis-aligned box: one half-open interval per tensor axis.
struct Box {
    std::vector<Interval> dims;

    bool empty() const {
        for (const auto& d : dims)
            if (d.empty()) return true;
        return dims.empty();
    }
    std::int64_t numel() const {
        if (dims.empty()) return 0;
        std::int64_t n = 1;
        for (const auto& d : dims) n *= d.length();
        return n;
    }
    bool contains(const Box& o) const {
        if (dims.size() != o.dims.size()) return false;
        for (size_t i = 0; i < dims.size(); ++i)
            if (!dims[i].contains(o.dims[i])) return false;
        return true;
    }
    auto operator<=>(const Box&) const = default;
};

inline Box intersect(const Box& a, const Box& b) {
    Box r;
    if (a.dims.size() != b.dims.size()) throw std::logic_error("box rank mismatch");
    r.dims.reserve(a.dims.size());
    for (size_t i = 0; i < a.dims.size(); ++i) r.dims.push_back(intersect(a.dims[i], b.dims[i]));
    return r;
}

inline bool overlaps(const Box& a, const Box& b) { return !intersect(a, b).empty(); }

/// a \ b as disjoint boxes (the classic per-axis carve: peel the slabs of
/// `a` outside `b` one axis at a time, shrinking the remainder onto the
/// overlap).
inline std::vector<Box> box_diff(const Box& a, const Box& b) {
    if (a.empty()) return {};
    Box ov = intersect(a, b);
    if (ov.empty()) return {a};
    std::vector<Box> out;
    Box cur = a;
    for (size_t d = 0; d < a.dims.size(); ++d) {
        const Interval o = ov.dims[d];
        if (cur.dims[d].lo < o.lo) {
            Box piece = cur;
            piece.dims[d] = {cur.dims[d].lo, o.lo};
            out.push_back(std::move(piece));
        }
        if (o.hi < cur.dims[d].hi) {
            Box piece = cur;
            piece.dims[d] = {o.hi, cur.dims[d].hi};
            out.push_back(std::move(piece));
        }
        cur.dims[d] = o;
    }
    return out;
}

// ---- sorted-disjoint interval list ops (flat coordinate space) ----

inline std::vector<Interval> normalize_intervals(std::vector<Interval> v) {
    std::vector<Interval> in;
    for (const auto& i : v)
        if (!i.empty()) in.push_back(i);
    std::sort(in.begin(), in.end());
    std::vector<Interval> out;
    for (const auto& i : in) {
        if (!out.empty() && i.lo <= out.back().hi)
            out.back().hi = std::max(out.back().hi, i.hi);
        else
            out.push_back(i);
    }
    return out;
}

inline std::vector<Interval> intervals_union(const std::vector<Interval>& a,
                                             const std::vector<Interval>& b) {
    std::vector<Interval> v = a;
    v.insert(v.end(), b.begin(), b.end());
    return normalize_intervals(std::move(v));
}

inline std::vector<Interval> intervals_intersect(const std::vector<Interval>& a,
                                                 const std::vector<Interval>& b) {
    std::vector<Interval> out;
    for (const auto& x : a)
        for (const auto& y : b) {
            Interval i = intersect(x, y);
            if (!i.empty()) out.push_back(i);
        }
    return normalize_intervals(std::move(out));
}

inline std::vector<Interval> intervals_diff(const std::vector<Interval>& a,
                                            const std::vector<Interval>& b) {
    std::vector<Interval> out;
    for (const auto& x : a) {
        std::vector<Interval> rem{x};
        for (const auto& y : b) {
            std::vector<Interval> next;
            for (const auto& r : rem) {
                Interval o = intersect(r, y);
                if (o.empty()) {
                    next.push_back(r);
                    continue;
                }
                if (r.lo < o.lo) next.push_back({r.lo, o.lo});
                if (o.hi < r.hi) next.push_back({o.hi, r.hi});
            }
            rem = std::move(next);
        }
        out.insert(out.end(), rem.begin(), rem.end());
    }
    return normalize_intervals(std::move(out));
}

inline std::int64_t intervals_length(const std::vector<Interval>& v) {
    std::int64_t n = 0;
    for (const auto& i : v) n += i.length();
    return n;
}

// ---- box list ops ----

namespace detail {

// Deterministic canonical form: pairwise disjoint, lex-sorted, then
// greedily coalesce boxes adjacent along exactly one axis until fixpoint.
inline std::vector<Box> normalize_boxes(std::vector<Box> v) {
    std::vector<Box> in;
    for (auto& b : v) {
        if (b.empty()) continue;
        std::vector<Box> pieces{std::move(b)};
        for (const auto& have : in) {
            std::vector<Box> next;
            for (const auto& p : pieces) {
                auto d = box_diff(p, have);
                next.insert(next.end(), d.begin(), d.end());
            }
            pieces = std::move(next);
        }
        in.insert(in.end(), pieces.begin(), pieces.end());
    }
    std::sort(in.begin(), in.end());
    bool merged = true;
    while (merged) {
        merged = false;
        for (size_t i = 0; i < in.size() && !merged; ++i) {
            for (size_t j = i + 1; j < in.size() && !merged; ++j) {
                int axis = -1;
                bool ok = true;
                for (size_t d = 0; d < in[i].dims.size(); ++d) {
                    if (in[i].dims[d] == in[j].dims[d]) continue;
                    if (axis >= 0) { ok = false; break; }
                    axis = static_cast<int>(d);
                }
                if (!ok || axis < 0) continue;
                const Interval& x = in[i].dims[axis];
                const Interval& y = in[j].dims[axis];
                if (x.hi == y.lo || y.hi == x.lo) {
                    in[i].dims[axis] = {std::min(x.lo, y.lo), std::max(x.hi, y.hi)};
                    in.erase(in.begin() + static_cast<std::ptrdiff_t>(j));
                    std::sort(in.begin(), in.end());
                    merged = true;
                }
            }
        }
    }
    return in;
}

inline std::vector<Box> boxes_diff(const std::vector<Box>& a, const std::vector<Box>& b) {
    std::vector<Box> rem = a;
    for (const auto& y : b) {
        std::vector<Box> next;
        for (const auto& r : rem) {
            auto pieces = box_diff(r, y);
            next.insert(next.end(), pieces.begin(), pieces.end());
        }
        rem = std::move(next);
    }
    return normalize_boxes(std::move(rem));
}

inline std::vector<Box> boxes_intersect(const std::vector<Box>& a, const std::vector<Box>& b) {
    std::vector<Box> out;
    for (const auto& x : a)
        for (const auto& y : b) {
            Box i = intersect(x, y);
            if (!i.empty()) out.push_back(i);
        }
    // projections produce disjoint inputs, so pairwise intersections stay disjoint
    return normalize_boxes(std::move(out));
}

inline std::vector<Box> boxes_union(const std::vector<Box>& a, const std::vector<Box>& b) {
    std::vector<Box> out = a;
    auto extra = boxes_diff(b, a);
    out.insert(out.end(), extra.begin(), extra.end());
    return normalize_boxes(std::move(out));
}

}  // namespace detail

/// A sub-space of one ModelSpace: per-tensor axis-aligned boxes (parameter
/// view) plus half-open intervals over the global flat offset space
/// (optimizer view). Kept normalized: boxes per tensor pairwise disjoint,
/// flat intervals disjoint and sorted.
struct RegionSet {
    std::uint64_t space_fp = 0;
    std::map<std::string, std::vector<Box>> boxes;
    std::vector<Interval> flat;

    bool boxes_empty() const {
        for (const auto& [_, v] : boxes)
            if (!v.empty()) return false;
        return true;
    }
    bool flat_empty() const { return flat.empty(); }
    bool empty() const { return boxes_empty() && flat_empty(); }

    std::int64_t box_numel() const {
        std::int64_t n = 0;
        for (const auto& [_, v] : boxes)
            for (const auto& b : v) n += b.numel();
        return n;
    }
    std::int64_t flat_numel() const { return intervals_length(flat); }

    void add_box(const std::string& tensor_id, Box b) {
        if (!b.empty()) boxes[tensor_id].push_back(std::move(b));
    }
    void add_flat(Interval i) {
        if (!i.empty()) flat.push_back(i);
    }
    void normalize() {
        for (auto it = boxes.begin(); it != boxes.end();) {
            it->second = detail::normalize_boxes(std::move(it->second));
            if (it->second.empty())
                it = boxes.erase(it);
            else
                ++it;
        }
        flat = normalize_intervals(std::move(flat));
    }
};

namespace detail {
inline void check_binding(const RegionSet& a, const RegionSet& b) {
    if (a.space_fp != b.space_fp) throw ConfigError("RegionSets bound to different model spaces");
}
}  // namespace detail

inline RegionSet region_intersect(const RegionSet& a, const RegionSet& b) {
    detail::check_binding(a, b);
    RegionSet r;
    r.space_fp = a.space_fp;
    for (const auto& [id, va] : a.boxes) {
        auto it = b.boxes.find(id);
        if (it == b.boxes.end()) continue;
        auto v = detail::boxes_intersect(va, it->second);
        if (!v.empty()) r.boxes[id] = std::move(v);
    }
    r.flat = intervals_intersect(a.flat, b.flat);
    return r;
}

inline RegionSet region_diff(const RegionSet& a, const RegionSet& b) {
    detail::check_binding(a, b);
    RegionSet r;
    r.space_fp = a.space_fp;
    for (const auto& [id, va] : a.boxes) {
        auto it = b.boxes.find(id);
        auto v = it == b.boxes.end() ? detail::normalize_boxes(va)
                                     : detail::boxes_diff(va, it->second);
        if (!v.empty()) r.boxes[id] = std::move(v);
    }
    r.flat = intervals_diff(a.flat, b.flat);
    return r;
}

inline RegionSet region_union(const RegionSet& a, const RegionSet& b) {
    detail::check_binding(a, b);
    RegionSet r;
    r.space_fp = a.space_fp;
    for (const auto& [id, va] : a.boxes) {
        auto it = b.boxes.find(id);
        r.boxes[id] = it == b.boxes.end() ? detail::normalize_boxes(va)
                                          : detail::boxes_union(va, it->second);
    }
    for (const auto& [id, vb] : b.boxes)
        if (!a.boxes.count(id)) r.boxes[id] = detail::normalize_boxes(vb);
    r.flat = intervals_union(a.flat, b.flat);
    return r;
}

inline bool region_equal(const RegionSet& a, const RegionSet& b) {
    return region_diff(a, b).empty() && region_diff(b, a).empty();
}

/// True iff `box` of `tensor_id` is fully covered by `r`.
inline bool region_contains_box(const RegionSet& r, const std::string& tensor_id, const Box& box) {
    auto it = r.boxes.find(tensor_id);
    std::vector<Box> rem{box};
    if (it != r.boxes.end()) rem = detail::boxes_diff(rem, it->second);
    for (const auto& piece : rem)
        if (!piece.empty()) return false;
    return true;
}

// ---- box <-> flat coordinate conversion ----

/// Global flat intervals of a box of `tensor_id`: one run per row of the
/// box (rows are contiguous along the last axis), merged where they abut.
inline std::vector<Interval> box_flat_runs(const ModelSpace& space, const std::string& tensor_id,
                                           const Box& box) {
    const auto& e = space.entry(tensor_id);
    const auto& shape = e.spec.shape;
    if (box.dims.size() != shape.size()) throw std::logic_error("box rank mismatch");
    if (box.empty()) return {};
    size_t d = shape.size();
    std::vector<std::int64_t> stride(d, 1);
    for (size_t i = d - 1; i > 0; --i) stride[i - 1] = stride[i] * shape[i];
    std::vector<Interval> out;
    std::vector<std::int64_t> idx(d);
    for (size_t i = 0; i + 1 < d; ++i) idx[i] = box.dims[i].lo;
    std::int64_t width = box.dims[d - 1].length();
    while (true) {
        std::int64_t base = e.offset;
        for (size_t i = 0; i + 1 < d; ++i) base += idx[i] * stride[i];
        base += box.dims[d - 1].lo;
        out.push_back({base, base + width});
        // advance the mixed-radix row counter
        if (d == 1) break;
        size_t i = d - 1;
        while (i-- > 0) {
            if (++idx[i] < box.dims[i].hi) break;
            if (i == 0) return normalize_intervals(std::move(out));
            idx[i] = box.dims[i].lo;
        }
        if (idx[0] >= box.dims[0].hi) break;
    }
    return normalize_intervals(std::move(out));
}

/// Global flat intervals of the sub-range [local_lo, local_hi) of the
/// box's row-major element enumeration.
inline std::vector<Interval> box_subrange_flat_runs(const ModelSpace& space,
                                                    const std::string& tensor_id, const Box& box,
                                                    std::int64_t local_lo, std::int64_t local_hi) {
    const auto& e = space.entry(tensor_id);
    const auto& shape = e.spec.shape;
    if (box.empty() || local_lo >= local_hi) return {};
    size_t d = shape.size();
    std::vector<std::int64_t> stride(d, 1);
    for (size_t i = d - 1; i > 0; --i) stride[i - 1] = stride[i] * shape[i];
    std::int64_t width = box.dims[d - 1].length();
    std::vector<Interval> out;
    for (std::int64_t row = local_lo / width; row * width < local_hi; ++row) {
        std::int64_t a = std::max(local_lo - row * width, std::int64_t{0});
        std::int64_t b = std::min(local_hi - row * width, width);
        if (a >= b) continue;
        // decompose the row index into the leading box axes
        std::int64_t rem = row;
        std::int64_t base = e.offset + box.dims[d - 1].lo;
        for (size_t i = d - 1; i-- > 0;) {
            std::int64_t len = box.dims[i].length();
            base += (box.dims[i].lo + rem % len) * stride[i];
            rem /= len;
        }
        out.push_back({base + a, base + b});
    }
    return normalize_intervals(std::move(out));
}

// comparator used by every dump format: tensors ascending, then region
// lexicographic on the (lo,hi) sequence
inline bool region_lex_less(const Box& a, const Box& b) { return a < b; }

inline std::string format_box(const Box& b) {
    std::string s = "[";
    for (size_t i = 0; i < b.dims.size(); ++i) {
        if (i) s += ',';
        s += strfmt("%lld:%lld", static_cast<long long>(b.dims[i].lo),
                    static_cast<long long>(b.dims[i].hi));
    }
    return s + "]";
}

inline std::string format_interval(const Interval& i) {
    return strfmt("[%lld:%lld]", static_cast<long long>(i.lo), static_cast<long long>(i.hi));
}

}  // namespace reshard
