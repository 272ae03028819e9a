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

#include <string>
#include <vector>

#include "reshard/model.hpp"
#include "reshard/parallel.hpp"
#include "reshard/region.hpp"

namespace reshard {

/// The full model space as a RegionSet (every tensor's complete box).
inline RegionSet full_region(const ModelSpace& space) {
    RegionSet r;
    r.space_fp = space.fingerprint();
    for (const auto& e : space.entries()) {
        Box b;
        for (auto extent : e.spec.shape) b.dims.push_back({0, extent});
        r.add_box(e.spec.tensor_id, std::move(b));
    }
    if (space.total_numel() > 0) r.add_flat({0, space.total_numel()});
    r.normalize();
    return r;
}

/// Parameter region of one rank: a tensor is visible iff its layer lies in
/// the rank's pipeline stage; the TP-sharded axis is restricted to the
/// rank's equal slice and the expert axis to its expert block; DP
/// replicates (no further restriction). Pure.
inline RegionSet project(const ModelSpace& space, const ParallelConfig& cfg, int rank) {
    RankCoord c = rank_coord(cfg, rank);
    auto [layer_lo, layer_hi] = stage_layer_range(space.num_layers(), cfg.pp, c.pp_rank);
    RegionSet r;
    r.space_fp = space.fingerprint();
    for (const auto& e : space.entries()) {
        const TensorSpec& t = e.spec;
        if (t.layer < layer_lo || t.layer >= layer_hi) continue;
        Box b;
        for (auto extent : t.shape) b.dims.push_back({0, extent});
        if (t.tp_shard_axis) {
            std::int64_t extent = t.shape[*t.tp_shard_axis];
            if (extent % cfg.tp != 0)
                throw ConfigError(strfmt("tp=%d does not divide extent %lld of tensor '%s'",
                                         cfg.tp, static_cast<long long>(extent),
                                         t.tensor_id.c_str()));
            std::int64_t w = extent / cfg.tp;
            b.dims[*t.tp_shard_axis] = {c.tp_rank * w, (c.tp_rank + 1) * w};
        }
        if (t.expert_axis) {
            if (space.num_experts() % cfg.ep != 0)
                throw ConfigError(strfmt("ep=%d does not divide num_experts=%d", cfg.ep,
                                         space.num_experts()));
            std::int64_t w = space.num_experts() / cfg.ep;
            b.dims[*t.expert_axis] = {c.ep_rank * w, (c.ep_rank + 1) * w};
        }
        r.add_box(t.tensor_id, std::move(b));
    }
    r.normalize();
    return r;
}

/// One visible tensor's slot in the rank-local flattened parameter buffer.
struct LocalSegment {
    std::string tensor_id;
    Box box;                 // the visible sub-box of the tensor
    std::int64_t local_lo;   // position of the box's first element in the local buffer
    std::int64_t local_hi;
};

/// Declaration-order flattening of the parameter elements visible to a
/// (pp_rank, tp_rank, ep_rank) position, split into the dense span and the
/// expert span (they are sharded over different replica groups).
struct LocalLayout {
    std::vector<LocalSegment> dense;
    std::vector<LocalSegment> expert;
    std::int64_t dense_len = 0;
    std::int64_t expert_len = 0;
};

inline LocalLayout local_layout(const ModelSpace& space, const ParallelConfig& cfg, int rank) {
    RegionSet r = project(space, cfg, rank);
    LocalLayout out;
    for (const auto& e : space.entries()) {
        auto it = r.boxes.find(e.spec.tensor_id);
        if (it == r.boxes.end()) continue;
        for (const auto& b : it->second) {
            std::int64_t n = b.numel();
            if (e.spec.is_expert) {
                out.expert.push_back({e.spec.tensor_id, b, out.expert_len, out.expert_len + n});
                out.expert_len += n;
            } else {
                out.dense.push_back({e.spec.tensor_id, b, out.dense_len, out.dense_len + n});
                out.dense_len += n;
            }
        }
    }
    return out;
}

namespace detail {

// Contiguous ceil-rule shard of a local buffer of length `len` over
// `parts` owners; the trailing shard absorbs the truncation.
inline Interval shard_range(std::int64_t len, int parts, int index) {
    if (len == 0) return {0, 0};
    std::int64_t chunk = (len + parts - 1) / parts;
    std::int64_t lo = std::min<std::int64_t>(index * chunk, len);
    std::int64_t hi = std::min<std::int64_t>(lo + chunk, len);
    return {lo, hi};
}

inline void invert_segments(const ModelSpace& space, const std::vector<LocalSegment>& segs,
                            const Interval& shard, RegionSet& out) {
    for (const auto& s : segs) {
        Interval ov = intersect({s.local_lo, s.local_hi}, shard);
        if (ov.empty()) continue;
        auto runs = box_subrange_flat_runs(space, s.tensor_id, s.box, ov.lo - s.local_lo,
                                           ov.hi - s.local_lo);
        for (const auto& run : runs) out.add_flat(run);
    }
}

}  // namespace detail

/// ZeRO optimizer shard of one rank, expressed as global flat intervals.
/// The rank's visible parameters are flattened in declaration order into a
/// local buffer; the DP group owns contiguous even slices of it (ceil
/// rule, last slice truncated); this inverts the rank's slice back into
/// the global flat offset space. Dense elements shard over the dp group
/// (index dp_rank), expert elements over the dp/ep expert replica group
/// (index edp_rank) since only those ranks replicate the expert slice.
inline RegionSet project_optimizer(const ModelSpace& space, const ParallelConfig& cfg, int rank) {
    if (!cfg.zero_enabled) throw ConfigError("no sharded optimizer: zero_enabled is false");
    RankCoord c = rank_coord(cfg, rank);
    LocalLayout layout = local_layout(space, cfg, rank);
    RegionSet out;
    out.space_fp = space.fingerprint();
    detail::invert_segments(space, layout.dense,
                            detail::shard_range(layout.dense_len, cfg.dp, c.dp_rank), out);
    int edp = cfg.dp / cfg.ep;
    detail::invert_segments(space, layout.expert,
                            detail::shard_range(layout.expert_len, edp, c.edp_rank), out);
    out.normalize();
    return out;
}

/// Elements held by a rank for a given state kind: boxes for parameters
/// (and gradients), flat intervals for the optimizer. With ZeRO disabled
/// the optimizer is replicated alongside the parameters.
inline RegionSet state_region(const ModelSpace& space, const ParallelConfig& cfg, int rank,
                              StateKind kind) {
    if (kind == StateKind::Optim && cfg.zero_enabled) return project_optimizer(space, cfg, rank);
    return project(space, cfg, rank);
}

/// Splits `box` of `tensor_id` along the projection grid of `cfg` (TP
/// slice boundaries and expert block boundaries), so that every returned
/// cell is owned by a single (tp_rank, ep_rank) position — i.e. its source
/// candidate set under `cfg` is uniform.
inline std::vector<Box> split_by_projection_grid(const ModelSpace& space, const ParallelConfig& cfg,
                                                 const std::string& tensor_id, const Box& box) {
    const TensorSpec& t = space.entry(tensor_id).spec;
    std::vector<Box> cells{box};
    auto split_axis = [&cells](int axis, std::int64_t width) {
        std::vector<Box> next;
        for (const auto& c : cells) {
            const Interval& iv = c.dims[axis];
            std::int64_t cut = (iv.lo / width) * width;
            for (; cut < iv.hi; cut += width) {
                Interval piece = intersect(iv, {cut, cut + width});
                if (piece.empty()) continue;
                Box nb = c;
                nb.dims[axis] = piece;
                next.push_back(std::move(nb));
            }
        }
        cells = std::move(next);
    };
    if (t.tp_shard_axis) split_axis(*t.tp_shard_axis, t.shape[*t.tp_shard_axis] / cfg.tp);
    if (t.expert_axis) split_axis(*t.expert_axis, space.num_experts() / cfg.ep);
    return cells;
}

}  // namespace reshard
