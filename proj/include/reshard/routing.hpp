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
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "reshard/model.hpp"
#include "reshard/parallel.hpp"
#include "reshard/project.hpp"
#include "reshard/region.hpp"
#include "reshard/topology.hpp"
#include "reshard/worldmap.hpp"

namespace reshard {

// bytes per element of the sharded optimizer record (fp32 master + Adam
// m/v), of a gradient, and of one scalar-blob word
constexpr int kOptimStateBytes = 12;
constexpr int kGradBytes = 4;
constexpr int kScalarWordBytes = 8;

enum class GradientPolicy { Drop, Migrate };

struct PlanOptions {
    GradientPolicy gradients = GradientPolicy::Drop;
    bool balance_fanout = false;  // round-robin over replicas instead of proximity pick
    std::int64_t scalar_words = 8;
};

/// One point-to-point payload: a box fragment of a tensor (parameters and
/// gradients) or a flat interval (sharded optimizer state). Rank ids are
/// world-relative — src-side world for the sender, dst-side world for the
/// receiver; phys ids identify the devices.
struct SliceTransfer {
    StateKind kind = StateKind::Param;
    std::string tensor_id;  // empty for flat payloads
    bool flat_payload = false;
    Box box;
    Interval flat;
    int src_rank = -1;
    int dst_rank = -1;
    int src_phys = -1;
    int dst_phys = -1;
    std::int64_t count = 0;
    ByteCount bytes = 0;

    std::vector<std::int64_t> region_key() const {
        std::vector<std::int64_t> k;
        if (flat_payload) {
            k.push_back(flat.lo);
            k.push_back(flat.hi);
        } else {
            for (const auto& d : box.dims) {
                k.push_back(d.lo);
                k.push_back(d.hi);
            }
        }
        return k;
    }
    std::string region_text() const { return flat_payload ? format_interval(flat) : format_box(box); }
};

inline bool transfer_order_less(const SliceTransfer& a, const SliceTransfer& b) {
    return std::make_tuple(a.src_rank, a.dst_rank, static_cast<int>(a.kind), a.tensor_id,
                           a.region_key()) < std::make_tuple(b.src_rank, b.dst_rank,
                                                             static_cast<int>(b.kind), b.tensor_id,
                                                             b.region_key());
}

inline std::string format_transfer(const SliceTransfer& t) {
    return strfmt("%s %s %s src=%d dst=%d bytes=%lld", to_string(t.kind),
                  t.tensor_id.empty() ? "-" : t.tensor_id.c_str(), t.region_text().c_str(),
                  t.src_rank, t.dst_rank, static_cast<long long>(t.bytes));
}

/// The three mutually exclusive categories one rank's state splits into.
struct CategorySet {
    RegionSet src;     // R_src of this rank
    RegionSet dst;     // R_dst of this rank
    RegionSet send;    // R_src \ R_dst
    RegionSet recv;    // R_dst \ R_src
    RegionSet retain;  // R_src ∩ R_dst
};

struct RankRoute {
    int phys = -1;
    int src_rank = -1;  // -1: joining device (empty R_src)
    int dst_rank = -1;  // -1: departing device (empty R_dst)
    CategorySet params;
    CategorySet optim;
};

struct ScalarBroadcast {
    int root_phys = -1;
    int root_src_rank = 0;
    std::vector<int> recv_phys;  // excludes the root; empty means no-op
    std::int64_t words = 0;
    ByteCount bytes_per_rank = 0;
};

namespace detail {

struct PendingRecv {
    StateKind kind = StateKind::Param;
    std::string tensor_id;
    bool flat_payload = false;
    Box box;
    Interval flat;
    int dst_phys = -1;
    int dst_rank = -1;
    std::vector<int> candidates;  // src-world rank ids, ascending
};

}  // namespace detail

/// Per-rank send/recv/retain decomposition of a transition plus, once
/// resolved, the exact point-to-point transfer list.
struct RoutingPlan {
    std::uint64_t space_fp = 0;
    ParallelConfig src_cfg, dst_cfg;
    WorldMap world_map;
    PlanOptions opts;
    std::vector<RankRoute> routes;  // one per participant device, ascending phys
    std::vector<detail::PendingRecv> pending;
    std::vector<SliceTransfer> transfers;
    std::optional<ScalarBroadcast> scalars;
    bool resolved = false;

    const RankRoute& route_of(int phys) const {
        for (const auto& r : routes)
            if (r.phys == phys) return r;
        throw std::logic_error("no route for device");
    }

    ByteCount bytes_moved() const {
        ByteCount n = 0;
        for (const auto& t : transfers) n += t.bytes;
        if (scalars) n += scalars->bytes_per_rank * static_cast<ByteCount>(scalars->recv_phys.size());
        return n;
    }
    ByteCount bytes_retained(const ModelSpace& space) const {
        ByteCount n = 0;
        for (const auto& r : routes) {
            for (const auto& [id, boxes] : r.params.retain.boxes) {
                int w = space.entry(id).spec.dtype_bytes;
                for (const auto& b : boxes) n += b.numel() * w;
            }
            n += r.optim.retain.flat_numel() * kOptimStateBytes;
            for (const auto& [id, boxes] : r.optim.retain.boxes)
                for (const auto& b : boxes) n += b.numel() * kOptimStateBytes;
        }
        return n;
    }
};

namespace detail {

inline ByteCount payload_bytes(const ModelSpace& space, StateKind kind,
                               const std::string& tensor_id, std::int64_t count) {
    switch (kind) {
        case StateKind::Param: return count * space.entry(tensor_id).spec.dtype_bytes;
        case StateKind::Optim: return count * kOptimStateBytes;
        case StateKind::Grad: return count * kGradBytes;
        case StateKind::Scalar: return count * kScalarWordBytes;
    }
    return 0;
}

inline CategorySet decompose(const RegionSet& src, const RegionSet& dst) {
    CategorySet c;
    c.src = src;
    c.dst = dst;
    c.send = region_diff(src, dst);
    c.recv = region_diff(dst, src);
    c.retain = region_intersect(src, dst);
    return c;
}

// Candidate sources of one recv cell: every src-world rank whose parameter
// region contains it, ascending rank id.
inline std::vector<int> box_candidates(const std::vector<RegionSet>& src_regions,
                                       const std::string& tensor_id, const Box& cell) {
    std::vector<int> out;
    for (int j = 0; j < static_cast<int>(src_regions.size()); ++j)
        if (region_contains_box(src_regions[j], tensor_id, cell)) out.push_back(j);
    return out;
}

inline void queue_box_recvs(const ModelSpace& space, const ParallelConfig& src_cfg,
                            const std::vector<RegionSet>& src_regions, StateKind kind,
                            const RankRoute& route, const RegionSet& recv_cat,
                            std::vector<PendingRecv>& pending) {
    for (const auto& [tensor_id, boxes] : recv_cat.boxes) {
        for (const auto& box : boxes) {
            for (const auto& cell : split_by_projection_grid(space, src_cfg, tensor_id, box)) {
                auto cands = box_candidates(src_regions, tensor_id, cell);
                if (cands.empty())
                    throw ConfigError(strfmt(
                        "unreachable state: no source holds %s %s needed by device %d",
                        tensor_id.c_str(), format_box(cell).c_str(), route.phys));
                pending.push_back({kind, tensor_id, false, cell, {}, route.phys, route.dst_rank,
                                   std::move(cands)});
            }
        }
    }
}

}  // namespace detail

/// Projections of every participant under both configurations, and the
/// union decomposition per device: retain = R_src ∩ R_dst, raw send =
/// R_src \ R_dst, raw recv = R_dst \ R_src. Joining devices have empty
/// R_src, departing devices empty R_dst. Candidate sources are attached to
/// every recv fragment; peers are picked by resolve_peers.
inline RoutingPlan plan_parameters(const ModelSpace& space, const ParallelConfig& src_cfg,
                                   const ParallelConfig& dst_cfg, const WorldMap& wm,
                                   const PlanOptions& opts = {}) {
    wm.validate();
    RoutingPlan plan;
    plan.space_fp = space.fingerprint();
    plan.src_cfg = src_cfg;
    plan.dst_cfg = dst_cfg;
    plan.world_map = wm;
    plan.opts = opts;
    if (wm.src_world_size() != src_cfg.world_size())
        throw ConfigError("world map src size does not match src config");
    if (wm.dst_world_size() != dst_cfg.world_size())
        throw ConfigError("world map dst size does not match dst config");

    std::vector<RegionSet> src_regions(src_cfg.world_size());
    for (int i = 0; i < src_cfg.world_size(); ++i) src_regions[i] = project(space, src_cfg, i);
    std::vector<RegionSet> dst_regions(dst_cfg.world_size());
    for (int j = 0; j < dst_cfg.world_size(); ++j) dst_regions[j] = project(space, dst_cfg, j);

    RegionSet empty;
    empty.space_fp = space.fingerprint();
    for (int phys : wm.participants()) {
        RankRoute r;
        r.phys = phys;
        r.src_rank = wm.src_rank_of(phys);
        r.dst_rank = wm.dst_rank_of(phys);
        const RegionSet& rs = r.src_rank >= 0 ? src_regions[r.src_rank] : empty;
        const RegionSet& rd = r.dst_rank >= 0 ? dst_regions[r.dst_rank] : empty;
        r.params = detail::decompose(rs, rd);
        if (r.dst_rank >= 0)
            detail::queue_box_recvs(space, src_cfg, src_regions, StateKind::Param, r,
                                    r.params.recv, plan.pending);
        plan.routes.push_back(std::move(r));
    }
    if (opts.gradients == GradientPolicy::Migrate) {
        // gradients share the parameter geometry; replay the recv queue
        // with the gradient payload kind
        std::vector<detail::PendingRecv> grads;
        for (const auto& p : plan.pending)
            if (p.kind == StateKind::Param) {
                auto g = p;
                g.kind = StateKind::Grad;
                grads.push_back(std::move(g));
            }
        plan.pending.insert(plan.pending.end(), grads.begin(), grads.end());
    }
    return plan;
}

/// Adds the optimizer-state routing to `plan`. With ZeRO enabled on both
/// sides each device's shard is projected to flat intervals under both
/// configurations and the same decomposition applies; shards partition the
/// space, so every recv interval has exactly one source. With ZeRO
/// disabled on both sides the optimizer is replicated and routed exactly
/// like parameters. Mixed modes are unsupported.
inline void plan_optimizer(const ModelSpace& space, RoutingPlan& plan) {
    const ParallelConfig& src_cfg = plan.src_cfg;
    const ParallelConfig& dst_cfg = plan.dst_cfg;
    if (src_cfg.zero_enabled != dst_cfg.zero_enabled)
        throw ConfigError("transitions toggling zero_enabled are unsupported");

    if (!src_cfg.zero_enabled) {
        std::vector<RegionSet> src_regions(src_cfg.world_size());
        for (int i = 0; i < src_cfg.world_size(); ++i) src_regions[i] = project(space, src_cfg, i);
        for (auto& r : plan.routes) {
            r.optim = r.params;  // replicated optimizer shares the parameter geometry
            if (r.dst_rank >= 0)
                detail::queue_box_recvs(space, src_cfg, src_regions, StateKind::Optim, r,
                                        r.optim.recv, plan.pending);
        }
        return;
    }

    std::vector<RegionSet> src_shards(src_cfg.world_size());
    for (int i = 0; i < src_cfg.world_size(); ++i)
        src_shards[i] = project_optimizer(space, src_cfg, i);
    std::vector<RegionSet> dst_shards(dst_cfg.world_size());
    for (int j = 0; j < dst_cfg.world_size(); ++j)
        dst_shards[j] = project_optimizer(space, dst_cfg, j);

    RegionSet empty;
    empty.space_fp = space.fingerprint();
    for (auto& r : plan.routes) {
        const RegionSet& rs = r.src_rank >= 0 ? src_shards[r.src_rank] : empty;
        const RegionSet& rd = r.dst_rank >= 0 ? dst_shards[r.dst_rank] : empty;
        r.optim = detail::decompose(rs, rd);
        for (const Interval& iv : r.optim.recv.flat) {
            // split at source-shard boundaries; coverage must be exact
            std::vector<Interval> pieces;
            std::vector<int> owners;
            for (int j = 0; j < src_cfg.world_size(); ++j) {
                for (const Interval& own : intervals_intersect(src_shards[j].flat, {iv})) {
                    pieces.push_back(own);
                    owners.push_back(j);
                }
            }
            if (intervals_length(pieces) != iv.length())
                throw ConfigError(strfmt(
                    "unreachable state: optimizer interval %s for device %d not fully sourced",
                    format_interval(iv).c_str(), r.phys));
            for (size_t k = 0; k < pieces.size(); ++k)
                plan.pending.push_back({StateKind::Optim, "", true, {}, pieces[k], r.phys,
                                        r.dst_rank, {owners[k]}});
        }
    }
}

/// Single broadcast of the scalar state blob (iteration count, RNG seeds,
/// schedule state) from world rank 0 to every destination rank.
inline void plan_scalars(RoutingPlan& plan) {
    const WorldMap& wm = plan.world_map;
    if (wm.src_world_size() == 0) return;
    ScalarBroadcast b;
    b.root_src_rank = 0;
    b.root_phys = wm.src_phys[0];
    b.words = plan.opts.scalar_words;
    b.bytes_per_rank = b.words * kScalarWordBytes;
    for (int phys : wm.dst_phys)
        if (phys != b.root_phys) b.recv_phys.push_back(phys);
    std::sort(b.recv_phys.begin(), b.recv_phys.end());
    plan.scalars = std::move(b);
}

/// Assigns exactly one source to every recv fragment: an intra-node
/// candidate with the lowest rank id when one exists, otherwise the
/// lowest-id candidate. Fragments nobody selected are simply never sent —
/// DP-redundant source copies drop out here. The resulting transfer list
/// is canonically sorted and byte-stable.
inline void resolve_peers(RoutingPlan& plan, const Topology& topo) {
    std::int64_t fanout_cursor = 0;
    for (const auto& p : plan.pending) {
        if (p.candidates.empty()) throw std::logic_error("pending recv without candidates");
        int chosen;
        if (plan.opts.balance_fanout && p.candidates.size() > 1) {
            chosen = p.candidates[static_cast<size_t>(fanout_cursor++) % p.candidates.size()];
        } else {
            chosen = -1;
            for (int cand : p.candidates) {
                int cand_phys = plan.world_map.src_phys[cand];
                if (topo.same_node(cand_phys, p.dst_phys)) {
                    chosen = cand;
                    break;  // candidates ascend, first intra-node hit is the lowest id
                }
            }
            if (chosen < 0) chosen = p.candidates.front();
        }
        SliceTransfer t;
        t.kind = p.kind;
        t.tensor_id = p.tensor_id;
        t.flat_payload = p.flat_payload;
        t.box = p.box;
        t.flat = p.flat;
        t.src_rank = chosen;
        t.src_phys = plan.world_map.src_phys[chosen];
        t.dst_rank = p.dst_rank;
        t.dst_phys = p.dst_phys;
        t.count = p.flat_payload ? p.flat.length() : p.box.numel();
        t.bytes = detail::payload_bytes(*reinterpret_cast<const ModelSpace*>(nullptr), t.kind,
                                        t.tensor_id, t.count);
        plan.transfers.push_back(std::move(t));
    }
    plan.pending.clear();
    std::sort(plan.transfers.begin(), plan.transfers.end(), transfer_order_less);
    plan.resolved = true;
}

}  // namespace reshard
