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

#include <array>
#include <string>

#include "reshard/common.hpp"
#include "reshard/model.hpp"

namespace reshard {

/// A parallel configuration: the (dp, tp, pp, ep) degrees plus the rank
/// ordering convention. Together with a ModelSpace it fully determines the
/// region every rank owns, i.e. it acts as the layout mapping function.
struct ParallelConfig {
    int dp = 1;
    int tp = 1;
    int pp = 1;
    int ep = 1;
    bool zero_enabled = false;
    // Permutation of "pp","dp","tp", slowest to fastest varying dimension
    // of the flat rank id.
    std::string rank_order = "pp-dp-tp";

    int world_size() const { return dp * tp * pp; }

    bool operator==(const ParallelConfig&) const = default;

    std::string describe() const {
        return strfmt("dp=%d tp=%d pp=%d ep=%d zero=%s order=%s", dp, tp, pp, ep,
                      zero_enabled ? "true" : "false", rank_order.c_str());
    }
};

/// Coordinates of one rank in the configuration grid. ep_rank/edp_rank are
/// derived: the EP group is drawn within the DP dimension.
struct RankCoord {
    int pp_rank = 0;
    int dp_rank = 0;
    int tp_rank = 0;
    int ep_rank = 0;   // dp_rank mod ep
    int edp_rank = 0;  // dp_rank div ep (the expert-side data-parallel index)
};

namespace detail {

// rank_order tokens resolved to degrees, slowest first
inline std::array<std::pair<char, int>, 3> order_axes(const ParallelConfig& cfg) {
    std::array<std::pair<char, int>, 3> axes{};
    size_t pos = 0;
    int found = 0;
    const std::string& o = cfg.rank_order;
    while (pos < o.size() && found < 3) {
        size_t dash = o.find('-', pos);
        std::string tok = o.substr(pos, dash == std::string::npos ? std::string::npos : dash - pos);
        int degree;
        char tag;
        if (tok == "pp") { tag = 'p'; degree = cfg.pp; }
        else if (tok == "dp") { tag = 'd'; degree = cfg.dp; }
        else if (tok == "tp") { tag = 't'; degree = cfg.tp; }
        else throw ConfigError("bad rank_order token '" + tok + "'");
        axes[found++] = {tag, degree};
        pos = dash == std::string::npos ? o.size() : dash + 1;
    }
    if (found != 3 || pos != o.size())
        throw ConfigError("rank_order must name pp, dp and tp exactly once: '" + o + "'");
    if (axes[0].first == axes[1].first || axes[1].first == axes[2].first ||
        axes[0].first == axes[2].first)
        throw ConfigError("rank_order repeats a dimension: '" + o + "'");
    return axes;
}

}  // namespace detail

inline RankCoord rank_coord(const ParallelConfig& cfg, int rank) {
    if (rank < 0 || rank >= cfg.world_size())
        throw ConfigError(strfmt("rank %d out of range (world %d)", rank, cfg.world_size()));
    auto axes = detail::order_axes(cfg);
    int rem = rank;
    RankCoord c;
    for (int i = 2; i >= 0; --i) {
        int v = rem % axes[i].second;
        rem /= axes[i].second;
        switch (axes[i].first) {
            case 'p': c.pp_rank = v; break;
            case 'd': c.dp_rank = v; break;
            case 't': c.tp_rank = v; break;
        }
    }
    c.ep_rank = c.dp_rank % cfg.ep;
    c.edp_rank = c.dp_rank / cfg.ep;
    return c;
}

inline int flat_rank(const ParallelConfig& cfg, int pp_rank, int dp_rank, int tp_rank) {
    auto axes = detail::order_axes(cfg);
    int r = 0;
    for (const auto& [tag, degree] : axes) {
        int v = tag == 'p' ? pp_rank : tag == 'd' ? dp_rank : tp_rank;
        r = r * degree + v;
    }
    return r;
}

/// Contiguous pipeline stage layer range, remainder-first: the first
/// (num_layers mod pp) stages get one extra layer.
inline std::pair<int, int> stage_layer_range(int num_layers, int pp, int pp_rank) {
    int base = num_layers / pp;
    int extra = num_layers % pp;
    int start = pp_rank * base + (pp_rank < extra ? pp_rank : extra);
    int len = base + (pp_rank < extra ? 1 : 0);
    return {start, start + len};
}

/// Checks the configuration against a model: divisibility is required,
/// not padded — configurations violating it are rejected.
inline void validate_config(const ParallelConfig& cfg, const ModelSpec& model) {
    if (cfg.dp < 1 || cfg.tp < 1 || cfg.pp < 1 || cfg.ep < 1)
        throw ConfigError("parallel degrees must be positive: " + cfg.describe());
    detail::order_axes(cfg);
    if (cfg.dp % cfg.ep != 0)
        throw ConfigError(strfmt("ep=%d does not divide dp=%d", cfg.ep, cfg.dp));
    if (model.num_experts % cfg.ep != 0)
        throw ConfigError(strfmt("ep=%d does not divide num_experts=%d", cfg.ep, model.num_experts));
    if (cfg.pp > model.num_layers)
        throw ConfigError(strfmt("pp=%d exceeds num_layers=%d", cfg.pp, model.num_layers));
    for (const auto& t : model.tensors) {
        if (t.tp_shard_axis && t.shape[*t.tp_shard_axis] % cfg.tp != 0)
            throw ConfigError(strfmt("tp=%d does not divide extent %lld of tensor '%s'", cfg.tp,
                                     static_cast<long long>(t.shape[*t.tp_shard_axis]),
                                     t.tensor_id.c_str()));
    }
}

}  // namespace reshard
