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

#include "reshard/common.hpp"

namespace reshard {

/// Two-tier bandwidth/latency cost model over physical devices. Devices
/// are grouped into nodes of `ranks_per_node`; intra-node links are fast,
/// inter-node links slow. Pack/unpack of staging buffers is charged at the
/// (much higher) intra-device bandwidth.
struct Topology {
    int num_nodes = 1;
    int ranks_per_node = 8;
    double intra_node_bw = 400e9;       // bytes per simulated second
    double inter_node_bw = 25e9;
    double per_message_latency = 30e-6;  // seconds
    double intra_device_bw = 0;          // 0 -> 10x inter_node_bw

    int node_of(int phys) const { return phys / ranks_per_node; }
    bool same_node(int a, int b) const { return node_of(a) == node_of(b); }
    double link_bw(int a, int b) const { return same_node(a, b) ? intra_node_bw : inter_node_bw; }
    double device_bw() const { return intra_device_bw > 0 ? intra_device_bw : 10.0 * inter_node_bw; }
    int capacity() const { return num_nodes * ranks_per_node; }

    double transfer_seconds(int a, int b, ByteCount bytes) const {
        return per_message_latency + static_cast<double>(bytes) / link_bw(a, b);
    }
    double copy_seconds(ByteCount bytes) const {
        return static_cast<double>(bytes) / device_bw();
    }

    void validate() const {
        if (num_nodes < 1 || ranks_per_node < 1) throw ConfigError("topology must have capacity");
        if (intra_node_bw <= 0 || inter_node_bw <= 0) throw ConfigError("bandwidths must be > 0");
        if (per_message_latency < 0) throw ConfigError("latency must be >= 0");
    }
};

}  // namespace reshard
