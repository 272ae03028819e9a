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
#include <vector>

#include "reshard/common.hpp"

namespace reshard {

/// Identity of "the same device" across a transition. Rank ids are
/// world-relative and may be renumbered when nodes join or leave; physical
/// device ids are stable. src_phys[i] is the device running src-world rank
/// i, dst_phys[j] the device running dst-world rank j. Scheduling and
/// simulation operate on physical ids; plan records carry world rank ids.
struct WorldMap {
    std::vector<int> src_phys;
    std::vector<int> dst_phys;

    static WorldMap identity(int src_world, int dst_world) {
        WorldMap m;
        for (int i = 0; i < src_world; ++i) m.src_phys.push_back(i);
        for (int j = 0; j < dst_world; ++j) m.dst_phys.push_back(j);
        return m;
    }

    int src_world_size() const { return static_cast<int>(src_phys.size()); }
    int dst_world_size() const { return static_cast<int>(dst_phys.size()); }

    /// All participating devices, ascending. Departing ranks stay in the
    /// set: they act as senders during the switch window.
    std::vector<int> participants() const {
        std::vector<int> all = src_phys;
        all.insert(all.end(), dst_phys.begin(), dst_phys.end());
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        return all;
    }

    int num_participants() const { return static_cast<int>(participants().size()); }

    // -1 when the device is not part of that world
    int src_rank_of(int phys) const {
        for (int i = 0; i < src_world_size(); ++i)
            if (src_phys[i] == phys) return i;
        return -1;
    }
    int dst_rank_of(int phys) const {
        for (int j = 0; j < dst_world_size(); ++j)
            if (dst_phys[j] == phys) return j;
        return -1;
    }

    void validate() const {
        auto check = [](const std::vector<int>& v, const char* what) {
            std::vector<int> s = v;
            std::sort(s.begin(), s.end());
            if (std::adjacent_find(s.begin(), s.end()) != s.end())
                throw ConfigError(std::string(what) + " maps two ranks to one device");
            if (!s.empty() && s.front() < 0) throw ConfigError("negative device id");
        };
        check(src_phys, "src world");
        check(dst_phys, "dst world");
    }
};

}  // namespace reshard
