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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reshard/common.hpp"

namespace reshard {

/// Declarative description of one logical tensor of the model. The pair
/// (tensor_id, layer) identifies the tensor's semantic role; tp_shard_axis
/// and expert_axis describe how a parallel configuration may partition it.
struct TensorSpec {
    std::string tensor_id;
    std::vector<std::int64_t> shape;
    int layer = 0;
    std::optional<int> tp_shard_axis;
    bool is_expert = false;
    std::optional<int> expert_axis;
    int dtype_bytes = 2;

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (auto e : shape) n *= e;
        return n;
    }
};

/// Ordered list of tensors plus model-wide degrees. Declaration order is
/// load-bearing: it fixes the global flat offset of every tensor.
struct ModelSpec {
    std::vector<TensorSpec> tensors;
    int num_layers = 1;
    int num_experts = 1;  // 1 for dense models
};

/// The model's global coordinate space: every tensor in its complete,
/// unsharded form, with a gap-free flat offset assigned in declaration
/// order. Any parallel configuration is a projection of this space, so
/// source and destination layouts of a transition become regions of the
/// same object.
class ModelSpace {
public:
    struct Entry {
        TensorSpec spec;
        FlatIndex offset = 0;  // global flat offset of element (0,...,0)
    };

    ModelSpace() = default;
    ModelSpace(std::vector<Entry> entries, int num_layers, int num_experts,
               FlatIndex total_numel, std::uint64_t fingerprint)
        : entries_(std::move(entries)), num_layers_(num_layers), num_experts_(num_experts),
          total_numel_(total_numel), fingerprint_(fingerprint) {
        for (size_t i = 0; i < entries_.size(); ++i) index_[entries_[i].spec.tensor_id] = i;
    }

    const std::vector<Entry>& entries() const { return entries_; }
    int num_layers() const { return num_layers_; }
    int num_experts() const { return num_experts_; }
    FlatIndex total_numel() const { return total_numel_; }
    std::uint64_t fingerprint() const { return fingerprint_; }

    const Entry& entry(const std::string& tensor_id) const {
        auto it = index_.find(tensor_id);
        if (it == index_.end()) throw ConfigError("unknown tensor '" + tensor_id + "'");
        return entries_[it->second];
    }

private:
    std::vector<Entry> entries_;
    std::map<std::string, size_t> index_;
    int num_layers_ = 1;
    int num_experts_ = 1;
    FlatIndex total_numel_ = 0;
    std::uint64_t fingerprint_ = 0;
};

inline void validate_model(const ModelSpec& model) {
    if (model.num_layers < 1) throw ConfigError("num_layers must be positive");
    if (model.num_experts < 1) throw ConfigError("num_experts must be positive");
    std::map<std::string, int> seen;
    for (const auto& t : model.tensors) {
        if (t.tensor_id.empty()) throw ConfigError("empty tensor_id");
        if (seen.count(t.tensor_id)) throw ConfigError("duplicate tensor_id '" + t.tensor_id + "'");
        seen[t.tensor_id] = 1;
        if (t.shape.empty()) throw ConfigError("tensor '" + t.tensor_id + "' has empty shape");
        for (auto e : t.shape)
            if (e < 1) throw ConfigError("tensor '" + t.tensor_id + "' has zero extent");
        if (t.layer < 0 || t.layer >= model.num_layers)
            throw ConfigError("tensor '" + t.tensor_id + "' layer out of range");
        int rank = static_cast<int>(t.shape.size());
        if (t.tp_shard_axis && (*t.tp_shard_axis < 0 || *t.tp_shard_axis >= rank))
            throw ConfigError("tensor '" + t.tensor_id + "' tp_shard_axis out of range");
        if (t.is_expert != t.expert_axis.has_value())
            throw ConfigError("tensor '" + t.tensor_id + "' expert_axis required iff is_expert");
        if (t.expert_axis) {
            if (*t.expert_axis < 0 || *t.expert_axis >= rank)
                throw ConfigError("tensor '" + t.tensor_id + "' expert_axis out of range");
            if (t.tp_shard_axis && *t.expert_axis == *t.tp_shard_axis)
                throw ConfigError("tensor '" + t.tensor_id + "' expert_axis equals tp_shard_axis");
            if (t.shape[*t.expert_axis] != model.num_experts)
                throw ConfigError("tensor '" + t.tensor_id + "' expert extent != num_experts");
        }
        if (t.dtype_bytes < 1) throw ConfigError("tensor '" + t.tensor_id + "' dtype_bytes must be positive");
    }
}

/// Assigns declaration-order prefix-sum flat offsets. Pure: identical
/// output on every invocation for the same ModelSpec.
inline ModelSpace build_model_space(const ModelSpec& model) {
    validate_model(model);
    std::vector<ModelSpace::Entry> entries;
    entries.reserve(model.tensors.size());
    FlatIndex off = 0;
    std::uint64_t fp = 0xcbf29ce484222325ull;
    auto feed = [&fp](std::uint64_t v) { fp = (fp ^ v) * 0x100000001b3ull; };
    for (const auto& t : model.tensors) {
        entries.push_back({t, off});
        off += t.numel();
        for (char c : t.tensor_id) feed(static_cast<unsigned char>(c));
        for (auto e : t.shape) feed(static_cast<std::uint64_t>(e));
        feed(static_cast<std::uint64_t>(t.layer));
    }
    feed(static_cast<std::uint64_t>(model.num_layers));
    feed(static_cast<std::uint64_t>(model.num_experts));
    return ModelSpace(std::move(entries), model.num_layers, model.num_experts, off, fp);
}

/// Bytes of training state per parameter element under a precision policy.
/// "bf16-fp32-mixed": 2 (param) + 4 (grad) + 4 (master) + 4 + 4 (moments).
/// "fp32": 4 + 4 + 4 + 4.
inline int state_bytes_per_element(const std::string& policy) {
    if (policy == "bf16-fp32-mixed") return 18;
    if (policy == "fp32") return 16;
    throw ConfigError("unknown precision policy '" + policy + "'");
}

inline ByteCount estimate_state_bytes(const ModelSpec& model, const std::string& policy) {
    int per = state_bytes_per_element(policy);
    std::int64_t total = 0;
    for (const auto& t : model.tensors) total += t.numel();
    return total * per;
}

}  // namespace reshard
