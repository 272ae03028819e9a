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

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace reshard {

using FlatIndex = std::int64_t;  // element coordinate in the global flat space
using ByteCount = std::int64_t;

/// Raised on malformed or inconsistent inputs (bad config, bad scenario
/// file, divisibility violations). The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// State categories a payload byte can belong to. The enum order is the
/// canonical sort order used by every dump format.
enum class StateKind : int { Param = 0, Optim = 1, Grad = 2, Scalar = 3 };

inline const char* to_string(StateKind k) {
    switch (k) {
        case StateKind::Param: return "param";
        case StateKind::Optim: return "optim";
        case StateKind::Grad: return "grad";
        case StateKind::Scalar: return "scalar";
    }
    return "?";
}

// printf-style formatting into std::string (libstdc++ 11 has no <format>)
inline std::string strfmt(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    char buf[512];
    int n = std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    if (n < 0) return {};
    if (static_cast<size_t>(n) < sizeof(buf)) return std::string(buf, n);
    std::string big(static_cast<size_t>(n) + 1, '\0');
    va_start(args, fmt);
    std::vsnprintf(big.data(), big.size(), fmt, args);
    va_end(args);
    big.resize(static_cast<size_t>(n));
    return big;
}

inline std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Deterministic per-element payload value. Resharding is pure data
/// movement, so correctness is checked by bit equality of these values
/// after the move, with no numeric tolerance involved.
inline std::uint64_t canon_value(std::uint64_t seed, FlatIndex element, StateKind kind) {
    return mix64(mix64(seed ^ static_cast<std::uint64_t>(element) * 0xD6E8FEB86659FD93ull) ^
                 (static_cast<std::uint64_t>(kind) + 1) * 0xA5A5A5A5A5A5A5A5ull);
}

}  // namespace reshard
