// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <string>
#include <type_traits>

#include "lsgs/error.hpp"

namespace lsgs::detail {

/// Shortest round-trip text for numbers; "true"/"false" for bool.
template <class T>
std::string to_text(T v) {
    if constexpr (std::is_same_v<T, bool>) {
        return v ? "true" : "false";
    } else {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return {buf, res.ptr};
    }
}

/// Whole-string parse; throws ConfigError naming `key` on failure.
template <class T>
T parse_value(const std::string& key, const std::string& text) {
    if constexpr (std::is_same_v<T, bool>) {
        if (text == "true") return true;
        if (text == "false") return false;
    } else {
        T value{};
        const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
        if (res.ec == std::errc() && res.ptr == text.data() + text.size()) return value;
    }
    throw ConfigError("invalid value for " + key + ": '" + text + "'");
}

} // namespace lsgs::detail
