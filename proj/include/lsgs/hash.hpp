// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace lsgs {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

/// Digest of a file's bytes. Throws DataError when it cannot be read.
std::string file_sha256(const std::filesystem::path& path);

} // namespace lsgs
