#pragma once

#include <string>

namespace evolver::detail {

/// Lowercase hex sha-256 of the input bytes.
std::string sha256_hex(const std::string& bytes);

}  // namespace evolver::detail
