#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qrs {

// Minimal SHA-256 (FIPS 180-4) used to embed input-file digests in reports.
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& data);

}  // namespace qrs
