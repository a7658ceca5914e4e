#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace settlekit {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// SHA-256 over a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Incremental SHA-256 for digests over several inputs.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view data);
  std::string hex_digest();

 private:
  void* ctx_;
};

}  // namespace settlekit
