#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tridetect::cli {

inline constexpr const char* kToolVersion = "0.1.0";

std::string sha256_hex(std::span<const std::uint8_t> bytes);

// Ordered "key = value" record of one command invocation. The timestamp is
// the only field that differs between identical runs.
class Manifest {
 public:
  explicit Manifest(std::string command);

  void set(const std::string& key, const std::string& value);
  void input(const std::string& name, const std::filesystem::path& path,
             std::span<const std::uint8_t> bytes);
  // Every "key = value" line of `text`, prefixed with `prefix.`.
  void section(const std::string& prefix, const std::string& text);

  std::string text() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace tridetect::cli
