#include "manifest.hpp"

#include <openssl/evp.h>

#include <ctime>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "tridetect/binary_io.hpp"

namespace tridetect::cli {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

Manifest::Manifest(std::string command) {
  std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
  set("command", std::move(command));
  set("tool_version", kToolVersion);
  set("timestamp", stamp);
}

void Manifest::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = value;
      return;
    }
  entries_.emplace_back(key, value);
}

void Manifest::input(const std::string& name, const std::filesystem::path& path,
                     std::span<const std::uint8_t> bytes) {
  set("input." + name + ".path", path.string());
  set("input." + name + ".bytes", std::to_string(bytes.size()));
  set("input." + name + ".sha256", sha256_hex(bytes));
}

void Manifest::section(const std::string& prefix, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    set(prefix + "." + line.substr(0, eq), line.substr(eq + 3));
  }
}

std::string Manifest::text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

void Manifest::write(const std::filesystem::path& path) const {
  io::write_file_atomic(path, text());
}

}  // namespace tridetect::cli
