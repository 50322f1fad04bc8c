#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace webswarm {

/// The single script a background worker starts from: client runtime shim
/// followed by the kernel source, minimised.
struct Bundle {
  std::string kernel_id;
  std::string body;
  std::string etag;  // stable content hash
};

class BundleRegistry {
 public:
  /// Loads runtime.js plus every other *.js file in `dir` as a kernel named
  /// after the file stem. Throws Error if runtime.js is missing.
  static BundleRegistry from_directory(const std::filesystem::path& dir);

  void add(const std::string& kernel_id, std::string_view kernel_source, std::string_view runtime_source);
  const Bundle* find(std::string_view kernel_id) const;
  std::size_t size() const { return bundles_.size(); }

 private:
  std::map<std::string, Bundle, std::less<>> bundles_;
};

/// Drops comment-only lines, indentation and blank lines.
std::string minify_script(std::string_view source);

/// 64-bit FNV-1a as 16 hex digits.
std::string content_hash(std::string_view data);

}  // namespace webswarm
