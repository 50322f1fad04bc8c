#include "webswarm/bundle.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "webswarm/error.hpp"

namespace webswarm {

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string minify_script(std::string_view source) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    auto end = source.find('\n', pos);
    if (end == std::string_view::npos) end = source.size();
    auto line = source.substr(pos, end - pos);
    pos = end + 1;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) continue;
    line = line.substr(first);
    if (line.starts_with("//")) continue;
    const auto last = line.find_last_not_of(" \t\r");
    out.append(line.substr(0, last + 1));
    out.push_back('\n');
  }
  return out;
}

std::string content_hash(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

BundleRegistry BundleRegistry::from_directory(const std::filesystem::path& dir) {
  const auto runtime_path = dir / "runtime.js";
  if (!std::filesystem::exists(runtime_path)) throw Error("bundle directory lacks runtime.js: " + dir.string());
  const auto runtime = slurp(runtime_path);
  BundleRegistry reg;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (!entry.is_regular_file() || p.extension() != ".js" || p.filename() == "runtime.js") continue;
    reg.add(p.stem().string(), slurp(p), runtime);
  }
  return reg;
}

void BundleRegistry::add(const std::string& kernel_id, std::string_view kernel_source,
                         std::string_view runtime_source) {
  Bundle b;
  b.kernel_id = kernel_id;
  b.body = minify_script(runtime_source) + minify_script(kernel_source) +
           "self.webswarm.start(\"" + kernel_id + "\", kernel);\n";
  b.etag = content_hash(b.body);
  bundles_[kernel_id] = std::move(b);
}

const Bundle* BundleRegistry::find(std::string_view kernel_id) const {
  auto it = bundles_.find(kernel_id);
  return it == bundles_.end() ? nullptr : &it->second;
}

}  // namespace webswarm
