#include "cgnn/util.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cgnn/error.hpp"

namespace cgnn {

namespace fs = std::filesystem;

uint64_t fnv1a64(std::string_view data) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::string_view data) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(data)));
  return std::string("fnv1a64:") + buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw_io("short write to " + path.string());
}

std::string file_digest(const fs::path& path) {
  return hex_digest(read_file(path));
}

namespace {

bool match_from(std::string_view p, std::string_view s) {
  while (!p.empty()) {
    if (p.substr(0, 2) == "**") {
      std::string_view rest = p.substr(2);
      // "**/" may also match zero directories.
      if (!rest.empty() && rest.front() == '/') {
        if (match_from(rest.substr(1), s)) return true;
      }
      for (size_t i = 0; i <= s.size(); ++i) {
        if (match_from(rest, s.substr(i))) return true;
      }
      return false;
    }
    const char c = p.front();
    if (c == '*') {
      std::string_view rest = p.substr(1);
      for (size_t i = 0; i <= s.size(); ++i) {
        if (match_from(rest, s.substr(i))) return true;
        if (i < s.size() && s[i] == '/') break;
      }
      return false;
    }
    if (s.empty()) return false;
    if (c == '?') {
      if (s.front() == '/') return false;
    } else if (c != s.front()) {
      return false;
    }
    p.remove_prefix(1);
    s.remove_prefix(1);
  }
  return s.empty();
}

}  // namespace

bool glob_match(std::string_view pattern, std::string_view path) {
  return match_from(pattern, path);
}

std::vector<std::string> list_matching_files(
    const fs::path& root, const std::vector<std::string>& include,
    const std::vector<std::string>& exclude) {
  std::vector<std::string> out;
  if (!fs::is_directory(root)) throw_io("not a directory: " + root.string());
  for (auto it = fs::recursive_directory_iterator(root);
       it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    const std::string rel =
        fs::relative(it->path(), root).generic_string();
    auto hit = [&](const std::string& g) { return glob_match(g, rel); };
    if (!std::any_of(include.begin(), include.end(), hit)) continue;
    if (std::any_of(exclude.begin(), exclude.end(), hit)) continue;
    out.push_back(rel);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cgnn
