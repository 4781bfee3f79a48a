#include "catpose/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "catpose/errors.hpp"

namespace catpose {

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool skip_line(std::string_view line) {
  const auto f = line.find_first_not_of(" \t\r");
  return f == std::string_view::npos || line[f] == '#';
}

std::string where(const fs::path& path, int line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw ValidationError("not a number: '" + std::string(text) + "'");
  }
  return v;
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_points(const fs::path& path, std::span<const Vec3> points) {
  std::string s;
  s.reserve(points.size() * 48);
  for (const auto& p : points) {
    s += format_double(p.x());
    s += ' ';
    s += format_double(p.y());
    s += ' ';
    s += format_double(p.z());
    s += '\n';
  }
  write_text(path, s);
}

PointCloud read_points(const fs::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  PointCloud out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (skip_line(line)) continue;
    const auto f = split(line);
    if (f.size() != 3) throw ValidationError(where(path, n) + ": expected 3 fields");
    try {
      out.emplace_back(parse_double(f[0]), parse_double(f[1]), parse_double(f[2]));
    } catch (const ValidationError& e) {
      throw ValidationError(where(path, n) + ": " + e.what());
    }
  }
  return out;
}

void write_labels(const fs::path& path, const InlierMask& mask) {
  std::string s;
  s.reserve(mask.size() * 2);
  for (auto v : mask.inlier) {
    s += v ? '1' : '0';
    s += '\n';
  }
  write_text(path, s);
}

InlierMask read_labels(const fs::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  InlierMask m;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (skip_line(line)) continue;
    const auto f = split(line);
    if (f.size() != 1 || (f[0] != "0" && f[0] != "1")) {
      throw ValidationError(where(path, n) + ": expected 0 or 1");
    }
    const bool in_ = f[0] == "1";
    m.inlier.push_back(in_ ? 1 : 0);
    m.score.push_back(in_ ? 1.0 : 0.0);
  }
  return m;
}

void write_manifest(const fs::path& path,
                    const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + " " + v + "\n";
  write_text(path, s);
}

Manifest read_manifest(const fs::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  Manifest m;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (skip_line(line)) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto a = line.find_first_not_of(" \t");
    const auto b = line.find_first_of(" \t", a);
    const std::string key = line.substr(a, b == std::string::npos ? std::string::npos : b - a);
    std::string value;
    if (b != std::string::npos) {
      const auto c = line.find_first_not_of(" \t", b);
      if (c != std::string::npos) value = line.substr(c);
    }
    if (!m.emplace(key, value).second) {
      throw ValidationError(where(path, n) + ": duplicate key '" + key + "'");
    }
  }
  return m;
}

std::string format_pose(const Pose9& pose) {
  std::string s;
  auto put = [&](double v) {
    if (!s.empty()) s += ' ';
    s += format_double(v);
  };
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) put(pose.rotation(r, c));
  }
  for (int i = 0; i < 3; ++i) put(pose.translation[i]);
  for (int i = 0; i < 3; ++i) put(pose.size[i]);
  return s;
}

Pose9 parse_pose(std::string_view text) {
  const auto f = split(text);
  if (f.size() != 15) throw ValidationError("pose: expected 15 numbers, got " + std::to_string(f.size()));
  Pose9 p;
  int k = 0;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = parse_double(f[k++]);
  }
  for (int i = 0; i < 3; ++i) p.translation[i] = parse_double(f[k++]);
  for (int i = 0; i < 3; ++i) p.size[i] = parse_double(f[k++]);
  return p;
}

const CategoryProfile& Bundle::profile(std::string_view category) const {
  for (const auto& p : profiles) {
    if (p.name == category) return p;
  }
  throw ValidationError("bundle has no profile for category '" + std::string(category) + "'");
}

namespace {

const std::string& need(const Manifest& m, const std::string& key, const fs::path& path) {
  const auto it = m.find(key);
  if (it == m.end()) throw ValidationError(path.string() + ": missing key '" + key + "'");
  return it->second;
}

Vec3 parse_vec3(std::string_view text) {
  const auto f = split(text);
  if (f.size() != 3) throw ValidationError("expected 3 numbers in '" + std::string(text) + "'");
  return {parse_double(f[0]), parse_double(f[1]), parse_double(f[2])};
}

std::string format_vec3(const Vec3& v) {
  return format_double(v.x()) + " " + format_double(v.y()) + " " + format_double(v.z());
}

}  // namespace

void write_bundle(const fs::path& dir, const Bundle& bundle) {
  std::vector<std::pair<std::string, std::string>> top = {
      {"format", "catpose-bundle 1"},
      {"profiles", std::to_string(bundle.profiles.size())},
      {"instances", std::to_string(bundle.instances.size())}};
  for (const auto& p : bundle.profiles) {
    top.emplace_back("profile." + p.name, p.name);
    const fs::path pd = dir / "profiles" / p.name;
    write_manifest(pd / "manifest.txt",
                   {{"name", p.name},
                    {"symmetry", std::string(to_string(p.symmetry.kind))},
                    {"candidates", std::to_string(p.symmetry.candidate_count)},
                    {"mean_size", format_vec3(p.mean_size)}});
    write_points(pd / "prior.xyz", p.prior);
  }
  for (std::size_t k = 0; k < bundle.instances.size(); ++k) {
    const auto& bi = bundle.instances[k];
    top.emplace_back("instance." + std::to_string(k), bi.id);
    const fs::path id = dir / "instances" / bi.id;
    write_manifest(id / "manifest.txt", {{"id", bi.id},
                                         {"category", bi.instance.category},
                                         {"seed", std::to_string(bi.instance.seed)},
                                         {"pose_gt", format_pose(bi.instance.pose_gt)}});
    write_points(id / "observed.xyz", bi.instance.observed);
    write_points(id / "coords.xyz", bi.instance.coords_gt);
    write_labels(id / "labels.txt", bi.instance.inliers_gt);
  }
  write_manifest(dir / "manifest.txt", top);
}

Bundle read_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a bundle directory: " + dir.string());
  const fs::path mp = dir / "manifest.txt";
  const Manifest top = read_manifest(mp);
  if (need(top, "format", mp) != "catpose-bundle 1") {
    throw ValidationError(mp.string() + ": unsupported format");
  }
  Bundle b;
  for (const auto& [key, name] : top) {
    if (!key.starts_with("profile.")) continue;
    const fs::path pd = dir / "profiles" / name;
    const Manifest m = read_manifest(pd / "manifest.txt");
    CategoryProfile p;
    p.name = need(m, "name", pd);
    p.symmetry.kind = symmetry_kind_from_string(need(m, "symmetry", pd));
    p.symmetry.candidate_count = std::stoi(need(m, "candidates", pd));
    p.mean_size = parse_vec3(need(m, "mean_size", pd));
    p.prior = read_points(pd / "prior.xyz");
    validate_profile(p);
    b.profiles.push_back(std::move(p));
  }
  const int count = std::stoi(need(top, "instances", mp));
  for (int k = 0; k < count; ++k) {
    BundleInstance bi;
    bi.id = need(top, "instance." + std::to_string(k), mp);
    const fs::path id = dir / "instances" / bi.id;
    const fs::path im = id / "manifest.txt";
    const Manifest m = read_manifest(im);
    if (need(m, "id", im) != bi.id) throw ValidationError(im.string() + ": id mismatch");
    bi.instance.category = need(m, "category", im);
    bi.instance.seed = std::stoull(need(m, "seed", im));
    bi.instance.pose_gt = parse_pose(need(m, "pose_gt", im));
    bi.instance.observed = read_points(id / "observed.xyz");
    bi.instance.coords_gt = read_points(id / "coords.xyz");
    bi.instance.inliers_gt = read_labels(id / "labels.txt");
    const std::size_t n = bi.instance.observed.size();
    if (bi.instance.coords_gt.size() != n || bi.instance.inliers_gt.size() != n) {
      throw ValidationError(id.string() + ": observed, coords and labels differ in length");
    }
    b.profile(bi.instance.category);  // must exist
    b.instances.push_back(std::move(bi));
  }
  return b;
}

}  // namespace catpose
