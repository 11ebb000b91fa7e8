#include "treegcn/mesh_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "treegcn/error.hpp"
#include "treegcn/rng.hpp"

namespace treegcn {

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string_view> tokens;
};

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Non-empty lines with '#' comments removed.
std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  std::size_t number = 0, start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string_view line = text.substr(start, end - start);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tokens = split_ws(line);
    if (!tokens.empty()) lines.push_back({number, std::move(tokens)});
    start = end + 1;
  }
  return lines;
}

bool parse_double(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size() && std::isfinite(out);
}

bool parse_long(std::string_view token, long long& out) {
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

std::size_t parse_count(const Line& line, std::size_t i, const char* what) {
  long long v = 0;
  if (i >= line.tokens.size() || !parse_long(line.tokens[i], v) || v < 0) {
    throw ParseError(line.number, std::string("expected non-negative ") + what);
  }
  return static_cast<std::size_t>(v);
}

Vec3 parse_vertex(const Line& line, std::size_t first) {
  if (line.tokens.size() < first + 3) throw ParseError(line.number, "vertex needs 3 coordinates");
  Vec3 v{};
  for (std::size_t d = 0; d < 3; ++d) {
    if (!parse_double(line.tokens[first + d], v[d])) {
      throw ParseError(line.number, "bad coordinate '" + std::string(line.tokens[first + d]) + "'");
    }
  }
  return v;
}

void add_fan(Mesh& mesh, const std::vector<std::size_t>& polygon) {
  for (std::size_t k = 1; k + 1 < polygon.size(); ++k) {
    mesh.triangles.push_back({polygon[0], polygon[k], polygon[k + 1]});
  }
}

std::string lowercase_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(ErrorKind::kIo, "short write to " + path.string());
}

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm(const Vec3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

constexpr char kCloudMagic[4] = {'P', 'C', 'F', '1'};

}  // namespace

double Mesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles.at(t);
  const Vec3& a = vertices.at(tri[0]);
  return 0.5 * norm(cross(sub(vertices.at(tri[1]), a), sub(vertices.at(tri[2]), a)));
}

double Mesh::total_area() const {
  double total = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) total += triangle_area(t);
  return total;
}

Tensor PointCloud::to_tensor(bool requires_grad) const {
  if (points.empty()) raise(ErrorKind::kContract, "empty point cloud");
  std::vector<double> values;
  values.reserve(points.size() * 3);
  for (const Vec3& p : points) values.insert(values.end(), p.begin(), p.end());
  return Tensor::matrix(points.size(), 3, std::move(values), requires_grad);
}

PointCloud PointCloud::from_tensor(const Tensor& t, std::optional<std::string> label) {
  if (t.rank() != 2 || t.cols() != 3) {
    raise(ErrorKind::kShape, "point cloud tensor must be [N x 3], got " + shape_string(t.shape()));
  }
  PointCloud cloud;
  cloud.label = std::move(label);
  const auto v = t.data();
  cloud.points.resize(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) cloud.points[i] = {v[3 * i], v[3 * i + 1], v[3 * i + 2]};
  return cloud;
}

// ---- Parsers -------------------------------------------------------------------

Mesh parse_off(std::string_view text) {
  const auto lines = tokenize(text);
  if (lines.empty()) throw ParseError(1, "empty OFF file");
  std::size_t cursor = 0;
  const Line& header = lines[cursor];
  if (header.tokens[0] != "OFF") throw ParseError(header.number, "missing OFF header");

  // Counts may share the header line ("OFF 8 6 0").
  Line counts = header;
  counts.tokens.erase(counts.tokens.begin());
  ++cursor;
  if (counts.tokens.empty()) {
    if (cursor >= lines.size()) throw ParseError(header.number, "missing counts line");
    counts = lines[cursor++];
  }
  const std::size_t n_vertices = parse_count(counts, 0, "vertex count");
  const std::size_t n_faces = parse_count(counts, 1, "face count");
  parse_count(counts, 2, "edge count");
  if (counts.tokens.size() != 3) throw ParseError(counts.number, "counts line must be \"V F E\"");

  Mesh mesh;
  mesh.vertices.reserve(n_vertices);
  for (std::size_t v = 0; v < n_vertices; ++v) {
    if (cursor >= lines.size()) {
      const std::size_t at = lines.back().number;
      throw ParseError(at, "expected " + std::to_string(n_vertices) + " vertices, found " + std::to_string(v));
    }
    mesh.vertices.push_back(parse_vertex(lines[cursor++], 0));
  }
  for (std::size_t f = 0; f < n_faces; ++f) {
    if (cursor >= lines.size()) {
      const std::size_t at = lines.back().number;
      throw ParseError(at, "expected " + std::to_string(n_faces) + " faces, found " + std::to_string(f));
    }
    const Line& line = lines[cursor++];
    const std::size_t k = parse_count(line, 0, "face vertex count");
    if (k < 3) throw ParseError(line.number, "face needs at least 3 vertices");
    if (line.tokens.size() < k + 1) throw ParseError(line.number, "face lists fewer indices than declared");
    std::vector<std::size_t> polygon(k);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t idx = parse_count(line, i + 1, "vertex index");
      if (idx >= n_vertices) {
        throw ParseError(line.number, "vertex index " + std::to_string(idx) + " out of range (" +
                                          std::to_string(n_vertices) + " vertices)");
      }
      polygon[i] = idx;
    }
    add_fan(mesh, polygon);
  }
  if (cursor < lines.size()) {
    throw ParseError(lines[cursor].number, "unexpected content after declared faces");
  }
  return mesh;
}

Mesh parse_obj(std::string_view text) {
  Mesh mesh;
  for (const Line& line : tokenize(text)) {
    const std::string_view tag = line.tokens[0];
    if (tag == "v") {
      mesh.vertices.push_back(parse_vertex(line, 1));
    } else if (tag == "f") {
      if (line.tokens.size() < 4) throw ParseError(line.number, "face needs at least 3 vertices");
      std::vector<std::size_t> polygon;
      for (std::size_t i = 1; i < line.tokens.size(); ++i) {
        std::string_view token = line.tokens[i];
        token = token.substr(0, token.find('/'));
        long long idx = 0;
        if (!parse_long(token, idx) || idx == 0) {
          throw ParseError(line.number, "bad face index '" + std::string(line.tokens[i]) + "'");
        }
        const long long count = static_cast<long long>(mesh.vertices.size());
        const long long resolved = idx > 0 ? idx - 1 : count + idx;
        if (resolved < 0 || resolved >= count) {
          throw ParseError(line.number, "vertex index " + std::to_string(idx) + " out of range (" +
                                            std::to_string(count) + " vertices)");
        }
        polygon.push_back(static_cast<std::size_t>(resolved));
      }
      add_fan(mesh, polygon);
    }
  }
  if (mesh.triangles.empty()) throw ParseError(1, "OBJ file has no faces");
  return mesh;
}

Mesh load_mesh(const std::filesystem::path& path) {
  const std::string ext = lowercase_extension(path);
  const std::string text = read_file(path);
  if (ext == ".off") return parse_off(text);
  if (ext == ".obj") return parse_obj(text);
  raise(ErrorKind::kFormat, "unsupported mesh extension '" + ext + "' for " + path.string());
}

// ---- Sampling ------------------------------------------------------------------

PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n == 0) raise(ErrorKind::kContract, "sample_surface: n must be at least 1");
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for (std::size_t idx : mesh.triangles[t]) {
      if (idx >= mesh.vertices.size()) raise(ErrorKind::kGeometry, "triangle index out of range");
    }
    total += mesh.triangle_area(t);
    cumulative[t] = total;
  }
  if (!(total > 0.0)) raise(ErrorKind::kGeometry, "mesh has zero surface area");

  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double pick = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& tri = mesh.triangles[static_cast<std::size_t>(it - cumulative.begin())];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const double u = 1.0 - r1, v = r1 * (1.0 - r2), w = r1 * r2;
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    cloud.points.push_back({u * a[0] + v * b[0] + w * c[0], u * a[1] + v * b[1] + w * c[1],
                            u * a[2] + v * b[2] + w * c[2]});
  }
  return cloud;
}

PointCloud normalize(const PointCloud& cloud) {
  if (cloud.empty()) raise(ErrorKind::kGeometry, "cannot normalize an empty cloud");
  const bool identical = std::all_of(cloud.points.begin(), cloud.points.end(),
                                     [&](const Vec3& p) { return p == cloud.points.front(); });
  if (identical) raise(ErrorKind::kGeometry, "cannot normalize a cloud of identical points");

  Vec3 centroid{0.0, 0.0, 0.0};
  for (const Vec3& p : cloud.points) {
    for (std::size_t d = 0; d < 3; ++d) centroid[d] += p[d];
  }
  for (double& c : centroid) c /= static_cast<double>(cloud.size());

  PointCloud out;
  out.label = cloud.label;
  out.points.reserve(cloud.size());
  double radius = 0.0;
  for (const Vec3& p : cloud.points) {
    out.points.push_back(sub(p, centroid));
    radius = std::max(radius, norm(out.points.back()));
  }
  for (Vec3& p : out.points) {
    for (double& x : p) x /= radius;
  }
  return out;
}

// ---- Cloud files ---------------------------------------------------------------

std::string encode_binary_cloud(const PointCloud& cloud) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  std::string bytes(kCloudMagic, 4);
  auto put_u32 = [&bytes](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put_u32(static_cast<std::uint32_t>(cloud.size()));
  for (const Vec3& p : cloud.points) {
    for (double x : p) put_u32(std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  return bytes;
}

PointCloud decode_binary_cloud(std::string_view bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCloudMagic, 4) != 0) {
    raise(ErrorKind::kFormat, "binary cloud: bad magic");
  }
  auto get_u32 = [&bytes](std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
    }
    return v;
  };
  const std::size_t n = get_u32(4);
  if (bytes.size() != 8 + 12 * n) {
    raise(ErrorKind::kFormat, "binary cloud: expected " + std::to_string(8 + 12 * n) + " bytes, got " +
                                  std::to_string(bytes.size()));
  }
  PointCloud cloud;
  cloud.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < 3; ++d) {
      const float f = std::bit_cast<float>(get_u32(8 + 12 * i + 4 * d));
      if (!std::isfinite(f)) raise(ErrorKind::kFormat, "binary cloud: non-finite coordinate");
      cloud.points[i][d] = f;
    }
  }
  return cloud;
}

std::string encode_ascii_cloud(const PointCloud& cloud) {
  std::string text;
  char buf[96];
  for (const Vec3& p : cloud.points) {
    const int len = std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
    text.append(buf, static_cast<std::size_t>(len));
  }
  return text;
}

PointCloud decode_ascii_cloud(std::string_view text) {
  PointCloud cloud;
  for (const Line& line : tokenize(text)) {
    if (line.tokens.size() != 3) {
      raise(ErrorKind::kFormat, "ASCII cloud line " + std::to_string(line.number) + ": expected 3 values");
    }
    Vec3 p{};
    for (std::size_t d = 0; d < 3; ++d) {
      if (!parse_double(line.tokens[d], p[d])) {
        raise(ErrorKind::kFormat, "ASCII cloud line " + std::to_string(line.number) + ": bad number '" +
                                      std::string(line.tokens[d]) + "'");
      }
    }
    cloud.points.push_back(p);
  }
  if (cloud.empty()) raise(ErrorKind::kFormat, "ASCII cloud: no points");
  return cloud;
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  write_file(path, lowercase_extension(path) == ".pcf" ? encode_binary_cloud(cloud) : encode_ascii_cloud(cloud));
}

PointCloud read_cloud(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.empty()) raise(ErrorKind::kFormat, "empty cloud file " + path.string());
  if (lowercase_extension(path) == ".pcf") return decode_binary_cloud(bytes);
  return decode_ascii_cloud(bytes);
}

}  // namespace treegcn
