#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "willflow/error.hpp"
#include "willflow/mesh.hpp"

namespace wf {

namespace {

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size() || line[i] == '#') break;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != '#')
      ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double to_double(std::string_view tok, std::size_t line) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    parse_error(line, "expected a number, got '" + std::string(tok) + "'");
  return value;
}

long to_long(std::string_view tok, std::size_t line) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    parse_error(line, "expected an integer, got '" + std::string(tok) + "'");
  return value;
}

TriMesh read_off(std::istream& in) {
  std::string raw;
  std::size_t line = 0;
  auto next_tokens = [&]() -> std::vector<std::string_view> {
    while (std::getline(in, raw)) {
      ++line;
      auto toks = tokenize(raw);
      if (!toks.empty()) return toks;
    }
    return {};
  };

  auto toks = next_tokens();
  if (toks.empty() || toks[0].substr(0, 3) != "OFF") parse_error(line, "missing OFF header");
  // Counts may share the header line ("OFF 4 4 6").
  toks.erase(toks.begin());
  if (toks.empty()) toks = next_tokens();
  if (toks.size() < 2) parse_error(line, "expected vertex and face counts");
  const long nv = to_long(toks[0], line);
  const long nf = to_long(toks[1], line);
  if (nv <= 0 || nf <= 0) parse_error(line, "counts must be positive");

  std::vector<Vec3> vertices;
  vertices.reserve(nv);
  for (long v = 0; v < nv; ++v) {
    toks = next_tokens();
    if (toks.size() < 3) parse_error(line, "vertex line needs three coordinates");
    vertices.emplace_back(to_double(toks[0], line), to_double(toks[1], line),
                          to_double(toks[2], line));
  }
  std::vector<Face> faces;
  faces.reserve(nf);
  for (long f = 0; f < nf; ++f) {
    toks = next_tokens();
    if (toks.empty()) parse_error(line, "unexpected end of file in face list");
    const long n = to_long(toks[0], line);
    if (n != 3) parse_error(line, "only triangles are supported, got a " + std::to_string(n) + "-gon");
    if (toks.size() < 4) parse_error(line, "face line needs three indices");
    Face face{};
    for (int k = 0; k < 3; ++k) {
      const long idx = to_long(toks[k + 1], line);
      if (idx < 0 || idx >= nv) parse_error(line, "vertex index out of range");
      face[k] = static_cast<int>(idx);
    }
    faces.push_back(face);
  }
  return TriMesh::build(std::move(vertices), std::move(faces));
}

TriMesh read_obj(std::istream& in) {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto toks = tokenize(raw);
    if (toks.empty()) continue;
    if (toks[0] == "v") {
      if (toks.size() < 4) parse_error(line, "vertex line needs three coordinates");
      vertices.emplace_back(to_double(toks[1], line), to_double(toks[2], line),
                            to_double(toks[3], line));
    } else if (toks[0] == "f") {
      if (toks.size() != 4) {
        parse_error(line, "only triangles are supported, got " + std::to_string(toks.size() - 1) +
                              " face vertices");
      }
      Face face{};
      for (int k = 0; k < 3; ++k) {
        // "i", "i/t", "i//n", "i/t/n": the vertex index is the leading field.
        const std::string_view tok = toks[k + 1].substr(0, toks[k + 1].find('/'));
        long idx = to_long(tok, line);
        const long nv = static_cast<long>(vertices.size());
        if (idx < 0) idx = nv + idx + 1;
        if (idx < 1 || idx > nv) parse_error(line, "vertex index out of range");
        face[k] = static_cast<int>(idx - 1);
      }
      faces.push_back(face);
    }
    // Normals, texture coordinates, groups and materials are ignored.
  }
  if (vertices.empty()) parse_error(line, "no vertices");
  if (faces.empty()) parse_error(line, "no faces");
  return TriMesh::build(std::move(vertices), std::move(faces));
}

}  // namespace

MeshFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".off") return MeshFormat::Off;
  if (ext == ".obj") return MeshFormat::Obj;
  throw Error(ErrorCode::InvalidArgument, "unknown mesh extension '" + ext + "'");
}

TriMesh read_mesh(const std::filesystem::path& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  return format == MeshFormat::Off ? read_off(in) : read_obj(in);
}

TriMesh read_mesh(const std::filesystem::path& path) {
  return read_mesh(path, format_from_path(path));
}

void write_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format) {
  if (path.empty()) throw Error(ErrorCode::IoError, "empty output path");
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  out.precision(17);
  if (format == MeshFormat::Off) {
    out << "OFF\n"
        << mesh.num_vertices() << ' ' << mesh.num_faces() << ' ' << mesh.num_edges() << '\n';
    for (const Vec3& p : mesh.vertices()) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    for (const Face& f : mesh.faces()) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  } else {
    for (const Vec3& p : mesh.vertices())
      out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    for (const Face& f : mesh.faces())
      out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write to '" + path.string() + "' failed");
}

void write_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
  if (path.empty()) throw Error(ErrorCode::IoError, "empty output path");
  write_mesh(mesh, path, format_from_path(path));
}

}  // namespace wf
