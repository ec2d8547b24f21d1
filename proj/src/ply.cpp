#include "spazer/ply.hpp"

#include "spazer/errors.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

namespace spazer {
namespace {

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

ScalarType parse_scalar_type(const std::string& s) {
  static const std::map<std::string, ScalarType> table = {
      {"char", ScalarType::Int8},     {"int8", ScalarType::Int8},
      {"uchar", ScalarType::UInt8},   {"uint8", ScalarType::UInt8},
      {"short", ScalarType::Int16},   {"int16", ScalarType::Int16},
      {"ushort", ScalarType::UInt16}, {"uint16", ScalarType::UInt16},
      {"int", ScalarType::Int32},     {"int32", ScalarType::Int32},
      {"uint", ScalarType::UInt32},   {"uint32", ScalarType::UInt32},
      {"float", ScalarType::Float32}, {"float32", ScalarType::Float32},
      {"double", ScalarType::Float64},{"float64", ScalarType::Float64},
  };
  auto it = table.find(s);
  if (it == table.end()) throw MalformedHeader("unknown PLY property type: " + s);
  return it->second;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Float64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::Float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::UInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

double read_binary_scalar(std::istream& in, ScalarType t) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(scalar_size(t)));
  if (!in) throw TruncatedBody("PLY body ended early");
  // host is little-endian, matching the on-disk format
  switch (t) {
    case ScalarType::Int8: return static_cast<double>(static_cast<std::int8_t>(buf[0]));
    case ScalarType::UInt8: return static_cast<double>(buf[0]);
    case ScalarType::Int16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
    case ScalarType::UInt16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
    case ScalarType::Int32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
    case ScalarType::UInt32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
    case ScalarType::Float32: { float v; std::memcpy(&v, buf, 4); return v; }
    case ScalarType::Float64: { double v; std::memcpy(&v, buf, 8); return v; }
  }
  return 0.0;
}

double read_ascii_scalar(std::istream& in) {
  double v = 0;
  if (!(in >> v)) throw TruncatedBody("PLY body ended early");
  return v;
}

}  // namespace

PointCloud load_point_cloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open PLY file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw MalformedHeader("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ply") throw MalformedHeader("missing 'ply' magic in " + path);

  bool binary = false;
  bool have_format = false;
  std::vector<Element> elements;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
    if (tok == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw MalformedHeader("unsupported PLY format: " + fmt);
      have_format = true;
    } else if (tok == "element") {
      Element e;
      if (!(ls >> e.name >> e.count)) throw MalformedHeader("bad element line: " + line);
      elements.push_back(e);
    } else if (tok == "property") {
      if (elements.empty()) throw MalformedHeader("property before element");
      Property p;
      std::string type_name;
      ls >> type_name;
      if (type_name == "list") {
        std::string count_name, item_name;
        if (!(ls >> count_name >> item_name >> p.name))
          throw MalformedHeader("bad list property: " + line);
        p.is_list = true;
        p.count_type = parse_scalar_type(count_name);
        p.type = parse_scalar_type(item_name);
      } else {
        if (!(ls >> p.name)) throw MalformedHeader("bad property line: " + line);
        p.type = parse_scalar_type(type_name);
      }
      elements.back().properties.push_back(p);
    } else if (tok == "end_header") {
      break;
    } else {
      throw MalformedHeader("unexpected header token: " + tok);
    }
  }
  if (!have_format) throw MalformedHeader("missing format line in " + path);
  if (in.eof()) throw MalformedHeader("header never terminated in " + path);

  PointCloud cloud;
  for (const Element& elem : elements) {
    const bool is_vertex = (elem.name == "vertex");
    int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
    if (is_vertex) {
      for (std::size_t i = 0; i < elem.properties.size(); ++i) {
        const std::string& n = elem.properties[i].name;
        if (n == "x") ix = static_cast<int>(i);
        else if (n == "y") iy = static_cast<int>(i);
        else if (n == "z") iz = static_cast<int>(i);
        else if (n == "red") ir = static_cast<int>(i);
        else if (n == "green") ig = static_cast<int>(i);
        else if (n == "blue") ib = static_cast<int>(i);
      }
      if (ix < 0 || iy < 0 || iz < 0)
        throw MissingProperty("vertex element lacks x/y/z in " + path);
      cloud.points.reserve(elem.count);
    }

    std::vector<double> values(elem.properties.size(), 0.0);
    for (std::size_t row = 0; row < elem.count; ++row) {
      for (std::size_t pi = 0; pi < elem.properties.size(); ++pi) {
        const Property& p = elem.properties[pi];
        if (p.is_list) {
          const double n = binary ? read_binary_scalar(in, p.count_type) : read_ascii_scalar(in);
          for (int k = 0; k < static_cast<int>(n); ++k) {
            if (binary) read_binary_scalar(in, p.type);
            else read_ascii_scalar(in);
          }
        } else {
          values[pi] = binary ? read_binary_scalar(in, p.type) : read_ascii_scalar(in);
        }
      }
      if (is_vertex) {
        if (!std::isfinite(values[ix]) || !std::isfinite(values[iy]) ||
            !std::isfinite(values[iz]))
          continue;  // scanners occasionally emit NaN points; drop them
        PointXYZRGB pt;
        pt.position = Eigen::Vector3f(static_cast<float>(values[ix]),
                                      static_cast<float>(values[iy]),
                                      static_cast<float>(values[iz]));
        if (ir >= 0 && ig >= 0 && ib >= 0) {
          pt.color = {static_cast<std::uint8_t>(values[ir]),
                      static_cast<std::uint8_t>(values[ig]),
                      static_cast<std::uint8_t>(values[ib])};
        }
        cloud.points.push_back(pt);
      }
    }
  }

  bool saw_vertex = false;
  for (const Element& e : elements) saw_vertex |= (e.name == "vertex");
  if (!saw_vertex) throw MissingProperty("no vertex element in " + path);
  if (cloud.empty()) throw MalformedHeader("no usable vertices in " + path);
  return cloud;
}

void save_point_cloud(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write PLY file: " + path);
  out << "ply\n"
      << "format binary_little_endian 1.0\n"
      << "element vertex " << cloud.points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  for (const PointXYZRGB& p : cloud.points) {
    float xyz[3] = {p.position.x(), p.position.y(), p.position.z()};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    out.write(reinterpret_cast<const char*>(p.color.data()), 3);
  }
}

}  // namespace spazer
