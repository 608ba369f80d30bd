#pragma once

// Minimal PLY reader/writer core: ascii and binary_little_endian, scalar and
// list properties. Higher-level point/mesh loaders sit in ingest.hpp and
// extract.hpp.

#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gridfit/errors.hpp"

namespace gridfit::ply {

enum class Type { i8, u8, i16, u16, i32, u32, f32, f64 };

inline Type parse_type(const std::string& s) {
  if (s == "char" || s == "int8") return Type::i8;
  if (s == "uchar" || s == "uint8") return Type::u8;
  if (s == "short" || s == "int16") return Type::i16;
  if (s == "ushort" || s == "uint16") return Type::u16;
  if (s == "int" || s == "int32") return Type::i32;
  if (s == "uint" || s == "uint32") return Type::u32;
  if (s == "float" || s == "float32") return Type::f32;
  if (s == "double" || s == "float64") return Type::f64;
  throw ParseError("unknown ply property type: " + s);
}

inline std::size_t type_size(Type t) {
  switch (t) {
    case Type::i8:
    case Type::u8: return 1;
    case Type::i16:
    case Type::u16: return 2;
    case Type::i32:
    case Type::u32:
    case Type::f32: return 4;
    case Type::f64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  Type type = Type::f32;
  bool is_list = false;
  Type count_type = Type::u8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;

  const Property* find(const std::string& n) const {
    for (const auto& p : props)
      if (p.name == n) return &p;
    return nullptr;
  }
};

struct File {
  bool binary = false;
  std::vector<Element> elements;
  std::string data;        // payload after end_header
  std::string path;        // for error messages
};

inline File read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  File f;
  f.path = path;

  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) throw ParseError(path + ": unterminated ply header");
    std::string line = content.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != "ply") throw ParseError(path + ": missing ply magic");
  bool have_format = false;
  for (;;) {
    std::string line = next_line();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment" || word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt == "ascii") f.binary = false;
      else if (fmt == "binary_little_endian") f.binary = true;
      else throw ParseError(path + ": unsupported ply format " + fmt);
      have_format = true;
    } else if (word == "element") {
      Element e;
      ls >> e.name >> e.count;
      if (!ls) throw ParseError(path + ": malformed element line: " + line);
      f.elements.push_back(e);
    } else if (word == "property") {
      if (f.elements.empty()) throw ParseError(path + ": property before element");
      std::string t;
      ls >> t;
      Property p;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_type(ct);
        p.type = parse_type(it);
      } else {
        p.type = parse_type(t);
        ls >> p.name;
      }
      if (!ls) throw ParseError(path + ": malformed property line: " + line);
      f.elements.back().props.push_back(p);
    } else if (word == "end_header") {
      break;
    } else {
      throw ParseError(path + ": unexpected header keyword " + word);
    }
  }
  if (!have_format) throw ParseError(path + ": ply header has no format line");
  f.data = content.substr(pos);
  return f;
}

// Sequential reader over the payload; values are widened to double.
class Cursor {
 public:
  explicit Cursor(const File& f) : f_(f), p_(f.data.data()), end_(p_ + f.data.size()) {}

  double scalar(Type t) {
    if (f_.binary) return read_binary(t);
    return read_ascii();
  }

  std::size_t list_count(Type t) {
    double v = scalar(t);
    if (v < 0) throw ParseError(f_.path + ": negative list count");
    return static_cast<std::size_t>(v);
  }

  void skip(const Property& p) {
    if (!p.is_list) {
      scalar(p.type);
      return;
    }
    std::size_t n = list_count(p.count_type);
    for (std::size_t i = 0; i < n; ++i) scalar(p.type);
  }

 private:
  double read_binary(Type t) {
    std::size_t sz = type_size(t);
    if (static_cast<std::size_t>(end_ - p_) < sz)
      throw ParseError(f_.path + ": truncated ply payload at byte offset " +
                       std::to_string(p_ - f_.data.data()));
    const char* q = p_;
    p_ += sz;
    switch (t) {
      case Type::i8: return *reinterpret_cast<const std::int8_t*>(q);
      case Type::u8: return *reinterpret_cast<const std::uint8_t*>(q);
      case Type::i16: { std::int16_t v; std::memcpy(&v, q, 2); return v; }
      case Type::u16: { std::uint16_t v; std::memcpy(&v, q, 2); return v; }
      case Type::i32: { std::int32_t v; std::memcpy(&v, q, 4); return v; }
      case Type::u32: { std::uint32_t v; std::memcpy(&v, q, 4); return v; }
      case Type::f32: { float v; std::memcpy(&v, q, 4); return v; }
      case Type::f64: { double v; std::memcpy(&v, q, 8); return v; }
    }
    return 0.0;
  }

  double read_ascii() {
    while (p_ != end_ && std::isspace(static_cast<unsigned char>(*p_))) ++p_;
    if (p_ == end_) throw ParseError(f_.path + ": truncated ply payload");
    char* after = nullptr;
    double v = std::strtod(p_, &after);
    if (after == p_) throw ParseError(f_.path + ": bad ascii ply value near byte offset " +
                                      std::to_string(p_ - f_.data.data()));
    p_ = after;
    return v;
  }

  const File& f_;
  const char* p_;
  const char* end_;
};

inline void write_scalar_le(std::string& out, double v, Type t) {
  char buf[8];
  std::size_t sz = type_size(t);
  switch (t) {
    case Type::f64: std::memcpy(buf, &v, 8); break;
    case Type::f32: { float x = static_cast<float>(v); std::memcpy(buf, &x, 4); break; }
    case Type::i32: { std::int32_t x = static_cast<std::int32_t>(v); std::memcpy(buf, &x, 4); break; }
    case Type::u32: { std::uint32_t x = static_cast<std::uint32_t>(v); std::memcpy(buf, &x, 4); break; }
    case Type::u8: { buf[0] = static_cast<char>(static_cast<std::uint8_t>(v)); break; }
    default: throw std::logic_error("unsupported ply write type");
  }
  out.append(buf, sz);
}

}  // namespace gridfit::ply
