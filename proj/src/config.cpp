#include "pbgcn/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pbgcn::config {

namespace {

[[noreturn]] void parse_fail(const std::string& origin, int line, const std::string& msg) {
  fail(errc::ConfigParseError, origin + ":" + std::to_string(line) + ": " + msg);
}

struct Cursor {
  const std::string& text;
  const std::string& origin;
  size_t pos = 0;
  int line = 1;

  bool eof() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  char take() {
    char c = text[pos++];
    if (c == '\n') ++line;
    return c;
  }
  void skip_ws_and_comments(bool stop_at_newline) {
    while (!eof()) {
      char c = peek();
      if (c == '#') {
        while (!eof() && peek() != '\n') take();
      } else if (c == '\n') {
        if (stop_at_newline) return;
        take();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        take();
      } else {
        return;
      }
    }
  }
};

Value parse_value(Cursor& c);

Value parse_scalar(Cursor& c) {
  int line = c.line;
  if (c.peek() == '"') {
    c.take();
    std::string s;
    while (!c.eof() && c.peek() != '"') {
      if (c.peek() == '\n') parse_fail(c.origin, line, "unterminated string");
      s.push_back(c.take());
    }
    if (c.eof()) parse_fail(c.origin, line, "unterminated string");
    c.take();
    return Value::make_str(std::move(s));
  }
  std::string tok;
  while (!c.eof()) {
    char ch = c.peek();
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',' || ch == ']' ||
        ch == '#') {
      break;
    }
    tok.push_back(c.take());
  }
  if (tok.empty()) parse_fail(c.origin, line, "expected a value");
  if (tok == "true") return Value::make_bool(true);
  if (tok == "false") return Value::make_bool(false);
  // Integer or real literal.
  bool real = tok.find_first_of(".eE") != std::string::npos;
  errno = 0;
  char* end = nullptr;
  if (!real) {
    long long v = std::strtoll(tok.c_str(), &end, 10);
    if (errno == 0 && end && *end == '\0') return Value::make_int(v);
  }
  double d = std::strtod(tok.c_str(), &end);
  if (errno != 0 || !end || *end != '\0') {
    parse_fail(c.origin, line, "cannot parse value '" + tok + "'");
  }
  return Value::make_real(d);
}

Value parse_value(Cursor& c) {
  c.skip_ws_and_comments(false);
  if (c.eof()) parse_fail(c.origin, c.line, "expected a value");
  if (c.peek() != '[') return parse_scalar(c);
  int line = c.line;
  c.take();  // '['
  std::vector<Value> items;
  while (true) {
    c.skip_ws_and_comments(false);
    if (c.eof()) parse_fail(c.origin, line, "unterminated list");
    if (c.peek() == ']') {
      c.take();
      break;
    }
    items.push_back(parse_value(c));
    c.skip_ws_and_comments(false);
    if (c.eof()) parse_fail(c.origin, line, "unterminated list");
    if (c.peek() == ',') {
      c.take();
    } else if (c.peek() != ']') {
      parse_fail(c.origin, c.line, "expected ',' or ']' in list");
    }
  }
  return Value::make_list(std::move(items));
}

}  // namespace

Value Value::make_int(int64_t v) {
  Value out;
  out.kind_ = Kind::Int;
  out.int_ = v;
  return out;
}
Value Value::make_real(double v) {
  Value out;
  out.kind_ = Kind::Real;
  out.real_ = v;
  return out;
}
Value Value::make_bool(bool v) {
  Value out;
  out.kind_ = Kind::Bool;
  out.bool_ = v;
  return out;
}
Value Value::make_str(std::string v) {
  Value out;
  out.kind_ = Kind::Str;
  out.str_ = std::move(v);
  return out;
}
Value Value::make_list(std::vector<Value> v) {
  Value out;
  out.kind_ = Kind::List;
  out.list_ = std::move(v);
  return out;
}

int64_t Value::as_int(const std::string& context) const {
  require(kind_ == Kind::Int, errc::ConfigParseError, context + ": expected an integer");
  return int_;
}
double Value::as_real(const std::string& context) const {
  if (kind_ == Kind::Int) return static_cast<double>(int_);
  require(kind_ == Kind::Real, errc::ConfigParseError, context + ": expected a number");
  return real_;
}
bool Value::as_bool(const std::string& context) const {
  require(kind_ == Kind::Bool, errc::ConfigParseError, context + ": expected true/false");
  return bool_;
}
const std::string& Value::as_str(const std::string& context) const {
  require(kind_ == Kind::Str, errc::ConfigParseError, context + ": expected a string");
  return str_;
}
const std::vector<Value>& Value::as_list(const std::string& context) const {
  require(kind_ == Kind::List, errc::ConfigParseError, context + ": expected a list");
  return list_;
}

std::vector<int> Value::as_int_list(const std::string& context) const {
  std::vector<int> out;
  for (const auto& v : as_list(context)) {
    out.push_back(static_cast<int>(v.as_int(context)));
  }
  return out;
}
std::vector<double> Value::as_real_list(const std::string& context) const {
  std::vector<double> out;
  for (const auto& v : as_list(context)) out.push_back(v.as_real(context));
  return out;
}
std::vector<std::string> Value::as_str_list(const std::string& context) const {
  std::vector<std::string> out;
  for (const auto& v : as_list(context)) out.push_back(v.as_str(context));
  return out;
}
std::vector<std::pair<int, int>> Value::as_int_pairs(const std::string& context) const {
  std::vector<std::pair<int, int>> out;
  for (const auto& v : as_list(context)) {
    auto pair = v.as_int_list(context);
    require(pair.size() == 2, errc::ConfigParseError, context + ": expected [a, b] pairs");
    out.emplace_back(pair[0], pair[1]);
  }
  return out;
}

bool Section::has(const std::string& key) const { return find(key) != nullptr; }

const Value* Section::find(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return &v;
  }
  return nullptr;
}

const Value& Section::get(const std::string& key) const {
  const Value* v = find(key);
  require(v != nullptr, errc::ConfigParseError,
          "[" + name + "] is missing required key '" + key + "'");
  return *v;
}

void Section::restrict_keys(const std::vector<std::string>& allowed) const {
  for (const auto& [k, _] : entries) {
    bool ok = false;
    for (const auto& a : allowed) {
      if (k == a) {
        ok = true;
        break;
      }
    }
    require(ok, errc::ConfigParseError, "unknown key '" + k + "' in [" + name + "]");
  }
}

const Section* File::first(const std::string& name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const Section& File::require_section(const std::string& name) const {
  const Section* s = first(name);
  require(s != nullptr, errc::ConfigParseError,
          origin + ": missing required [" + name + "] section");
  return *s;
}

std::vector<const Section*> File::all(const std::string& name) const {
  std::vector<const Section*> out;
  for (const auto& s : sections) {
    if (s.name == name) out.push_back(&s);
  }
  return out;
}

File parse_string(const std::string& text, const std::string& origin) {
  File file;
  file.origin = origin;
  Cursor c{text, origin};
  Section* current = nullptr;
  while (true) {
    c.skip_ws_and_comments(false);
    if (c.eof()) break;
    if (c.peek() == '[') {
      int line = c.line;
      c.take();
      std::string name;
      while (!c.eof() && c.peek() != ']' && c.peek() != '\n') name.push_back(c.take());
      if (c.eof() || c.peek() != ']') parse_fail(origin, line, "unterminated section header");
      c.take();
      if (name.empty()) parse_fail(origin, line, "empty section name");
      file.sections.push_back(Section{name, line, {}});
      current = &file.sections.back();
      continue;
    }
    // key = value
    int line = c.line;
    std::string key;
    while (!c.eof() && (std::isalnum(static_cast<unsigned char>(c.peek())) ||
                        c.peek() == '_' || c.peek() == '-')) {
      key.push_back(c.take());
    }
    if (key.empty()) parse_fail(origin, line, "expected section header or key");
    if (current == nullptr) parse_fail(origin, line, "key '" + key + "' outside any section");
    c.skip_ws_and_comments(true);
    if (c.eof() || c.peek() != '=') parse_fail(origin, line, "expected '=' after key '" + key + "'");
    c.take();
    Value v = parse_value(c);
    // Nothing else may follow the value on its line.
    c.skip_ws_and_comments(true);
    if (!c.eof() && c.peek() != '\n') {
      parse_fail(origin, c.line, "trailing characters after value for '" + key + "'");
    }
    for (const auto& [k, _] : current->entries) {
      if (k == key) parse_fail(origin, line, "duplicate key '" + key + "'");
    }
    current->entries.emplace_back(std::move(key), std::move(v));
  }
  return file;
}

File parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), errc::IOError, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

SkeletonGraph load_graph(const File& file) {
  const Section& g = file.require_section("graph");
  g.restrict_keys({"vertices", "edges", "names", "reference_joints"});
  int vertices = static_cast<int>(g.get("vertices").as_int("[graph] vertices"));
  auto edges = g.get("edges").as_int_pairs("[graph] edges");
  std::vector<std::string> names;
  if (g.has("names")) names = g.get("names").as_str_list("[graph] names");
  std::vector<int> refs;
  if (g.has("reference_joints")) {
    refs = g.get("reference_joints").as_int_list("[graph] reference_joints");
  }
  return SkeletonGraph(vertices, std::move(edges), std::move(names), std::move(refs));
}

PartitionSpec load_partition_spec(const File& file) {
  PartitionSpec spec;
  const Section* meta = file.first("scheme");
  if (meta != nullptr) {
    meta->restrict_keys({"name", "cross_edges"});
    if (meta->has("name")) spec.name = meta->get("name").as_str("[scheme] name");
    if (meta->has("cross_edges")) {
      spec.cross_edges = meta->get("cross_edges").as_int_pairs("[scheme] cross_edges");
    }
  }
  auto parts = file.all("part");
  require(!parts.empty(), errc::ConfigParseError,
          file.origin + ": no [part] sections found");
  for (const Section* p : parts) {
    p->restrict_keys({"name", "vertices", "adjacent_to"});
    PartitionSpec::PartSpec ps;
    ps.name = p->get("name").as_str("[part] name");
    ps.vertices = p->get("vertices").as_int_list("[part] vertices");
    if (p->has("adjacent_to")) {
      ps.adjacent_to = p->get("adjacent_to").as_str_list("[part] adjacent_to");
    }
    spec.parts.push_back(std::move(ps));
  }
  if (spec.name.empty()) spec.name = "custom";
  return spec;
}

}  // namespace pbgcn::config
