#ifndef PBGCN_CONFIG_HPP
#define PBGCN_CONFIG_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pbgcn/errors.hpp"
#include "pbgcn/graph.hpp"

namespace pbgcn::config {

/// A parsed config value: integer, real, boolean, quoted string, or a
/// (possibly nested) bracketed list of values.
class Value {
 public:
  enum class Kind { Int, Real, Bool, Str, List };

  static Value make_int(int64_t v);
  static Value make_real(double v);
  static Value make_bool(bool v);
  static Value make_str(std::string v);
  static Value make_list(std::vector<Value> v);

  Kind kind() const { return kind_; }

  int64_t as_int(const std::string& context) const;
  double as_real(const std::string& context) const;  // accepts integers too
  bool as_bool(const std::string& context) const;
  const std::string& as_str(const std::string& context) const;
  const std::vector<Value>& as_list(const std::string& context) const;

  std::vector<int> as_int_list(const std::string& context) const;
  std::vector<double> as_real_list(const std::string& context) const;
  std::vector<std::string> as_str_list(const std::string& context) const;
  std::vector<std::pair<int, int>> as_int_pairs(const std::string& context) const;

 private:
  Kind kind_ = Kind::Int;
  int64_t int_ = 0;
  double real_ = 0.0;
  bool bool_ = false;
  std::string str_;
  std::vector<Value> list_;
};

struct Section {
  std::string name;
  int line = 0;  // 1-based line of the section header
  std::vector<std::pair<std::string, Value>> entries;

  bool has(const std::string& key) const;
  const Value* find(const std::string& key) const;
  const Value& get(const std::string& key) const;  // ConfigParseError if absent
  /// Rejects any key outside `allowed`.
  void restrict_keys(const std::vector<std::string>& allowed) const;
};

struct File {
  std::string origin;
  std::vector<Section> sections;

  const Section* first(const std::string& name) const;
  const Section& require_section(const std::string& name) const;
  std::vector<const Section*> all(const std::string& name) const;
};

/// Parses the repo's config grammar: `[section]` headers, `key = value`
/// entries, `#` comments, values spanning lines while brackets are open.
/// The grammar is documented in docs/formats.md.
File parse_string(const std::string& text, const std::string& origin = "<string>");
File parse_file(const std::string& path);

/// Loads a [graph] section into a validated skeleton topology.
SkeletonGraph load_graph(const File& file);

/// Loads the [scheme] + repeated [part] sections into a partition spec.
PartitionSpec load_partition_spec(const File& file);

}  // namespace pbgcn::config

#endif
