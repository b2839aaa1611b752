#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace restlog {

enum class Method { Get, Post, Put, Patch, Delete, Head };

std::string_view to_string(Method m);
std::optional<Method> parse_method(std::string_view text);

// "METHOD /rendered/:template", e.g. "POST /projects/:id/issues".
using OperationId = std::string;

struct Segment {
  enum class Kind { Literal, Param };

  Kind kind = Kind::Literal;
  std::string text;  // literal text, or the parameter name

  static Segment literal(std::string text) { return {Kind::Literal, std::move(text)}; }
  static Segment param(std::string name) { return {Kind::Param, std::move(name)}; }
  bool is_param() const { return kind == Kind::Param; }

  friend bool operator==(const Segment&, const Segment&) = default;
};

using PathTemplate = std::vector<Segment>;

// Accepts both "{name}" and ":name" parameter syntaxes.
PathTemplate parse_path_template(std::string_view path);
// Always renders parameters in ":name" form.
std::string render_template(const PathTemplate& path);
// Splits "/a/b/c" into {"a","b","c"}; empty segments are dropped.
std::vector<std::string> split_path(std::string_view path);

// Segment-wise equality where any Param matches any other Param.
bool same_shape(const PathTemplate& a, const PathTemplate& b);
// True when `prefix` is a segment-wise prefix of `path` (equal length allowed),
// with Param segments compared by position only.
bool is_shape_prefix(const PathTemplate& prefix, const PathTemplate& path);

enum class ParamLocation { Path, Query, Body, Header };
enum class SchemaType { String, Integer, Number, Boolean, Array, Object };

std::string_view to_string(ParamLocation loc);
std::string_view to_string(SchemaType t);

struct ParamDecl {
  std::string name;
  ParamLocation location = ParamLocation::Query;
  SchemaType schema_type = SchemaType::String;
  bool required = false;

  friend bool operator==(const ParamDecl&, const ParamDecl&) = default;
};

struct ApiOperation {
  OperationId id;
  Method method = Method::Get;
  PathTemplate path;
  std::vector<ParamDecl> parameters;
  std::string summary;

  std::string path_string() const { return render_template(path); }
  const ParamDecl* find_param(std::string_view name) const;
  std::size_t path_param_count() const;
};

OperationId make_operation_id(Method m, const PathTemplate& path);

struct ServiceSpec {
  std::string title;
  std::string base_path;
  std::map<OperationId, ApiOperation> operations;

  const ApiOperation* find(const OperationId& id) const;
  const ApiOperation& at(const OperationId& id) const;
  std::size_t param_count() const;
};

struct UriMatch {
  OperationId operation;
  std::map<std::string, std::string> path_bindings;
};

enum class DocumentFormat { Json, Yaml };

// Parses a Swagger 2.0 or OpenAPI 3.x document. Throws Error with
// MalformedDocument, UnsupportedVersion or DuplicateOperation.
ServiceSpec parse_spec(std::string_view document, DocumentFormat format);
// Format chosen by extension (.yaml/.yml → YAML, otherwise JSON).
ServiceSpec load_spec_file(const std::filesystem::path& path);

// Most specific template wins: at the first position where two candidate
// templates differ, a Literal outranks a Param. `concrete_path` must not carry
// a query string. The spec's base path is stripped when present.
std::optional<UriMatch> match_uri(const ServiceSpec& spec, Method method,
                                  std::string_view concrete_path);

// Sorted by rendered path, then method.
std::vector<ApiOperation> list_operations(const ServiceSpec& spec);

// `plus_as_space` applies form/query decoding rules.
std::string url_decode(std::string_view s, bool plus_as_space = false);
std::string url_encode(std::string_view s);

}  // namespace restlog
