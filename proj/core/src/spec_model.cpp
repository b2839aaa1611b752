#include "restlog/spec_model.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "restlog/error.hpp"

namespace restlog {

using nlohmann::json;

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Get: return "GET";
    case Method::Post: return "POST";
    case Method::Put: return "PUT";
    case Method::Patch: return "PATCH";
    case Method::Delete: return "DELETE";
    case Method::Head: return "HEAD";
  }
  return "GET";
}

std::optional<Method> parse_method(std::string_view text) {
  std::string up(text);
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "GET") return Method::Get;
  if (up == "POST") return Method::Post;
  if (up == "PUT") return Method::Put;
  if (up == "PATCH") return Method::Patch;
  if (up == "DELETE") return Method::Delete;
  if (up == "HEAD") return Method::Head;
  return std::nullopt;
}

std::string_view to_string(ParamLocation loc) {
  switch (loc) {
    case ParamLocation::Path: return "path";
    case ParamLocation::Query: return "query";
    case ParamLocation::Body: return "body";
    case ParamLocation::Header: return "header";
  }
  return "query";
}

std::string_view to_string(SchemaType t) {
  switch (t) {
    case SchemaType::String: return "string";
    case SchemaType::Integer: return "integer";
    case SchemaType::Number: return "number";
    case SchemaType::Boolean: return "boolean";
    case SchemaType::Array: return "array";
    case SchemaType::Object: return "object";
  }
  return "string";
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i <= path.size()) {
    std::size_t j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    if (j > i) out.emplace_back(path.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

PathTemplate parse_path_template(std::string_view path) {
  PathTemplate out;
  for (auto& seg : split_path(path)) {
    if (seg.size() >= 2 && seg.front() == '{' && seg.back() == '}') {
      out.push_back(Segment::param(seg.substr(1, seg.size() - 2)));
    } else if (seg.size() >= 2 && seg.front() == ':') {
      out.push_back(Segment::param(seg.substr(1)));
    } else {
      out.push_back(Segment::literal(seg));
    }
  }
  return out;
}

std::string render_template(const PathTemplate& path) {
  if (path.empty()) return "/";
  std::string out;
  for (const auto& s : path) {
    out += '/';
    if (s.is_param()) out += ':';
    out += s.text;
  }
  return out;
}

static bool segment_shape_equal(const Segment& a, const Segment& b) {
  if (a.is_param() || b.is_param()) return a.is_param() && b.is_param();
  return a.text == b.text;
}

bool same_shape(const PathTemplate& a, const PathTemplate& b) {
  return a.size() == b.size() && is_shape_prefix(a, b);
}

bool is_shape_prefix(const PathTemplate& prefix, const PathTemplate& path) {
  if (prefix.size() > path.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (!segment_shape_equal(prefix[i], path[i])) return false;
  }
  return true;
}

const ParamDecl* ApiOperation::find_param(std::string_view name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ApiOperation::path_param_count() const {
  return static_cast<std::size_t>(
      std::count_if(path.begin(), path.end(), [](const Segment& s) { return s.is_param(); }));
}

OperationId make_operation_id(Method m, const PathTemplate& path) {
  return std::string(to_string(m)) + " " + render_template(path);
}

const ApiOperation* ServiceSpec::find(const OperationId& id) const {
  auto it = operations.find(id);
  return it == operations.end() ? nullptr : &it->second;
}

const ApiOperation& ServiceSpec::at(const OperationId& id) const {
  const auto* op = find(id);
  if (!op) throw std::out_of_range("unknown operation: " + id);
  return *op;
}

std::size_t ServiceSpec::param_count() const {
  std::size_t n = 0;
  for (const auto& [id, op] : operations) n += op.parameters.size();
  return n;
}

namespace {

// yaml-cpp keeps every scalar as text; plain (untagged) scalars follow the
// YAML core schema, quoted ones stay strings.
json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Sequence: {
      json arr = json::array();
      for (const auto& child : node) arr.push_back(yaml_to_json(child));
      return arr;
    }
    case YAML::NodeType::Map: {
      json obj = json::object();
      for (const auto& kv : node) obj[kv.first.Scalar()] = yaml_to_json(kv.second);
      return obj;
    }
    case YAML::NodeType::Scalar: {
      const std::string& s = node.Scalar();
      if (node.Tag() != "?") return s;
      if (s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
      if (s == "true" || s == "True" || s == "TRUE") return true;
      if (s == "false" || s == "False" || s == "FALSE") return false;
      bool looks_numeric = !s.empty() && (std::isdigit(static_cast<unsigned char>(s[0])) ||
                                          ((s[0] == '-' || s[0] == '+') && s.size() > 1));
      if (looks_numeric) {
        std::size_t pos = 0;
        try {
          long long v = std::stoll(s, &pos);
          if (pos == s.size()) return v;
          double d = std::stod(s, &pos);
          if (pos == s.size()) return d;
        } catch (const std::exception&) {
        }
      }
      return s;
    }
  }
  return nullptr;
}

std::string version_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  return {};
}

const json& resolve_ref(const json& root, const json& node, int depth = 0) {
  if (!node.is_object() || !node.contains("$ref")) return node;
  if (depth > 32) throw Error(ErrorCode::MalformedDocument, "$ref chain too deep");
  const auto& ref = node.at("$ref");
  if (!ref.is_string()) throw Error(ErrorCode::MalformedDocument, "$ref must be a string");
  std::string target = ref.get<std::string>();
  if (target.rfind("#/", 0) != 0) {
    throw Error(ErrorCode::MalformedDocument, "only local $ref supported: " + target);
  }
  try {
    const json& found = root.at(json::json_pointer(target.substr(1)));
    return resolve_ref(root, found, depth + 1);
  } catch (const json::exception&) {
    throw Error(ErrorCode::MalformedDocument, "unresolvable $ref " + target);
  }
}

SchemaType schema_type_of(const json& root, const json& schema_in) {
  const json& schema = resolve_ref(root, schema_in);
  if (!schema.is_object()) return SchemaType::String;
  auto t = schema.value("type", std::string{});
  if (t == "integer") return SchemaType::Integer;
  if (t == "number") return SchemaType::Number;
  if (t == "boolean") return SchemaType::Boolean;
  if (t == "array") return SchemaType::Array;
  if (t == "object" || (t.empty() && schema.contains("properties"))) return SchemaType::Object;
  return SchemaType::String;
}

std::optional<ParamLocation> location_of(const std::string& in) {
  if (in == "path") return ParamLocation::Path;
  if (in == "query") return ParamLocation::Query;
  if (in == "header") return ParamLocation::Header;
  if (in == "body" || in == "formData") return ParamLocation::Body;
  return std::nullopt;  // cookie parameters are not modelled
}

// Flattens one level of an object schema into body parameters. Field-level
// "required" lists decide for properties; `body_required` applies to a body
// that does not flatten.
void flatten_body_schema(const json& root, const json& schema_in, const std::string& fallback_name,
                         bool body_required, std::vector<ParamDecl>& out) {
  const json& schema = resolve_ref(root, schema_in);
  if (schema.is_object() && schema.contains("allOf") && schema["allOf"].is_array()) {
    for (const auto& part : schema["allOf"]) {
      flatten_body_schema(root, part, fallback_name, body_required, out);
    }
    return;
  }
  if (schema.is_object() && schema.contains("properties") && schema["properties"].is_object()) {
    std::set<std::string> required;
    if (schema.contains("required") && schema["required"].is_array()) {
      for (const auto& r : schema["required"]) {
        if (r.is_string()) required.insert(r.get<std::string>());
      }
    }
    for (const auto& [name, prop] : schema["properties"].items()) {
      out.push_back({name, ParamLocation::Body, schema_type_of(root, prop), required.count(name) > 0});
    }
    return;
  }
  if (!fallback_name.empty()) {
    out.push_back({fallback_name, ParamLocation::Body, schema_type_of(root, schema), body_required});
  }
}

void add_parameter(const json& root, const json& raw, bool v3, std::vector<ParamDecl>& out) {
  const json& p = resolve_ref(root, raw);
  if (!p.is_object()) throw Error(ErrorCode::MalformedDocument, "parameter must be an object");
  auto name = p.value("name", std::string{});
  auto in = p.value("in", std::string{});
  auto loc = location_of(in);
  if (!loc) return;
  if (name.empty()) throw Error(ErrorCode::MalformedDocument, "parameter without a name");
  bool required = p.value("required", false) || *loc == ParamLocation::Path;
  if (*loc == ParamLocation::Body && in == "body") {
    if (p.contains("schema")) {
      flatten_body_schema(root, p["schema"], name, required, out);
    } else {
      out.push_back({name, ParamLocation::Body, SchemaType::Object, required});
    }
    return;
  }
  SchemaType type = SchemaType::String;
  if (v3 || p.contains("schema")) {
    if (p.contains("schema")) type = schema_type_of(root, p["schema"]);
  } else {
    type = schema_type_of(root, p);
  }
  // Operation-level declarations override path-level ones with the same name+location.
  auto it = std::find_if(out.begin(), out.end(), [&](const ParamDecl& d) {
    return d.name == name && d.location == *loc;
  });
  if (it != out.end()) {
    *it = {name, *loc, type, required};
  } else {
    out.push_back({name, *loc, type, required});
  }
}

void add_request_body(const json& root, const json& raw, std::vector<ParamDecl>& out) {
  const json& body = resolve_ref(root, raw);
  if (!body.is_object() || !body.contains("content") || !body["content"].is_object()) return;
  const auto& content = body["content"];
  if (content.empty()) return;
  const json* media = nullptr;
  for (const char* preferred : {"application/json", "application/x-www-form-urlencoded",
                                "multipart/form-data"}) {
    if (content.contains(preferred)) {
      media = &content[preferred];
      break;
    }
  }
  if (!media) media = &content.begin().value();
  if (media->is_object() && media->contains("schema")) {
    flatten_body_schema(root, (*media)["schema"], "body", true, out);
  }
}

std::string base_path_from_servers(const json& doc) {
  if (!doc.contains("servers") || !doc["servers"].is_array() || doc["servers"].empty()) return {};
  const auto& s = doc["servers"][0];
  if (!s.is_object() || !s.contains("url") || !s["url"].is_string()) return {};
  std::string url = s["url"].get<std::string>();
  auto scheme = url.find("://");
  if (scheme != std::string::npos) {
    auto slash = url.find('/', scheme + 3);
    url = slash == std::string::npos ? std::string{} : url.substr(slash);
  }
  while (url.size() > 1 && url.back() == '/') url.pop_back();
  return url == "/" ? std::string{} : url;
}

}  // namespace

namespace {

ServiceSpec parse_spec_impl(std::string_view document, DocumentFormat format) {
  json doc;
  if (format == DocumentFormat::Json) {
    try {
      doc = json::parse(document);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::MalformedDocument, e.what());
    }
  } else {
    try {
      doc = yaml_to_json(YAML::Load(std::string(document)));
    } catch (const YAML::Exception& e) {
      throw Error(ErrorCode::MalformedDocument, e.what());
    }
  }
  if (!doc.is_object()) throw Error(ErrorCode::MalformedDocument, "top level must be an object");

  bool v3 = false;
  if (doc.contains("openapi")) {
    auto v = version_text(doc["openapi"]);
    if (v.rfind('3', 0) != 0) throw Error(ErrorCode::UnsupportedVersion, "openapi " + v);
    v3 = true;
  } else if (doc.contains("swagger")) {
    auto v = version_text(doc["swagger"]);
    if (v.rfind('2', 0) != 0) throw Error(ErrorCode::UnsupportedVersion, "swagger " + v);
  } else {
    throw Error(ErrorCode::UnsupportedVersion, "neither 'swagger' nor 'openapi' key present");
  }

  ServiceSpec spec;
  if (doc.contains("info") && doc["info"].is_object()) {
    spec.title = doc["info"].value("title", std::string{});
  }
  if (v3) {
    spec.base_path = base_path_from_servers(doc);
  } else if (doc.contains("basePath") && doc["basePath"].is_string()) {
    spec.base_path = doc["basePath"].get<std::string>();
    while (spec.base_path.size() > 1 && spec.base_path.back() == '/') spec.base_path.pop_back();
    if (spec.base_path == "/") spec.base_path.clear();
  }

  if (!doc.contains("paths")) return spec;
  const auto& paths = doc["paths"];
  if (paths.is_null()) return spec;
  if (!paths.is_object()) throw Error(ErrorCode::MalformedDocument, "'paths' must be an object");

  static const std::vector<std::string> kMethods = {"get", "post", "put", "patch", "delete", "head"};
  for (const auto& [raw_path, item_raw] : paths.items()) {
    if (raw_path.empty() || raw_path.front() != '/') {
      throw Error(ErrorCode::MalformedDocument, "path must start with '/': " + raw_path);
    }
    const json& item = resolve_ref(doc, item_raw);
    if (!item.is_object()) throw Error(ErrorCode::MalformedDocument, "path item must be an object");
    PathTemplate tmpl = parse_path_template(raw_path);

    std::vector<ParamDecl> shared;
    if (item.contains("parameters") && item["parameters"].is_array()) {
      for (const auto& p : item["parameters"]) add_parameter(doc, p, v3, shared);
    }

    for (const auto& m : kMethods) {
      if (!item.contains(m)) continue;
      const json& opj = item[m];
      if (!opj.is_object()) throw Error(ErrorCode::MalformedDocument, m + " " + raw_path);
      ApiOperation op;
      op.method = *parse_method(m);
      op.path = tmpl;
      op.id = make_operation_id(op.method, tmpl);
      op.summary = opj.value("summary", opj.value("description", std::string{}));
      op.parameters = shared;
      if (opj.contains("parameters") && opj["parameters"].is_array()) {
        for (const auto& p : opj["parameters"]) add_parameter(doc, p, v3, op.parameters);
      }
      if (v3 && opj.contains("requestBody")) add_request_body(doc, opj["requestBody"], op.parameters);

      for (const auto& seg : tmpl) {
        if (!seg.is_param()) continue;
        auto it = std::find_if(op.parameters.begin(), op.parameters.end(), [&](const ParamDecl& d) {
          return d.name == seg.text && d.location == ParamLocation::Path;
        });
        if (it == op.parameters.end()) {
          op.parameters.push_back({seg.text, ParamLocation::Path, SchemaType::String, true});
        }
      }

      for (const auto& [id, existing] : spec.operations) {
        if (existing.method == op.method && same_shape(existing.path, op.path)) {
          throw Error(ErrorCode::DuplicateOperation, op.id + " duplicates " + id);
        }
      }
      spec.operations.emplace(op.id, std::move(op));
    }
  }
  return spec;
}

}  // namespace

ServiceSpec parse_spec(std::string_view document, DocumentFormat format) {
  try {
    return parse_spec_impl(document, format);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, e.what());
  }
}

ServiceSpec load_spec_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open spec file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  auto fmt = (ext == ".yaml" || ext == ".yml") ? DocumentFormat::Yaml : DocumentFormat::Json;
  return parse_spec(ss.str(), fmt);
}

namespace {

std::optional<UriMatch> match_segments(const ServiceSpec& spec, Method method,
                                       const std::vector<std::string>& segs) {
  const ApiOperation* best = nullptr;
  for (const auto& [id, op] : spec.operations) {
    if (op.method != method || op.path.size() != segs.size()) continue;
    bool ok = true;
    for (std::size_t i = 0; i < segs.size() && ok; ++i) {
      if (!op.path[i].is_param() && op.path[i].text != segs[i]) ok = false;
    }
    if (!ok) continue;
    if (!best) {
      best = &op;
      continue;
    }
    for (std::size_t i = 0; i < segs.size(); ++i) {
      bool cand_lit = !op.path[i].is_param();
      bool best_lit = !best->path[i].is_param();
      if (cand_lit != best_lit) {
        if (cand_lit) best = &op;
        break;
      }
    }
  }
  if (!best) return std::nullopt;
  UriMatch m{best->id, {}};
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (best->path[i].is_param()) m.path_bindings[best->path[i].text] = segs[i];
  }
  return m;
}

}  // namespace

std::optional<UriMatch> match_uri(const ServiceSpec& spec, Method method,
                                  std::string_view concrete_path) {
  auto raw = split_path(concrete_path);
  std::vector<std::string> segs;
  segs.reserve(raw.size());
  for (const auto& s : raw) segs.push_back(url_decode(s));

  if (!spec.base_path.empty()) {
    auto base = split_path(spec.base_path);
    if (segs.size() >= base.size() && std::equal(base.begin(), base.end(), segs.begin())) {
      std::vector<std::string> rest(segs.begin() + static_cast<std::ptrdiff_t>(base.size()),
                                    segs.end());
      if (auto m = match_segments(spec, method, rest)) return m;
    }
  }
  return match_segments(spec, method, segs);
}

std::vector<ApiOperation> list_operations(const ServiceSpec& spec) {
  std::vector<ApiOperation> ops;
  ops.reserve(spec.operations.size());
  for (const auto& [id, op] : spec.operations) ops.push_back(op);
  std::sort(ops.begin(), ops.end(), [](const ApiOperation& a, const ApiOperation& b) {
    auto pa = a.path_string();
    auto pb = b.path_string();
    if (pa != pb) return pa < pb;
    return static_cast<int>(a.method) < static_cast<int>(b.method);
  });
  return ops;
}

std::string url_decode(std::string_view s, bool plus_as_space) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '+' && plus_as_space) {
      out += ' ';
    } else if (c == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
               std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
      out += static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16));
      i += 2;
    } else {
      out += c;
    }
  }
  return out;
}

std::string url_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xF];
    }
  }
  return out;
}

}  // namespace restlog
