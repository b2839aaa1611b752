#include "restlog/executor.hpp"

#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "restlog/error.hpp"

namespace restlog {

using nlohmann::json;

std::int64_t WallClock::now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                               start_)
      .count();
}

HttpResponse InProcessTarget::send(const HttpRequest& request) {
  if (!handler_) handler_ = factory_();
  return handler_(request);
}

namespace {

class HttpTarget final : public ExecutionTarget {
 public:
  explicit HttpTarget(const HttpTargetOptions& options) : options_(options) {
    const std::string& url = options.base_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "base URL must be absolute: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    origin_ = url.substr(0, path_start);
    if (path_start != std::string::npos) prefix_ = url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    client_ = std::make_unique<httplib::Client>(origin_);
    if (!client_->is_valid()) {
      throw Error(ErrorCode::InvalidConfig, "unsupported base URL " + url);
    }
    const int secs = options.timeout_ms / 1000;
    const int usecs = (options.timeout_ms % 1000) * 1000;
    client_->set_connection_timeout(secs, usecs);
    client_->set_read_timeout(secs, usecs);
    client_->set_write_timeout(secs, usecs);
    client_->set_keep_alive(true);
  }

  HttpResponse send(const HttpRequest& request) override {
    httplib::Headers headers;
    for (const auto& [k, v] : options_.headers) headers.emplace(k, v);
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    const std::string path = prefix_ + request.target;
    const char* ctype = "application/json";
    httplib::Result res;
    switch (request.method) {
      case Method::Get: res = client_->Get(path, headers); break;
      case Method::Head: res = client_->Head(path, headers); break;
      case Method::Post: res = client_->Post(path, headers, request.body, ctype); break;
      case Method::Put: res = client_->Put(path, headers, request.body, ctype); break;
      case Method::Patch: res = client_->Patch(path, headers, request.body, ctype); break;
      case Method::Delete: res = client_->Delete(path, headers, request.body, ctype); break;
    }
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, res->body};
  }

  std::string describe() const override { return options_.base_url; }

 private:
  HttpTargetOptions options_;
  std::string origin_;
  std::string prefix_;
  std::unique_ptr<httplib::Client> client_;
};

const json* descend(const json& doc, const std::string& dotted) {
  const json* cur = &doc;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    auto dot = dotted.find('.', start);
    std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!cur->is_object()) return nullptr;
    auto it = cur->find(key);
    if (it == cur->end()) return nullptr;
    cur = &*it;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return cur;
}

std::optional<std::string> last_literal_singular(const std::string& resource,
                                                 const ExtractionConfig& cfg) {
  PathTemplate path = parse_path_template(resource);
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    if (!it->is_param()) return singularize(it->text, cfg.singular_overrides);
  }
  return std::nullopt;
}

json typed_value(const std::string& raw, SchemaType type) {
  switch (type) {
    case SchemaType::Integer: {
      json v = json::parse(raw, nullptr, false);
      if (!v.is_discarded() && v.is_number_integer()) return v;
      return raw;
    }
    case SchemaType::Number: {
      json v = json::parse(raw, nullptr, false);
      if (!v.is_discarded() && v.is_number()) return v;
      return raw;
    }
    case SchemaType::Boolean:
      if (raw == "true") return true;
      if (raw == "false") return false;
      return raw;
    case SchemaType::Array:
    case SchemaType::Object: {
      json v = json::parse(raw, nullptr, false);
      if (!v.is_discarded() && (v.is_array() || v.is_object())) return v;
      return raw;
    }
    case SchemaType::String:
      return raw;
  }
  return raw;
}

}  // namespace

std::unique_ptr<ExecutionTarget> make_http_target(const HttpTargetOptions& options) {
  if (options.timeout_ms <= 0) throw Error(ErrorCode::InvalidConfig, "timeout must be positive");
  return std::make_unique<HttpTarget>(options);
}

std::optional<std::pair<std::string, std::string>> AuthConfig::resolve() const {
  std::string value = token;
  if (value.empty() && !token_env.empty()) {
    if (const char* env = std::getenv(token_env.c_str())) value = env;
  }
  if (value.empty()) {
    if (required) {
      throw Error(ErrorCode::AuthMissing,
                  "authentication required but no token" +
                      (token_env.empty() ? std::string() : " in $" + token_env));
    }
    return std::nullopt;
  }
  if (header.empty()) return std::make_pair(std::string("Authorization"), "Bearer " + value);
  return std::make_pair(header, value);
}

std::optional<std::string> extract_instance_id(const std::string& body, const std::string& resource,
                                               const ExtractionConfig& cfg) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  std::vector<std::string> keys;
  if (auto it = cfg.per_resource.find(resource); it != cfg.per_resource.end()) keys = it->second;
  keys.insert(keys.end(), cfg.keys.begin(), cfg.keys.end());
  if (auto s = last_literal_singular(resource, cfg)) keys.push_back(*s + "_id");
  for (const auto& key : keys) {
    const json* v = descend(doc, key);
    if (!v) continue;
    if (v->is_string()) return v->get<std::string>();
    if (v->is_number_integer() || v->is_number_unsigned()) return v->dump();
    if (v->is_number_float() || v->is_boolean()) return v->dump();
  }
  return std::nullopt;
}

Executor::Executor(const ServiceSpec& spec, const ResourceTree& tree, ExecutionTarget& target,
                   Clock& clock, AuthConfig auth, ExtractionConfig extraction)
    : spec_(spec),
      tree_(tree),
      target_(target),
      clock_(clock),
      auth_header_(auth.resolve()),
      extraction_(std::move(extraction)) {}

HttpRequest Executor::build_request(const LogEntry& entry,
                                    const std::map<std::string, std::string>& values) const {
  HttpRequest req;
  const ApiOperation* op = spec_.find(entry.op);
  if (!op) throw Error(ErrorCode::InvalidConfig, "operation " + entry.op + " is not in the spec");
  req.method = op->method;

  std::string path;
  for (const auto& seg : op->path) {
    path += '/';
    if (seg.is_param()) {
      auto it = values.find(seg.text);
      path += url_encode(it == values.end() ? std::string() : it->second);
    } else {
      path += seg.text;
    }
  }
  if (path.empty()) path = "/";
  path = spec_.base_path + path;

  const bool bodyless =
      op->method == Method::Get || op->method == Method::Delete || op->method == Method::Head;
  std::string query;
  json body = json::object();
  for (const auto& [name, value] : values) {
    const ParamDecl* d = op->find_param(name);
    ParamLocation loc = d ? d->location : (bodyless ? ParamLocation::Query : ParamLocation::Body);
    switch (loc) {
      case ParamLocation::Path:
        break;
      case ParamLocation::Query:
        query += query.empty() ? '?' : '&';
        query += url_encode(name) + "=" + url_encode(value);
        break;
      case ParamLocation::Header:
        req.headers[name] = value;
        break;
      case ParamLocation::Body:
        body[name] = typed_value(value, d ? d->schema_type : SchemaType::String);
        break;
    }
  }
  req.target = path + query;
  if (!body.empty()) req.body = body.dump();
  if (auth_header_) req.headers[auth_header_->first] = auth_header_->second;
  return req;
}

std::vector<ResponseRecord> Executor::execute(const Seed& seed) {
  std::vector<ResponseRecord> out;
  out.reserve(seed.entries.size());
  target_.begin_sequence();
  for (std::size_t i = 0; i < seed.entries.size(); ++i) {
    const LogEntry& e = seed.entries[i];
    ResponseRecord rec;
    rec.entry_index = i;
    rec.op = e.op;

    std::map<std::string, std::string> values = e.params;
    for (auto& [name, value] : values) {
      Locus locus{i, name};
      if (seed.unbound.count(locus)) continue;
      auto b = seed.phi_prime.find(locus);
      if (b == seed.phi_prime.end() || b->second >= out.size()) continue;
      const ResponseRecord& creator = out[b->second];
      auto resource = tree_.created_by(creator.op);
      std::optional<std::string> id;
      if (resource && creator.ok()) {
        if (auto it = creator.extracted_ids.find(*resource); it != creator.extracted_ids.end()) {
          id = it->second;
        }
      }
      if (id) {
        value = *id;
      } else {
        rec.binding_fallback = true;
      }
    }

    rec.request = build_request(e, values);
    const std::int64_t before = clock_.now_ms();
    HttpResponse resp = target_.send(rec.request);
    clock_.on_request();
    rec.finished_ms = clock_.now_ms();
    rec.latency_ms = rec.finished_ms - before;
    rec.status = resp.status;
    rec.body = std::move(resp.body);
    if (rec.ok()) {
      if (auto resource = tree_.created_by(e.op)) {
        if (auto id = extract_instance_id(rec.body, *resource, extraction_)) {
          rec.extracted_ids[*resource] = *id;
        }
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

Seed raw_seed(const LogSlice& slice) {
  Seed seed;
  seed.seed_id = slice.slice_id;
  seed.entries = slice.entries;
  for (std::size_t j = 0; j < seed.entries.size(); ++j) {
    for (const auto& [name, inst] : seed.entries[j].phi) {
      if (inst) seed.unbound.insert({j, name});
    }
  }
  seed.origin.slice_id = slice.slice_id;
  seed.origin.strategy = slice.strategy;
  for (const auto& e : slice.entries) {
    seed.origin.instances.insert(e.instances.begin(), e.instances.end());
  }
  if (!slice.entries.empty()) {
    seed.origin.t_begin = slice.entries.front().t;
    seed.origin.t_end = slice.entries.back().t;
  }
  seed.origin.source = slice.entries;
  return seed;
}

}  // namespace restlog
