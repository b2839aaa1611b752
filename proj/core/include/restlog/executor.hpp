#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "restlog/enhancement.hpp"
#include "restlog/resource_analysis.hpp"
#include "restlog/spec_model.hpp"

namespace restlog {

struct HttpRequest {
  Method method = Method::Get;
  std::string target;  // path plus optional "?query", already encoded
  std::map<std::string, std::string> headers;
  std::string body;  // empty or a JSON document
};

struct HttpResponse {
  int status = 0;  // 0 marks a transport failure; `body` then holds the reason
  std::string body;
};

// Campaign time source. Executors tick it once per request.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() = 0;
  virtual void on_request() {}
};

class WallClock final : public Clock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  std::int64_t now_ms() override;

 private:
  std::chrono::steady_clock::time_point start_;
};

// Advances a fixed amount per request, so campaigns against in-process
// targets are reproducible regardless of host speed.
class SimulatedClock final : public Clock {
 public:
  explicit SimulatedClock(std::int64_t per_request_ms = 10) : step_(per_request_ms) {}
  std::int64_t now_ms() override { return now_; }
  void on_request() override { now_ += step_; }

 private:
  std::int64_t step_;
  std::int64_t now_ = 0;
};

class ExecutionTarget {
 public:
  virtual ~ExecutionTarget() = default;
  // Called before the first request of every sequence.
  virtual void begin_sequence() {}
  virtual HttpResponse send(const HttpRequest& request) = 0;
  virtual std::string describe() const = 0;
};

struct HttpTargetOptions {
  std::string base_url;  // "http://host:port[/prefix]"
  std::map<std::string, std::string> headers;
  int timeout_ms = 10000;
};

std::unique_ptr<ExecutionTarget> make_http_target(const HttpTargetOptions& options);

using RequestHandler = std::function<HttpResponse(const HttpRequest&)>;

// Runs every sequence against a fresh handler produced by `factory`.
class InProcessTarget final : public ExecutionTarget {
 public:
  InProcessTarget(std::function<RequestHandler()> factory, std::string name)
      : factory_(std::move(factory)), name_(std::move(name)) {}

  void begin_sequence() override { handler_ = factory_(); }
  HttpResponse send(const HttpRequest& request) override;
  std::string describe() const override { return "in-process:" + name_; }

 private:
  std::function<RequestHandler()> factory_;
  RequestHandler handler_;
  std::string name_;
};

struct AuthConfig {
  std::string header;  // e.g. "PRIVATE-TOKEN" or "Authorization"
  std::string token;
  std::string token_env;
  bool required = false;

  // Header to attach, if any. Throws Error(AuthMissing) when `required` and
  // neither `token` nor the environment variable supplies one.
  std::optional<std::pair<std::string, std::string>> resolve() const;
};

struct ExtractionConfig {
  std::vector<std::string> keys = {"id", "iid"};
  // Resource name → key paths tried before the defaults. Dots descend into
  // nested objects ("data.id").
  std::map<std::string, std::vector<std::string>> per_resource;
  std::map<std::string, std::string> singular_overrides = HeuristicOptions{}.singular_overrides;
};

std::optional<std::string> extract_instance_id(const std::string& body, const std::string& resource,
                                               const ExtractionConfig& cfg);

struct ResponseRecord {
  std::size_t entry_index = 0;
  OperationId op;
  int status = 0;
  std::string body;
  std::map<std::string, std::string> extracted_ids;
  std::int64_t latency_ms = 0;
  std::int64_t finished_ms = 0;  // campaign clock after the response arrived
  HttpRequest request;
  // Some bound param fell back to its raw logged value.
  bool binding_fallback = false;

  bool ok() const { return status >= 200 && status <= 299; }
};

class Executor {
 public:
  Executor(const ServiceSpec& spec, const ResourceTree& tree, ExecutionTarget& target, Clock& clock,
           AuthConfig auth = {}, ExtractionConfig extraction = {});

  // Entries run strictly in order. Transport failures are recorded with
  // status 0 and the sequence continues.
  std::vector<ResponseRecord> execute(const Seed& seed);

  ExecutionTarget& target() { return target_; }
  Clock& clock() { return clock_; }

 private:
  HttpRequest build_request(const LogEntry& entry,
                            const std::map<std::string, std::string>& values) const;

  const ServiceSpec& spec_;
  const ResourceTree& tree_;
  ExecutionTarget& target_;
  Clock& clock_;
  std::optional<std::pair<std::string, std::string>> auth_header_;
  ExtractionConfig extraction_;
};

// Seed that replays a slice verbatim: nothing prepended, every binding sends
// its logged value.
Seed raw_seed(const LogSlice& slice);

}  // namespace restlog
