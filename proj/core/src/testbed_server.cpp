#include <mutex>

#include <httplib.h>

#include "restlog/error.hpp"
#include "restlog/testbed.hpp"

namespace restlog::gitlite {

struct LiveServer::Impl {
  explicit Impl(Options options) : service(std::move(options)) {}

  Service service;
  std::mutex mu;
  httplib::Server server;
};

LiveServer::LiveServer(Options options) : impl_(std::make_unique<Impl>(std::move(options))) {
  auto handle = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r;
    auto m = parse_method(req.method);
    if (!m) {
      res.status = 405;
      res.set_content(R"({"message":"405 Method Not Allowed"})", "application/json");
      return;
    }
    r.method = *m;
    r.target = req.target;
    r.body = req.body;
    HttpResponse out;
    {
      std::lock_guard lock(impl_->mu);
      out = impl_->service.handle(r);
    }
    res.status = out.status;
    res.set_content(out.body, "application/json");
  };
  auto& s = impl_->server;
  s.Get(".*", handle);
  s.Post(".*", handle);
  s.Put(".*", handle);
  s.Patch(".*", handle);
  s.Delete(".*", handle);
}

LiveServer::~LiveServer() { stop(); }

int LiveServer::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                        : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) {
    throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void LiveServer::run() { impl_->server.listen_after_bind(); }

void LiveServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace restlog::gitlite
