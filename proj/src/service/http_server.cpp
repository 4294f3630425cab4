#include "prefrank/service/http_server.hpp"

#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include <httplib.h>

namespace prefrank::service {

namespace {

constexpr const char* kJson = "application/json";

void SendJson(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void SendError(httplib::Response& res, int status, const std::string& message) {
  SendJson(res, status, {{"error", message}});
}

}  // namespace

struct AnnotationServer::Impl {
  httplib::Server server;
  std::thread thread;

  std::mutex mutex;
  std::shared_ptr<Session> session;
  // Per-column bounds for the 2-D render hint.
  std::vector<double> lo;
  std::vector<double> hi;

  std::shared_ptr<Session> Current() {
    std::lock_guard<std::mutex> lock(mutex);
    return session;
  }

  nlohmann::json Item(const Session& s, ItemId id) {
    const auto& x = s.features();
    const auto row = static_cast<diffcore::Index>(id);
    std::vector<double> features(static_cast<std::size_t>(x.cols()));
    for (diffcore::Index j = 0; j < x.cols(); ++j) features[static_cast<std::size_t>(j)] = x(row, j);
    nlohmann::json item{{"id", id}, {"features", features}};
    if (x.cols() == 2) {
      auto scale = [&](int j) {
        const double span = hi[static_cast<std::size_t>(j)] - lo[static_cast<std::size_t>(j)];
        return span > 0.0 ? (x(row, j) - lo[static_cast<std::size_t>(j)]) / span : 0.5;
      };
      item["hint"] = {{"x", scale(0)}, {"y", scale(1)}};
    }
    return item;
  }

  void Routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    server.Get("/next-pair", [this](const httplib::Request&, httplib::Response& res) {
      const auto s = Current();
      if (!s) return SendError(res, 503, "session is loading");
      const auto pair = s->NextPair();
      if (!pair) return SendError(res, 409, "every candidate pair is pending");
      SendJson(res, 200, {{"pair_id", pair->pair_id}, {"item_a", Item(*s, pair->a)}, {"item_b", Item(*s, pair->b)}});
    });

    server.Post("/comparison", [this](const httplib::Request& req, httplib::Response& res) {
      const auto s = Current();
      if (!s) return SendError(res, 503, "session is loading");
      const auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) return SendError(res, 400, "body must be a JSON object");
      if (!body.contains("pair_id") || !body["pair_id"].is_number_unsigned()) {
        return SendError(res, 422, "pair_id must be a non-negative integer");
      }
      if (!body.contains("outcome") || !body["outcome"].is_number()) {
        return SendError(res, 422, "outcome must be 1, 0.5 or 0");
      }
      try {
        const auto r = s->Submit(body["pair_id"].get<std::uint64_t>(), body["outcome"].get<double>());
        SendJson(res, 200,
                 {{"accepted", r.accepted},
                  {"annotations_total", r.annotations_total},
                  {"retrain_triggered", r.retrain_triggered}});
      } catch (const SubmitError& e) {
        switch (e.kind()) {
          case SubmitErrorKind::kUnknownPair: return SendError(res, 404, e.what());
          case SubmitErrorKind::kInvalidOutcome: return SendError(res, 422, e.what());
          case SubmitErrorKind::kDuplicate: return SendError(res, 409, e.what());
        }
      }
    });

    server.Get("/ratings", [this](const httplib::Request&, httplib::Response& res) {
      const auto s = Current();
      if (!s) return SendError(res, 503, "session is loading");
      const auto snap = s->snapshot();
      if (!snap) {
        res.status = 204;
        return;
      }
      SendJson(res, 200, RatingsJson(snap->estimates));
    });

    server.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
      const auto s = Current();
      if (!s) return SendError(res, 503, "session is loading");
      const auto st = s->Status();
      SendJson(res, 200,
               {{"annotations_total", st.annotations_total},
                {"rounds_completed", st.rounds_completed},
                {"strategy", st.strategy},
                {"training", st.training},
                {"last_spearman_vs_self", st.last_spearman_vs_self}});
    });

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        SendError(res, 500, e.what());
      } catch (...) {
        SendError(res, 500, "unknown error");
      }
    });
  }
};

AnnotationServer::AnnotationServer() : impl_(std::make_unique<Impl>()) { impl_->Routes(); }

AnnotationServer::~AnnotationServer() { Stop(); }

void AnnotationServer::Attach(std::shared_ptr<Session> session) {
  const auto& x = session->features();
  std::vector<double> lo(static_cast<std::size_t>(x.cols()));
  std::vector<double> hi(static_cast<std::size_t>(x.cols()));
  for (diffcore::Index j = 0; j < x.cols(); ++j) {
    lo[static_cast<std::size_t>(j)] = x.col(j).minCoeff();
    hi[static_cast<std::size_t>(j)] = x.col(j).maxCoeff();
  }
  std::lock_guard<std::mutex> lock(impl_->mutex);
  impl_->lo = std::move(lo);
  impl_->hi = std::move(hi);
  impl_->session = std::move(session);
}

int AnnotationServer::Start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void AnnotationServer::Run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw std::runtime_error("cannot serve on " + host + ":" + std::to_string(port));
}

void AnnotationServer::Stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace prefrank::service
