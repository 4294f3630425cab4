#pragma once

#include <memory>
#include <string>

#include "prefrank/service/session.hpp"

namespace prefrank::service {

// JSON-over-HTTP front end for a Session:
//   GET  /next-pair   200 {pair_id, item_a, item_b}; 409 all pairs pending;
//                     503 while no session is attached
//   POST /comparison  {pair_id, outcome} -> 200 {accepted, annotations_total,
//                     retrain_triggered}; 404 unknown pair, 422 invalid
//                     outcome, 409 duplicate, 400 malformed body
//   GET  /ratings     200 [{id, mean, epistemic, aleatoric}]; 204 before the
//                     first retrain
//   GET  /status      200 {annotations_total, rounds_completed, strategy,
//                     training, last_spearman_vs_self}
// Items carry {id, features} plus a `hint` {x, y} in [0, 1] for 2-D data.
class AnnotationServer {
 public:
  AnnotationServer();
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Until a session is attached every session endpoint answers 503.
  void Attach(std::shared_ptr<Session> session);

  // Binds `host` (port 0 picks a free port) and serves on a background
  // thread. Returns the bound port; throws std::runtime_error on failure.
  int Start(const std::string& host, int port);
  // Binds and serves on the calling thread until Stop() is called.
  void Run(const std::string& host, int port);
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace prefrank::service
