#include "nof1/server.hpp"

#include <httplib.h>

namespace nof1 {

namespace {

using httplib::Request;
using httplib::Response;

void send(Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

Json body_json(const Request& req) {
  if (req.body.empty()) return Json::object();
  auto j = parse_json(req.body);
  require(j.is_object(), ErrorCode::kValidation, "request body must be a JSON object", "body");
  return j;
}

int query_int(const Request& req, const std::string& name) {
  require(req.has_param(name), ErrorCode::kValidation, "missing query parameter '" + name + "'",
          name);
  const auto text = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kValidation, "query parameter '" + name + "' must be an integer", name);
}

template <class F>
httplib::Server::Handler guarded(F f, int ok_status = 200) {
  return [f, ok_status](const Request& req, Response& res) {
    try {
      send(res, ok_status, f(req));
    } catch (const Error& e) {
      send(res, http_status_for(e.code()), error_payload(e));
    } catch (const nlohmann::json::exception& e) {
      send(res, 400, error_payload(Error(ErrorCode::kValidation, e.what())));
    } catch (const std::exception& e) {
      send(res, 500, error_payload(Error(ErrorCode::kInternal, e.what())));
    }
  };
}

std::optional<std::uint64_t> opt_seed(const Json& body) {
  if (!body.contains("seed")) return std::nullopt;
  return body.at("seed").get<std::uint64_t>();
}

}  // namespace

struct HttpServer::Impl {
  Engine& engine;
  httplib::Server server;

  explicit Impl(Engine& e) : engine(e) { routes(); }

  PatientProfile profile_from(const Json& body) const {
    if (body.contains("profile")) return decode<PatientProfile>(body.at("profile"));
    if (body.contains("patient_id")) return engine.patient(body.at("patient_id").get<std::string>());
    return PatientProfile{};
  }

  void routes() {
    const auto& cfg = engine.config();

    server.set_pre_routing_handler([&cfg](const Request& req, Response& res) {
      if (cfg.api_token.empty() || req.path == "/v1/health") {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      if (req.get_header_value("Authorization") != "Bearer " + cfg.api_token) {
        send(res, 401,
             error_payload(Error(ErrorCode::kAuthentication, "missing or invalid bearer token",
                                 "Authorization")));
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
    server.set_error_handler([](const Request& req, Response& res) {
      if (res.status == 404 && res.body.empty()) {
        send(res, 404,
             error_payload(Error(ErrorCode::kNotFound, "no route for " + req.method + " " + req.path)));
      }
    });

    server.Get("/v1/health", guarded([this](const Request&) {
      return versioned(Json{{"status", "ok"},
                            {"mode", service_mode_name(engine.mode())}});
    }));

    // --- device mode ---
    server.Post("/v1/patients", guarded([this](const Request& req) {
      auto body = body_json(req);
      const auto profile = decode<PatientProfile>(body.contains("profile") ? body.at("profile") : body);
      return versioned(engine.register_patient(profile));
    }, 201));

    server.Get(R"(/v1/patients/([^/]+))", guarded([this](const Request& req) {
      return versioned(Json{{"patient", engine.patient(req.matches[1])}});
    }));

    server.Get(R"(/v1/patients/([^/]+)/budget)", guarded([this](const Request& req) {
      return engine.budget(req.matches[1]);
    }));

    server.Post("/v1/candidates/rank", guarded([this](const Request& req) {
      const auto body = body_json(req);
      require(body.contains("profile") || body.contains("patient_id"), ErrorCode::kValidation,
              "need 'profile' or 'patient_id'", "profile");
      const auto samples = body.value("samples", engine.config().rank_samples);
      const auto seed = body.value("seed", engine.config().seed);
      return engine.rank(profile_from(body), samples, seed);
    }));

    server.Post("/v1/trigger/decide", guarded([this](const Request& req) {
      const auto body = body_json(req);
      Json policy_json = engine.config().policy;
      if (body.contains("policy")) {
        require(body.at("policy").is_object(), ErrorCode::kValidation, "policy must be an object",
                "policy");
        policy_json.update(body.at("policy"));
      }
      const auto policy = decode<TriggerPolicy>(policy_json);
      policy.validate();
      const auto profile = profile_from(body);
      std::vector<InterventionCandidate> candidates;
      if (body.contains("candidates")) {
        candidates = decode<std::vector<InterventionCandidate>>(body.at("candidates"));
      } else {
        require(body.contains("profile") || body.contains("patient_id"), ErrorCode::kValidation,
                "need 'candidates', 'profile' or 'patient_id'", "candidates");
        const auto ranked = engine.rank(profile, body.value("samples", engine.config().rank_samples),
                                        body.value("seed", engine.config().seed));
        candidates = decode<std::vector<InterventionCandidate>>(ranked.at("candidates"));
      }
      return engine.decide(candidates, policy, profile);
    }));

    server.Post("/v1/trials", guarded([this](const Request& req) {
      const auto body = body_json(req);
      const auto design = decode<TrialDesign>(body.at("design"));
      return versioned(engine.create_trial(body.value("trial_id", std::string()),
                                           body.at("patient_id").get<std::string>(), design));
    }, 201));

    server.Get(R"(/v1/trials/([^/]+))", guarded([this](const Request& req) {
      return engine.trial_view(req.matches[1]);
    }));

    server.Get(R"(/v1/trials/([^/]+)/assignment)", guarded([this](const Request& req) {
      return engine.assignment(req.matches[1], query_int(req, "day"));
    }));

    server.Post(R"(/v1/trials/([^/]+)/outcomes)", [this](const Request& req, Response& res) {
      guarded([this](const Request& r) {
        auto body = body_json(r);
        std::optional<std::string> key;
        if (r.has_header("Idempotency-Key")) {
          key = r.get_header_value("Idempotency-Key");
        } else if (body.contains("idempotency_key")) {
          key = body.at("idempotency_key").get<std::string>();
        }
        body.erase("idempotency_key");
        return versioned(engine.ingest(r.matches[1], decode<OutcomeRecord>(body), key));
      }, 201)(req, res);
      if (res.status == 201 && res.body.find("\"idempotent_replay\":true") != std::string::npos) {
        res.status = 200;
      }
    });

    server.Post(R"(/v1/trials/([^/]+)/complete)", guarded([this](const Request& req) {
      return versioned(engine.complete_trial(req.matches[1]));
    }));

    server.Post(R"(/v1/trials/([^/]+)/adaptive/next)", guarded([this](const Request& req) {
      return versioned(engine.assign_adaptive(req.matches[1], opt_seed(body_json(req))));
    }));

    server.Get(R"(/v1/trials/([^/]+)/posterior)", guarded([this](const Request& req) {
      return engine.posterior(req.matches[1]);
    }));

    server.Get(R"(/v1/trials/([^/]+)/report)", [this](const Request& req, Response& res) {
      if (req.get_param_value("format") == "tsv") {
        try {
          res.set_content(engine.report_tsv(req.matches[1]), "text/tab-separated-values");
        } catch (const Error& e) {
          send(res, http_status_for(e.code()), error_payload(e));
        }
        return;
      }
      guarded([this](const Request& r) { return engine.report(r.matches[1]); })(req, res);
    });

    server.Post("/v1/privacy/contribute", guarded([this](const Request& req) {
      const auto body = body_json(req);
      require(body.contains("consent"), ErrorCode::kValidation, "consent flag is required",
              "consent");
      const BudgetRequest request{body.value("epsilon", BudgetRequest{}.epsilon),
                                  body.value("delta", BudgetRequest{}.delta)};
      return versioned(engine.contribute(body.at("patient_id").get<std::string>(),
                                         body.at("trial_id").get<std::string>(),
                                         body.at("arm").get<std::string>(), request,
                                         body.at("consent").get<bool>(), opt_seed(body)));
    }));

    server.Get("/v1/privacy/outbox", guarded([this](const Request&) {
      return versioned(Json{{"outbox", engine.outbox()}});
    }));

    // --- aggregate mode ---
    server.Post("/v1/aggregate/contributions", guarded([this](const Request& req) {
      const auto body = body_json(req);
      std::vector<Contribution> cs;
      if (body.contains("contributions")) {
        cs = decode<std::vector<Contribution>>(body.at("contributions"));
      } else if (body.contains("contribution")) {
        cs.push_back(decode<Contribution>(body.at("contribution")));
      } else {
        cs.push_back(decode<Contribution>(body));
      }
      return versioned(engine.add_contributions(cs));
    }, 201));

    server.Get("/v1/aggregate/prior", guarded([this](const Request&) {
      return engine.aggregate_prior();
    }));
  }
};

HttpServer::HttpServer(Engine& engine) : impl_(std::make_unique<Impl>(engine)) {}
HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::serve() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace nof1
