#pragma once

// Management and annotation API over HTTP. Mutations need an
// Idempotency-Key header; a repeated key replays the first response.

#include <map>
#include <mutex>
#include <string>

#include <httplib.h>

#include "cvsops/service.hpp"

namespace cvsops::api {

inline int http_status(Errc code) {
  switch (code) {
    case Errc::kNotFound:
    case Errc::kUnknownAssignment:
      return 404;
    case Errc::kIllegalTransition:
    case Errc::kDuplicateRater:
    case Errc::kChainClosed:
    case Errc::kDuplicateAssessment:
    case Errc::kSequenceGap:
    case Errc::kNotQualified:
      return 409;
    default:
      return 400;
  }
}

inline json error_body(const std::string& error_class, const std::string& message) {
  return json{{"error", error_class}, {"message", message}};
}

class Api {
 public:
  explicit Api(Service& service) : service_(service) { service_.enable_read_views(); }

  void mount(httplib::Server& server) {
    namespace pl = orchestrator::payloads;
    using orchestrator::EntityKind;

    server.set_pre_routing_handler([this](const auto& req, auto& res) {
      return authorize(req, res) ? httplib::Server::HandlerResponse::Unhandled
                                 : httplib::Server::HandlerResponse::Handled;
    });

    server.Get("/health", [](const auto&, auto& res) { reply(res, 200, json{{"ok", true}}); });

    server.Get("/annotators", [this](const auto&, auto& res) {
      reply(res, 200, orchestrator::annotator_pool(*service_.view()));
    });
    mutate(server, "/annotators", [](const httplib::Request&, const json& body, auto& engine) {
      const auto id = body.at("annotator_id").get<std::string>();
      engine.submit(EntityKind::kAnnotator, id,
                    pl::AnnotatorRegistered{body.at("profile").get<AnnotatorProfile>()});
      return json(engine.state().annotators.at(AnnotatorId(id)));
    });
    mutate(server, R"(/annotators/([^/]+)/events)",
           [](const httplib::Request& req, const json& body, auto& engine) {
             const std::string id = req.matches[1];
             engine.submit(EntityKind::kAnnotator, id,
                           pl::AnnotatorStep{annotator_event_from_json(body)});
             return json(engine.state().annotators.at(AnnotatorId(id)));
           });

    server.Get("/videos", [this](const auto&, auto& res) {
      json out = json::array();
      for (const auto& [_, v] : service_.view()->videos) out.push_back(v);
      reply(res, 200, out);
    });
    mutate(server, "/videos", [](const httplib::Request&, const json& body, auto& engine) {
      auto record = body.get<video_flow::IntakeRecord>();
      const auto id = record.case_id.value;
      engine.submit(EntityKind::kVideo, id, pl::VideoRegistered{std::move(record)});
      return json(engine.state().videos.at(CaseId(id)));
    });
    mutate(server, R"(/videos/([^/]+)/events)",
           [](const httplib::Request& req, const json& body, auto& engine) {
             const std::string id = req.matches[1];
             engine.submit(EntityKind::kVideo, id, pl::VideoStep{video_event_from_json(body)});
             return json(engine.state().videos.at(CaseId(id)));
           });

    // Blinded: clip id, media and frame grid only.
    server.Get("/assignments", [this](const auto& req, auto& res) {
      if (!req.has_param("annotator")) {
        reply(res, 400, error_body("InvalidInput", "annotator query parameter required"));
        return;
      }
      const AnnotatorId who(req.get_param_value("annotator"));
      json out = json::array();
      for (const auto& [pending, view] : orchestrator::assignments_for(*service_.view(), who)) {
        json j = view;
        j["tick_id"] = pending.tick_id;
        j["due_at"] = pending.due_at;
        out.push_back(std::move(j));
      }
      reply(res, 200, out);
    });
    mutate(server, "/assignments/tick", [](const httplib::Request&, const json&, auto& engine) {
      return json(engine.issue_tick());
    });

    server.Get("/assessments", [this](const auto& req, auto& res) {
      const auto s = service_.view();
      json out = json::array();
      for (const auto& [clip, list] : s->assessments) {
        if (req.has_param("clip") && clip.value != req.get_param_value("clip")) continue;
        for (const auto& a : list) out.push_back(a);
      }
      reply(res, 200, out);
    });
    mutate(server, "/assessments", [](const httplib::Request&, const json& body, auto& engine) {
      auto a = body.get<Assessment>();
      engine.submit(EntityKind::kCoverage, orchestrator::kCoverageStream,
                    pl::AssessmentAccepted{a});
      return json(a);
    });

    server.Get("/submissions", [this](const auto&, auto& res) {
      json out = json::array();
      for (const auto& [team, sub] : service_.view()->submissions) {
        out.push_back(json{{"team_id", team}, {"name", sub.name}, {"is_baseline", sub.is_baseline},
                           {"clips", sub.clips.size()}});
      }
      reply(res, 200, out);
    });
    mutate(server, "/submissions", [](const httplib::Request&, const json& body, auto& engine) {
      auto sub = body.get<evaluation::Submission>();
      const auto team = sub.team_id.value;
      const auto clips = sub.clips.size();
      engine.submit(EntityKind::kSubmission, team, pl::SubmissionReceived{std::move(sub)});
      return json{{"team_id", team}, {"clips", clips}};
    });

    mutate(server, "/effects/run", [](const httplib::Request&, const json&, auto& engine) {
      return json(engine.run_due_effects());
    });

    server.Get("/metrics", [this](const auto&, auto& res) {
      reply(res, 200, metrics_json(campaign_metrics(*service_.view(), service_.config())));
    });
    server.Get("/leaderboard", [this](const auto&, auto& res) {
      const auto m = campaign_metrics(*service_.view(), service_.config());
      reply(res, 200, evaluation::leaderboard_json(evaluation::leaderboard(m.reports)));
    });
    server.Get("/funnel", [this](const auto&, auto& res) {
      reply(res, 200,
            annotator_flow::funnel_report(orchestrator::annotator_pool(*service_.view())));
    });

    server.set_exception_handler([](const auto&, auto& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        reply(res, http_status(e.code()), error_body(std::string(to_string(e.code())), e.what()));
      } catch (const json::exception& e) {
        reply(res, 400, error_body("InvalidInput", e.what()));
      } catch (const std::exception& e) {
        reply(res, 500, error_body("Internal", e.what()));
      }
    });
  }

 private:
  using Handler =
      std::function<json(const httplib::Request&, const json&, orchestrator::Engine&)>;

  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  bool authorize(const httplib::Request& req, httplib::Response& res) const {
    const auto& token = service_.config().api_token;
    if (token.empty() || req.path == "/health") return true;
    if (req.get_header_value("Authorization") == "Bearer " + token) return true;
    reply(res, 401, error_body("Unauthorized", "missing or wrong bearer token"));
    return false;
  }

  void mutate(httplib::Server& server, const std::string& pattern, Handler handler) {
    server.Post(pattern, [this, handler](const httplib::Request& req, httplib::Response& res) {
      const auto key = req.get_header_value("Idempotency-Key");
      if (key.empty()) {
        reply(res, 400, error_body("InvalidInput", "Idempotency-Key header required"));
        return;
      }
      const auto cache_key = req.path + "\n" + key;
      service_.write([&](orchestrator::Engine& engine) {
        if (auto it = replies_.find(cache_key); it != replies_.end()) {
          reply(res, it->second.first, it->second.second);
          res.set_header("Idempotent-Replay", "true");
          return;
        }
        int status = 201;
        json body;
        try {
          body = handler(req, req.body.empty() ? json::object() : json::parse(req.body), engine);
        } catch (const Error& e) {
          status = http_status(e.code());
          body = error_body(std::string(to_string(e.code())), e.what());
        } catch (const json::exception& e) {
          status = 400;
          body = error_body("InvalidInput", e.what());
        }
        replies_[cache_key] = {status, body};
        reply(res, status, body);
      });
    });
  }

  Service& service_;
  std::map<std::string, std::pair<int, json>> replies_;  // guarded by the writer lock
};

}  // namespace cvsops::api
