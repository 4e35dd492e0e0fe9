#include "codebench/study/http.hpp"

#include <httplib.h>

namespace codebench::study {

namespace {

json parse_body(const httplib::Request& req)
{
    if (req.body.empty()) return json::object();
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw ValidationError("request body must be a JSON object");
        return j;
    } catch (const json::parse_error&) {
        throw ValidationError("request body is not valid JSON");
    }
}

std::string string_field(const json& body, const std::string& name)
{
    auto it = body.find(name);
    if (it == body.end() || !it->is_string()) throw ValidationError("missing string field " + name);
    return it->get<std::string>();
}

bool bool_field(const json& body, const std::string& name)
{
    auto it = body.find(name);
    if (it == body.end() || it->is_null()) return false;
    if (!it->is_boolean()) throw ValidationError("field " + name + " must be a boolean");
    return it->get<bool>();
}

void reply(httplib::Response& res, int status, json body, const json& session_id)
{
    body["session_id"] = session_id;
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

// Runs a handler and maps service exceptions onto status codes.
template <typename F>
httplib::Server::Handler guarded(F f)
{
    return [f](const httplib::Request& req, httplib::Response& res) {
        json session_id = nullptr;
        if (req.has_param("session_id")) session_id = req.get_param_value("session_id");
        if (req.path_params.count("id")) session_id = req.path_params.at("id");
        try {
            f(req, res, session_id);
        } catch (const ValidationError& e) {
            reply(res, 400, {{"error", e.what()}}, session_id);
        } catch (const NotFound& e) {
            reply(res, 404, {{"error", e.what()}}, session_id);
        } catch (const Conflict& e) {
            reply(res, 409, {{"error", e.what()}}, session_id);
        } catch (const RetryableError& e) {
            reply(res, 503, {{"error", e.what()}, {"retryable", true}}, session_id);
        } catch (const std::invalid_argument& e) {
            reply(res, 400, {{"error", e.what()}}, session_id);
        } catch (const std::exception& e) {
            reply(res, 500, {{"error", e.what()}}, session_id);
        }
    };
}

}  // namespace

StudyServer::StudyServer(StudyService& service, std::optional<std::filesystem::path> static_dir)
    : service_(service), server_(std::make_unique<httplib::Server>())
{
    routes();
    if (static_dir) {
        if (!server_->set_mount_point("/", static_dir->string()))
            throw std::runtime_error("static directory not found: " + static_dir->string());
    }
}

StudyServer::~StudyServer()
{
    stop();
}

void StudyServer::routes()
{
    auto& s = *server_;
    s.Get("/health", guarded([](const auto&, auto& res, const json& sid) { reply(res, 200, {{"status", "ok"}}, sid); }));

    s.Get("/api/problems", guarded([this](const auto&, auto& res, const json& sid) {
        reply(res, 200, {{"examples", service_.example_ids()}}, sid);
    }));

    s.Get("/api/problems/:example_id", guarded([this](const httplib::Request& req, auto& res, const json& sid) {
        reply(res, 200, to_json(service_.serve_problem(req.path_params.at("example_id"))), sid);
    }));

    s.Post("/api/sessions", guarded([this](const httplib::Request& req, auto& res, const json&) {
        auto body = parse_body(req);
        auto session = service_.open_session(string_field(body, "participant_alias"), string_field(body, "example_id"));
        auto problem = to_json(service_.serve_problem(session.example_id));
        reply(res, 201, {{"example_id", session.example_id}, {"problem", problem}}, session.session_id);
    }));

    s.Get("/api/sessions/:id", guarded([this](const httplib::Request& req, auto& res, const json& sid) {
        reply(res, 200, service_.public_session(req.path_params.at("id")), sid);
    }));

    s.Post("/api/sessions/:id/submissions", guarded([this](const httplib::Request& req, auto& res, const json& sid) {
        auto body = parse_body(req);
        auto r = service_.submit(req.path_params.at("id"), string_field(body, "code"));
        json reports = json::array();
        for (const auto& rep : r.reports) reports.push_back(executor::to_json(rep));
        reply(res, 200,
              {{"submission_index", r.submission_index},
               {"verdict", r.passed ? "pass" : "fail"},
               {"reports", reports},
               {"feedback", r.feedback},
               {"solved", r.solved}},
              sid);
    }));

    s.Post("/api/sessions/:id/outcome", guarded([this](const httplib::Request& req, auto& res, const json& sid) {
        auto body = parse_body(req);
        std::optional<Ratings> ratings;
        if (body.contains("ratings") && !body.at("ratings").is_null()) ratings = ratings_from_json(body.at("ratings"));
        if (!ratings) throw ValidationError("ratings are required");
        service_.record_outcome(req.path_params.at("id"), ratings, bool_field(body, "used_external_resources"),
                                bool_field(body, "gave_up"));
        reply(res, 200, service_.public_session(req.path_params.at("id")), sid);
    }));

    s.Get("/api/summary", guarded([this](const auto&, auto& res, const json& sid) {
        try {
            reply(res, 200, service_.summary().to_json(), sid);
        } catch (const std::invalid_argument&) {
            reply(res, 200, {{"sessions", 0}}, sid);
        }
    }));
}

int StudyServer::bind(const std::string& host, int port)
{
    int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void StudyServer::run()
{
    server_->listen_after_bind();
}

void StudyServer::start()
{
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void StudyServer::stop()
{
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace codebench::study
