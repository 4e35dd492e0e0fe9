#pragma once

#include "codebench/study/service.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace codebench::study {

/// JSON-over-HTTP binding of StudyService. Every JSON body carries "session_id" (null when none).
///
///   GET  /health
///   GET  /api/problems
///   GET  /api/problems/{example_id}?session_id=...
///   POST /api/sessions                      {"participant_alias", "example_id"}
///   GET  /api/sessions/{id}
///   POST /api/sessions/{id}/submissions     {"code"}
///   POST /api/sessions/{id}/outcome         {"ratings", "used_external_resources", "gave_up"}
///   GET  /api/summary
///
/// Errors: 400 validation, 404 unknown id, 409 state conflict, 503 retryable grading failure.
class StudyServer {
public:
    explicit StudyServer(StudyService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~StudyServer();

    StudyServer(const StudyServer&) = delete;
    StudyServer& operator=(const StudyServer&) = delete;

    /// Binds and returns the port (port 0 picks a free one). Throws std::runtime_error on failure.
    int bind(const std::string& host, int port);
    /// Serves until stop(); blocking.
    void run();
    /// Serves on a background thread.
    void start();
    void stop();

private:
    void routes();

    StudyService& service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

}  // namespace codebench::study
