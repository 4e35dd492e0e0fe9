#pragma once

#include "codebench/eval/harness.hpp"
#include "codebench/executor/executor.hpp"
#include "codebench/pipeline/example.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace codebench::study {

class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Request violates the session state machine (closed, busy, wrong order).
class Conflict : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Grading failed for infrastructure reasons; the submission was not counted.
class RetryableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Ratings {
    int difficulty = 0;
    int instruction_clarity = 0;
    int test_quality = 0;
    int docstring_as_instruction = 0;

    static const std::vector<std::string>& names();
    void validate() const;
};

struct Submission {
    std::string timestamp;
    std::string code;
    std::vector<executor::ExecutionReport> reports;
    bool passed = false;
};

struct StudySession {
    std::string session_id;
    std::string participant_alias;
    std::string example_id;
    std::vector<Submission> submissions;
    bool solved = false;
    bool gave_up = false;
    bool used_external_resources = false;
    std::optional<Ratings> ratings;
    bool finalized = false;
    std::uint64_t last_seq = 0;  // last persisted event applied
};

json to_json(const Ratings& r);
Ratings ratings_from_json(const json& j);
json to_json(const StudySession& s);
StudySession session_from_json(const json& j);

struct ProblemView {
    std::string example_id;
    std::string qualified_name;
    std::string function_header;
    pipeline::Instruction instruction;
    std::string context;  // slot replaced by header, docstring and `...`
    std::string stub;     // editor prefill
};

json to_json(const ProblemView& v);

struct SubmissionResult {
    std::string session_id;
    std::size_t submission_index = 0;  // 0-based
    bool passed = false;
    std::vector<executor::ExecutionReport> reports;  // withheld fragments redacted
    std::string feedback;                            // same rendering as the refinement loop
    bool solved = false;
};

struct StudySummary {
    std::size_t sessions = 0;
    std::size_t solved = 0;
    double solve_rate = 0.0;
    std::map<std::size_t, std::size_t> revisions_to_solve;  // submissions - 1 -> sessions
    double external_resource_rate = 0.0;
    std::map<std::string, double> mean_ratings;
    std::vector<double> accuracy_by_round;

    [[nodiscard]] json to_json() const;
};

/// Summary over finalized sessions. Throws std::invalid_argument("no data") when none.
StudySummary study_summary(const std::vector<StudySession>& sessions, std::size_t rounds = 5);

struct StudyConfig {
    std::chrono::duration<double> timeout = executor::evaluation_timeout;
    std::optional<std::filesystem::path> state_dir;  // persistence disabled when empty
    std::size_t snapshot_every = 20;                 // events between snapshots
    bool full_stderr = true;                         // study feedback shows the whole stderr tail
    std::size_t summary_rounds = 5;
};

/// Session state machine and persistence. Thread-safe; one grading run per session at a time.
class StudyService {
public:
    StudyService(std::vector<pipeline::EvalExample> dataset, executor::Executor& executor,
                 std::shared_ptr<const executor::Environment> env, StudyConfig config = {});
    ~StudyService();

    StudyService(const StudyService&) = delete;
    StudyService& operator=(const StudyService&) = delete;

    [[nodiscard]] ProblemView serve_problem(const std::string& example_id) const;
    [[nodiscard]] std::vector<std::string> example_ids() const;

    StudySession open_session(const std::string& participant_alias, const std::string& example_id);
    SubmissionResult submit(const std::string& session_id, const std::string& code);
    StudySession record_outcome(const std::string& session_id, const std::optional<Ratings>& ratings,
                                bool used_external, bool gave_up);

    [[nodiscard]] StudySession session(const std::string& session_id) const;
    [[nodiscard]] std::vector<StudySession> sessions() const;
    [[nodiscard]] StudySummary summary() const;

    /// Session as shown to clients: no submitted code, reports redacted.
    [[nodiscard]] json public_session(const std::string& session_id) const;

    /// Writes the snapshot now.
    void snapshot();

private:
    const pipeline::EvalExample& example(const std::string& id) const;
    const eval::TestLeakGuard& guard(const std::string& example_id) const;
    executor::ExecutionReport redact(const executor::ExecutionReport& r, const eval::TestLeakGuard& g) const;
    void persist(json event);  // caller holds mutex_
    void snapshot_locked();
    void recover();
    void apply(const json& event);

    std::vector<pipeline::EvalExample> dataset_;
    std::map<std::string, std::size_t> index_;
    std::map<std::string, std::unique_ptr<eval::TestLeakGuard>> guards_;
    executor::Executor& executor_;
    std::shared_ptr<const executor::Environment> env_;
    StudyConfig config_;

    mutable std::mutex mutex_;
    std::map<std::string, StudySession> sessions_;
    std::map<std::string, bool> grading_;
    std::uint64_t seq_ = 0;
    std::size_t since_snapshot_ = 0;
    std::unique_ptr<JsonlAppender> log_;
};

/// Text a client sees for a problem (used by the information-hiding checks).
std::string render_problem_text(const ProblemView& v);

/// Random 128-bit hex token.
std::string new_session_id();

}  // namespace codebench::study
