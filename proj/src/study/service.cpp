#include "codebench/study/service.hpp"

#include "codebench/llm/transcript.hpp"
#include "codebench/pipeline/slots.hpp"
#include "codebench/util/text.hpp"

#include <fmt/format.h>
#include <openssl/rand.h>

#include <limits>

namespace codebench::study {

namespace {

const char* events_file = "sessions.events.jsonl";
const char* snapshot_file = "sessions.jsonl";

json submission_json(const Submission& s)
{
    json reports = json::array();
    for (const auto& r : s.reports) reports.push_back(executor::to_json(r));
    return {{"timestamp", s.timestamp}, {"code", s.code}, {"reports", reports}, {"verdict", s.passed ? "pass" : "fail"}};
}

Submission submission_from_json(const json& j)
{
    Submission s;
    s.timestamp = j.at("timestamp").get<std::string>();
    s.code = j.at("code").get<std::string>();
    for (const auto& r : j.at("reports")) s.reports.push_back(executor::report_from_json(r));
    s.passed = j.at("verdict").get<std::string>() == "pass";
    return s;
}

int rating_field(const json& j, const std::string& name)
{
    if (!j.contains(name)) throw ValidationError("missing rating: " + name);
    const auto& v = j.at(name);
    if (!v.is_number_integer()) throw ValidationError("rating " + name + " must be an integer from 1 to 5");
    return v.get<int>();
}

}  // namespace

const std::vector<std::string>& Ratings::names()
{
    static const std::vector<std::string> n = {"difficulty", "instruction_clarity", "test_quality",
                                               "docstring_as_instruction"};
    return n;
}

void Ratings::validate() const
{
    const int values[] = {difficulty, instruction_clarity, test_quality, docstring_as_instruction};
    for (std::size_t i = 0; i < 4; ++i) {
        if (values[i] < 1 || values[i] > 5)
            throw ValidationError(fmt::format("rating {} must be between 1 and 5, got {}", names()[i], values[i]));
    }
}

json to_json(const Ratings& r)
{
    return {{"difficulty", r.difficulty},
            {"instruction_clarity", r.instruction_clarity},
            {"test_quality", r.test_quality},
            {"docstring_as_instruction", r.docstring_as_instruction}};
}

Ratings ratings_from_json(const json& j)
{
    if (!j.is_object()) throw ValidationError("ratings must be an object");
    Ratings r;
    r.difficulty = rating_field(j, "difficulty");
    r.instruction_clarity = rating_field(j, "instruction_clarity");
    r.test_quality = rating_field(j, "test_quality");
    r.docstring_as_instruction = rating_field(j, "docstring_as_instruction");
    r.validate();
    return r;
}

json to_json(const StudySession& s)
{
    json subs = json::array();
    for (const auto& sub : s.submissions) subs.push_back(submission_json(sub));
    return {{"session_id", s.session_id},
            {"participant_alias", s.participant_alias},
            {"example_id", s.example_id},
            {"submissions", subs},
            {"solved", s.solved},
            {"gave_up", s.gave_up},
            {"used_external_resources", s.used_external_resources},
            {"ratings", s.ratings ? to_json(*s.ratings) : json(nullptr)},
            {"finalized", s.finalized},
            {"last_seq", s.last_seq}};
}

StudySession session_from_json(const json& j)
{
    StudySession s;
    s.session_id = j.at("session_id").get<std::string>();
    s.participant_alias = j.at("participant_alias").get<std::string>();
    s.example_id = j.at("example_id").get<std::string>();
    for (const auto& sub : j.at("submissions")) s.submissions.push_back(submission_from_json(sub));
    s.solved = j.at("solved").get<bool>();
    s.gave_up = j.at("gave_up").get<bool>();
    s.used_external_resources = j.at("used_external_resources").get<bool>();
    if (!j.at("ratings").is_null()) s.ratings = ratings_from_json(j.at("ratings"));
    s.finalized = j.at("finalized").get<bool>();
    s.last_seq = j.value("last_seq", std::uint64_t{0});
    return s;
}

json to_json(const ProblemView& v)
{
    return {{"example_id", v.example_id},
            {"qualified_name", v.qualified_name},
            {"function_header", v.function_header},
            {"instruction", pipeline::to_json(v.instruction)},
            {"context", v.context},
            {"stub", v.stub}};
}

std::string render_problem_text(const ProblemView& v)
{
    return v.qualified_name + "\n" + v.function_header + "\n" + v.instruction.functionality + "\n" +
           v.instruction.inputs + "\n" + v.instruction.outputs + "\n" + v.context + "\n" + v.stub;
}

std::string new_session_id()
{
    unsigned char bytes[16];
    if (RAND_bytes(bytes, sizeof bytes) != 1) throw std::runtime_error("random source unavailable");
    std::string out;
    for (unsigned char b : bytes) out += fmt::format("{:02x}", b);
    return out;
}

json StudySummary::to_json() const
{
    json hist = json::object();
    for (const auto& [k, v] : revisions_to_solve) hist[std::to_string(k)] = v;
    return {{"sessions", sessions},
            {"solved", solved},
            {"solve_rate", solve_rate},
            {"revisions_to_solve", hist},
            {"external_resource_rate", external_resource_rate},
            {"mean_ratings", mean_ratings},
            {"accuracy_by_round", accuracy_by_round}};
}

StudySummary study_summary(const std::vector<StudySession>& all, std::size_t rounds)
{
    std::vector<const StudySession*> done;
    for (const auto& s : all) {
        if (s.finalized) done.push_back(&s);
    }
    if (done.empty()) throw std::invalid_argument("no data");
    StudySummary sum;
    sum.sessions = done.size();
    std::size_t external = 0, rated = 0;
    std::map<std::string, double> totals;
    std::vector<std::optional<std::size_t>> solved_rounds;
    for (const auto* s : done) {
        if (s->solved) {
            ++sum.solved;
            ++sum.revisions_to_solve[s->submissions.size() - 1];
            solved_rounds.emplace_back(s->submissions.size() - 1);
        } else {
            solved_rounds.emplace_back(std::nullopt);
        }
        external += s->used_external_resources;
        if (s->ratings) {
            ++rated;
            totals["difficulty"] += s->ratings->difficulty;
            totals["instruction_clarity"] += s->ratings->instruction_clarity;
            totals["test_quality"] += s->ratings->test_quality;
            totals["docstring_as_instruction"] += s->ratings->docstring_as_instruction;
        }
    }
    sum.solve_rate = double(sum.solved) / double(sum.sessions);
    sum.external_resource_rate = double(external) / double(sum.sessions);
    for (const auto& name : Ratings::names()) sum.mean_ratings[name] = rated ? totals[name] / double(rated) : 0.0;
    sum.accuracy_by_round = eval::accuracy_by_round(solved_rounds, rounds);
    return sum;
}

StudyService::StudyService(std::vector<pipeline::EvalExample> dataset, executor::Executor& executor,
                           std::shared_ptr<const executor::Environment> env, StudyConfig config)
    : dataset_(std::move(dataset)), executor_(executor), env_(std::move(env)), config_(std::move(config))
{
    if (!env_) throw std::invalid_argument("study service needs an environment");
    for (std::size_t i = 0; i < dataset_.size(); ++i) {
        const auto& ex = dataset_[i];
        if (!index_.emplace(ex.id, i).second) throw std::invalid_argument("duplicate example id " + ex.id);
        std::vector<std::string> secrets = ex.test_codes();
        secrets.push_back(ex.target.size() > ex.function_header.size() ? ex.target.substr(ex.function_header.size())
                                                                        : ex.target);
        guards_[ex.id] = std::make_unique<eval::TestLeakGuard>(secrets, render_problem_text(serve_problem(ex.id)));
    }
    if (config_.state_dir) {
        std::filesystem::create_directories(*config_.state_dir);
        recover();
        log_ = std::make_unique<JsonlAppender>(*config_.state_dir / events_file);
    }
}

StudyService::~StudyService()
{
    try {
        if (config_.state_dir && since_snapshot_ > 0) snapshot();
    } catch (...) {
    }
}

const pipeline::EvalExample& StudyService::example(const std::string& id) const
{
    auto it = index_.find(id);
    if (it == index_.end()) throw NotFound("unknown example " + id);
    return dataset_[it->second];
}

const eval::TestLeakGuard& StudyService::guard(const std::string& example_id) const
{
    return *guards_.at(example_id);
}

ProblemView StudyService::serve_problem(const std::string& example_id) const
{
    const auto& ex = example(example_id);
    ProblemView v;
    v.example_id = ex.id;
    v.qualified_name = ex.qualified_name();
    v.function_header = ex.function_header;
    v.instruction = ex.instruction;
    std::string indent = pipeline::slot_indent(ex.context);
    v.context = pipeline::replace_slot(ex.context, eval::render_stub(ex, indent));
    v.stub = eval::render_stub(ex, "");
    return v;
}

std::vector<std::string> StudyService::example_ids() const
{
    std::vector<std::string> ids;
    for (const auto& ex : dataset_) ids.push_back(ex.id);
    return ids;
}

void StudyService::persist(json event)
{
    event["seq"] = ++seq_;
    apply(event);
    if (!log_) return;
    log_->append(event);
    if (++since_snapshot_ >= config_.snapshot_every) snapshot_locked();
}

void StudyService::apply(const json& e)
{
    std::uint64_t seq = e.at("seq").get<std::uint64_t>();
    seq_ = std::max(seq_, seq);
    std::string kind = e.at("event").get<std::string>();
    if (kind == "open") {
        auto s = session_from_json(e.at("session"));
        auto it = sessions_.find(s.session_id);
        if (it != sessions_.end() && it->second.last_seq >= seq) return;
        s.last_seq = seq;
        sessions_[s.session_id] = std::move(s);
        return;
    }
    auto it = sessions_.find(e.at("session_id").get<std::string>());
    if (it == sessions_.end()) throw std::runtime_error("session log refers to an unknown session");
    auto& s = it->second;
    if (s.last_seq >= seq) return;
    s.last_seq = seq;
    if (kind == "submission") {
        s.submissions.push_back(submission_from_json(e.at("submission")));
        s.solved = s.solved || s.submissions.back().passed;
    } else if (kind == "outcome") {
        if (!e.at("ratings").is_null()) s.ratings = ratings_from_json(e.at("ratings"));
        s.used_external_resources = e.at("used_external").get<bool>();
        s.gave_up = e.at("gave_up").get<bool>();
        s.finalized = true;
    } else {
        throw std::runtime_error("unknown session event " + kind);
    }
}

void StudyService::recover()
{
    auto snap = *config_.state_dir / snapshot_file;
    if (std::filesystem::exists(snap)) {
        auto r = read_jsonl(snap);
        if (r.malformed) throw std::runtime_error("corrupt session snapshot " + snap.string());
        for (const auto& j : r.records) {
            auto s = session_from_json(j);
            seq_ = std::max(seq_, s.last_seq);
            sessions_[s.session_id] = std::move(s);
        }
    }
    auto log = *config_.state_dir / events_file;
    if (std::filesystem::exists(log)) {
        // A torn final line after a crash is skipped; its submission was never acknowledged.
        for (const auto& e : read_jsonl(log).records) apply(e);
    }
}

void StudyService::snapshot()
{
    std::lock_guard lock(mutex_);
    snapshot_locked();
}

void StudyService::snapshot_locked()
{
    if (!config_.state_dir) return;
    std::vector<json> records;
    for (const auto& [id, s] : sessions_) records.push_back(to_json(s));
    auto tmp = *config_.state_dir / (std::string(snapshot_file) + ".tmp");
    write_jsonl(tmp, records);
    std::filesystem::rename(tmp, *config_.state_dir / snapshot_file);
    since_snapshot_ = 0;
}

StudySession StudyService::open_session(const std::string& participant_alias, const std::string& example_id)
{
    example(example_id);
    if (text::is_blank(participant_alias)) throw ValidationError("participant_alias is required");
    StudySession s;
    s.session_id = new_session_id();
    s.participant_alias = participant_alias;
    s.example_id = example_id;
    std::lock_guard lock(mutex_);
    persist({{"event", "open"}, {"session", to_json(s)}});
    return sessions_.at(s.session_id);
}

executor::ExecutionReport StudyService::redact(const executor::ExecutionReport& r, const eval::TestLeakGuard& g) const
{
    auto out = r;
    out.error = g.redact(r.error);
    out.stderr_tail = g.redact(r.stderr_tail);
    return out;
}

SubmissionResult StudyService::submit(const std::string& session_id, const std::string& code)
{
    std::string example_id;
    {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(session_id);
        if (it == sessions_.end()) throw NotFound("unknown session " + session_id);
        const auto& s = it->second;
        if (s.finalized || s.solved || s.gave_up) throw Conflict("session closed");
        if (grading_[session_id]) throw Conflict("a submission is already being graded");
        if (text::is_blank(code)) throw ValidationError("empty submission");
        grading_[session_id] = true;
        example_id = s.example_id;
    }
    struct Release {
        StudyService* self;
        const std::string& id;
        ~Release()
        {
            std::lock_guard lock(self->mutex_);
            self->grading_[id] = false;
        }
    } release{this, session_id};

    const auto& ex = example(example_id);
    eval::EvalConfig cfg;
    cfg.timeout = config_.timeout;
    // Participants type raw code; fencing it sends it down the exact path model completions take.
    std::string completion = code.find("```") == std::string::npos ? "```python\n" + text::with_final_newline(code) + "```"
                                                                   : code;
    eval::GenerationSample graded;
    try {
        graded = eval::score_completion(ex, completion, executor_, *env_, cfg);
    } catch (const InfrastructureError& e) {
        throw RetryableError(std::string("grading failed, submission not counted: ") + e.what());
    }

    Submission sub{llm::utc_timestamp(), code, graded.reports, graded.passed};
    SubmissionResult result;
    result.session_id = session_id;
    result.passed = graded.passed;
    const auto& g = guard(example_id);
    for (const auto& r : graded.reports) result.reports.push_back(redact(r, g));
    result.feedback = graded.reports.empty()
                          ? std::string("No code was found in the submission.\n")
                          : eval::render_feedback(graded.reports, g,
                                                  config_.full_stderr ? std::numeric_limits<std::size_t>::max() : 20);
    std::lock_guard lock(mutex_);
    persist({{"event", "submission"}, {"session_id", session_id}, {"submission", submission_json(sub)}});
    const auto& s = sessions_.at(session_id);
    result.submission_index = s.submissions.size() - 1;
    result.solved = s.solved;
    return result;
}

StudySession StudyService::record_outcome(const std::string& session_id, const std::optional<Ratings>& ratings,
                                          bool used_external, bool gave_up)
{
    if (ratings) ratings->validate();
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw NotFound("unknown session " + session_id);
    const auto& s = it->second;
    if (s.finalized) throw Conflict("session closed");
    if (grading_[session_id]) throw Conflict("a submission is already being graded");
    if (s.solved && gave_up) throw Conflict("session already solved");
    if (!s.solved && !gave_up) throw Conflict("solve the problem or give up before rating");
    persist({{"event", "outcome"},
             {"session_id", session_id},
             {"ratings", ratings ? to_json(*ratings) : json(nullptr)},
             {"used_external", used_external},
             {"gave_up", gave_up}});
    return sessions_.at(session_id);
}

StudySession StudyService::session(const std::string& session_id) const
{
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw NotFound("unknown session " + session_id);
    return it->second;
}

std::vector<StudySession> StudyService::sessions() const
{
    std::lock_guard lock(mutex_);
    std::vector<StudySession> out;
    for (const auto& [id, s] : sessions_) out.push_back(s);
    return out;
}

StudySummary StudyService::summary() const
{
    return study_summary(sessions(), config_.summary_rounds);
}

json StudyService::public_session(const std::string& session_id) const
{
    auto s = session(session_id);
    const auto& g = guard(s.example_id);
    json subs = json::array();
    for (const auto& sub : s.submissions) {
        json reports = json::array();
        for (const auto& r : sub.reports) reports.push_back(executor::to_json(redact(r, g)));
        subs.push_back({{"timestamp", sub.timestamp}, {"verdict", sub.passed ? "pass" : "fail"}, {"reports", reports}});
    }
    return {{"session_id", s.session_id},
            {"participant_alias", s.participant_alias},
            {"example_id", s.example_id},
            {"submissions", subs},
            {"revisions", s.submissions.empty() ? 0 : s.submissions.size() - 1},
            {"solved", s.solved},
            {"gave_up", s.gave_up},
            {"used_external_resources", s.used_external_resources},
            {"ratings", s.ratings ? to_json(*s.ratings) : json(nullptr)},
            {"finalized", s.finalized}};
}

}  // namespace codebench::study
