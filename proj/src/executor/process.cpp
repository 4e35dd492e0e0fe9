#include "codebench/executor/process.hpp"

#include "codebench/util/errors.hpp"

#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <fmt/format.h>
#include <sched.h>
#include <signal.h>
#include <sys/mman.h>
#include <sys/mount.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

namespace codebench::executor {

namespace {

constexpr unsigned char exec_failed = 0xFF;

// Child-side helpers: only async-signal-safe calls from here until execve.
bool write_all(int fd, const char* data, std::size_t len)
{
    while (len > 0) {
        ssize_t n = ::write(fd, data, len);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data += n;
        len -= static_cast<std::size_t>(n);
    }
    return true;
}

bool write_file(const char* path, const char* data, std::size_t len)
{
    int fd = ::open(path, O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
    if (fd < 0) return false;
    bool ok = write_all(fd, data, len);
    ::close(fd);
    return ok;
}

[[noreturn]] void child_fail(int status_fd, int err)
{
    unsigned char msg[1 + sizeof(int)];
    msg[0] = exec_failed;
    std::memcpy(msg + 1, &err, sizeof(int));
    write_all(status_fd, reinterpret_cast<const char*>(msg), sizeof msg);
    ::_exit(127);
}

struct ChildPlan {
    std::vector<char*> argv;
    std::vector<char*> envp;
    const char* cwd = nullptr;
    const char* mask_root = nullptr;
    bool isolate_network = false;
    std::vector<std::string> file_paths;
    const std::vector<std::pair<std::string, std::string>>* files = nullptr;
    std::string uid_map;
    std::string gid_map;
    int out_fd = -1;
    int err_fd = -1;
    int status_fd = -1;
};

unsigned enter_namespaces(const ChildPlan& plan)
{
    int wanted = (plan.isolate_network ? CLONE_NEWNET : 0) | (plan.mask_root ? CLONE_NEWNS : 0);
    if (wanted == 0) return isolation_none;
    if (::unshare(wanted) != 0) {
        // Unprivileged fallback: a user namespace owning the new namespaces, mapping ourselves.
        if (::unshare(CLONE_NEWUSER | wanted) == 0) {
            write_file("/proc/self/setgroups", "deny", 4);
            write_file("/proc/self/uid_map", plan.uid_map.data(), plan.uid_map.size());
            write_file("/proc/self/gid_map", plan.gid_map.data(), plan.gid_map.size());
        } else {
            unsigned got = isolation_none;
            if (plan.isolate_network && ::unshare(CLONE_NEWNET) == 0) got |= isolation_network;
            if (plan.mask_root && ::unshare(CLONE_NEWNS) == 0) got |= isolation_mounts;
            return got;
        }
    }
    return (plan.isolate_network ? isolation_network : 0u) | (plan.mask_root ? isolation_mounts : 0u);
}

[[noreturn]] void run_child(const ChildPlan& plan)
{
    ::setpgid(0, 0);
    unsigned isolation = enter_namespaces(plan);
    if (isolation & isolation_mounts) {
        bool ok = ::mount(nullptr, "/", nullptr, MS_REC | MS_PRIVATE, nullptr) == 0 &&
                  ::mount("tmpfs", plan.mask_root, "tmpfs", MS_NOSUID | MS_NODEV, "mode=0700,size=268435456") == 0;
        if (ok && ::mkdir(plan.cwd, 0700) != 0) {
            ::umount2(plan.mask_root, MNT_DETACH);
            ok = false;
        }
        if (!ok) isolation &= ~static_cast<unsigned>(isolation_mounts);
    }
    if (::chdir(plan.cwd) != 0) child_fail(plan.status_fd, errno);
    for (std::size_t i = 0; i < plan.files->size(); ++i) {
        const auto& content = (*plan.files)[i].second;
        if (!write_file(plan.file_paths[i].c_str(), content.data(), content.size())) child_fail(plan.status_fd, errno);
    }
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull < 0 || ::dup2(devnull, 0) < 0 || ::dup2(plan.out_fd, 1) < 0 || ::dup2(plan.err_fd, 2) < 0) {
        child_fail(plan.status_fd, errno);
    }
#ifdef SYS_close_range
    ::syscall(SYS_close_range, 3U, ~0U, 4U /* CLOSE_RANGE_CLOEXEC */);
#endif
    struct rlimit no_core {0, 0};
    ::setrlimit(RLIMIT_CORE, &no_core);
    unsigned char flag = static_cast<unsigned char>(isolation);
    write_all(plan.status_fd, reinterpret_cast<const char*>(&flag), 1);
    ::execve(plan.argv[0], plan.argv.data(), plan.envp.data());
    child_fail(plan.status_fd, errno);
}

std::string read_tail(int fd, std::size_t limit)
{
    struct stat st {};
    if (::fstat(fd, &st) != 0) return {};
    auto size = static_cast<std::size_t>(st.st_size);
    std::size_t start = size > limit ? size - limit : 0;
    std::string buf(size - start, '\0');
    std::size_t got = 0;
    while (got < buf.size()) {
        ssize_t n = ::pread(fd, buf.data() + got, buf.size() - got, static_cast<off_t>(start + got));
        if (n <= 0) break;
        got += static_cast<std::size_t>(n);
    }
    buf.resize(got);
    return buf;
}

class Fd {
public:
    explicit Fd(int fd = -1) : fd_(fd) {}
    ~Fd() { reset(); }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    void reset()
    {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    [[nodiscard]] int get() const { return fd_; }

private:
    int fd_;
};

}  // namespace

SpawnResult spawn_and_wait(const SpawnOptions& options)
{
    if (options.argv.empty() || options.argv[0].empty() || options.argv[0][0] != '/') {
        throw InfrastructureError("spawn needs an absolute executable path");
    }
    if (options.mask_root && options.cwd.parent_path() != *options.mask_root) {
        throw InfrastructureError("masked working directory must be a direct child of the mask root");
    }

    ChildPlan plan;
    std::vector<std::string> argv_store = options.argv;
    std::vector<std::string> env_store = options.env;
    for (auto& a : argv_store) plan.argv.push_back(a.data());
    plan.argv.push_back(nullptr);
    for (auto& e : env_store) plan.envp.push_back(e.data());
    plan.envp.push_back(nullptr);
    std::string cwd = options.cwd.string();
    std::string mask = options.mask_root ? options.mask_root->string() : std::string{};
    plan.cwd = cwd.c_str();
    plan.mask_root = options.mask_root ? mask.c_str() : nullptr;
    plan.isolate_network = options.isolate_network;
    plan.files = &options.files;
    for (const auto& [name, content] : options.files) plan.file_paths.push_back((options.cwd / name).string());
    plan.uid_map = fmt::format("0 {} 1", ::getuid());
    plan.gid_map = fmt::format("0 {} 1", ::getgid());

    Fd out(::memfd_create("codebench-out", MFD_CLOEXEC));
    Fd err(::memfd_create("codebench-err", MFD_CLOEXEC));
    if (out.get() < 0 || err.get() < 0) throw InfrastructureError(fmt::format("memfd_create: {}", std::strerror(errno)));
    int pipe_fds[2];
    if (::pipe2(pipe_fds, O_CLOEXEC) != 0) throw InfrastructureError(fmt::format("pipe2: {}", std::strerror(errno)));
    Fd status_read(pipe_fds[0]);
    Fd status_write(pipe_fds[1]);
    plan.out_fd = out.get();
    plan.err_fd = err.get();
    plan.status_fd = status_write.get();

    const auto started = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) throw InfrastructureError(fmt::format("fork: {}", std::strerror(errno)));
    if (pid == 0) run_child(plan);
    ::setpgid(pid, pid);  // also set by the child; whichever runs first wins the race harmlessly
    status_write.reset();

    SpawnResult result;
    // Protocol: optional isolation byte, then (only on failure) 0xFF followed by errno.
    unsigned char status_buf[2 + sizeof(int)];
    std::size_t status_len = 0;
    while (status_len < sizeof status_buf) {
        ssize_t n = ::read(status_read.get(), status_buf + status_len, sizeof status_buf - status_len);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        status_len += static_cast<std::size_t>(n);
    }
    int wstatus = 0;
    std::size_t marker = status_len;
    for (std::size_t i = 0; i < status_len && i < 2; ++i) {
        if (status_buf[i] == exec_failed) {
            marker = i;
            break;
        }
    }
    if (marker < status_len) {
        int child_errno = 0;
        if (status_len >= marker + 1 + sizeof(int)) std::memcpy(&child_errno, status_buf + marker + 1, sizeof(int));
        ::waitpid(pid, &wstatus, 0);
        throw InfrastructureError(fmt::format("cannot start {}: {}", options.argv[0], std::strerror(child_errno)));
    }
    if (status_len >= 1) result.isolation = status_buf[0];

    const auto deadline = started + std::chrono::duration_cast<std::chrono::steady_clock::duration>(options.timeout);
    auto pause = std::chrono::microseconds(500);
    for (;;) {
        pid_t r = ::waitpid(pid, &wstatus, WNOHANG);
        if (r == pid) break;
        if (r < 0 && errno != EINTR) throw InfrastructureError(fmt::format("waitpid: {}", std::strerror(errno)));
        if (std::chrono::steady_clock::now() >= deadline) {
            ::killpg(pid, SIGKILL);
            ::waitpid(pid, &wstatus, 0);
            result.timed_out = true;
            break;
        }
        std::this_thread::sleep_for(pause);
        pause = std::min(pause * 2, std::chrono::microseconds(20000));
    }
    ::killpg(pid, SIGKILL);  // stragglers left in the group
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (WIFEXITED(wstatus)) result.exit_code = WEXITSTATUS(wstatus);
    if (WIFSIGNALED(wstatus)) result.term_signal = WTERMSIG(wstatus);
    result.out = read_tail(out.get(), options.output_limit);
    result.err = read_tail(err.get(), options.output_limit);
    return result;
}

std::optional<std::filesystem::path> find_executable(const std::string& name)
{
    if (name.empty()) return std::nullopt;
    if (name.find('/') != std::string::npos) {
        if (::access(name.c_str(), X_OK) == 0) return std::filesystem::absolute(name);
        return std::nullopt;
    }
    const char* path = std::getenv("PATH");
    std::string dirs = path ? path : "/usr/local/bin:/usr/bin:/bin";
    std::size_t pos = 0;
    while (pos <= dirs.size()) {
        std::size_t end = dirs.find(':', pos);
        if (end == std::string::npos) end = dirs.size();
        std::string dir = dirs.substr(pos, end - pos);
        if (!dir.empty()) {
            auto candidate = std::filesystem::path(dir) / name;
            if (::access(candidate.c_str(), X_OK) == 0) return candidate;
        }
        pos = end + 1;
    }
    return std::nullopt;
}

}  // namespace codebench::executor
