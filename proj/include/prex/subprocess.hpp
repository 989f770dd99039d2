#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "prex/errors.hpp"

namespace prex {

struct ProcessResult {
    int exit_code = 0;
    std::string out;
    std::string err;
    bool timed_out = false;
};

/// Caps the number of concurrently running recognizer subprocesses.
class ProcessGate {
public:
    static ProcessGate& instance() {
        static ProcessGate gate;
        return gate;
    }

    void set_capacity(int n) {
        std::lock_guard<std::mutex> lock(mutex_);
        capacity_ = n > 0 ? n : default_capacity();
        cv_.notify_all();
    }

    void acquire() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return in_use_ < capacity_; });
        ++in_use_;
    }

    void release() {
        std::lock_guard<std::mutex> lock(mutex_);
        --in_use_;
        cv_.notify_one();
    }

private:
    ProcessGate() : capacity_(default_capacity()) {}

    static int default_capacity() {
        const unsigned n = std::thread::hardware_concurrency();
        return n > 0 ? static_cast<int>(n) : 1;
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    int capacity_;
    int in_use_ = 0;
};

inline void set_max_concurrent_processes(int n) { ProcessGate::instance().set_capacity(n); }

namespace detail {

struct PipePair {
    int fds[2] = {-1, -1};
    ~PipePair() {
        if (fds[0] >= 0) ::close(fds[0]);
        if (fds[1] >= 0) ::close(fds[1]);
    }
    void close_read() {
        if (fds[0] >= 0) ::close(fds[0]);
        fds[0] = -1;
    }
    void close_write() {
        if (fds[1] >= 0) ::close(fds[1]);
        fds[1] = -1;
    }
};

}  // namespace detail

/// Runs argv without a shell, captures stdout/stderr, and kills the process
/// after timeout_s seconds. The parent environment is passed through
/// unmodified. Throws IoError only for plumbing failures; recognizer-level
/// failures are reported through the result so callers can shape the error.
inline ProcessResult run_process(const std::vector<std::string>& argv, double timeout_s) {
    if (argv.empty()) throw InvalidArgument("run_process: empty argv");

    detail::PipePair out_pipe, err_pipe;
    if (::pipe(out_pipe.fds) != 0 || ::pipe(err_pipe.fds) != 0) {
        throw IoError(std::string("pipe() failed: ") + std::strerror(errno));
    }

    ProcessGate::instance().acquire();
    struct GateRelease {
        ~GateRelease() { ProcessGate::instance().release(); }
    } gate_release;

    const pid_t pid = ::fork();
    if (pid < 0) throw IoError(std::string("fork() failed: ") + std::strerror(errno));

    if (pid == 0) {
        ::dup2(out_pipe.fds[1], STDOUT_FILENO);
        ::dup2(err_pipe.fds[1], STDERR_FILENO);
        ::close(out_pipe.fds[0]);
        ::close(out_pipe.fds[1]);
        ::close(err_pipe.fds[0]);
        ::close(err_pipe.fds[1]);
        std::vector<char*> args;
        args.reserve(argv.size() + 1);
        for (const std::string& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        ::execvp(args[0], args.data());
        const std::string msg = "exec failed: " + argv[0] + ": " + std::strerror(errno) + "\n";
        const ssize_t ignored = ::write(STDERR_FILENO, msg.data(), msg.size());
        (void)ignored;
        ::_exit(127);
    }

    out_pipe.close_write();
    err_pipe.close_write();

    ProcessResult result;
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    bool out_open = true, err_open = true;
    char buf[4096];

    while (out_open || err_open) {
        struct pollfd fds[2];
        int nfds = 0;
        if (out_open) fds[nfds++] = {out_pipe.fds[0], POLLIN, 0};
        if (err_open) fds[nfds++] = {err_pipe.fds[0], POLLIN, 0};

        int wait_ms = -1;
        if (!result.timed_out) {
            const auto remaining = deadline - std::chrono::steady_clock::now();
            wait_ms = static_cast<int>(
                std::chrono::duration_cast<std::chrono::milliseconds>(remaining).count());
            if (wait_ms < 0) wait_ms = 0;
        }

        const int rc = ::poll(fds, static_cast<nfds_t>(nfds), wait_ms);
        if (rc < 0) {
            if (errno == EINTR) continue;
            ::kill(pid, SIGKILL);
            ::waitpid(pid, nullptr, 0);
            throw IoError(std::string("poll() failed: ") + std::strerror(errno));
        }
        if (rc == 0) {
            // Deadline passed with nothing readable: kill and drain.
            result.timed_out = true;
            ::kill(pid, SIGKILL);
            continue;
        }
        for (int k = 0; k < nfds; ++k) {
            if (!(fds[k].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const bool is_out = fds[k].fd == out_pipe.fds[0];
            const ssize_t n = ::read(fds[k].fd, buf, sizeof(buf));
            if (n > 0) {
                (is_out ? result.out : result.err).append(buf, static_cast<std::size_t>(n));
            } else if (n == 0 || (n < 0 && errno != EINTR)) {
                if (is_out) {
                    out_pipe.close_read();
                    out_open = false;
                } else {
                    err_pipe.close_read();
                    err_open = false;
                }
            }
        }
    }

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) throw IoError(std::string("waitpid() failed: ") + std::strerror(errno));
    }
    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.exit_code = 128 + WTERMSIG(status);
    } else {
        result.exit_code = -1;
    }
    return result;
}

}  // namespace prex
