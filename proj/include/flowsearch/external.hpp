#pragma once

// External evaluator over a line-delimited JSON protocol.
//
//   client -> peer  {"v":1,"type":"hello","caps":{...}}
//   peer -> client  {"v":1,"type":"hello","caps":{...}}
//   client -> peer  {"config":{...},"question":"q1","req_id":"t3/q1/0","trial":"3","type":"eval","v":1}
//   peer -> client  {"v":1,"req_id":"t3/q1/0","passed":true,"cost_usd":0.003,"latency_s":1.2,"error":null}
//
// Requests are written with sorted keys, so identical calls are byte-identical.
// Responses are matched by req_id and may arrive in any order; unknown fields
// are ignored. "error" is one of content-filter, rate-limit, tool-failure.

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "flowsearch/errors.hpp"
#include "flowsearch/harness.hpp"
#include "flowsearch/rng.hpp"
#include "flowsearch/space_io.hpp"

extern char** environ;

namespace flowsearch {

inline constexpr int kProtocolVersion = 1;

inline json hello_message(const json& caps) { return {{"v", kProtocolVersion}, {"type", "hello"}, {"caps", caps}}; }

inline std::string eval_request_line(const std::string& req_id, std::int64_t trial, const FlowConfig& cfg,
                                     const std::string& question) {
    const json j = {{"v", kProtocolVersion}, {"type", "eval"},           {"req_id", req_id},
                    {"trial", std::to_string(trial)}, {"config", config_to_json(cfg)}, {"question", question}};
    return j.dump();
}

struct EvalResponse {
    std::string req_id;
    bool passed = false;
    double cost_usd = 0.0;
    double latency_s = 0.0;
    std::optional<std::string> error;
};

/// Parses one response line; throws ProtocolError on anything malformed.
inline EvalResponse parse_eval_response(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception&) {
        throw ProtocolError("malformed response line");
    }
    if (!j.is_object()) throw ProtocolError("response is not an object");
    if (!j.contains("v") || !j["v"].is_number_integer()) throw ProtocolError("response lacks version");
    if (j["v"].get<int>() != kProtocolVersion) throw ProtocolError("version mismatch");
    if (!j.contains("req_id") || !j["req_id"].is_string()) throw ProtocolError("response lacks req_id");
    EvalResponse r;
    r.req_id = j["req_id"].get<std::string>();
    if (j.contains("error") && !j["error"].is_null()) {
        if (!j["error"].is_string()) throw ProtocolError("response error must be a string or null");
        r.error = j["error"].get<std::string>();
        return r;
    }
    if (!j.contains("passed") || !j["passed"].is_boolean()) throw ProtocolError("response lacks passed");
    if (!j.contains("cost_usd") || !j["cost_usd"].is_number()) throw ProtocolError("response lacks cost_usd");
    if (!j.contains("latency_s") || !j["latency_s"].is_number()) throw ProtocolError("response lacks latency_s");
    r.passed = j["passed"].get<bool>();
    r.cost_usd = j["cost_usd"].get<double>();
    r.latency_s = j["latency_s"].get<double>();
    if (r.cost_usd < 0.0 || r.latency_s < 0.0) throw ProtocolError("negative cost or latency");
    return r;
}

/// Backoff before retry k (0-based): base * 2^k * (1 + 0.5 u), u in [0, 1).
/// The jitter never exceeds half the doubling, so delays strictly increase.
inline double backoff_delay(double base_s, int k, double u) { return base_s * std::ldexp(1.0, k) * (1.0 + 0.5 * u); }

/// Buffered line reader/writer over a pair of file descriptors.
class LineChannel {
public:
    LineChannel(int read_fd, int write_fd) : rfd_(read_fd), wfd_(write_fd) {}
    LineChannel(const LineChannel&) = delete;
    LineChannel& operator=(const LineChannel&) = delete;
    ~LineChannel() { close_all(); }

    void write_line(const std::string& line) {
        std::lock_guard<std::mutex> lock(write_mu_);
        std::string buf = line + "\n";
        const char* p = buf.data();
        std::size_t left = buf.size();
        while (left > 0) {
            const ssize_t n = ::write(wfd_, p, left);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("write to evaluator failed: ") + std::strerror(errno));
            }
            p += n;
            left -= static_cast<std::size_t>(n);
        }
    }

    /// Next line, or nullopt on EOF. A negative timeout waits forever;
    /// otherwise throws ProtocolError("timeout") when nothing arrives in time.
    std::optional<std::string> read_line(double timeout_s = -1.0) {
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s < 0 ? 0 : timeout_s);
        while (true) {
            auto nl = buf_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            if (eof_) {
                if (buf_.empty()) return std::nullopt;
                std::string line;
                line.swap(buf_);
                return line;
            }
            int wait_ms = -1;
            if (timeout_s >= 0) {
                const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count();
                if (left <= 0) throw ProtocolError("timeout");
                wait_ms = static_cast<int>(left);
            }
            pollfd pfd{rfd_, POLLIN, 0};
            const int pr = ::poll(&pfd, 1, wait_ms);
            if (pr < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
            }
            if (pr == 0) throw ProtocolError("timeout");
            char tmp[4096];
            const ssize_t n = ::read(rfd_, tmp, sizeof tmp);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("read from evaluator failed: ") + std::strerror(errno));
            }
            if (n == 0) {
                eof_ = true;
            } else {
                buf_.append(tmp, static_cast<std::size_t>(n));
            }
        }
    }

    void close_write() {
        std::lock_guard<std::mutex> lock(write_mu_);
        if (wfd_ >= 0) ::close(wfd_);
        wfd_ = -1;
    }

    void close_all() {
        close_write();
        if (rfd_ >= 0) ::close(rfd_);
        rfd_ = -1;
    }

private:
    int rfd_;
    int wfd_;
    std::string buf_;
    bool eof_ = false;
    std::mutex write_mu_;
};

/// Child process with stdin/stdout connected to a LineChannel.
class Subprocess {
public:
    explicit Subprocess(const std::vector<std::string>& argv) {
        if (argv.empty()) throw ConfigError("external evaluator command is empty");
        int to_child[2], from_child[2];
        if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) throw ProtocolError("pipe() failed");
        posix_spawn_file_actions_t fa;
        posix_spawn_file_actions_init(&fa);
        posix_spawn_file_actions_adddup2(&fa, to_child[0], 0);
        posix_spawn_file_actions_adddup2(&fa, from_child[1], 1);
        for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) posix_spawn_file_actions_addclose(&fa, fd);
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        const int rc = ::posix_spawnp(&pid_, args[0], &fa, nullptr, args.data(), environ);
        posix_spawn_file_actions_destroy(&fa);
        ::close(to_child[0]);
        ::close(from_child[1]);
        if (rc != 0) {
            ::close(to_child[1]);
            ::close(from_child[0]);
            throw ProtocolError("cannot start evaluator '" + argv[0] + "': " + std::strerror(rc));
        }
        channel_ = std::make_unique<LineChannel>(from_child[0], to_child[1]);
    }

    Subprocess(const Subprocess&) = delete;
    Subprocess& operator=(const Subprocess&) = delete;

    ~Subprocess() { wait(); }

    /// Closes the child's stdin and reaps it, killing it after ~0.5 s.
    /// Returns the exit status, or -1 if it had to be killed.
    int wait() {
        if (reaped_) return status_;
        reaped_ = true;
        channel_->close_write();
        int st = 0;
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, &st, WNOHANG) == pid_) return status_ = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &st, 0);
        return status_ = -1;
    }

    LineChannel& channel() { return *channel_; }
    pid_t pid() const { return pid_; }

private:
    pid_t pid_ = -1;
    std::unique_ptr<LineChannel> channel_;
    bool reaped_ = false;
    int status_ = -1;
};

struct ExternalSettings {
    std::vector<std::string> command;
    double timeout_s = 30.0;
    double handshake_timeout_s = 10.0;
    int max_retries = 3;
    double backoff_base_s = 0.5;
    std::uint64_t jitter_seed = 0;
    std::function<void(double)> sleep; // defaults to a real sleep
};

/// Speaks the protocol over an owned subprocess or a caller-supplied channel.
/// A reader thread demultiplexes responses to waiting callers by req_id.
class ExternalEvaluator final : public Evaluator {
public:
    explicit ExternalEvaluator(ExternalSettings s) : settings_(std::move(s)) {
        proc_ = std::make_unique<Subprocess>(settings_.command);
        chan_ = &proc_->channel();
        start();
    }

    /// Channel-based constructor; the channel must outlive the evaluator.
    ExternalEvaluator(LineChannel& channel, ExternalSettings s) : settings_(std::move(s)), chan_(&channel) { start(); }

    ExternalEvaluator(const ExternalEvaluator&) = delete;
    ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;

    ~ExternalEvaluator() override { shutdown(); }

    /// Ends the session: closes our side, drains the reader, reaps the peer.
    /// Returns the peer's exit status (0 for channel-based sessions).
    int shutdown() {
        chan_->close_write();
        int status = 0;
        if (proc_) status = proc_->wait();
        if (reader_.joinable()) reader_.join();
        return status;
    }

    EvaluatorCaps caps() const override {
        EvaluatorCaps c;
        c.name = "external";
        c.batch_size = peer_caps_.value("batch_size", 1);
        c.timeout_s = settings_.timeout_s;
        return c;
    }

    const json& peer_caps() const { return peer_caps_; }

    /// Protocol problems seen so far (malformed lines, stray responses), for diagnostics.
    std::vector<std::string> diagnostics() const {
        std::lock_guard<std::mutex> lock(mu_);
        return diagnostics_;
    }

    /// Delays slept by the most recent call, for inspection.
    std::vector<double> last_backoff() const {
        std::lock_guard<std::mutex> lock(mu_);
        return last_backoff_;
    }

    EvalRecord evaluate(const FlowConfig& config, std::int64_t trial_id, const std::string& question) override {
        Rng jitter(hash_combine({settings_.jitter_seed, static_cast<std::uint64_t>(trial_id), hash_string(question)}));
        std::vector<double> delays;
        EvalRecord rec;
        for (int attempt = 0;; ++attempt) {
            const std::string req_id = "t" + std::to_string(trial_id) + "/" + question + "/" + std::to_string(attempt);
            rec = call(req_id, trial_id, config, question);
            if (!(rec.error == ErrorTag::rate_limit) || attempt >= settings_.max_retries) break;
            const double d = backoff_delay(settings_.backoff_base_s, attempt, jitter.uniform());
            delays.push_back(d);
            if (settings_.sleep) {
                settings_.sleep(d);
            } else {
                std::this_thread::sleep_for(std::chrono::duration<double>(d));
            }
        }
        {
            std::lock_guard<std::mutex> lock(mu_);
            last_backoff_ = delays;
        }
        return rec;
    }

private:
    struct Pending {
        std::optional<EvalRecord> result;
    };

    void start() {
        chan_->write_line(hello_message({{"client", "flowsearch"}, {"protocol", kProtocolVersion}}).dump());
        std::optional<std::string> line;
        try {
            line = chan_->read_line(settings_.handshake_timeout_s);
        } catch (const ProtocolError& e) {
            throw ProtocolError(std::string("handshake failure: ") + e.what());
        }
        if (!line) throw ProtocolError("handshake failure: evaluator closed the stream");
        json j;
        try {
            j = json::parse(*line);
        } catch (const json::exception&) {
            throw ProtocolError("handshake failure: malformed hello");
        }
        if (!j.is_object() || j.value("type", std::string{}) != "hello") throw ProtocolError("handshake failure: expected hello");
        if (!j.contains("v") || !j["v"].is_number_integer() || j["v"].get<int>() != kProtocolVersion)
            throw ProtocolError("version mismatch: evaluator speaks " + (j.contains("v") ? j["v"].dump() : std::string("?")));
        peer_caps_ = j.value("caps", json::object());
        reader_ = std::thread([this] { read_loop(); });
    }

    EvalRecord call(const std::string& req_id, std::int64_t trial_id, const FlowConfig& cfg, const std::string& question) {
        std::unique_lock<std::mutex> lock(mu_);
        if (dead_) return EvalRecord::failure(question, ErrorTag::protocol);
        pending_[req_id] = Pending{};
        order_.push_back(req_id);
        lock.unlock();
        try {
            chan_->write_line(eval_request_line(req_id, trial_id, cfg, question));
        } catch (const ProtocolError&) {
            lock.lock();
            forget(req_id);
            dead_ = true;
            return EvalRecord::failure(question, ErrorTag::protocol);
        }
        lock.lock();
        const bool done = cv_.wait_for(lock, std::chrono::duration<double>(settings_.timeout_s),
                                       [&] { return pending_.at(req_id).result.has_value(); });
        if (!done) {
            forget(req_id);
            diagnostics_.push_back("timeout waiting for " + req_id);
            return EvalRecord::failure(question, ErrorTag::protocol);
        }
        auto rec = *pending_.at(req_id).result;
        forget(req_id);
        rec.question_id = question;
        return rec;
    }

    void forget(const std::string& req_id) {
        pending_.erase(req_id);
        std::erase(order_, req_id);
    }

    void complete_locked(const std::string& req_id, EvalRecord rec) {
        auto it = pending_.find(req_id);
        if (it == pending_.end() || it->second.result) return;
        it->second.result = std::move(rec);
        std::erase(order_, req_id);
    }

    void read_loop() {
        while (true) {
            std::optional<std::string> line;
            try {
                line = chan_->read_line();
            } catch (const ProtocolError&) {
                line.reset();
            }
            std::lock_guard<std::mutex> lock(mu_);
            if (!line) {
                dead_ = true;
                for (auto& [id, p] : pending_)
                    if (!p.result) p.result = EvalRecord::failure("", ErrorTag::protocol);
                order_.clear();
                cv_.notify_all();
                return;
            }
            if (line->empty()) continue;
            try {
                auto r = parse_eval_response(*line);
                if (!pending_.count(r.req_id)) {
                    diagnostics_.push_back("response for unknown req_id " + r.req_id);
                    continue;
                }
                EvalRecord rec;
                if (r.error) {
                    auto tag = parse_error_tag(*r.error);
                    if (!tag || *tag == ErrorTag::protocol) {
                        diagnostics_.push_back("unknown error tag '" + *r.error + "'");
                        tag = ErrorTag::protocol;
                    }
                    rec = EvalRecord::failure("", *tag);
                } else {
                    rec = EvalRecord::success("", r.passed, r.cost_usd, r.latency_s);
                }
                complete_locked(r.req_id, std::move(rec));
            } catch (const ProtocolError& e) {
                diagnostics_.push_back(std::string(e.what()) + ": " + line->substr(0, 200));
                // Attribute the bad line to the oldest outstanding request.
                if (!order_.empty()) complete_locked(order_.front(), EvalRecord::failure("", ErrorTag::protocol));
                if (std::string(e.what()) == "version mismatch") {
                    dead_ = true;
                    for (auto& [id, p] : pending_)
                        if (!p.result) p.result = EvalRecord::failure("", ErrorTag::protocol);
                    order_.clear();
                }
            }
            cv_.notify_all();
        }
    }

    ExternalSettings settings_;
    std::unique_ptr<Subprocess> proc_;
    LineChannel* chan_ = nullptr;
    json peer_caps_;
    std::thread reader_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::string, Pending> pending_;
    std::deque<std::string> order_; // outstanding req_ids, oldest first
    std::vector<std::string> diagnostics_;
    std::vector<double> last_backoff_;
    bool dead_ = false;
};

} // namespace flowsearch
