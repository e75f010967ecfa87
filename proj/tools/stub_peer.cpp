// Reference peer for the external evaluator protocol. Reads requests on stdin,
// writes responses on stdout.
//
//   stub_peer [--mode MODE] [--rate-limits N] [--pass-rate P]
//   stub_peer --transcript FILE
//
// Modes: normal, timeout (never answers evals), malformed (answers with a
// non-JSON line), bad-version (hello with v=2), bad-response-version
// (responses with v=2), no-hello (closes without greeting), rate-limit (the
// first N attempts of every question answer rate-limit), reverse-pairs (holds
// one request and answers pairs in reverse order).
//
// Transcript files hold "> " lines the client must send byte-for-byte and
// "< " lines the peer sends back. On a mismatch the peer answers with a
// malformed line and exits 3.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowsearch/rng.hpp"

using nlohmann::json;

namespace {

void send(const std::string& line) {
    std::cout << line << '\n';
    std::cout.flush();
}

json hello(int v) { return {{"v", v}, {"type", "hello"}, {"caps", {{"name", "stub-peer"}, {"batch_size", 1}}}}; }

// Deterministic answer keyed on the config record and question.
json answer(const json& req, double pass_rate, int v = 1) {
    const std::uint64_t h = flowsearch::hash_combine(
        {flowsearch::hash_string(req.at("config").dump()), flowsearch::hash_string(req.at("question").get<std::string>())});
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    const double cost = 0.001 * (1.0 + static_cast<double>(h % 7) / 10.0);
    return {{"v", v},          {"req_id", req.at("req_id")}, {"passed", u < pass_rate}, {"cost_usd", cost},
            {"latency_s", 1.0}, {"error", nullptr},          {"x_note", "unknown fields are ignored"}};
}

int attempt_of(const std::string& req_id) {
    const auto slash = req_id.rfind('/');
    if (slash == std::string::npos) return 0;
    try {
        return std::stoi(req_id.substr(slash + 1));
    } catch (...) {
        return 0;
    }
}

int run_transcript(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "stub_peer: cannot open transcript " << path << '\n';
        return 2;
    }
    std::vector<std::string> script;
    for (std::string l; std::getline(in, l);) {
        if (l.size() >= 2 && (l[0] == '>' || l[0] == '<') && l[1] == ' ') script.push_back(l);
    }
    std::size_t pos = 0;
    auto flush_outgoing = [&] {
        while (pos < script.size() && script[pos][0] == '<') send(script[pos++].substr(2));
    };
    flush_outgoing();
    for (std::string line; std::getline(std::cin, line);) {
        if (pos >= script.size() || script[pos].substr(2) != line) {
            std::cerr << "stub_peer: transcript mismatch at step " << pos << "\n  got: " << line << '\n';
            send("TRANSCRIPT-MISMATCH");
            return 3;
        }
        ++pos;
        flush_outgoing();
    }
    if (pos != script.size()) {
        std::cerr << "stub_peer: client closed before transcript step " << pos << '\n';
        return 3;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reference peer for the flowsearch evaluator protocol"};
    std::string mode = "normal";
    std::string transcript;
    int rate_limits = 3;
    double pass_rate = 0.6;
    app.add_option("--mode", mode, "Behaviour")
        ->check(CLI::IsMember({"normal", "timeout", "malformed", "bad-version", "bad-response-version", "no-hello", "rate-limit",
                               "reverse-pairs"}));
    app.add_option("--transcript", transcript, "Replay a golden transcript");
    app.add_option("--rate-limits", rate_limits, "Rate-limited attempts per question in rate-limit mode");
    app.add_option("--pass-rate", pass_rate, "Pass probability in normal mode");
    CLI11_PARSE(app, argc, argv);

    if (!transcript.empty()) return run_transcript(transcript);

    std::string line;
    if (!std::getline(std::cin, line)) return 0;
    if (mode == "no-hello") return 0;
    send(hello(mode == "bad-version" ? 2 : 1).dump());

    std::optional<json> held;
    while (std::getline(std::cin, line)) {
        json req;
        try {
            req = json::parse(line);
        } catch (const json::exception&) {
            std::cerr << "stub_peer: unparseable request\n";
            continue;
        }
        if (req.value("type", std::string{}) != "eval") continue;
        if (mode == "timeout") continue;
        if (mode == "malformed") {
            send("{\"v\":1,\"req_id\":" + req.at("req_id").dump() + ",\"passed\":tru");
            continue;
        }
        if (mode == "bad-response-version") {
            send(answer(req, pass_rate, 2).dump());
            continue;
        }
        if (mode == "rate-limit" && attempt_of(req.at("req_id").get<std::string>()) < rate_limits) {
            send(json{{"v", 1}, {"req_id", req.at("req_id")}, {"error", "rate-limit"}}.dump());
            continue;
        }
        if (mode == "reverse-pairs") {
            if (!held) {
                held = req;
                continue;
            }
            send(answer(req, pass_rate).dump());
            send(answer(*held, pass_rate).dump());
            held.reset();
            continue;
        }
        send(answer(req, pass_rate).dump());
    }
    return 0;
}
