#pragma once

// HTTP side of the LLM client. Split from datagen.hpp so translation units
// that only template or validate don't pay for cpp-httplib.

#include <chrono>
#include <thread>

#include "ecglab/datagen.hpp"
#include "httplib.h"

namespace ecglab {

namespace dgdetail {

struct ParsedEndpoint {
    std::string host_port;  // scheme://host:port
    std::string path;
};

inline ParsedEndpoint parse_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ValidationError("endpoint", "expected scheme://host[:port]/path");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace dgdetail

// Chat-completion call with retry/backoff and a crude rate limiter. With
// cfg.mock the deterministic offline generator answers instead.
inline std::string llm_generate(const std::string& prompt, const LlmClientConfig& cfg) {
    if (cfg.mock) return dgdetail::mock_generate(prompt);

    static std::chrono::steady_clock::time_point last_request{};
    if (cfg.min_request_interval_ms > 0) {
        auto now = std::chrono::steady_clock::now();
        auto since = std::chrono::duration<double, std::milli>(now - last_request).count();
        if (since < cfg.min_request_interval_ms)
            std::this_thread::sleep_for(
                std::chrono::duration<double, std::milli>(cfg.min_request_interval_ms - since));
    }

    auto ep = dgdetail::parse_endpoint(cfg.endpoint);
    httplib::Client client(ep.host_port);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);

    nlohmann::json body;
    body["model"] = cfg.model;
    body["messages"] = {{{"role", "user"}, {"content", prompt}}};

    httplib::Headers headers;
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(cfg.backoff_ms * (1 << (attempt - 1))));
        last_request = std::chrono::steady_clock::now();
        auto res = client.Post(ep.path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "network failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw ValidationError("auth", "authentication failed (HTTP " +
                                              std::to_string(res->status) + ")");
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            break;
        }
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception&) {
            throw ValidationError("response", "non-JSON response body: " +
                                                  res->body.substr(0, 120));
        }
        try {
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw ValidationError("response",
                                  "unexpected response shape: " + reply.dump().substr(0, 120));
        }
    }
    throw ValidationError("client", "request failed after " + std::to_string(cfg.max_retries) +
                                        " attempts (" + last_error + ")");
}

}  // namespace ecglab
