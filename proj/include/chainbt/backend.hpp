#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "chainbt/date.hpp"

namespace chainbt::agents {

enum class AgentRole { market, news, trading, reflection };

std::string_view role_name(AgentRole role);

struct ChatRequest {
    AgentRole role = AgentRole::trading;
    std::size_t day_index = 0;
    Date date;
    std::string system_prompt;
    std::string user_prompt;
};

struct ChatResponse {
    std::string text;
    std::string model_id;
    std::chrono::milliseconds latency{0};
    int retries = 0;
};

// One request/response pair as recorded in the audit log.
struct ModelExchange {
    AgentRole role = AgentRole::trading;
    std::size_t day_index = 0;
    Date date;
    std::string system_prompt;
    std::string user_prompt;
    std::string response;
    std::string model_id;
    std::chrono::milliseconds latency{0};
    int retries = 0;
    std::string note;  // e.g. "parse_failure", "backend_error: ..."

    friend bool operator==(const ModelExchange&, const ModelExchange&) = default;
};

nlohmann::json exchange_to_json(const ModelExchange& e);
ModelExchange exchange_from_json(const nlohmann::json& j);

// Chat-completion style model. Implementations throw BackendError once they
// give up on a request.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// The documented answer format for trading requests:
//   "Rationale: <text>\nAction: <number>"
// with the number written as the shortest decimal that round-trips.
std::string render_action_response(double action, std::string_view rationale = "scripted");

// Lowercase hex SHA-256 of the bytes of `data`.
std::string sha256_hex(std::string_view data);

// Key used by fixture mocks: sha256(system_prompt + "\n" + user_prompt).
std::string prompt_hash(const ChatRequest& request);

struct BackendConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4o";
    double temperature = 0.0;
    std::optional<long> seed;
    std::chrono::milliseconds timeout{60'000};
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::milliseconds max_backoff{8'000};
    double requests_per_minute = 60.0;  // per endpoint; <= 0 disables
    int max_concurrent = 4;             // process-wide cap
    std::string api_key_env = "OPENAI_API_KEY";

    static BackendConfig from_json(const nlohmann::json& j);
    static BackendConfig load(const std::filesystem::path& path);
    [[nodiscard]] nlohmann::json to_json() const;
};

// Delay before retry number `attempt` (1-based): initial * 2^(attempt-1),
// capped at max_backoff.
std::chrono::milliseconds backoff_delay(const BackendConfig& config, int attempt);

// Caps concurrent requests across all backends sharing the gate and spaces
// requests to the same endpoint by at least the configured interval.
class RequestGate {
public:
    using Clock = std::chrono::steady_clock;

    explicit RequestGate(int max_concurrent = 4);

    static RequestGate& global();

    void set_max_concurrent(int max_concurrent);

    class Permit {
    public:
        explicit Permit(RequestGate* gate) : gate_(gate) {}
        Permit(Permit&& other) noexcept : gate_(std::exchange(other.gate_, nullptr)) {}
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;
        Permit& operator=(Permit&&) = delete;
        ~Permit();

    private:
        RequestGate* gate_;
    };

    // Blocks until a slot is free and the endpoint's spacing has elapsed.
    Permit acquire(const std::string& endpoint, std::chrono::nanoseconds min_interval);

    [[nodiscard]] int in_flight() const;
    [[nodiscard]] int peak_in_flight() const;

private:
    void release();

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    int max_concurrent_;
    int in_flight_ = 0;
    int peak_ = 0;
    std::map<std::string, Clock::time_point> next_slot_;
};

// OpenAI-compatible chat-completions client over HTTP(S).
class HttpChatBackend : public ChatBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpChatBackend(BackendConfig config, RequestGate* gate = &RequestGate::global(),
                             Sleeper sleeper = {});

    ChatResponse complete(const ChatRequest& request) override;

    [[nodiscard]] const BackendConfig& config() const { return config_; }
    [[nodiscard]] nlohmann::json request_body(const ChatRequest& request) const;

private:
    BackendConfig config_;
    RequestGate* gate_;
    Sleeper sleeper_;
    std::string origin_;  // scheme://host[:port]
    std::string path_;
};

// Deterministic stand-in for a model, loaded from JSONL fixture lines:
//   {"prompt_sha256": "...", "response": "..."}  exact prompt match
//   {"day_index": 3, "action": -0.5}             trading answer for a day
//   {"day_index": 4, "error": "..."}             simulated outage on a day
// Prompt matches win. Otherwise trading requests answer with the scripted
// action (0 when the day is unscripted) and analyst requests get a fixed
// text naming the role and day.
class MockBackend : public ChatBackend {
public:
    static constexpr std::string_view kModelId = "mock";

    MockBackend() = default;
    static std::shared_ptr<MockBackend> load(const std::filesystem::path& path);
    static std::shared_ptr<MockBackend> read(std::istream& in, std::string_view source = "<stream>");
    static std::shared_ptr<MockBackend> scripted(const std::vector<double>& actions);

    void add_response(std::string prompt_sha256, std::string response);
    void set_action(std::size_t day_index, double action);
    void set_outage(std::size_t day_index, std::string message);
    // Only answer hashed prompts; anything else is a BackendError.
    void set_strict(bool strict) { strict_ = strict; }

    ChatResponse complete(const ChatRequest& request) override;

    [[nodiscard]] std::size_t calls() const;

private:
    std::map<std::string, std::string> responses_;
    std::map<std::size_t, double> actions_;
    std::map<std::size_t, std::string> outages_;
    bool strict_ = false;
    mutable std::mutex mutex_;
    std::size_t calls_ = 0;
};

// Returns the user prompt verbatim.
class EchoBackend : public ChatBackend {
public:
    ChatResponse complete(const ChatRequest& request) override;
};

}  // namespace chainbt::agents
