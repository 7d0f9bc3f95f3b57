#include "chainbt/backend.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "chainbt/error.hpp"

namespace chainbt::agents {

namespace {

constexpr std::array<std::string_view, 4> kRoleNames{"market", "news", "trading", "reflection"};

AgentRole parse_role(std::string_view name) {
    for (std::size_t i = 0; i < kRoleNames.size(); ++i) {
        if (kRoleNames[i] == name) return static_cast<AgentRole>(i);
    }
    throw ConfigError(fmt::format("unknown agent role '{}'", name));
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::string analyst_placeholder(const ChatRequest& r) {
    return fmt::format("Mock {} analysis for day {} ({}).", role_name(r.role), r.day_index,
                       r.date.iso());
}

}  // namespace

std::string_view role_name(AgentRole role) { return kRoleNames[static_cast<std::size_t>(role)]; }

nlohmann::json exchange_to_json(const ModelExchange& e) {
    nlohmann::json j;
    j["role"] = role_name(e.role);
    j["day_index"] = e.day_index;
    j["date"] = e.date.iso();
    j["system_prompt"] = e.system_prompt;
    j["user_prompt"] = e.user_prompt;
    j["response"] = e.response;
    j["model_id"] = e.model_id;
    j["latency_ms"] = e.latency.count();
    j["retries"] = e.retries;
    if (!e.note.empty()) j["note"] = e.note;
    return j;
}

ModelExchange exchange_from_json(const nlohmann::json& j) {
    try {
        ModelExchange e;
        e.role = parse_role(j.at("role").get<std::string>());
        e.day_index = j.at("day_index").get<std::size_t>();
        e.date = Date::parse(j.at("date").get<std::string>());
        e.system_prompt = j.at("system_prompt").get<std::string>();
        e.user_prompt = j.at("user_prompt").get<std::string>();
        e.response = j.at("response").get<std::string>();
        e.model_id = j.at("model_id").get<std::string>();
        e.latency = std::chrono::milliseconds{j.at("latency_ms").get<long>()};
        e.retries = j.at("retries").get<int>();
        e.note = j.value("note", "");
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw DataError(fmt::format("invalid exchange record: {}", ex.what()));
    }
}

std::string render_action_response(double action, std::string_view rationale) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), action,
                                   std::chars_format::fixed);
    std::string number = ec == std::errc{} ? std::string(buf.data(), ptr) : fmt::format("{}", action);
    if (number == "-0") number = "0";
    return fmt::format("Rationale: {}\nAction: {}", rationale, number);
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 digest failed");
    }
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
    return out;
}

std::string prompt_hash(const ChatRequest& request) {
    return sha256_hex(request.system_prompt + "\n" + request.user_prompt);
}

BackendConfig BackendConfig::from_json(const nlohmann::json& j) {
    BackendConfig c;
    try {
        c.endpoint = j.value("endpoint", c.endpoint);
        c.model = j.value("model", c.model);
        c.temperature = j.value("temperature", c.temperature);
        if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<long>();
        c.timeout = std::chrono::milliseconds{
            static_cast<long>(j.value("timeout_seconds", c.timeout.count() / 1000.0) * 1000)};
        c.max_retries = j.value("max_retries", c.max_retries);
        c.initial_backoff = std::chrono::milliseconds{j.value("initial_backoff_ms", c.initial_backoff.count())};
        c.max_backoff = std::chrono::milliseconds{j.value("max_backoff_ms", c.max_backoff.count())};
        c.requests_per_minute = j.value("requests_per_minute", c.requests_per_minute);
        c.max_concurrent = j.value("max_concurrent", c.max_concurrent);
        c.api_key_env = j.value("api_key_env", c.api_key_env);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("invalid backend config: {}", e.what()));
    }
    if (c.max_retries < 0) throw ConfigError("backend max_retries must be >= 0");
    if (c.max_concurrent < 1) throw ConfigError("backend max_concurrent must be >= 1");
    if (c.timeout.count() <= 0) throw ConfigError("backend timeout must be > 0");
    if (c.temperature < 0) throw ConfigError("backend temperature must be >= 0");
    return c;
}

BackendConfig BackendConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

nlohmann::json BackendConfig::to_json() const {
    nlohmann::json j;
    j["endpoint"] = endpoint;
    j["model"] = model;
    j["temperature"] = temperature;
    j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
    j["timeout_seconds"] = static_cast<double>(timeout.count()) / 1000.0;
    j["max_retries"] = max_retries;
    j["initial_backoff_ms"] = initial_backoff.count();
    j["max_backoff_ms"] = max_backoff.count();
    j["requests_per_minute"] = requests_per_minute;
    j["max_concurrent"] = max_concurrent;
    j["api_key_env"] = api_key_env;
    return j;
}

std::chrono::milliseconds backoff_delay(const BackendConfig& config, int attempt) {
    auto delay = config.initial_backoff;
    for (int i = 1; i < attempt && delay < config.max_backoff; ++i) delay *= 2;
    return std::min(delay, config.max_backoff);
}

RequestGate::RequestGate(int max_concurrent) : max_concurrent_(std::max(1, max_concurrent)) {}

RequestGate& RequestGate::global() {
    static RequestGate gate;
    return gate;
}

void RequestGate::set_max_concurrent(int max_concurrent) {
    {
        std::lock_guard lock(mutex_);
        max_concurrent_ = std::max(1, max_concurrent);
    }
    cv_.notify_all();
}

RequestGate::Permit::~Permit() {
    if (gate_ != nullptr) gate_->release();
}

RequestGate::Permit RequestGate::acquire(const std::string& endpoint,
                                         std::chrono::nanoseconds min_interval) {
    Clock::time_point slot;
    {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return in_flight_ < max_concurrent_; });
        ++in_flight_;
        peak_ = std::max(peak_, in_flight_);
        auto now = Clock::now();
        auto& next = next_slot_[endpoint];
        slot = std::max(now, next);
        next = slot + std::chrono::duration_cast<Clock::duration>(min_interval);
    }
    Permit permit(this);
    std::this_thread::sleep_until(slot);
    return permit;
}

int RequestGate::in_flight() const {
    std::lock_guard lock(mutex_);
    return in_flight_;
}

int RequestGate::peak_in_flight() const {
    std::lock_guard lock(mutex_);
    return peak_;
}

void RequestGate::release() {
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    cv_.notify_one();
}

HttpChatBackend::HttpChatBackend(BackendConfig config, RequestGate* gate, Sleeper sleeper)
    : config_(std::move(config)), gate_(gate), sleeper_(std::move(sleeper)) {
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    const auto& url = config_.endpoint;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError(fmt::format("backend endpoint '{}' has no scheme", url));
    }
    auto path_start = url.find('/', scheme_end + 3);
    origin_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
    if (gate_ != nullptr) gate_->set_max_concurrent(config_.max_concurrent);
}

nlohmann::json HttpChatBackend::request_body(const ChatRequest& request) const {
    nlohmann::json body;
    body["model"] = config_.model;
    body["temperature"] = config_.temperature;
    if (config_.seed) body["seed"] = *config_.seed;
    body["messages"] = nlohmann::json::array(
        {{{"role", "system"}, {"content", request.system_prompt}},
         {{"role", "user"}, {"content", request.user_prompt}}});
    return body;
}

ChatResponse HttpChatBackend::complete(const ChatRequest& request) {
    const auto body = request_body(request).dump();
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
        headers.emplace("Authorization", fmt::format("Bearer {}", key));
    }
    const auto interval = config_.requests_per_minute > 0
                              ? std::chrono::nanoseconds{static_cast<long long>(
                                    60e9 / config_.requests_per_minute)}
                              : std::chrono::nanoseconds{0};
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) sleeper_(backoff_delay(config_, attempt));
        const auto started = std::chrono::steady_clock::now();
        httplib::Result res{nullptr, httplib::Error::Unknown};
        {
            std::optional<RequestGate::Permit> permit;
            if (gate_ != nullptr) permit.emplace(gate_->acquire(origin_, interval));
            httplib::Client client(origin_);
            client.set_connection_timeout(secs.count(), usecs.count());
            client.set_read_timeout(secs.count(), usecs.count());
            client.set_write_timeout(secs.count(), usecs.count());
            res = client.Post(path_, headers, body, "application/json");
        }
        const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
        if (!res) {
            last_error = fmt::format("transport error: {}", httplib::to_string(res.error()));
            continue;
        }
        if (res->status != 200) {
            last_error = fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 200));
            if (transient_status(res->status)) continue;
            throw BackendError(fmt::format("{} {}", config_.endpoint, last_error));
        }
        try {
            auto j = nlohmann::json::parse(res->body);
            ChatResponse out;
            out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
            out.model_id = j.value("model", config_.model);
            out.latency = latency;
            out.retries = attempt;
            return out;
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(fmt::format("{}: malformed completion response: {}", config_.endpoint,
                                           e.what()));
        }
    }
    throw BackendError(fmt::format("{}: giving up after {} retries: {}", config_.endpoint,
                                   config_.max_retries, last_error));
}

std::shared_ptr<MockBackend> MockBackend::read(std::istream& in, std::string_view source) {
    auto mock = std::make_shared<MockBackend>();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            if (j.contains("prompt_sha256")) {
                mock->add_response(j.at("prompt_sha256").get<std::string>(),
                                   j.at("response").get<std::string>());
            } else if (j.contains("day_index") && j.contains("error")) {
                mock->set_outage(j.at("day_index").get<std::size_t>(), j.at("error").get<std::string>());
            } else if (j.contains("day_index") && j.contains("action")) {
                mock->set_action(j.at("day_index").get<std::size_t>(), j.at("action").get<double>());
            } else {
                throw DataError("expected prompt_sha256/response, day_index/action or day_index/error");
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(fmt::format("{}:{}: {}", source, line_no, e.what()));
        } catch (const Error& e) {
            throw DataError(fmt::format("{}:{}: {}", source, line_no, e.what()));
        }
    }
    return mock;
}

std::shared_ptr<MockBackend> MockBackend::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
    return read(in, path.string());
}

std::shared_ptr<MockBackend> MockBackend::scripted(const std::vector<double>& actions) {
    auto mock = std::make_shared<MockBackend>();
    for (std::size_t i = 0; i < actions.size(); ++i) mock->set_action(i, actions[i]);
    return mock;
}

void MockBackend::add_response(std::string prompt_sha256, std::string response) {
    responses_[std::move(prompt_sha256)] = std::move(response);
}

void MockBackend::set_action(std::size_t day_index, double action) {
    if (!(action >= -1.0 && action <= 1.0)) {
        throw ConfigError(fmt::format("scripted action {} out of [-1, 1]", action));
    }
    actions_[day_index] = action;
}

void MockBackend::set_outage(std::size_t day_index, std::string message) {
    outages_[day_index] = std::move(message);
}

ChatResponse MockBackend::complete(const ChatRequest& request) {
    {
        std::lock_guard lock(mutex_);
        ++calls_;
    }
    ChatResponse out;
    out.model_id = std::string(kModelId);
    if (auto it = outages_.find(request.day_index); it != outages_.end()) {
        throw BackendError(fmt::format("mock outage on day {}: {}", request.day_index, it->second));
    }
    if (auto it = responses_.find(prompt_hash(request)); it != responses_.end()) {
        out.text = it->second;
        return out;
    }
    if (strict_) {
        throw BackendError(fmt::format("mock has no response for {} prompt {}", role_name(request.role),
                                       prompt_hash(request)));
    }
    if (request.role == AgentRole::trading) {
        auto it = actions_.find(request.day_index);
        out.text = render_action_response(it == actions_.end() ? 0.0 : it->second);
    } else {
        out.text = analyst_placeholder(request);
    }
    return out;
}

std::size_t MockBackend::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

ChatResponse EchoBackend::complete(const ChatRequest& request) {
    return ChatResponse{request.user_prompt, "echo", std::chrono::milliseconds{0}, 0};
}

}  // namespace chainbt::agents
