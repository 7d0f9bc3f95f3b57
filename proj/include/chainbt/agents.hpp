#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chainbt/backend.hpp"
#include "chainbt/engine.hpp"

namespace chainbt::agents {

// Section headers in the trading prompt. Each optional section appears only
// when its ablation flag is set.
inline constexpr std::string_view kBaseMarker = "### BASE";
inline constexpr std::string_view kTechnicalMarker = "### TECHNICAL ANALYSIS";
inline constexpr std::string_view kTxnStatsMarker = "### ON-CHAIN TRANSACTION STATISTICS";
inline constexpr std::string_view kNewsMarker = "### NEWS ANALYSIS";
inline constexpr std::string_view kReflectionMarker = "### REFLECTION";

struct PromptFlags {
    bool technical = false;
    bool news = false;
    bool txn_stats = false;
    bool reflection = false;

    friend bool operator==(const PromptFlags&, const PromptFlags&) = default;
};

enum class AblationName { full, no_reflection, no_news, no_txnstats, no_technical, base };

struct AblationConfig {
    AblationName name = AblationName::full;
    PromptFlags flags;

    static AblationConfig make(AblationName name);
    static AblationConfig parse(std::string_view name);
    [[nodiscard]] std::string_view label() const;
};

// The six named configurations in table order: full, no_reflection, no_news,
// no_txnstats, no_technical, base.
std::span<const AblationName> all_ablations();

enum class ReportKind { market, news, reflection };

struct AnalystReport {
    ReportKind kind = ReportKind::market;
    std::string text;
    // Inclusive date range of the inputs the report was built from; unset
    // when there was nothing to read.
    std::optional<Date> window_start;
    std::optional<Date> window_end;
    bool insufficient_data = false;
    bool truncated = false;        // news only: input trimmed to the budget
    std::size_t dropped_items = 0;  // news only: whole articles dropped
    bool backend_called = false;
};

struct AgentConfig {
    AblationConfig ablation = AblationConfig::make(AblationName::full);
    std::size_t recent_prices = 7;
    int news_window_days = 1;
    std::size_t news_char_budget = 6000;
    std::size_t news_article_chars = 1200;
    int reflection_window_days = 7;
    std::size_t reflection_prompt_chars = 600;
    std::size_t txn_stats_days = 7;
    int max_parse_retries = 2;
    std::vector<std::string> action_keywords{"action", "decision"};
};

struct PromptBundle {
    std::string base;
    std::optional<std::string> technical;
    std::optional<std::string> txn_stats;
    std::optional<std::string> news_digest;
    std::optional<std::string> reflection;
    PromptFlags flags;

    // Sections joined in a fixed order, each under its marker.
    [[nodiscard]] std::string render() const;
};

struct AnalystReports {
    std::optional<AnalystReport> market;
    std::optional<AnalystReport> news;
    std::optional<AnalystReport> reflection;
};

// Indicators over the opens strictly before the decision day. Empty history
// yields an insufficient-data report without calling the backend.
AnalystReport build_market_report(const DecisionContext& ctx, ChatBackend& backend,
                                  const AgentConfig& config = {},
                                  std::vector<ModelExchange>* log = nullptr);

// Summarizes the news visible under the information lag, limited to the
// configured window. No items means a fixed "no recent news" report and no
// backend call.
AnalystReport build_news_report(const DecisionContext& ctx, ChatBackend& backend,
                                const AgentConfig& config = {},
                                std::vector<ModelExchange>* log = nullptr);

// Plain-text digest of the most recent txn-stats rows (no model involved).
std::string render_txn_stats(const DecisionContext& ctx, std::size_t days);

PromptBundle build_trading_prompt(const DecisionContext& ctx, const AnalystReports& reports,
                                  const AgentConfig& config);

// Final number in [-1, 1] found in `response`, preferring lines that contain
// one of `keywords` (case-insensitive). Tokens glued to letters or digits
// (dates, "1st", "7d") are ignored.
std::optional<TradeAction> parse_action(std::string_view response,
                                        std::span<const std::string> keywords);
std::optional<TradeAction> parse_action(std::string_view response);

// One past trading day as seen by the reflection step.
struct ReflectionEntry {
    Date date;
    TradeAction action;
    double daily_return = 0;
    std::string prompt;    // trading prompt shown to the model that day
    std::string response;  // its answer
};

// Empty history skips the backend and returns nullopt.
std::optional<AnalystReport> run_reflection(std::span<const ReflectionEntry> history,
                                            ChatBackend& backend, std::size_t day_index, Date today,
                                            const AgentConfig& config = {},
                                            std::vector<ModelExchange>* log = nullptr);

// Runs the daily pipeline against a backend and keeps the audit log. The
// session must outlive any Strategy obtained from it.
class AgentSession {
public:
    AgentSession(AgentConfig config, std::shared_ptr<ChatBackend> backend);

    TradeAction decide(const DecisionContext& ctx);
    Strategy strategy();

    [[nodiscard]] const std::vector<ModelExchange>& audit_log() const { return log_; }
    // Trading prompt of each decided day, in order.
    [[nodiscard]] const std::vector<PromptBundle>& prompts() const { return prompts_; }
    [[nodiscard]] const AgentConfig& config() const { return config_; }

    void write_audit_log(std::ostream& out) const;

private:
    AgentConfig config_;
    std::shared_ptr<ChatBackend> backend_;
    std::vector<ModelExchange> log_;
    std::vector<PromptBundle> prompts_;
    std::vector<ReflectionEntry> days_;
};

// System prompts, exposed so fixtures can hash exact requests.
std::string_view market_system_prompt();
std::string_view news_system_prompt();
std::string_view trading_system_prompt();
std::string_view reflection_system_prompt();
std::string_view parse_retry_instruction();

}  // namespace chainbt::agents
