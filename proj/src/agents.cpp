#include "chainbt/agents.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <regex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "chainbt/error.hpp"
#include "chainbt/indicators.hpp"

namespace chainbt::agents {

namespace {

constexpr std::array<AblationName, 6> kAblations{AblationName::full,        AblationName::no_reflection,
                                                 AblationName::no_news,     AblationName::no_txnstats,
                                                 AblationName::no_technical, AblationName::base};
constexpr std::array<std::string_view, 6> kAblationLabels{"full",        "no_reflection", "no_news",
                                                          "no_txnstats", "no_technical",  "base"};

constexpr std::string_view kMarketSystem =
    "You are a cryptocurrency market analyst. Read the technical indicators and write a short "
    "report on the market's direction and momentum.";
constexpr std::string_view kNewsSystem =
    "You are a cryptocurrency news analyst. Identify the relevant recent events in the articles "
    "and assess their significance and likely market impact.";
constexpr std::string_view kTradingSystem =
    "You are a cryptocurrency trading agent making one decision per day. Weigh the information "
    "provided, give a concise rationale, and end with a final line of the form "
    "\"Action: <number>\" where the number is in [-1, 1].";
constexpr std::string_view kReflectionSystem =
    "You are a trading performance reviewer. Analyze the recent prompts, decisions and realized "
    "returns, identify which information was most impactful and why, and give guidance for the "
    "next decision.";
constexpr std::string_view kParseRetry =
    "Respond with a single number in [-1, 1] on a final line of the form \"Action: <number>\".";

constexpr std::string_view kNoNews = "No recent news.";
constexpr std::string_view kNoTxnStats = "No on-chain transaction statistics available.";
constexpr std::string_view kNoMarket = "Insufficient price history for technical indicators.";

// Prices below 10 USD get four decimals so small-cap assets stay readable.
std::string usd(double v) { return std::fabs(v) >= 10 ? fmt::format("{:.2f}", v) : fmt::format("{:.4f}", v); }

std::string plain(double v) { return format_number(v); }

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string head(std::string_view text, std::size_t limit, bool& cut) {
    if (text.size() <= limit) return std::string(text);
    cut = true;
    return std::string(text.substr(0, limit)) + " [...]";
}

ChatResponse call_logged(ChatBackend& backend, const ChatRequest& req, std::vector<ModelExchange>* log) {
    ModelExchange ex{req.role, req.day_index, req.date, req.system_prompt, req.user_prompt, {}, {},
                     std::chrono::milliseconds{0}, 0, {}};
    try {
        auto res = backend.complete(req);
        ex.response = res.text;
        ex.model_id = res.model_id;
        ex.latency = res.latency;
        ex.retries = res.retries;
        if (log != nullptr) log->push_back(std::move(ex));
        return res;
    } catch (const BackendError& e) {
        ex.note = fmt::format("backend_error: {}", e.what());
        if (log != nullptr) log->push_back(std::move(ex));
        throw;
    }
}

}  // namespace

AblationConfig AblationConfig::make(AblationName name) {
    AblationConfig c{name, {true, true, true, true}};
    switch (name) {
        case AblationName::full: break;
        case AblationName::no_reflection: c.flags.reflection = false; break;
        case AblationName::no_news: c.flags.news = false; break;
        case AblationName::no_txnstats: c.flags.txn_stats = false; break;
        case AblationName::no_technical: c.flags.technical = false; break;
        case AblationName::base: c.flags = PromptFlags{}; break;
    }
    return c;
}

AblationConfig AblationConfig::parse(std::string_view name) {
    for (std::size_t i = 0; i < kAblationLabels.size(); ++i) {
        if (kAblationLabels[i] == name) return make(kAblations[i]);
    }
    throw ConfigError(fmt::format("unknown ablation '{}'", name));
}

std::string_view AblationConfig::label() const {
    return kAblationLabels[static_cast<std::size_t>(name)];
}

std::span<const AblationName> all_ablations() { return kAblations; }

std::string_view market_system_prompt() { return kMarketSystem; }
std::string_view news_system_prompt() { return kNewsSystem; }
std::string_view trading_system_prompt() { return kTradingSystem; }
std::string_view reflection_system_prompt() { return kReflectionSystem; }
std::string_view parse_retry_instruction() { return kParseRetry; }

std::string PromptBundle::render() const {
    std::string out = fmt::format("{}\n{}\n", kBaseMarker, base);
    auto section = [&](std::string_view marker, const std::optional<std::string>& body) {
        if (body) out += fmt::format("\n{}\n{}\n", marker, *body);
    };
    section(kTechnicalMarker, technical);
    section(kTxnStatsMarker, txn_stats);
    section(kNewsMarker, news_digest);
    section(kReflectionMarker, reflection);
    return out;
}

AnalystReport build_market_report(const DecisionContext& ctx, ChatBackend& backend,
                                  const AgentConfig&, std::vector<ModelExchange>* log) {
    AnalystReport report;
    report.kind = ReportKind::market;
    if (ctx.market_history.empty()) {
        report.insufficient_data = true;
        report.text = std::string(kNoMarket);
        return report;
    }
    std::vector<double> opens;
    opens.reserve(ctx.market_history.size());
    for (const auto& d : ctx.market_history) opens.push_back(d.open);
    report.window_start = ctx.market_history.front().date;
    report.window_end = ctx.market_history.back().date;

    auto sma_line = [&](std::size_t w) {
        if (opens.size() < w) return fmt::format("SMA({}): n/a", w);
        return fmt::format("SMA({}): {}", w, usd(*indicators::sma(opens, w).back()));
    };
    const auto m = indicators::macd(opens).back();
    std::string boll = "Bollinger(20, 2): n/a";
    if (opens.size() >= 20) {
        const auto b = *indicators::bollinger(opens).back();
        boll = fmt::format("Bollinger(20, 2): upper {}, middle {}, lower {}", usd(b.upper),
                           usd(b.middle), usd(b.lower));
    }
    const auto prompt = fmt::format(
        "Technical indicators for {} computed from daily open prices through {} ({} days).\n"
        "Last open: {}\n{}\n{}\n{}\nMACD(12, 26, 9):\nMACD: {}\nSignal: {}\nHistogram: {}\n{}\n"
        "Summarize the market's direction and momentum.",
        ctx.asset, report.window_end->iso(), opens.size(), usd(opens.back()), sma_line(5),
        sma_line(20), sma_line(30), usd(m.macd), usd(m.signal), usd(m.histogram), boll);
    ChatRequest req{AgentRole::market, ctx.day_index, ctx.today, std::string(kMarketSystem), prompt};
    report.text = call_logged(backend, req, log).text;
    report.backend_called = true;
    return report;
}

AnalystReport build_news_report(const DecisionContext& ctx, ChatBackend& backend,
                                const AgentConfig& config, std::vector<ModelExchange>* log) {
    AnalystReport report;
    report.kind = ReportKind::news;
    const Date newest = ctx.today.plus_days(-ctx.info_lag_days);
    const Date oldest = newest.plus_days(-(std::max(config.news_window_days, 1) - 1));
    std::vector<const NewsItem*> items;
    for (const auto& n : ctx.news_history) {
        if (n.date >= oldest && n.date <= newest) items.push_back(&n);
    }
    if (items.empty()) {
        report.text = std::string(kNoNews);
        return report;
    }

    std::vector<std::string> blocks;
    for (const auto* n : items) {
        bool cut = false;
        auto body = head(n->text, config.news_article_chars, cut);
        report.truncated |= cut;
        blocks.push_back(fmt::format("{} | {} | {}\n{}", n->date.iso(),
                                     n->source.empty() ? "unknown source" : n->source, n->title, body));
    }
    auto total = [&] {
        std::size_t s = 0;
        for (const auto& b : blocks) s += b.size() + 2;
        return s;
    };
    std::size_t first = 0;
    while (blocks.size() - first > 1 && total() > config.news_char_budget) {
        blocks[first].clear();
        ++first;
        ++report.dropped_items;
        report.truncated = true;
    }
    blocks.erase(blocks.begin(), blocks.begin() + static_cast<long>(first));
    items.erase(items.begin(), items.begin() + static_cast<long>(first));
    if (blocks.front().size() > config.news_char_budget) {
        bool cut = false;
        blocks.front() = head(blocks.front(), config.news_char_budget, cut);
        report.truncated = true;
    }
    report.window_start = items.front()->date;
    report.window_end = items.back()->date;

    std::string prompt = fmt::format("News about {} published {} to {}:\n", ctx.asset,
                                     report.window_start->iso(), report.window_end->iso());
    for (std::size_t i = 0; i < blocks.size(); ++i) prompt += fmt::format("\n[{}] {}\n", i + 1, blocks[i]);
    prompt += fmt::format(
        "\nIdentify the relevant events and assess their significance for the {} price.", ctx.asset);
    ChatRequest req{AgentRole::news, ctx.day_index, ctx.today, std::string(kNewsSystem), prompt};
    report.text = call_logged(backend, req, log).text;
    report.backend_called = true;
    return report;
}

std::string render_txn_stats(const DecisionContext& ctx, std::size_t days) {
    if (ctx.txn_stats_history.empty() || days == 0) return std::string(kNoTxnStats);
    auto rows = ctx.txn_stats_history.last(std::min(days, ctx.txn_stats_history.size()));
    const auto unit = ctx.txn_value_unit.empty() ? std::string("native units") : ctx.txn_value_unit;
    std::string out = fmt::format("Daily on-chain activity for {} (most recent last):", ctx.asset);
    for (const auto& r : rows) {
        out += fmt::format(
            "\n{}: transactions {}, active wallets {}, value transferred {} {}, average gas price "
            "{}, gas consumed {}",
            r.date.iso(), plain(r.num_transactions), plain(r.active_wallets),
            plain(r.total_value_transferred), unit, plain(r.avg_gas_price), plain(r.total_gas_consumed));
    }
    return out;
}

PromptBundle build_trading_prompt(const DecisionContext& ctx, const AnalystReports& reports,
                                  const AgentConfig& config) {
    PromptBundle b;
    b.flags = config.ablation.flags;
    std::string base = fmt::format(
        "You trade {asset} once per day at the daily open. A fee of {fee}% of the traded value is "
        "charged on every trade.\n"
        "Valid actions: a number in [-1, 1]. A value in (0, 1] spends that fraction of your cash "
        "on {asset}; a value in [-1, 0) sells that fraction of your {asset} holdings; 0 holds.\n"
        "Date: {date}\nCash: {cash} USD\nHoldings: {units} {asset}\nRecent open prices (USD):",
        fmt::arg("asset", ctx.asset), fmt::arg("fee", plain(ctx.fee_rate * 100)),
        fmt::arg("date", ctx.today.iso()), fmt::arg("cash", fmt::format("{:.2f}", ctx.portfolio.cash)),
        fmt::arg("units", fmt::format("{:.6f}", ctx.portfolio.holdings)));
    const std::size_t n = std::max<std::size_t>(config.recent_prices, 1);
    const auto prior = ctx.market_history.last(std::min(n - 1, ctx.market_history.size()));
    for (const auto& d : prior) base += fmt::format("\n{}: {}", d.date.iso(), usd(d.open));
    base += fmt::format("\n{}: {} (today)", ctx.today.iso(), usd(ctx.today_open));
    b.base = std::move(base);

    if (b.flags.technical) {
        b.technical = reports.market ? reports.market->text : std::string(kNoMarket);
    }
    if (b.flags.txn_stats) b.txn_stats = render_txn_stats(ctx, config.txn_stats_days);
    if (b.flags.news) b.news_digest = reports.news ? reports.news->text : std::string(kNoNews);
    if (b.flags.reflection && reports.reflection) b.reflection = reports.reflection->text;
    return b;
}

std::optional<TradeAction> parse_action(std::string_view response,
                                        std::span<const std::string> keywords) {
    static const std::regex number_re(
        R"((?:^|[^A-Za-z0-9_.\-+])([-+]?(?:\d+(?:\.\d+)?|\.\d+))(?![A-Za-z0-9_]))");
    std::vector<std::string> lowered_keywords;
    for (const auto& k : keywords) lowered_keywords.push_back(lower(k));

    std::optional<double> last_any;
    std::optional<double> last_keyword;
    std::size_t pos = 0;
    while (pos <= response.size()) {
        auto nl = response.find('\n', pos);
        std::string line(response.substr(pos, nl == std::string_view::npos ? std::string_view::npos
                                                                           : nl - pos));
        // U+2212 MINUS SIGN
        for (std::size_t at; (at = line.find("\xE2\x88\x92")) != std::string::npos;) {
            line.replace(at, 3, "-");
        }
        const auto lowered = lower(line);
        const bool keyword_line =
            std::any_of(lowered_keywords.begin(), lowered_keywords.end(),
                        [&](const std::string& k) { return lowered.find(k) != std::string::npos; });
        for (std::sregex_iterator it(line.begin(), line.end(), number_re), end; it != end; ++it) {
            const std::string tok = (*it)[1].str();
            const char* b = tok.data();
            if (*b == '+') ++b;
            double v = 0;
            auto [ptr, ec] = std::from_chars(b, tok.data() + tok.size(), v);
            if (ec != std::errc{} || ptr != tok.data() + tok.size()) continue;
            if (!(v >= -1.0 && v <= 1.0)) continue;
            if (v == 0) v = 0;  // fold -0
            last_any = v;
            if (keyword_line) last_keyword = v;
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (last_keyword) return TradeAction{*last_keyword};
    if (last_any) return TradeAction{*last_any};
    return std::nullopt;
}

std::optional<TradeAction> parse_action(std::string_view response) {
    static const std::vector<std::string> keywords{"action", "decision"};
    return parse_action(response, keywords);
}

std::optional<AnalystReport> run_reflection(std::span<const ReflectionEntry> history,
                                            ChatBackend& backend, std::size_t day_index, Date today,
                                            const AgentConfig& config,
                                            std::vector<ModelExchange>* log) {
    if (history.empty()) return std::nullopt;
    AnalystReport report;
    report.kind = ReportKind::reflection;
    report.window_start = history.front().date;
    report.window_end = history.back().date;
    std::string prompt = fmt::format("Review of the last {} trading day(s):\n", history.size());
    for (const auto& h : history) {
        bool cut = false;
        prompt += fmt::format(
            "\nDay {}: action {}, realized return {:+.2f}%\nPrompt excerpt:\n{}\nResponse excerpt:\n{}\n",
            h.date.iso(), plain(h.action.fraction), h.daily_return * 100.0,
            head(h.prompt, config.reflection_prompt_chars, cut),
            head(h.response, config.reflection_prompt_chars, cut));
    }
    prompt +=
        "\nWhich information was most impactful for these outcomes, and why? Give concise "
        "guidance for the next decision.";
    ChatRequest req{AgentRole::reflection, day_index, today, std::string(kReflectionSystem), prompt};
    report.text = call_logged(backend, req, log).text;
    report.backend_called = true;
    return report;
}

AgentSession::AgentSession(AgentConfig config, std::shared_ptr<ChatBackend> backend)
    : config_(std::move(config)), backend_(std::move(backend)) {
    if (!backend_) throw ConfigError("agent session needs a backend");
    if (config_.max_parse_retries < 0) throw ConfigError("max_parse_retries must be >= 0");
}

TradeAction AgentSession::decide(const DecisionContext& ctx) {
    const auto& flags = config_.ablation.flags;
    AnalystReports reports;
    if (flags.technical) reports.market = build_market_report(ctx, *backend_, config_, &log_);
    if (flags.news) reports.news = build_news_report(ctx, *backend_, config_, &log_);
    if (flags.reflection) {
        std::map<Date, double> realized;
        for (const auto& p : ctx.past_decisions) realized[p.date] = p.daily_return;
        const Date from = ctx.today.plus_days(-config_.reflection_window_days);
        std::vector<ReflectionEntry> window;
        for (const auto& d : days_) {
            if (d.date >= from && d.date < ctx.today) {
                auto entry = d;
                if (auto it = realized.find(d.date); it != realized.end()) entry.daily_return = it->second;
                window.push_back(std::move(entry));
            }
        }
        try {
            reports.reflection = run_reflection(window, *backend_, ctx.day_index, ctx.today, config_, &log_);
        } catch (const BackendError&) {
            // Logged by call_logged; the day proceeds without reflection.
        }
    }

    auto bundle = build_trading_prompt(ctx, reports, config_);
    const auto prompt = bundle.render();
    prompts_.push_back(std::move(bundle));

    ChatRequest req{AgentRole::trading, ctx.day_index, ctx.today, std::string(kTradingSystem), prompt};
    std::optional<TradeAction> action;
    std::string response;
    for (int attempt = 0; attempt <= config_.max_parse_retries && !action; ++attempt) {
        if (attempt > 0) req.user_prompt = fmt::format("{}\n\n{}", prompt, kParseRetry);
        response = call_logged(*backend_, req, &log_).text;
        action = parse_action(response, config_.action_keywords);
        if (!action) log_.back().note = "parse_failure";
    }
    if (!action) {
        log_.back().note = "parse_failure: defaulted to hold";
        action = TradeAction{0.0};
    }
    days_.push_back(ReflectionEntry{ctx.today, *action, 0.0, prompt, response});
    return *action;
}

Strategy AgentSession::strategy() {
    return [this](const DecisionContext& ctx) { return decide(ctx); };
}

void AgentSession::write_audit_log(std::ostream& out) const {
    for (const auto& e : log_) out << exchange_to_json(e).dump() << '\n';
}

}  // namespace chainbt::agents
