#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "chainbt/agents.hpp"
#include "chainbt/artifact.hpp"
#include "chainbt/commands.hpp"
#include "cli.hpp"

namespace fs = std::filesystem;
using namespace chainbt;

namespace {

const std::string kData = std::string(CHAINBT_SOURCE_DIR) + "/data";
const std::string kFixtures = CHAINBT_FIXTURES;

struct Outcome {
    int code;
    std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() / ("chainbt_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    [[nodiscard]] const fs::path& path() const { return path_; }
    [[nodiscard]] std::string str() const { return path_.string(); }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<fs::path> files_in(const fs::path& dir, std::string_view ext = ".json") {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ext) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST(Cli, BacktestBuyAndHoldMatchesTrend) {
    TempDir out;
    const auto r = run_cli({"backtest", "--asset", "ETH", "--split", "bullish", "--strategy", "buy_and_hold",
                        "--fee", "0", "--data-dir", kData, "--out", out.str()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("| buy_and_hold |"), std::string::npos) << r.out;
    const auto files = files_in(out.path());
    ASSERT_EQ(files.size(), 1u);
    const auto artifact = artifact::read_json(files[0]);
    EXPECT_EQ(artifact["schema"], artifact::kRunSchema);
    EXPECT_NEAR(artifact["summary"]["total_return_pct"].get<double>(), 22.59, 0.5);
    EXPECT_EQ(artifact["config"]["fee_rate"], 0.0);
    EXPECT_EQ(artifact["config"]["strategy"]["kind"], "buy_and_hold");
}

TEST(Cli, MissingDataFileExitsTwoNamingPath) {
    const auto r = run_cli({"backtest", "--strategy", "sma", "--market", "/no/such/market.csv"});
    EXPECT_EQ(r.code, 2);
    const auto err = nlohmann::json::parse(r.err);
    EXPECT_EQ(err["exit_code"], 2);
    EXPECT_NE(err["message"].get<std::string>().find("/no/such/market.csv"), std::string::npos);
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, BadConfigExitsTwo) {
    EXPECT_EQ(run_cli({"backtest", "--strategy", "sma", "--fee", "1.5", "--data-dir", kData}).code, 2);
    EXPECT_EQ(run_cli({"backtest", "--strategy", "sma", "--capital", "0", "--data-dir", kData}).code, 2);
    EXPECT_EQ(run_cli({"backtest", "--strategy", "nope", "--data-dir", kData}).code, 2);
    EXPECT_EQ(run_cli({"backtest", "--strategy", "sma", "--param", "window", "--data-dir", kData}).code, 2);
    EXPECT_EQ(run_cli({"backtest", "--strategy", "sma", "--split", "winter", "--data-dir", kData}).code, 2);
    EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
    EXPECT_EQ(run_cli({}).code, 2);
    EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, StrategyFailureExitsOne) {
    TempDir dir;
    const auto preds = dir.path() / "p.csv";
    std::ofstream(preds) << "date,predicted_next_open\n2023-10-01,1800\n";
    const auto r = run_cli({"backtest", "--strategy", "forecaster", "--predictor", "file", "--predictions",
                        preds.string(), "--data-dir", kData});
    EXPECT_EQ(r.code, 1) << r.err;
    EXPECT_NE(r.err.find("2023-10-02"), std::string::npos) << r.err;
}

TEST(Cli, ArtifactsAreDeterministicAndReplayable) {
    TempDir a, b, c;
    const std::vector<std::string> base{"backtest", "--asset", "BTC",    "--split",    "sideways",
                                        "--strategy", "slma", "--param", "short=10", "--param",
                                        "long=30",  "--data-dir", kData};
    auto with_out = [&](const TempDir& d) {
        auto args = base;
        args.insert(args.end(), {"--out", d.str()});
        return args;
    };
    ASSERT_EQ(run_cli(with_out(a)).code, 0);
    ASSERT_EQ(run_cli(with_out(b)).code, 0);
    const auto fa = files_in(a.path());
    const auto fb = files_in(b.path());
    ASSERT_EQ(fa.size(), 1u);
    EXPECT_EQ(fa[0].filename(), fb[0].filename());
    EXPECT_EQ(slurp(fa[0]), slurp(fb[0]));

    const auto replay = run_cli({"backtest", "--config", fa[0].string(), "--out", c.str()});
    ASSERT_EQ(replay.code, 0) << replay.err;
    EXPECT_EQ(slurp(files_in(c.path())[0]), slurp(fa[0]));
}

TEST(Cli, TuneWritesReportAndCache) {
    TempDir dir;
    const auto cache = (dir.path() / "cache.json").string();
    const auto r = run_cli({"tune", "--asset", "SOL", "--strategy", "slma", "--data-dir", kData, "--cache", cache,
                        "--out", dir.str()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto files = files_in(dir.path());
    const auto report = std::find_if(files.begin(), files.end(), [](const fs::path& p) {
        return p.filename().string().rfind("tune-", 0) == 0;
    });
    ASSERT_NE(report, files.end());
    const auto j = artifact::read_json(*report);
    EXPECT_EQ(j["grid"].size(), 10u);
    EXPECT_EQ(j["config"]["split"], "validation");
    const auto cached = strategies::TunedParamCache::load(cache).get("SOL", strategies::StrategyKind::slma);
    ASSERT_TRUE(cached);
    EXPECT_EQ(strategies::spec_to_json(*cached), j["chosen"]);

    TempDir again;
    ASSERT_EQ(run_cli({"tune", "--asset", "SOL", "--strategy", "slma", "--data-dir", kData, "--out", again.str()}).code, 0);
    // Same selection; the configs differ only in the cache path.
    const auto rerun = artifact::read_json(files_in(again.path())[0]);
    EXPECT_EQ(rerun["grid"], j["grid"]);
    EXPECT_EQ(rerun["chosen"], j["chosen"]);

    const auto single = commands::cmd_tune(
        [&] {
            commands::RunConfig c;
            c.asset = "SOL";
            c.split = "validation";
            c.strategy = strategies::StrategySpec{strategies::StrategyKind::macd, {}, {}};
            c.resolve_data_paths(kData);
            return c;
        }());
    EXPECT_EQ(single.report.grid.size(), 1u);
    EXPECT_EQ(single.report.chosen, single.report.grid[0]);
}

TEST(Cli, CompareGoldenTable) {
    TempDir dir;
    const auto r = run_cli({"compare", "--asset", "ETH", "--data-dir", kData, "--cache", (dir.path() / "c.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, slurp(kFixtures + "/compare_eth_golden.md"));
}

TEST(Cli, CompareEmptyListIsHeaderOnly) {
    const auto r = run_cli({"compare", "--asset", "ETH", "--data-dir", kData, "--strategies", ""});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2);
}

TEST(Cli, CompareCachedPlusFreshEqualsAllFresh) {
    TempDir dir;
    const auto cache = (dir.path() / "c.json").string();
    commands::RunConfig cfg;
    cfg.asset = "BTC";
    cfg.cache_path = cache;
    cfg.out_dir = dir.str();
    cfg.resolve_data_paths(kData);
    using strategies::StrategyKind;
    const std::vector<StrategyKind> kinds{StrategyKind::buy_and_hold, StrategyKind::sma, StrategyKind::macd,
                                          StrategyKind::bollinger};
    const std::vector<std::string> conds{"bearish", "sideways", "bullish"};
    const auto fresh = commands::cmd_compare(cfg, kinds, conds);
    EXPECT_EQ(fresh.fresh_runs, 12u);
    EXPECT_EQ(fresh.cached_runs, 0u);

    // Drop every other run so the next call mixes loaded and recomputed rows.
    const auto runs = files_in(dir.path());
    std::size_t removed = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i].filename().string().rfind("run-", 0) == 0 && i % 2 == 0) {
            fs::remove(runs[i]);
            ++removed;
        }
    }
    const auto mixed = commands::cmd_compare(cfg, kinds, conds);
    EXPECT_EQ(mixed.fresh_runs, removed);
    EXPECT_EQ(mixed.cached_runs, 12u - removed);
    EXPECT_EQ(mixed.table, fresh.table);

    auto no_out = cfg;
    no_out.out_dir.clear();
    EXPECT_EQ(commands::cmd_compare(no_out, kinds, conds).table, fresh.table);
}

TEST(Cli, AgentRunScriptedMockEqualsDirectSequence) {
    TempDir dir, scripts;
    const auto mock = scripts.path() / "mock.jsonl";
    {
        std::ofstream f(mock);
        const std::vector<double> script{1, 0, -1};
        for (std::size_t i = 0; i < script.size(); ++i) {
            f << nlohmann::json{{"day_index", i}, {"action", script[i]}}.dump() << "\n";
        }
    }
    const auto r = run_cli({"agent-run", "--asset", "ETH", "--split", "bullish", "--data-dir", kData, "--mock",
                        mock.string(), "--out", dir.str()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto files = files_in(dir.path());
    ASSERT_EQ(files.size(), 1u);
    const auto agent = artifact::run_from_json(artifact::read_json(files[0]));

    commands::RunConfig cfg;
    cfg.asset = "ETH";
    cfg.split = "bullish";
    cfg.resolve_data_paths(kData);
    const auto dataset = commands::load_dataset(cfg);
    const auto direct = run_backtest(dataset, commands::resolve_split(cfg), [](const DecisionContext& c) {
        return TradeAction{c.day_index == 0 ? 1.0 : c.day_index == 2 ? -1.0 : 0.0};
    });
    EXPECT_EQ(agent, direct);
    EXPECT_EQ(files_in(dir.path(), ".jsonl").size(), 1u);
}

TEST(Cli, AgentRunBaseAblationHasNoNewsSection) {
    TempDir dir;
    const auto r = run_cli({"agent-run", "--asset", "ETH", "--data-dir", kData, "--mock",
                        kFixtures + "/mock_eth_bullish.jsonl", "--ablation", "base", "--out", dir.str()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto audit = files_in(dir.path(), ".jsonl");
    ASSERT_EQ(audit.size(), 1u);
    std::ifstream in(audit[0]);
    std::string line;
    int trading = 0;
    while (std::getline(in, line)) {
        const auto ex = agents::exchange_from_json(nlohmann::json::parse(line));
        EXPECT_EQ(ex.role, agents::AgentRole::trading);
        EXPECT_EQ(ex.user_prompt.find(agents::kNewsMarker), std::string::npos);
        EXPECT_NE(ex.user_prompt.find(agents::kBaseMarker), std::string::npos);
        ++trading;
    }
    EXPECT_EQ(trading, 61);
}

TEST(Cli, AgentRunOutageKeepsPartialAuditLog) {
    TempDir dir;
    const auto r = run_cli({"agent-run", "--asset", "ETH", "--data-dir", kData, "--mock",
                        kFixtures + "/mock_outage.jsonl", "--out", dir.str()});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(nlohmann::json::parse(r.err)["error"], "backend");
    const auto audit = files_in(dir.path(), ".jsonl");
    ASSERT_EQ(audit.size(), 1u);
    EXPECT_TRUE(files_in(dir.path()).empty());
    std::ifstream in(audit[0]);
    std::string line, last;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        last = line;
        ++n;
    }
    EXPECT_GT(n, 5u);
    const auto ex = agents::exchange_from_json(nlohmann::json::parse(last));
    EXPECT_EQ(ex.day_index, 5u);
    EXPECT_EQ(ex.note.rfind("backend_error", 0), 0u);
}

TEST(Cli, AgentRunNeedsABackend) {
    EXPECT_EQ(run_cli({"agent-run", "--asset", "ETH", "--data-dir", kData}).code, 2);
    EXPECT_EQ(run_cli({"agent-run", "--asset", "ETH", "--data-dir", kData, "--mock", kFixtures + "/mock_outage.jsonl",
                   "--ablation", "everything"})
                  .code,
              2);
}
