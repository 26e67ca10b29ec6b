// Config parsing, the cmd_* layer, and the installed binary's exit-code
// contract. The pipeline tests run on a tiny synthetic world so the whole
// suite stays in the seconds range.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nmtmask/commands.hpp"
#include "nmtmask/config.hpp"
#include "support/oracles.hpp"
#include "support/toyworld.hpp"

using namespace nmtmask;
namespace fs = std::filesystem;

namespace {

std::string write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path.string();
}

// A trained tiny world shared by the cmd_* tests: building it once keeps the
// suite fast, and every test that mutates state writes into its own out dir.
struct CliFixture {
    toyworld::World world;
    std::string wdir;
    std::string config_path;
    RunConfig cfg;
    std::string ckpt;

    CliFixture() {
        toyworld::WorldOptions opt;
        opt.pairs = 80;
        opt.seed = 321;
        world = toyworld::make_world(opt);
        wdir = world.dir.string();
        config_path = toyworld::write_config(world, world.dir / "out",
                                             "model.hidden_dim = 8\n"
                                             "model.align_dim = 8\n"
                                             "train.epochs = 2\n"
                                             "q.episodes = 12\n"
                                             "q.epsilon0 = 0.5\n");
        cfg = RunConfig::load(config_path);
        ckpt = cmd_train(cfg);
    }
};

CliFixture& fixture() {
    static CliFixture f;
    return f;
}

}  // namespace

TEST_CASE("run config defaults") {
    RunConfig cfg;
    CHECK(cfg.seed == 42);
    CHECK(cfg.split_ratios.train == 0.8);
    CHECK(cfg.split_ratios.val == 0.1);
    CHECK(cfg.split_ratios.test == 0.1);
    CHECK(cfg.graph_threshold == 0.79);
    CHECK(cfg.hidden_dim == 128);
    CHECK_FALSE(cfg.align_dim.has_value());
    CHECK(cfg.resolved_align_dim() == 256);
    CHECK(cfg.train_lr == 0.05);
    CHECK(cfg.train_epochs == 10);
    CHECK(cfg.train_grad_clip == 5.0);
    CHECK(cfg.q_alpha == 1e-3);
    CHECK(cfg.q_horizon == 4);
    CHECK(cfg.q_epsilon0 == 0.9);
    CHECK(cfg.q_bonus == 0.25);
    CHECK(cfg.out_dir == "out");

    // Unset stage seeds derive from the global seed; explicit ones win.
    CHECK(cfg.resolved_corpus_seed() == derive_seed(42, "corpus"));
    CHECK(cfg.resolved_train_seed() == derive_seed(42, "train"));
    CHECK(cfg.resolved_q_seed() == derive_seed(42, "q"));
    cfg.train_seed = 7;
    CHECK(cfg.resolved_train_seed() == 7);
    cfg.seed = 43;
    CHECK(cfg.resolved_corpus_seed() == derive_seed(43, "corpus"));
}

TEST_CASE("run config set: values, quoting, validation") {
    RunConfig cfg;
    cfg.set("corpus.path", "  \"my corpus.tsv\"  ");
    CHECK(cfg.corpus_path == "my corpus.tsv");
    cfg.set("corpus.max_pairs", "500");
    REQUIRE(cfg.corpus_max_pairs.has_value());
    CHECK(*cfg.corpus_max_pairs == 500);
    cfg.set("corpus.split_ratios", "0.7,0.2,0.1");
    CHECK(cfg.split_ratios.train == 0.7);
    CHECK(cfg.split_ratios.test == 0.1);
    cfg.set("model.align_dim", "96");
    CHECK(cfg.resolved_align_dim() == 96);
    cfg.set("q.alpha", "0.5");
    CHECK(cfg.q_alpha == 0.5);

    CHECK_THROWS_AS(cfg.set("nonsense.key", "1"), ConfigError);
    CHECK_THROWS_WITH(cfg.set("nonsense.key", "1"),
                      Catch::Matchers::ContainsSubstring("unknown config key: 'nonsense.key'"));
    CHECK_THROWS_AS(cfg.set("embeddings.dim", "0"), ConfigError);
    CHECK_THROWS_AS(cfg.set("graph.threshold", "1.5"), ConfigError);
    CHECK_THROWS_AS(cfg.set("q.alpha", "0"), ConfigError);
    CHECK_THROWS_AS(cfg.set("q.alpha", "1.25"), ConfigError);
    CHECK_THROWS_AS(cfg.set("q.epsilon0", "2"), ConfigError);
    CHECK_THROWS_AS(cfg.set("train.lr", "-0.1"), ConfigError);
    CHECK_THROWS_AS(cfg.set("seed", "notanumber"), ConfigError);
    CHECK_THROWS_AS(cfg.set("corpus.split_ratios", "0.5,0.5"), ConfigError);
}

TEST_CASE("run config load: comments, blank lines, line-numbered errors") {
    std::string dir = toyworld::make_temp_dir("cfg").string();
    std::string good = write_file(fs::path(dir) / "good.cfg",
                                  "# run setup\n"
                                  "seed = 9\n"
                                  "\n"
                                  "corpus.path = data.tsv  # trailing comment\n"
                                  "model.hidden_dim=16\n");
    RunConfig cfg = RunConfig::load(good);
    CHECK(cfg.seed == 9);
    CHECK(cfg.corpus_path == "data.tsv");
    CHECK(cfg.hidden_dim == 16);

    std::string no_eq = write_file(fs::path(dir) / "noeq.cfg", "seed = 1\njust words\n");
    CHECK_THROWS_WITH(RunConfig::load(no_eq),
                      Catch::Matchers::ContainsSubstring("line 2"));
    std::string bad_key = write_file(fs::path(dir) / "badkey.cfg", "speed = 1\n");
    CHECK_THROWS_WITH(RunConfig::load(bad_key),
                      Catch::Matchers::ContainsSubstring("unknown config key: 'speed'"));
    CHECK_THROWS_AS(RunConfig::load(dir + "/missing.cfg"), ConfigError);
}

TEST_CASE("load_pipeline requires paths and reports coverage") {
    RunConfig cfg;
    CHECK_THROWS_WITH(load_pipeline(cfg),
                      Catch::Matchers::ContainsSubstring("corpus.path"));
    cfg.corpus_path = fixture().world.corpus_path;
    CHECK_THROWS_WITH(load_pipeline(cfg),
                      Catch::Matchers::ContainsSubstring("embeddings.path"));
    cfg.embeddings_path = fixture().world.embeddings_path;
    CHECK_THROWS_WITH(load_pipeline(cfg),
                      Catch::Matchers::ContainsSubstring("embeddings.dim"));

    Pipeline p = load_pipeline(fixture().cfg);
    CHECK(p.corpus.pairs.size() == 80);
    CHECK(p.dropped_pairs == 0);
    CHECK(p.embedding_report.missing.empty());
    CHECK(p.table.dim == 32);
    CHECK(p.splits.train.pairs.size() == 64);
    CHECK(p.splits.val.pairs.size() + p.splits.test.pairs.size() == 16);
}

TEST_CASE("cmd_train writes checkpoint and loss trace deterministically") {
    CliFixture& f = fixture();
    REQUIRE(f.ckpt == f.cfg.out_dir + "/model.ckpt");
    REQUIRE(fs::exists(f.ckpt));
    std::string trace = oracles::slurp(f.cfg.out_dir + "/loss_trace.csv");
    // header + one line per epoch
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 1 + f.cfg.train_epochs);
    CHECK(trace.rfind("epoch,loss\n", 0) == 0);

    RunConfig again = f.cfg;
    again.out_dir = f.wdir + "/out_again";
    std::string ckpt2 = cmd_train(again);
    CHECK(oracles::slurp(ckpt2) == oracles::slurp(f.ckpt));
    CHECK(oracles::slurp(again.out_dir + "/loss_trace.csv") == trace);

    RunConfig reseeded = again;
    reseeded.out_dir = f.wdir + "/out_reseed";
    reseeded.seed = 977;
    CHECK(oracles::slurp(cmd_train(reseeded)) != oracles::slurp(f.ckpt));
}

TEST_CASE("cmd_analyze emits the satisfaction table and optional fits") {
    CliFixture& f = fixture();
    AnalyzeOptions opt;
    std::ostringstream out;
    cmd_analyze(f.cfg, opt, out);

    std::string csv = oracles::slurp(f.cfg.out_dir + "/satisfaction.csv");
    CHECK(csv.rfind("k_rule,average_satisfaction\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.find("floor(log4(p)),") != std::string::npos);
    CHECK(csv.find("floor(log3(p)),") != std::string::npos);
    CHECK(csv.find("floor(log2(p)),") != std::string::npos);
    CHECK(csv.find("floor(p/2),") != std::string::npos);
    CHECK(out.str().find("floor(log2(p)): ") != std::string::npos);
    REQUIRE(fs::exists(f.cfg.out_dir + "/attention_matrices.json"));

    // Re-analyzing the exported matrices must reproduce the same table.
    AnalyzeOptions from_json;
    from_json.matrices_path = f.cfg.out_dir + "/attention_matrices.json";
    RunConfig cfg2 = f.cfg;
    cfg2.out_dir = f.wdir + "/out_json";
    std::ostringstream out2;
    cmd_analyze(cfg2, from_json, out2);
    CHECK(out2.str() == out.str());
    CHECK(oracles::slurp(cfg2.out_dir + "/satisfaction.csv") == csv);

    AnalyzeOptions fit_opt;
    fit_opt.fit = true;
    std::ostringstream out3;
    cmd_analyze(f.cfg, fit_opt, out3);
    std::string fit_csv = oracles::slurp(f.cfg.out_dir + "/gaussian_fit.csv");
    CHECK(fit_csv.rfind("sentence,row,mu,sigma,rmse,gaussian_like\n", 0) == 0);
    CHECK(std::count(fit_csv.begin(), fit_csv.end(), '\n') >= 2);
    CHECK(out3.str().find("gaussian-like rows: ") != std::string::npos);

    AnalyzeOptions missing;
    missing.model_path = f.wdir + "/nope.ckpt";
    std::ostringstream sink;
    CHECK_THROWS_WITH(cmd_analyze(f.cfg, missing, sink),
                      Catch::Matchers::ContainsSubstring("model checkpoint not found"));
}

TEST_CASE("cmd_train_q trains against a checkpoint and records rewards") {
    CliFixture& f = fixture();
    RunConfig cfg = f.cfg;
    cfg.out_dir = f.wdir + "/out_q";
    CHECK_THROWS_WITH(cmd_train_q(cfg, ""),
                      Catch::Matchers::ContainsSubstring("model checkpoint not found"));

    std::string qckpt = cmd_train_q(cfg, f.ckpt);
    REQUIRE(qckpt == cfg.out_dir + "/qnet.ckpt");
    REQUIRE(fs::exists(qckpt));
    std::string trace = oracles::slurp(cfg.out_dir + "/reward_trace.csv");
    CHECK(trace.rfind("episode,reward\n", 0) == 0);
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 1 + cfg.q_episodes);

    RunConfig cfg2 = cfg;
    cfg2.out_dir = f.wdir + "/out_q2";
    CHECK(oracles::slurp(cmd_train_q(cfg2, f.ckpt)) == oracles::slurp(qckpt));
}

TEST_CASE("cmd_infer translates stdin and enforces mode requirements") {
    CliFixture& f = fixture();
    InferCliOptions opt;
    opt.mode = "gaussian";
    opt.model_path = f.ckpt;

    std::istringstream in("en00 en01 en02 en03\nen04 en05 en06 en07 en08\n");
    std::ostringstream out;
    cmd_infer(f.cfg, opt, in, out);
    std::istringstream lines(out.str());
    std::string line;
    int n_lines = 0;
    while (std::getline(lines, line)) {
        ++n_lines;
        std::vector<std::string> toks = tokenize(line);
        CHECK(toks.size() == (n_lines == 1 ? 4u : 5u));
        for (const auto& t : toks) CHECK(t.rfind("es", 0) == 0);
    }
    CHECK(n_lines == 2);

    SECTION("unembeddable sentences keep line alignment") {
        std::istringstream bad("en00 en01 en02\nxyzzy plugh quux\nen03 en04 en05\n");
        std::ostringstream aligned;
        cmd_infer(f.cfg, opt, bad, aligned);
        std::vector<std::string> got;
        std::istringstream rd(aligned.str());
        while (std::getline(rd, line)) got.push_back(line);
        REQUIRE(got.size() == 3);
        CHECK_FALSE(got[0].empty());
        CHECK(got[1].empty());
        CHECK_FALSE(got[2].empty());
    }

    SECTION("emit-weights grid matches output and source lengths") {
        InferCliOptions wopt = opt;
        wopt.emit_weights_path = f.wdir + "/weights.json";
        std::istringstream in2("en02 en03 en04 en05\n");
        std::ostringstream out2;
        cmd_infer(f.cfg, wopt, in2, out2);
        auto j = nlohmann::json::parse(oracles::slurp(wopt.emit_weights_path));
        REQUIRE(j.is_array());
        REQUIRE(j.size() == 1);
        CHECK(j[0]["source"].size() == 4);
        CHECK(j[0]["output"].size() == j[0]["weights"].size());
        for (const auto& row : j[0]["weights"]) CHECK(row.size() == 4);
        CHECK_FALSE(j[0].contains("wall_time_ms"));
    }

    SECTION("gaussian_rl needs a q-network checkpoint") {
        InferCliOptions rl = opt;
        rl.mode = "gaussian_rl";
        std::istringstream in3("en00 en01\n");
        std::ostringstream out3;
        CHECK_THROWS_WITH(cmd_infer(f.cfg, rl, in3, out3),
                          Catch::Matchers::ContainsSubstring(
                              "--qnet is required for gaussian_rl mode"));
    }

    SECTION("input file path and bad-mode errors") {
        InferCliOptions fopt = opt;
        fopt.input_path = f.wdir + "/does_not_exist.txt";
        std::istringstream empty;
        std::ostringstream out4;
        CHECK_THROWS_AS(cmd_infer(f.cfg, fopt, empty, out4), ConfigError);
        InferCliOptions mopt = opt;
        mopt.mode = "telepathy";
        CHECK_THROWS_AS(cmd_infer(f.cfg, mopt, empty, out4), ConfigError);
    }
}

TEST_CASE("cmd_bench writes the report bundle") {
    CliFixture& f = fixture();
    RunConfig cfg = f.cfg;
    cfg.out_dir = f.wdir + "/out_bench";

    BenchOptions opt;
    opt.model_path = f.ckpt;
    opt.repetitions = 1;
    cmd_bench(cfg, opt);

    auto bleu = nlohmann::json::parse(oracles::slurp(cfg.out_dir + "/bleu.json"));
    REQUIRE(bleu.contains("attention"));
    REQUIRE(bleu.contains("gaussian"));
    REQUIRE(bleu.contains("gaussian_rl"));
    CHECK(bleu["attention"]["bleu"].is_number());
    CHECK(bleu["gaussian_rl"].is_null());  // no qnet supplied

    std::string lat = oracles::slurp(cfg.out_dir + "/latency.csv");
    CHECK(lat.rfind("bucket,samples,attention_ms,gaussian_ms,gaussian_rl_ms,reliable\n", 0) ==
          0);
    CHECK(lat.find("4-7,") != std::string::npos);
    CHECK(lat.find("8-11,") != std::string::npos);
    CHECK(lat.find("12-15,") != std::string::npos);
    std::string sat = oracles::slurp(cfg.out_dir + "/satisfaction.csv");
    CHECK(std::count(sat.begin(), sat.end(), '\n') == 5);

    SECTION("with a q-network all three modes get BLEU numbers") {
        RunConfig qcfg = f.cfg;
        qcfg.out_dir = f.wdir + "/out_bench_q";
        std::string qckpt = cmd_train_q(qcfg, f.ckpt);
        BenchOptions qopt = opt;
        qopt.qnet_path = qckpt;
        qopt.out_dir = qcfg.out_dir;
        cmd_bench(qcfg, qopt);
        auto b2 = nlohmann::json::parse(oracles::slurp(qcfg.out_dir + "/bleu.json"));
        CHECK(b2["gaussian_rl"]["bleu"].is_number());
    }

    SECTION("explicit test TSV replaces the split") {
        std::string tsv = write_file(fs::path(f.world.dir) / "minitest.tsv",
                                     "en00 en01 en02 en03\tes00 es01 es02 es03\n");
        RunConfig tcfg = f.cfg;
        tcfg.out_dir = f.wdir + "/out_bench_tsv";
        BenchOptions topt = opt;
        topt.test_path = tsv;
        topt.out_dir = tcfg.out_dir;
        cmd_bench(tcfg, topt);
        std::string lat2 = oracles::slurp(tcfg.out_dir + "/latency.csv");
        CHECK(lat2.find("4-7,1,") != std::string::npos);
    }
}

#ifdef NMTMASK_CLI

namespace {

int run_cli(const std::string& args, const std::string& redirect = "") {
    std::string cmd = std::string(NMTMASK_CLI) + " " + args;
    cmd += redirect.empty() ? " > /dev/null 2>&1" : " " + redirect;
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

}  // namespace

TEST_CASE("binary: usage and error exit codes") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("train --help") == 0);
    CHECK(run_cli("") == 2);                    // a subcommand is required
    CHECK(run_cli("frobnicate") == 2);          // unknown subcommand
    CHECK(run_cli("train --no-such-flag") == 2);
    CHECK(run_cli("train --config /does/not/exist.cfg") == 2);
    CHECK(run_cli("analyze --config " + fixture().config_path +
                  " --model /no/such.ckpt") == 2);
}

TEST_CASE("binary: end-to-end pipeline on a tiny world") {
    toyworld::WorldOptions wopt;
    wopt.pairs = 60;
    wopt.seed = 555;
    toyworld::World w = toyworld::make_world(wopt);
    std::string wd = w.dir.string();
    std::string out_dir = (w.dir / "out").string();
    std::string config = toyworld::write_config(w, out_dir,
                                                "model.hidden_dim = 8\n"
                                                "model.align_dim = 8\n"
                                                "train.epochs = 1\n"
                                                "q.episodes = 8\n");

    REQUIRE(run_cli("--config " + config + " train") == 0);
    REQUIRE(fs::exists(out_dir + "/model.ckpt"));
    REQUIRE(fs::exists(out_dir + "/loss_trace.csv"));

    REQUIRE(run_cli("--config " + config + " analyze --fit",
                    "> " + wd + "/analyze.txt 2>/dev/null") == 0);
    CHECK(fs::exists(out_dir + "/satisfaction.csv"));
    CHECK(fs::exists(out_dir + "/gaussian_fit.csv"));
    CHECK(oracles::slurp(wd + "/analyze.txt").find("floor(p/2): ") != std::string::npos);

    REQUIRE(run_cli("--config " + config + " train-q") == 0);
    REQUIRE(fs::exists(out_dir + "/qnet.ckpt"));

    std::string input = write_file(fs::path(w.dir) / "input.txt",
                                   "en00 en01 en02 en03 en04\n");
    REQUIRE(run_cli("--config " + config + " infer --mode gaussian_rl --qnet " + out_dir +
                        "/qnet.ckpt --input " + input,
                    "> " + wd + "/hyp.txt 2>/dev/null") == 0);
    std::string hyp = oracles::slurp(wd + "/hyp.txt");
    CHECK(tokenize(hyp).size() == 5);
    CHECK(run_cli("--config " + config + " infer --mode gaussian_rl --input " + input) == 2);

    REQUIRE(run_cli("--config " + config + " bench --qnet " + out_dir +
                    "/qnet.ckpt --reps 1") == 0);
    CHECK(fs::exists(out_dir + "/bleu.json"));
    CHECK(fs::exists(out_dir + "/latency.csv"));

    SECTION("seed override changes the trained artifact") {
        std::string alt = wd + "/out_alt";
        std::string cfg_alt = toyworld::write_config(w, alt,
                                                     "model.hidden_dim = 8\n"
                                                     "model.align_dim = 8\n"
                                                     "train.epochs = 1\n");
        REQUIRE(run_cli("--config " + cfg_alt + " --seed 4242 train") == 0);
        CHECK(oracles::slurp(alt + "/model.ckpt") != oracles::slurp(out_dir + "/model.ckpt"));
    }
}

TEST_CASE("binary: repeated runs are byte-identical") {
    toyworld::WorldOptions wopt;
    wopt.pairs = 60;
    wopt.seed = 556;
    toyworld::World w = toyworld::make_world(wopt);
    std::string wd = w.dir.string();
    std::string cfg1 = toyworld::write_config(w, w.dir / "r1",
                                              "model.hidden_dim = 8\n"
                                              "model.align_dim = 8\n"
                                              "train.epochs = 1\n");
    std::string cfg2 = toyworld::write_config(w, w.dir / "r2",
                                              "model.hidden_dim = 8\n"
                                              "model.align_dim = 8\n"
                                              "train.epochs = 1\n"
                                              "# same settings, second run\n");
    REQUIRE(run_cli("--config " + cfg1 + " train") == 0);
    REQUIRE(run_cli("--config " + cfg2 + " train") == 0);
    CHECK(oracles::slurp(wd + "/r1/model.ckpt") == oracles::slurp(wd + "/r2/model.ckpt"));
    CHECK(oracles::slurp(wd + "/r1/loss_trace.csv") ==
          oracles::slurp(wd + "/r2/loss_trace.csv"));
}

#endif  // NMTMASK_CLI
