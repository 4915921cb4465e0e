// End-to-end checks of the mohr binary. The executable path arrives in the
// MOHR_CLI environment variable (set by CTest).

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "support/test_util.hpp"

using mohr::test::TempDir;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

std::string cli_path() {
    const char* p = std::getenv("MOHR_CLI");
    REQUIRE_MESSAGE(p != nullptr, "MOHR_CLI must point at the mohr binary");
    return p;
}

RunResult run(const std::string& args, const std::filesystem::path& dir) {
    const auto out_file = dir / "cmd_output.txt";
    const std::string cmd = cli_path() + " " + args + " > " + out_file.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::map<std::string, std::string> read_kv(const std::filesystem::path& path) {
    std::map<std::string, std::string> kv;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) {
            kv[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }
    return kv;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("missing interactions path exits 1 and names the field") {
    TempDir dir("mohr-cli");
    const auto r = run("train --out " + (dir.path() / "out").string(), dir.path());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("interactions") != std::string::npos);
}

TEST_CASE("unknown config key exits 1") {
    TempDir dir("mohr-cli");
    std::ofstream(dir.path() / "bad.conf") << "interactions = x.tsv\nwat = 1\n";
    const auto r = run("train --config " + (dir.path() / "bad.conf").string(), dir.path());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("wat") != std::string::npos);
}

TEST_CASE("synth, train, eval, recommend pipeline") {
    TempDir dir("mohr-cli");
    const auto data_dir = dir.path() / "data";
    const auto run_dir = dir.path() / "run";

    const auto synth = run("synth --out " + data_dir.string() +
                               " --users 60 --items 80 --relations 2 --k 4 --seq-len 10 "
                               "--temperature 0.3 --seed 5",
                           dir.path());
    REQUIRE(synth.exit_code == 0);
    CHECK(std::filesystem::exists(data_dir / "interactions.tsv"));
    CHECK(std::filesystem::exists(data_dir / "relations.tsv"));
    CHECK(std::filesystem::exists(data_dir / "planted.mohr"));

    const std::string data_flags = " --interactions " + (data_dir / "interactions.tsv").string() +
                                   " --relations " + (data_dir / "relations.tsv").string();
    const auto train = run("train" + data_flags + " --out " + run_dir.string() +
                               " --k 4 --iterations 300 --batch-size 64 --eval-every 100 --seed 9",
                           dir.path());
    REQUIRE_MESSAGE(train.exit_code == 0, train.output);
    CHECK(std::filesystem::exists(run_dir / "model.mohr"));
    CHECK(std::filesystem::exists(run_dir / "train_log.tsv"));
    CHECK(std::filesystem::exists(run_dir / "report.txt"));
    CHECK(std::filesystem::exists(run_dir / "report.tsv"));

    {
        std::ifstream log(run_dir / "train_log.tsv");
        std::string header;
        std::getline(log, header);
        CHECK(header ==
              "step\tloss_seq\tloss_item\tloss_rel\ttotal\tval_auc\tval_hr10\tval_ndcg10");
        int rows = 0;
        std::string line;
        while (std::getline(log, line)) {
            rows += line.empty() ? 0 : 1;
        }
        CHECK(rows == 3);
    }

    SUBCASE("eval right after train reproduces the training report") {
        const auto eval_dir = dir.path() / "eval";
        const auto eval = run("eval" + data_flags + " --checkpoint " +
                                  (run_dir / "model.mohr").string() + " --out " + eval_dir.string() +
                                  " --seed 9",
                              dir.path());
        REQUIRE_MESSAGE(eval.exit_code == 0, eval.output);
        const auto train_kv = read_kv(run_dir / "report.txt");
        const auto eval_kv = read_kv(eval_dir / "report.txt");
        CHECK(train_kv.at("auc") == eval_kv.at("auc"));
        CHECK(train_kv.at("hr10") == eval_kv.at("hr10"));
        CHECK(train_kv.at("ndcg10") == eval_kv.at("ndcg10"));
    }

    SUBCASE("retraining with the same seed writes a byte-identical checkpoint") {
        const auto rerun_dir = dir.path() / "rerun";
        const auto again = run("train" + data_flags + " --out " + rerun_dir.string() +
                                   " --k 4 --iterations 300 --batch-size 64 --eval-every 100 --seed 9",
                               dir.path());
        REQUIRE(again.exit_code == 0);
        CHECK(read_file(run_dir / "model.mohr") == read_file(rerun_dir / "model.mohr"));
    }

    SUBCASE("a different seed changes the checkpoint") {
        const auto other_dir = dir.path() / "other";
        const auto other = run("train" + data_flags + " --out " + other_dir.string() +
                                   " --k 4 --iterations 300 --batch-size 64 --eval-every 100 --seed 10",
                               dir.path());
        REQUIRE(other.exit_code == 0);
        CHECK(read_file(run_dir / "model.mohr") != read_file(other_dir / "model.mohr"));
    }

    SUBCASE("corrupted magic bytes exit 2") {
        const auto broken = dir.path() / "broken.mohr";
        std::string bytes = read_file(run_dir / "model.mohr");
        bytes[0] = 'X';
        std::ofstream(broken, std::ios::binary) << bytes;
        const auto r = run("eval" + data_flags + " --checkpoint " + broken.string(), dir.path());
        CHECK(r.exit_code == 2);
    }

    SUBCASE("layout evaluation emits all three policies") {
        const auto eval_dir = dir.path() / "layout";
        const auto r = run("eval" + data_flags + " --checkpoint " + (run_dir / "model.mohr").string() +
                               " --out " + eval_dir.string() + " --seed 9 --layout --per-user",
                           dir.path());
        REQUIRE_MESSAGE(r.exit_code == 0, r.output);
        const auto kv = read_kv(eval_dir / "report.txt");
        CHECK(kv.contains("layout_ndcg_random"));
        CHECK(kv.contains("layout_ndcg_model"));
        CHECK(kv.contains("layout_ndcg_ground_truth"));
        CHECK(std::filesystem::exists(eval_dir / "per_user.tsv"));
    }

    SUBCASE("recommend prints a relation-grouped layout") {
        const auto r = run("recommend" + data_flags + " --checkpoint " +
                               (run_dir / "model.mohr").string() + " --dense --user 3 --item 5 --top 3",
                           dir.path());
        REQUIRE_MESSAGE(r.exit_code == 0, r.output);
        CHECK(r.output.find("relation latent") != std::string::npos);
        CHECK(r.output.find("relation rel0") != std::string::npos);
    }

    SUBCASE("recommend rejects unknown raw ids with exit 2") {
        const auto r = run("recommend" + data_flags + " --checkpoint " +
                               (run_dir / "model.mohr").string() + " --user nosuch --item i0 --top 3",
                           dir.path());
        CHECK(r.exit_code == 2);
    }
}

TEST_CASE("recommend with no relations prints a single latent group") {
    TempDir dir("mohr-cli");
    const auto data_dir = dir.path() / "data";
    REQUIRE(run("synth --out " + data_dir.string() +
                    " --users 40 --items 50 --relations 0 --k 3 --seq-len 8 --seed 2",
                dir.path())
                .exit_code == 0);
    const std::string data_flags =
        " --interactions " + (data_dir / "interactions.tsv").string();
    const auto run_dir = dir.path() / "run";
    REQUIRE(run("train" + data_flags + " --out " + run_dir.string() +
                    " --k 3 --iterations 100 --batch-size 32 --eval-every 50 --seed 3",
                dir.path())
                .exit_code == 0);
    const auto r = run("recommend" + data_flags + " --checkpoint " +
                           (run_dir / "model.mohr").string() + " --dense --user 1 --item 2 --top 2",
                       dir.path());
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    CHECK(r.output.find("relation latent") != std::string::npos);
    const bool no_explicit_groups = r.output.find("relation rel") == std::string::npos;
    CHECK(no_explicit_groups);
}

TEST_CASE("sampled and full-scan AUC agree on a small corpus") {
    TempDir dir("mohr-cli");
    const auto data_dir = dir.path() / "data";
    REQUIRE(run("synth --out " + data_dir.string() +
                    " --users 80 --items 200 --relations 2 --k 4 --seq-len 10 --temperature 0.3 "
                    "--seed 6",
                dir.path())
                .exit_code == 0);
    const std::string data_flags = " --interactions " + (data_dir / "interactions.tsv").string() +
                                   " --relations " + (data_dir / "relations.tsv").string();
    const auto run_dir = dir.path() / "run";
    REQUIRE(run("train" + data_flags + " --out " + run_dir.string() +
                    " --k 4 --iterations 400 --batch-size 64 --eval-every 200 --seed 7",
                dir.path())
                .exit_code == 0);

    const auto sampled_dir = dir.path() / "sampled";
    const auto full_dir = dir.path() / "full";
    REQUIRE(run("eval" + data_flags + " --checkpoint " + (run_dir / "model.mohr").string() +
                    " --out " + sampled_dir.string() + " --seed 7 --auc-mode sampled",
                dir.path())
                .exit_code == 0);
    REQUIRE(run("eval" + data_flags + " --checkpoint " + (run_dir / "model.mohr").string() +
                    " --out " + full_dir.string() + " --seed 7 --auc-mode full",
                dir.path())
                .exit_code == 0);
    const double sampled = std::stod(read_kv(sampled_dir / "report.txt").at("auc"));
    const double full = std::stod(read_kv(full_dir / "report.txt").at("auc"));
    CHECK(std::abs(sampled - full) <= 0.03);
}

TEST_CASE("ablate compares variants and writes the table") {
    TempDir dir("mohr-cli");
    const auto data_dir = dir.path() / "data";
    REQUIRE(run("synth --out " + data_dir.string() +
                    " --users 50 --items 60 --relations 2 --k 3 --seq-len 10 --temperature 0.3 "
                    "--seed 12",
                dir.path())
                .exit_code == 0);
    const auto out_dir = dir.path() / "ablate";
    const auto r = run("ablate --interactions " + (data_dir / "interactions.tsv").string() +
                           " --relations " + (data_dir / "relations.tsv").string() + " --out " +
                           out_dir.string() +
                           " --k 3 --iterations 120 --batch-size 32 --eval-every 60 --seed 13 "
                           "--variants full,single-task",
                       dir.path());
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    CHECK(r.output.find("full") != std::string::npos);
    CHECK(r.output.find("single-task") != std::string::npos);
    std::ifstream tsv(out_dir / "ablation.tsv");
    std::string header;
    std::getline(tsv, header);
    CHECK(header == "variant\tauc\thr10\tndcg10");
    int rows = 0;
    std::string line;
    while (std::getline(tsv, line)) {
        rows += line.empty() ? 0 : 1;
    }
    CHECK(rows == 2);
}

TEST_CASE("commands do not mutate input files") {
    TempDir dir("mohr-cli");
    const auto data_dir = dir.path() / "data";
    REQUIRE(run("synth --out " + data_dir.string() +
                    " --users 40 --items 50 --relations 1 --k 3 --seq-len 8 --seed 8",
                dir.path())
                .exit_code == 0);
    const std::string before_i = read_file(data_dir / "interactions.tsv");
    const std::string before_r = read_file(data_dir / "relations.tsv");
    REQUIRE(run("train --interactions " + (data_dir / "interactions.tsv").string() +
                    " --relations " + (data_dir / "relations.tsv").string() + " --out " +
                    (dir.path() / "run").string() +
                    " --k 3 --iterations 50 --batch-size 32 --eval-every 25 --seed 1",
                dir.path())
                .exit_code == 0);
    CHECK(read_file(data_dir / "interactions.tsv") == before_i);
    CHECK(read_file(data_dir / "relations.tsv") == before_r);
}
