#include "aal/errors.hpp"
#include "aal/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace aal;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("aal_exp_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t parse_error_line(std::string_view text) {
    try {
        parse_config_text(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return static_cast<std::size_t>(-1);
}

ExperimentSpec quick_spec(const fs::path& out) {
    ExperimentSpec s;
    s.dataset.gaussian.n_per_cat = 20;
    s.train.max_iter = 40;
    s.train.batch_size = 16;
    s.train.eval_every = 10;
    s.train.g_widths = {8};
    s.train.d_b = 4;
    s.train.h_d = 8;
    s.out_dir = out;
    return s;
}

} // namespace

TEST(Config, EmptyTextGivesDefaults) {
    const ExperimentSpec s = parse_config_text("");
    EXPECT_EQ(s.train, TrainConfig{});
    EXPECT_EQ(s.repeats, 1u);
    EXPECT_EQ(s.dataset.kind, DatasetKind::gaussian);
}

TEST(Config, ValuesAreApplied) {
    const ExperimentSpec s = parse_config_text(
        "# comment\n"
        "[experiment]\n"
        "seed = 7\n"
        "repeats = 3\n"
        "baselines = source_only, unweighted_adversarial\n"
        "[dataset]\n"
        "preset = twomoons\n"
        "moons_noise = 0.2\n"
        "[train]\n"
        "power = 0.75\n"
        "gamma_f = 0.01\n"
        "g_widths = 16, 8\n"
        "use_w = false\n");
    EXPECT_EQ(s.train.seed, 7u);
    EXPECT_EQ(s.repeats, 3u);
    EXPECT_EQ(s.baselines.size(), 2u);
    EXPECT_EQ(s.dataset.kind, DatasetKind::twomoons);
    EXPECT_EQ(s.dataset.twomoons.noise, 0.2);
    EXPECT_EQ(s.train.power, 0.75);
    EXPECT_EQ(s.train.gamma_f, 0.01);
    EXPECT_EQ(s.train.g_widths, (std::vector<std::size_t>{16, 8}));
    EXPECT_FALSE(s.train.use_w);
}

TEST(Config, ErrorsCarryLineNumbers) {
    EXPECT_EQ(parse_error_line("[train]\n\nuse_w = maybe\n"), 3u);
    EXPECT_EQ(parse_error_line("[train]\nno_such_key = 1\n"), 2u);
    EXPECT_EQ(parse_error_line("[nowhere]\n"), 1u);
    EXPECT_EQ(parse_error_line("power = 1\n"), 1u);
    EXPECT_EQ(parse_error_line("[train]\npower 0.5\n"), 2u);
    EXPECT_EQ(parse_error_line("[train]\nmax_iter = -3\n"), 2u);
}

TEST(Config, MissingFileIsParseError) {
    EXPECT_THROW(parse_config(temp_dir("none") / "x.cfg"), ParseError);
}

TEST(Summary, MeanOverRepeats) {
    MetricsRecord a;
    a.os = 0.8;
    a.os_star = 0.7;
    a.un = 0.9;
    MetricsRecord b;
    b.os = 0.6;
    b.un = 0.5;
    const MethodSummary s = summarize("m", {a, b});
    EXPECT_EQ(s.repeats, 2u);
    EXPECT_DOUBLE_EQ(s.os, 0.7);
    EXPECT_DOUBLE_EQ(*s.os_star, 0.7);
    EXPECT_DOUBLE_EQ(*s.un, 0.7);
    EXPECT_EQ(summarize("m", {a}).os, 0.8);
}

TEST(Runner, WritesArtifactsAndSummaryMatchesRuns) {
    const fs::path out = temp_dir("artifacts");
    ExperimentSpec spec = quick_spec(out);
    spec.repeats = 2;
    spec.baselines = {Baseline::source_only, Baseline::unweighted_adversarial};
    const ExperimentSummary s = run_experiment(spec);
    ASSERT_EQ(s.methods.size(), 3u);
    ASSERT_EQ(s.runs.size(), 6u);
    for (const char* m : {"aal", "source_only", "unweighted_adversarial"}) {
        for (const char* f : {"curves.csv", "result.csv", "checkpoint.txt", "embeddings.csv"}) {
            EXPECT_TRUE(fs::exists(out / m / "run_1" / f)) << m << "/" << f;
        }
    }
    EXPECT_EQ(s.runs[0].seed, 0u);
    EXPECT_EQ(s.runs[1].seed, 1u);
    EXPECT_DOUBLE_EQ(s.methods[0].os, (s.runs[0].final_metrics.os + s.runs[1].final_metrics.os) / 2.0);
    EXPECT_EQ(slurp(out / "aal" / "run_0" / "curves.csv").substr(0, 34), "iter,OS,OS_star,UN,loss_F,loss_Fst");
    EXPECT_EQ(slurp(out / "summary.csv").substr(0, 30), "method,repeats,OS,OS_star,UN\na");
    fs::remove_all(out);
}

TEST(Runner, IdenticalSpecsGiveIdenticalFiles) {
    const fs::path a = temp_dir("det_a");
    const fs::path b = temp_dir("det_b");
    run_experiment(quick_spec(a));
    run_experiment(quick_spec(b));
    for (const char* f : {"curves.csv", "result.csv", "checkpoint.txt", "embeddings.csv"}) {
        EXPECT_EQ(slurp(a / "aal" / "run_0" / f), slurp(b / "aal" / "run_0" / f)) << f;
    }
    EXPECT_EQ(slurp(a / "summary.csv"), slurp(b / "summary.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Runner, UnwritableOutputFailsBeforeTraining) {
    const fs::path blocker = temp_dir("blocker");
    std::ofstream(blocker) << "file, not a directory";
    ExperimentSpec spec = quick_spec(blocker / "sub");
    spec.train.max_iter = 1000000;
    EXPECT_THROW(run_experiment(spec), std::exception);
    fs::remove(blocker);
}

TEST(Runner, AblationGridOrderAndCsv) {
    const fs::path out = temp_dir("ablation");
    const auto cells = run_ablation_grid(quick_spec(out));
    ASSERT_EQ(cells.size(), 4u);
    EXPECT_FALSE(cells[0].use_w);
    EXPECT_FALSE(cells[0].use_alpha);
    EXPECT_FALSE(cells[1].use_w);
    EXPECT_TRUE(cells[1].use_alpha);
    EXPECT_TRUE(cells[3].use_w && cells[3].use_alpha);
    EXPECT_TRUE(fs::exists(out / "ablation.csv"));
    EXPECT_TRUE(fs::exists(out / "ablation" / "w_on_alpha_off" / "run_0" / "result.csv"));
    fs::remove_all(out);
}

TEST(Csv, NumbersRoundTripAndNanForUndefined) {
    const double v = 0.1 + 0.2;
    EXPECT_EQ(std::stod(format_number(v)), v);
    EXPECT_EQ(format_number(std::optional<double>{}), "nan");
}
