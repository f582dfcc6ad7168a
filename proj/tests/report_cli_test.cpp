// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "test_util.hpp"
#include "tsbench/cli.hpp"

using namespace tsbench;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

CliRun run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    CliRun r;
    r.code = cli::run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

LoadedResult make_result(const std::string& label, const std::string& dataset, double mae,
                         double mape, double params_m, double sec) {
    LoadedResult r;
    r.label = label;
    r.dataset = dataset;
    r.metrics = {MetricId::mae, MetricId::mape};
    r.report.values[MetricId::mae] = mae;
    r.report.values[MetricId::mape] = mape;
    r.report.n_evaluated = 10;
    r.param_millions = params_m;
    r.seconds_per_epoch = sec;
    return r;
}

std::string train_config_text(const std::string& csv_path) {
    return "data.path = " + csv_path +
           "\n"
           "split.train = 0.6\n"
           "split.val = 0.2\n"
           "split.test = 0.2\n"
           "window.t_p = 3\n"
           "window.t_f = 2\n"
           "model.kind = linear\n"
           "metrics = mae, rmse\n";
}

std::string ramp_csv(std::size_t t) {
    std::string out;
    for (std::size_t i = 0; i < t; ++i) out += std::to_string(i) + ".0\n";
    return out;
}

} // namespace

TEST(RenderFixed, HandValues) {
    EXPECT_EQ(render_fixed(0.125, 2), "0.12"); // ties to even, down
    EXPECT_EQ(render_fixed(0.375, 2), "0.38"); // ties to even, up
    EXPECT_EQ(render_fixed(-0.004, 2), "0.00"); // never "-0.00"
    EXPECT_EQ(render_fixed(-0.004, 4), "-0.0040");
    EXPECT_EQ(render_fixed(33.214920, 2), "33.21");
    EXPECT_EQ(render_fixed(20.404858, 2), "20.40");
    EXPECT_EQ(render_fixed(-1.5, 0), "-2");
    EXPECT_EQ(render_fixed(7.0, 0), "7");
    EXPECT_EQ(render_fixed(std::nan(""), 2), "nan");
    EXPECT_EQ(render_fixed(INFINITY, 2), "nan");
}

TEST(RenderFixed, MetricValuePrecisionSwitch) {
    EXPECT_EQ(render_metric_value(1.5), "1.50");
    EXPECT_EQ(render_metric_value(25.0), "25.00");
    EXPECT_EQ(render_metric_value(0.1234567), "0.1235");
    EXPECT_EQ(render_metric_value(-0.5), "-0.5000");
    EXPECT_EQ(render_metric_value(0.0), "0.0000");
}

TEST(RenderFixed, PercentageMetricsScaleBy100) {
    EXPECT_TRUE(metric_is_percentage(MetricId::mape));
    EXPECT_TRUE(metric_is_percentage(MetricId::wape));
    EXPECT_TRUE(metric_is_percentage(MetricId::smape));
    EXPECT_FALSE(metric_is_percentage(MetricId::mae));
    EXPECT_DOUBLE_EQ(display_value(MetricId::mape, 0.25), 25.0);
    EXPECT_DOUBLE_EQ(display_value(MetricId::mae, 0.25), 0.25);
}

TEST(ReportTable, GoldenMarkdownAndCsv) {
    std::vector<LoadedResult> results = {make_result("a", "ds1", 1.5, 0.25, 0.001, 2.0),
                                         make_result("b", "ds1", 2.5, 0.5, 2.0, 0.5)};
    json table = build_report_table(results);
    EXPECT_EQ(render_table_markdown(table),
              "| model | ds1/mae | ds1/mape | ds1/param_m | ds1/s_per_epoch |\n"
              "| --- | --- | --- | --- | --- |\n"
              "| a | **1.50** | **25.00%** | 0.0010 | 2.00 |\n"
              "| b | 2.50 | 50.00% | 2.00 | 0.5000 |\n");
    EXPECT_EQ(render_table_csv(table),
              "model,ds1/mae,ds1/mape,ds1/param_m,ds1/s_per_epoch\n"
              "a,1.50,25.00%,0.0010,2.00\n"
              "b,2.50,50.00%,2.00,0.5000\n");

    // The table is the canonical model: serializing and re-rendering is stable.
    json reparsed = json::parse(table.dump(2));
    EXPECT_EQ(render_table_markdown(reparsed), render_table_markdown(table));
}

TEST(ReportTable, TiesShareTheBestMark) {
    std::vector<LoadedResult> results = {make_result("a", "ds1", 1.5, 0.25, 0.0, 0.0),
                                         make_result("b", "ds1", 1.5, 0.75, 0.0, 0.0)};
    std::string md = render_table_markdown(build_report_table(results));
    EXPECT_NE(md.find("| a | **1.50** |"), std::string::npos);
    EXPECT_NE(md.find("| b | **1.50** |"), std::string::npos);
}

TEST(ReportTable, MixedMetricSetsAreRejected) {
    std::vector<LoadedResult> results = {make_result("a", "ds1", 1.5, 0.25, 0.0, 0.0),
                                         make_result("b", "ds1", 1.5, 0.75, 0.0, 0.0)};
    results[1].metrics = {MetricId::mae};
    EXPECT_THROW(build_report_table(results), ReportError);
    EXPECT_THROW(build_report_table({}), ReportError);
}

TEST(ReportTable, OwaRowsCarryANote) {
    LoadedResult r = make_result("a", "ds1", 1.5, 0.25, 0.0, 0.0);
    r.metrics.insert(MetricId::owa);
    r.report.values[MetricId::owa] = 0.9;
    json table = build_report_table({r});
    ASSERT_TRUE(table.contains("notes"));
    EXPECT_NE(render_table_markdown(table).find("Note (owa):"), std::string::npos);
}

TEST(Manifest, ParsesLabelsAndDirectories) {
    tsb_test::TempDir dir;
    tsb_test::write_file(dir.str("runs.csv"),
                         "# models under comparison\n"
                         "\n"
                         "linear, results/linear  \n"
                         "dlinear,results/dlinear # trailing note\n");
    RunManifest m = load_manifest(dir.str("runs.csv"));
    ASSERT_EQ(m.entries.size(), 2u);
    EXPECT_EQ(m.entries[0].label, "linear");
    EXPECT_EQ(m.entries[0].dir, "results/linear");
    EXPECT_EQ(m.entries[1].dir, "results/dlinear");

    tsb_test::write_file(dir.str("bad.csv"), "no-comma-here\n");
    EXPECT_THROW(load_manifest(dir.str("bad.csv")), ReportError);
    tsb_test::write_file(dir.str("empty.csv"), "# nothing\n");
    EXPECT_THROW(load_manifest(dir.str("empty.csv")), ReportError);
    EXPECT_THROW(load_manifest(dir.str("absent.csv")), ReportError);
}

TEST(GapTable, RendersPercentAndFlagsZeroReported) {
    std::vector<GapRow> rows(2);
    rows[0].label = "m1";
    rows[0].reported = 28.15;
    rows[0].reproduced = 18.80;
    rows[0].gap_percent = gap(28.15, 18.80);
    rows[1].label = "z";
    rows[1].reported = 0.0;
    rows[1].reproduced = 1.0;
    json table = build_gap_table(rows);
    EXPECT_EQ(render_gap_markdown(table),
              "| label | reported | reproduced | gap |\n"
              "| --- | --- | --- | --- |\n"
              "| m1 | 28.15 | 18.80 | 33.21% |\n"
              "| z | 0.0000 | 1.00 | n/a (zero reported value) |\n");
    EXPECT_EQ(render_gap_csv(table),
              "label,reported,reproduced,gap\n"
              "m1,28.15,18.80,33.21%\n"
              "z,0.0000,1.00,n/a\n");
    EXPECT_EQ(table[1].at("error").get<std::string>(), "zero reported value");
}

TEST(Profile, TextAndJsonRendering) {
    HeterogeneityProfile p;
    p.r1 = 0.5;
    p.r2 = 0.25;
    p.periodicity_strength = 0.9;
    p.dominant_period = 24;
    p.drift_score = 0.1234;
    p.drift_threshold = 0.5;
    p.spatial_label = SpatialLabel::significant;
    p.temporal_label = TemporalLabel::clear_stable;
    p.counts.total_pairs = 8;
    p.counts.similar_past = 4;
    p.counts.indistinguishable = 2;
    p.counts.valid_steps = 1;

    EXPECT_EQ(render_profile_text("toy", p),
              "dataset: toy\n"
              "  r1:                  0.5000\n"
              "  r2:                  0.2500\n"
              "  similar_past:        4\n"
              "  indistinguishable:   2\n"
              "  total_pairs:         8\n"
              "  periodicity:         0.9000 (period 24)\n"
              "  drift_score:         0.1234 (threshold 0.5000)\n"
              "  spatial_label:       significant\n"
              "  temporal_label:      clear-stable\n");

    json j = to_json(p);
    EXPECT_DOUBLE_EQ(j["r1"].get<double>(), 0.5);
    EXPECT_EQ(j["counts"]["similar_past"].get<std::uint64_t>(), 4u);
    EXPECT_EQ(j["spatial_label"].get<std::string>(), "significant");
    EXPECT_EQ(j["temporal_label"].get<std::string>(), "clear-stable");
    EXPECT_EQ(j["params"]["t_p"].get<std::size_t>(), 12u);
}

TEST(Cli, UsageErrors) {
    CliRun none = run({});
    EXPECT_EQ(none.code, 2);
    EXPECT_NE(none.err.find("usage error"), std::string::npos);

    CliRun help = run({"--help"});
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("profile"), std::string::npos);
    EXPECT_NE(help.out.find("train"), std::string::npos);

    EXPECT_EQ(run({"bogus"}).code, 2);
    EXPECT_EQ(run({"profile"}).code, 2); // --data is required
    EXPECT_EQ(run({"train"}).code, 2);   // --config is required
    EXPECT_EQ(run({"report"}).code, 2);  // needs --manifest or --table
    EXPECT_EQ(run({"gap"}).code, 2);     // needs --pairs or --reported/--result
}

TEST(Cli, DataErrorsExitThree) {
    tsb_test::TempDir dir;
    CliRun missing = run({"profile", "--data", dir.str("absent.csv")});
    EXPECT_EQ(missing.code, 3);
    EXPECT_NE(missing.err.find("cannot read"), std::string::npos);

    tsb_test::write_file(dir.str("ragged.csv"), "1,2\n3\n4,5\n");
    CliRun ragged = run({"profile", "--data", dir.str("ragged.csv")});
    EXPECT_EQ(ragged.code, 3);

    CliRun badcfg = run({"train", "--config", dir.str("absent.conf")});
    EXPECT_EQ(badcfg.code, 2); // config problems are usage errors
}

TEST(Cli, ProfileHappyPath) {
    tsb_test::TempDir dir;
    std::string csv;
    char buf[64];
    for (int t = 0; t < 200; ++t) {
        double v = std::sin(2.0 * M_PI * t / 24.0);
        std::snprintf(buf, sizeof(buf), "%.10f,%.10f\n", v, v);
        csv += buf;
    }
    tsb_test::write_file(dir.str("sine.csv"), csv);

    CliRun r = run({"profile", "--data", dir.str("sine.csv"), "--frequency", "3600",
                    "--candidates", "24", "--json", dir.str("profile.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("dataset: sine"), std::string::npos);
    EXPECT_NE(r.out.find("r1:"), std::string::npos);
    EXPECT_NE(r.out.find("(period 24)"), std::string::npos);

    json j = json::parse(tsb_test::read_file(dir.str("profile.json")));
    EXPECT_EQ(j["dataset"].get<std::string>(), "sine");
    EXPECT_GE(j["r1"].get<double>(), 0.0);
    EXPECT_LE(j["r1"].get<double>(), 1.0);
    EXPECT_EQ(j["dominant_period"].get<std::size_t>(), 24u);
    EXPECT_GT(j["periodicity_strength"].get<double>(), 0.5);
}

TEST(Cli, TrainEvaluateReportGapRoundTrip) {
    tsb_test::TempDir dir;
    tsb_test::write_file(dir.str("ramp.csv"), ramp_csv(40));
    tsb_test::write_file(dir.str("run.conf"), train_config_text(dir.str("ramp.csv")));
    std::string out_dir = dir.str("out");

    CliRun train = run({"train", "--config", dir.str("run.conf"), "--output-dir", out_dir});
    ASSERT_EQ(train.code, 0) << train.err;
    EXPECT_NE(train.out.find("model: linear"), std::string::npos);
    EXPECT_NE(train.out.find("result_dir: " + out_dir), std::string::npos);
    EXPECT_TRUE(std::filesystem::exists(out_dir + "/result.json"));

    CliRun eval = run({"evaluate", "--result", out_dir});
    ASSERT_EQ(eval.code, 0) << eval.err;
    EXPECT_NE(eval.out.find("matches stored result: yes"), std::string::npos);

    tsb_test::write_file(dir.str("runs.csv"), "lin," + out_dir + "\n");
    CliRun report = run({"report", "--manifest", dir.str("runs.csv")});
    ASSERT_EQ(report.code, 0) << report.err;
    EXPECT_NE(report.out.find("| lin |"), std::string::npos);
    EXPECT_NE(report.out.find("ramp/mae"), std::string::npos);

    // json table -> markdown matches direct markdown rendering byte for byte
    CliRun as_json = run({"report", "--manifest", dir.str("runs.csv"), "--format", "json",
                          "--out", dir.str("table.json")});
    ASSERT_EQ(as_json.code, 0) << as_json.err;
    CliRun from_table = run({"report", "--table", dir.str("table.json")});
    ASSERT_EQ(from_table.code, 0) << from_table.err;
    EXPECT_EQ(from_table.out, report.out);

    tsb_test::write_file(dir.str("reported.csv"), "baseline,mae,2.0\n");
    CliRun gap_run = run({"gap", "--reported", dir.str("reported.csv"), "--result", out_dir,
                          "--format", "csv"});
    ASSERT_EQ(gap_run.code, 0) << gap_run.err;
    EXPECT_EQ(gap_run.out.rfind("label,reported,reproduced,gap\nbaseline,2.00,", 0), 0u);

    // pairs mode needs no result directory at all
    tsb_test::write_file(dir.str("pairs.csv"), "m1,28.15,18.80\n");
    CliRun pairs = run({"gap", "--pairs", dir.str("pairs.csv")});
    ASSERT_EQ(pairs.code, 0) << pairs.err;
    EXPECT_NE(pairs.out.find("| m1 | 28.15 | 18.80 | 33.21% |"), std::string::npos);

    // tampering with the stored metrics makes re-evaluation fail loudly
    json stored = json::parse(tsb_test::read_file(out_dir + "/result.json"));
    stored["test_metrics"]["mae"] = 999.0;
    tsb_test::write_file(out_dir + "/result.json", stored.dump(2) + "\n");
    CliRun tampered = run({"evaluate", "--result", out_dir});
    EXPECT_EQ(tampered.code, 4);
    EXPECT_NE(tampered.err.find("differs"), std::string::npos);
}

TEST(Cli, TrainSweepWritesSweepSummary) {
    tsb_test::TempDir dir;
    tsb_test::write_file(dir.str("ramp.csv"), ramp_csv(40));
    tsb_test::write_file(dir.str("run.conf"), train_config_text(dir.str("ramp.csv")));

    CliRun r = run({"train", "--config", dir.str("run.conf"), "--sweep", "2,3", "--output-dir",
                    dir.str("sweep")});
    ASSERT_EQ(r.code, 0) << r.err;
    json sweep = json::parse(tsb_test::read_file(dir.str("sweep/sweep.json")));
    EXPECT_EQ(sweep["runs"].size(), 2u);
    EXPECT_TRUE(std::filesystem::exists(dir.str("sweep/tp2/checkpoint.bin")));
    EXPECT_TRUE(std::filesystem::exists(dir.str("sweep/tp3/checkpoint.bin")));
}

TEST(Cli, EnvironmentAndSetOverrides) {
    tsb_test::TempDir dir;
    tsb_test::write_file(dir.str("ramp.csv"), ramp_csv(40));
    std::string conf = train_config_text(dir.str("ramp.csv"));
    conf.replace(conf.find("model.kind = linear"), std::string("model.kind = linear").size(),
                 "model.kind = naive-last");
    tsb_test::write_file(dir.str("run.conf"), conf);

    ::setenv("TSBENCH_MODEL_KIND", "linear", 1);
    CliRun env_run = run({"train", "--config", dir.str("run.conf")});
    EXPECT_EQ(env_run.code, 0);
    EXPECT_NE(env_run.out.find("model: linear"), std::string::npos);

    // --set outranks the environment
    CliRun set_run = run({"train", "--config", dir.str("run.conf"), "--set",
                          "model.kind=naive-last"});
    ::unsetenv("TSBENCH_MODEL_KIND");
    EXPECT_EQ(set_run.code, 0);
    EXPECT_NE(set_run.out.find("model: naive-last"), std::string::npos);
}
