#include "cli.hpp"
#include "io.hpp"
#include "report.hpp"

#include "latent_rank/presets.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace latent_rank::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("latent_rank_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream(dir_ / name, std::ios::binary) << text;
    }

    std::string read(const std::string& name) const { return read_text_file(path(name)); }

    int run(std::vector<std::string> args) {
        out_.str({});
        err_.str({});
        return run_cli(args, out_, err_);
    }

    void write_population(const std::string& name, const ModelSpec& spec, const Theta& theta, double n) const {
        const auto m = testing::population_moments(spec, theta, n);
        std::vector<CovarianceBlock> blocks;
        for (std::size_t g = 0; g < spec.num_groups(); ++g) {
            blocks.push_back({spec.groups()[g].observed, m.covariances[g], n});
        }
        write(name, format_covariance_text(blocks));
    }

    fs::path dir_;
    std::ostringstream out_;
    std::ostringstream err_;
};

TEST(CovarianceText, ParsesBlocksAndReorders) {
    const std::string text =
        "# two groups\n"
        "b a\n"
        "2 0.5\n"
        "0.5 1\n"
        "n=10\n"
        "\n"
        "a, b\n"
        "1, 0.2\n"
        "0.2, 3\n"
        "n = 20\n";
    const auto blocks = parse_covariance_text(text);
    ASSERT_EQ(blocks.size(), 2u);
    EXPECT_EQ(blocks[0].names, (std::vector<std::string>{"b", "a"}));
    EXPECT_EQ(blocks[1].n, 20.0);
    const auto spec = parse_model_or_throw({"a ~~ a + b\nb ~~ b\n", 2});
    const auto m = moments_for_spec(blocks, spec);
    EXPECT_EQ(m.covariances[0](0, 0), 1.0);
    EXPECT_EQ(m.covariances[0](1, 1), 2.0);
    EXPECT_EQ(m.covariances[1](1, 1), 3.0);
    const auto again = parse_covariance_text(format_covariance_text(blocks));
    EXPECT_EQ(again[0].matrix, blocks[0].matrix);
    EXPECT_EQ(again[1].names, blocks[1].names);
}

TEST(CovarianceText, RejectsMalformedInput) {
    EXPECT_THROW((void)parse_covariance_text(""), UsageError);
    EXPECT_THROW((void)parse_covariance_text("a b\n1 0\n0 1\n"), UsageError);
    EXPECT_THROW((void)parse_covariance_text("a b\n1 0.5\n0 1\nn=3\n"), UsageError);
    EXPECT_THROW((void)parse_covariance_text("a b\n1 x\nx 1\nn=3\n"), UsageError);
    EXPECT_THROW((void)parse_covariance_text("a b\n1 0\n0 1\nn=2.5\n"), UsageError);
    EXPECT_THROW((void)parse_covariance_text("a b\n1 0 0\n0 1\nn=3\n"), UsageError);
    const auto spec = parse_model_or_throw({"a ~~ a + c\nc ~~ c\n", 1});
    EXPECT_THROW((void)moments_for_spec(parse_covariance_text("a b\n1 0\n0 1\nn=3\n"), spec), UsageError);
}

TEST(DataCsv, GroupColumnAndQuoting) {
    const auto spec = parse_model_or_throw({"x ~~ x + y\ny ~~ y\n", 2});
    const std::string csv =
        "\"x\",y,group,note\n"
        "1,2,1,\"a, b\"\n"
        "3,2,1,c\n"
        "0,0,2,\n"
        "2,4,2,\n";
    const auto m = moments_from_csv(csv, spec);
    EXPECT_EQ(m.sample_sizes, (std::vector<double>{2, 2}));
    EXPECT_DOUBLE_EQ(m.covariances[0](0, 0), 1.0);
    EXPECT_DOUBLE_EQ(m.covariances[0](1, 1), 0.0);
    EXPECT_DOUBLE_EQ(m.covariances[1](0, 1), 2.0);
    EXPECT_THROW((void)moments_from_csv("x,y\n1,2\n3,4\n", spec), UsageError);
    EXPECT_THROW((void)moments_from_csv("x,y,group\n1,2,3\n", spec), UsageError);
    EXPECT_THROW((void)moments_from_csv("x,y,group\n1,a,1\n", spec), UsageError);
}

TEST(Config, KeysApply) {
    SimConfig c;
    const bool svg = apply_sim_config(parse_key_values("# comment\nexperiment = shapiro\nn_grid = 10, 20\n"
                                                       "delta_grid = 0.1\nnsim = 7\nseed = 9\noptimizer = newton\n"
                                                       "tol = 1e-6\nmax_iter = 50\nsvg = true\nthreads = 2\n"),
                                      c);
    EXPECT_TRUE(svg);
    EXPECT_EQ(c.experiment, Experiment::Shapiro);
    EXPECT_EQ(c.n_grid, (std::vector<std::size_t>{10, 20}));
    EXPECT_EQ(c.nsim, 7u);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.fit.optimizer, Optimizer::NewtonRaphson);
    EXPECT_EQ(c.fit.gradient_tol, 1e-6);
    EXPECT_EQ(c.fit.max_iter, 50);
    EXPECT_EQ(c.threads, 2u);
    EXPECT_THROW(apply_sim_config({{"bogus", "1"}}, c), UsageError);
    EXPECT_THROW(apply_sim_config({{"nsim", "x"}}, c), UsageError);
    EXPECT_THROW(apply_sim_config({{"svg", "maybe"}}, c), UsageError);
    EXPECT_THROW((void)parse_key_values("no equals sign\n"), UsageError);
}

TEST(ThetaText, KeyValueAndJson) {
    const auto spec = preset("shapiro-direct");
    const auto a = parse_theta("l1 = 1\nl2 = 0.4\nl3 = 0.7\npsi1 = 1\npsi2 = 0.09\npsi3 = 0\n", spec);
    EXPECT_EQ(a.at("l2"), 0.4);
    const auto b = parse_theta(R"({"theta": {"l1": 1, "l2": 0.5, "l3": 0.7, "psi1": 1, "psi2": 0.1, "psi3": 0}})", spec);
    EXPECT_EQ(b.at("l2"), 0.5);
    EXPECT_THROW((void)parse_theta("l1 = 1\n", spec), UsageError);
    EXPECT_THROW((void)parse_theta("zz = 1\n", spec), UsageError);
    EXPECT_THROW((void)parse_theta("{broken", spec), UsageError);
}

TEST(Report, NumberFormatting) {
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(1e-300), "1e-300");
    EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "NA");
    EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-Inf");
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv_field("plain"), "plain");
}

TEST_F(CliTest, FitRecoversPopulationAtModerateDistance) {
    const auto spec = preset("sbmtmm");
    const auto truth = sbmtmm_population_theta(spec, 0.2);
    write_population("pop.txt", spec, truth, 500);
    EXPECT_EQ(run({"fit", "--preset", "sbmtmm", "--cov", path("pop.txt"), "--out-dir", path("out")}), kExitOk)
        << err_.str();
    const auto fitted = parse_theta(read("out/fit.json"), spec);
    EXPECT_LT((fitted.values() - truth.values()).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NE(read("out/fit.txt").find("GRADIENT_TOL"), std::string::npos);
    EXPECT_EQ(read("out/fit.json").find("UNAVAILABLE"), std::string::npos);
}

TEST_F(CliTest, FitAtPointOfDeficiencyIsNonconverged) {
    const auto spec = preset("sbmtmm");
    write_population("pop.txt", spec, sbmtmm_population_theta(spec, 0.0), 500);
    EXPECT_EQ(run({"fit", "--preset", "sbmtmm", "--cov", path("pop.txt"), "--out-dir", path("out")}),
              kExitNonconverged);
    const auto json = read("out/fit.json");
    EXPECT_NE(json.find("SINGULAR_INFORMATION"), std::string::npos);
    EXPECT_NE(json.find("UNAVAILABLE"), std::string::npos);
}

TEST_F(CliTest, FitConvergedButInadmissible) {
    const auto spec = preset("shapiro-direct");
    Theta t = shapiro_population_theta(spec);
    t.set("psi3", -0.02);
    write_population("neg.txt", spec, t, 1000);
    EXPECT_EQ(run({"fit", "--preset", "shapiro-direct", "--cov", path("neg.txt"), "--out-dir", path("out")}),
              kExitInadmissible)
        << out_.str();
    EXPECT_NE(read("out/fit.json").find("psi[y3,y3]"), std::string::npos);
}

TEST_F(CliTest, FitFromRawDataWithGradientDescent) {
    write("model.txt", "F =~ 1*y1 + y2 + y3\n");
    std::ostringstream csv;
    csv << "y1,y2,y3\n";
    Rng rng(4);
    const Matrix x = mvn_sample(PopulationModel::shapiro().sigma + 0.5 * Matrix::Identity(3, 3), 300, rng);
    for (Eigen::Index i = 0; i < x.rows(); ++i) csv << x(i, 0) << "," << x(i, 1) << "," << x(i, 2) << "\n";
    write("data.csv", csv.str());
    EXPECT_EQ(run({"fit", "--model", path("model.txt"), "--data", path("data.csv"), "--optimizer", "gd", "--lr", "0.5",
                   "--max-iter", "20000", "--out-dir", path("out")}),
              kExitOk)
        << out_.str() << err_.str();
}

TEST_F(CliTest, MalformedModelGivesPositionedDiagnostic) {
    write("bad.txt", "F =~ y1 + y2\nG =~ y3 +\n");
    write("cov.txt", "y1 y2\n1 0\n0 1\nn=10\n");
    EXPECT_EQ(run({"fit", "--model", path("bad.txt"), "--cov", path("cov.txt")}), kExitUsage);
    EXPECT_NE(err_.str().find("bad.txt:2:"), std::string::npos) << err_.str();
    EXPECT_EQ(run({"validate", "--model", path("bad.txt")}), kExitUsage);
}

TEST_F(CliTest, NonPositiveDefiniteCovariance) {
    write("m.txt", "F =~ 1*y1 + y2 + y3\n");
    write("cov.txt", "y1 y2 y3\n1 2 0\n2 1 0\n0 0 1\nn=50\n");
    EXPECT_EQ(run({"fit", "--model", path("m.txt"), "--cov", path("cov.txt"), "--out-dir", path("o")}),
              kExitNotPositiveDefinite);
}

TEST_F(CliTest, UsageErrors) {
    EXPECT_EQ(run({}), kExitUsage);
    EXPECT_EQ(run({"frobnicate"}), kExitUsage);
    EXPECT_EQ(run({"fit", "--preset", "sbmtmm"}), kExitUsage);
    EXPECT_EQ(run({"fit", "--preset", "nope", "--cov", "x"}), kExitUsage);
    EXPECT_EQ(run({"fit", "--preset", "sbmtmm", "--cov", path("x"), "--optimizer", "bfgs"}), kExitUsage);
    EXPECT_EQ(run({"fit", "--preset", "sbmtmm", "--cov", path("missing.txt")}), kExitNoInput);
    EXPECT_EQ(run({"rank-scan", "--preset", "appendix-mtmm"}), kExitUsage);
    EXPECT_EQ(run({"rank-scan", "--grid", "0.1,abc"}), kExitUsage);
    EXPECT_EQ(run({"diagnose", "--model", path("m.txt"), "--delta", "0.1"}), kExitNoInput);
    write("cfg.txt", "nsim = 0\n");
    EXPECT_EQ(run({"simulate", "--config", path("cfg.txt"), "--out-dir", path("o")}), kExitUsage);
    write("cfg2.txt", "colour = blue\n");
    EXPECT_EQ(run({"simulate", "--config", path("cfg2.txt"), "--out-dir", path("o")}), kExitUsage);
    EXPECT_EQ(run({"--help"}), 0);
}

TEST_F(CliTest, DiagnoseReportsOrthogonalCorrelations) {
    EXPECT_EQ(run({"diagnose", "--preset", "sbmtmm", "--delta", "0", "--out-dir", path("d")}), kExitOk);
    EXPECT_NE(out_.str().find("unaffected by the deficiency: r12 r13 r23"), std::string::npos) << out_.str();
    EXPECT_NE(read("d/diagnose.json").find("\"deficiency\": 1"), std::string::npos);
    const auto ns = read("d/nullspace.csv");
    EXPECT_EQ(ns.substr(0, ns.find('\n')), "parameter,n1");
    const auto jac = read("d/jacobian.csv");
    EXPECT_EQ(std::count(jac.begin(), jac.end(), '\n'), 43);
}

TEST_F(CliTest, DiagnoseShapiroAndFullRank) {
    EXPECT_EQ(run({"diagnose", "--preset", "shapiro", "--delta", "0", "--out-dir", path("s")}), kExitOk);
    EXPECT_NE(out_.str().find("affected by the deficiency: psi3\n"), std::string::npos) << out_.str();
    EXPECT_EQ(run({"diagnose", "--preset", "sbmtmm", "--delta", "0.3", "--out-dir", path("f")}), kExitOk);
    EXPECT_NE(out_.str().find("no deficiency detected"), std::string::npos);
}

TEST_F(CliTest, DiagnoseFromFitReport) {
    const auto spec = preset("sbmtmm");
    write_population("pop.txt", spec, sbmtmm_population_theta(spec, 0.2), 500);
    ASSERT_EQ(run({"fit", "--preset", "sbmtmm", "--cov", path("pop.txt"), "--out-dir", path("fit")}), kExitOk);
    EXPECT_EQ(run({"diagnose", "--preset", "sbmtmm", "--theta", path("fit/fit.json"), "--cov", path("pop.txt"),
                   "--out-dir", path("d")}),
              kExitOk)
        << err_.str();
    EXPECT_NE(out_.str().find("no deficiency detected"), std::string::npos);
}

TEST_F(CliTest, RankScanSingleRow) {
    EXPECT_EQ(run({"rank-scan", "--grid", "0.3"}), kExitOk);
    const auto text = out_.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
    EXPECT_NE(text.find("\n0.3,"), std::string::npos);
    EXPECT_NE(text.find(",24,24,"), std::string::npos);
    EXPECT_EQ(run({"rank-scan", "--out-dir", path("rs")}), kExitOk);
    EXPECT_NE(read("rs/rank_scan.csv").find("\n0,"), std::string::npos);
}

TEST_F(CliTest, SimulateSmokeOutputsAreDeterministic) {
    write("cfg.txt", "experiment = SBMTMM\nn_grid = 50, 1000\ndelta_grid = 0, 0.3\nnsim = 2\nseed = 5\nsvg = true\n");
    ASSERT_EQ(run({"simulate", "--config", path("cfg.txt"), "--threads", "1", "--out-dir", path("a")}), kExitOk)
        << err_.str();
    ASSERT_EQ(run({"simulate", "--config", path("cfg.txt"), "--threads", "3", "--out-dir", path("b")}), kExitOk);
    for (const auto* f : {"records.csv", "summary.csv", "param_summary.csv", "summary.json", "figure3.svg"}) {
        EXPECT_EQ(read(std::string("a/") + f), read(std::string("b/") + f)) << f;
    }
    const auto records = read("a/records.csv");
    EXPECT_EQ(records.substr(0, records.find('\n')),
              "experiment,n,delta,rep,converged,stop_reason,admissible,l11,l21,l31,l12,l22,l32,l13,l23,l33,psi1,psi2,"
              "psi3,psi4,psi5,psi6,psi7,psi8,psi9,r12,r13,r23,phi4,phi5,phi6,loss");
    EXPECT_EQ(std::count(records.begin(), records.end(), '\n'), 9);
    const auto summary = read("a/summary.csv");
    EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 5);
    EXPECT_EQ(read("a/figure3.svg").rfind("<svg", 0), 0u);
}

TEST_F(CliTest, ShapiroSubcommand) {
    ASSERT_EQ(run({"shapiro", "--nsim", "5", "--n", "500", "--svg", "--out-dir", path("s")}), kExitOk) << err_.str();
    EXPECT_NE(read("s/shapiro_summary.json").find("fraction_psi3_negative"), std::string::npos);
    EXPECT_EQ(read("s/psi3_histogram.csv").rfind("lo,hi,count\n", 0), 0u);
    EXPECT_NE(read("s/figure2.svg").find("</svg>"), std::string::npos);
    EXPECT_NE(read("s/records.csv").find("\nSHAPIRO,500,0,1,"), std::string::npos);
    write("cfg.txt", "experiment = SBMTMM\n");
    EXPECT_EQ(run({"shapiro", "--config", path("cfg.txt"), "--out-dir", path("s")}), kExitUsage);
}

TEST_F(CliTest, ValidatePrintsCanonicalForm) {
    EXPECT_EQ(run({"validate", "--preset", "sbmtmm"}), kExitOk);
    EXPECT_NE(out_.str().find("free parameters 24, moments 42"), std::string::npos);
    write("m.txt", "F =~ y1 + y2 + y3\n");
    EXPECT_EQ(run({"validate", "--model", path("m.txt")}), kExitOk);
    const auto text = out_.str();
    write("canon.txt", text.substr(text.find("\n\n") + 2));
    EXPECT_EQ(run({"validate", "--model", path("canon.txt")}), kExitOk);
}

}  // namespace
}  // namespace latent_rank::cli
