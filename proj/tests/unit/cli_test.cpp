#include <gtest/gtest.h>

#include <json.hpp>
#include <random>
#include <sys/wait.h>

#include "provaudit/workspace.hpp"
#include "scenes.hpp"

#ifdef PROVAUDIT_CLI

using namespace provaudit;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + PROVAUDIT_CLI + "\" " + args + " > \"" +
                          log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  const auto bytes = read_file(p);
  return std::string(bytes.begin(), bytes.end());
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    std::random_device rd;
    root_ = fs::temp_directory_path() / ("provaudit-cli-" + std::to_string(rd()));
    fs::create_directories(root_ / "corpus");
    fs::create_directories(root_ / "pairs");
    fs::create_directories(root_ / "copies");
    fs::create_directories(root_ / "fresh");
    std::string csv = "id_a,id_b,label\n";
    for (int i = 0; i < 8; ++i) {
      const ImageTensor scene = scenes::natural_scene(700 + i);
      write_file_atomic(root_ / "corpus" / ("c" + std::to_string(i) + ".ppm"), encode_ppm(scene));
      write_file_atomic(root_ / "pairs" / ("s" + std::to_string(i) + ".ppm"),
                        encode_ppm(shift_image(scene, 1, 0)));
      csv += std::to_string(i) + ",s" + std::to_string(i) + ".ppm,similar\n";
      csv += std::to_string(i) + "," + std::to_string((i + 3) % 8) + ",dissimilar\n";
    }
    write_file_atomic(root_ / "pairs" / "pairs.csv", csv);
    fs::copy_file(root_ / "corpus" / "c2.ppm", root_ / "copies" / "c2.ppm");
    write_file_atomic(root_ / "fresh" / "n.ppm", encode_ppm(scenes::noise_image(5)));
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static std::string ws() { return "-w \"" + (root_ / "ws").string() + "\" "; }
  static fs::path log() { return root_ / "log.txt"; }
  static fs::path root_;
};

fs::path CliTest::root_;

}  // namespace

TEST_F(CliTest, FullPipelineAndExitCodes) {
  ASSERT_EQ(run(ws() + "ingest \"" + (root_ / "corpus").string() + "\"", log()), 0) << slurp(log());
  EXPECT_NE(slurp(log()).find("ingested 8 images"), std::string::npos);
  ASSERT_EQ(run(ws() + "build-index", log()), 0) << slurp(log());

  // Audit before calibration fails with a hint.
  EXPECT_EQ(run(ws() + "audit \"" + (root_ / "fresh").string() + "\"", log()), 1);
  EXPECT_NE(slurp(log()).find("provaudit calibrate"), std::string::npos);

  ASSERT_EQ(run(ws() + "calibrate \"" + (root_ / "pairs" / "pairs.csv").string() + "\"", log()), 0)
      << slurp(log());
  EXPECT_NE(slurp(log()).find("AUC 1.000000"), std::string::npos);

  const fs::path report = root_ / "report.json";
  EXPECT_EQ(run(ws() + "audit \"" + (root_ / "copies").string() + "\" --format json --out \"" +
                    report.string() + "\" --model-id m1 --user-id u7 --labor-note 'took a while'",
                log()),
            3)
      << slurp(log());
  const auto j = nlohmann::json::parse(slurp(report));
  EXPECT_EQ(j["verdicts"][0]["decision"], "replication");
  EXPECT_EQ(j["verdicts"][0]["nearest"]["path"], "c2.ppm");
  EXPECT_EQ(j["verdicts"][0]["user_id"], "u7");
  EXPECT_EQ(j["verdicts"][0]["labor_note"], "took a while");

  EXPECT_EQ(run(ws() + "audit \"" + (root_ / "fresh").string() + "\"", log()), 0) << slurp(log());
  EXPECT_NE(slurp(log()).find("novel"), std::string::npos);

  EXPECT_EQ(run(ws() + "bench --queries 10", log()), 0) << slurp(log());
  EXPECT_NE(slurp(log()).find("recall@1"), std::string::npos);
}

TEST_F(CliTest, BadArgumentsFail) {
  EXPECT_EQ(run("", log()), 1);
  EXPECT_EQ(run(ws(), log()), 1);
  EXPECT_EQ(run(ws() + "frobnicate", log()), 1);
  EXPECT_EQ(run(ws() + "--size 100 build-index", log()), 1);
  EXPECT_NE(slurp(log()).find("error:"), std::string::npos);
  EXPECT_EQ(run(ws() + "--policy best build-index", log()), 1);
  EXPECT_EQ(run("--help", log()), 0);
}

#endif
