#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "gvseg/dataset.hpp"
#include "gvseg/image.hpp"
#include "gvseg/labelspace.hpp"
#include "test_util.hpp"

using namespace gvseg;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

// Runs the real binary; stdout and stderr are captured together.
CliResult run_cli(const std::string& args, const fs::path& workdir) {
  const fs::path out_file = workdir / "cli_output.txt";
  const std::string cmd = std::string("cd '") + workdir.string() + "' && '" +
                          GVSEG_CLI_PATH + "' " + args + " > '" + out_file.string() +
                          "' 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  result.output = ss.str();
  return result;
}

void make_synth(const fs::path& dir, const std::string& extra = "") {
  const CliResult r = run_cli(
      "synth --count 6 --size 16x16 --classes 2 --minority 0.2 --shape disks "
      "--noise 0.1 --seed 21 --out ds " + extra,
      dir);
  REQUIRE(r.exit_code == 0);
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("version and help") {
  testutil::TempDir dir("cli_version");
  CliResult r = run_cli("--version", dir.path());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("gvseg 1.") != std::string::npos);

  r = run_cli("--help", dir.path());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("train") != std::string::npos);
}

TEST_CASE("usage errors exit with code 1") {
  testutil::TempDir dir("cli_usage");
  CHECK(run_cli("nonsense-subcommand", dir.path()).exit_code == 1);
  CHECK(run_cli("classes", dir.path()).exit_code == 1);  // missing required flag
  CHECK(run_cli("", dir.path()).exit_code == 1);         // subcommand required
}

TEST_CASE("data errors exit with code 2") {
  testutil::TempDir dir("cli_data");
  const CliResult r = run_cli("classes --classes does_not_exist.csv", dir.path());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("gvseg:") != std::string::npos);
}

TEST_CASE("classes prints the catalog summary") {
  testutil::TempDir dir("cli_classes");
  const std::string csv = std::string(GVSEG_DATA_DIR) + "/camvid/class_dict.csv";
  const std::string greenery = std::string(GVSEG_DATA_DIR) + "/camvid/greenery.txt";
  const CliResult r =
      run_cli("classes --classes " + csv + " --greenery " + greenery, dir.path());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("Tree") != std::string::npos);
  CHECK(r.output.find("C = 31 non-void classes, 2 greenery") != std::string::npos);
}

TEST_CASE("synth writes a loadable dataset plus a run record") {
  testutil::TempDir dir("cli_synth");
  make_synth(dir.path());
  CHECK(fs::exists(dir.path() / "ds" / "class_dict.csv"));
  CHECK(fs::exists(dir.path() / "ds" / "greenery.txt"));
  CHECK(fs::exists(dir.path() / "ds" / "class_dict.csv.run.json"));
  const DatasetManifest manifest = scan_dataset(dir.path() / "ds");
  CHECK(manifest.entries.size() == 6);
}

TEST_CASE("gvi emits per-image rows plus an aggregate line") {
  testutil::TempDir dir("cli_gvi");
  make_synth(dir.path());
  const CliResult r = run_cli(
      "gvi --labels ds/labels --classes ds/class_dict.csv --greenery ds/greenery.txt",
      dir.path());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("id,greenery_pixels,valid_pixels,gvi") != std::string::npos);
  CHECK(r.output.find("synth_00000") != std::string::npos);
  CHECK(r.output.find("aggregate,") != std::string::npos);
}

TEST_CASE("weights emits one row per image and class") {
  testutil::TempDir dir("cli_weights");
  make_synth(dir.path());
  const CliResult r = run_cli(
      "weights --data ds --classes ds/class_dict.csv --out weights.csv", dir.path());
  CHECK(r.exit_code == 0);
  std::ifstream in(dir.path() / "weights.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "image,class,count,weight");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 6 * 2);
  CHECK(fs::exists(dir.path() / "weights.csv.run.json"));
}

TEST_CASE("train, predict and eval run end to end") {
  testutil::TempDir dir("cli_pipeline");
  make_synth(dir.path());
  const CliResult train_result = run_cli(
      "train --data ds --classes ds/class_dict.csv --greenery ds/greenery.txt "
      "--depth 2 --base-channels 4 --lr 0.2 --momentum 0.9 --epochs 8 --batch 2 "
      "--weighting eq2 --seed 5 --out model.ckpt",
      dir.path());
  REQUIRE(train_result.exit_code == 0);
  CHECK(fs::exists(dir.path() / "model.ckpt"));
  CHECK(fs::exists(dir.path() / "model.ckpt.log.csv"));
  CHECK(fs::exists(dir.path() / "model.ckpt.metrics.json"));
  CHECK(fs::exists(dir.path() / "model.ckpt.run.json"));

  const CliResult predict_result = run_cli(
      "predict --ckpt model.ckpt --image ds/images/synth_00000.png --out pred.png",
      dir.path());
  REQUIRE(predict_result.exit_code == 0);
  CHECK(fs::exists(dir.path() / "pred.png"));

  // Evaluating the labels against themselves is a perfect score.
  const CliResult eval_result = run_cli(
      "eval --gt ds/labels --pred ds/labels --classes ds/class_dict.csv "
      "--greenery ds/greenery.txt --out self.json",
      dir.path());
  REQUIRE(eval_result.exit_code == 0);
  std::ifstream in(dir.path() / "self.json");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().find("\"mean_iou\": 1.0") != std::string::npos);
  CHECK(ss.str().find("\"mae_pct\": 0.0") != std::string::npos);

  const CliResult report_result = run_cli("report self.json", dir.path());
  CHECK(report_result.exit_code == 0);
  CHECK(report_result.output.find("IoU g.") != std::string::npos);
  CHECK(report_result.output.find("self.json") != std::string::npos);
}

TEST_CASE("gradcheck passes and prints the error") {
  testutil::TempDir dir("cli_gradcheck");
  const CliResult r = run_cli(
      "gradcheck --depth 2 --size 8x8 --classes 3 --samples 100 --seed 7", dir.path());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("PASS") != std::string::npos);

  // An absurd tolerance fails with the numeric exit code.
  const CliResult fail = run_cli(
      "gradcheck --depth 2 --size 8x8 --classes 3 --samples 50 --seed 7 --tol 1e-18",
      dir.path());
  CHECK(fail.exit_code == 3);
  CHECK(fail.output.find("FAIL") != std::string::npos);
}

TEST_CASE("remap relabels a directory of label images") {
  testutil::TempDir dir("cli_remap");
  const std::string data = GVSEG_DATA_DIR;

  // Paint a small 32-class label image: Tree, Car, Sky, Void.
  const ClassCatalog source =
      ClassCatalog::load(data + "/camvid/class_dict.csv", data + "/camvid/greenery.txt");
  fs::create_directories(dir.path() / "labels");
  LabelMap y(2, 2);
  y(0, 0) = static_cast<std::int32_t>(*source.index_of_name("Tree"));
  y(0, 1) = static_cast<std::int32_t>(*source.index_of_name("Car"));
  y(1, 0) = kVoidLabel;
  y(1, 1) = static_cast<std::int32_t>(*source.index_of_name("Sky"));
  write_png_rgb8(dir.path() / "labels" / "frame_L.png", encode_label_image(y, source));

  const CliResult r = run_cli(
      "remap --labels labels --classes " + data + "/camvid/class_dict.csv" +
          " --table " + data + "/camvid/remap_to_7.csv" + " --target-classes " + data +
          "/camvid/class_dict_7.csv --out remapped",
      dir.path());
  REQUIRE(r.exit_code == 0);

  const ClassCatalog target =
      ClassCatalog::load(data + "/camvid/class_dict_7.csv", data + "/camvid/greenery.txt");
  const LabelMap out =
      decode_label_image(read_png_rgb8(dir.path() / "remapped" / "frame_L.png"), target);
  CHECK(out(0, 0) == *target.index_of_name("Tree"));
  CHECK(out(0, 1) == *target.index_of_name("Others"));
  CHECK(out(1, 0) == kVoidLabel);
  CHECK(out(1, 1) == *target.index_of_name("Sky"));
}

TEST_CASE("overlapping split files surface as exit code 2") {
  testutil::TempDir dir("cli_overlap");
  make_synth(dir.path());
  fs::create_directories(dir.path() / "ds" / "splits");
  auto write_split = [&](const char* name, const std::vector<std::string>& ids) {
    std::ofstream out(dir.path() / "ds" / "splits" / name);
    for (const auto& id : ids) out << id << "\n";
  };
  write_split("train.txt", {"synth_00000", "synth_00001", "synth_00002", "synth_00003"});
  write_split("val.txt", {"synth_00003", "synth_00004"});  // overlap
  write_split("test.txt", {"synth_00005"});

  const CliResult r =
      run_cli("weights --data ds --classes ds/class_dict.csv", dir.path());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("split overlap") != std::string::npos);
}

TEST_SUITE_END();
