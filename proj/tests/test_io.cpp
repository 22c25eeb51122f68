#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "gibly/io.hpp"
#include "gibly/rng.hpp"

using namespace gibly;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("io_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

PointCloud random_cloud(int n, bool labels, std::uint64_t seed) {
  PointCloud cloud;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    cloud.coords.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10),
                            rng.uniform(-10, 10)});
    if (labels) cloud.labels.push_back(static_cast<int>(rng.next_u64() % 7));
  }
  return cloud;
}

}  // namespace

TEST_CASE("reads a plain two-point xyz file") {
  TempFile f("two_point.xyz");
  write_text(f.path, "0 0 0\n1 0 0\n");
  const PointCloud cloud = read_cloud(f.path);
  CHECK(cloud.size() == 2);
  CHECK(!cloud.has_labels());
  CHECK(cloud.coords[1].x == 1.0);
}

TEST_CASE("xyz comments and labels are handled") {
  TempFile f("labeled.xyz");
  write_text(f.path, "# header comment\n0 0 0 3\n1 2 3 5\n");
  const PointCloud cloud = read_cloud(f.path);
  CHECK(cloud.size() == 2);
  REQUIRE(cloud.has_labels());
  CHECK(cloud.labels[0] == 3);
  CHECK(cloud.labels[1] == 5);
}

TEST_CASE("short line raises a ParseError with its line number") {
  TempFile f("short.xyz");
  write_text(f.path, "1 2\n");
  try {
    read_cloud(f.path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
    CHECK(std::string(e.what()).find("3 or 4 fields") != std::string::npos);
  }
}

TEST_CASE("empty file raises a diagnostic") {
  TempFile f("empty.xyz");
  write_text(f.path, "# nothing here\n");
  CHECK_THROWS_AS(read_cloud(f.path), ParseError);
}

TEST_CASE("junk bytes never crash the parser") {
  TempFile f("junk.xyz");
  write_text(f.path, "\x01\x02 nonsense \xff\n1 2 3\n");
  CHECK_THROWS_AS(read_cloud(f.path), ParseError);
}

TEST_CASE("xyz round trip preserves coordinates exactly") {
  const PointCloud cloud = random_cloud(200, true, 71);
  TempFile f("roundtrip.xyz");
  write_cloud(cloud, f.path);
  const PointCloud back = read_cloud(f.path);
  REQUIRE(back.size() == cloud.size());
  for (int i = 0; i < cloud.size(); ++i) {
    CHECK(back.coords[i].x == cloud.coords[i].x);
    CHECK(back.coords[i].y == cloud.coords[i].y);
    CHECK(back.coords[i].z == cloud.coords[i].z);
    CHECK(back.labels[i] == cloud.labels[i]);
  }
}

TEST_CASE("ply round trip preserves coordinates exactly") {
  const PointCloud cloud = random_cloud(150, true, 73);
  TempFile f("roundtrip.ply");
  write_cloud(cloud, f.path);
  const std::string text = read_text(f.path);
  CHECK(text.find("element vertex 150") != std::string::npos);
  const PointCloud back = read_cloud(f.path);
  REQUIRE(back.size() == cloud.size());
  for (int i = 0; i < cloud.size(); ++i) {
    CHECK(back.coords[i].x == cloud.coords[i].x);
    CHECK(back.labels[i] == cloud.labels[i]);
  }
}

TEST_CASE("unlabeled clouds omit the label column") {
  const PointCloud cloud = random_cloud(5, false, 79);
  TempFile f("unlabeled.xyz");
  write_cloud(cloud, f.path);
  std::ifstream in(f.path);
  std::string line;
  std::getline(in, line);
  int fields = 1;
  for (char c : line) fields += c == ' ' ? 1 : 0;
  CHECK(fields == 3);
}

TEST_CASE("ply with extra vertex properties warns and reads") {
  TempFile f("extra.ply");
  write_text(f.path,
             "ply\nformat ascii 1.0\nelement vertex 2\n"
             "property float x\nproperty float y\nproperty float z\n"
             "property float intensity\nend_header\n"
             "0 0 0 9.5\n1 1 1 8.5\n");
  const PointCloud cloud = read_cloud(f.path);
  CHECK(cloud.size() == 2);
  CHECK(cloud.coords[1].z == 1.0);
}

TEST_CASE("ply with a non-vertex element skips it") {
  TempFile f("faces.ply");
  write_text(f.path,
             "ply\nformat ascii 1.0\nelement vertex 1\n"
             "property float x\nproperty float y\nproperty float z\n"
             "element face 1\nproperty list uchar int vertex_indices\n"
             "end_header\n0.5 0.25 0.125\n3 0 0 0\n");
  const PointCloud cloud = read_cloud(f.path);
  CHECK(cloud.size() == 1);
  CHECK(cloud.coords[0].x == 0.5);
}

TEST_CASE("ply vertex list property is unsupported") {
  TempFile f("bad_list.ply");
  write_text(f.path,
             "ply\nformat ascii 1.0\nelement vertex 1\n"
             "property list uchar float weights\n"
             "property float x\nproperty float y\nproperty float z\n"
             "end_header\n1 0.5 0 0 0\n");
  try {
    read_cloud(f.path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("unsupported PLY") != std::string::npos);
  }
}

TEST_CASE("binary ply is rejected with a diagnostic") {
  TempFile f("binary.ply");
  write_text(f.path,
             "ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
             "property float x\nend_header\n");
  CHECK_THROWS_AS(read_cloud(f.path), ParseError);
}

TEST_CASE("format sniffing detects ply without the extension") {
  TempFile f("sniffed.cloud");
  write_text(f.path,
             "ply\nformat ascii 1.0\nelement vertex 1\n"
             "property float x\nproperty float y\nproperty float z\n"
             "end_header\n1 2 3\n");
  const PointCloud cloud = read_cloud(f.path);
  CHECK(cloud.size() == 1);
  CHECK(cloud.coords[0].y == 2.0);
}

TEST_CASE("write_features emits a header plus one row per point") {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = 0.5;
  TempFile f("tiny.csv");
  write_features(m, f.path);
  CHECK(read_text(f.path) == "f0\n0.5\n");
}

TEST_CASE("feature CSV round trip is accurate to 1e-8") {
  Rng rng(83);
  Eigen::MatrixXd m(40, 7);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 7; ++j) m(i, j) = rng.uniform(-5, 5);
  TempFile f("features.csv");
  write_features(m, f.path);
  const Eigen::MatrixXd back = read_features_csv(f.path);
  REQUIRE(back.rows() == 40);
  REQUIRE(back.cols() == 7);
  CHECK((back - m).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("cloud writes are byte deterministic") {
  const PointCloud cloud = random_cloud(50, true, 89);
  TempFile a("det_a.xyz"), b("det_b.xyz");
  write_cloud(cloud, a.path);
  write_cloud(cloud, b.path);
  CHECK(read_text(a.path) == read_text(b.path));
}

TEST_CASE("missing file reports an error") {
  CHECK_THROWS(read_cloud("does_not_exist_anywhere.xyz"));
}

TEST_CASE("layer parameter dump lists every learnable value") {
  GiblyConfig cfg;
  cfg.gibs_per_kind = 1;
  cfg.num_composites = 3;
  cfg.mc_samples = 8;
  cfg.projection_dim = 2;
  cfg.global_seed = 5;
  const GiblyLayer layer = make_layer(cfg, 0);
  TempFile f("params.txt");
  write_layer_params(layer, f.path);

  std::ifstream in(f.path);
  std::string line;
  int lines = 0;
  bool saw_gib_radius = false, saw_weight = false, saw_bias = false;
  while (std::getline(in, line)) {
    ++lines;
    CHECK(line.find(" = ") != std::string::npos);
    saw_gib_radius |= line.rfind("gib0.cylinder.r = ", 0) == 0;
    saw_weight |= line.rfind("W[0][0] = ", 0) == 0;
    saw_bias |= line.rfind("bias[1] = ", 0) == 0;
  }
  CHECK(lines == layer_param_count(layer));
  CHECK(saw_gib_radius);
  CHECK(saw_weight);
  CHECK(saw_bias);
}

TEST_CASE("train report CSV carries both models and all classes") {
  TrainReport report;
  report.num_classes = 2;
  EpochMetrics em;
  em.epoch = 0;
  em.loss = 0.5;
  em.accuracy = 0.75;
  em.class_iou = {0.5, 0.25};
  em.miou = 0.375;
  report.gibly_epochs = {em, em};
  em.accuracy = 0.5;
  report.baseline_epochs = {em};

  TempFile f("report.csv");
  write_train_report_csv(report, f.path);
  const std::string text = read_text(f.path);
  CHECK(text.find("model,epoch,loss,accuracy,miou,iou_0,iou_1\n") == 0);
  int rows = 0;
  for (char c : text) rows += c == '\n' ? 1 : 0;
  CHECK(rows == 4);  // header + 2 gibly + 1 baseline
  CHECK(text.find("gibly,0,0.5,0.75,0.375,0.5,0.25") != std::string::npos);
  CHECK(text.find("baseline,0,0.5,0.5,0.375,0.5,0.25") != std::string::npos);
}

TEST_CASE("fit report CSV has the trajectory and final parameters") {
  FitResult result;
  result.objective = {0.25, 0.5};
  result.params.kind = GibKind::HollowCylinder;
  result.params.r = 0.5;
  TempFile f("fit.csv");
  write_fit_report_csv(result, f.path);
  const std::string text = read_text(f.path);
  CHECK(text.find("step,objective\n0,0.25\n1,0.5\n") == 0);
  CHECK(text.find("# kind = hollow_cylinder") != std::string::npos);
  CHECK(text.find("# r = 0.5\n") != std::string::npos);
}
