#include <filesystem>
#include <fstream>
#include <regex>

#include "doctest.h"
#include "gripsim/io/model_file.hpp"
#include "helpers.hpp"

using namespace gripsim;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
}

const char* kTinyTrain = R"(generator_warmup: 6
surrogate_warmup: 4
joint_steps: 4
generator_batch: 4
surrogate_batch: 4
label_batch: 2
initial_perturbations: 1
generator_hidden: [16, 16]
surrogate_hidden: [16]
joint_generator_lr: 0.01
loss: {stability: 10}
)";

// Small dataset shared by the training commands.
const std::string& data_dir() {
  static const std::string dir = [] {
    const std::string d = temp_dir("cli_data");
    const auto r = run_cli("gen-data --count 10 --seed 4 --out " + d);
    if (r.code != 0) throw std::runtime_error(r.output);
    return d;
  }();
  return dir;
}

std::string train_config() {
  static const std::string path = [] {
    const std::string p = temp_dir("cli_cfg") + "/train.yaml";
    write_text(p, kTinyTrain);
    return p;
  }();
  return path;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

double stable_fraction(const std::string& output) {
  std::smatch m;
  REQUIRE(std::regex_search(output, m, std::regex("stable fraction ([0-9.]+)")));
  return std::stod(m[1]);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("free fall over two seconds prints the closed form") {
    const std::string out = temp_dir("cli_sim") + "/traj.csv";
    const auto r = run_cli("simulate --scene " + fixture("free_fall.yaml") + " --out " + out);
    REQUIRE(r.code == 0);
    CHECK(r.output == "19.7960000\n");
    CHECK(lines(file_bytes(out)).size() == 102u);
    CHECK(fs::exists(out + ".manifest.json"));
  }

  TEST_CASE("caged fixture prints a small displacement") {
    const auto r = run_cli("simulate --scene " + fixture("caged.yaml") + " --out " + temp_dir("cli_cage") + "/t.csv");
    REQUIRE(r.code == 0);
    CHECK(std::stod(r.output) < 0.01);
  }

  TEST_CASE("malformed scene names the offending key") {
    const std::string dir = temp_dir("cli_bad");
    write_text(dir + "/bad.yaml", "seed: 1\nobject:\n  densty: 5\n");
    const auto r = run_cli("simulate --scene " + dir + "/bad.yaml --out " + dir + "/t.csv");
    CHECK(r.code == 2);
    CHECK(r.output.find("densty") != std::string::npos);
    CHECK(r.output.find(":3:") != std::string::npos);
    CHECK(run_cli("simulate --scene " + dir + "/missing.yaml").code != 0);
    CHECK(run_cli("").code != 0);
  }

  TEST_CASE("gen-data is deterministic and rejects an empty request") {
    const std::string a = temp_dir("cli_gen_a"), b = temp_dir("cli_gen_b");
    const auto ra = run_cli("gen-data --count 6 --seed 3 --out " + a);
    const auto rb = run_cli("gen-data --count 6 --seed 3 --out " + b);
    REQUIRE(ra.code == 0);
    REQUIRE(rb.code == 0);
    CHECK(ra.output == rb.output);
    CHECK(file_bytes(a + "/dataset.bin") == file_bytes(b + "/dataset.bin"));
    CHECK(fs::exists(a + "/manifest.json"));
    CHECK(run_cli("gen-data --count 0 --out " + temp_dir("cli_gen_0")).code == 2);
  }

  TEST_CASE("default generation mostly wraps stably and a zero margin does worse") {
    const std::string dir = temp_dir("cli_margin");
    write_text(dir + "/tight.yaml", "wrap_margin: 0\n");
    const auto wrapped = run_cli("gen-data --count 20 --seed 6 --out " + dir + "/a");
    const auto tight = run_cli("gen-data --count 20 --seed 6 --config " + dir + "/tight.yaml --out " + dir + "/b");
    REQUIRE(wrapped.code == 0);
    REQUIRE(tight.code == 0);
    CHECK(stable_fraction(wrapped.output) > 0.5);
    CHECK(stable_fraction(tight.output) < stable_fraction(wrapped.output));
  }

  TEST_CASE("training twice with the same seeds gives identical outputs") {
    const std::string a = temp_dir("cli_train_a"), b = temp_dir("cli_train_b");
    const auto ra = run_cli("train --data " + data_dir() + " --config " + train_config() + " --out " + a);
    const auto rb = run_cli("train --data " + data_dir() + " --config " + train_config() + " --out " + b);
    REQUIRE(ra.code == 0);
    REQUIRE(rb.code == 0);
    for (const char* f : {"model.bin", "state.bin", "report.csv", "eval.csv"})
      CHECK(file_bytes(a + "/" + f) == file_bytes(b + "/" + f));
    CHECK(ra.output.find("final AE") != std::string::npos);
  }

  TEST_CASE("an interrupted run resumes to identical bytes") {
    const std::string whole = temp_dir("cli_whole"), parts = temp_dir("cli_parts");
    const std::string base = "train --data " + data_dir() + " --config " + train_config() + " --out ";
    REQUIRE(run_cli(base + whole).code == 0);
    const auto first = run_cli(base + parts + " --stop-after 11 --checkpoint-every 3");
    REQUIRE(first.code == 0);
    CHECK(first.output.find("stopped at step 11") != std::string::npos);
    const auto second = run_cli(base + parts + " --resume");
    REQUIRE(second.code == 0);
    CHECK(second.output.find("resumed at step 11") != std::string::npos);
    for (const char* f : {"model.bin", "state.bin", "report.csv"})
      CHECK(file_bytes(whole + "/" + f) == file_bytes(parts + "/" + f));
  }

  TEST_CASE("baseline and deepsim reports share the warm-up prefix") {
    const std::string a = temp_dir("cli_base"), b = temp_dir("cli_deep");
    const std::string base = "train --data " + data_dir() + " --config " + train_config();
    REQUIRE(run_cli(base + " --mode baseline --out " + a).code == 0);
    REQUIRE(run_cli(base + " --mode deepsim-s --out " + b).code == 0);
    const auto ra = lines(file_bytes(a + "/report.csv")), rb = lines(file_bytes(b + "/report.csv"));
    REQUIRE(ra.size() == 15u);
    REQUIRE(rb.size() == 15u);
    for (int i = 0; i <= 6; ++i) CHECK(ra[i] == rb[i]);
    CHECK(ra.back() != rb.back());
    CHECK(run_cli(base + " --mode deepsim-x --out " + a).code != 0);
  }

  TEST_CASE("eval of a ground-truth echo and of a far-away object") {
    const std::string dir = temp_dir("cli_echo");
    write_text(dir + "/clean.yaml", "noise: {angles: 0, rotation: 0, translation: 0, dropout: 0}\n");
    REQUIRE(run_cli("gen-data --count 6 --seed 2 --config " + dir + "/clean.yaml --out " + dir + "/data").code == 0);
    const Dataset ds = load_dataset(dir + "/data/dataset.bin");
    const int n = static_cast<int>(ds.train.front().observation.size());
    ModelFile m;
    m.label = "echo";
    m.generator.mlp = Mlp({Layer{Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n), Activation::Identity}});
    save_model(dir + "/echo.bin", m);
    const auto r = run_cli("eval --data " + dir + "/data --checkpoint " + dir + "/echo.bin --out " + dir + "/m.csv");
    REQUIRE(r.code == 0);
    CHECK(r.output.find("test: samples") != std::string::npos);
    CHECK(r.output.find("MJE 0.0000 cm") != std::string::npos);
    CHECK(r.output.find("SR 100.00%") != std::string::npos);
    const std::string first = file_bytes(dir + "/m.csv");
    REQUIRE(run_cli("eval --data " + dir + "/data --checkpoint " + dir + "/echo.bin --out " + dir + "/m.csv").code == 0);
    CHECK(file_bytes(dir + "/m.csv") == first);

    const PoseEncoding L{n - 18};
    m.generator.mlp.mutable_layers()[0].bias[L.object_offset()] = 10.0 / kTranslationUnit;
    save_model(dir + "/far.bin", m);
    const auto far = run_cli("eval --data " + dir + "/data --checkpoint " + dir + "/far.bin --out " + dir + "/f.csv");
    REQUIRE(far.code == 0);
    CHECK(far.output.find("CP 0.00%") != std::string::npos);

    CHECK(run_cli("eval --data " + data_dir() + " --checkpoint " + dir + "/echo.bin --out " + dir + "/d.csv").code == 0);
  }

  TEST_CASE("grad-compare on free fall and without a surrogate") {
    const std::string dir = temp_dir("cli_grad");
    const std::string trained = temp_dir("cli_grad_model");
    REQUIRE(run_cli("train --data " + data_dir() + " --config " + train_config() + " --out " + trained).code == 0);
    const auto r = run_cli("grad-compare --scene " + fixture("free_fall.yaml") + " --checkpoint " + trained +
                           "/model.bin --steps 10 --out " + dir + "/p.csv");
    REQUIRE(r.code == 0);
    const auto rows = lines(file_bytes(dir + "/p.csv"));
    REQUIRE(rows.size() == 5u);
    const std::string surrogate = rows[1].substr(rows[1].rfind(',') + 1);
    for (std::size_t i = 2; i < rows.size(); ++i) CHECK(rows[i].substr(rows[i].rfind(',') + 1) == surrogate);
    const auto ok = run_cli("grad-compare --data " + data_dir() + " --index 0 1 --checkpoint " + trained +
                            "/model.bin --out " + dir + "/p.csv");
    REQUIRE(ok.code == 0);
    CHECK(lines(file_bytes(dir + "/p.csv")).size() == 9u);
    const std::string baseline = temp_dir("cli_grad_base");
    REQUIRE(run_cli("train --mode baseline --data " + data_dir() + " --config " + train_config() + " --out " + baseline)
                .code == 0);
    CHECK(run_cli("grad-compare --data " + data_dir() + " --checkpoint " + baseline + "/model.bin --out " + dir +
                  "/b.csv").code == 2);
  }

  TEST_CASE("emit then parse is the identity") {
    for (const char* f : {"free_fall.yaml", "caged.yaml", "one_sided.yaml", "probe_box_open.yaml"}) {
      const SceneFile s = load_fixture(f);
      const std::string text = emit_scene(s);
      CHECK(parse_scene(text) == s);
      CHECK(emit_scene(parse_scene(text)) == text);
    }
  }

  TEST_CASE("unknown config keys are rejected") {
    CHECK_THROWS_AS(parse_train_config("joint_step: 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_dataset_config("count: 3\nnoise: {jitter: 1}\n"), ConfigError);
    CHECK_THROWS_AS(parse_sim_params("dt: -1\n"), ConfigError);
    try {
      parse_train_config("seed: 1\nloss:\n  stabilty: 2\n", "t.yaml");
      FAIL("no error");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("stabilty") != std::string::npos);
    }
  }
}
