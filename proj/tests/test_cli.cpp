// Copyright 2026 The AudioSpa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// End-to-end checks of the command-line surface. The binary path arrives via
// the AUDIOSPA_BIN environment variable set by CTest.

#define CATCH_CONFIG_MAIN
#include <catch2/catch.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "audiospa/audio.hpp"
#include "audiospa/wav.hpp"

#include <json.hpp>

using namespace audiospa;
namespace fs = std::filesystem;

namespace {

std::string bin() {
  const char* b = std::getenv("AUDIOSPA_BIN");
  REQUIRE(b != nullptr);
  return b;
}

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const fs::path out_file = fs::temp_directory_path() / "audiospa_cli_out.txt";
  const std::string cmd = bin() + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("audiospa_cli_ws_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

void write_templates(const fs::path& path) {
  std::ofstream out(path);
  out << "# test templates\nAt {azimuth} degrees, the {event} rings out.\n";
}

}  // namespace

TEST_CASE("help exits 0 and lists every subcommand", "[cli]") {
  RunResult r = run("--help");
  CHECK(r.exit_code == 0);
  for (const char* sub : {"synth-hrirs", "render", "spatialize", "localize", "evaluate", "train",
                          "train-localizer", "make-events"})
    CHECK(r.output.find(sub) != std::string::npos);
  CHECK(run("synth-hrirs --help").exit_code == 0);
}

TEST_CASE("unknown flags and subcommands exit 1", "[cli]") {
  CHECK(run("--definitely-not-a-flag").exit_code == 1);
  CHECK(run("frobnicate").exit_code == 1);
  CHECK(run("synth-hrirs --no-such-option x").exit_code == 1);
}

TEST_CASE("synth-hrirs writes the requested set deterministically", "[cli]") {
  Workspace ws;
  RunResult r = run("synth-hrirs --out " + ws.p("hrirs"));
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(ws.p("hrirs") + "/manifest.json"));
  int wavs = 0;
  for (const auto& e : fs::directory_iterator(ws.p("hrirs")))
    if (e.path().extension() == ".wav") ++wavs;
  CHECK(wavs == 36);

  SECTION("12-azimuth variant") {
    REQUIRE(run("synth-hrirs --azimuths 12 --out " + ws.p("hrirs12")).exit_code == 0);
    nlohmann::json manifest;
    std::ifstream(ws.p("hrirs12") + "/manifest.json") >> manifest;
    CHECK(manifest.at("entries").size() == 12);
  }

  SECTION("re-running produces byte-identical artifacts") {
    const std::string before = file_bytes(ws.p("hrirs") + "/hrir_90.wav");
    REQUIRE(run("synth-hrirs --out " + ws.p("hrirs_again")).exit_code == 0);
    CHECK(file_bytes(ws.p("hrirs_again") + "/hrir_90.wav") == before);
  }

  SECTION("no temp files left behind") {
    for (const auto& e : fs::recursive_directory_iterator(ws.dir))
      CHECK(e.path().extension() != ".tmp");
  }
}

TEST_CASE("render honors the azimuth conventions", "[cli]") {
  Workspace ws;
  REQUIRE(run("synth-hrirs --out " + ws.p("hrirs")).exit_code == 0);
  REQUIRE(run("make-events --out " + ws.p("events") + " --count 3 --seconds 0.3").exit_code == 0);
  const std::string mono = ws.p("events") + "/event_1.wav";

  SECTION("azimuth 0 gives identical channels") {
    REQUIRE(run("render --mono " + mono + " --azimuth 0 --hrirs " + ws.p("hrirs") + "/manifest.json --out " +
                ws.p("front.wav"))
                .exit_code == 0);
    BinauralClip out = load_binaural_wav(ws.p("front.wav"));
    CHECK(out.left == out.right);
  }

  SECTION("azimuth 90 puts more energy on the left") {
    REQUIRE(run("render --mono " + mono + " --azimuth 90 --hrirs " + ws.p("hrirs") + "/manifest.json --out " +
                ws.p("left.wav") + " --emit-input")
                .exit_code == 0);
    BinauralClip out = load_binaural_wav(ws.p("left.wav"));
    CHECK(energy(out.left) > energy(out.right));
    CHECK(fs::exists(ws.p("left.input.wav")));
  }

  SECTION("missing input file exits 2") {
    CHECK(run("render --mono " + ws.p("nope.wav") + " --azimuth 0 --hrirs " + ws.p("hrirs") +
              "/manifest.json --out " + ws.p("x.wav"))
              .exit_code == 2);
  }

  SECTION("azimuth outside the set exits 2") {
    CHECK(run("render --mono " + mono + " --azimuth 45 --hrirs " + ws.p("hrirs") + "/manifest.json --out " +
              ws.p("x.wav"))
              .exit_code == 2);
  }

  SECTION("json errors go to stderr as JSON") {
    RunResult r = run("--json render --mono " + ws.p("nope.wav") + " --azimuth 0 --hrirs " + ws.p("hrirs") +
                      "/manifest.json --out " + ws.p("x.wav"));
    CHECK(r.exit_code == 2);
    const auto nl = r.output.find('{');
    REQUIRE(nl != std::string::npos);
    const auto j = nlohmann::json::parse(r.output.substr(nl));
    CHECK(j.contains("error"));
  }
}

TEST_CASE("train, spatialize, localize and evaluate round-trip", "[cli][slow]") {
  Workspace ws;
  REQUIRE(run("synth-hrirs --out " + ws.p("hrirs")).exit_code == 0);
  write_templates(ws.p("templates.txt"));

  // tiny generator
  REQUIRE(run("train --events synthetic:4x0.2 --hrirs " + ws.p("hrirs") + "/manifest.json --templates " +
              ws.p("templates.txt") + " --out " + ws.p("gen.ckpt") + " --log " + ws.p("gen.jsonl") +
              " --max-epochs 2 --batch-size 2 --num-blocks 2 --residual-channels 8 --segment-seconds 0.2" +
              " --encoder stub --seed 3")
              .exit_code == 0);
  REQUIRE(fs::exists(ws.p("gen.ckpt")));

  // tiny localizer: short analysis window via config file
  {
    std::ofstream cfg(ws.p("loc_cfg.json"));
    cfg << R"({"max_epochs": 2, "batch_size": 4, "localizer": {"analysis_seconds": 0.2},
               "sampler": {"segment_seconds": 0.2, "noise_enabled": false}, "seed": 4})";
  }
  REQUIRE(run("train-localizer --config " + ws.p("loc_cfg.json") + " --events synthetic:8x0.2 --hrirs " +
              ws.p("hrirs") + "/manifest.json --templates " + ws.p("templates.txt") + " --out " +
              ws.p("loc.ckpt"))
              .exit_code == 0);

  // spatialize twice: identical artifacts
  REQUIRE(run("make-events --out " + ws.p("events") + " --count 2 --seconds 0.2").exit_code == 0);
  const std::string mono = ws.p("events") + "/event_0.wav";
  REQUIRE(run("spatialize --mono " + mono + " --prompt \"At 90 degrees, the tone rings out.\" --ckpt " +
              ws.p("gen.ckpt") + " --out " + ws.p("a.wav"))
              .exit_code == 0);
  REQUIRE(run("spatialize --mono " + mono + " --prompt \"At 90 degrees, the tone rings out.\" --ckpt " +
              ws.p("gen.ckpt") + " --out " + ws.p("b.wav"))
              .exit_code == 0);
  CHECK(file_bytes(ws.p("a.wav")) == file_bytes(ws.p("b.wav")));

  // output length matches input length
  CHECK(load_binaural_wav(ws.p("a.wav")).size() == load_mono_wav(mono).size());

  // localize emits azimuths + posterior JSON
  RunResult loc = run("localize --audio " + ws.p("a.wav") + " --ckpt " + ws.p("loc.ckpt"));
  REQUIRE(loc.exit_code == 0);
  const auto j = nlohmann::json::parse(loc.output);
  CHECK(j.at("azimuths").size() == 1);
  CHECK(j.at("posterior").size() == 36);

  SECTION("two sources decode two azimuths") {
    RunResult two = run("localize --audio " + ws.p("a.wav") + " --ckpt " + ws.p("loc.ckpt") + " --sources 2");
    REQUIRE(two.exit_code == 0);
    CHECK(nlohmann::json::parse(two.output).at("azimuths").size() == 2);
  }

  SECTION("mono audio into localize exits 2") {
    CHECK(run("localize --audio " + mono + " --ckpt " + ws.p("loc.ckpt")).exit_code == 2);
  }

  SECTION("corrupted checkpoint exits 2") {
    const std::string bytes = file_bytes(ws.p("gen.ckpt"));
    {
      std::ofstream bad(ws.p("bad.ckpt"), std::ios::binary);
      bad << bytes.substr(0, bytes.size() / 3);
    }
    {
      std::ofstream meta(ws.p("bad.ckpt.json"));
      std::ifstream src(ws.p("gen.ckpt.json"));
      meta << src.rdbuf();
    }
    CHECK(run("spatialize --mono " + mono + " --prompt hi --ckpt " + ws.p("bad.ckpt") + " --out " +
              ws.p("c.wav"))
              .exit_code == 2);
  }

  SECTION("evaluate writes report and CSV; re-emission is idempotent") {
    {
      std::ofstream scenes(ws.p("scenes.json"));
      scenes << nlohmann::json{{"hrirs", ws.p("hrirs") + "/manifest.json"},
                               {"templates", ws.p("templates.txt")},
                               {"events", "synthetic:4x0.2"},
                               {"noise", "none"},
                               {"sampler", {{"segment_seconds", 0.2}, {"noise_enabled", false}}},
                               {"seed", 11},
                               {"count", 4}}
                    .dump();
    }
    REQUIRE(run("evaluate --gen-ckpt " + ws.p("gen.ckpt") + " --loc-ckpt " + ws.p("loc.ckpt") + " --scenes " +
                ws.p("scenes.json") + " --report " + ws.p("report.json"))
                .exit_code == 0);
    REQUIRE(fs::exists(ws.p("report.json")));
    REQUIRE(fs::exists(ws.p("report.csv")));
    const std::string report1 = file_bytes(ws.p("report.json"));
    const std::string csv = file_bytes(ws.p("report.csv"));
    CHECK(csv.rfind("mae_deg,acc_percent,sdr_db,sisdr_db\n", 0) == 0);
    nlohmann::json rj = nlohmann::json::parse(report1);
    CHECK(rj.at("records").size() == 4);

    REQUIRE(run("evaluate --gen-ckpt " + ws.p("gen.ckpt") + " --loc-ckpt " + ws.p("loc.ckpt") + " --scenes " +
                ws.p("scenes.json") + " --report " + ws.p("report.json"))
                .exit_code == 0);
    CHECK(file_bytes(ws.p("report.json")) == report1);

    SECTION("ground-truth baseline needs no generator checkpoint") {
      REQUIRE(run("evaluate --loc-ckpt " + ws.p("loc.ckpt") + " --scenes " + ws.p("scenes.json") +
                  " --baseline ground-truth --report " + ws.p("gt.json"))
                  .exit_code == 0);
      nlohmann::json gt = nlohmann::json::parse(file_bytes(ws.p("gt.json")));
      CHECK(gt.at("aggregates").at("sdr_db").get<double>() == Approx(100.0));
    }
  }

  SECTION("empty scene set exits 2") {
    {
      std::ofstream scenes(ws.p("empty.json"));
      scenes << nlohmann::json{{"hrirs", ws.p("hrirs") + "/manifest.json"},
                               {"templates", ws.p("templates.txt")},
                               {"events", "synthetic:4x0.2"},
                               {"count", 0}}
                    .dump();
    }
    CHECK(run("evaluate --gen-ckpt " + ws.p("gen.ckpt") + " --loc-ckpt " + ws.p("loc.ckpt") + " --scenes " +
              ws.p("empty.json") + " --report " + ws.p("r.json"))
              .exit_code == 2);
  }
}

TEST_CASE("make-events writes a loadable catalog", "[cli]") {
  Workspace ws;
  REQUIRE(run("make-events --out " + ws.p("ev") + " --count 5 --seconds 0.1 --seed 9").exit_code == 0);
  nlohmann::json catalog;
  std::ifstream(ws.p("ev") + "/catalog.json") >> catalog;
  REQUIRE(catalog.size() == 5);
  int wavs = 0;
  for (const auto& e : fs::directory_iterator(ws.p("ev")))
    if (e.path().extension() == ".wav") ++wavs;
  CHECK(wavs == 5);

  SECTION("same seed reproduces identical events") {
    REQUIRE(run("make-events --out " + ws.p("ev2") + " --count 5 --seconds 0.1 --seed 9").exit_code == 0);
    CHECK(file_bytes(ws.p("ev") + "/event_3.wav") == file_bytes(ws.p("ev2") + "/event_3.wav"));
  }
}
