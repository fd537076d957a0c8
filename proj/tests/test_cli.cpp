// Copyright 2026  The bcres Authors
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

// End-to-end checks of the command-line binary: exit codes (0 success,
// 1 verification/training failure, 2 usage or environment errors) and
// the featdump round trip.

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <string>

#include "bcres/audio.hpp"
#include "bcres/common.hpp"
#include "doctest.h"
#include "test_util.hpp"

namespace {

using namespace bcres;

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(BCRES_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("cli: count succeeds and rejects bad arguments") {
  CHECK(run_cli("count") == 0);
  CHECK(run_cli("count --tau 3 --frames 100") == 0);
  CHECK(run_cli("count --tau 0.001") == 2);   // narrowest stage scales to zero
  CHECK(run_cli("count --frames 0") == 2);    // flag validation
  CHECK(run_cli("no-such-command") == 2);
  CHECK(run_cli("") == 2);  // a subcommand is required
}

TEST_CASE("cli: gradcheck exit codes distinguish pass from failure") {
  CHECK(run_cli("gradcheck --seeds 1") == 0);
  CHECK(run_cli("gradcheck --seeds 1 --corrupt-swish") == 1);
}

TEST_CASE("cli: train rejects a missing dataset directory") {
  bcres::testutil::TempDir tmp("cli_missing");
  CHECK(run_cli("train --dataset /no/such/place --out " + tmp.path()) == 2);
}

TEST_CASE("cli: eval runs on a fresh checkpoint and cross-checks tau") {
  bcres::testutil::TempDir tmp("cli_eval");
  const std::string out = tmp.path() + "/run";
  REQUIRE(run_cli("train --dataset micro --epochs 0 --seed 5 --quiet --out " + out) == 0);
  const std::string ckpt = out + "/final.ckpt";
  CHECK(run_cli("eval --checkpoint " + ckpt +
                " --dataset micro --split test --seed 5") == 0);
  CHECK(run_cli("eval --checkpoint " + ckpt +
                " --dataset micro --split test --seed 5 --tau 2") == 2);
  CHECK(run_cli("eval --checkpoint " + tmp.path() +
                "/absent.ckpt --dataset micro") == 2);
}

TEST_CASE("cli: featdump reproduces the library frontend bitwise") {
  bcres::testutil::TempDir tmp("cli_feat");
  Waveform w;
  w.samples.resize(kClipSamples);
  for (int i = 0; i < kClipSamples; ++i)
    w.samples[i] = 0.4f * std::sin(2.0 * 3.14159265358979323846 * 700.0 * i / kSampleRate);
  const std::string wav = tmp.path() + "/tone.wav";
  const std::string feat = tmp.path() + "/tone.feat";
  write_wav(wav, w);
  REQUIRE(run_cli("featdump " + wav + " --out " + feat) == 0);

  const Tensor<float> want = log_mel(fit_to_length(read_wav(wav)));
  const Tensor<float> got_flat = read_feat(feat);
  REQUIRE(got_flat.data.size() == want.data.size());
  CHECK(got_flat.data == want.data);

  CHECK(run_cli("featdump " + tmp.path() + "/absent.wav --out " + feat) == 2);
}
