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

#include <algorithm>
#include <set>
#include <string>

#include "bcres/gradcheck.hpp"
#include "doctest.h"

using namespace bcres;

TEST_CASE("gradcheck: every backward matches finite differences") {
  const auto results = run_gradchecks();
  std::set<std::string> names;
  for (const auto& r : results) {
    INFO(r.name, " max rel err ", r.max_rel_err);
    CHECK(r.pass);
    CHECK(r.max_rel_err < 1e-5);
    names.insert(r.name);
  }
  CHECK(all_pass(results));
  CHECK(names.size() >= 10);  // distinct op coverage
  CHECK(names.count("block_normal") == 1);
  CHECK(names.count("block_transition") == 1);
}

TEST_CASE("gradcheck: the harness catches a corrupted derivative") {
  GradCheckOptions opt;
  opt.n_seeds = 2;
  opt.corrupt_swish = true;
  const auto results = run_gradchecks(opt);
  CHECK_FALSE(all_pass(results));
  const auto swish = std::find_if(results.begin(), results.end(),
                                  [](const auto& r) { return r.name == "swish"; });
  REQUIRE(swish != results.end());
  CHECK_FALSE(swish->pass);
  // Only the injected fault trips; everything else still passes.
  for (const auto& r : results)
    if (r.name != "swish") CHECK(r.pass);
}
