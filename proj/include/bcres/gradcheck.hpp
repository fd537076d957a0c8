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

// Finite-difference verification of every backward pass, in double
// precision. Each check builds a random scalar objective L = <forward
// output, fixed weights>, computes the analytic gradient, probes every
// input element with central differences, and reports
//   max |analytic - numeric| / max(1e-6, max|analytic|, max|numeric|)
// per tensor, aggregated to one line per op over all seeds.

#ifndef BCRES_GRADCHECK_HPP_
#define BCRES_GRADCHECK_HPP_

#include <string>
#include <vector>

namespace bcres {

struct GradCheckOptions {
  int n_seeds = 5;
  double step = 1e-3;
  // Whole-block objectives compose many nonlinearities, so truncation
  // error at the op-level step already exceeds the tolerance; the block
  // checks probe with this finer step instead.
  double block_step = 1e-5;
  double tol = 1e-5;
  // Fault-injection hook: scales the analytic swish derivative so the
  // harness itself can be shown to catch a wrong backward.
  bool corrupt_swish = false;
};

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

/// Runs every op-level check plus one normal and one transition block.
std::vector<GradCheckResult> run_gradchecks(const GradCheckOptions& opt = {});

bool all_pass(const std::vector<GradCheckResult>& results);

}  // namespace bcres

#endif  // BCRES_GRADCHECK_HPP_
