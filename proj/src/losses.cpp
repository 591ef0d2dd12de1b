// src/losses.cpp

// Copyright 2026 The accentvae Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "accentvae/losses.hpp"

#include <sstream>

namespace accentvae {

ReconMode ParseReconMode(const std::string &name) {
  if (name == "mse") return ReconMode::kMse;
  if (name == "l2_norm") return ReconMode::kL2Norm;
  throw UsageError("unknown recon_mode '" + name + "' (expected mse or l2_norm)");
}

const char *ReconModeName(ReconMode mode) {
  return mode == ReconMode::kMse ? "mse" : "l2_norm";
}

void BetaSchedule::Validate() const {
  if (ramp_start_step < 0 || ramp_start_step >= ramp_end_step)
    throw UsageError("beta schedule: ramp_start_step must be >= 0 and < ramp_end_step");
  if (!(start_value >= 0) || !(start_value <= end_value))
    throw UsageError("beta schedule: need 0 <= start_value <= end_value");
}

double BetaAt(long step, const BetaSchedule &s) {
  if (step < 0) throw Error("beta_at: negative step");
  if (step <= s.ramp_start_step) return s.start_value;
  if (step >= s.ramp_end_step) return s.end_value;
  const double f = static_cast<double>(step - s.ramp_start_step) /
                   static_cast<double>(s.ramp_end_step - s.ramp_start_step);
  return s.start_value + f * (s.end_value - s.start_value);
}

bool LossBreakdown::AllFinite() const {
  for (double v : {recon, kl, beta, adv, ce, stop, total_g, total_d})
    if (!std::isfinite(v)) return false;
  return true;
}

std::string LossBreakdown::ToString() const {
  std::ostringstream os;
  os << "recon=" << recon << " kl=" << kl << " beta=" << beta << " adv=" << adv << " ce=" << ce
     << " stop=" << stop << " total_g=" << total_g << " total_d=" << total_d;
  return os.str();
}

}  // namespace accentvae
