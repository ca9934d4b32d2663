// Copyright (c) 2026 The bsrnn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef BSRNN_METRICS_METRICS_H_
#define BSRNN_METRICS_METRICS_H_

#include <map>
#include <optional>
#include <string>

#include "bsrnn/audio_io.h"
#include "bsrnn/model/model.h"
#include "json.hpp"

namespace bsrnn::metrics {

constexpr double kSiSnrCapDb = 40.0;

// Scale-invariant SNR in dB, clamped to [-40, 40]. Both signals are made
// zero-mean first; a silent reference is a metric error.
double SiSnr(const Waveform& est, const Waveform& ref);

// Log-spectral distance in dB over 20 ms / 10 ms Hann frames.
double Lsd(const Waveform& est, const Waveform& ref);

struct MetricReport {
  double si_snr_db = 0.0;
  double lsd_db = 0.0;
  std::optional<double> pesq;
  std::optional<double> rtf;

  nlohmann::json ToJson() const;
};

// Runs `tmpl` through the shell after replacing each {key} with the
// shell-quoted value. Returns stdout; a nonzero exit is an adapter error.
std::string RunCommandTemplate(const std::string& tmpl,
                               const std::map<std::string, std::string>& subs);

// Extracts a number using `pattern`, a regular expression in which the token
// "(float)" stands for a floating-point capture group.
double ParseScore(const std::string& output, const std::string& pattern);

// Raw score from an external tool, e.g. "pesq {ref} {est}" with pattern
// "PESQ=(float)".
double ExternalScore(const std::string& est_path, const std::string& ref_path,
                     const std::string& command_template,
                     const std::string& pattern);

// Evaluates est against ref; the PESQ field is filled only if a command is
// given and succeeds.
MetricReport Evaluate(const std::string& est_path, const std::string& ref_path,
                      const std::string& pesq_command = "",
                      const std::string& pesq_pattern = "(float)");

// Wall-clock streaming time over audio duration: median of `runs` timed
// passes over `duration_s` of noise after one warm-up pass.
double MeasureRtf(model::Model& m, double duration_s, int runs = 5,
                  uint64_t seed = 0);

}  // namespace bsrnn::metrics

#endif  // BSRNN_METRICS_METRICS_H_
