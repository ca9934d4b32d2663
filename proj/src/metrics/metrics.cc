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

#include "bsrnn/metrics/metrics.h"

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <regex>

#include "bsrnn/dsp/stft.h"
#include "bsrnn/error.h"
#include "bsrnn/model/streaming.h"
#include "bsrnn/random.h"

namespace bsrnn::metrics {

double SiSnr(const Waveform& est, const Waveform& ref) {
  BSRNN_CHECK(est.size() == ref.size(), ErrorKind::kParameter,
              "si-snr needs equal lengths");
  BSRNN_CHECK(!ref.samples.empty(), ErrorKind::kMetric, "empty reference");
  const std::size_t n = ref.size();
  double me = 0.0, mr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    me += est.samples[i];
    mr += ref.samples[i];
  }
  me /= n;
  mr /= n;
  double dot = 0.0, rr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ref.samples[i] - mr;
    dot += (est.samples[i] - me) * r;
    rr += r * r;
  }
  BSRNN_CHECK(rr > 0.0, ErrorKind::kMetric, "silent reference");
  const double alpha = dot / rr;
  double target = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = alpha * (ref.samples[i] - mr);
    const double e = (est.samples[i] - me) - t;
    target += t * t;
    noise += e * e;
  }
  if (noise <= 0.0) return target > 0.0 ? kSiSnrCapDb : -kSiSnrCapDb;
  if (target <= 0.0) return -kSiSnrCapDb;
  return std::clamp(10.0 * std::log10(target / noise), -kSiSnrCapDb, kSiSnrCapDb);
}

double Lsd(const Waveform& est, const Waveform& ref) {
  BSRNN_CHECK(est.size() == ref.size(), ErrorKind::kParameter,
              "lsd needs equal lengths");
  BSRNN_CHECK(est.sample_rate == ref.sample_rate, ErrorKind::kParameter,
              "lsd needs equal rates");
  const auto cfg = dsp::StftConfig::FromMs(ref.sample_rate, 20.0, 10.0);
  const auto e = dsp::Magnitude(dsp::Stft(est, cfg));
  const auto r = dsp::Magnitude(dsp::Stft(ref, cfg));
  constexpr double kEps = 1e-8;
  double total = 0.0;
  for (Eigen::Index t = 0; t < r.cols(); ++t) {
    double acc = 0.0;
    for (Eigen::Index f = 0; f < r.rows(); ++f) {
      const double d = 20.0 * std::log10((e(f, t) + kEps) / (r(f, t) + kEps));
      acc += d * d;
    }
    total += std::sqrt(acc / r.rows());
  }
  return total / r.cols();
}

nlohmann::json MetricReport::ToJson() const {
  nlohmann::json j = {{"si_snr_db", si_snr_db}, {"lsd_db", lsd_db}};
  j["pesq"] = pesq ? nlohmann::json(*pesq) : nlohmann::json("absent");
  j["rtf"] = rtf ? nlohmann::json(*rtf) : nlohmann::json("absent");
  return j;
}

namespace {

std::string ShellQuote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

}  // namespace

std::string RunCommandTemplate(const std::string& tmpl,
                               const std::map<std::string, std::string>& subs) {
  std::string cmd = tmpl;
  for (const auto& [key, value] : subs) {
    const std::string token = "{" + key + "}";
    for (std::size_t pos = cmd.find(token); pos != std::string::npos;
         pos = cmd.find(token, pos)) {
      const std::string q = ShellQuote(value);
      cmd.replace(pos, token.size(), q);
      pos += q.size();
    }
  }
  FILE* pipe = popen(cmd.c_str(), "r");
  BSRNN_CHECK(pipe != nullptr, ErrorKind::kAdapter, "cannot run: " + cmd);
  std::string out;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = pclose(pipe);
  BSRNN_CHECK(status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0,
              ErrorKind::kAdapter, "command failed: " + cmd);
  return out;
}

double ParseScore(const std::string& output, const std::string& pattern) {
  static const std::string kFloat = "([-+]?(?:[0-9]+\\.?[0-9]*|\\.[0-9]+)(?:[eE][-+]?[0-9]+)?)";
  std::string re = pattern;
  const std::string token = "(float)";
  const auto pos = re.find(token);
  BSRNN_CHECK(pos != std::string::npos, ErrorKind::kAdapter,
              "score pattern must contain (float)");
  re.replace(pos, token.size(), kFloat);
  std::smatch m;
  try {
    if (!std::regex_search(output, m, std::regex(re))) {
      throw Error(ErrorKind::kAdapter, "no score matching '" + pattern + "' in output");
    }
  } catch (const std::regex_error& e) {
    throw Error(ErrorKind::kAdapter, std::string("bad score pattern: ") + e.what());
  }
  return std::stod(m[1].str());
}

double ExternalScore(const std::string& est_path, const std::string& ref_path,
                     const std::string& command_template,
                     const std::string& pattern) {
  const std::string out =
      RunCommandTemplate(command_template, {{"est", est_path}, {"ref", ref_path}});
  return ParseScore(out, pattern);
}

MetricReport Evaluate(const std::string& est_path, const std::string& ref_path,
                      const std::string& pesq_command,
                      const std::string& pesq_pattern) {
  const Waveform est = ReadWav(est_path);
  const Waveform ref = ReadWav(ref_path);
  MetricReport r;
  r.si_snr_db = SiSnr(est, ref);
  r.lsd_db = Lsd(est, ref);
  if (!pesq_command.empty()) {
    try {
      r.pesq = ExternalScore(est_path, ref_path, pesq_command, pesq_pattern);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kAdapter) throw;
    }
  }
  return r;
}

double MeasureRtf(model::Model& m, double duration_s, int runs, uint64_t seed) {
  BSRNN_CHECK(duration_s > 0.0 && runs >= 1, ErrorKind::kParameter,
              "rtf needs a positive duration and at least one run");
  const int rate = m.config().stft.sample_rate;
  const std::size_t n = static_cast<std::size_t>(std::lround(duration_s * rate));
  Rng rng(seed);
  std::vector<float> x(n);
  for (float& v : x) v = static_cast<float>(0.1 * rng.Normal());
  std::vector<float> emb;
  if (m.config().personalized) {
    emb.resize(m.config().embedding_dim);
    double norm = 0.0;
    for (float& v : emb) {
      v = static_cast<float>(rng.Normal());
      norm += v * v;
    }
    for (float& v : emb) v = static_cast<float>(v / std::sqrt(norm));
  }
  const std::size_t hop = m.config().stft.hop_len;
  auto pass = [&]() {
    model::StreamingEnhancer s(m, m.config().personalized ? &emb : nullptr);
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < n; i += hop) {
      s.Push(std::span<const float>(x.data() + i, std::min(hop, n - i)));
    }
    s.Flush();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  pass();
  std::vector<double> times;
  for (int r = 0; r < runs; ++r) times.push_back(pass());
  std::sort(times.begin(), times.end());
  const double median = runs % 2 == 1
                            ? times[runs / 2]
                            : 0.5 * (times[runs / 2 - 1] + times[runs / 2]);
  return median / (static_cast<double>(n) / rate);
}

}  // namespace bsrnn::metrics
