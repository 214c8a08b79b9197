// Copyright 2026 The fpc Authors.
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

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fpc/codec.hpp"
#include "fpc/data.hpp"
#include "fpc/networks.hpp"

namespace fpc::eval {

struct RDPoint {
  int qp = 0;
  double bpp = 0;  // payload bits per source-image pixel
  double accuracy = 0;
  double attack_psnr = 0;
  double attack_edge_psnr = 0;

  friend bool operator==(const RDPoint&, const RDPoint&) = default;
};

struct RDCurve {
  std::string label;
  std::vector<RDPoint> points;

  // Canonical order: bpp ascending, ties by qp.
  void sort();
  friend bool operator==(const RDCurve&, const RDCurve&) = default;
};

enum class Metric { Bpp, Accuracy, AttackPsnr, AttackEdgePsnr };
std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);
double metric_of(const RDPoint& p, Metric m);

// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes with
// the three-point endpoint rule). Knots must be strictly increasing.
class Pchip {
 public:
  Pchip(std::vector<double> x, std::vector<double> y);
  double operator()(double x) const;
  // Exact integral of the interpolant over [a, b] within the knot range.
  double integral(double a, double b) const;
  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }

 private:
  std::size_t segment(double x) const;
  double antiderivative(std::size_t k, double s) const;
  std::vector<double> x_, y_, d_;
};

struct BDResult {
  double bd_rate_percent = 0;  // set by bd_rate
  double bd_metric_delta = 0;  // set by bd_metric / bd_quality
  double overlap_lo = 0;
  double overlap_hi = 0;
  std::string x_axis;
  std::string y_axis;
};

// Average rate difference at equal quality: log10(bpp) is interpolated as a
// function of `quality`; BD-rate = (10^mean_diff - 1) * 100.
BDResult bd_rate(const RDCurve& anchor, const RDCurve& test, Metric quality = Metric::Accuracy);
// Average metric difference (test - anchor) at equal rate, metric interpolated
// over log10(bpp).
BDResult bd_metric(const RDCurve& anchor, const RDCurve& test, Metric metric = Metric::Accuracy);
// Average difference of `y` (test - anchor) at equal `x`, both read from the
// points directly. bd_quality(a, t, AttackPsnr, Accuracy) is the
// attack-PSNR-versus-accuracy comparison.
BDResult bd_quality(const RDCurve& anchor, const RDCurve& test, Metric y, Metric x);

enum class Scheme { Proposed, Anchor };
std::string to_string(Scheme s);

struct SweepSpec {
  std::string label;
  Scheme scheme = Scheme::Proposed;
  codec::CodecId codec = codec::CodecId::DctIntra;
  std::vector<int> qps{34, 36, 38, 40, 41, 42};
  codec::ClipRange clip;
  std::size_t batch = 64;
};

// Proposed: frontend -> AE -> code -> AD -> backend, attacked on the decoded
// bottleneck. Anchor: frontend -> code -> backend, attacked on the decoded
// split features. Every image is coded as its own bitstream. The null codec
// gives a single point.
RDCurve sweep_rd(const nets::ModelSet& models, const nets::ModelGraph& attacker, const SweepSpec& spec,
                 const data::Dataset& eval);

// label,qp,bpp,accuracy,attack_psnr,attack_edge_psnr
std::string curves_to_csv(const std::vector<RDCurve>& curves);
std::vector<RDCurve> curves_from_csv(const std::string& text);
void write_curves_csv(const std::filesystem::path& path, const std::vector<RDCurve>& curves);
std::vector<RDCurve> read_curves_csv(const std::filesystem::path& path);

// One polyline per curve.
std::string svg_chart(const std::vector<RDCurve>& curves, Metric x, Metric y, const std::string& title);

struct NamedBD {
  std::string name;
  BDResult result;
};

std::string summary_json(const std::vector<RDCurve>& curves, const std::vector<NamedBD>& bds);
// Writes rd.csv, summary.json, rate_accuracy.svg and psnr_accuracy.svg.
void export_results(const std::vector<RDCurve>& curves, const std::vector<NamedBD>& bds,
                    const std::filesystem::path& out_dir);

struct ClipStudy {
  std::vector<RDCurve> curves;
  // BD-rate of each later range against the first; NaN where the curves do
  // not overlap.
  std::vector<NamedBD> bd_vs_first;
};
ClipStudy clip_study(const nets::ModelSet& models, const nets::ModelGraph& attacker,
                     const std::vector<codec::ClipRange>& ranges, const SweepSpec& base,
                     const data::Dataset& eval);

}  // namespace fpc::eval
