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

#include "fpc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fpc/byte_io.hpp"
#include "fpc/error.hpp"
#include "fpc/losses.hpp"
#include "fpc/training.hpp"

namespace fpc::eval {
namespace {

constexpr std::size_t kMinBdPoints = 4;

struct Series {
  std::vector<double> x, y;
};

// Sorts by x and collapses equal x values, keeping the preferred y.
Series canonical(const RDCurve& c, Metric xm, Metric ym, bool x_log, bool prefer_min_y) {
  FPC_CHECK(c.points.size() >= kMinBdPoints, EvaluationError,
            "curve '" + c.label + "' has " + std::to_string(c.points.size()) + " points, BD needs at least " +
                std::to_string(kMinBdPoints));
  std::vector<std::pair<double, double>> xy;
  for (const RDPoint& p : c.points) {
    double x = metric_of(p, xm);
    double y = metric_of(p, ym);
    if (x_log) {
      FPC_CHECK(x > 0, EvaluationError, "non-positive rate in curve '" + c.label + "'");
      x = std::log10(x);
    }
    if (ym == Metric::Bpp) {
      FPC_CHECK(y > 0, EvaluationError, "non-positive rate in curve '" + c.label + "'");
      y = std::log10(y);
    }
    FPC_CHECK(std::isfinite(x) && std::isfinite(y), EvaluationError,
              "non-finite value in curve '" + c.label + "'");
    xy.emplace_back(x, y);
  }
  std::sort(xy.begin(), xy.end());
  Series s;
  for (const auto& [x, y] : xy) {
    if (!s.x.empty() && s.x.back() == x) {
      // Sorted ascending in y within a tie: the first entry is the minimum.
      if (!prefer_min_y) s.y.back() = y;
      continue;
    }
    s.x.push_back(x);
    s.y.push_back(y);
  }
  FPC_CHECK(s.x.size() >= 2, EvaluationError, "curve '" + c.label + "' collapses to a single point");
  return s;
}

BDResult average_difference(const Series& a, const Series& t) {
  const double lo = std::max(a.x.front(), t.x.front());
  const double hi = std::min(a.x.back(), t.x.back());
  if (!(hi > lo))
    throw EvaluationError("curves do not overlap: [" + std::to_string(a.x.front()) + ", " +
                          std::to_string(a.x.back()) + "] vs [" + std::to_string(t.x.front()) + ", " +
                          std::to_string(t.x.back()) + "]");
  const Pchip pa(a.x, a.y), pt(t.x, t.y);
  BDResult r;
  r.overlap_lo = lo;
  r.overlap_hi = hi;
  r.bd_metric_delta = (pt.integral(lo, hi) - pa.integral(lo, hi)) / (hi - lo);
  return r;
}

double sign(double v) { return (v > 0) - (v < 0); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void RDCurve::sort() {
  std::sort(points.begin(), points.end(), [](const RDPoint& a, const RDPoint& b) {
    return a.bpp != b.bpp ? a.bpp < b.bpp : a.qp < b.qp;
  });
}

std::string to_string(Metric m) {
  switch (m) {
    case Metric::Bpp: return "bpp";
    case Metric::Accuracy: return "accuracy";
    case Metric::AttackPsnr: return "attack_psnr";
    case Metric::AttackEdgePsnr: return "attack_edge_psnr";
  }
  return "unknown";
}

Metric metric_from_string(const std::string& s) {
  if (s == "bpp") return Metric::Bpp;
  if (s == "accuracy") return Metric::Accuracy;
  if (s == "attack_psnr" || s == "psnr") return Metric::AttackPsnr;
  if (s == "attack_edge_psnr" || s == "edge_psnr") return Metric::AttackEdgePsnr;
  throw ArgumentError("unknown metric '" + s + "'");
}

double metric_of(const RDPoint& p, Metric m) {
  switch (m) {
    case Metric::Bpp: return p.bpp;
    case Metric::Accuracy: return p.accuracy;
    case Metric::AttackPsnr: return p.attack_psnr;
    case Metric::AttackEdgePsnr: return p.attack_edge_psnr;
  }
  return 0;
}

Pchip::Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  FPC_CHECK(n >= 2 && y_.size() == n, ArgumentError, "pchip needs at least two knots");
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = x_[k + 1] - x_[k];
    FPC_CHECK(h[k] > 0, ArgumentError, "pchip knots must be strictly increasing");
    delta[k] = (y_[k + 1] - y_[k]) / h[k];
  }
  d_.assign(n, 0.0);
  if (n == 2) {
    d_[0] = d_[1] = delta[0];
    return;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (delta[k - 1] * delta[k] <= 0) continue;
    const double w1 = 2 * h[k] + h[k - 1];
    const double w2 = h[k] + 2 * h[k - 1];
    d_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
  }
  auto endpoint = [](double h0, double h1, double m0, double m1) {
    double d = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if (sign(d) != sign(m0)) {
      d = 0;
    } else if (sign(m0) != sign(m1) && std::abs(d) > 3 * std::abs(m0)) {
      d = 3 * m0;
    }
    return d;
  };
  d_[0] = endpoint(h[0], h[1], delta[0], delta[1]);
  d_[n - 1] = endpoint(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

std::size_t Pchip::segment(double x) const {
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - x_.begin() - 1, 0));
  return std::min(k, x_.size() - 2);
}

// Integral of segment k's cubic from its left knot to offset s.
double Pchip::antiderivative(std::size_t k, double s) const {
  const double h = x_[k + 1] - x_[k];
  const double delta = (y_[k + 1] - y_[k]) / h;
  const double c2 = (3 * delta - 2 * d_[k] - d_[k + 1]) / h;
  const double c3 = (d_[k] + d_[k + 1] - 2 * delta) / (h * h);
  return s * (y_[k] + s * (d_[k] / 2 + s * (c2 / 3 + s * c3 / 4)));
}

double Pchip::operator()(double x) const {
  const std::size_t k = segment(x);
  const double h = x_[k + 1] - x_[k];
  const double delta = (y_[k + 1] - y_[k]) / h;
  const double c2 = (3 * delta - 2 * d_[k] - d_[k + 1]) / h;
  const double c3 = (d_[k] + d_[k + 1] - 2 * delta) / (h * h);
  const double s = x - x_[k];
  return y_[k] + s * (d_[k] + s * (c2 + s * c3));
}

double Pchip::integral(double a, double b) const {
  FPC_CHECK(a >= x_.front() && b <= x_.back() && a <= b, ArgumentError, "integration bounds outside knots");
  const std::size_t ka = segment(a), kb = segment(b);
  if (ka == kb) return antiderivative(ka, b - x_[ka]) - antiderivative(ka, a - x_[ka]);
  double total = antiderivative(ka, x_[ka + 1] - x_[ka]) - antiderivative(ka, a - x_[ka]);
  for (std::size_t k = ka + 1; k < kb; ++k) total += antiderivative(k, x_[k + 1] - x_[k]);
  total += antiderivative(kb, b - x_[kb]);
  return total;
}

BDResult bd_rate(const RDCurve& anchor, const RDCurve& test, Metric quality) {
  FPC_CHECK(quality != Metric::Bpp, ArgumentError, "bd_rate needs a quality metric");
  BDResult r = average_difference(canonical(anchor, quality, Metric::Bpp, false, true),
                                  canonical(test, quality, Metric::Bpp, false, true));
  r.bd_rate_percent = (std::pow(10.0, r.bd_metric_delta) - 1.0) * 100.0;
  r.bd_metric_delta = 0;
  r.x_axis = to_string(quality);
  r.y_axis = "log10_bpp";
  return r;
}

BDResult bd_metric(const RDCurve& anchor, const RDCurve& test, Metric metric) {
  FPC_CHECK(metric != Metric::Bpp, ArgumentError, "bd_metric needs a quality metric");
  BDResult r = average_difference(canonical(anchor, Metric::Bpp, metric, true, false),
                                  canonical(test, Metric::Bpp, metric, true, false));
  r.x_axis = "log10_bpp";
  r.y_axis = to_string(metric);
  return r;
}

BDResult bd_quality(const RDCurve& anchor, const RDCurve& test, Metric y, Metric x) {
  FPC_CHECK(x != Metric::Bpp && y != Metric::Bpp, ArgumentError, "use bd_rate or bd_metric for rate axes");
  BDResult r = average_difference(canonical(anchor, x, y, false, false), canonical(test, x, y, false, false));
  r.x_axis = to_string(x);
  r.y_axis = to_string(y);
  return r;
}

std::string to_string(Scheme s) { return s == Scheme::Proposed ? "proposed" : "anchor"; }

RDCurve sweep_rd(const nets::ModelSet& models, const nets::ModelGraph& attacker, const SweepSpec& spec,
                 const data::Dataset& eval) {
  FPC_CHECK(!spec.qps.empty(), ArgumentError, "sweep needs at least one qp");
  FPC_CHECK(eval.size() >= 1, ArgumentError, "sweep needs evaluation images");
  FPC_CHECK(spec.batch >= 1, ArgumentError, "sweep batch must be >= 1");
  FPC_CHECK(models.frontend.frozen() && models.backend.frozen(), StateError, "sweep needs a frozen pipeline");
  const bool proposed = spec.scheme == Scheme::Proposed;
  const std::size_t expected_in = proposed ? models.ae.out_channels() : models.frontend.out_channels();
  FPC_CHECK(attacker.in_channels() == expected_in, ArgumentError,
            "attacker reads " + std::to_string(attacker.in_channels()) + " channels, " + to_string(spec.scheme) +
                " features have " + std::to_string(expected_in));

  // Features to be coded, one sample per bitstream.
  std::vector<Tensor4D> feats;
  feats.reserve(eval.size());
  for (std::size_t first = 0; first < eval.size(); first += spec.batch) {
    const std::size_t count = std::min(spec.batch, eval.size() - first);
    const Tensor4D x = nets::normalize_images(eval.images.slice_batch(first, count));
    const Tensor4D f = proposed ? nets::infer_pipeline(x, {&models.frontend, &models.ae}) : models.frontend.infer(x);
    for (std::size_t i = 0; i < count; ++i) feats.push_back(f.slice_batch(i, 1));
  }
  const Shape fs = feats.front().shape();
  const codec::TileGrid grid = codec::TileGrid::for_channels(fs.c);
  const codec::IntraCodec& codec = codec::codec_for(spec.codec);
  const std::size_t source_pixels = eval.images.shape().plane();

  std::vector<int> qps = spec.qps;
  if (spec.codec == codec::CodecId::Null) qps = {0};

  RDCurve curve;
  curve.label = spec.label.empty() ? to_string(spec.scheme) : spec.label;
  for (int qp : qps) {
    try {
      double bits = 0;
      Tensor4D decoded(Shape{eval.size(), fs.c, fs.h, fs.w});
      for (std::size_t i = 0; i < feats.size(); ++i) {
        const codec::FeatureBitstream bs = codec::encode_features(feats[i], spec.clip, grid, codec, qp);
        bits += static_cast<double>(bs.payload_bits());
        const Tensor4D d = codec::decode_features(codec::FeatureBitstream::parse(bs.serialize()), codec);
        std::copy(d.data().begin(), d.data().end(),
                  decoded.data().begin() + static_cast<std::ptrdiff_t>(i * fs.sample()));
      }
      std::size_t correct = 0;
      Tensor4D recon(eval.images.shape());
      const std::size_t per = eval.images.shape().sample();
      for (std::size_t first = 0; first < eval.size(); first += spec.batch) {
        const std::size_t count = std::min(spec.batch, eval.size() - first);
        const Tensor4D z = decoded.slice_batch(first, count);
        const Tensor4D logits =
            proposed ? nets::infer_pipeline(z, {&models.ad, &models.backend}) : models.backend.infer(z);
        const std::span<const std::int32_t> labels(eval.labels.data() + first, count);
        correct += static_cast<std::size_t>(std::lround(loss::accuracy(logits, labels) * static_cast<double>(count)));
        const Tensor4D r = attacker.infer(z);
        std::copy(r.data().begin(), r.data().end(), recon.data().begin() + static_cast<std::ptrdiff_t>(first * per));
      }
      const train::Metrics m = train::reconstruction_metrics(recon, eval.images);
      RDPoint p;
      p.qp = qp;
      p.bpp = bits / static_cast<double>(eval.size() * source_pixels);
      p.accuracy = static_cast<double>(correct) / static_cast<double>(eval.size());
      p.attack_psnr = m.psnr;
      p.attack_edge_psnr = m.edge_psnr;
      curve.points.push_back(p);
    } catch (const Error& e) {
      throw EvaluationError("qp " + std::to_string(qp) + ": " + e.what());
    }
  }
  curve.sort();
  return curve;
}

std::string curves_to_csv(const std::vector<RDCurve>& curves) {
  std::string out = "label,qp,bpp,accuracy,attack_psnr,attack_edge_psnr\n";
  for (const RDCurve& c : curves) {
    FPC_CHECK(c.label.find_first_of(",\n\"") == std::string::npos, ArgumentError,
              "curve labels may not contain commas, quotes or newlines");
    for (const RDPoint& p : c.points)
      out += c.label + "," + std::to_string(p.qp) + "," + fmt(p.bpp) + "," + fmt(p.accuracy) + "," +
             fmt(p.attack_psnr) + "," + fmt(p.attack_edge_psnr) + "\n";
  }
  return out;
}

std::vector<RDCurve> curves_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "label,qp,bpp,accuracy,attack_psnr,attack_edge_psnr")
    throw DecodeError("unexpected RD CSV header");
  std::vector<RDCurve> curves;
  std::map<std::string, std::size_t> index;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw DecodeError("RD CSV row " + std::to_string(row) + " has " + std::to_string(f.size()) + " fields");
    RDPoint p;
    try {
      p.qp = std::stoi(f[1]);
      p.bpp = std::stod(f[2]);
      p.accuracy = std::stod(f[3]);
      p.attack_psnr = std::stod(f[4]);
      p.attack_edge_psnr = std::stod(f[5]);
    } catch (const std::logic_error&) {
      throw DecodeError("RD CSV row " + std::to_string(row) + " is malformed");
    }
    auto [it, fresh] = index.emplace(f[0], curves.size());
    if (fresh) curves.push_back(RDCurve{f[0], {}});
    curves[it->second].points.push_back(p);
  }
  return curves;
}

void write_curves_csv(const std::filesystem::path& path, const std::vector<RDCurve>& curves) {
  write_text_file(path, curves_to_csv(curves));
}

std::vector<RDCurve> read_curves_csv(const std::filesystem::path& path) {
  try {
    return curves_from_csv(read_text_file(path));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

std::string svg_chart(const std::vector<RDCurve>& curves, Metric xm, Metric ym, const std::string& title) {
  constexpr double W = 640, H = 440, L = 70, R = 150, T = 40, B = 60;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const RDCurve& c : curves)
    for (const RDPoint& p : c.points) {
      const double x = metric_of(p, xm), y = metric_of(p, ym);
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  if (!(x1 >= x0)) x0 = 0, x1 = 1;
  if (!(y1 >= y0)) y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double px = (x1 - x0) * 0.05, py = (y1 - y0) * 0.05;
  x0 -= px, x1 += px, y0 -= py, y1 += py;
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return std::string(buf);
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    s << "<text x=\"" << sx(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    s << "<text x=\"" << L - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << to_string(xm) << "</text>\n";
  s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\">" << to_string(ym) << "</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* col = colors[i % std::size(colors)];
    std::vector<std::pair<double, double>> pts;
    for (const RDPoint& p : curves[i].points) {
      const double x = metric_of(p, xm), y = metric_of(p, ym);
      if (std::isfinite(x) && std::isfinite(y)) pts.emplace_back(x, y);
    }
    std::sort(pts.begin(), pts.end());
    s << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) s << sx(x) << "," << sy(y) << " ";
    s << "\"/>\n";
    for (const auto& [x, y] : pts)
      s << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
    const double ly = T + 16 + 18 * static_cast<double>(i);
    s << "<rect x=\"" << W - R + 12 << "\" y=\"" << ly - 9 << "\" width=\"14\" height=\"4\" fill=\"" << col << "\"/>\n";
    s << "<text x=\"" << W - R + 32 << "\" y=\"" << ly - 3 << "\">" << curves[i].label << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string summary_json(const std::vector<RDCurve>& curves, const std::vector<NamedBD>& bds) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["curves"] = nlohmann::json::array();
  for (const RDCurve& c : curves) {
    nlohmann::json pts = nlohmann::json::array();
    for (const RDPoint& p : c.points)
      pts.push_back({{"qp", p.qp},
                     {"bpp", num(p.bpp)},
                     {"accuracy", num(p.accuracy)},
                     {"attack_psnr", num(p.attack_psnr)},
                     {"attack_edge_psnr", num(p.attack_edge_psnr)}});
    j["curves"].push_back({{"label", c.label}, {"points", pts}});
  }
  j["bd"] = nlohmann::json::array();
  for (const NamedBD& b : bds)
    j["bd"].push_back({{"name", b.name},
                       {"bd_rate_percent", num(b.result.bd_rate_percent)},
                       {"bd_metric_delta", num(b.result.bd_metric_delta)},
                       {"overlap", {num(b.result.overlap_lo), num(b.result.overlap_hi)}},
                       {"x_axis", b.result.x_axis},
                       {"y_axis", b.result.y_axis}});
  // Headline value: the first BD-rate entry.
  j["bd_rate_percent"] = nullptr;
  for (const NamedBD& b : bds)
    if (b.result.y_axis == "log10_bpp") {
      j["bd_rate_percent"] = num(b.result.bd_rate_percent);
      break;
    }
  return j.dump(2);
}

void export_results(const std::vector<RDCurve>& curves, const std::vector<NamedBD>& bds,
                    const std::filesystem::path& out_dir) {
  write_curves_csv(out_dir / "rd.csv", curves);
  write_text_file(out_dir / "summary.json", summary_json(curves, bds));
  write_text_file(out_dir / "rate_accuracy.svg",
                  svg_chart(curves, Metric::Bpp, Metric::Accuracy, "Rate vs task accuracy"));
  write_text_file(out_dir / "psnr_accuracy.svg",
                  svg_chart(curves, Metric::Accuracy, Metric::AttackPsnr, "Attack PSNR vs task accuracy"));
}

ClipStudy clip_study(const nets::ModelSet& models, const nets::ModelGraph& attacker,
                     const std::vector<codec::ClipRange>& ranges, const SweepSpec& base,
                     const data::Dataset& eval) {
  FPC_CHECK(ranges.size() >= 2, ArgumentError, "clip study needs at least two ranges");
  ClipStudy study;
  for (const codec::ClipRange& r : ranges) {
    SweepSpec s = base;
    s.clip = r;
    s.label = base.label + "[" + fmt(r.lo) + ":" + fmt(r.hi) + "]";
    study.curves.push_back(sweep_rd(models, attacker, s, eval));
  }
  for (std::size_t i = 1; i < study.curves.size(); ++i) {
    NamedBD b{study.curves[i].label + " vs " + study.curves[0].label, {}};
    try {
      b.result = bd_rate(study.curves[0], study.curves[i]);
    } catch (const EvaluationError&) {
      b.result.bd_rate_percent = b.result.overlap_lo = b.result.overlap_hi = NAN;
      b.result.y_axis = "log10_bpp";
    }
    study.bd_vs_first.push_back(b);
  }
  return study;
}

}  // namespace fpc::eval
