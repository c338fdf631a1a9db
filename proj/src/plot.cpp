#include "teachrl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <stdexcept>

namespace teachrl::plot {

std::vector<double> smooth(const std::vector<double>& values, int window) {
  if (window < 1) throw std::invalid_argument("smoothing window must be >= 1");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= static_cast<std::size_t>(window)) sum -= values[i - static_cast<std::size_t>(window)];
    const auto n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    out[i] = sum / static_cast<double>(n);
  }
  return out;
}

namespace {

const std::vector<cv::Scalar> kPalette = {
    {180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214}, {189, 103, 148}, {75, 86, 140}};

constexpr int kPanelW = 560;
constexpr int kPanelH = 400;
constexpr int kMarginL = 70, kMarginR = 20, kMarginT = 40, kMarginB = 50;

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), std::abs(v) >= 100 ? "%.0f" : "%.1f", v);
  return buf;
}

void draw_panel(cv::Mat& img, int x0, const std::string& label,
                const std::vector<std::vector<double>>& series) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (const auto& s : series) {
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    n = std::max(n, s.size());
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi - lo < 1e-9) lo -= 1, hi += 1;

  const cv::Point tl(x0 + kMarginL, kMarginT);
  const cv::Point br(x0 + kPanelW - kMarginR, kPanelH - kMarginB);
  const int w = br.x - tl.x, h = br.y - tl.y;
  cv::rectangle(img, tl, br, cv::Scalar(0, 0, 0), 1);
  cv::putText(img, label, {tl.x, tl.y - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.55, {0, 0, 0}, 1, cv::LINE_AA);

  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    const int y = br.y - static_cast<int>(std::lround(h * i / 4.0));
    cv::line(img, {tl.x - 4, y}, {tl.x, y}, {0, 0, 0}, 1);
    cv::putText(img, tick_label(v), {x0 + 8, y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0}, 1, cv::LINE_AA);
  }
  const std::size_t last = n > 0 ? n - 1 : 0;
  for (int i = 0; i <= 4; ++i) {
    const int x = tl.x + static_cast<int>(std::lround(w * i / 4.0));
    cv::line(img, {x, br.y}, {x, br.y + 4}, {0, 0, 0}, 1);
    const auto ep = static_cast<double>(last) * i / 4.0;
    cv::putText(img, tick_label(std::round(ep)), {x - 10, br.y + 20}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                {0, 0, 0}, 1, cv::LINE_AA);
  }
  cv::putText(img, "episode", {tl.x + w / 2 - 25, br.y + 40}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {0, 0, 0}, 1,
              cv::LINE_AA);

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    std::vector<cv::Point> pts;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double fx = last ? static_cast<double>(i) / static_cast<double>(last) : 0.0;
      const double fy = (s[i] - lo) / (hi - lo);
      pts.emplace_back(tl.x + static_cast<int>(std::lround(fx * w)), br.y - static_cast<int>(std::lround(fy * h)));
    }
    cv::polylines(img, pts, false, kPalette[k % kPalette.size()], 2, cv::LINE_AA);
  }
}

}  // namespace

void write_learning_curves(const std::filesystem::path& path, const std::string& title,
                           const std::vector<experiments::Curve>& curves, int smoothing) {
  const int legend_h = 24 * static_cast<int>(curves.size()) + 16;
  cv::Mat img(kPanelH + legend_h + 30, 2 * kPanelW, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::putText(img, title, {kMarginL, 22}, cv::FONT_HERSHEY_SIMPLEX, 0.7, {0, 0, 0}, 2, cv::LINE_AA);

  std::vector<std::vector<double>> reward, steps;
  for (const auto& c : curves) {
    reward.push_back(smooth(c.mean_reward, smoothing));
    steps.push_back(smooth(c.mean_steps, smoothing));
  }
  cv::Mat top = img(cv::Rect(0, 30, 2 * kPanelW, kPanelH));
  draw_panel(top, 0, "mean reward per episode", reward);
  draw_panel(top, kPanelW, "mean steps per episode", steps);

  for (std::size_t k = 0; k < curves.size(); ++k) {
    const int y = 30 + kPanelH + 16 + 24 * static_cast<int>(k);
    const auto color = kPalette[k % kPalette.size()];
    cv::line(img, {kMarginL, y}, {kMarginL + 30, y}, color, 3);
    cv::putText(img, curves[k].config_id + "  (" + std::to_string(curves[k].seeds) + " seeds)",
                {kMarginL + 40, y + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0}, 1, cv::LINE_AA);
  }
  if (!cv::imwrite(path.string(), img)) throw std::runtime_error("cannot write plot " + path.string());
}

}  // namespace teachrl::plot
