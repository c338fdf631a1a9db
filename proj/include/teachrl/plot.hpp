#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "teachrl/experiments.hpp"

namespace teachrl::plot {

/// Trailing moving average over `window` points (shorter at the start).
std::vector<double> smooth(const std::vector<double>& values, int window);

/// Two-panel PNG: mean reward and mean steps per episode, one line per curve.
/// Curves are smoothed for display only.
void write_learning_curves(const std::filesystem::path& path, const std::string& title,
                           const std::vector<experiments::Curve>& curves, int smoothing);

}  // namespace teachrl::plot
