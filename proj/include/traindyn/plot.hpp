#pragma once

#include <filesystem>

#include "traindyn/dynamics.hpp"
#include "traindyn/explain.hpp"

namespace traindyn {

/// Mean given-label probability per epoch with a +-1 std band, split into
/// clean and mislabeled series when flags are present (single series
/// otherwise). Throws on an empty table.
void emit_dynamics_plot(const DynamicsTable& table, const std::filesystem::path& path);

/// Bar chart of per-epoch importances (x = epoch index, y = importance).
void emit_explanation_plot(const Explanation& explanation,
                           const std::filesystem::path& path);

}  // namespace traindyn
