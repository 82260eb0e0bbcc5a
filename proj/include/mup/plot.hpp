#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "mup/csv.hpp"

namespace mup {

enum class PlotKind { LossVsLrByWidth, CoordCheckByWidth };

std::string_view to_string(PlotKind kind);
PlotKind parse_plot_kind(std::string_view name);

struct PlotOptions {
  std::optional<std::size_t> layer;  // coord-check layer; defaults to the last one
};

/// Standalone SVG 1.1 with one polyline per width and a legend. Loss plots
/// take the lr-sweep CSV (seed-mean validation loss against log2 lr);
/// coord-check plots take the coord-check CSV (rel_to_first against step).
std::string render_svg(const CsvTable& rows, PlotKind kind, const PlotOptions& opts = {});

void emit_plot(const CsvTable& rows, PlotKind kind, const std::filesystem::path& out_path,
               const PlotOptions& opts = {});

}  // namespace mup
