#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cortolam/data.hpp"
#include "cortolam/layer.hpp"

namespace cortolam {

/// One map panel: either a layer class or a continuous value per neuron,
/// aligned with the neuron order passed to render_svg.
struct PlotPanel {
  std::string title;
  std::variant<std::vector<LayerClass>, std::vector<double>> colors;
};

struct PlotOptions {
  double panel_width_px = 600;
  double point_radius_px = 1.2;
};

/// Fixed palette, indexed by class ordinal.
std::string_view layer_color(LayerClass c);

/// Viridis-like ramp, t clamped to [0, 1].
std::string colormap(double t);

/// Standalone SVG with one panel per entry side by side, each with one
/// circle per neuron and its own legend. Throws Error(Validation) when a
/// panel does not cover every neuron.
std::string render_svg(std::span<const NeuronRecord> neurons, std::span<const PlotPanel> panels,
                       const PlotOptions& opts = {});

/// Per-neuron classes from a CSV with an id column and a class column
/// (`layer` by default). Unknown tokens raise Error(Parse); neurons missing
/// from the file raise Error(Reference).
std::vector<LayerClass> classes_for(std::span<const NeuronRecord> neurons, const CsvDocument& doc,
                                    const std::string& column = "layer");

/// Per-neuron numeric values from a CSV column.
std::vector<double> values_for(std::span<const NeuronRecord> neurons, const CsvDocument& doc,
                               const std::string& column);

}  // namespace cortolam
