#include "cortolam/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "cortolam/error.hpp"

namespace cortolam {

std::string_view layer_color(LayerClass c) {
  static constexpr std::array<std::string_view, kNumClasses> palette = {
      "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a6761d", "#666666"};
  return palette[ordinal(c)];
}

std::string colormap(double t) {
  // a few viridis anchors, linearly interpolated
  static constexpr double stops[][3] = {{68, 1, 84},    {59, 82, 139},  {33, 145, 140},
                                        {94, 201, 98},  {253, 231, 37}};
  if (!(t >= 0)) t = 0;
  if (t > 1) t = 1;
  const double s = t * 4;
  const int i = std::min(3, static_cast<int>(s));
  const double f = s - i;
  char buf[8];
  int rgb[3];
  for (int k = 0; k < 3; ++k) rgb[k] = static_cast<int>(std::lround(stops[i][k] + f * (stops[i + 1][k] - stops[i][k])));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr double kMargin = 10;
constexpr double kTitle = 24;
constexpr double kLegend = 120;

}  // namespace

std::string render_svg(std::span<const NeuronRecord> neurons, std::span<const PlotPanel> panels,
                       const PlotOptions& opts) {
  if (panels.empty()) throw Error(ErrorKind::Validation, "nothing to plot: no panels");
  for (const auto& p : panels) {
    const std::size_t n = std::visit([](const auto& v) { return v.size(); }, p.colors);
    if (n != neurons.size())
      throw Error(ErrorKind::Validation, "panel '" + p.title + "' colors " + std::to_string(n) + " of " +
                                             std::to_string(neurons.size()) + " neurons");
  }
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!neurons.empty()) {
    x0 = x1 = neurons[0].x_um;
    y0 = y1 = neurons[0].y_um;
    for (const auto& n : neurons) {
      x0 = std::min(x0, n.x_um);
      x1 = std::max(x1, n.x_um);
      y0 = std::min(y0, n.y_um);
      y1 = std::max(y1, n.y_um);
    }
  }
  const double span_x = std::max(x1 - x0, 1e-9);
  const double span_y = std::max(y1 - y0, 1e-9);
  const double scale = opts.panel_width_px / std::max(span_x, span_y);
  const double map_w = span_x * scale;
  const double map_h = span_y * scale;
  const double panel_w = kMargin + map_w + kMargin + kLegend;
  const double total_w = panel_w * static_cast<double>(panels.size());
  const double total_h = kTitle + map_h + 2 * kMargin;

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(total_w) << "\" height=\"" << num(total_h)
     << "\" viewBox=\"0 0 " << num(total_w) << " " << num(total_h) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& panel = panels[p];
    const double ox = panel_w * static_cast<double>(p);
    os << "<g class=\"panel\" transform=\"translate(" << num(ox) << ",0)\">\n";
    os << "<text x=\"" << num(kMargin) << "\" y=\"16\" font-family=\"sans-serif\" font-size=\"14\">"
       << escape(panel.title) << "</text>\n";
    os << "<rect x=\"" << num(kMargin) << "\" y=\"" << num(kTitle) << "\" width=\"" << num(map_w) << "\" height=\""
       << num(map_h) << "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
    auto circle = [&](const NeuronRecord& n, std::string_view fill) {
      os << "<circle cx=\"" << num(kMargin + (n.x_um - x0) * scale) << "\" cy=\""
         << num(kTitle + (n.y_um - y0) * scale) << "\" r=\"" << num(opts.point_radius_px) << "\" fill=\"" << fill
         << "\"/>\n";
    };
    const double lx = kMargin + map_w + kMargin;
    if (const auto* classes = std::get_if<std::vector<LayerClass>>(&panel.colors)) {
      std::array<bool, kNumClasses> present{};
      for (std::size_t i = 0; i < neurons.size(); ++i) {
        present[ordinal((*classes)[i])] = true;
        circle(neurons[i], layer_color((*classes)[i]));
      }
      os << "<g class=\"legend\">\n";
      double ly = kTitle + 10;
      for (auto c : kAllLayers) {
        if (!present[ordinal(c)]) continue;
        os << "<g class=\"legend-entry\"><rect x=\"" << num(lx) << "\" y=\"" << num(ly) << "\" width=\"12\" "
           << "height=\"12\" fill=\"" << layer_color(c) << "\"/><text x=\"" << num(lx + 18) << "\" y=\""
           << num(ly + 10) << "\" font-family=\"sans-serif\" font-size=\"12\">" << layer_name(c) << "</text></g>\n";
        ly += 18;
      }
      os << "</g>\n";
    } else {
      const auto& values = std::get<std::vector<double>>(panel.colors);
      double lo = 0, hi = 0;
      if (!values.empty()) {
        lo = *std::min_element(values.begin(), values.end());
        hi = *std::max_element(values.begin(), values.end());
      }
      const double range = hi > lo ? hi - lo : 1;
      for (std::size_t i = 0; i < neurons.size(); ++i) circle(neurons[i], colormap((values[i] - lo) / range));
      const std::string id = "ramp" + std::to_string(p);
      os << "<g class=\"legend\">\n<defs><linearGradient id=\"" << id << "\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">";
      for (int s = 0; s <= 4; ++s)
        os << "<stop offset=\"" << num(s / 4.0) << "\" stop-color=\"" << colormap(s / 4.0) << "\"/>";
      os << "</linearGradient></defs>\n";
      os << "<rect x=\"" << num(lx) << "\" y=\"" << num(kTitle + 10) << "\" width=\"14\" height=\"150\" fill=\"url(#"
         << id << ")\"/>\n";
      os << "<text x=\"" << num(lx + 20) << "\" y=\"" << num(kTitle + 20)
         << "\" font-family=\"sans-serif\" font-size=\"12\">" << num(hi) << "</text>\n";
      os << "<text x=\"" << num(lx + 20) << "\" y=\"" << num(kTitle + 160)
         << "\" font-family=\"sans-serif\" font-size=\"12\">" << num(lo) << "</text>\n";
      os << "</g>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

namespace {

std::size_t id_column(const CsvDocument& doc) {
  if (auto c = doc.find_column("id")) return *c;
  if (auto c = doc.find_column("neuron_id")) return *c;
  return doc.require_column("id");
}

template <typename T, typename Read>
std::vector<T> align(std::span<const NeuronRecord> neurons, const CsvDocument& doc, Read read) {
  const std::size_t ic = id_column(doc);
  std::map<NeuronId, T> by_id;
  for (std::size_t r = 0; r < doc.size(); ++r) by_id[doc.integer(r, ic)] = read(r);
  std::vector<T> out;
  out.reserve(neurons.size());
  for (const auto& n : neurons) {
    const auto it = by_id.find(n.id);
    if (it == by_id.end())
      throw Error(ErrorKind::Reference, "neuron " + std::to_string(n.id) + " has no value in " + doc.source());
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

std::vector<LayerClass> classes_for(std::span<const NeuronRecord> neurons, const CsvDocument& doc,
                                    const std::string& column) {
  const std::size_t cc = doc.require_column(column);
  return align<LayerClass>(neurons, doc, [&](std::size_t r) {
    const auto& tok = doc.text(r, cc);
    const auto c = parse_layer(tok);
    if (!c)
      throw Error(ErrorKind::Parse,
                  doc.source() + " row " + std::to_string(r + 1) + ": unknown class token '" + tok + "'");
    return *c;
  });
}

std::vector<double> values_for(std::span<const NeuronRecord> neurons, const CsvDocument& doc,
                               const std::string& column) {
  const std::size_t cc = doc.require_column(column);
  return align<double>(neurons, doc, [&](std::size_t r) { return doc.number(r, cc); });
}

}  // namespace cortolam
