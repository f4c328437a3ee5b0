#include "cortolam/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "cortolam/error.hpp"

namespace cortolam {

std::string_view layer_name(LayerClass c) {
  static constexpr std::string_view names[] = {"I", "II", "III", "IV", "V", "VI", "WM"};
  return names[ordinal(c)];
}

std::optional<LayerClass> parse_layer(std::string_view token) {
  token = trim(token);
  std::string upper(token);
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (auto c : kAllLayers)
    if (upper == layer_name(c)) return c;
  return std::nullopt;
}

std::optional<LayerClass> LabelSet::find(NeuronId id) const {
  auto it = labels.find(id);
  if (it == labels.end()) return std::nullopt;
  return it->second;
}

namespace {

std::string row_prefix(std::size_t row) {
  return row ? "row " + std::to_string(row) + ": " : std::string();
}

}  // namespace

void validate_neuron(const NeuronRecord& n, std::size_t row) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::Validation, row_prefix(row) + "neuron " + std::to_string(n.id) + ": " + what);
  };
  if (!std::isfinite(n.x_um) || !std::isfinite(n.y_um)) fail("non-finite position");
  if (!(n.area_um2 > 0) || !std::isfinite(n.area_um2)) fail("area_um2 must be > 0");
  if (!(n.perimeter_um > 0) || !std::isfinite(n.perimeter_um)) fail("perimeter_um must be > 0");
  if (!(n.circularity >= 0 && n.circularity <= 1)) fail("circularity must lie in [0,1]");
  if (!(n.roundness >= 0 && n.roundness <= 1)) fail("roundness must lie in [0,1]");
  if (n.gray_mean && !(*n.gray_mean >= 0 && *n.gray_mean <= 255)) fail("gray_mean must lie in [0,255]");
  if (n.gray_median && !(*n.gray_median >= 0 && *n.gray_median <= 255))
    fail("gray_median must lie in [0,255]");
}

std::vector<NeuronRecord> parse_neurons(const CsvDocument& doc, std::optional<double> resolution) {
  if (resolution && !(*resolution > 0 && std::isfinite(*resolution)))
    throw Error(ErrorKind::Config, "resolution must be a positive number");

  const auto c_id = doc.require_column("id");
  const auto c_x = doc.require_column("x_um");
  const auto c_y = doc.require_column("y_um");
  const auto c_area = doc.require_column("area_um2");
  const auto c_perim = doc.require_column("perimeter_um");
  const auto c_circ = doc.require_column("circularity");
  const auto c_round = doc.require_column("roundness");
  const auto c_gmean = doc.find_column("gray_mean");
  const auto c_gmed = doc.find_column("gray_median");

  auto optional_number = [&](std::size_t r, std::optional<std::size_t> c) -> std::optional<double> {
    if (!c || trim(doc.text(r, *c)).empty()) return std::nullopt;
    return doc.number(r, *c);
  };

  std::vector<NeuronRecord> out;
  out.reserve(doc.size());
  std::unordered_set<NeuronId> seen;
  seen.reserve(doc.size() * 2);
  for (std::size_t r = 0; r < doc.size(); ++r) {
    NeuronRecord n;
    n.id = doc.integer(r, c_id);
    n.x_um = doc.number(r, c_x);
    n.y_um = doc.number(r, c_y);
    n.area_um2 = doc.number(r, c_area);
    n.perimeter_um = doc.number(r, c_perim);
    n.circularity = doc.number(r, c_circ);
    n.roundness = doc.number(r, c_round);
    n.gray_mean = optional_number(r, c_gmean);
    n.gray_median = optional_number(r, c_gmed);
    if (resolution) {
      const double s = *resolution;
      n.x_um *= s;
      n.y_um *= s;
      n.perimeter_um *= s;
      n.area_um2 *= s * s;
    }
    validate_neuron(n, r + 1);
    if (!seen.insert(n.id).second)
      throw Error(ErrorKind::Validation,
                  doc.source() + ": row " + std::to_string(r + 1) + ": duplicate id " + std::to_string(n.id));
    out.push_back(n);
  }
  return out;
}

std::vector<NeuronRecord> load_neurons(const std::filesystem::path& path, std::optional<double> resolution) {
  return parse_neurons(CsvDocument::read(path), resolution);
}

LabelSet parse_labels(const CsvDocument& doc, const std::string& rater_id,
                      std::span<const NeuronRecord> neurons) {
  const auto c_id = doc.require_column("neuron_id");
  const auto c_layer = doc.require_column("layer");
  std::unordered_set<NeuronId> known;
  known.reserve(neurons.size() * 2);
  for (const auto& n : neurons) known.insert(n.id);

  LabelSet set;
  set.rater_id = rater_id;
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const NeuronId id = doc.integer(r, c_id);
    auto layer = parse_layer(doc.text(r, c_layer));
    if (!layer)
      throw Error(ErrorKind::Parse, doc.source() + ": row " + std::to_string(r + 1) + ": unknown layer token '" +
                                        doc.text(r, c_layer) + "'");
    if (!known.count(id))
      throw Error(ErrorKind::Reference,
                  doc.source() + ": row " + std::to_string(r + 1) + ": no neuron with id " + std::to_string(id));
    if (!set.labels.emplace(id, *layer).second)
      throw Error(ErrorKind::Validation,
                  doc.source() + ": row " + std::to_string(r + 1) + ": duplicate label for id " + std::to_string(id));
  }
  return set;
}

LabelSet load_labels(const std::filesystem::path& path, const std::string& rater_id,
                     std::span<const NeuronRecord> neurons) {
  return parse_labels(CsvDocument::read(path), rater_id, neurons);
}

Table neurons_table(std::span<const NeuronRecord> neurons) {
  Table t;
  t.columns.assign(std::begin(kNeuronColumns), std::end(kNeuronColumns));
  t.rows.reserve(neurons.size());
  for (const auto& n : neurons) {
    std::vector<Cell> row{n.id, n.x_um, n.y_um, n.area_um2, n.perimeter_um, n.circularity, n.roundness};
    row.emplace_back(n.gray_mean ? Cell(*n.gray_mean) : Cell(std::string()));
    row.emplace_back(n.gray_median ? Cell(*n.gray_median) : Cell(std::string()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table labels_table(const LabelSet& labels) {
  Table t;
  t.columns = {"neuron_id", "layer"};
  for (const auto& [id, layer] : labels.labels) t.rows.push_back({id, std::string(layer_name(layer))});
  return t;
}

void write_neurons(std::span<const NeuronRecord> neurons, const std::filesystem::path& path) {
  write_table(neurons_table(neurons), path);
}

void write_labels(const LabelSet& labels, const std::filesystem::path& path) {
  write_table(labels_table(labels), path);
}

}  // namespace cortolam
