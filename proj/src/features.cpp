#include "cortolam/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "json.hpp"

#include "cortolam/error.hpp"
#include "cortolam/parallel.hpp"

namespace cortolam {

std::string_view to_string(NniMode mode) { return mode == NniMode::Members ? "members" : "central"; }

NniMode parse_nni_mode(std::string_view text) {
  text = trim(text);
  if (text == "members" || text == "prose") return NniMode::Members;
  if (text == "central" || text == "equation") return NniMode::Central;
  throw Error(ErrorKind::Config, "unknown nni_mode '" + std::string(text) + "' (expected members|central)");
}

void FeatureConfig::validate() const {
  if (k_set.empty()) throw Error(ErrorKind::Config, "K-set must not be empty");
  std::set<std::size_t> seen;
  for (auto k : k_set) {
    if (k == 0) throw Error(ErrorKind::Config, "K-set values must be positive");
    if (!seen.insert(k).second) throw Error(ErrorKind::Config, "K-set contains " + std::to_string(k) + " twice");
  }
  if (k_set.size() > 16) throw Error(ErrorKind::Config, "K-set may hold at most 16 values");
  if (slice.sectors < 2) throw Error(ErrorKind::Config, "slice sectors R must be >= 2");
  if (slice.k_slice == 0) throw Error(ErrorKind::Config, "k_slice must be positive");
  if (density_k < 3) throw Error(ErrorKind::Config, "density_k must be >= 3");
}

namespace {

struct NamedFlag {
  std::uint32_t bit;
  const char* name;
};

constexpr NamedFlag kNamedFlags[] = {
    {flag::kClamped, "k_clamped"},
    {flag::kFewNeighbors, "few_neighbors"},
    {flag::kGrayImputed, "gray_imputed"},
    {flag::kSliceUnderfilled, "slice_underfilled"},
    {flag::kNoNeighbors, "no_neighbors"},
    {flag::kSparseSplitDegenerate, "sparse_split_degenerate"},
    {flag::kDensityDegenerate, "density_degenerate"},
};

}  // namespace

std::vector<std::string> flag_tokens(std::uint32_t flags, const FeatureConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& f : kNamedFlags)
    if (flags & f.bit) out.emplace_back(f.name);
  for (std::size_t i = 0; i < cfg.k_set.size(); ++i)
    if (flags & (1u << (flag::kHullDegenerateShift + i)))
      out.push_back("hull_degenerate_k" + std::to_string(cfg.k_set[i]));
  return out;
}

std::uint32_t parse_flag_tokens(std::string_view text, const FeatureConfig& cfg) {
  std::uint32_t flags = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('|', start);
    if (end == std::string_view::npos) end = text.size();
    auto token = trim(text.substr(start, end - start));
    start = end + 1;
    if (token.empty()) continue;
    bool known = false;
    for (const auto& f : kNamedFlags)
      if (token == f.name) {
        flags |= f.bit;
        known = true;
      }
    for (std::size_t i = 0; i < cfg.k_set.size() && !known; ++i)
      if (token == "hull_degenerate_k" + std::to_string(cfg.k_set[i])) {
        flags |= 1u << (flag::kHullDegenerateShift + i);
        known = true;
      }
    if (!known) throw Error(ErrorKind::Parse, "unknown feature flag '" + std::string(token) + "'");
  }
  return flags;
}

DistanceStats distance_stats_from(std::span<const double> d) {
  DistanceStats s;
  const std::size_t n = d.size();
  if (n == 0) {
    s.degenerate = true;
    return s;
  }
  double sum = 0;
  for (double v : d) sum += v;
  s.mean = sum / static_cast<double>(n);
  if (n < 3) {
    s.degenerate = true;
    return s;
  }
  double m2 = 0, m3 = 0, m4 = 0, max_d = 0;
  for (double v : d) {
    const double c = v - s.mean;
    const double c2 = c * c;
    m2 += c2;
    m3 += c2 * c;
    m4 += c2 * c2;
    max_d = std::max(max_d, v);
  }
  const auto nn = static_cast<double>(n);
  m2 /= nn;
  m3 /= nn;
  m4 /= nn;
  // Rounding noise on an equidistant set must read as zero variance.
  const double tol = 1e-12 * std::abs(s.mean);
  if (m2 > tol * tol) {
    s.std = std::sqrt(m2);
    s.skew = m3 / (m2 * s.std);
    s.kurt = m4 / (m2 * m2) - 3.0;
  }
  if (max_d > 0) {
    std::size_t counts[kDistanceEntropyBins] = {};
    const double width = max_d / static_cast<double>(kDistanceEntropyBins);
    for (double v : d) {
      auto b = static_cast<std::size_t>(v / width);
      counts[std::min(b, kDistanceEntropyBins - 1)]++;
    }
    double h = 0;
    for (auto c : counts) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / nn;
      h -= p * std::log(p);
    }
    s.entropy = h;
  }
  return s;
}

HullFeatures hull_features_from(std::span<const Point2> members) {
  HullFeatures h;
  if (members.size() < 3) {
    h.degenerate = true;
    return h;
  }
  Hull hull;
  try {
    hull = convex_hull(members);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Degenerate) throw;
    h.degenerate = true;
    return h;
  }
  h.area_um2 = hull.area_um2;
  h.perimeter_um = hull.perimeter_um;
  const auto nnd = nearest_neighbor_distances(members);
  double sum = 0;
  for (double v : nnd) sum += v;
  const auto n = static_cast<double>(nnd.size());
  h.mean_nnd_um = sum / n;
  double var = 0;
  for (double v : nnd) var += (v - h.mean_nnd_um) * (v - h.mean_nnd_um);
  h.std_nnd_um = std::sqrt(var / n);
  return h;
}

namespace {

std::vector<Point2> neighbor_points(const SpatialIndex& index, const std::vector<Neighbor>& nb) {
  std::vector<Point2> pts;
  pts.reserve(nb.size());
  for (const auto& n : nb) pts.push_back(index.point(n.index));
  return pts;
}

std::vector<double> neighbor_distances(const std::vector<Neighbor>& nb) {
  std::vector<double> d;
  d.reserve(nb.size());
  for (const auto& n : nb) d.push_back(n.distance);
  return d;
}

constexpr double kUm2PerMm2 = 1e6;

double density_per_mm2(std::size_t k, double hull_area_um2) {
  return static_cast<double>(k) / hull_area_um2 * kUm2PerMm2;
}

double nni_value(Point2 center, std::span<const Point2> members, const HullFeatures& h, NniMode mode) {
  const auto k = static_cast<double>(members.size());
  double observed = h.mean_nnd_um;
  if (mode == NniMode::Central) {
    double sum = 0;
    for (const auto& p : members) sum += std::sqrt(squared_distance(center, p));
    observed = sum / k;
  }
  return observed / (0.5 * std::sqrt(h.area_um2 / k));
}

}  // namespace

DistanceStats distance_stats(const SpatialIndex& index, NeuronId id, std::size_t k) {
  auto res = knn(index, id, k);
  return distance_stats_from(neighbor_distances(res.neighbors));
}

HullFeatures hull_features(const SpatialIndex& index, NeuronId id, std::size_t k) {
  auto res = knn(index, id, k);
  return hull_features_from(neighbor_points(index, res.neighbors));
}

ScalarFeature local_density(const SpatialIndex& index, NeuronId id, std::size_t k) {
  auto res = knn(index, id, k);
  const auto pts = neighbor_points(index, res.neighbors);
  const auto h = hull_features_from(pts);
  if (h.degenerate) return {0.0, true};
  return {density_per_mm2(pts.size(), h.area_um2), false};
}

ScalarFeature nni_from(Point2 center, std::span<const Point2> members, NniMode mode) {
  const auto h = hull_features_from(members);
  if (h.degenerate) return {0.0, true};
  return {nni_value(center, members, h, mode), false};
}

ScalarFeature nni(const SpatialIndex& index, NeuronId id, std::size_t k, NniMode mode) {
  auto res = knn(index, id, k);
  const auto center = index.point(*index.index_of(id));
  return nni_from(center, neighbor_points(index, res.neighbors), mode);
}

std::size_t sector_of(double dx, double dy, std::size_t sectors) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double angle = std::atan2(dy, dx);
  if (angle < 0) angle += two_pi;
  const auto s = static_cast<std::size_t>(angle / (two_pi / static_cast<double>(sectors)));
  return std::min(s, sectors - 1);
}

std::vector<double> slice_partition_from(Point2 center, std::span<const Point2> neighbors, std::size_t sectors) {
  std::vector<double> p(sectors, 0.0);
  if (neighbors.empty()) return p;
  std::vector<std::size_t> counts(sectors, 0);
  for (const auto& q : neighbors) counts[sector_of(q.x - center.x, q.y - center.y, sectors)]++;
  const auto n = static_cast<double>(neighbors.size());
  for (std::size_t i = 0; i < sectors; ++i) p[i] = static_cast<double>(counts[i]) / n;
  return p;
}

std::vector<double> slice_partition(const SpatialIndex& index, NeuronId id, const SliceConfig& cfg) {
  if (cfg.sectors < 2) throw Error(ErrorKind::Config, "slice sectors R must be >= 2");
  auto res = knn(index, id, cfg.k_slice);
  const auto center = index.point(*index.index_of(id));
  return slice_partition_from(center, neighbor_points(index, res.neighbors), cfg.sectors);
}

double shannon_index(std::span<const double> p) {
  double h = 0;
  for (double v : p)
    if (v > 0) h -= v * std::log(v);
  return h;
}

double simpson_index(std::span<const double> p) {
  double s = 0;
  for (double v : p) s += v * v;
  return s;
}

std::vector<std::string> feature_schema(const FeatureConfig& cfg, bool with_region_block) {
  std::vector<std::string> s = {"area_um2", "perimeter_um", "circularity", "roundness", "gray_mean", "gray_median"};
  for (auto k : cfg.k_set) {
    const auto suffix = "_k" + std::to_string(k);
    for (const char* name : {"dist_mean", "dist_std", "dist_skew", "dist_kurt", "dist_entropy", "hull_area",
                             "hull_perimeter", "hull_mean_nnd", "hull_std_nnd", "density", "nni"})
      s.push_back(name + suffix);
  }
  const auto slice_suffix = "_k" + std::to_string(cfg.slice.k_slice) + "_R" + std::to_string(cfg.slice.sectors);
  s.push_back("shannon" + slice_suffix);
  s.push_back("simpson" + slice_suffix);
  s.push_back("slice_min_frac");
  s.push_back("slice_max_frac");
  if (with_region_block)
    for (const char* name : kRegionColumns) s.emplace_back(name);
  return s;
}

std::size_t FeatureTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < schema.size(); ++i)
    if (schema[i] == name) return i;
  throw Error(ErrorKind::Schema, "feature table has no column '" + std::string(name) + "'");
}

std::size_t FeatureTable::row_index(NeuronId id) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return i;
  throw Error(ErrorKind::Reference, "feature table has no row for id " + std::to_string(id));
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

FeatureTable assemble_features(std::span<const NeuronRecord> neurons, const SpatialIndex& index,
                               const FeatureConfig& cfg) {
  cfg.validate();
  if (index.size() != neurons.size())
    throw Error(ErrorKind::Validation, "spatial index does not match the neuron collection");

  FeatureTable t;
  t.schema = feature_schema(cfg, false);
  const std::size_t m = t.schema.size();
  const std::size_t n = neurons.size();
  t.ids.resize(n);
  t.values.assign(n * m, 0.0);
  t.flags.assign(n, 0);

  std::vector<double> gm, gd;
  for (const auto& r : neurons) {
    if (r.gray_mean) gm.push_back(*r.gray_mean);
    if (r.gray_median) gd.push_back(*r.gray_median);
  }
  const double gray_mean_fill = gm.empty() ? 0.0 : median_of(gm);
  const double gray_median_fill = gd.empty() ? 0.0 : median_of(gd);

  const std::size_t k_max = std::max(*std::max_element(cfg.k_set.begin(), cfg.k_set.end()), cfg.slice.k_slice);

  parallel_for(n, [&](std::size_t i) {
    const auto& rec = neurons[i];
    auto row = std::span<double>(t.values.data() + i * m, m);
    std::uint32_t flags = 0;
    t.ids[i] = rec.id;
    row[0] = rec.area_um2;
    row[1] = rec.perimeter_um;
    row[2] = rec.circularity;
    row[3] = rec.roundness;
    row[4] = rec.gray_mean.value_or(gray_mean_fill);
    row[5] = rec.gray_median.value_or(gray_median_fill);
    if (!rec.gray_mean || !rec.gray_median) flags |= flag::kGrayImputed;

    const auto qi = *index.index_of(rec.id);
    const Point2 center = index.point(qi);
    const std::size_t available = n - 1;
    if (available == 0) flags |= flag::kNoNeighbors;
    if (k_max > available) flags |= flag::kClamped;
    const auto nb = index.nearest(center, std::min(k_max, available), qi);
    const auto pts = neighbor_points(index, nb);
    const auto dist = neighbor_distances(nb);

    std::size_t col = kShapeBlockSize;
    for (std::size_t ki = 0; ki < cfg.k_set.size(); ++ki) {
      const std::size_t k_eff = std::min(cfg.k_set[ki], available);
      if (k_eff < 3) flags |= flag::kFewNeighbors;
      const auto stats = distance_stats_from(std::span(dist).first(k_eff));
      const auto members = std::span(pts).first(k_eff);
      const auto hull = hull_features_from(members);
      if (hull.degenerate) flags |= 1u << (flag::kHullDegenerateShift + ki);
      row[col++] = stats.mean;
      row[col++] = stats.std;
      row[col++] = stats.skew;
      row[col++] = stats.kurt;
      row[col++] = stats.entropy;
      row[col++] = hull.area_um2;
      row[col++] = hull.perimeter_um;
      row[col++] = hull.mean_nnd_um;
      row[col++] = hull.std_nnd_um;
      row[col++] = hull.degenerate ? 0.0 : density_per_mm2(k_eff, hull.area_um2);
      row[col++] = hull.degenerate ? 0.0 : nni_value(center, members, hull, cfg.nni_mode);
    }

    const std::size_t k_slice = std::min(cfg.slice.k_slice, available);
    if (k_slice < cfg.slice.sectors) flags |= flag::kSliceUnderfilled;
    const auto p = slice_partition_from(center, std::span(pts).first(k_slice), cfg.slice.sectors);
    row[col++] = shannon_index(p);
    row[col++] = simpson_index(p);
    row[col++] = k_slice ? *std::min_element(p.begin(), p.end()) : 0.0;
    row[col++] = k_slice ? *std::max_element(p.begin(), p.end()) : 0.0;

    for (auto& v : row)
      if (!std::isfinite(v)) v = 0.0;
    t.flags[i] = flags;
  });
  return t;
}

std::filesystem::path schema_sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".schema.json");
  return p;
}

std::filesystem::path flags_sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".flags.csv");
  return p;
}

void write_feature_table(const FeatureTable& table, const std::filesystem::path& path, const FeatureConfig& cfg) {
  Table out;
  out.columns.reserve(table.cols() + 1);
  out.columns.emplace_back("id");
  out.columns.insert(out.columns.end(), table.schema.begin(), table.schema.end());
  out.rows.reserve(table.rows());
  for (std::size_t i = 0; i < table.rows(); ++i) {
    std::vector<Cell> row;
    row.reserve(table.cols() + 1);
    row.emplace_back(table.ids[i]);
    for (double v : table.row(i)) row.emplace_back(v);
    out.rows.push_back(std::move(row));
  }
  write_table(out, path);
  write_text(nlohmann::json(table.schema).dump(1) + "\n", schema_sidecar_path(path));

  Table flags;
  flags.columns = {"id", "flags"};
  for (std::size_t i = 0; i < table.rows(); ++i) {
    std::string joined;
    for (const auto& tok : flag_tokens(table.flags.empty() ? 0 : table.flags[i], cfg)) {
      if (!joined.empty()) joined += '|';
      joined += tok;
    }
    flags.rows.push_back({table.ids[i], joined});
  }
  write_table(flags, flags_sidecar_path(path));
}

FeatureTable load_feature_table(const std::filesystem::path& path, const FeatureConfig& cfg) {
  const auto doc = CsvDocument::read(path);
  if (doc.header().empty() || doc.header().front() != "id")
    throw Error(ErrorKind::Schema, path.string() + ": first column must be 'id'");
  FeatureTable t;
  t.schema.assign(doc.header().begin() + 1, doc.header().end());

  const auto sidecar = schema_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    std::vector<std::string> declared;
    try {
      declared = nlohmann::json::parse(read_text(sidecar)).get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Schema, sidecar.string() + ": " + e.what());
    }
    if (declared != t.schema)
      throw Error(ErrorKind::Schema, path.string() + ": header does not match schema sidecar " + sidecar.string());
  }

  const std::size_t m = t.cols();
  t.ids.reserve(doc.size());
  t.values.reserve(doc.size() * m);
  for (std::size_t r = 0; r < doc.size(); ++r) {
    t.ids.push_back(doc.integer(r, 0));
    for (std::size_t c = 0; c < m; ++c) t.values.push_back(doc.number(r, c + 1));
  }
  t.flags.assign(t.ids.size(), 0);

  const auto flags_path = flags_sidecar_path(path);
  if (std::filesystem::exists(flags_path)) {
    const auto fdoc = CsvDocument::read(flags_path);
    const auto c_id = fdoc.require_column("id");
    const auto c_flags = fdoc.require_column("flags");
    if (fdoc.size() != t.rows())
      throw Error(ErrorKind::Schema, flags_path.string() + ": row count does not match " + path.string());
    for (std::size_t r = 0; r < fdoc.size(); ++r) {
      if (fdoc.integer(r, c_id) != t.ids[r])
        throw Error(ErrorKind::Schema, flags_path.string() + ": id order does not match " + path.string());
      t.flags[r] = parse_flag_tokens(fdoc.text(r, c_flags), cfg);
    }
  }
  return t;
}

}  // namespace cortolam
