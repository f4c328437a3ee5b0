#include "cortolam/regions.hpp"

#include <algorithm>
#include <cmath>

#include <boost/multiprecision/cpp_int.hpp>

#include "json.hpp"

#include "cortolam/error.hpp"
#include "cortolam/parallel.hpp"

namespace cortolam {

using boost::multiprecision::int256_t;

std::string_view to_string(Population p) {
  switch (p) {
    case Population::Sparse: return "sparse";
    case Population::Average: return "average";
    case Population::Dense: return "dense";
  }
  return "?";
}

std::string_view to_string(SparseKind k) {
  switch (k) {
    case SparseKind::None: return "none";
    case SparseKind::LayerI: return "layer_I";
    case SparseKind::WhiteMatter: return "white_matter";
  }
  return "?";
}

std::size_t Histogram::bin_of(double v) const {
  const auto last = counts.size() - 1;
  if (!(v > min_value)) return 0;
  const double b = std::floor((v - min_value) / bin_width);
  if (b >= static_cast<double>(last)) return last;
  return static_cast<std::size_t>(b);
}

Histogram make_histogram(std::span<const double> values, std::size_t n_bins) {
  if (values.empty()) throw Error(ErrorKind::Degenerate, "histogram of an empty value set");
  if (n_bins < 2) throw Error(ErrorKind::Config, "histogram needs at least 2 bins");
  for (double v : values)
    if (!std::isfinite(v)) throw Error(ErrorKind::Validation, "histogram input contains a non-finite value");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) throw Error(ErrorKind::Degenerate, "all values are identical; no threshold exists");
  Histogram h;
  h.min_value = *lo;
  h.bin_width = (*hi - *lo) / static_cast<double>(n_bins);
  h.counts.assign(n_bins, 0);
  for (double v : values) h.counts[h.bin_of(v)]++;
  return h;
}

namespace {

// Class moments over a bin range, in integers: count, sum of bin indices.
struct Moments {
  std::int64_t n = 0;
  std::int64_t s1 = 0;
};

// Between-class term sum(s1^2 / n) as an exact fraction num/den.
struct Fraction {
  int256_t num;
  int256_t den;
};

Fraction between_class(std::span<const Moments> classes) {
  Fraction f{0, 1};
  for (const auto& c : classes) {
    // f + s1^2/n
    const int256_t s1 = c.s1;
    f.num = f.num * c.n + s1 * s1 * f.den;
    f.den *= c.n;
  }
  return f;
}

bool greater(const Fraction& a, const Fraction& b) { return a.num * b.den > b.num * a.den; }

}  // namespace

std::vector<std::size_t> otsu_bin_thresholds(std::span<const std::int64_t> counts, std::size_t n_classes) {
  if (n_classes != 2 && n_classes != 3) throw Error(ErrorKind::Config, "Otsu supports 2 or 3 classes");
  const std::size_t nb = counts.size();
  std::size_t occupied = 0;
  for (auto c : counts) occupied += c > 0;
  if (occupied < n_classes)
    throw Error(ErrorKind::Degenerate, "need at least " + std::to_string(n_classes) +
                                           " occupied histogram bins, have " + std::to_string(occupied));

  // Prefix sums: P[i] covers bins [0, i).
  std::vector<Moments> prefix(nb + 1);
  for (std::size_t b = 0; b < nb; ++b) {
    prefix[b + 1].n = prefix[b].n + counts[b];
    prefix[b + 1].s1 = prefix[b].s1 + counts[b] * static_cast<std::int64_t>(b);
  }
  auto range = [&](std::size_t lo, std::size_t hi) {
    return Moments{prefix[hi].n - prefix[lo].n, prefix[hi].s1 - prefix[lo].s1};
  };

  // Minimising total within-class scatter equals maximising sum(s1^2/n)
  // because the total second moment is fixed.
  std::vector<std::size_t> best;
  Fraction best_value{-1, 1};
  if (n_classes == 2) {
    for (std::size_t t = 1; t < nb; ++t) {
      const Moments cls[2] = {range(0, t), range(t, nb)};
      if (cls[0].n == 0 || cls[1].n == 0) continue;
      const auto v = between_class(cls);
      if (best.empty() || greater(v, best_value)) {
        best = {t};
        best_value = v;
      }
    }
  } else {
    for (std::size_t t1 = 1; t1 + 1 < nb; ++t1) {
      const auto c0 = range(0, t1);
      if (c0.n == 0) continue;
      for (std::size_t t2 = t1 + 1; t2 < nb; ++t2) {
        const Moments cls[3] = {c0, range(t1, t2), range(t2, nb)};
        if (cls[1].n == 0 || cls[2].n == 0) continue;
        const auto v = between_class(cls);
        if (best.empty() || greater(v, best_value)) {
          best = {t1, t2};
          best_value = v;
        }
      }
    }
  }
  return best;
}

OtsuSplit otsu_thresholds(std::span<const double> values, std::size_t n_classes, std::size_t n_bins) {
  OtsuSplit split;
  split.histogram = make_histogram(values, n_bins);
  split.bin_thresholds = otsu_bin_thresholds(split.histogram.counts, n_classes);
  for (auto t : split.bin_thresholds)
    split.thresholds.push_back(split.histogram.min_value + static_cast<double>(t) * split.histogram.bin_width);
  split.assignment.reserve(values.size());
  for (double v : values) {
    const auto b = split.histogram.bin_of(v);
    int cls = 0;
    for (auto t : split.bin_thresholds) cls += b >= t;
    split.assignment.push_back(cls);
  }
  return split;
}

PopulationSplit classify_population(std::span<const double> densities) {
  PopulationSplit out;
  out.otsu = otsu_thresholds(densities, 3);
  out.tags.reserve(densities.size());
  for (int c : out.otsu.assignment) out.tags.push_back(static_cast<Population>(c));
  return out;
}

SparseSplit split_sparse(std::span<const double> hull_areas) {
  SparseSplit out;
  try {
    if (hull_areas.size() < 2) throw Error(ErrorKind::Degenerate, "fewer than two sparse neurons");
    auto otsu = otsu_thresholds(hull_areas, 2);
    out.threshold = otsu.thresholds.front();
    for (int c : otsu.assignment) out.tags.push_back(c == 0 ? SparseKind::LayerI : SparseKind::WhiteMatter);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Degenerate) throw;
    out.degenerate = true;
    out.tags.assign(hull_areas.size(), SparseKind::WhiteMatter);
  }
  return out;
}

DepthReference::DepthReference(std::vector<Point2> layer_i, std::vector<Point2> white_matter,
                               std::vector<Point2> dense) {
  if (layer_i.empty())
    throw Error(ErrorKind::Unavailable, "no neurons tagged layer I; depth and thickness are unavailable");
  if (white_matter.empty())
    throw Error(ErrorKind::Unavailable, "no neurons tagged white matter; depth and thickness are unavailable");
  layer_i_.emplace(std::move(layer_i));
  white_matter_.emplace(std::move(white_matter));
  if (!dense.empty()) dense_.emplace(std::move(dense));
}

DepthInfo DepthReference::at(Point2 p) const {
  DepthInfo d;
  d.depth_um = layer_i_->nearest(p, 1).front().distance;
  d.thickness_um = d.depth_um + white_matter_->nearest(p, 1).front().distance;
  d.depth_norm = d.thickness_um > 0 ? d.depth_um / d.thickness_um : 0.0;
  d.dist_to_dense_um = dense_ ? dense_->nearest(p, 1).front().distance : 0.0;
  return d;
}

DepthInfo depth_thickness(Point2 neuron, const DepthReference& ref) { return ref.at(neuron); }

RegionResult derive_regions(std::span<const NeuronRecord> neurons, const FeatureTable& features,
                            const FeatureConfig& cfg) {
  if (features.rows() != neurons.size())
    throw Error(ErrorKind::Schema, "feature table rows do not match the neuron collection");
  for (std::size_t i = 0; i < neurons.size(); ++i)
    if (features.ids[i] != neurons[i].id)
      throw Error(ErrorKind::Schema, "feature table id order does not match the neuron collection");

  const auto suffix = "_k" + std::to_string(cfg.density_k);
  const auto c_density = features.column_index("density" + suffix);
  const auto c_hull = features.column_index("hull_area" + suffix);
  const std::size_t n = neurons.size();

  std::vector<double> density(n);
  for (std::size_t i = 0; i < n; ++i) density[i] = features.at(i, c_density);

  RegionResult res;
  auto pop = classify_population(density);
  res.density_split = pop.otsu;

  std::vector<std::size_t> sparse_rows;
  std::vector<double> sparse_areas;
  for (std::size_t i = 0; i < n; ++i)
    if (pop.tags[i] == Population::Sparse) {
      sparse_rows.push_back(i);
      sparse_areas.push_back(features.at(i, c_hull));
    }
  auto sparse = split_sparse(sparse_areas);
  res.sparse_split_degenerate = sparse.degenerate;
  res.hull_area_threshold = sparse.threshold;
  if (sparse.degenerate)
    res.warnings.emplace_back("sparse neurons could not be split by hull area; all tagged white matter");

  try {
    std::vector<double> areas(n);
    for (std::size_t i = 0; i < n; ++i) areas[i] = neurons[i].area_um2;
    res.size_split = otsu_thresholds(areas, 2);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Degenerate) throw;
    res.warnings.push_back(std::string("size split unavailable: ") + e.what());
  }

  res.tags.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.tags[i].id = neurons[i].id;
    res.tags[i].population = pop.tags[i];
  }
  for (std::size_t j = 0; j < sparse_rows.size(); ++j) res.tags[sparse_rows[j]].sparse_kind = sparse.tags[j];

  std::vector<Point2> layer_i, wm, dense;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p{neurons[i].x_um, neurons[i].y_um};
    if (res.tags[i].sparse_kind == SparseKind::LayerI) layer_i.push_back(p);
    if (res.tags[i].sparse_kind == SparseKind::WhiteMatter) wm.push_back(p);
    if (res.tags[i].population == Population::Dense) dense.push_back(p);
  }
  const DepthReference ref(std::move(layer_i), std::move(wm), std::move(dense));
  parallel_for(n, [&](std::size_t i) { res.tags[i].depth = ref.at({neurons[i].x_um, neurons[i].y_um}); });
  return res;
}

FeatureTable append_region_block(const FeatureTable& base, const RegionResult& regions) {
  if (regions.tags.size() != base.rows())
    throw Error(ErrorKind::Schema, "region tags do not match the feature table");
  for (const char* name : kRegionColumns)
    if (std::find(base.schema.begin(), base.schema.end(), name) != base.schema.end())
      throw Error(ErrorKind::Schema, std::string("feature table already has column '") + name + "'");
  FeatureTable t;
  t.schema = base.schema;
  for (const char* name : kRegionColumns) t.schema.emplace_back(name);
  t.ids = base.ids;
  t.flags = base.flags;
  if (t.flags.size() != t.ids.size()) t.flags.assign(t.ids.size(), 0);
  const std::size_t m = t.cols();
  t.values.reserve(base.rows() * m);
  for (std::size_t i = 0; i < base.rows(); ++i) {
    const auto& tag = regions.tags[i];
    if (tag.id != base.ids[i]) throw Error(ErrorKind::Schema, "region tag order does not match the feature table");
    const auto row = base.row(i);
    t.values.insert(t.values.end(), row.begin(), row.end());
    t.values.push_back(tag.population == Population::Sparse ? 1.0 : 0.0);
    t.values.push_back(tag.population == Population::Dense ? 1.0 : 0.0);
    t.values.push_back(tag.depth.depth_um);
    t.values.push_back(tag.depth.thickness_um);
    t.values.push_back(tag.depth.depth_norm);
    t.values.push_back(tag.depth.dist_to_dense_um);
    if (regions.sparse_split_degenerate) t.flags[i] |= flag::kSparseSplitDegenerate;
  }
  return t;
}

Table regions_table(const RegionResult& regions) {
  Table t;
  t.columns = {"id", "population", "sparse_kind", "depth_um", "thickness_um", "depth_norm", "dist_to_dense_um"};
  t.rows.reserve(regions.tags.size());
  for (const auto& tag : regions.tags)
    t.rows.push_back({tag.id, std::string(to_string(tag.population)), std::string(to_string(tag.sparse_kind)),
                      tag.depth.depth_um, tag.depth.thickness_um, tag.depth.depth_norm, tag.depth.dist_to_dense_um});
  return t;
}

std::string regions_summary_json(const RegionResult& regions) {
  using nlohmann::json;
  std::size_t counts[3] = {}, kinds[3] = {};
  for (const auto& t : regions.tags) {
    counts[static_cast<int>(t.population)]++;
    kinds[static_cast<int>(t.sparse_kind)]++;
  }
  json j;
  j["density_thresholds_per_mm2"] = regions.density_split.thresholds;
  j["population_counts"] = {{"sparse", counts[0]}, {"average", counts[1]}, {"dense", counts[2]}};
  j["sparse_kind_counts"] = {{"layer_I", kinds[1]}, {"white_matter", kinds[2]}};
  j["hull_area_threshold_um2"] = regions.hull_area_threshold ? json(*regions.hull_area_threshold) : json(nullptr);
  j["sparse_split_degenerate"] = regions.sparse_split_degenerate;
  if (regions.size_split) {
    std::size_t small = 0, large = 0;
    for (int c : regions.size_split->assignment) (c == 0 ? small : large)++;
    j["size_split"] = {{"threshold_um2", regions.size_split->thresholds.front()},
                       {"smaller", small},
                       {"larger", large}};
  } else {
    j["size_split"] = nullptr;
  }
  j["warnings"] = regions.warnings;
  return j.dump(2) + "\n";
}

}  // namespace cortolam
