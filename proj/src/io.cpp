#include "fdsel/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "fdsel/error.hpp"

namespace fdsel {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "na"; }

double parse_number(const std::string& s, std::size_t line) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    if (s == "inf" || s == "Inf" || s == "+inf") return INFINITY;
    if (s == "-inf" || s == "-Inf") return -INFINITY;
    if (s == "nan" || s == "NaN") return NAN;
    fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
  return v;
}

struct LongRow {
  std::string curve;
  std::string group;
  double t;
  std::string value;
  long order;
  std::string smoothed;
};

struct Columns {
  int curve = -1, group = -1, t = -1, value = -1, order = -1, smoothed = -1;
};

std::vector<LongRow> read_rows(std::istream& is, bool need_smoothed) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  if (lineno == 0 || line.find_first_not_of(" \t\r") == std::string::npos)
    fail(ErrorCode::ParseError, "empty input: header row required");
  const auto header = split_row(line);
  Columns c;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto& h = header[i];
    if (h == "curve_id") c.curve = int(i);
    else if (h == "group") c.group = int(i);
    else if (h == "t") c.t = int(i);
    else if (h == "value") c.value = int(i);
    else if (h == "order") c.order = int(i);
    else if (h == "smoothed_value") c.smoothed = int(i);
  }
  if (c.curve < 0 || c.group < 0 || c.t < 0 || c.value < 0)
    fail(ErrorCode::ParseError, "header must name curve_id, group, t and value");
  if (need_smoothed && (c.order < 0 || c.smoothed < 0))
    fail(ErrorCode::ParseError, "smoothed input needs order and smoothed_value columns");
  const int width = std::max({c.curve, c.group, c.t, c.value, c.order, c.smoothed}) + 1;

  std::vector<LongRow> rows;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_row(line);
    if (int(f.size()) < width)
      fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": too few fields");
    LongRow r;
    r.curve = f[c.curve];
    r.group = f[c.group];
    if (r.curve.empty() || r.group.empty())
      fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": empty curve_id or group");
    r.t = parse_number(f[c.t], lineno);
    if (!std::isfinite(r.t))
      fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": t must be finite");
    r.value = f[c.value];
    r.order = 0;
    if (c.order >= 0) {
      const double o = parse_number(f[c.order], lineno);
      if (!(o >= 0) || o != std::floor(o))
        fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": bad order");
      r.order = long(o);
    }
    if (c.smoothed >= 0) r.smoothed = f[c.smoothed];
    rows.push_back(std::move(r));
  }
  return rows;
}

struct Layout {
  std::vector<double> grid;
  std::vector<std::string> curves;
  std::vector<std::string> groups;  // per curve
  std::unordered_map<std::string, std::size_t> curve_index;
  std::size_t index_of(double t) const {
    return std::size_t(std::lower_bound(grid.begin(), grid.end(), t) - grid.begin());
  }
};

Layout layout_of(const std::vector<LongRow>& rows) {
  Layout L;
  for (const auto& r : rows) {
    L.grid.push_back(r.t);
    auto [it, inserted] = L.curve_index.emplace(r.curve, L.curves.size());
    if (inserted) {
      L.curves.push_back(r.curve);
      L.groups.push_back(r.group);
    } else if (L.groups[it->second] != r.group) {
      fail(ErrorCode::ParseError, "curve " + r.curve + " appears in two groups");
    }
  }
  std::sort(L.grid.begin(), L.grid.end());
  L.grid.erase(std::unique(L.grid.begin(), L.grid.end()), L.grid.end());
  if (L.grid.size() < 3) fail(ErrorCode::InvalidGrid, "fewer than 3 distinct t values");
  return L;
}

GroupedDataset build_dataset(const std::vector<LongRow>& rows) {
  std::vector<LongRow> base;
  for (const auto& r : rows)
    if (r.order == 0) base.push_back(r);
  if (base.empty()) fail(ErrorCode::ParseError, "no data rows");
  const Layout L = layout_of(base);
  const std::size_t m = L.grid.size();
  std::vector<GriddedCurve> curves(L.curves.size());
  for (std::size_t i = 0; i < curves.size(); ++i) {
    curves[i].curve_id = L.curves[i];
    curves[i].group_id = L.groups[i];
    curves[i].values.assign(m, NAN);
    curves[i].mask.assign(m, 0);
  }
  for (const auto& r : base) {
    auto& cv = curves[L.curve_index.at(r.curve)];
    const std::size_t j = L.index_of(r.t);
    if (cv.mask[j] || !std::isnan(cv.values[j]))
      fail(ErrorCode::ParseError, "duplicate row for curve " + r.curve + " at t=" + fmt(r.t));
    if (is_missing(r.value)) {
      cv.values[j] = 0.0;  // marks the slot as seen; stays unobserved
      continue;
    }
    cv.values[j] = parse_number(r.value, 0);
    cv.mask[j] = 1;
  }
  for (auto& cv : curves)
    for (std::size_t j = 0; j < m; ++j)
      if (!cv.mask[j]) cv.values[j] = NAN;
  return GroupedDataset(Grid(L.grid), std::move(curves));
}

template <class T>
void read_field(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <class F>
auto config_guard(F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
}

Json indices_json(const std::vector<std::size_t>& idx) { return Json(idx); }

}  // namespace

GroupedDataset read_long_csv(std::istream& is) { return build_dataset(read_rows(is, false)); }

GroupedDataset read_long_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  return read_long_csv(in);
}

void write_long_csv(std::ostream& os, const GroupedDataset& data) {
  os << "curve_id,group,t,value\n";
  const auto& grid = data.grid();
  for (const auto& c : data.curves())
    for (std::size_t j = 0; j < grid.size(); ++j)
      if (c.mask[j])
        os << c.curve_id << ',' << c.group_id << ',' << fmt(grid[j]) << ',' << fmt(c.values[j])
           << '\n';
}

void write_smoothed_csv(std::ostream& os, const GroupedDataset& data, const SmoothedSample& s) {
  os << "curve_id,group,t,value,order,smoothed_value\n";
  const auto& grid = data.grid();
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto& c = data.curves()[i];
    for (std::size_t l = 0; l < s.orders.size(); ++l) {
      const auto& o = s.orders[l];
      for (std::size_t j = 0; j < grid.size(); ++j) {
        if (!c.mask[j]) continue;
        os << c.curve_id << ',' << c.group_id << ',' << fmt(grid[j]) << ',' << fmt(c.values[j])
           << ',' << l << ',' << (o.masks[i][j] ? fmt(o.values[i][j]) : std::string("NA"))
           << '\n';
      }
    }
  }
}

SmoothedSample read_smoothed_csv(std::istream& is) {
  const auto rows = read_rows(is, true);
  const GroupedDataset data = build_dataset(rows);
  long max_order = 0;
  for (const auto& r : rows) max_order = std::max(max_order, r.order);
  const std::size_t m = data.m();
  SmoothedSample s{data.grid(), data.groups(), data.labels(), {}, {}, {}, {}, {}};
  for (const auto& c : data.curves()) s.curve_ids.push_back(c.curve_id);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < s.curve_ids.size(); ++i) index[s.curve_ids[i]] = i;
  s.orders.resize(std::size_t(max_order) + 1);
  for (auto& o : s.orders) {
    o.values.assign(data.n(), std::vector<double>(m, NAN));
    o.masks.assign(data.n(), Mask(m, 0));
  }
  const auto& pts = data.grid().points();
  for (const auto& r : rows) {
    if (is_missing(r.smoothed)) continue;
    auto& o = s.orders[std::size_t(r.order)];
    const std::size_t i = index.at(r.curve);
    const std::size_t j = std::size_t(std::lower_bound(pts.begin(), pts.end(), r.t) - pts.begin());
    if (o.masks[i][j]) fail(ErrorCode::ParseError, "duplicate smoothed row for " + r.curve);
    o.values[i][j] = parse_number(r.smoothed, 0);
    if (!std::isfinite(o.values[i][j]))
      fail(ErrorCode::NonFiniteValue, "non-finite smoothed value for " + r.curve);
    o.masks[i][j] = 1;
  }
  s.bandwidths.assign(data.n(), NAN);
  for (std::size_t l = 0; l < s.orders.size(); ++l) s.degrees.push_back(int(l) + 1);
  return s;
}

SmoothedSample read_smoothed_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  return read_smoothed_csv(in);
}

Json dataset_metadata(const GroupedDataset& data) {
  Json j;
  j["n"] = data.n();
  j["m"] = data.m();
  j["k"] = data.k();
  j["groups"] = data.groups();
  j["group_sizes"] = data.group_sizes();
  j["grid"] = {{"a", data.grid().a()}, {"b", data.grid().b()}, {"points", data.grid().points()}};
  j["validated"] = data.validated();
  j["coverage"] = data.coverage();
  j["warnings"] = data.warnings();
  return j;
}

Json to_json(const ScenarioConfig& c) {
  return {{"n", c.n},
          {"m", c.m},
          {"sigma_e", c.sigma_e},
          {"phi", c.phi},
          {"scenario", to_string(c.scenario)},
          {"sampling", to_string(c.sampling)},
          {"d", c.d},
          {"f", c.f},
          {"p", c.p},
          {"outlier_fraction", c.outlier_fraction},
          {"outliers_per_group", c.outliers_per_group},
          {"shape",
           {{"preset", c.shape.preset},
            {"c1", c.shape.c1},
            {"amplitude", c.shape.amplitude},
            {"ramp_width", c.shape.ramp_width}}},
          {"seed", c.seed}};
}

ScenarioConfig scenario_from_json(const Json& j) {
  return config_guard([&] {
    ScenarioConfig c;
    read_field(j, "n", c.n);
    read_field(j, "m", c.m);
    read_field(j, "sigma_e", c.sigma_e);
    read_field(j, "phi", c.phi);
    if (j.contains("scenario")) c.scenario = parse_scenario(j.at("scenario").get<std::string>());
    if (j.contains("sampling")) c.sampling = parse_sampling(j.at("sampling").get<std::string>());
    read_field(j, "d", c.d);
    read_field(j, "f", c.f);
    read_field(j, "p", c.p);
    read_field(j, "outlier_fraction", c.outlier_fraction);
    read_field(j, "outliers_per_group", c.outliers_per_group);
    if (j.contains("shape")) {
      const auto& s = j.at("shape");
      read_field(s, "preset", c.shape.preset);
      read_field(s, "c1", c.shape.c1);
      read_field(s, "amplitude", c.shape.amplitude);
      read_field(s, "ramp_width", c.shape.ramp_width);
    }
    read_field(j, "c1", c.shape.c1);
    read_field(j, "seed", c.seed);
    c.validate();
    return c;
  });
}

Json to_json(const GroundTruth& t, const ScenarioConfig& c) {
  return {{"grid", t.grid},
          {"mu1", t.mu1},
          {"mu2", t.mu2},
          {"equal_set", indices_json(t.equal_set)},
          {"separable_set", indices_json(t.separable_set)},
          {"config", to_json(c)}};
}

Json to_json(const MEstimatorConfig& c) {
  return {{"delta", c.delta},
          {"knot_candidates", c.knot_candidates},
          {"lambda_grid", c.lambda_grid},
          {"degree", c.degree},
          {"penalty_order", c.penalty_order},
          {"penalty", c.penalty == PenaltyKind::Difference ? "difference" : "derivative"},
          {"max_iterations", c.max_iterations},
          {"tolerance", c.tolerance},
          {"cv_folds", c.cv_folds}};
}

void update_from_json(MEstimatorConfig& c, const Json& j) {
  config_guard([&] {
    read_field(j, "delta", c.delta);
    read_field(j, "knot_candidates", c.knot_candidates);
    read_field(j, "lambda_grid", c.lambda_grid);
    read_field(j, "degree", c.degree);
    read_field(j, "penalty_order", c.penalty_order);
    if (j.contains("penalty")) {
      const auto p = j.at("penalty").get<std::string>();
      if (p == "difference") c.penalty = PenaltyKind::Difference;
      else if (p == "derivative") c.penalty = PenaltyKind::DerivativeGram;
      else fail(ErrorCode::InvalidConfig, "unknown penalty '" + p + "'");
    }
    read_field(j, "max_iterations", c.max_iterations);
    read_field(j, "tolerance", c.tolerance);
    read_field(j, "cv_folds", c.cv_folds);
    return 0;
  });
}

Json to_json(const PresmoothOptions& c) {
  return {{"L", c.max_order},
          {"candidate_count", c.candidate_count},
          {"derivative_inflation", c.derivative_inflation},
          {"global_bandwidth", c.global_bandwidth}};
}

void update_from_json(PresmoothOptions& c, const Json& j) {
  config_guard([&] {
    read_field(j, "L", c.max_order);
    read_field(j, "candidate_count", c.candidate_count);
    read_field(j, "derivative_inflation", c.derivative_inflation);
    read_field(j, "global_bandwidth", c.global_bandwidth);
    return 0;
  });
}

Json to_json(const IwtConfig& c) {
  return {{"B", c.B},
          {"alpha", c.alpha},
          {"correction", to_string(c.correction)},
          {"seed", c.seed},
          {"unadjusted_width", c.unadjusted_width},
          {"include_complements", c.include_complements}};
}

void update_from_json(IwtConfig& c, const Json& j) {
  config_guard([&] {
    read_field(j, "B", c.B);
    read_field(j, "alpha", c.alpha);
    if (j.contains("correction")) c.correction = parse_correction(j.at("correction").get<std::string>());
    read_field(j, "seed", c.seed);
    read_field(j, "unadjusted_width", c.unadjusted_width);
    read_field(j, "include_complements", c.include_complements);
    return 0;
  });
}

Json to_json(const AnalysisConfig& c) {
  return {{"presmooth", to_json(c.presmooth)},
          {"mestimator", to_json(c.mestimator)},
          {"iwt", to_json(c.iwt)},
          {"effect_sizes", c.effect_sizes},
          {"R", c.R},
          {"validation",
           {{"allow_scattered_masks", c.validation.allow_scattered_masks},
            {"low_coverage_threshold", c.validation.low_coverage_threshold}}}};
}

void update_from_json(AnalysisConfig& c, const Json& j) {
  if (j.contains("presmooth")) update_from_json(c.presmooth, j.at("presmooth"));
  if (j.contains("mestimator")) update_from_json(c.mestimator, j.at("mestimator"));
  if (j.contains("iwt")) update_from_json(c.iwt, j.at("iwt"));
  config_guard([&] {
    read_field(j, "effect_sizes", c.effect_sizes);
    read_field(j, "R", c.R);
    if (j.contains("validation")) {
      const auto& v = j.at("validation");
      read_field(v, "allow_scattered_masks", c.validation.allow_scattered_masks);
      read_field(v, "low_coverage_threshold", c.validation.low_coverage_threshold);
    }
    return 0;
  });
}

Json fits_to_json(const SmoothedSample& s, const SampleFits& fits, const MEstimatorConfig& c) {
  Json out;
  out["grid"] = s.grid.points();
  out["groups"] = s.groups;
  out["L"] = fits.fits.size() - 1;
  out["config"] = to_json(c);
  Json entries = Json::array();
  for (std::size_t l = 0; l < fits.fits.size(); ++l) {
    for (std::size_t g = 0; g < fits.fits[l].size(); ++g) {
      const GroupFit& f = fits.fits[l][g];
      entries.push_back({{"order", l},
                         {"group", s.groups[g]},
                         {"knot_count", f.knot_count},
                         {"interior_knots", f.interior_knots},
                         {"lambda", f.lambda},
                         {"lambda_effective", f.lambda_effective},
                         {"coefficients", f.coefficients},
                         {"fitted", f.fitted},
                         {"diagnostics",
                          {{"iterations", f.iterations},
                           {"converged", f.converged},
                           {"initial_objective", f.initial_objective},
                           {"objective", f.objective},
                           {"max_objective_increase", f.max_objective_increase},
                           {"edf", f.edf},
                           {"wrss", f.wrss},
                           {"cells", f.cells},
                           {"gcv", f.gcv}}}});
    }
  }
  out["fits"] = std::move(entries);
  return out;
}

std::vector<std::vector<Tuning>> tuning_from_json(const Json& j, const SmoothedSample& s) {
  return config_guard([&] {
    const std::size_t k = s.groups.size();
    std::vector<std::vector<Tuning>> tuning;
    std::vector<std::vector<std::uint8_t>> seen;
    for (const auto& e : j.at("fits")) {
      const std::size_t l = e.at("order").get<std::size_t>();
      const auto name = e.at("group").get<std::string>();
      const auto it = std::find(s.groups.begin(), s.groups.end(), name);
      if (it == s.groups.end()) fail(ErrorCode::InvalidConfig, "fits.json names unknown group " + name);
      if (l >= tuning.size()) {
        tuning.resize(l + 1, std::vector<Tuning>(k));
        seen.resize(l + 1, std::vector<std::uint8_t>(k, 0));
      }
      const std::size_t g = std::size_t(it - s.groups.begin());
      tuning[l][g] = {e.at("knot_count").get<std::size_t>(), e.at("lambda").get<double>()};
      seen[l][g] = 1;
    }
    for (const auto& row : seen)
      for (auto v : row)
        if (!v) fail(ErrorCode::InvalidConfig, "fits.json misses a (group, order) entry");
    if (tuning.empty()) fail(ErrorCode::InvalidConfig, "fits.json holds no fits");
    return tuning;
  });
}

Json report_to_json(const SmoothedSample& s, const IwtResult& r, const IwtConfig& c) {
  Json out;
  out["grid"] = s.grid.points();
  out["groups"] = s.groups;
  out["group_sizes"] = [&] {
    std::vector<std::size_t> sizes(s.groups.size(), 0);
    for (auto g : s.labels) ++sizes[g];
    return sizes;
  }();
  out["config"] = to_json(c);
  Json pv = Json::array();
  for (std::size_t l = 0; l < r.pvalues.size(); ++l)
    pv.push_back({{"order", l},
                  {"B", r.pvalues[l].B},
                  {"unadjusted", r.pvalues[l].unadjusted},
                  {"adjusted", r.pvalues[l].adjusted}});
  out["pvalues"] = std::move(pv);
  const auto& sel = r.selection;
  Json intervals = Json::array();
  for (const auto& iv : sel.intervals)
    intervals.push_back({{"lower", iv.lower}, {"upper", iv.upper}, {"first", iv.first}, {"last", iv.last}});
  out["selection"] = {{"alpha", sel.alpha},
                      {"correction", to_string(sel.method)},
                      {"alpha_star", sel.alpha_star},
                      {"selected_by_order", sel.selected_by_order},
                      {"selected", sel.selected},
                      {"intervals", std::move(intervals)}};
  out["warnings"] = r.warnings;
  return out;
}

Json esmap_to_json(const SmoothedSample& s, const EffectSizeResult& r, std::size_t R,
                   std::uint64_t seed) {
  Json out;
  out["grid"] = s.grid.points();
  out["groups"] = s.groups;
  out["R"] = R;
  out["seed"] = seed;
  Json orders = Json::array();
  for (std::size_t l = 0; l < r.orders.size(); ++l) {
    const auto& o = r.orders[l];
    orders.push_back({{"order", l},
                      {"fsnr2", o.fsnr2},
                      {"xi2", o.variance.xi2},
                      {"ladder", o.map.ladder},
                      {"matrix", o.map.values},
                      {"triangle", o.map.triangle}});
  }
  out["orders"] = std::move(orders);
  out["warnings"] = r.warnings;
  return out;
}

void write_esmap_csv(std::ostream& os, const EffectSizeMap& map, const Grid& grid) {
  os << "delta";
  for (std::size_t j = 0; j < grid.size(); ++j) os << ",t=" << fmt(grid[j]);
  os << '\n';
  for (std::size_t r = 0; r < map.ladder.size(); ++r) {
    os << fmt(map.ladder[r]);
    for (double v : map.values[r]) os << ',' << fmt(v);
    os << '\n';
  }
}

ExperimentDesign design_from_json(const Json& j, AnalysisConfig* analysis) {
  ExperimentDesign d;
  config_guard([&] {
    read_field(j, "replicates", d.replicates);
    read_field(j, "base_seed", d.base_seed);
    for (const auto& cell : j.at("cells")) {
      DesignCell c;
      c.name = cell.at("name").get<std::string>();
      c.scenario = scenario_from_json(cell.contains("scenario") ? cell.at("scenario") : Json::object());
      d.cells.push_back(std::move(c));
    }
    return 0;
  });
  if (d.cells.empty()) fail(ErrorCode::InvalidConfig, "design has no cells");
  if (analysis && j.contains("analysis")) update_from_json(*analysis, j.at("analysis"));
  return d;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

}  // namespace fdsel
