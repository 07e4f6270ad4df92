#include "aperiodic/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace aperiodic {

namespace {

constexpr const char* kTowerFormat = "aperiodic-tower";
constexpr int kTowerVersion = 1;

Json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double get_num(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw FormatError("expected a number, got " + j.dump());
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) throw FormatError(std::string("expected an object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(std::string("missing field '") + key + "'");
  return *it;
}

double get_num(const Json& j, const char* key) { return get_num(field(j, key)); }

Json vec(const Vecd& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

Vecd get_vec(const Json& j, int dim = -1) {
  if (!j.is_array()) throw FormatError("expected an array, got " + j.dump());
  if (dim >= 0 && static_cast<int>(j.size()) != dim)
    throw FormatError("vector of length " + std::to_string(j.size()) + " where " + std::to_string(dim) +
                      " was expected");
  Vecd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = get_num(j[i]);
  return v;
}

// rows, each an array
Json mat(const Matd& a) {
  Json rows = Json::array();
  for (int r = 0; r < a.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < a.cols(); ++c) row.push_back(num(a(r, c)));
    rows.push_back(row);
  }
  return rows;
}

Matd get_mat(const Json& j, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) throw FormatError("matrix needs " + std::to_string(dim) + " rows");
  Matd a(dim, dim);
  for (int r = 0; r < dim; ++r) {
    Vecd row = get_vec(j[static_cast<std::size_t>(r)], dim);
    a.row(r) = row.transpose();
  }
  return a;
}

Json disk(const Disk& d) {
  Json j;
  j["center"] = vec(d.center);
  j["radius"] = num(d.radius);
  j["frame"] = mat(d.frame);
  return j;
}

Disk get_disk(const Json& j, int dim) {
  Disk d;
  d.center = get_vec(field(j, "center"), dim);
  d.radius = get_num(j, "radius");
  d.frame = get_mat(field(j, "frame"), dim);
  return d;
}

Json layout(const TowerLayout& L) {
  Json j;
  j["insert"] = L.insert;
  j["twist_in"] = {L.twist_in0, L.twist_in1};
  j["ring"] = L.ring;
  j["twist_out"] = {L.twist_out0, L.twist_out1};
  j["shell0"] = L.shell0;
  j["shell_eps"] = L.shell_eps;
  j["repel_u"] = L.repel_u;
  j["attract_u"] = L.attract_u;
  j["child_cap"] = L.child_cap;
  j["stage1_circle"] = L.stage1_circle;
  return j;
}

TowerLayout get_layout(const Json& j) {
  TowerLayout L;
  L.insert = get_num(j, "insert");
  auto ti = get_vec(field(j, "twist_in"), 2), to = get_vec(field(j, "twist_out"), 2);
  L.twist_in0 = ti(0);
  L.twist_in1 = ti(1);
  L.ring = get_num(j, "ring");
  L.twist_out0 = to(0);
  L.twist_out1 = to(1);
  L.shell0 = get_num(j, "shell0");
  L.shell_eps = get_num(j, "shell_eps");
  L.repel_u = get_num(j, "repel_u");
  L.attract_u = get_num(j, "attract_u");
  L.child_cap = get_num(j, "child_cap");
  L.stage1_circle = get_num(j, "stage1_circle");
  L.validate();
  return L;
}

Json spectrum(const ExponentSpectrum<double>& s) {
  Json j;
  j["values"] = Json::array();
  for (double v : s.values) j["values"].push_back(num(v));
  j["has_complex_pair"] = s.has_complex_pair;
  return j;
}

ExponentSpectrum<double> get_spectrum(const Json& j) {
  ExponentSpectrum<double> s;
  for (const auto& v : field(j, "values")) s.values.push_back(get_num(v));
  s.has_complex_pair = field(j, "has_complex_pair").get<bool>();
  return s;
}

template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const FormatError&) {
    throw;
  } catch (const Json::exception& e) {
    throw FormatError(e.what());
  } catch (const std::exception& e) {
    // invalid values caught by the object constructors
    throw FormatError(e.what());
  }
}

}  // namespace

Json to_json(const Cocycled& c) {
  Json j;
  j["dim"] = c.dim();
  j["period"] = c.period();
  j["matrices"] = Json::array();
  for (const auto& a : c.matrices()) j["matrices"].push_back(mat(a));
  return j;
}

Cocycled cocycle_from_json(const Json& j) {
  return guarded([&] {
    int dim = field(j, "dim").get<int>();
    int period = field(j, "period").get<int>();
    const auto& ms = field(j, "matrices");
    if (!ms.is_array() || static_cast<int>(ms.size()) != period)
      throw FormatError("cocycle lists " + std::to_string(ms.size()) + " matrices for period " + std::to_string(period));
    if (dim != 2 && dim != 3) throw FormatError("cocycle dimension must be 2 or 3");
    std::vector<Matd> mats;
    for (const auto& m : ms) mats.push_back(get_mat(m, dim));
    return Cocycled(std::move(mats));
  });
}

Json to_json(const TowerSchedule& s) { return Json(s.periods()); }

TowerSchedule schedule_from_json(const Json& j) {
  return guarded([&] { return TowerSchedule(j.get<std::vector<std::int64_t>>()); });
}

Json to_json(const SaddleModel& m) {
  Json j;
  j["log_rates"] = vec(m.log_rates());
  j["bump"] = {{"r_in", m.bump().r_in}, {"r_out", m.bump().r_out}};
  const auto& c = m.connector();
  Json conn;
  conn["enabled"] = c.enabled;
  conn["scale"] = c.scale;
  conn["rot_center"] = {c.rot_cx, c.rot_cu};
  conn["rot_radii"] = {c.rot_core, c.rot_outer};
  conn["rot_angle"] = c.rot_angle;
  conn["dip_center"] = {c.dip_cx, c.dip_cu};
  conn["dip_radii"] = {c.dip_core, c.dip_outer};
  conn["depth"] = c.depth;
  conn["depth_range"] = {c.depth_min, c.depth_max};
  j["connector"] = conn;
  return j;
}

SaddleModel model_from_json(const Json& j) {
  return guarded([&] {
    Vecd rates = get_vec(field(j, "log_rates"));
    BumpProfile b;
    const auto& bj = field(j, "bump");
    b.r_in = get_num(bj, "r_in");
    b.r_out = get_num(bj, "r_out");
    ConnectorParams c;
    if (auto it = j.find("connector"); it != j.end()) {
      const auto& cj = *it;
      c.enabled = field(cj, "enabled").get<bool>();
      c.scale = get_num(cj, "scale");
      auto rc = get_vec(field(cj, "rot_center"), 2), rr = get_vec(field(cj, "rot_radii"), 2);
      auto dc = get_vec(field(cj, "dip_center"), 2), dr = get_vec(field(cj, "dip_radii"), 2);
      auto range = get_vec(field(cj, "depth_range"), 2);
      c.rot_cx = rc(0);
      c.rot_cu = rc(1);
      c.rot_core = rr(0);
      c.rot_outer = rr(1);
      c.rot_angle = get_num(cj, "rot_angle");
      c.dip_cx = dc(0);
      c.dip_cu = dc(1);
      c.dip_core = dr(0);
      c.dip_outer = dr(1);
      c.depth = get_num(cj, "depth");
      c.depth_min = range(0);
      c.depth_max = range(1);
    }
    return SaddleModel(rates, b, c);
  });
}

Json to_json(const BudgetReport& b) {
  Json j;
  j["pass"] = b.pass;
  j["samples"] = b.samples;
  j["max_log_det"] = num(b.max_log_det);
  j["max_log_inv_norm"] = num(b.max_log_inv_norm);
  j["margin_jacobian"] = num(b.margin_jacobian);
  j["margin_inverse"] = num(b.margin_inverse);
  j["argmax_log_det"] = vec(b.argmax_log_det);
  j["argmax_log_inv_norm"] = vec(b.argmax_log_inv_norm);
  j["failures"] = Json::array();
  for (const auto& f : b.failures)
    j["failures"].push_back({{"x", vec(f.x)}, {"log_det", num(f.log_det)}, {"log_inv_norm", num(f.log_inv_norm)}});
  j["connector"] = {{"samples", b.connector_samples},
                    {"max_log_det", num(b.connector_max_log_det)},
                    {"max_log_inv_norm", num(b.connector_max_log_inv_norm)}};
  return j;
}

Json to_json(const TangencyCertificate& c) {
  Json j;
  j["z"] = vec(c.z);
  j["direction"] = vec(c.direction);
  j["angle_residual"] = num(c.angle_residual);
  j["offset_residual"] = num(c.offset_residual);
  j["depth"] = num(c.depth);
  j["unstable_iterate"] = c.unstable_iterate;
  j["stable_entry"] = c.stable_entry;
  return j;
}

TangencyCertificate tangency_from_json(const Json& j) {
  return guarded([&] {
    TangencyCertificate c;
    c.z = get_vec(field(j, "z"));
    c.direction = get_vec(field(j, "direction"), static_cast<int>(c.z.size()));
    c.angle_residual = get_num(j, "angle_residual");
    c.offset_residual = get_num(j, "offset_residual");
    c.depth = get_num(j, "depth");
    c.unstable_iterate = field(j, "unstable_iterate").get<int>();
    c.stable_entry = field(j, "stable_entry").get<int>();
    return c;
  });
}

Json to_json(const Tower& t) {
  Json j;
  j["format"] = kTowerFormat;
  j["version"] = kTowerVersion;
  j["dim"] = t.dim;
  j["word"] = t.word;
  j["insert_rates"] = vec(t.insert_rates);
  j["bump"] = {{"r_in", t.bump.r_in}, {"r_out", t.bump.r_out}};
  j["layout"] = layout(t.layout);
  j["stages"] = Json::array();
  for (const auto& s : t.stages) {
    Json sj;
    sj["level"] = s.level;
    sj["period"] = s.period;
    sj["support"] = num(s.support);
    sj["branching"] = s.branching;
    sj["child_scale"] = num(s.child_scale);
    sj["child_offset"] = num(s.child_offset);
    sj["centers"] = Json::array();
    for (const auto& c : s.centers) sj["centers"].push_back(vec(c));
    sj["frames"] = Json::array();
    for (const auto& q : s.frames) sj["frames"].push_back(mat(q));
    sj["attracting"] = Json::array();
    for (const auto& d : s.attracting.disks) sj["attracting"].push_back(disk(d));
    sj["repelling"] = Json::array();
    for (const auto& d : s.repelling.disks) sj["repelling"].push_back(disk(d));
    Json cj;
    cj["location"] = vec(s.cert.location);
    cj["period"] = s.cert.period;
    cj["cocycle"] = to_json(s.cert.cocycle);
    cj["spectrum"] = spectrum(s.cert.spectrum);
    sj["certificate"] = cj;
    j["stages"].push_back(sj);
  }
  return j;
}

Tower tower_from_json(const Json& j) {
  return guarded([&] {
    if (field(j, "format") != kTowerFormat) throw FormatError("not a tower dump");
    if (field(j, "version").get<int>() != kTowerVersion) throw FormatError("unsupported tower dump version");
    Tower t;
    t.dim = field(j, "dim").get<int>();
    if (t.dim != 2 && t.dim != 3) throw FormatError("tower dimension must be 2 or 3");
    t.word = field(j, "word").get<std::string>();
    t.insert_rates = get_vec(field(j, "insert_rates"), t.dim);
    const auto& bj = field(j, "bump");
    t.bump.r_in = get_num(bj, "r_in");
    t.bump.r_out = get_num(bj, "r_out");
    t.bump.validate();
    t.layout = get_layout(field(j, "layout"));
    const auto& st = field(j, "stages");
    if (!st.is_array()) throw FormatError("stages must be an array");
    for (const auto& sj : st) {
      TowerStage s;
      s.level = field(sj, "level").get<int>();
      if (s.level != t.depth() + 1) throw FormatError("stage levels must run 1, 2, ...");
      s.period = field(sj, "period").get<std::int64_t>();
      s.support = get_num(sj, "support");
      s.branching = field(sj, "branching").get<int>();
      s.child_scale = get_num(sj, "child_scale");
      s.child_offset = get_num(sj, "child_offset");
      for (const auto& c : field(sj, "centers")) s.centers.push_back(get_vec(c, t.dim));
      for (const auto& q : field(sj, "frames")) s.frames.push_back(get_mat(q, t.dim));
      if (s.centers.empty() || s.centers.size() != s.frames.size())
        throw FormatError("stage " + std::to_string(s.level) + " needs one frame per centre");
      s.attracting.role = CycleRole::attracting;
      s.repelling.role = CycleRole::repelling;
      for (const auto& d : field(sj, "attracting")) s.attracting.disks.push_back(get_disk(d, t.dim));
      for (const auto& d : field(sj, "repelling")) s.repelling.disks.push_back(get_disk(d, t.dim));
      const auto& cj = field(sj, "certificate");
      s.cert.location = get_vec(field(cj, "location"), t.dim);
      s.cert.period = field(cj, "period").get<std::int64_t>();
      s.cert.cocycle = cocycle_from_json(field(cj, "cocycle"));
      if (s.cert.cocycle.dim() != t.dim) throw FormatError("certificate cocycle has the wrong dimension");
      s.cert.spectrum = get_spectrum(field(cj, "spectrum"));
      t.stages.push_back(std::move(s));
    }
    return t;
  });
}

Json to_json(const VerdictReport& r) {
  Json j;
  j["subject"] = r.subject;
  j["verdict"] = r.all_pass() ? "pass" : "fail";
  j["items"] = Json::array();
  for (const auto& v : r.items) {
    Json item;
    item["id"] = v.id;
    item["verdict"] = v.pass ? "pass" : "fail";
    item["margin"] = num(v.margin);
    item["witness"] = v.witness;
    item["note"] = v.note;
    Json vals = Json::object();
    for (const auto& [k, x] : v.values) vals[k] = num(x);
    item["values"] = vals;
    j["items"].push_back(item);
  }
  return j;
}

VerdictReport report_from_json(const Json& j) {
  return guarded([&] {
    VerdictReport r;
    r.subject = field(j, "subject").get<std::string>();
    for (const auto& item : field(j, "items")) {
      CheckVerdict v;
      v.id = field(item, "id").get<std::string>();
      auto verdict = field(item, "verdict").get<std::string>();
      if (verdict != "pass" && verdict != "fail") throw FormatError("verdict must be pass or fail");
      v.pass = verdict == "pass";
      v.margin = get_num(item, "margin");
      v.witness = field(item, "witness").get<std::string>();
      v.note = field(item, "note").get<std::string>();
      for (const auto& [k, x] : field(item, "values").items()) v.values.emplace_back(k, get_num(x));
      r.add(std::move(v));
    }
    return r;
  });
}

Json to_json(const Prop22Result& r) {
  return {{"bound", num(r.bound)}, {"verdict", r.pass ? "pass" : "fail"}, {"reason", r.reason}};
}

std::string spectra_csv(const Tower& t) {
  std::ostringstream os;
  os.precision(17);
  os << "stage,chi_minus,chi_center,chi_plus\n";
  for (const auto& s : t.stages) {
    const auto& v = s.cert.spectrum.values;
    os << s.level << ',' << v.back() << ',';
    if (v.size() == 3) os << v[1];
    os << ',' << v.front() << '\n';
  }
  return os.str();
}

std::string cantor_csv(const Tower& t) {
  std::ostringstream os;
  os.precision(17);
  os << "index";
  for (int k = 0; k < t.dim; ++k) os << ",x" << k;
  os << '\n';
  if (t.stages.empty()) return os.str();
  auto pts = limit_set_sample(t, t.stages.back().period);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    os << i;
    for (int k = 0; k < t.dim; ++k) os << ',' << pts[i](k);
    os << '\n';
  }
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
  if (!out) throw FormatError("write failed for " + path);
}

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace aperiodic
