#include "gnls/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;
using njson = nlohmann::json;

namespace gnls {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_real(const std::string& tok, const std::string& where) {
  require(!tok.empty(), errc::parse_error, where + ": empty number");
  const char* c = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(c, &end);
  require(end == c + tok.size(), errc::parse_error, where + ": bad number '" + tok + "'");
  return v;
}

long parse_int(const std::string& tok, const std::string& where) {
  require(!tok.empty(), errc::parse_error, where + ": empty integer");
  const char* c = tok.c_str();
  char* end = nullptr;
  long v = std::strtol(c, &end, 10);
  require(end == c + tok.size(), errc::parse_error, where + ": bad integer '" + tok + "'");
  return v;
}

void ensure_parent_dirs(const std::string& path) {
  fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  require(!ec, errc::io_error, "cannot create directory " + p.parent_path().string());
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, errc::io_error, "cannot create directory " + dir);
}

std::string step_dir(const std::string& dir, size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%04zu", i);
  return dir + "/" + buf;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

GraphSpec parse_graph_spec(const std::string& text, const std::string& origin) {
  GraphSpec spec;
  enum { none, verts, edges } section = none;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string at = origin + ":" + std::to_string(lineno) + ": ";
    if (line == "[vertices]") {
      section = verts;
      continue;
    }
    if (line == "[edges]") {
      section = edges;
      continue;
    }
    require(line.front() != '[', errc::parse_error, at + "unknown section " + line);
    auto tok = split_ws(line);
    switch (section) {
      case verts:
        require(tok.size() == 1, errc::parse_error, at + "expected one vertex id per line");
        spec.vertices.push_back(tok[0]);
        break;
      case edges: {
        require(tok.size() == 4, errc::parse_error, at + "expected: id v_a v_b length");
        spec.edges.push_back({tok[0], tok[1], tok[2], parse_real(tok[3], at + "length")});
        break;
      }
      case none:
        fail(errc::parse_error, at + "content before any section header");
    }
  }
  return spec;
}

MetricGraph read_graph_file(const std::string& path) {
  return build_graph(parse_graph_spec(read_text_file(path), path));
}

void write_graph_file(const MetricGraph& g, const std::string& path) {
  std::string out = "[vertices]\n";
  for (int v = 0; v < g.num_vertices(); ++v) out += g.vertex_name(v) + "\n";
  out += "[edges]\n";
  for (int e = 0; e < g.num_edges(); ++e) {
    const Edge& ed = g.edge(e);
    std::string name = ed.name.empty() ? "e" + std::to_string(e) : ed.name;
    out += name + " " + g.vertex_name(ed.a) + " " + g.vertex_name(ed.b) + " " +
           format_double(ed.length) + "\n";
  }
  write_text_file(path, out);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), errc::io_error, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  require(!in.bad(), errc::io_error, "read failed: " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  ensure_parent_dirs(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), errc::io_error, "cannot open " + path + " for writing");
  out << content;
  out.flush();
  require(out.good(), errc::io_error, "write failed: " + path);
}

void write_function_csv(const GraphFunction& u, const std::string& path) {
  const Mesh& mesh = *u.mesh;
  std::string out = "edge,s,value\n";
  for (int e = 0; e < mesh.graph().num_edges(); ++e)
    for (int k = 0; k <= mesh.elements_on_edge(e); ++k)
      out += std::to_string(e) + "," + format_double(mesh.node_s(e, k)) + "," +
             format_double(u.values(mesh.node_dof(e, k))) + "\n";
  write_text_file(path, out);
}

GraphFunction read_function_csv(const MeshPtr& mesh, const std::string& path) {
  const std::string text = read_text_file(path);
  const int n = mesh->num_dofs();
  Vec vals = Vec::Zero(n);
  std::vector<char> seen(n, 0);

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.rfind("edge", 0) == 0) continue;  // header row
    const std::string at = path + ":" + std::to_string(lineno) + ": ";
    auto f = split_csv(line);
    require(f.size() == 3, errc::parse_error, at + "expected edge,s,value");
    long e = parse_int(f[0], at + "edge");
    require(0 <= e && e < mesh->graph().num_edges(), errc::parse_error,
            at + "edge index out of range");
    double s = parse_real(f[1], at + "s");
    double v = parse_real(f[2], at + "value");
    double h = mesh->spacing(static_cast<int>(e));
    long k = std::lround(s / h);
    require(0 <= k && k <= mesh->elements_on_edge(static_cast<int>(e)) &&
                std::abs(s - static_cast<double>(k) * h) <= 1e-9 * std::max(h, std::abs(s)),
            errc::parse_error, at + "coordinate does not sit on a mesh node");
    int dof = mesh->node_dof(static_cast<int>(e), static_cast<int>(k));
    if (seen[dof]) {
      require(std::abs(v - vals(dof)) <= 1e-12 * std::max(1.0, std::abs(vals(dof))),
              errc::conflicting_vertex_values, at + "repeated node rows disagree");
    } else {
      vals(dof) = v;
      seen[dof] = 1;
    }
  }
  for (int i = 0; i < n; ++i)
    require(seen[i], errc::parse_error, path + ": missing rows: mesh has uncovered nodes");
  return {mesh, std::move(vals)};
}

void write_eig_csv(const SpectralResult& r, const std::string& path) {
  std::string out = "index,eigenvalue,residual\n";
  for (int i = 0; i < r.eigenvalues.size(); ++i)
    out += std::to_string(i) + "," + format_double(r.eigenvalues(i)) + "," +
           format_double(r.residuals(i)) + "\n";
  write_text_file(path, out);
}

std::string format_verify_report(const VerifyReport& rep) {
  std::string out;
  for (const VerifyCheck& c : rep.checks)
    out += c.name + " " + format_double(c.value) + " " + format_double(c.tolerance) + " " +
           (c.pass ? "PASS" : "FAIL") + "\n";
  return out;
}

void write_mesh_info(const Mesh& mesh, const std::string& dir) {
  ensure_dir(dir);
  write_graph_file(mesh.graph(), dir + "/graph.g");
  std::vector<int> counts;
  for (int e = 0; e < mesh.graph().num_edges(); ++e) counts.push_back(mesh.elements_on_edge(e));
  njson j;
  j["elements_per_edge"] = counts;
  write_text_file(dir + "/mesh.json", j.dump(2) + "\n");
}

Discretization load_mesh_info(const std::string& dir) {
  MetricGraph g = read_graph_file(dir + "/graph.g");
  std::vector<int> counts;
  try {
    njson j = njson::parse(read_text_file(dir + "/mesh.json"));
    counts = j.at("elements_per_edge").get<std::vector<int>>();
  } catch (const njson::exception& e) {
    fail(errc::parse_error, dir + "/mesh.json: " + e.what());
  }
  return discretize(g, std::move(counts));
}

void save_state(const BoundState& s, const std::string& dir) {
  ensure_dir(dir);
  write_mesh_info(*s.u.mesh, dir);
  write_function_csv(s.u, dir + "/u.csv");
  njson j;
  j["lambda"] = s.lambda;
  j["params"] = {{"p", s.params.p}, {"rho", s.params.rho}, {"mu", s.params.mu}};
  j["energy"] = s.energy_value;
  j["mass"] = s.mass;
  j["residuals"] = {{"constrained_grad", s.residuals.constrained_grad},
                    {"stationary_rel", s.residuals.stationary_rel},
                    {"interior_fd", s.residuals.interior_fd},
                    {"kirchhoff_fd", s.residuals.kirchhoff_fd}};
  j["morse_unconstrained"] = s.morse_unconstrained;
  j["morse_constrained"] = s.morse_constrained;
  j["positive"] = s.positive;
  j["mountain_pass"] = s.mountain_pass_tag;
  write_text_file(dir + "/state.json", j.dump(2) + "\n");
}

BoundState load_state(const Discretization& d, const std::string& dir) {
  GraphFunction u = read_function_csv(d.mesh, dir + "/u.csv");
  njson j;
  try {
    j = njson::parse(read_text_file(dir + "/state.json"));
  } catch (const njson::exception& e) {
    fail(errc::parse_error, dir + "/state.json: " + e.what());
  }
  try {
    EnergyParams prm;
    prm.p = j.at("params").at("p").get<double>();
    prm.rho = j.at("params").at("rho").get<double>();
    prm.mu = j.at("params").at("mu").get<double>();
    double lambda = j.at("lambda").get<double>();
    bool mp = j.value("mountain_pass", false);
    BoundState s = make_state(std::move(u), lambda, d, prm, mp, false);
    s.morse_unconstrained = j.value("morse_unconstrained", -1);
    s.morse_constrained = j.value("morse_constrained", -1);
    return s;
  } catch (const njson::exception& e) {
    fail(errc::parse_error, dir + "/state.json: " + e.what());
  }
}

void save_trace(const ContinuationTrace& t, const std::string& dir) {
  ensure_dir(dir);
  if (!t.entries.empty()) write_mesh_info(*t.entries.front().state.u.mesh, dir);
  std::string csv;
  csv += std::string("# param ") + (t.param == Schedule::Param::mu ? "mu" : "rho") + "\n";
  csv += "# newton_solves " + std::to_string(t.newton_solves) + "\n";
  csv += "step,param,lambda,energy,mass,from_bisection,all_pass\n";
  for (size_t i = 0; i < t.entries.size(); ++i) {
    const TraceEntry& te = t.entries[i];
    csv += std::to_string(i) + "," + format_double(te.param) + "," +
           format_double(te.state.lambda) + "," + format_double(te.state.energy_value) + "," +
           format_double(te.state.mass) + "," + (te.from_bisection ? "1" : "0") + "," +
           (te.verify.all_pass ? "1" : "0") + "\n";
  }
  write_text_file(dir + "/trace.csv", csv);
  for (size_t i = 0; i < t.entries.size(); ++i) {
    const std::string sd = step_dir(dir, i);
    save_state(t.entries[i].state, sd);
    write_text_file(sd + "/verify.txt", format_verify_report(t.entries[i].verify));
  }
}

ContinuationTrace load_trace(const Discretization& d, const std::string& dir) {
  const std::string text = read_text_file(dir + "/trace.csv");
  ContinuationTrace t;
  std::vector<std::pair<double, bool>> rows;  // (param, from_bisection)
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    const std::string at = dir + "/trace.csv:" + std::to_string(lineno) + ": ";
    if (line.rfind("# param ", 0) == 0) {
      std::string kind = trim(line.substr(8));
      if (kind == "mu")
        t.param = Schedule::Param::mu;
      else if (kind == "rho")
        t.param = Schedule::Param::rho;
      else
        fail(errc::parse_error, at + "unknown parameter kind " + kind);
      continue;
    }
    if (line.rfind("# newton_solves ", 0) == 0) {
      t.newton_solves = static_cast<int>(parse_int(trim(line.substr(16)), at));
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("step", 0) == 0) continue;  // header row
    auto f = split_csv(line);
    require(f.size() == 7, errc::parse_error, at + "expected 7 columns");
    size_t step = static_cast<size_t>(parse_int(f[0], at + "step"));
    require(step == rows.size(), errc::parse_error, at + "steps out of order");
    rows.emplace_back(parse_real(f[1], at + "param"), parse_int(f[5], at + "from_bisection") != 0);
  }
  for (size_t i = 0; i < rows.size(); ++i) {
    TraceEntry te;
    te.state = load_state(d, step_dir(dir, i));
    te.param = rows[i].first;
    te.from_bisection = rows[i].second;
    te.verify = verify_solution(te.state, d.ops);
    t.entries.push_back(std::move(te));
  }
  return t;
}

void write_blowup_csv(const std::vector<BlowupReport>& reps, const std::string& path) {
  std::string out =
      "step,lambda,eps,bound,degenerate,n_peaks,peak_edge,peak_s,height,eps_height,ratio,"
      "junction_dist_eps,regime,shift,sup_error,window,window_truncated,min_separation,"
      "env_pass,worst_margin,fitted_C2\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < reps.size(); ++i) {
    const BlowupReport& r = reps[i];
    std::string row = std::to_string(i) + "," + format_double(r.lambda) + "," +
                      format_double(r.eps) + "," + format_double(r.bound) + "," +
                      (r.degenerate ? "1" : "0") + "," + std::to_string(r.peaks.size());
    if (r.peaks.empty()) {
      row += ",-1," + format_double(nan) + "," + format_double(nan) + "," + format_double(nan) +
             "," + format_double(nan) + "," + format_double(nan) + ",none," +
             format_double(nan) + "," + format_double(nan) + "," + format_double(nan) + ",0";
    } else {
      const PeakRecord& pr = r.peaks.front();
      const RescaledProfile& rp = pr.profile;
      row += "," + std::to_string(pr.peak.where.edge) + "," + format_double(pr.peak.where.s) +
             "," + format_double(pr.peak.height) + "," + format_double(pr.eps_height) + "," +
             format_double(pr.ratio) + "," + format_double(rp.junction_dist_eps) + "," +
             (rp.regime == PeakRegime::interior ? "interior" : "vertex") + "," +
             format_double(rp.shift) + "," + format_double(rp.sup_error) + "," +
             format_double(rp.window) + "," + (rp.window_exceeds_graph ? "1" : "0");
    }
    double min_sep = inf;
    for (double s : r.separations) min_sep = std::min(min_sep, s);
    row += "," + format_double(min_sep) + "," + (r.envelope.pass ? "1" : "0") + "," +
           format_double(r.envelope.worst_margin) + "," + format_double(r.envelope.fitted_C2);
    out += row + "\n";
  }
  write_text_file(path, out);
}

void write_profile_csv(const RescaledProfile& rp, double p, double rho, const std::string& path) {
  LineSoliton V(p);
  const double aref = std::pow(rho, -1.0 / (p - 2.0));
  std::vector<size_t> idx(rp.y.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (rp.y[a] != rp.y[b]) return rp.y[a] < rp.y[b];
    return a < b;
  });
  std::string out = "y,v,limit\n";
  for (size_t i : idx)
    out += format_double(rp.y[i]) + "," + format_double(rp.w[i]) + "," +
           format_double(aref * V(rp.y[i] - rp.shift)) + "\n";
  write_text_file(path, out);
}

void write_envelope_csv(const BoundState& s, const std::vector<Peak>& peaks, double C1, double C2,
                        const std::string& path) {
  const Mesh& mesh = *s.u.mesh;
  // x is the concatenated arclength (edges laid end to end in index order),
  // a plotting coordinate; it is the true position only on path graphs.
  std::string out = "edge,s,x,u_abs,envelope\n";
  double offset = 0.0;
  for (int e = 0; e < mesh.graph().num_edges(); ++e) {
    for (int k = 0; k <= mesh.elements_on_edge(e); ++k) {
      EdgeCoordinate x{e, mesh.node_s(e, k)};
      out += std::to_string(e) + "," + format_double(x.s) + "," +
             format_double(offset + x.s) + "," +
             format_double(std::abs(s.u.values(mesh.node_dof(e, k)))) + "," +
             format_double(envelope_value(s, peaks, C1, C2, x)) + "\n";
    }
    offset += mesh.graph().edge(e).length;
  }
  write_text_file(path, out);
}

void write_manifest(const std::string& dir, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& inputs,
                    double wall_seconds) {
  njson j;
  j["command"] = command;
  njson in = njson::object();
  for (const auto& [k, v] : inputs) in[k] = v;
  j["inputs"] = in;
  j["versions"] = {{"gnls", "1.0.0"},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__}};
  j["wall_seconds"] = wall_seconds;
  ensure_dir(dir);
  write_text_file(dir + "/manifest.json", j.dump(2) + "\n");
}

}  // namespace gnls
