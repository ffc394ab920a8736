#include "dropf/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dropf/policy.hpp"
#include "dropf/version.hpp"

namespace dropf {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json mat_to_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vec_to_json(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix json_to_mat(const json& j, const std::string& what) {
  if (!j.is_array()) throw DataError(what + " must be an array of rows");
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return Matrix(0, 0);
  if (!j[0].is_array()) throw DataError(what + " rows must be arrays");
  const int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != cols) {
      std::ostringstream msg;
      msg << what << " row " << r << " has a different length than row 0";
      throw DataError(msg.str());
    }
    for (int c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) {
        std::ostringstream msg;
        msg << what << " entry (" << r << ", " << c << ") is not a number";
        throw DataError(msg.str());
      }
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

Vector json_to_vec(const json& j, const std::string& what) {
  if (!j.is_array()) throw DataError(what + " must be an array");
  Vector v(static_cast<int>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      std::ostringstream msg;
      msg << what << " entry " << i << " is not a number";
      throw DataError(msg.str());
    }
    v(static_cast<int>(i)) = j[i].get<double>();
  }
  return v;
}

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& ex) {
    throw DataError(path + ": " + ex.what());
  }
  return j;
}

void require_version(const json& j, const std::string& path) {
  if (!j.contains("format_version")) {
    throw DataError(path + ": missing format_version");
  }
  int v = j["format_version"].get<int>();
  if (v != kFormatVersion) {
    std::ostringstream msg;
    msg << path << ": unsupported format_version " << v << ", expected "
        << kFormatVersion;
    throw DataError(msg.str());
  }
}

const json& need(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw DataError(where + ": missing field '" + key + "'");
  return j[key];
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("failed while writing " + path);
}

json manifest_to_json(const RunManifest& m) {
  json j;
  j["case_path"] = m.case_path;
  j["case_hash"] = m.case_hash;
  j["data_path"] = m.data_path;
  j["data_hash"] = m.data_hash;
  j["alpha"] = m.alpha;
  j["rho"] = m.rho;
  j["epsilon"] = m.epsilon;
  j["ground_norm"] = m.ground_norm;
  j["seed"] = m.seed;
  j["tool_version"] = m.tool_version.empty() ? kVersion : m.tool_version;
  j["created_utc"] = m.created_utc;
  return j;
}

json kkt_to_json(const KktReport& k) {
  json j;
  j["stationarity"] = k.stationarity;
  j["primal_eq"] = k.primal_eq;
  j["primal_ineq"] = k.primal_ineq;
  j["dual_feas"] = k.dual_feas;
  j["complementarity"] = k.complementarity;
  return j;
}

json policy_to_json(const AffinePolicy& policy, const HorizonModel& model) {
  const int T = model.T;
  const int n_xi = model.n_xi;
  json devices = json::array();
  for (size_t j = 0; j < model.net.devices.size(); ++j) {
    const auto& dev = model.net.devices[j];
    json d;
    d["id"] = dev.id;
    d["e"] = vec_to_json(policy.e[j]);
    json blocks = json::array();
    BoolMask mask = causality_mask(dev.m, T, n_xi, model.net.same_step_recourse);
    for (int t = 0; t < T; ++t) {
      for (int s = 0; s < T; ++s) {
        if (!mask(t * dev.m, s * n_xi)) continue;
        json blk;
        blk["row"] = t;
        blk["col"] = s;
        blk["block"] = mat_to_json(policy.D[j].block(t * dev.m, s * n_xi, dev.m, n_xi));
        blocks.push_back(std::move(blk));
      }
    }
    d["d_blocks"] = std::move(blocks);
    devices.push_back(std::move(d));
  }
  json out;
  out["format_version"] = kFormatVersion;
  out["T"] = T;
  out["n_xi"] = n_xi;
  out["same_step_recourse"] = model.net.same_step_recourse;
  out["devices"] = std::move(devices);
  return out;
}

AffinePolicy policy_from_json(const json& j, const HorizonModel& model,
                              const std::string& path) {
  if (need(j, "T", path).get<int>() != model.T ||
      need(j, "n_xi", path).get<int>() != model.n_xi) {
    throw DataError(path + ": policy horizon/n_xi do not match the case");
  }
  if (need(j, "same_step_recourse", path).get<bool>() != model.net.same_step_recourse) {
    throw DataError(path + ": policy causality flag does not match the case");
  }
  const auto& devices = need(j, "devices", path);
  if (devices.size() != model.net.devices.size()) {
    throw DataError(path + ": policy device count does not match the case");
  }
  AffinePolicy policy;
  for (size_t d = 0; d < devices.size(); ++d) {
    const auto& dev = model.net.devices[d];
    const json& jd = devices[d];
    if (need(jd, "id", path).get<std::string>() != dev.id) {
      std::ostringstream msg;
      msg << path << ": policy device " << d << " is '"
          << jd["id"].get<std::string>() << "', case has '" << dev.id << "'";
      throw DataError(msg.str());
    }
    Vector e = json_to_vec(need(jd, "e", path), path + ": e of " + dev.id);
    if (e.size() != dev.m * model.T) {
      throw DataError(path + ": e of " + dev.id + " has the wrong length");
    }
    Matrix D = Matrix::Zero(dev.m * model.T, model.xi_dim());
    BoolMask mask = causality_mask(dev.m, model.T, model.n_xi,
                                   model.net.same_step_recourse);
    for (const auto& blk : need(jd, "d_blocks", path)) {
      int row = need(blk, "row", path).get<int>();
      int col = need(blk, "col", path).get<int>();
      if (row < 0 || row >= model.T || col < 0 || col >= model.T) {
        throw DataError(path + ": policy block index out of range for " + dev.id);
      }
      if (!mask(row * dev.m, col * model.n_xi)) {
        std::ostringstream msg;
        msg << path << ": policy block (" << row << ", " << col << ") of " << dev.id
            << " violates the causality structure";
        throw DataError(msg.str());
      }
      Matrix block = json_to_mat(need(blk, "block", path), path + ": block of " + dev.id);
      if (block.rows() != dev.m || block.cols() != model.n_xi) {
        throw DataError(path + ": policy block of " + dev.id + " has the wrong shape");
      }
      D.block(row * dev.m, col * model.n_xi, dev.m, model.n_xi) = block;
    }
    policy.D.push_back(std::move(D));
    policy.e.push_back(std::move(e));
  }
  return policy;
}

}  // namespace

NetworkCase load_case(const std::string& path) {
  json j = parse_file(path);
  require_version(j, path);
  NetworkCase net;
  for (const auto& b : need(j, "buses", path)) net.buses.push_back(b.get<int>());
  net.slack = need(j, "slack", path).get<int>();
  net.T = j.value("horizon", 1);
  net.n_xi = j.value("n_xi", 1);
  net.same_step_recourse = j.value("same_step_recourse", false);
  if (j.contains("monitored_lines")) {
    for (const auto& s : j["monitored_lines"]) {
      net.monitored_lines.push_back(s.get<std::string>());
    }
  }
  for (const auto& jl : need(j, "lines", path)) {
    Line line;
    line.from = need(jl, "from", path + " line").get<int>();
    line.to = need(jl, "to", path + " line").get<int>();
    line.x_pu = need(jl, "x_pu", path + " line").get<double>();
    line.limit_mw = need(jl, "limit_mw", path + " line").get<double>();
    line.limit_rev_mw = jl.value("limit_rev_mw", -1.0);
    net.lines.push_back(line);
  }
  for (const auto& jd : need(j, "devices", path)) {
    ControllableDevice dev;
    dev.id = need(jd, "id", path + " device").get<std::string>();
    const std::string where = path + " device " + dev.id;
    dev.bus = need(jd, "bus", where).get<int>();
    dev.n = jd.value("n", 1);
    dev.m = jd.value("m", 1);
    dev.A_step = json_to_mat(need(jd, "A_step", where), where + " A_step");
    dev.B_step = json_to_mat(need(jd, "B_step", where), where + " B_step");
    dev.x0 = json_to_vec(need(jd, "x0", where), where + " x0");
    const json& jc = need(jd, "cost", where);
    dev.cost.f_x = json_to_vec(need(jc, "f_x", where), where + " f_x");
    dev.cost.H_x = json_to_mat(need(jc, "H_x", where), where + " H_x");
    dev.cost.f_u = json_to_vec(need(jc, "f_u", where), where + " f_u");
    dev.cost.H_u = json_to_mat(need(jc, "H_u", where), where + " H_u");
    dev.cost.c = jc.value("c", 0.0);
    if (jd.contains("local")) {
      const json& jloc = jd["local"];
      dev.local.T_loc = json_to_mat(need(jloc, "T", where), where + " local T");
      dev.local.U_loc = json_to_mat(need(jloc, "U", where), where + " local U");
      dev.local.Z_loc = json_to_mat(need(jloc, "Z", where), where + " local Z");
      dev.local.w = json_to_vec(need(jloc, "w", where), where + " local w");
    }
    net.devices.push_back(std::move(dev));
  }
  if (j.contains("injections")) {
    for (const auto& ji : j["injections"]) {
      UncontrollableInjection inj;
      inj.id = need(ji, "id", path + " injection").get<std::string>();
      const std::string where = path + " injection " + inj.id;
      inj.bus = need(ji, "bus", where).get<int>();
      inj.r = json_to_vec(need(ji, "r", where), where + " r");
      inj.G = json_to_mat(need(ji, "G", where), where + " G");
      net.injections.push_back(std::move(inj));
    }
  }
  return net;
}

void save_case(const NetworkCase& net, const std::string& path) {
  json j;
  j["format_version"] = kFormatVersion;
  j["buses"] = net.buses;
  j["slack"] = net.slack;
  j["horizon"] = net.T;
  j["n_xi"] = net.n_xi;
  j["same_step_recourse"] = net.same_step_recourse;
  j["monitored_lines"] = net.monitored_lines;
  json lines = json::array();
  for (const auto& line : net.lines) {
    json jl;
    jl["from"] = line.from;
    jl["to"] = line.to;
    jl["x_pu"] = line.x_pu;
    jl["limit_mw"] = line.limit_mw;
    if (line.limit_rev_mw >= 0.0) jl["limit_rev_mw"] = line.limit_rev_mw;
    lines.push_back(std::move(jl));
  }
  j["lines"] = std::move(lines);
  json devices = json::array();
  for (const auto& dev : net.devices) {
    json jd;
    jd["id"] = dev.id;
    jd["bus"] = dev.bus;
    jd["n"] = dev.n;
    jd["m"] = dev.m;
    jd["A_step"] = mat_to_json(dev.A_step);
    jd["B_step"] = mat_to_json(dev.B_step);
    jd["x0"] = vec_to_json(dev.x0);
    json jc;
    jc["f_x"] = vec_to_json(dev.cost.f_x);
    jc["H_x"] = mat_to_json(dev.cost.H_x);
    jc["f_u"] = vec_to_json(dev.cost.f_u);
    jc["H_u"] = mat_to_json(dev.cost.H_u);
    jc["c"] = dev.cost.c;
    jd["cost"] = std::move(jc);
    if (dev.local.rows() > 0) {
      json jloc;
      jloc["T"] = mat_to_json(dev.local.T_loc);
      jloc["U"] = mat_to_json(dev.local.U_loc);
      jloc["Z"] = mat_to_json(dev.local.Z_loc);
      jloc["w"] = vec_to_json(dev.local.w);
      jd["local"] = std::move(jloc);
    }
    devices.push_back(std::move(jd));
  }
  j["devices"] = std::move(devices);
  json injections = json::array();
  for (const auto& inj : net.injections) {
    json ji;
    ji["id"] = inj.id;
    ji["bus"] = inj.bus;
    ji["r"] = vec_to_json(inj.r);
    ji["G"] = mat_to_json(inj.G);
    injections.push_back(std::move(ji));
  }
  j["injections"] = std::move(injections);
  write_file(path, j.dump(2) + "\n");
}

Matrix load_error_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool bad_cell = false;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      try {
        size_t used = 0;
        double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
          ++used;
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
        if (!std::isfinite(v)) {
          std::ostringstream msg;
          msg << path << " line " << line_no << " column " << col
              << " is not finite";
          throw DataError(msg.str());
        }
        row.push_back(v);
      } catch (const DataError&) {
        throw;
      } catch (const std::exception&) {
        // a non-numeric leading cell on the first line marks a header
        if (!first_content || col > 1) {
          std::ostringstream msg;
          msg << path << " line " << line_no << " column " << col
              << " is not numeric: '" << cell << "'";
          throw DataError(msg.str());
        }
        bad_cell = true;
        break;
      }
    }
    if (bad_cell && first_content) {
      // a non-numeric first line is a header
      first_content = false;
      continue;
    }
    first_content = false;
    if (!rows.empty() && row.size() != rows.front().size()) {
      std::ostringstream msg;
      msg << path << " line " << line_no << " has " << row.size()
          << " cells, expected " << rows.front().size();
      throw DataError(msg.str());
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + " has no data rows");
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
    }
  }
  return m;
}

void save_error_csv(const Matrix& samples, const std::string& path) {
  std::ostringstream out;
  for (int r = 0; r < samples.rows(); ++r) {
    for (int c = 0; c < samples.cols(); ++c) {
      if (c) out << ',';
      out << fmt_double(samples(r, c));
    }
    out << '\n';
  }
  write_file(path, out.str());
}

AffinePolicy load_policy(const std::string& path, const HorizonModel& model) {
  json j = parse_file(path);
  require_version(j, path);
  // accept a bare policy file or a full solution file with the policy nested
  if (j.contains("policy") && j["policy"].is_object()) {
    return policy_from_json(j["policy"], model, path);
  }
  return policy_from_json(j, model, path);
}

void save_policy(const AffinePolicy& policy, const HorizonModel& model,
                 const std::string& path) {
  write_file(path, policy_to_json(policy, model).dump(2) + "\n");
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return h;
}

void save_solution(const Solution& sol, const HorizonModel& model,
                   const RunManifest& manifest, const std::string& path) {
  json j;
  j["format_version"] = kFormatVersion;
  j["manifest"] = manifest_to_json(manifest);
  j["status"] = to_string(sol.status);
  j["objective"] = sol.objective;
  j["cost_term"] = sol.cost_term;
  j["dro_term"] = sol.dro_term;
  j["iterations"] = sol.iterations;
  j["kkt"] = kkt_to_json(sol.kkt);
  json rows = json::array();
  for (size_t v = 0; v < sol.row_labels.size(); ++v) {
    json row;
    row["label"] = sol.row_labels[v];
    if (v < sol.dro_term_per_row.size()) {
      row["dro_term"] = sol.dro_term_per_row[v];
      double pc = sol.predicted_cvar[v];
      if (std::isfinite(pc)) row["predicted_cvar"] = pc;
      row["tau"] = sol.tau(static_cast<int>(v));
    }
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  if (sol.status == SolveStatus::solved) {
    j["policy"] = policy_to_json(sol.policy, model);
  }
  write_file(path, j.dump(2) + "\n");
}

void save_sweep(const SweepResult& sweep, const RunManifest& manifest,
                const std::string& csv_path, const std::string& json_path) {
  std::ostringstream csv;
  csv << "rho,epsilon,status,objective,cost_term,dro_term,predicted_cvar,oos_cvar,"
         "oos_violation_prob,mean_cost,eval_seed,error\n";
  for (const auto& p : sweep.points) {
    csv << fmt_double(p.rho) << ',' << fmt_double(p.epsilon) << ','
        << to_string(p.status) << ',' << fmt_double(p.objective) << ','
        << fmt_double(p.cost_term) << ',' << fmt_double(p.dro_term) << ','
        << fmt_double(p.predicted_cvar) << ',' << fmt_double(p.oos_cvar) << ','
        << fmt_double(p.oos_violation_prob) << ',' << fmt_double(p.mean_cost) << ','
        << p.eval_seed << ',' << p.error << '\n';
  }
  write_file(csv_path, csv.str());

  json j;
  j["format_version"] = kFormatVersion;
  j["manifest"] = manifest_to_json(manifest);
  j["rho_grid"] = sweep.rho_grid;
  j["eps_grid"] = sweep.eps_grid;
  json points = json::array();
  for (const auto& p : sweep.points) {
    json jp;
    jp["rho"] = p.rho;
    jp["epsilon"] = p.epsilon;
    jp["status"] = to_string(p.status);
    jp["objective"] = p.objective;
    jp["cost_term"] = p.cost_term;
    jp["dro_term"] = p.dro_term;
    if (std::isfinite(p.predicted_cvar)) jp["predicted_cvar"] = p.predicted_cvar;
    jp["oos_cvar"] = p.oos_cvar;
    jp["oos_violation_prob"] = p.oos_violation_prob;
    jp["mean_cost"] = p.mean_cost;
    jp["eval_seed"] = p.eval_seed;
    if (!p.error.empty()) jp["error"] = p.error;
    points.push_back(std::move(jp));
  }
  j["points"] = std::move(points);
  write_file(json_path, j.dump(2) + "\n");
}

void save_trace(const MpcTrace& trace, const NetworkCase& base,
                const RunManifest& manifest, const std::string& csv_path,
                const std::string& json_path) {
  std::ostringstream csv;
  csv << "step,status,objective,stage_cost";
  for (const auto& dev : base.devices) {
    for (int k = 0; k < dev.m; ++k) csv << ",u_" << dev.id << '_' << k;
    for (int k = 0; k < dev.n; ++k) csv << ",x_" << dev.id << '_' << k;
  }
  for (const auto& inj : base.injections) csv << ",inj_" << inj.id;
  csv << '\n';
  for (const auto& step : trace.steps) {
    csv << step.step << ',' << to_string(step.status) << ','
        << fmt_double(step.objective) << ',' << fmt_double(step.stage_cost);
    for (size_t j = 0; j < base.devices.size(); ++j) {
      for (int k = 0; k < base.devices[j].m; ++k) {
        csv << ',' << (j < step.u.size() ? fmt_double(step.u[j](k)) : "");
      }
      for (int k = 0; k < base.devices[j].n; ++k) {
        csv << ',' << (j < step.x.size() ? fmt_double(step.x[j](k)) : "");
      }
    }
    for (int q = 0; q < static_cast<int>(base.injections.size()); ++q) {
      csv << ',' << (q < step.realized_injections.size()
                         ? fmt_double(step.realized_injections(q))
                         : "");
    }
    csv << '\n';
  }
  write_file(csv_path, csv.str());

  json j;
  j["format_version"] = kFormatVersion;
  j["manifest"] = manifest_to_json(manifest);
  j["completed"] = trace.completed;
  if (!trace.error.empty()) j["error"] = trace.error;
  json steps = json::array();
  for (const auto& step : trace.steps) {
    json js;
    js["step"] = step.step;
    js["status"] = to_string(step.status);
    js["objective"] = step.objective;
    js["stage_cost"] = step.stage_cost;
    json u = json::array();
    for (const auto& uj : step.u) u.push_back(vec_to_json(uj));
    js["u"] = std::move(u);
    json x = json::array();
    for (const auto& xj : step.x) x.push_back(vec_to_json(xj));
    js["x"] = std::move(x);
    js["realized_injections"] = vec_to_json(step.realized_injections);
    js["constraint_values"] = vec_to_json(step.constraint_values);
    steps.push_back(std::move(js));
  }
  j["steps"] = std::move(steps);
  write_file(json_path, j.dump(2) + "\n");
}

EvalReport load_eval_report(const std::string& path) {
  json j = parse_file(path);
  require_version(j, path);
  EvalReport report;
  report.samples = need(j, "samples", path).get<int>();
  report.mean_cost = need(j, "mean_cost", path).get<double>();
  report.worst_cvar = need(j, "worst_cvar", path).get<double>();
  for (const auto& jr : need(j, "rows", path)) {
    RowStats row;
    row.label = need(jr, "label", path).get<std::string>();
    row.cvar = need(jr, "cvar", path).get<double>();
    row.violation_prob = need(jr, "violation_prob", path).get<double>();
    row.mean = need(jr, "mean", path).get<double>();
    row.max = need(jr, "max", path).get<double>();
    report.rows.push_back(std::move(row));
  }
  return report;
}

void save_eval_report(const EvalReport& report, const RunManifest& manifest,
                      const std::string& path) {
  json j;
  j["format_version"] = kFormatVersion;
  j["manifest"] = manifest_to_json(manifest);
  j["samples"] = report.samples;
  j["mean_cost"] = report.mean_cost;
  j["worst_cvar"] = report.worst_cvar;
  json rows = json::array();
  for (const auto& row : report.rows) {
    json jr;
    jr["label"] = row.label;
    jr["cvar"] = row.cvar;
    jr["violation_prob"] = row.violation_prob;
    jr["mean"] = row.mean;
    jr["max"] = row.max;
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  write_file(path, j.dump(2) + "\n");
}

}  // namespace dropf
