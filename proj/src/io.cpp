#include "gradphi/io.hpp"

#include "gradphi/numeric.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gradphi {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

Eigen::VectorXd parse_vector(const std::string& text, int line_no) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    try {
      vals.push_back(std::stod(tok));
    } catch (...) {
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": bad number '" + tok + "'");
    }
  }
  Eigen::VectorXd v(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) v[i] = vals[i];
  return v;
}

long parse_long(const std::string& text, int line_no) {
  try {
    return std::stol(trim(text));
  } catch (...) {
    throw std::invalid_argument("line " + std::to_string(line_no) +
                                ": bad integer '" + text + "'");
  }
}

}  // namespace

Config config_parse(const std::string& text) {
  Config cfg;
  cfg.raw_text = text;
  std::istringstream is(text);
  std::string line, section;
  int line_no = 0;
  bool tilt_seen = false;
  bool any_key = false;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": unterminated section");
      section = line.substr(1, line.size() - 2);
      if (section != "lattice" && section != "potential" && section != "tilt" &&
          section != "chain" && section != "experiment")
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    any_key = true;

    if (section == "lattice") {
      if (key == "d") {
        cfg.d = static_cast<int>(parse_long(value, line_no));
      } else if (key == "n") {
        const auto dots = value.find("..");
        if (dots == std::string::npos) {
          cfg.n_lo = cfg.n_hi = static_cast<int>(parse_long(value, line_no));
        } else {
          cfg.n_lo = static_cast<int>(parse_long(value.substr(0, dots), line_no));
          cfg.n_hi = static_cast<int>(parse_long(value.substr(dots + 2), line_no));
        }
      } else {
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": unknown lattice key '" + key + "'");
      }
    } else if (section == "potential") {
      if (key != "spec")
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": unknown potential key '" + key + "'");
      cfg.potential = Potential::parse(value);
    } else if (section == "tilt") {
      if (key != "p" && key != "q")
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": tilt key must be p or q");
      cfg.tilt = parse_vector(value, line_no);
      cfg.tilt_is_q = (key == "q");
      tilt_seen = true;
    } else if (section == "chain") {
      if (key == "steps")
        cfg.chain.steps = parse_long(value, line_no);
      else if (key == "burn_in")
        cfg.chain.burn_in = parse_long(value, line_no);
      else if (key == "seed")
        cfg.chain.seed = static_cast<std::uint64_t>(parse_long(value, line_no));
      else if (key == "step_size")
        cfg.chain.step_size = std::stod(value);
      else if (key == "thin")
        cfg.chain.thin = parse_long(value, line_no);
      else
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": unknown chain key '" + key + "'");
    } else if (section == "experiment") {
      if (key != "which")
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": unknown experiment key '" + key + "'");
      cfg.experiment = value;
    } else {
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": key outside any section");
    }
  }
  if (!any_key) throw std::invalid_argument("empty configuration");

  if (cfg.d < 2 || cfg.d > 3)
    throw std::invalid_argument("dimension must be 2 or 3");
  const int n_cap = cfg.d == 2 ? 5 : 3;
  if (cfg.n_lo < 0 || cfg.n_hi < cfg.n_lo || cfg.n_hi > n_cap)
    throw std::invalid_argument("levels must satisfy 0 <= n and n <= " +
                                std::to_string(n_cap));
  if (!tilt_seen) {
    cfg.tilt = Eigen::VectorXd::Zero(cfg.d);
  } else if (cfg.tilt.size() != cfg.d) {
    throw std::invalid_argument("tilt dimension does not match d");
  }
  cfg.chain.validate();
  const auto rep = validate(cfg.potential);
  if (!rep.admissible)
    throw std::invalid_argument("potential rejected: " + rep.reason);
  return cfg;
}

Config config_load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return config_parse(ss.str());
}

int aggregate_plot_series(const std::string& dir,
                          const std::string& out_path) {
  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream is(entry.path());
    std::string header;
    if (std::getline(is, header) && header == "level,value,stderr")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  std::ofstream os(out_path);
  os << "series,level,value,stderr\n";
  for (const auto& f : files) {
    const std::string stem = std::filesystem::path(f).stem().string();
    std::ifstream is(f);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line))
      if (!line.empty()) os << stem << ',' << line << '\n';
  }
  return static_cast<int>(files.size());
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::uint64_t file_content_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot hash " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return fnv1a64_str(ss.str());
}

void write_manifest(const Manifest& m, const std::string& path) {
  nlohmann::json j;
  j["experiment"] = m.experiment;
  j["config"] = m.config_text;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(m.config_hash));
  j["config_hash"] = hex;
  j["seed"] = m.seed;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["tool_version"] = "gradphi 0.1.0";
  auto outs = nlohmann::json::array();
  for (const auto& [file, hash] : m.outputs) {
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(hash));
    outs.push_back({{"file", file}, {"hash", hex}});
  }
  j["outputs"] = outs;
  std::ofstream os(path);
  os << j.dump(2) << '\n';
}

namespace {

void write_vec_csv_fields(std::ostream& os, const Eigen::VectorXd& v) {
  for (int i = 0; i < v.size(); ++i) os << ',' << v[i];
}

}  // namespace

void write_tension_csv(const std::vector<SurfaceTensionEstimate>& rows,
                       const std::string& path) {
  std::ofstream os(path);
  if (rows.empty()) {
    os << "quantity,d,n,tilt_0,tilt_1,value,stderr,method,seed\n";
    return;
  }
  os << "quantity,d,n";
  for (int i = 0; i < rows[0].tilt.size(); ++i) os << ",tilt_" << i;
  os << ",value,stderr,method,seed\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.quantity << ',' << r.d << ',' << r.n;
    write_vec_csv_fields(os, r.tilt);
    std::snprintf(buf, sizeof(buf), "%.17g", r.value);
    os << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", r.stderr_total);
    os << ',' << buf << ',' << r.method << ',' << r.seed << '\n';
  }
}

void write_exact_csv(const std::string& quantity, int d, double beta,
                     const std::vector<std::pair<int, Eigen::VectorXd>>& keys,
                     const std::vector<double>& values,
                     const std::string& path) {
  std::ofstream os(path);
  os << "d,n,beta";
  const int td = keys.empty() ? d : static_cast<int>(keys[0].second.size());
  for (int i = 0; i < td; ++i) os << ",tilt_" << i;
  os << ",quantity,value\n";
  char buf[64];
  for (size_t i = 0; i < keys.size(); ++i) {
    os << d << ',' << keys[i].first << ',' << beta;
    write_vec_csv_fields(os, keys[i].second);
    std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
    os << ',' << quantity << ',' << buf << '\n';
  }
}

void write_trace_csv(const Trace& trace, int chain_index,
                     const std::string& path) {
  std::ofstream os(path);
  os << "chain,step";
  for (const auto& name : trace.names) os << ',' << name;
  os << '\n';
  char buf[64];
  for (long i = 0; i < trace.length(); ++i) {
    os << chain_index << ',' << i;
    for (const auto& series : trace.series) {
      std::snprintf(buf, sizeof(buf), "%.17g", series[i]);
      os << ',' << buf;
    }
    os << '\n';
  }
}

void write_series_csv(const LevelSeries& series, const std::string& path) {
  std::ofstream os(path);
  os << "level,value,stderr\n";
  char buf[64];
  for (size_t i = 0; i < series.levels.size(); ++i) {
    os << series.levels[i];
    std::snprintf(buf, sizeof(buf), "%.17g", series.values[i]);
    os << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", series.stderrs[i]);
    os << ',' << buf << '\n';
  }
}

void write_defects_csv(const std::vector<Defect>& rows,
                       const std::string& path) {
  std::ofstream os(path);
  os << "n";
  const int td = rows.empty() ? 2 : static_cast<int>(rows[0].tilt.size());
  for (int i = 0; i < td; ++i) os << ",tilt_" << i;
  os << ",tau,stderr\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.n;
    write_vec_csv_fields(os, r.tilt);
    std::snprintf(buf, sizeof(buf), "%.17g", r.tau);
    os << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", r.stderr_total);
    os << ',' << buf << '\n';
  }
}

void write_check_reports_json(const std::vector<CheckReport>& reports,
                              const std::string& path) {
  auto arr = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j;
    j["id"] = r.id;
    j["inputs"] = r.inputs;
    j["constants"] = r.constants;
    j["margin"] = r.margin;
    j["pass"] = r.pass;
    j["inconclusive"] = r.inconclusive;
    j["provenance"] = r.provenance;
    j["notes"] = r.notes;
    arr.push_back(j);
  }
  std::ofstream os(path);
  os << arr.dump(2) << '\n';
}

void write_check_evidence_csv(const std::vector<CheckReport>& reports,
                              const std::string& path) {
  std::ofstream os(path);
  os << "check_id,key,value\n";
  char buf[64];
  for (const auto& r : reports)
    for (const auto& [key, value] : r.constants) {
      std::snprintf(buf, sizeof(buf), "%.17g", value);
      os << r.id << ',' << key << ',' << buf << '\n';
    }
}

std::vector<CheckReport> read_check_reports_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  nlohmann::json arr = nlohmann::json::parse(is);
  std::vector<CheckReport> out;
  for (const auto& j : arr) {
    CheckReport r;
    r.id = j.value("id", "");
    r.inputs = j.value("inputs", "");
    r.margin = j.value("margin", 0.0);
    r.pass = j.value("pass", false);
    r.inconclusive = j.value("inconclusive", false);
    r.provenance = j.value("provenance", "");
    r.notes = j.value("notes", "");
    if (j.contains("constants"))
      for (auto it = j["constants"].begin(); it != j["constants"].end(); ++it)
        r.constants[it.key()] = it.value().get<double>();
    out.push_back(std::move(r));
  }
  return out;
}

ReportSummary aggregate_reports(const std::string& dir,
                                const std::string& summary_csv_path) {
  ReportSummary summary;
  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.size() > 12 &&
        name.substr(name.size() - 12) == ".report.json")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files)
    for (auto& r : read_check_reports_json(f))
      summary.reports.push_back(std::move(r));

  std::ofstream os(summary_csv_path);
  os << "id,pass,inconclusive,margin,provenance,notes\n";
  for (const auto& r : summary.reports) {
    os << r.id << ',' << (r.pass ? 1 : 0) << ',' << (r.inconclusive ? 1 : 0)
       << ',' << r.margin << ',' << r.provenance << ",\"" << r.notes << "\"\n";
    if (r.inconclusive)
      ++summary.inconclusive;
    else if (r.pass)
      ++summary.passed;
    else
      ++summary.failed;
  }
  return summary;
}

}  // namespace gradphi
