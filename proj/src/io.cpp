#include "rtip/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace rtip {

namespace {

const std::vector<std::string>& model_keys() {
  static const std::vector<std::string> keys = {
      "beta", "lambda_r", "L",       "a",       "r",
      "Z",    "tol_bvp",  "tol_ode", "tol_newton"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError(what + ": empty number");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    throw ConfigError(what + ": not a number: '" + t + "'");
  return v;
}

KvConfig KvConfig::from_string(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": empty key");
    cfg.set(key, value);
  }
  return cfg;
}

KvConfig KvConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

const std::string* KvConfig::find(const std::string& key) const {
  for (const auto& [k, v] : items_)
    if (k == key) return &v;
  return nullptr;
}

bool KvConfig::has(const std::string& key) const { return find(key) != nullptr; }

const std::string& KvConfig::at(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw ConfigError("missing config key: " + key);
  return *v;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  return v ? parse_double(*v, key) : fallback;
}

int KvConfig::get_int(const std::string& key, int fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  const double d = parse_double(*v, key);
  const int i = int(d);
  if (double(i) != d) throw ConfigError(key + ": not an integer: '" + *v + "'");
  return i;
}

std::string KvConfig::get_string(const std::string& key,
                                 std::string fallback) const {
  const std::string* v = find(key);
  return v ? *v : std::move(fallback);
}

std::vector<double> KvConfig::get_list(const std::string& key) const {
  const std::string* v = find(key);
  std::vector<double> out;
  if (!v) return out;
  std::istringstream in(*v);
  std::string item;
  while (std::getline(in, item, ','))
    out.push_back(parse_double(item, key));
  return out;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : items_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  items_.emplace_back(key, value);
}

void KvConfig::set(const std::string& key, double value) {
  set(key, format_double(value));
}

void KvConfig::set(const std::string& key, int value) {
  set(key, std::to_string(value));
}

void KvConfig::set_list(const std::string& key,
                        const std::vector<double>& values) {
  std::string joined;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) joined += ',';
    joined += format_double(values[i]);
  }
  set(key, joined);
}

void KvConfig::apply_model(ModelParams& p) const {
  p.beta = get_double("beta", p.beta);
  p.lambda_r = get_double("lambda_r", p.lambda_r);
  p.L = get_double("L", p.L);
  p.a = get_double("a", p.a);
  p.r = get_double("r", p.r);
  p.Z = get_double("Z", p.Z);
  p.tol_bvp = get_double("tol_bvp", p.tol_bvp);
  p.tol_ode = get_double("tol_ode", p.tol_ode);
  p.tol_newton = get_double("tol_newton", p.tol_newton);
  p.validate();
}

void KvConfig::expect_known(const std::vector<std::string>& extra) const {
  for (const auto& [k, v] : items_) {
    bool known = false;
    for (const auto& m : model_keys()) known = known || k == m;
    for (const auto& e : extra) known = known || k == e;
    if (!known) throw ConfigError("unknown config key: " + k);
  }
}

std::string KvConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : items_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path dir = path.parent_path().empty() ? fs::path(".")
                                                  : path.parent_path();
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path tmp = dir / (path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  char buf[40];
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw IoError("csv row width does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      std::snprintf(buf, sizeof buf, "%.16e", row[i]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  atomic_write(path, csv_table(header, rows));
}

void write_manifest(const fs::path& dir, const std::string& subcommand,
                    const KvConfig& config,
                    const std::vector<std::string>& outputs) {
  nlohmann::ordered_json j;
  j["tool"] = "rtip";
  j["subcommand"] = subcommand;
  nlohmann::ordered_json jc = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config.items()) jc[k] = v;
  j["config"] = std::move(jc);
  j["outputs"] = outputs;
  atomic_write(dir / "manifest.json", j.dump(2) + "\n");
}

Manifest read_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read manifest: " + file.string());
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest " + file.string() + ": " + e.what());
  }
  Manifest m;
  try {
    m.subcommand = j.at("subcommand").get<std::string>();
    for (const auto& [k, v] : j.at("config").items())
      m.config.set(k, v.get<std::string>());
    if (j.contains("outputs"))
      m.outputs = j.at("outputs").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest " + file.string() + ": " + e.what());
  }
  return m;
}

}  // namespace rtip
