#include "bridgecat/io.hpp"

#include "bridgecat/elements.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bridgecat {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_g12(double value) { return fmt::format("{:.12g}", value); }

namespace {

const char* kProperties = "species:S:1:pos:R:3:fixed:I:1:adsorbate:I:1";

/// Splits an extended-xyz header line into key=value pairs, honoring quotes.
std::map<std::string, std::string> parse_header_fields(const std::string& line,
                                                       const std::string& origin) {
  std::map<std::string, std::string> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    std::size_t eq = line.find('=', i);
    if (eq == std::string::npos) {
      throw std::runtime_error(origin + ": malformed header: missing '=' near '" +
                               line.substr(i) + "'");
    }
    std::string key = line.substr(i, eq - i);
    std::string value;
    i = eq + 1;
    if (i < line.size() && line[i] == '"') {
      std::size_t close = line.find('"', i + 1);
      if (close == std::string::npos) {
        throw std::runtime_error(origin + ": malformed header: unterminated quote");
      }
      value = line.substr(i + 1, close - i - 1);
      i = close + 1;
    } else {
      std::size_t end = i;
      while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
      value = line.substr(i, end - i);
      i = end;
    }
    fields[key] = value;
  }
  return fields;
}

std::vector<double> parse_doubles(const std::string& text, std::size_t expected,
                                  const std::string& origin, const std::string& what) {
  std::istringstream is(text);
  std::vector<double> values;
  double v = 0.0;
  while (is >> v) values.push_back(v);
  if (values.size() != expected) {
    throw std::runtime_error(origin + ": malformed header: " + what + " needs " +
                             std::to_string(expected) + " numbers");
  }
  return values;
}

} // namespace

std::string structure_to_xyz(const Structure& structure) {
  std::ostringstream os;
  os << structure.size() << "\n";
  const Mat3& cell = structure.lattice.cell();
  os << "Lattice=\"";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      os << format_g12(cell(r, c));
      if (r != 2 || c != 2) os << " ";
    }
  }
  os << "\" pbc=\"";
  const auto& periodic = structure.lattice.periodic();
  os << (periodic[0] ? "T" : "F") << " " << (periodic[1] ? "T" : "F") << " "
     << (periodic[2] ? "T" : "F") << "\"";
  os << " Properties=" << kProperties;
  if (!structure.id.empty()) os << " id=\"" << structure.id << "\"";
  os << "\n";
  for (Eigen::Index i = 0; i < structure.size(); ++i) {
    os << z_to_symbol(structure.atomic_numbers[static_cast<std::size_t>(i)]) << " "
       << format_g12(structure.positions(i, 0)) << " " << format_g12(structure.positions(i, 1))
       << " " << format_g12(structure.positions(i, 2)) << " "
       << (structure.fixed[static_cast<std::size_t>(i)] ? 1 : 0) << " "
       << (structure.adsorbate[static_cast<std::size_t>(i)] ? 1 : 0) << "\n";
  }
  return os.str();
}

Structure structure_from_xyz(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(origin + ": empty file");
  long n = 0;
  try {
    n = std::stol(line);
  } catch (const std::exception&) {
    throw std::runtime_error(origin + ": malformed header: first line must be the atom count");
  }
  if (n < 1) throw std::runtime_error(origin + ": atom count must be positive");

  if (!std::getline(is, line)) {
    throw std::runtime_error(origin + ": malformed header: missing comment line");
  }
  auto fields = parse_header_fields(line, origin);
  if (fields.find("Lattice") == fields.end()) {
    throw std::runtime_error(origin + ": malformed header: missing Lattice");
  }
  auto cell_values = parse_doubles(fields.at("Lattice"), 9, origin, "Lattice");
  Mat3 cell;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) cell(r, c) = cell_values[static_cast<std::size_t>(3 * r + c)];
  }
  std::array<bool, 3> periodic = {true, true, false};
  if (fields.count("pbc") != 0) {
    std::istringstream ps(fields.at("pbc"));
    std::string token;
    for (int k = 0; k < 3; ++k) {
      if (!(ps >> token)) {
        throw std::runtime_error(origin + ": malformed header: pbc needs three flags");
      }
      if (token == "T" || token == "True" || token == "true" || token == "1") {
        periodic[static_cast<std::size_t>(k)] = true;
      } else if (token == "F" || token == "False" || token == "false" || token == "0") {
        periodic[static_cast<std::size_t>(k)] = false;
      } else {
        throw std::runtime_error(origin + ": malformed header: bad pbc flag '" + token + "'");
      }
    }
  }
  if (periodic[0] && periodic[1] && periodic[2]) {
    throw std::runtime_error(origin + ": bulk periodicity unsupported (pbc=\"T T T\")");
  }

  std::vector<int> numbers;
  Positions positions(n, 3);
  std::vector<bool> fixed;
  std::vector<bool> adsorbate;
  for (long i = 0; i < n; ++i) {
    if (!std::getline(is, line)) {
      throw std::runtime_error(origin + ": atom count mismatch: expected " + std::to_string(n) +
                               " atoms, file ends at line " + std::to_string(i + 2));
    }
    std::istringstream ls(line);
    std::string symbol;
    double x = 0.0, y = 0.0, z = 0.0;
    int fix = 0, ads = 0;
    if (!(ls >> symbol >> x >> y >> z >> fix >> ads)) {
      throw std::runtime_error(origin + ": malformed atom line " + std::to_string(i + 3));
    }
    numbers.push_back(symbol_to_z(symbol)); // throws for unknown symbols
    positions(i, 0) = x;
    positions(i, 1) = y;
    positions(i, 2) = z;
    fixed.push_back(fix != 0);
    adsorbate.push_back(ads != 0);
  }
  std::string rest;
  while (std::getline(is, rest)) {
    if (!rest.empty() && rest.find_first_not_of(" \t\r") != std::string::npos) {
      throw std::runtime_error(origin + ": atom count mismatch: trailing atom lines beyond " +
                               std::to_string(n));
    }
  }

  std::string id;
  if (fields.count("id") != 0) id = fields.at("id");
  return Structure(std::move(numbers), std::move(positions), std::move(fixed),
                   std::move(adsorbate), Lattice(cell, periodic), id);
}

Structure read_structure(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open structure file: " + path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return structure_from_xyz(buffer.str(), path);
}

void write_structure(const Structure& structure, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open structure file for writing: " + path);
  os << structure_to_xyz(structure);
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest: " + path);
  std::vector<ManifestRecord> records;
  std::map<std::string, bool> seen;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad JSON record: " +
                               e.what());
    }
    ManifestRecord record;
    record.id = j.at("id").get<std::string>();
    record.initial_path = j.at("initial_path").get<std::string>();
    if (j.count("relaxed_path") != 0 && !j.at("relaxed_path").is_null()) {
      record.relaxed_path = j.at("relaxed_path").get<std::string>();
    }
    if (j.count("adsorbate") != 0) record.adsorbate = j.at("adsorbate").get<std::string>();
    if (j.count("facet") != 0) record.facet = j.at("facet").get<std::string>();
    if (j.count("tags") != 0) record.tags = j.at("tags").get<std::vector<std::string>>();
    if (seen.count(record.id) != 0) {
      throw std::runtime_error(path + ": duplicate manifest id '" + record.id + "'");
    }
    seen[record.id] = true;
    records.push_back(std::move(record));
  }
  return records;
}

void write_manifest(const std::vector<ManifestRecord>& records, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open manifest for writing: " + path);
  for (const auto& record : records) {
    json j;
    j["id"] = record.id;
    j["initial_path"] = record.initial_path;
    if (!record.relaxed_path.empty()) j["relaxed_path"] = record.relaxed_path;
    if (!record.adsorbate.empty()) j["adsorbate"] = record.adsorbate;
    if (!record.facet.empty()) j["facet"] = record.facet;
    if (!record.tags.empty()) j["tags"] = record.tags;
    os << j.dump() << "\n";
  }
}

namespace {

std::string resolve(const std::string& manifest_path, const std::string& file_path) {
  fs::path p(file_path);
  if (p.is_absolute()) return file_path;
  return (fs::path(manifest_path).parent_path() / p).string();
}

} // namespace

std::vector<StructurePair> load_pairs(const std::string& manifest_path) {
  std::vector<StructurePair> pairs;
  for (const auto& record : read_manifest(manifest_path)) {
    if (record.relaxed_path.empty()) continue;
    StructurePair pair;
    pair.initial = read_structure(resolve(manifest_path, record.initial_path));
    pair.relaxed = read_structure(resolve(manifest_path, record.relaxed_path));
    pair.initial.id = record.id;
    pair.relaxed.id = record.id;
    pair.adsorbate_species = record.adsorbate;
    pair.facet = record.facet;
    pair.validate();
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<Structure> load_initial_structures(const std::string& manifest_path) {
  std::vector<Structure> structures;
  for (const auto& record : read_manifest(manifest_path)) {
    Structure s = read_structure(resolve(manifest_path, record.initial_path));
    s.id = record.id;
    structures.push_back(std::move(s));
  }
  return structures;
}

namespace {

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += "\"\"";
    else quoted += c;
  }
  quoted += "\"";
  return quoted;
}

} // namespace

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open CSV for writing: " + path);
  for (std::size_t c = 0; c < header.size(); ++c) {
    os << csv_field(header[c]) << (c + 1 == header.size() ? "" : ",");
  }
  os << "\r\n";
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw std::invalid_argument("CSV row width mismatch");
    for (std::size_t c = 0; c < row.size(); ++c) {
      os << csv_field(row[c]) << (c + 1 == row.size() ? "" : ",");
    }
    os << "\r\n";
  }
}

void write_eval_csv(const EvalReport& report, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(report.entries.size());
  for (const auto& entry : report.entries) {
    rows.push_back({entry.id, format_g12(entry.dmae), entry.label});
  }
  write_csv(path, {"id", "dmae", "label"}, rows);
}

void write_eval_summary_json(const EvalReport& report, const std::string& path) {
  json j;
  j["count"] = report.entries.size();
  j["mean_dmae"] = report.mean_dmae();
  if (!report.entries.empty()) {
    j["percentiles"] = {{"p50", report.percentile_dmae(50.0)},
                        {"p90", report.percentile_dmae(90.0)},
                        {"p99", report.percentile_dmae(99.0)}};
  }
  json counts = json::object();
  for (const auto& [label, count] : report.counts_by_label()) counts[label] = count;
  j["counts_by_label"] = counts;
  if (report.eta.has_value()) j["eta"] = *report.eta;
  if (report.epsilon.has_value()) j["epsilon"] = *report.epsilon;
  json entries = json::array();
  for (const auto& entry : report.entries) {
    entries.push_back({{"id", entry.id}, {"dmae", entry.dmae}, {"label", entry.label}});
  }
  j["entries"] = entries;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open JSON for writing: " + path);
  os << j.dump(2) << "\n";
}

EvalReport read_eval_summary_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open JSON: " + path);
  json j = json::parse(is);
  EvalReport report;
  for (const auto& entry : j.at("entries")) {
    report.entries.push_back(EvalEntry{entry.at("id").get<std::string>(),
                                       entry.at("dmae").get<double>(),
                                       entry.at("label").get<std::string>()});
  }
  if (j.count("eta") != 0) report.eta = j.at("eta").get<double>();
  if (j.count("epsilon") != 0) report.epsilon = j.at("epsilon").get<double>();
  return report;
}

void write_candidates_csv(const std::vector<Candidate>& candidates, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(candidates.size());
  for (const auto& c : candidates) {
    rows.push_back({c.surface_id, to_string(c.site.kind), format_g12(c.site.position.x()),
                    format_g12(c.site.position.y()), format_g12(c.site.position.z()),
                    format_g12(c.adsorption_energy), format_g12(c.offset),
                    c.refined ? "1" : "0"});
  }
  write_csv(path,
            {"surface", "site_kind", "site_x", "site_y", "site_z", "adsorption_energy_ev",
             "offset_ev", "refined"},
            rows);
}

void write_labels_jsonl(const std::vector<OutlierLabel>& labels, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open labels file for writing: " + path);
  for (const auto& label : labels) {
    json j;
    j["id"] = label.id;
    j["is_outlier"] = label.is_outlier;
    j["source"] = to_string(label.source);
    if (label.dmae.has_value()) j["dmae"] = *label.dmae;
    j["noise_coefficient"] = label.noise_coefficient;
    j["flags"] = {{"collision", label.report.collision},
                  {"dissociation", label.report.dissociation},
                  {"desorption", label.report.desorption},
                  {"reconstruction", label.report.reconstruction}};
    os << j.dump() << "\n";
  }
}

std::vector<OutlierLabel> read_labels_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open labels file: " + path);
  std::vector<OutlierLabel> labels;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line);
    OutlierLabel label;
    label.id = j.at("id").get<std::string>();
    label.is_outlier = j.at("is_outlier").get<bool>();
    std::string source = j.at("source").get<std::string>();
    if (source == "dmae_threshold") label.source = OutlierSource::kDmaeThreshold;
    else if (source == "heuristic") label.source = OutlierSource::kHeuristic;
    else if (source == "both") label.source = OutlierSource::kBoth;
    else throw std::runtime_error(path + ": unknown label source " + source);
    if (j.count("dmae") != 0) label.dmae = j.at("dmae").get<double>();
    label.noise_coefficient = j.at("noise_coefficient").get<double>();
    const auto& flags = j.at("flags");
    label.report.collision = flags.at("collision").get<bool>();
    label.report.dissociation = flags.at("dissociation").get<bool>();
    label.report.desorption = flags.at("desorption").get<bool>();
    label.report.reconstruction = flags.at("reconstruction").get<bool>();
    labels.push_back(std::move(label));
  }
  return labels;
}

std::map<std::string, std::string> parse_key_value_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty key or value");
    }
    kv[key] = value;
  }
  return kv;
}

namespace {

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "True" || value == "true" || value == "1") return true;
  if (value == "False" || value == "false" || value == "0") return false;
  throw std::invalid_argument("config key " + key + " must be True or False, got " + value);
}

} // namespace

RunConfig run_config_from_map(const std::map<std::string, std::string>& kv) {
  RunConfig config;
  for (const auto& [key, value] : kv) {
    if (key == "flow") {
      if (value != "bbdm") throw std::invalid_argument("flow '" + value + "' unsupported");
    } else if (key == "coord") {
      if (value != "cartesian") throw std::invalid_argument("coord '" + value + "' unsupported");
    } else if (key == "epoch") {
      config.train.epochs = std::stoi(value);
    } else if (key == "batch_size") {
      config.train.batch_size = std::stoi(value);
    } else if (key == "lr") {
      config.train.learning_rate = std::stod(value);
    } else if (key == "schedule_gamma") {
      config.train.schedule_gamma = std::stod(value);
    } else if (key == "clip_grad") {
      config.train.grad_clip_norm = parse_bool(value, key) ? 1.0 : 0.0;
    } else if (key == "loss_type") {
      config.train.loss = loss_type_from_string(value);
    } else if (key == "fixed") {
      if (!parse_bool(value, key)) {
        throw std::invalid_argument("fixed = False unsupported; fixed masks come from data");
      }
    } else if (key == "train_objective") {
      if (value != "grad") {
        throw std::invalid_argument("train_objective '" + value + "' unsupported");
      }
    } else if (key == "cutoff") {
      config.model.cutoff = std::stod(value);
    } else if (key == "hidden_channels") {
      config.model.hidden = std::stoi(value);
    } else if (key == "num_rbf") {
      config.model.num_rbf = std::stoi(value);
    } else if (key == "num_layers") {
      config.model.layers = std::stoi(value);
    } else if (key == "n_frequencies") {
      config.model.n_frequencies = std::stoi(value);
    } else if (key == "num_timesteps") {
      config.num_timesteps = std::stoi(value);
    } else if (key == "sample_mt_mode") {
      config.mt_mode = schedule_mode_from_string(value);
    } else if (key == "max_var") {
      config.max_var = std::stod(value);
    } else if (key == "sample_steps") {
      config.sampler.sample_steps = std::stoi(value);
    } else if (key == "eta") {
      config.sampler.eta = std::stod(value);
    } else if (key == "sample_per_epoch") {
      config.train.sample_per_epoch = std::stoi(value);
    } else if (key == "seed") {
      config.train.seed = static_cast<std::uint64_t>(std::stoull(value));
      config.sampler.seed = config.train.seed;
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
  config.model.validate();
  config.train.validate();
  if (config.max_var < 0.0) throw std::invalid_argument("max_var must be nonnegative");
  if (config.num_timesteps < 2) throw std::invalid_argument("num_timesteps must be >= 2");
  return config;
}

RunConfig read_run_config(const std::string& path) {
  return run_config_from_map(parse_key_value_file(path));
}

} // namespace bridgecat
