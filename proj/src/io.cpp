#include "dsse/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dsse/error.hpp"
#include "dsse/metrics.hpp"

namespace dsse {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dir(const fs::path& dir);

std::ofstream open_for_write(const fs::path& path) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& text, const std::string& context) {
  const std::string t = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("malformed number '" + t + "' in " + context);
  }
}

Complex parse_pair(const json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw InvalidArgument(context + ": expected a [re, im] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

json pair_json(Complex c) { return json::array({c.real(), c.imag()}); }

std::vector<Phase> parse_phases(const json& j, const std::string& context) {
  std::vector<Phase> phases;
  if (j.is_string()) {
    for (char c : j.get<std::string>()) phases.push_back(phase_from_letter(c));
  } else if (j.is_array()) {
    for (const auto& item : j) {
      const auto s = item.get<std::string>();
      if (s.size() != 1) throw InvalidArgument(context + ": phase must be a single letter");
      phases.push_back(phase_from_letter(s[0]));
    }
  } else {
    throw InvalidArgument(context + ": phases must be a string like \"abc\" or a list");
  }
  return phases;
}

std::vector<std::string> phase_labels(const std::vector<PhaseId>& phases) {
  std::vector<std::string> out;
  out.reserve(phases.size());
  for (const auto& p : phases) out.push_back(p.label());
  return out;
}

std::vector<PhaseId> parse_labels(const json& j) {
  std::vector<PhaseId> out;
  for (const auto& item : j) out.push_back(PhaseId::parse(item.get<std::string>()));
  return out;
}

void write_plain_matrix(const Eigen::MatrixXd& m, const fs::path& path) {
  auto out = open_for_write(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_plain_matrix(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Eigen::MatrixXd m(rows, cols);
  std::string line;
  Eigen::Index i = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (i >= rows) throw InvalidArgument(path.string() + ": too many rows");
    const auto cells = split(line, ',');
    if (static_cast<Eigen::Index>(cells.size()) != cols) {
      throw InvalidArgument(path.string() + ": row " + std::to_string(i + 1) + " has " +
                            std::to_string(cells.size()) + " values, expected " +
                            std::to_string(cols));
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = parse_number(cells[static_cast<std::size_t>(j)], path.string());
    }
    ++i;
  }
  if (i != rows) throw InvalidArgument(path.string() + ": expected " + std::to_string(rows) + " rows");
  return m;
}

// Labeled matrix: header "row,<col labels>", one labeled line per row. Cells
// outside `mask` (when given) are left empty.
void write_labeled_matrix(const Eigen::MatrixXd& m, const std::vector<std::string>& row_labels,
                          const std::vector<std::string>& col_labels, const fs::path& path,
                          const ObservationMask* mask) {
  auto out = open_for_write(path);
  out << "row";
  for (const auto& c : col_labels) out << ',' << c;
  out << '\n';
  Eigen::MatrixXd known;
  if (mask) known = mask->indicator();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << row_labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << ',';
      if (!mask || known(i, j) != 0.0) out << format_double(m(i, j));
    }
    out << '\n';
  }
}

// Reads a labeled matrix; empty cells become zero and are reported in `known`
// as 0.
Eigen::MatrixXd read_labeled_matrix(const fs::path& path, std::size_t rows, std::size_t cols,
                                    Eigen::MatrixXd* known) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(path.string() + ": empty file");
  const auto header = split(trim(line), ',');
  if (header.size() != cols + 1) {
    throw InvalidArgument(path.string() + ": header has " + std::to_string(header.size() - 1) +
                          " columns, expected " + std::to_string(cols));
  }
  const auto r = static_cast<Eigen::Index>(rows);
  const auto c = static_cast<Eigen::Index>(cols);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(r, c);
  if (known) *known = Eigen::MatrixXd::Zero(r, c);
  Eigen::Index i = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (i >= r) throw InvalidArgument(path.string() + ": too many rows");
    const auto cells = split(line, ',');
    if (cells.size() != cols + 1) {
      throw InvalidArgument(path.string() + ": row " + std::to_string(i + 1) +
                            " has the wrong number of cells");
    }
    for (Eigen::Index j = 0; j < c; ++j) {
      const auto& cell = cells[static_cast<std::size_t>(j + 1)];
      if (trim(cell).empty()) continue;
      m(i, j) = parse_number(cell, path.string());
      if (known) (*known)(i, j) = 1.0;
    }
    ++i;
  }
  if (i != r) throw InvalidArgument(path.string() + ": expected " + std::to_string(rows) + " rows");
  return m;
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

}  // namespace

Feeder parse_feeder_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("feeder JSON: ") + e.what());
  }
  try {
    Feeder feeder;
    if (doc.contains("bases")) {
      feeder.base_power = doc["bases"].value("power_va", feeder.base_power);
      feeder.base_voltage = doc["bases"].value("voltage_v", feeder.base_voltage);
    }
    const auto& slack = doc.at("slack_voltage");
    if (!slack.is_array()) throw InvalidArgument("slack_voltage must be a list of [re, im] pairs");
    feeder.slack_voltage.resize(static_cast<Eigen::Index>(slack.size()));
    for (std::size_t i = 0; i < slack.size(); ++i) {
      feeder.slack_voltage(static_cast<Eigen::Index>(i)) = parse_pair(slack[i], "slack_voltage");
    }
    for (const auto& b : doc.at("buses")) {
      Bus bus;
      bus.index = b.at("index").get<std::size_t>();
      bus.phases = parse_phases(b.at("phases"), "bus " + std::to_string(bus.index));
      feeder.buses.push_back(std::move(bus));
    }
    for (const auto& l : doc.at("lines")) {
      Line line;
      line.from = l.at("from").get<std::size_t>();
      line.to = l.at("to").get<std::size_t>();
      const std::string context =
          "line " + std::to_string(line.from) + "-" + std::to_string(line.to);
      const auto& z = l.at("impedance");
      const auto k = static_cast<Eigen::Index>(z.size());
      line.impedance.resize(k, k);
      for (Eigen::Index i = 0; i < k; ++i) {
        const auto& row = z[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != k) {
          throw InvalidArgument(context + ": impedance must be a square matrix");
        }
        for (Eigen::Index j = 0; j < k; ++j) {
          line.impedance(i, j) = parse_pair(row[static_cast<std::size_t>(j)], context);
        }
      }
      feeder.lines.push_back(std::move(line));
    }
    validate(feeder);
    return feeder;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("feeder JSON: ") + e.what());
  }
}

std::string feeder_to_json(const Feeder& feeder) {
  json doc;
  doc["bases"] = {{"power_va", feeder.base_power}, {"voltage_v", feeder.base_voltage}};
  doc["slack_voltage"] = json::array();
  for (Eigen::Index i = 0; i < feeder.slack_voltage.size(); ++i) {
    doc["slack_voltage"].push_back(pair_json(feeder.slack_voltage(i)));
  }
  doc["buses"] = json::array();
  for (const auto& b : feeder.buses) {
    std::string phases;
    for (Phase p : b.phases) phases += phase_letter(p);
    doc["buses"].push_back({{"index", b.index}, {"phases", phases}});
  }
  doc["lines"] = json::array();
  for (const auto& l : feeder.lines) {
    json z = json::array();
    for (Eigen::Index i = 0; i < l.impedance.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < l.impedance.cols(); ++j) row.push_back(pair_json(l.impedance(i, j)));
      z.push_back(row);
    }
    doc["lines"].push_back({{"from", l.from}, {"to", l.to}, {"impedance", z}});
  }
  return doc.dump(1);
}

Feeder load_feeder(const fs::path& path) {
  try {
    return parse_feeder_json(read_text(path));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

void save_feeder(const Feeder& feeder, const fs::path& path) {
  auto out = open_for_write(path);
  out << feeder_to_json(feeder) << '\n';
}

LoadProfile parse_profile_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("profile CSV is empty");
  LoadProfile profile;
  for (const auto& cell : split(trim(line), ',')) profile.phases.push_back(PhaseId::parse(trim(cell)));
  const auto n = static_cast<Eigen::Index>(profile.phases.size());
  std::vector<Eigen::VectorXcd> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (static_cast<Eigen::Index>(cells.size()) != n) {
      throw InvalidArgument("profile row " + std::to_string(rows.size() + 1) + " has " +
                            std::to_string(cells.size()) + " cells, expected " + std::to_string(n));
    }
    Eigen::VectorXcd row(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& cell = cells[static_cast<std::size_t>(j)];
      const auto colon = cell.find(':');
      if (colon == std::string::npos) {
        throw InvalidArgument("profile cell '" + cell + "' is not of the form re:im");
      }
      row(j) = Complex(parse_number(cell.substr(0, colon), "profile"),
                       parse_number(cell.substr(colon + 1), "profile"));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidArgument("profile has no time steps");
  profile.injections.resize(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    profile.injections.row(static_cast<Eigen::Index>(t)) = rows[t].transpose();
  }
  return profile;
}

LoadProfile load_profile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return parse_profile_csv(in);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

void save_profile(const LoadProfile& profile, const fs::path& path) {
  auto out = open_for_write(path);
  for (std::size_t j = 0; j < profile.phases.size(); ++j) {
    if (j) out << ',';
    out << profile.phases[j].label();
  }
  out << '\n';
  for (Eigen::Index t = 0; t < profile.injections.rows(); ++t) {
    for (Eigen::Index j = 0; j < profile.injections.cols(); ++j) {
      if (j) out << ',';
      const Complex s = profile.injections(t, j);
      out << format_double(s.real()) << ':' << format_double(s.imag());
    }
    out << '\n';
  }
}

void export_linear_model(const LinearPowerFlowModel& model, const fs::path& dir,
                         std::size_t total_phases) {
  ensure_dir(dir);
  const std::pair<const char*, const Eigen::MatrixXd*> blocks[] = {
      {"A1.csv", &model.A1}, {"A2.csv", &model.A2}, {"A3.csv", &model.A3},
      {"A4.csv", &model.A4}, {"C1.csv", &model.C1}, {"C2.csv", &model.C2}};
  for (const auto& [name, m] : blocks) write_plain_matrix(*m, dir / name);
  {
    auto out = open_for_write(dir / "w.csv");
    out << "phase,re,im\n";
    for (std::size_t i = 0; i < model.ordering.size(); ++i) {
      const Complex w = model.w(static_cast<Eigen::Index>(i));
      out << model.ordering[i].label() << ',' << format_double(w.real()) << ','
          << format_double(w.imag()) << '\n';
    }
  }
  json meta;
  meta["phases"] = phase_labels(model.ordering);
  meta["non_slack_phases"] = model.ordering.size();
  meta["total_phases"] = total_phases;
  meta["linearization"] = kLinearizationVariant;
  meta["files"] = {"A1.csv", "A2.csv", "A3.csv", "A4.csv", "C1.csv", "C2.csv", "w.csv"};
  auto out = open_for_write(dir / "linear_model.json");
  out << meta.dump(1) << '\n';
}

LinearPowerFlowModel import_linear_model(const fs::path& dir) {
  const json meta = parse_json_file(dir / "linear_model.json");
  std::vector<PhaseId> ordering;
  try {
    ordering = parse_labels(meta.at("phases"));
  } catch (const json::exception& e) {
    throw InvalidArgument((dir / "linear_model.json").string() + ": " + e.what());
  }
  const auto n = static_cast<Eigen::Index>(ordering.size());
  auto block = [&](const char* name) { return read_plain_matrix(dir / name, n, n); };

  std::ifstream in(dir / "w.csv");
  if (!in) throw IoError("cannot open " + (dir / "w.csv").string());
  std::string line;
  std::getline(in, line);
  Eigen::VectorXcd w(n);
  Eigen::Index i = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (cells.size() != 3 || i >= n) throw InvalidArgument("w.csv is malformed");
    if (PhaseId::parse(cells[0]) != ordering[static_cast<std::size_t>(i)]) {
      throw InvalidArgument("w.csv phase order does not match linear_model.json");
    }
    w(i++) = Complex(parse_number(cells[1], "w.csv"), parse_number(cells[2], "w.csv"));
  }
  if (i != n) throw InvalidArgument("w.csv has the wrong number of rows");
  return LinearPowerFlowModel::from_blocks(block("A1.csv"), block("A2.csv"), block("A3.csv"),
                                           block("A4.csv"), block("C1.csv"), block("C2.csv"), w,
                                           std::move(ordering));
}

std::vector<std::string> measurement_row_labels(std::size_t steps) {
  static const char* kNames[] = {"re_v", "im_v", "abs_v", "p", "q"};
  std::vector<std::string> out;
  for (std::size_t t = 0; t < steps; ++t) {
    for (const char* name : kNames) out.push_back("t" + std::to_string(t + 1) + "." + name);
  }
  return out;
}

void write_dataset(const MeasurementDataset& dataset, const fs::path& dir) {
  ensure_dir(dir);
  const auto& obs = dataset.observed;
  const auto labels = phase_labels(dataset.phases);
  const auto row_labels = measurement_row_labels(obs.steps);
  write_labeled_matrix(obs.values, row_labels, labels, dir / "masked.csv", &dataset.mask);

  json meta;
  meta["rows"] = obs.rows();
  meta["cols"] = obs.cols();
  meta["steps"] = obs.steps;
  meta["phases"] = labels;
  meta["row_labels"] = row_labels;
  json entries = json::array();
  for (const auto& [r, c] : dataset.mask.entries) entries.push_back({r, c});
  meta["mask"] = {{"policy", to_string(dataset.mask.policy)},
                  {"fraction", dataset.mask.fraction},
                  {"seed", dataset.mask.seed},
                  {"count", dataset.mask.size()},
                  {"entries", entries}};
  meta["noise"] = {{"relative_std", dataset.noise.relative_std}, {"seed", dataset.noise.seed}};
  meta["files"] = {{"masked", "masked.csv"}};

  if (dataset.has_truth()) {
    write_labeled_matrix(dataset.truth.values, row_labels, labels, dir / "truth.csv", nullptr);
    const auto state = extract_state(dataset.truth.values, SelectorMaps(dataset.truth.steps));
    auto out = open_for_write(dir / "state.csv");
    out << "t,phase,magnitude,angle_deg\n";
    for (Eigen::Index t = 0; t < state.magnitude.rows(); ++t) {
      for (Eigen::Index j = 0; j < state.magnitude.cols(); ++j) {
        out << t + 1 << ',' << labels[static_cast<std::size_t>(j)] << ','
            << format_double(state.magnitude(t, j)) << ',' << format_double(state.angle_deg(t, j))
            << '\n';
      }
    }
    meta["files"]["truth"] = "truth.csv";
    meta["files"]["state"] = "state.csv";
  }
  auto out = open_for_write(dir / "matrix.json");
  out << meta.dump(1) << '\n';
}

MeasurementDataset read_dataset(const fs::path& dir) {
  const auto sidecar = dir / "matrix.json";
  const json meta = parse_json_file(sidecar);
  MeasurementDataset ds;
  try {
    const auto rows = meta.at("rows").get<std::size_t>();
    const auto cols = meta.at("cols").get<std::size_t>();
    const auto steps = meta.at("steps").get<std::size_t>();
    if (rows != kRowsPerStep * steps || steps == 0) {
      throw InvalidArgument(sidecar.string() + ": rows must equal 5 * steps");
    }
    ds.phases = parse_labels(meta.at("phases"));
    if (ds.phases.size() != cols) throw InvalidArgument(sidecar.string() + ": phase list length != cols");

    const auto& mask = meta.at("mask");
    ds.mask.rows = rows;
    ds.mask.cols = cols;
    ds.mask.policy = mask_policy_from_string(mask.at("policy").get<std::string>());
    ds.mask.fraction = mask.at("fraction").get<double>();
    ds.mask.seed = mask.at("seed").get<std::uint64_t>();
    for (const auto& e : mask.at("entries")) {
      const auto r = e.at(0).get<std::size_t>();
      const auto c = e.at(1).get<std::size_t>();
      if (r >= rows || c >= cols) throw InvalidArgument(sidecar.string() + ": mask entry out of range");
      ds.mask.entries.emplace_back(r, c);
    }
    std::sort(ds.mask.entries.begin(), ds.mask.entries.end());
    if (meta.contains("noise")) {
      ds.noise.relative_std = meta["noise"].value("relative_std", 0.0);
      ds.noise.seed = meta["noise"].value("seed", std::uint64_t{0});
    }

    const auto files = meta.value("files", json::object());
    Eigen::MatrixXd known;
    ds.observed.steps = steps;
    ds.observed.values = read_labeled_matrix(dir / files.value("masked", "masked.csv"), rows, cols, &known);
    for (const auto& [r, c] : ds.mask.entries) {
      if (known(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) == 0.0) {
        throw InvalidArgument("masked.csv has an empty cell at a known index (" +
                              std::to_string(r) + ", " + std::to_string(c) + ")");
      }
    }
    if (files.contains("truth")) {
      ds.truth.steps = steps;
      ds.truth.values = read_labeled_matrix(dir / files["truth"].get<std::string>(), rows, cols, nullptr);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(sidecar.string() + ": " + e.what());
  }
  return ds;
}

void write_spectrum_csv(const std::vector<std::pair<std::size_t, SingularValueSpectrum>>& spectra,
                        const fs::path& path) {
  auto out = open_for_write(path);
  out << "T,index,normalized,cumulative\n";
  for (const auto& [steps, spectrum] : spectra) {
    for (Eigen::Index i = 0; i < spectrum.normalized.size(); ++i) {
      out << steps << ',' << i + 1 << ',' << format_double(spectrum.normalized(i)) << ','
          << format_double(spectrum.cumulative(i)) << '\n';
    }
  }
}

void write_trace_csv(const IterationTrace& trace, const fs::path& path) {
  auto out = open_for_write(path);
  out << "iteration,objective,objective_after_u,step_u,step_v,seconds\n";
  out << "0," << format_double(trace.initial_objective) << ",,,,\n";
  for (std::size_t k = 0; k < trace.iterations.size(); ++k) {
    const auto& it = trace.iterations[k];
    out << k + 1 << ',' << format_double(it.objective) << ',' << format_double(it.objective_after_u)
        << ',' << format_double(it.step_u) << ',' << format_double(it.step_v) << ','
        << format_double(it.seconds) << '\n';
  }
}

void write_estimate(const EstimateResult& result, const MeasurementDataset& dataset,
                    const fs::path& dir) {
  ensure_dir(dir);
  const auto labels = phase_labels(dataset.phases);
  const auto& est = result.state;

  json doc;
  doc["config"] = {{"rank", result.config.rank},
                   {"mu", result.config.mu},
                   {"nu", result.config.nu},
                   {"max_iterations", result.config.max_iterations},
                   {"tolerance", result.config.tolerance},
                   {"early_stop", result.config.early_stop},
                   {"method", to_string(result.config.method)}};
  doc["seeds"] = {{"mask", dataset.mask.seed}, {"noise", dataset.noise.seed}};
  doc["iterations"] = result.trace.iterations.size();
  doc["converged"] = result.converged;
  doc["seconds"] = result.seconds;
  doc["final_objective"] = result.trace.iterations.empty() ? result.trace.initial_objective
                                                           : result.trace.iterations.back().objective;
  json trace = json::array();
  for (const auto& it : result.trace.iterations) {
    trace.push_back({{"objective", it.objective},
                     {"objective_after_u", it.objective_after_u},
                     {"step_u", it.step_u},
                     {"step_v", it.step_v},
                     {"seconds", it.seconds}});
  }
  doc["trace"] = {{"initial_objective", result.trace.initial_objective}, {"iterations", trace}};
  json states = json::array();
  for (Eigen::Index t = 0; t < est.magnitude.rows(); ++t) {
    for (Eigen::Index j = 0; j < est.magnitude.cols(); ++j) {
      states.push_back({{"t", t + 1},
                        {"phase", labels[static_cast<std::size_t>(j)]},
                        {"magnitude", est.magnitude(t, j)},
                        {"angle_deg", est.angle_deg(t, j)}});
    }
  }
  doc["states"] = states;

  if (dataset.has_truth()) {
    const auto truth = extract_state(dataset.truth.values, SelectorMaps(dataset.truth.steps));
    doc["metrics"] = {{"mape_magnitude_pct", compute_mape_magnitude(est.magnitude, truth.magnitude)},
                      {"mae_angle_deg", compute_mae_angle(est.angle_deg, truth.angle_deg)}};
    auto out = open_for_write(dir / "errors.csv");
    out << "t,phase,magnitude_est,magnitude_true,abs_pct_error,angle_est_deg,angle_true_deg,"
           "abs_angle_error_deg\n";
    for (Eigen::Index t = 0; t < est.magnitude.rows(); ++t) {
      for (Eigen::Index j = 0; j < est.magnitude.cols(); ++j) {
        const double m_hat = est.magnitude(t, j);
        const double m_true = truth.magnitude(t, j);
        const double a_hat = est.angle_deg(t, j);
        const double a_true = truth.angle_deg(t, j);
        out << t + 1 << ',' << labels[static_cast<std::size_t>(j)] << ',' << format_double(m_hat)
            << ',' << format_double(m_true) << ','
            << format_double(100.0 * std::abs((m_hat - m_true) / m_true)) << ','
            << format_double(a_hat) << ',' << format_double(a_true) << ','
            << format_double(std::abs(wrap_degrees(a_hat - a_true))) << '\n';
      }
    }
  }
  auto out = open_for_write(dir / "estimate.json");
  out << doc.dump(1) << '\n';
}

}  // namespace dsse
