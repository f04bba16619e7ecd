#include "trimks/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "trimks/errors.hpp"

namespace trimks {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double_field(const std::string& text, const std::string& origin,
                          std::size_t line_no, const char* what) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || begin == end) {
    throw ValidationError(origin + ":" + std::to_string(line_no) +
                          ": cannot parse " + what + " '" + text + "'");
  }
  if (!std::isfinite(value)) {
    throw ValidationError(origin + ":" + std::to_string(line_no) +
                          ": non-finite " + what);
  }
  return value;
}

int parse_label_field(const std::string& text, const std::string& origin,
                      std::size_t line_no) {
  std::string t = text;
  while (!t.empty() && (t.back() == '\r' || t.back() == ' ')) t.pop_back();
  if (t == "0") return 0;
  if (t == "1") return 1;
  throw ValidationError(origin + ":" + std::to_string(line_no) +
                        ": label must be 0 or 1, got '" + text + "'");
}

std::string strip_cr(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
  return s;
}

}  // namespace

GapFileFormat gap_format_from_name(const std::string& name) {
  if (name == "wide") return GapFileFormat::Wide;
  if (name == "long") return GapFileFormat::Long;
  throw ValidationError("unknown gap file format '" + name +
                        "' (expected wide|long)");
}

LogitGapMatrix load_gaps_wide(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError(origin + ": empty file");
  }
  const std::vector<std::string> header = split_csv_line(strip_cr(line));
  if (header.size() < 3 || header[0] != "point_id" || header[1] != "label") {
    throw ValidationError(origin +
                          ":1: header must be point_id,label,<model ids...>");
  }
  LogitGapMatrix matrix;
  matrix.n_models = header.size() - 2;
  matrix.model_ids.assign(header.begin() + 2, header.end());
  if (!matrix.model_ids.empty()) {
    matrix.model_ids.back() = strip_cr(matrix.model_ids.back());
  }

  std::vector<std::vector<double>> rows;  // per point, one gap per model
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = strip_cr(line);
    if (stripped.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(stripped);
    if (fields.size() != header.size()) {
      throw ValidationError(origin + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, found " +
                            std::to_string(fields.size()));
    }
    matrix.point_ids.push_back(fields[0]);
    matrix.labels.push_back(parse_label_field(fields[1], origin, line_no));
    std::vector<double> row;
    row.reserve(matrix.n_models);
    for (std::size_t m = 0; m < matrix.n_models; ++m) {
      row.push_back(parse_double_field(fields[2 + m], origin, line_no, "gap"));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw ValidationError(origin + ": no data rows");
  }
  matrix.n_points = rows.size();
  matrix.gaps.assign(matrix.n_models * matrix.n_points, 0.0);
  for (std::size_t j = 0; j < matrix.n_points; ++j) {
    for (std::size_t m = 0; m < matrix.n_models; ++m) {
      matrix.at(m, j) = rows[j][m];
    }
  }
  matrix.validate();
  return matrix;
}

LogitGapMatrix load_gaps_long(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError(origin + ": empty file");
  }
  const std::vector<std::string> header = split_csv_line(strip_cr(line));
  const std::vector<std::string> expected = {"model_id", "point_id", "logit_pos",
                                             "logit_neg", "label"};
  if (header.size() != 5 ||
      !std::equal(header.begin(), header.end(), expected.begin())) {
    throw ValidationError(
        origin + ":1: header must be model_id,point_id,logit_pos,logit_neg,label");
  }

  std::vector<std::string> model_ids, point_ids;
  std::map<std::string, std::size_t> model_index, point_index;
  struct Cell {
    double gap;
    int label;
  };
  std::map<std::pair<std::size_t, std::size_t>, Cell> cells;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = strip_cr(line);
    if (stripped.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(stripped);
    if (fields.size() != 5) {
      throw ValidationError(origin + ":" + std::to_string(line_no) +
                            ": expected 5 cells");
    }
    const auto [mit, m_new] =
        model_index.try_emplace(fields[0], model_ids.size());
    if (m_new) model_ids.push_back(fields[0]);
    const auto [pit, p_new] =
        point_index.try_emplace(fields[1], point_ids.size());
    if (p_new) point_ids.push_back(fields[1]);

    const double pos = parse_double_field(fields[2], origin, line_no, "logit_pos");
    const double neg = parse_double_field(fields[3], origin, line_no, "logit_neg");
    const int label = parse_label_field(fields[4], origin, line_no);
    const auto key = std::make_pair(mit->second, pit->second);
    if (!cells.emplace(key, Cell{logit_gap(pos, neg), label}).second) {
      throw ValidationError(origin + ":" + std::to_string(line_no) +
                            ": duplicate (model,point) pair " + fields[0] + "," +
                            fields[1]);
    }
  }
  if (model_ids.empty() || point_ids.empty()) {
    throw ValidationError(origin + ": no data rows");
  }

  LogitGapMatrix matrix;
  matrix.n_models = model_ids.size();
  matrix.n_points = point_ids.size();
  matrix.model_ids = std::move(model_ids);
  matrix.point_ids = std::move(point_ids);
  matrix.gaps.assign(matrix.n_models * matrix.n_points, 0.0);
  matrix.labels.assign(matrix.n_points, -1);
  for (std::size_t m = 0; m < matrix.n_models; ++m) {
    for (std::size_t p = 0; p < matrix.n_points; ++p) {
      const auto it = cells.find({m, p});
      if (it == cells.end()) {
        throw ValidationError(origin + ": incomplete grid, missing model '" +
                              matrix.model_ids[m] + "' at point '" +
                              matrix.point_ids[p] + "'");
      }
      matrix.at(m, p) = it->second.gap;
      if (matrix.labels[p] == -1) {
        matrix.labels[p] = it->second.label;
      } else if (matrix.labels[p] != it->second.label) {
        throw ValidationError(origin + ": inconsistent label for point '" +
                              matrix.point_ids[p] + "'");
      }
    }
  }
  matrix.validate();
  return matrix;
}

LogitGapMatrix load_gaps(const std::string& path, GapFileFormat format) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open '" + path + "'");
  }
  return format == GapFileFormat::Wide ? load_gaps_wide(in, path)
                                       : load_gaps_long(in, path);
}

std::string format_double(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc()) {
    throw NumericError("format_double: to_chars failed");
  }
  return std::string(buffer, ptr);
}

void save_gaps_wide(const LogitGapMatrix& matrix, std::ostream& out) {
  matrix.validate();
  out << "point_id,label";
  for (std::size_t m = 0; m < matrix.n_models; ++m) {
    out << ',' << (matrix.model_ids.empty() ? "m" + std::to_string(m)
                                            : matrix.model_ids[m]);
  }
  out << '\n';
  for (std::size_t j = 0; j < matrix.n_points; ++j) {
    out << (matrix.point_ids.empty() ? "p" + std::to_string(j)
                                     : matrix.point_ids[j]);
    out << ',' << matrix.labels[j];
    for (std::size_t m = 0; m < matrix.n_models; ++m) {
      out << ',' << format_double(matrix.at(m, j));
    }
    out << '\n';
  }
}

void save_gaps_wide(const LogitGapMatrix& matrix, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ValidationError("cannot write '" + path + "'");
  }
  save_gaps_wide(matrix, out);
  if (!out) {
    throw ValidationError("write failed for '" + path + "'");
  }
}

std::vector<double> parse_alpha_grid(const std::string& text) {
  double start = 0.0, stop = 0.0, step = 0.0;
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string piece;
  while (std::getline(ss, piece, ':')) {
    parts.push_back(parse_double_field(piece, "alpha grid", 1, "grid value"));
  }
  if (parts.size() != 3) {
    throw ValidationError("alpha grid must be START:STOP:STEP, got '" + text + "'");
  }
  start = parts[0];
  stop = parts[1];
  step = parts[2];
  if (!(step > 0.0) || stop < start) {
    throw ValidationError("alpha grid needs STOP >= START and STEP > 0");
  }
  std::vector<double> grid;
  for (int i = 0;; ++i) {
    const double level = start + step * i;
    if (level > stop + 0.5 * step) break;
    grid.push_back(std::min(level, stop));
    if (grid.size() > 100000) {
      throw ValidationError("alpha grid has too many levels");
    }
  }
  return grid;
}

std::string AlphaReport::to_json() const {
  nlohmann::json j;
  j["tool"] = "trimks";
  j["version"] = version;
  j["command"] = "alpha";
  j["gaps_file"] = gaps_file;
  j["format"] = format;
  j["model_index"] = model_index;
  j["n_models"] = n_models;
  j["n_points"] = n_points;
  j["delta"] = estimate.delta;
  j["bootstraps"] = estimate.bootstraps;
  j["alpha_grid"] = estimate.alpha_grid;
  j["seed"] = estimate.seed;
  j["paired"] = estimate.paired;
  j["tau"] = estimate.tau;
  j["alpha_hat"] = estimate.alpha_hat;
  j["per_bootstrap"] = estimate.per_bootstrap;
  j["reject_all_count"] = estimate.reject_all_count;
  return j.dump(2) + "\n";
}

AlphaReport AlphaReport::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("cannot parse alpha report: ") + e.what());
  }
  AlphaReport report;
  try {
    report.version = j.at("version").get<std::string>();
    report.gaps_file = j.at("gaps_file").get<std::string>();
    report.format = j.at("format").get<std::string>();
    report.model_index = j.at("model_index").get<std::size_t>();
    report.n_models = j.at("n_models").get<std::size_t>();
    report.n_points = j.at("n_points").get<std::size_t>();
    report.estimate.delta = j.at("delta").get<double>();
    report.estimate.bootstraps = j.at("bootstraps").get<std::size_t>();
    report.estimate.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
    report.estimate.seed = j.at("seed").get<std::uint64_t>();
    report.estimate.paired = j.at("paired").get<bool>();
    report.estimate.tau = j.at("tau").get<double>();
    report.estimate.alpha_hat = j.at("alpha_hat").get<double>();
    report.estimate.per_bootstrap =
        j.at("per_bootstrap").get<std::vector<double>>();
    report.estimate.reject_all_count =
        j.at("reject_all_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("alpha report missing field: ") + e.what());
  }
  return report;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot write '" + path + "'");
  }
  out << content;
  if (!out) {
    throw ValidationError("write failed for '" + path + "'");
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace trimks
