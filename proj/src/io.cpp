#include "gibly/io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

namespace gibly {

namespace {

std::string format_double(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, int line_no) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError(line_no, "not a number: '" + tok + "'");
  }
  if (pos != tok.size()) {
    throw ParseError(line_no, "trailing characters in number: '" + tok + "'");
  }
  return v;
}

int parse_label(const std::string& tok, int line_no) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError(line_no, "not an integer label: '" + tok + "'");
  }
  if (pos != tok.size() || v < 0 || v > 65535) {
    throw ParseError(line_no, "label out of range [0, 65535]: '" + tok + "'");
  }
  return static_cast<int>(v);
}

PointCloud read_xyz(std::istream& in) {
  PointCloud cloud;
  bool saw_label = false;
  bool saw_unlabeled = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    const std::vector<std::string> toks = split_ws(line);
    if (toks.size() != 3 && toks.size() != 4) {
      throw ParseError(line_no, "expected 3 or 4 fields, got " +
                                    std::to_string(toks.size()));
    }
    Vec3 p{parse_double(toks[0], line_no), parse_double(toks[1], line_no),
           parse_double(toks[2], line_no)};
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw ParseError(line_no, "non-finite coordinate");
    }
    cloud.coords.push_back(p);
    if (toks.size() == 4) {
      saw_label = true;
      cloud.labels.push_back(parse_label(toks[3], line_no));
    } else {
      saw_unlabeled = true;
      cloud.labels.push_back(0);
    }
    if (saw_label && saw_unlabeled) {
      throw ParseError(line_no, "mixed labeled and unlabeled lines");
    }
  }
  if (!saw_label) cloud.labels.clear();
  if (cloud.coords.empty()) {
    throw ParseError(line_no, "empty cloud");
  }
  return cloud;
}

struct PlyProperty {
  std::string name;
  bool is_list = false;
};

PointCloud read_ply(std::istream& in) {
  std::string line;
  int line_no = 0;

  auto next_line = [&](const char* what) -> std::string {
    if (!std::getline(in, line)) {
      throw ParseError(line_no, std::string("unexpected end of file, expected ") + what);
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line("'ply'") != "ply") throw ParseError(line_no, "missing 'ply' magic");
  if (next_line("format") != "format ascii 1.0") {
    throw ParseError(line_no, "unsupported PLY: only 'format ascii 1.0'");
  }

  struct Element {
    std::string name;
    long count = 0;
    std::vector<PlyProperty> props;
  };
  std::vector<Element> elements;
  for (;;) {
    const std::string header = next_line("header line");
    const std::vector<std::string> toks = split_ws(header);
    if (toks.empty()) continue;
    if (toks[0] == "comment" || toks[0] == "obj_info") continue;
    if (toks[0] == "end_header") break;
    if (toks[0] == "element") {
      if (toks.size() != 3) throw ParseError(line_no, "malformed element line");
      Element el;
      el.name = toks[1];
      try {
        el.count = std::stol(toks[2]);
      } catch (const std::exception&) {
        throw ParseError(line_no, "bad element count: '" + toks[2] + "'");
      }
      if (el.count < 0) throw ParseError(line_no, "negative element count");
      elements.push_back(el);
    } else if (toks[0] == "property") {
      if (elements.empty()) throw ParseError(line_no, "property before element");
      PlyProperty prop;
      if (toks.size() >= 2 && toks[1] == "list") {
        prop.is_list = true;
        prop.name = toks.back();
      } else if (toks.size() == 3) {
        prop.name = toks[2];
      } else {
        throw ParseError(line_no, "malformed property line");
      }
      elements.back().props.push_back(prop);
    } else {
      throw ParseError(line_no, "unexpected header keyword: '" + toks[0] + "'");
    }
  }

  PointCloud cloud;
  bool saw_vertex = false;
  for (const auto& el : elements) {
    if (el.name != "vertex") {
      std::cerr << "warning: skipping PLY element '" << el.name << "' ("
                << el.count << " rows)\n";
      for (long i = 0; i < el.count; ++i) next_line("element data");
      continue;
    }
    saw_vertex = true;
    int ix = -1, iy = -1, iz = -1, ilabel = -1;
    for (std::size_t k = 0; k < el.props.size(); ++k) {
      const PlyProperty& prop = el.props[k];
      if (prop.is_list) {
        throw ParseError(line_no, "unsupported PLY: list property '" +
                                      prop.name + "' on vertex element");
      }
      if (prop.name == "x") ix = static_cast<int>(k);
      else if (prop.name == "y") iy = static_cast<int>(k);
      else if (prop.name == "z") iz = static_cast<int>(k);
      else if (prop.name == "label") ilabel = static_cast<int>(k);
      else {
        std::cerr << "warning: skipping PLY vertex property '" << prop.name
                  << "'\n";
      }
    }
    if (ix < 0 || iy < 0 || iz < 0) {
      throw ParseError(line_no, "vertex element lacks x/y/z properties");
    }
    for (long i = 0; i < el.count; ++i) {
      const std::string data = next_line("vertex data");
      const std::vector<std::string> toks = split_ws(data);
      if (toks.size() != el.props.size()) {
        throw ParseError(line_no,
                         "expected " + std::to_string(el.props.size()) +
                             " fields, got " + std::to_string(toks.size()));
      }
      Vec3 p{parse_double(toks[ix], line_no), parse_double(toks[iy], line_no),
             parse_double(toks[iz], line_no)};
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
        throw ParseError(line_no, "non-finite coordinate");
      }
      cloud.coords.push_back(p);
      if (ilabel >= 0) cloud.labels.push_back(parse_label(toks[ilabel], line_no));
    }
  }
  if (!saw_vertex) throw ParseError(line_no, "no vertex element");
  if (cloud.coords.empty()) throw ParseError(line_no, "empty cloud");
  return cloud;
}

CloudFormat resolve_format(const std::string& path, CloudFormat format,
                           std::istream* sniff) {
  if (format != CloudFormat::Auto) return format;
  if (has_suffix(path, ".ply")) return CloudFormat::Ply;
  if (has_suffix(path, ".xyz") || has_suffix(path, ".txt")) return CloudFormat::Xyz;
  if (sniff != nullptr) {
    std::string first;
    const auto pos = sniff->tellg();
    std::getline(*sniff, first);
    sniff->seekg(pos);
    if (!first.empty() && first.back() == '\r') first.pop_back();
    if (first == "ply") return CloudFormat::Ply;
  }
  return CloudFormat::Xyz;
}

}  // namespace

PointCloud read_cloud(const std::string& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  const CloudFormat resolved = resolve_format(path, format, &in);
  PointCloud cloud =
      resolved == CloudFormat::Ply ? read_ply(in) : read_xyz(in);
  validate_cloud(cloud);
  return cloud;
}

void write_cloud(const PointCloud& cloud, const std::string& path,
                 CloudFormat format) {
  validate_cloud(cloud);
  CloudFormat resolved = format;
  if (resolved == CloudFormat::Auto) {
    resolved = has_suffix(path, ".ply") ? CloudFormat::Ply : CloudFormat::Xyz;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);

  if (resolved == CloudFormat::Ply) {
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << cloud.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (cloud.has_labels()) out << "property int label\n";
    out << "end_header\n";
  }
  for (int i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.coords[i];
    out << format_double(p.x, 17) << ' ' << format_double(p.y, 17) << ' '
        << format_double(p.z, 17);
    if (cloud.has_labels()) out << ' ' << cloud.labels[i];
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_features(const Eigen::MatrixXd& matrix, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
    if (j > 0) out << ',';
    out << 'f' << j;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(matrix(i, j), 9);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Eigen::MatrixXd read_features_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++line_no;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_double(cell, line_no));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(line_no, "ragged CSV row");
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_train_report_csv(const TrainReport& report,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << "model,epoch,loss,accuracy,miou";
  for (int c = 0; c < report.num_classes; ++c) out << ",iou_" << c;
  out << '\n';
  auto emit = [&](const char* model, const std::vector<EpochMetrics>& rows) {
    for (const EpochMetrics& em : rows) {
      out << model << ',' << em.epoch << ',' << format_double(em.loss, 9) << ','
          << format_double(em.accuracy, 9) << ',' << format_double(em.miou, 9);
      for (double iou : em.class_iou) out << ',' << format_double(iou, 9);
      out << '\n';
    }
  };
  emit("gibly", report.gibly_epochs);
  emit("baseline", report.baseline_epochs);
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_layer_params(const GiblyLayer& layer, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  const std::vector<std::string> names = layer_param_names(layer);
  const Eigen::VectorXd values = flatten_layer(layer);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    out << names[i] << " = " << format_double(values[i], 17) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_fit_report_csv(const FitResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << "step,objective\n";
  for (std::size_t i = 0; i < result.objective.size(); ++i) {
    out << i << ',' << format_double(result.objective[i], 9) << '\n';
  }
  const GibParams& p = result.params;
  out << "# kind = " << to_string(p.kind) << '\n';
  out << "# r = " << format_double(p.r, 17) << '\n';
  out << "# t = " << format_double(p.t, 17) << '\n';
  out << "# beta = " << format_double(p.beta, 17) << '\n';
  out << "# w = " << format_double(p.w, 17) << '\n';
  out << "# ell_scales = " << format_double(p.ell_scales[0], 17) << ' '
      << format_double(p.ell_scales[1], 17) << ' '
      << format_double(p.ell_scales[2], 17) << '\n';
  out << "# angles = " << format_double(p.angles.phi_x, 17) << ' '
      << format_double(p.angles.phi_y, 17) << ' '
      << format_double(p.angles.phi_z, 17) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace gibly
