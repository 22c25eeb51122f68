#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "gibly/point_cloud.hpp"
#include "gibly/training.hpp"

namespace gibly {

// Input diagnostics carry the 1-based line number of the offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& reason)
      : std::runtime_error("line " + std::to_string(line) + ": " + reason),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class CloudFormat { Auto, Xyz, Ply };

// ASCII XYZ ("x y z [label]" per line, '#' comments) or an ASCII PLY subset
// with a single vertex element. Auto resolves by extension, then header sniff.
PointCloud read_cloud(const std::string& path,
                      CloudFormat format = CloudFormat::Auto);

// Deterministic byte output; coordinates at 17 significant digits.
void write_cloud(const PointCloud& cloud, const std::string& path,
                 CloudFormat format = CloudFormat::Auto);

// CSV with header "f0,f1,...", one row per point, 9 significant digits.
void write_features(const Eigen::MatrixXd& matrix, const std::string& path);

Eigen::MatrixXd read_features_csv(const std::string& path);

// Per-epoch metrics for the GIBLy run and the baseline, one row each.
void write_train_report_csv(const TrainReport& report, const std::string& path);

// Human-readable "name = value" dump of every learnable parameter.
void write_layer_params(const GiblyLayer& layer, const std::string& path);

// Fit trajectory: "step,objective" plus a final parameter block as comments.
void write_fit_report_csv(const FitResult& result, const std::string& path);

}  // namespace gibly
