#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "radm/matrix.hpp"
#include "radm/network.hpp"
#include "radm/rng.hpp"

namespace radm {

struct LabeledDataset {
    Matrix x;
    std::vector<int> labels;  // 1 = anomaly
    std::optional<Shape> image_shape;
    std::string source;

    std::size_t anomaly_count() const {
        std::size_t c = 0;
        for (int l : labels) c += std::size_t(l);
        return c;
    }
};

enum class MatrixFormat { csv, bin };

/// CSV: one row per line, comma-separated decimals. BIN: magic "RADM",
/// u32 rows, u32 cols, little-endian f64 row-major.
Matrix load_matrix(const std::string& path, MatrixFormat format);
void save_matrix(const Matrix& m, const std::string& path, MatrixFormat format);

struct ScalingRecord {
    double offset = 0.0;  // the observed minimum
    double scale = 1.0;   // max - min
    bool degenerate = false;
};

/// Global min-max scaling onto [0,1]; a constant matrix maps to zeros with
/// the degenerate flag raised. The record inverts the transform exactly.
std::pair<Matrix, ScalingRecord> normalize01(const Matrix& x);
Matrix denormalize(const Matrix& x, const ScalingRecord& record);

/// Sample rows without replacement from both pools, concatenate, shuffle;
/// rows from `anomaly` get label 1.
LabeledDataset build_mixture(const LabeledDataset& normal, const LabeledDataset& anomaly,
                             std::size_t n_normal, std::size_t n_anomaly, Rng& rng);

/// Carve a test set of unseen normals plus anomalies out of a labeled pool;
/// the train side keeps only the remaining normal rows.
std::pair<LabeledDataset, LabeledDataset> split_inductive(const LabeledDataset& pool,
                                                          std::size_t test_normal,
                                                          std::size_t test_anomaly, Rng& rng);

/// Corrupt each entry independently with probability `rate` to 0 or 1
/// (equal odds); the mask marks exactly the corrupted entries.
std::pair<Matrix, Matrix> inject_salt_pepper(const Matrix& x, double rate, Rng& rng);

/// Rows on a smooth two-parameter surface in [0,1]^dims (small Gaussian
/// jitter), anomalies as manifold points with a fraction of coordinates
/// slammed to 0 or 1. Generator equations in docs/formats.md.
LabeledDataset make_synthetic_manifold(std::size_t n_normal, std::size_t n_anomaly,
                                       std::size_t dims, Rng& rng);

/// Evaluate the jitter-free manifold embedding at surface parameters (s, t);
/// shared by the generator and by distance-to-manifold audits.
std::vector<double> manifold_point(double s, double t, std::size_t dims);

/// Synthetic 16x16 digit pair: n_normal vertical-stroke "1" images and
/// n_anomaly top-bar-plus-diagonal "7" images ('7' labeled 1). A documented
/// stand-in for the usps mixture task (docs/formats.md).
LabeledDataset make_synthetic_digits(std::size_t n_normal, std::size_t n_anomaly, Rng& rng);

/// Plain-text manifest: x_path=, x_format=, labels_path= (optional),
/// image_shape=CxHxW (optional). Paths resolve relative to the manifest.
LabeledDataset load_manifest(const std::string& path);
void save_dataset(const LabeledDataset& data, const std::string& directory,
                  const std::string& stem, MatrixFormat format = MatrixFormat::csv);

}  // namespace radm
