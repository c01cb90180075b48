#include "radm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "radm/binio.hpp"
#include "radm/errors.hpp"
#include "radm/fsutil.hpp"

namespace radm {

namespace {

constexpr char kMagic[4] = {'R', 'A', 'D', 'M'};

Matrix load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open matrix file: " + path);
    std::vector<double> values;
    std::size_t rows = 0, cols = 0, line_no = 0;
    for (std::string line; std::getline(in, line); ) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t row_cols = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end) {
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{})
                throw data_error(path + ":" + std::to_string(line_no) +
                                 ": malformed number at column offset " +
                                 std::to_string(p - line.data()));
            values.push_back(v);
            ++row_cols;
            p = next;
            if (p < end) {
                if (*p != ',')
                    throw data_error(path + ":" + std::to_string(line_no) +
                                     ": expected ',' at column offset " +
                                     std::to_string(p - line.data()));
                ++p;
            }
        }
        if (rows == 0)
            cols = row_cols;
        else if (row_cols != cols)
            throw data_error(path + ":" + std::to_string(line_no) + ": row has " +
                             std::to_string(row_cols) + " values, expected " +
                             std::to_string(cols));
        ++rows;
    }
    if (rows == 0) throw data_error(path + ": empty matrix file");
    return Matrix(rows, cols, std::move(values));
}

void save_csv(const Matrix& m, const std::string& path) {
    std::ostringstream out;
    char buf[40];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            if (j) out << ',';
            out << buf;
        }
        out << '\n';
    }
    write_text_atomic(path, out.str());
}

Matrix load_bin(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open matrix file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kMagic, 4))
        throw data_error(path + ": matrix file magic mismatch");
    const std::uint32_t rows = binio::read_u32(in, "rows");
    const std::uint32_t cols = binio::read_u32(in, "cols");
    std::vector<double> values(std::size_t(rows) * cols);
    for (double& v : values) v = binio::read_f64(in, "matrix entry");
    return Matrix(rows, cols, std::move(values));
}

void save_bin(const Matrix& m, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw data_error("cannot open for writing: " + tmp);
        binio::write_bytes(out, kMagic, 4);
        binio::write_u32(out, std::uint32_t(m.rows()));
        binio::write_u32(out, std::uint32_t(m.cols()));
        for (std::size_t i = 0; i < m.size(); ++i) binio::write_f64(out, m.data()[i]);
        if (!out) throw data_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw data_error("rename failed for: " + path);
    }
}

}  // namespace

Matrix load_matrix(const std::string& path, MatrixFormat format) {
    return format == MatrixFormat::csv ? load_csv(path) : load_bin(path);
}

void save_matrix(const Matrix& m, const std::string& path, MatrixFormat format) {
    if (format == MatrixFormat::csv)
        save_csv(m, path);
    else
        save_bin(m, path);
}

std::pair<Matrix, ScalingRecord> normalize01(const Matrix& x) {
    ScalingRecord rec;
    double lo = x.data()[0], hi = x.data()[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
        lo = std::min(lo, x.data()[i]);
        hi = std::max(hi, x.data()[i]);
    }
    rec.offset = lo;
    rec.scale = hi - lo;
    Matrix out(x.rows(), x.cols());
    if (rec.scale == 0.0) {
        rec.degenerate = true;
        std::cerr << "normalize01: constant matrix, mapping to zeros\n";
        return {out, rec};
    }
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = (x.data()[i] - lo) / rec.scale;
    return {out, rec};
}

Matrix denormalize(const Matrix& x, const ScalingRecord& record) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i)
        out.data()[i] = x.data()[i] * record.scale + record.offset;
    return out;
}

namespace {

std::vector<std::size_t> sample_without_replacement(std::size_t pool, std::size_t want,
                                                    Rng& rng) {
    std::vector<std::size_t> idx(pool);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    idx.resize(want);
    return idx;
}

}  // namespace

LabeledDataset build_mixture(const LabeledDataset& normal, const LabeledDataset& anomaly,
                             std::size_t n_normal, std::size_t n_anomaly, Rng& rng) {
    if (n_normal > normal.x.rows())
        throw data_error("build_mixture: requested " + std::to_string(n_normal) +
                         " normal rows, pool has " + std::to_string(normal.x.rows()));
    if (n_anomaly > anomaly.x.rows())
        throw data_error("build_mixture: requested " + std::to_string(n_anomaly) +
                         " anomaly rows, pool has " + std::to_string(anomaly.x.rows()));
    if (normal.x.cols() != anomaly.x.cols())
        throw data_error("build_mixture: pools disagree on feature count");

    const auto ni = sample_without_replacement(normal.x.rows(), n_normal, rng);
    const auto ai = sample_without_replacement(anomaly.x.rows(), n_anomaly, rng);

    LabeledDataset out;
    out.image_shape = normal.image_shape;
    out.source = "mixture(" + normal.source + "," + anomaly.source + ")";
    const std::size_t total = n_normal + n_anomaly;
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    out.x = Matrix(total, normal.x.cols());
    out.labels.assign(total, 0);
    for (std::size_t slot = 0; slot < total; ++slot) {
        const std::size_t src = order[slot];
        const bool is_anomaly = src >= n_normal;
        auto row = is_anomaly ? anomaly.x.row(ai[src - n_normal]) : normal.x.row(ni[src]);
        for (std::size_t j = 0; j < out.x.cols(); ++j) out.x(slot, j) = row[j];
        out.labels[slot] = is_anomaly ? 1 : 0;
    }
    return out;
}

std::pair<LabeledDataset, LabeledDataset> split_inductive(const LabeledDataset& pool,
                                                          std::size_t test_normal,
                                                          std::size_t test_anomaly, Rng& rng) {
    std::vector<std::size_t> normals, anomalies;
    for (std::size_t i = 0; i < pool.labels.size(); ++i)
        (pool.labels[i] == 1 ? anomalies : normals).push_back(i);
    if (normals.size() < test_normal + 1)
        throw data_error("split_inductive: pool has " + std::to_string(normals.size()) +
                         " normal rows, cannot hold out " + std::to_string(test_normal));
    if (anomalies.size() < test_anomaly)
        throw data_error("split_inductive: pool has " + std::to_string(anomalies.size()) +
                         " anomaly rows, need " + std::to_string(test_anomaly));

    rng.shuffle(normals);
    rng.shuffle(anomalies);

    LabeledDataset train, test;
    train.image_shape = test.image_shape = pool.image_shape;
    train.source = pool.source + "/train";
    test.source = pool.source + "/test";

    std::vector<std::size_t> train_rows(normals.begin() + test_normal, normals.end());
    std::vector<std::size_t> test_rows(normals.begin(), normals.begin() + test_normal);
    test_rows.insert(test_rows.end(), anomalies.begin(), anomalies.begin() + test_anomaly);
    rng.shuffle(test_rows);

    train.x = take_rows(pool.x, train_rows);
    train.labels.assign(train_rows.size(), 0);
    test.x = take_rows(pool.x, test_rows);
    test.labels.resize(test_rows.size());
    for (std::size_t i = 0; i < test_rows.size(); ++i) test.labels[i] = pool.labels[test_rows[i]];
    return {std::move(train), std::move(test)};
}

std::pair<Matrix, Matrix> inject_salt_pepper(const Matrix& x, double rate, Rng& rng) {
    if (rate < 0.0 || rate > 1.0 || std::isnan(rate))
        throw std::invalid_argument("inject_salt_pepper: rate must lie in [0, 1]");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x.data()[i] < 0.0 || x.data()[i] > 1.0)
            throw std::invalid_argument("inject_salt_pepper: input must lie in [0, 1]");
    Matrix noisy = x;
    Matrix mask(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (rng.uniform() < rate) {
            noisy.data()[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
            mask.data()[i] = 1.0;
        }
    }
    return {std::move(noisy), std::move(mask)};
}

std::vector<double> manifold_point(double s, double t, std::size_t dims) {
    std::vector<double> p(dims);
    for (std::size_t j = 0; j < dims; ++j) {
        const double a = 1.0 + double(j % 4);
        const double b = 2.0 + double(j % 3);
        const double c = 0.7 * double(j);
        const double d = 1.0 + double(j % 5);
        const double e = 0.3 * double(j % 7);
        p[j] = 0.5 + 0.5 * std::sin(a * s + b * t + c) * std::cos(d * t - e * s);
    }
    return p;
}

LabeledDataset make_synthetic_manifold(std::size_t n_normal, std::size_t n_anomaly,
                                       std::size_t dims, Rng& rng) {
    if (dims < 3) throw std::invalid_argument("make_synthetic_manifold: dims must be >= 3");
    const std::size_t total = n_normal + n_anomaly;
    Matrix x(total, dims);
    std::vector<int> labels(total, 0);
    for (std::size_t i = 0; i < total; ++i) {
        const std::vector<double> base = manifold_point(rng.uniform(), rng.uniform(), dims);
        for (std::size_t j = 0; j < dims; ++j)
            x(i, j) = std::clamp(base[j] + rng.normal(0.0, 0.01), 0.0, 1.0);
        if (i >= n_normal) {
            labels[i] = 1;
            std::size_t corrupted = 0;
            for (std::size_t j = 0; j < dims; ++j) {
                if (rng.uniform() < 0.3) {
                    x(i, j) = rng.uniform() < 0.5 ? 0.0 : 1.0;
                    ++corrupted;
                }
            }
            if (corrupted == 0) x(i, std::size_t(rng.below(dims))) = 1.0;
        }
    }
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    LabeledDataset out;
    out.x = take_rows(x, order);
    out.labels.resize(total);
    for (std::size_t i = 0; i < total; ++i) out.labels[i] = labels[order[i]];
    out.source = "synthetic-manifold";
    return out;
}

namespace {

constexpr std::size_t kDigitSide = 16;

double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double u = len2 == 0.0 ? 0.0 : ((px - ax) * dx + (py - ay) * dy) / len2;
    u = std::clamp(u, 0.0, 1.0);
    const double cx = ax + u * dx, cy = ay + u * dy;
    return std::sqrt((px - cx) * (px - cx) + (py - cy) * (py - cy));
}

struct Stroke {
    double ax, ay, bx, by;
};

void render_strokes(std::span<double> row, const std::vector<Stroke>& strokes, double thickness,
                    double intensity, Rng& rng) {
    for (std::size_t y = 0; y < kDigitSide; ++y) {
        for (std::size_t x = 0; x < kDigitSide; ++x) {
            double best = 1e9;
            for (const Stroke& s : strokes)
                best = std::min(best, point_segment_distance(double(x), double(y), s.ax, s.ay,
                                                             s.bx, s.by));
            const double ink = intensity * std::max(0.0, 1.0 - best / thickness);
            const double noisy = ink + rng.normal(0.0, 0.04);
            row[y * kDigitSide + x] = std::clamp(noisy, 0.0, 1.0);
        }
    }
}

}  // namespace

LabeledDataset make_synthetic_digits(std::size_t n_normal, std::size_t n_anomaly, Rng& rng) {
    const std::size_t total = n_normal + n_anomaly;
    Matrix x(total, kDigitSide * kDigitSide);
    std::vector<int> labels(total, 0);
    for (std::size_t i = 0; i < total; ++i) {
        const double thickness = rng.uniform(1.0, 1.7);
        const double intensity = rng.uniform(0.75, 1.0);
        std::vector<Stroke> strokes;
        if (i < n_normal) {
            // a "1": near-vertical stroke with variable position and slant
            const double x0 = rng.uniform(5.0, 10.5);
            const double slant = rng.uniform(-1.5, 1.5);
            const double top = rng.uniform(1.0, 2.5), bottom = rng.uniform(12.5, 14.0);
            strokes.push_back({x0 - slant / 2.0, top, x0 + slant / 2.0, bottom});
        } else {
            // a "7": horizontal top bar plus a descending diagonal
            labels[i] = 1;
            const double left = rng.uniform(3.0, 4.5), right = rng.uniform(11.0, 12.5);
            const double bar_y = rng.uniform(2.0, 3.0);
            const double foot_x = rng.uniform(5.0, 7.0);
            const double bottom = rng.uniform(12.5, 14.0);
            strokes.push_back({left, bar_y, right, bar_y});
            strokes.push_back({right, bar_y, foot_x, bottom});
        }
        render_strokes(x.row(i), strokes, thickness, intensity, rng);
    }
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    LabeledDataset out;
    out.x = take_rows(x, order);
    out.labels.resize(total);
    for (std::size_t i = 0; i < total; ++i) out.labels[i] = labels[order[i]];
    out.image_shape = Shape{1, kDigitSide, kDigitSide};
    out.source = "synthetic-digits";
    return out;
}

// ---------------------------------------------------------------------------
// Manifest I/O
// ---------------------------------------------------------------------------

namespace {

Shape parse_image_shape(const std::string& text) {
    Shape s;
    std::size_t c = 0, h = 0, w = 0;
    if (std::sscanf(text.c_str(), "%zux%zux%zu", &c, &h, &w) != 3 || c == 0 || h == 0 || w == 0)
        throw data_error("manifest: bad image_shape '" + text + "', expected CxHxW");
    s.channels = c;
    s.height = h;
    s.width = w;
    return s;
}

MatrixFormat format_from_path(const std::string& path) {
    return path.size() >= 4 && path.substr(path.size() - 4) == ".bin" ? MatrixFormat::bin
                                                                      : MatrixFormat::csv;
}

}  // namespace

LabeledDataset load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open manifest: " + path);
    std::string x_path, labels_path, image_shape;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line); ) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw data_error(path + ":" + std::to_string(line_no) + ": expected key=value");
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "x_path")
            x_path = value;
        else if (key == "labels_path")
            labels_path = value;
        else if (key == "image_shape")
            image_shape = value;
        else
            throw data_error(path + ":" + std::to_string(line_no) + ": unknown key '" + key +
                             "'");
    }
    if (x_path.empty()) throw data_error(path + ": manifest is missing x_path");

    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    LabeledDataset out;
    out.source = path;
    out.x = load_matrix((base / x_path).string(), format_from_path(x_path));
    if (!labels_path.empty()) {
        std::ifstream lin(base / labels_path);
        if (!lin) throw data_error("cannot open labels file: " + (base / labels_path).string());
        int v = 0;
        while (lin >> v) {
            if (v != 0 && v != 1) throw data_error(labels_path + ": labels must be 0 or 1");
            out.labels.push_back(v);
        }
        if (out.labels.size() != out.x.rows())
            throw data_error(labels_path + ": " + std::to_string(out.labels.size()) +
                             " labels for " + std::to_string(out.x.rows()) + " rows");
    } else {
        out.labels.assign(out.x.rows(), 0);
    }
    if (!image_shape.empty()) {
        out.image_shape = parse_image_shape(image_shape);
        if (out.image_shape->flat() != out.x.cols())
            throw data_error(path + ": image_shape " + image_shape + " does not flatten to " +
                             std::to_string(out.x.cols()) + " columns");
    }
    return out;
}

void save_dataset(const LabeledDataset& data, const std::string& directory,
                  const std::string& stem, MatrixFormat format) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    const std::string ext = format == MatrixFormat::csv ? ".csv" : ".bin";
    const std::string x_name = stem + ext;
    const std::string labels_name = stem + "_labels.txt";
    save_matrix(data.x, (fs::path(directory) / x_name).string(), format);

    std::ostringstream labels;
    for (int l : data.labels) labels << l << '\n';
    write_text_atomic((fs::path(directory) / labels_name).string(), labels.str());

    std::ostringstream manifest;
    manifest << "x_path=" << x_name << '\n';
    manifest << "labels_path=" << labels_name << '\n';
    if (data.image_shape) {
        manifest << "image_shape=" << data.image_shape->channels << 'x'
                 << data.image_shape->height << 'x' << data.image_shape->width << '\n';
    }
    write_text_atomic((fs::path(directory) / (stem + ".manifest")).string(), manifest.str());
}

}  // namespace radm
