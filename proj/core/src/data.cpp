#include "aal/data.hpp"

#include "aal/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

namespace aal {

std::vector<int> OsdaDataset::evaluation_labels() const {
    std::vector<int> out(y_tgt_hidden);
    const int unknown = static_cast<int>(c);
    for (int& y : out) y = std::min(y, unknown);
    return out;
}

void OsdaDataset::validate() const {
    if (c < 1) throw ContractError("dataset: no known categories");
    if (c_total <= c) throw ContractError("dataset: target must contain categories beyond the source");
    if (x_src.rows != y_src.size() || x_tgt.rows != y_tgt_hidden.size()) {
        throw ContractError("dataset: feature and label counts differ");
    }
    if (x_src.rows == 0 || x_tgt.rows == 0) throw ContractError("dataset: empty domain");
    if (x_src.cols != x_tgt.cols) {
        throw DimensionError("dataset: source has " + std::to_string(x_src.cols) +
                             " features, target has " + std::to_string(x_tgt.cols));
    }
    std::vector<bool> seen(c, false);
    for (int y : y_src) {
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw ContractError("dataset: source label " + std::to_string(y) + " outside [0," +
                                std::to_string(c) + ")");
        }
        seen[static_cast<std::size_t>(y)] = true;
    }
    for (std::size_t k = 0; k < c; ++k) {
        if (!seen[k]) throw ContractError("dataset: known category " + std::to_string(k) + " missing from source");
    }
    bool any_unknown = false;
    for (int y : y_tgt_hidden) {
        if (y < 0 || static_cast<std::size_t>(y) >= c_total) {
            throw ContractError("dataset: target label " + std::to_string(y) + " outside [0," +
                                std::to_string(c_total) + ")");
        }
        any_unknown = any_unknown || static_cast<std::size_t>(y) >= c;
    }
    if (!any_unknown) throw ContractError("dataset: no target sample belongs to an unknown category");
}

// ---------------------------------------------------------------------------
// Generators

namespace {

struct Point {
    double x;
    double y;
};

Point rotate(Point p, double deg, Point pivot = {0.0, 0.0}) {
    const double rad = deg * std::numbers::pi / 180.0;
    const double dx = p.x - pivot.x;
    const double dy = p.y - pivot.y;
    return {pivot.x + std::cos(rad) * dx - std::sin(rad) * dy,
            pivot.y + std::sin(rad) * dx + std::cos(rad) * dy};
}

void push(Matrix& m, std::vector<int>& labels, Point p, int label) {
    m.data.push_back(p.x);
    m.data.push_back(p.y);
    ++m.rows;
    labels.push_back(label);
}

} // namespace

OsdaDataset gen_gaussian_osda(const GaussianSpec& spec, std::uint64_t seed) {
    if (spec.c < 2) throw ContractError("gen_gaussian_osda: need at least 2 known categories");
    if (spec.n_unknown_cats < 1) {
        throw ContractError("gen_gaussian_osda: need at least 1 unknown category (closed set is out of contract)");
    }
    if (spec.n_per_cat == 0) throw ContractError("gen_gaussian_osda: n_per_cat must be positive");
    const ShiftSpec& s = spec.shift;
    for (double v : {s.translate_x, s.translate_y, s.rotation_deg, spec.radius, spec.noise, spec.unknown_scale}) {
        if (!std::isfinite(v)) throw ContractError("gen_gaussian_osda: non-finite shift or geometry");
    }
    if (spec.noise < 0.0) throw ContractError("gen_gaussian_osda: negative noise");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw = [&](Point mean) {
        return Point{mean.x + spec.noise * gauss(rng), mean.y + spec.noise * gauss(rng)};
    };

    const double step = 2.0 * std::numbers::pi / static_cast<double>(spec.c);
    std::vector<Point> means;
    for (std::size_t k = 0; k < spec.c; ++k) {
        const double a = step * static_cast<double>(k);
        means.push_back({spec.radius * std::cos(a), spec.radius * std::sin(a)});
    }

    OsdaDataset ds;
    ds.c = spec.c;
    ds.c_total = spec.c + spec.n_unknown_cats;
    ds.x_src = Matrix(0, 2);
    ds.x_tgt = Matrix(0, 2);

    for (std::size_t k = 0; k < spec.c; ++k) {
        for (std::size_t i = 0; i < spec.n_per_cat; ++i) push(ds.x_src, ds.y_src, draw(means[k]), static_cast<int>(k));
    }
    for (std::size_t k = 0; k < spec.c; ++k) {
        for (std::size_t i = 0; i < spec.n_per_cat; ++i) {
            Point p = rotate(draw(means[k]), s.rotation_deg);
            p.x += s.translate_x * spec.noise;
            p.y += s.translate_y * spec.noise;
            push(ds.x_tgt, ds.y_tgt_hidden, p, static_cast<int>(k));
        }
    }
    for (std::size_t u = 0; u < spec.n_unknown_cats; ++u) {
        const std::size_t ring = u / spec.c;
        const double a = step * (static_cast<double>(u % spec.c) + 0.5);
        const double r = spec.radius * (spec.unknown_scale + static_cast<double>(ring));
        const Point mean{r * std::cos(a), r * std::sin(a)};
        for (std::size_t i = 0; i < spec.n_per_cat; ++i) {
            push(ds.x_tgt, ds.y_tgt_hidden, draw(mean), static_cast<int>(spec.c + u));
        }
    }
    ds.validate();
    return ds;
}

OsdaDataset gen_twomoons_osda(const TwoMoonsSpec& spec, std::uint64_t seed) {
    if (spec.n_per_cat == 0) throw ContractError("gen_twomoons_osda: n_per_cat must be positive");
    for (double v : {spec.noise, spec.rotation_deg, spec.unknown_radius, spec.unknown_noise}) {
        if (!std::isfinite(v)) throw ContractError("gen_twomoons_osda: non-finite parameter");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::uniform_real_distribution<double> full_turn(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Point center{kMoonsCenterX, kMoonsCenterY};

    auto moon = [&](int which) {
        const double t = angle(rng);
        Point p = which == 0 ? Point{std::cos(t), std::sin(t)} : Point{1.0 - std::cos(t), 0.5 - std::sin(t)};
        p.x += spec.noise * gauss(rng);
        p.y += spec.noise * gauss(rng);
        return p;
    };

    OsdaDataset ds;
    ds.c = 2;
    ds.c_total = 3;
    ds.x_src = Matrix(0, 2);
    ds.x_tgt = Matrix(0, 2);
    for (int k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < spec.n_per_cat; ++i) push(ds.x_src, ds.y_src, moon(k), k);
    }
    for (int k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < spec.n_per_cat; ++i) {
            push(ds.x_tgt, ds.y_tgt_hidden, rotate(moon(k), spec.rotation_deg, center), k);
        }
    }
    for (std::size_t i = 0; i < spec.n_per_cat; ++i) {
        const double a = full_turn(rng);
        const double r = spec.unknown_radius + spec.unknown_noise * gauss(rng);
        push(ds.x_tgt, ds.y_tgt_hidden, {center.x + r * std::cos(a), center.y + r * std::sin(a)}, 2);
    }
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        cells.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    for (auto& c : cells) {
        const auto b = c.find_first_not_of(" \t\r");
        const auto e = c.find_last_not_of(" \t\r");
        c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
    }
    return cells;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_int(const std::string& s, int& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

struct LabeledRows {
    Matrix x;
    std::vector<int> y;
};

LabeledRows read_labeled(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    LabeledRows out;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_commas(line);
        double probe = 0.0;
        if (first_content && !parse_double(cells[0], probe)) {
            first_content = false; // header
            continue;
        }
        first_content = false;
        if (cells.size() < 2) throw ParseError(path.string() + ": need at least one feature and a label", line_no);
        if (width == 0) {
            width = cells.size();
            out.x = Matrix(0, width - 1);
        } else if (cells.size() != width) {
            throw ParseError(path.string() + ": ragged row with " + std::to_string(cells.size()) +
                                 " cells, expected " + std::to_string(width),
                             line_no);
        }
        for (std::size_t j = 0; j + 1 < cells.size(); ++j) {
            double v = 0.0;
            if (!parse_double(cells[j], v) || !std::isfinite(v)) {
                throw ParseError(path.string() + ": non-numeric cell '" + cells[j] + "'", line_no);
            }
            out.x.data.push_back(v);
        }
        int label = 0;
        if (!parse_int(cells.back(), label) || label < 0) {
            throw ParseError(path.string() + ": invalid label '" + cells.back() + "'", line_no);
        }
        out.y.push_back(label);
        ++out.x.rows;
    }
    if (out.x.rows == 0) throw ParseError(path.string() + ": no data rows", line_no);
    return out;
}

} // namespace

void standardize_with_source_stats(OsdaDataset& ds) {
    const std::size_t d = ds.x_src.cols;
    const double n = static_cast<double>(ds.x_src.rows);
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < ds.x_src.rows; ++i) mean += ds.x_src(i, j);
        mean /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < ds.x_src.rows; ++i) {
            const double dv = ds.x_src(i, j) - mean;
            var += dv * dv;
        }
        const double sd = std::max(std::sqrt(var / n), kStdFloor);
        for (Matrix* m : {&ds.x_src, &ds.x_tgt}) {
            for (std::size_t i = 0; i < m->rows; ++i) (*m)(i, j) = ((*m)(i, j) - mean) / sd;
        }
    }
}

OsdaDataset load_csv(const std::filesystem::path& src, const std::filesystem::path& tgt,
                     const CsvLoadOptions& options) {
    LabeledRows s = read_labeled(src);
    LabeledRows t = read_labeled(tgt);
    if (s.x.cols != t.x.cols) {
        throw ParseError("source has " + std::to_string(s.x.cols) + " features but target has " +
                             std::to_string(t.x.cols),
                         0);
    }
    OsdaDataset ds;
    const int max_src = *std::max_element(s.y.begin(), s.y.end());
    ds.c = options.c.value_or(static_cast<std::size_t>(max_src) + 1);
    for (std::size_t i = 0; i < s.y.size(); ++i) {
        if (static_cast<std::size_t>(s.y[i]) >= ds.c) {
            throw ParseError(src.string() + ": label " + std::to_string(s.y[i]) + " outside [0," +
                                 std::to_string(ds.c) + ")",
                             0);
        }
    }
    std::vector<bool> seen(ds.c, false);
    for (int y : s.y) seen[static_cast<std::size_t>(y)] = true;
    for (std::size_t k = 0; k < ds.c; ++k) {
        if (!seen[k]) throw ParseError(src.string() + ": known category " + std::to_string(k) + " has no rows", 0);
    }
    const int max_tgt = *std::max_element(t.y.begin(), t.y.end());
    ds.c_total = std::max<std::size_t>(static_cast<std::size_t>(max_tgt) + 1, ds.c);
    ds.x_src = std::move(s.x);
    ds.y_src = std::move(s.y);
    ds.x_tgt = std::move(t.x);
    ds.y_tgt_hidden = std::move(t.y);
    if (ds.c_total <= ds.c) {
        throw ParseError(tgt.string() + ": no target row belongs to a category beyond the source", 0);
    }
    ds.validate();
    if (options.standardize) standardize_with_source_stats(ds);
    return ds;
}

void save_csv(const OsdaDataset& ds, const std::filesystem::path& src, const std::filesystem::path& tgt) {
    auto write = [](const std::filesystem::path& path, const Matrix& x, const std::vector<int>& y,
                    const char* label_name) {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
        for (std::size_t j = 0; j < x.cols; ++j) out << "feat_" << j << ',';
        out << label_name << '\n';
        char buf[32];
        for (std::size_t i = 0; i < x.rows; ++i) {
            for (std::size_t j = 0; j < x.cols; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", x(i, j));
                out << buf << ',';
            }
            out << y[i] << '\n';
        }
        if (!out) throw std::runtime_error("failed writing " + path.string());
    };
    write(src, ds.x_src, ds.y_src, "label");
    write(tgt, ds.x_tgt, ds.y_tgt_hidden, "hidden_label");
}

} // namespace aal
