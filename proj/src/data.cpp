#include "mialab/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "mialab/rng.hpp"

namespace mia {

Tensor Dataset::row(std::size_t i) const {
    const std::size_t d = dim();
    Tensor out = Tensor::zeros({d});
    const double* src = &features.data[i * d];
    std::copy(src, src + d, out.data.begin());
    return out;
}

void Dataset::validate() const {
    if (size() < 1) throw ArgumentError("dataset is empty");
    if (features.shape.size() != 2 || features.shape[0] != size()) {
        throw DimensionError("feature matrix shape does not match label count");
    }
    if (num_classes < 1) throw ArgumentError("dataset needs at least one class");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes) {
            throw ArgumentError("label " + std::to_string(labels[i]) + " at row " +
                                std::to_string(i) + " exceeds class count " +
                                std::to_string(num_classes));
        }
    }
    require_finite(features, "dataset features");
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.next_below(i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

Dataset synth_purchase_like(std::size_t n, std::size_t d, std::size_t num_classes,
                            double cluster_spread, std::uint64_t seed) {
    if (num_classes < 2 || n < num_classes || d < 1) {
        throw ArgumentError("synthetic generator needs n >= K >= 2 and d >= 1");
    }
    if (cluster_spread < 0.0 || cluster_spread > 1.0) {
        throw ArgumentError("cluster_spread must lie in [0, 1]");
    }

    Rng proto_rng = Rng::derive(seed, {0x70u});
    Tensor prototypes = Tensor::zeros({num_classes, d});
    for (double& v : prototypes.data) v = proto_rng.next_double() < 0.5 ? 0.0 : 1.0;

    Dataset ds;
    ds.features = Tensor::zeros({n, d});
    ds.labels.resize(n);
    ds.num_classes = num_classes;
    ds.name = "synthetic";

    Rng rec_rng = Rng::derive(seed, {0x71u});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rec_rng.next_below(num_classes);
        ds.labels[i] = c;
        const double* proto = &prototypes.data[c * d];
        double* out = &ds.features.data[i * d];
        for (std::size_t j = 0; j < d; ++j) {
            const bool flip = rec_rng.next_double() < cluster_spread;
            out[j] = flip ? 1.0 - proto[j] : proto[j];
        }
    }
    return ds;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, const std::string& col) {
    const std::string s = trim(raw);
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError("non-numeric cell '" + raw + "' in column " + col + " at data row " +
                          std::to_string(row));
    }
}

} // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string header;
    if (!std::getline(in, header)) throw FormatError("empty file " + path);
    const std::vector<std::string> cols = split_line(header);

    std::size_t label_idx = cols.size();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (trim(cols[i]) == schema.label_column) label_idx = i;
    }
    if (label_idx == cols.size()) {
        throw FormatError("label column '" + schema.label_column + "' not found in " + path);
    }
    const std::size_t d = cols.size() - 1;
    if (d == 0) throw FormatError("no feature columns in " + path);

    std::vector<double> values;
    std::vector<std::size_t> labels;
    std::string line;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != cols.size()) {
            throw FormatError("row " + std::to_string(row) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(cols.size()));
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const double v = parse_cell(cells[i], row, cols[i]);
            if (i == label_idx) {
                if (v < 0.0 || v != std::floor(v) ||
                    static_cast<std::size_t>(v) >= schema.num_classes) {
                    throw FormatError("label value '" + cells[i] + "' at data row " +
                                      std::to_string(row) + " is not an integer below " +
                                      std::to_string(schema.num_classes));
                }
                labels.push_back(static_cast<std::size_t>(v));
            } else {
                values.push_back(v);
            }
        }
        ++row;
    }
    if (labels.empty()) throw FormatError("no data rows in " + path);

    Dataset ds;
    ds.features = Tensor({labels.size(), d}, std::move(values));
    ds.labels = std::move(labels);
    ds.num_classes = schema.num_classes;
    ds.name = path;
    ds.validate();
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path, const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    const std::size_t d = ds.dim();
    for (std::size_t j = 0; j < d; ++j) out << "f" << j << ",";
    out << label_column << "\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* row = &ds.features.data[i * d];
        for (std::size_t j = 0; j < d; ++j) out << row[j] << ",";
        out << ds.labels[i] << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

namespace {

void require_disjoint(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                      const char* what) {
    // inputs sorted
    std::vector<std::size_t> inter;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
    if (!inter.empty()) {
        throw ArgumentError(std::string("split sets must be disjoint: ") + what);
    }
}

void require_subset(const std::vector<std::size_t>& sub, const std::vector<std::size_t>& super,
                    const char* what) {
    if (!std::includes(super.begin(), super.end(), sub.begin(), sub.end())) {
        throw ArgumentError(std::string("split subset rule violated: ") + what);
    }
}

} // namespace

void SplitPlan::validate() const {
    for (const auto* v : {&target_train, &target_test, &attack_train_members,
                          &attack_train_nonmembers, &attack_test_members,
                          &attack_test_nonmembers, &finetune_set}) {
        if (!std::is_sorted(v->begin(), v->end())) {
            throw ArgumentError("split index sets must be sorted");
        }
        if (std::adjacent_find(v->begin(), v->end()) != v->end()) {
            throw ArgumentError("split index sets must not repeat indices");
        }
    }
    require_subset(attack_train_members, target_train, "attack train members inside D");
    require_subset(attack_test_members, target_train, "attack test members inside D");
    require_disjoint(attack_train_members, attack_test_members,
                     "attack train vs test members");
    require_disjoint(attack_train_nonmembers, attack_test_nonmembers,
                     "attack train vs test non-members");
    require_disjoint(attack_train_nonmembers, target_train, "non-members outside D");
    require_disjoint(attack_test_nonmembers, target_train, "non-members outside D");
    require_disjoint(finetune_set, target_train, "fine-tune set outside D");
    require_disjoint(attack_train_nonmembers, finetune_set, "non-members outside fine-tune set");
    require_disjoint(attack_test_nonmembers, finetune_set, "non-members outside fine-tune set");
    require_disjoint(target_train, target_test, "train vs test");
    if (attack_test_members.size() != attack_test_nonmembers.size()) {
        throw ArgumentError("attack evaluation needs equally many member and non-member samples");
    }
}

SplitPlan make_split(const Dataset& ds, const SplitSizes& sizes, std::uint64_t seed) {
    const std::size_t n = ds.size();
    if (sizes.attack_test_members != sizes.attack_test_nonmembers) {
        throw ArgumentError("attack test member and non-member sizes must match");
    }
    if (sizes.attack_train_members + sizes.attack_test_members > sizes.target_train) {
        throw ArgumentError(
            "attack member sets need " +
            std::to_string(sizes.attack_train_members + sizes.attack_test_members) +
            " records but D holds only " + std::to_string(sizes.target_train));
    }
    const std::size_t reserved = sizes.target_train + sizes.finetune;
    const std::size_t nonmember_need = sizes.attack_train_nonmembers + sizes.attack_test_nonmembers;
    const std::size_t need = reserved + std::max(sizes.target_test, nonmember_need);
    if (need > n) {
        throw ArgumentError("split needs " + std::to_string(need) + " records but dataset has " +
                            std::to_string(n) + " (deficit " + std::to_string(need - n) + ")");
    }

    Rng rng = Rng::derive(seed, {0x5eu});
    const std::vector<std::size_t> perm = shuffled_indices(n, rng);

    auto take = [&perm](std::size_t from, std::size_t count) {
        std::vector<std::size_t> out(perm.begin() + static_cast<std::ptrdiff_t>(from),
                                     perm.begin() + static_cast<std::ptrdiff_t>(from + count));
        std::sort(out.begin(), out.end());
        return out;
    };

    SplitPlan plan;
    plan.target_train = take(0, sizes.target_train);
    plan.attack_train_members = take(0, sizes.attack_train_members);
    plan.attack_test_members = take(sizes.attack_train_members, sizes.attack_test_members);
    plan.finetune_set = take(sizes.target_train, sizes.finetune);
    plan.target_test = take(reserved, sizes.target_test);
    plan.attack_train_nonmembers = take(reserved, sizes.attack_train_nonmembers);
    plan.attack_test_nonmembers =
        take(reserved + sizes.attack_train_nonmembers, sizes.attack_test_nonmembers);
    plan.validate();
    return plan;
}

} // namespace mia
