#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mialab/tensor.hpp"

namespace mia {

/// Classification dataset: n x d feature matrix plus class labels.
struct Dataset {
    Tensor features; // shape [n, d]
    std::vector<std::size_t> labels;
    std::size_t num_classes = 0;
    std::string name;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.shape.size() == 2 ? features.shape[1] : 0; }

    /// Copy of record i as a flat d-vector.
    Tensor row(std::size_t i) const;

    void validate() const;
};

/// Index sets for one experiment. target_train is the training set D of
/// the model under attack; the attack sets obey the documented
/// disjointness rules (members inside D, non-members outside D and the
/// fine-tune set, train and test attack sets disjoint).
struct SplitPlan {
    std::vector<std::size_t> target_train;
    std::vector<std::size_t> target_test;
    std::vector<std::size_t> attack_train_members;
    std::vector<std::size_t> attack_train_nonmembers;
    std::vector<std::size_t> attack_test_members;
    std::vector<std::size_t> attack_test_nonmembers;
    std::vector<std::size_t> finetune_set;

    /// Throws ArgumentError when any disjointness or balance rule is
    /// violated.
    void validate() const;
};

struct SplitSizes {
    std::size_t target_train = 0;
    std::size_t target_test = 0;
    std::size_t attack_train_members = 0;
    std::size_t attack_train_nonmembers = 0;
    std::size_t attack_test_members = 0;
    std::size_t attack_test_nonmembers = 0;
    std::size_t finetune = 0;
};

/// Binary records clustered around K random prototypes; label = prototype
/// index, each bit flipped with probability cluster_spread. Deterministic
/// in seed.
Dataset synth_purchase_like(std::size_t n, std::size_t d, std::size_t num_classes,
                            double cluster_spread, std::uint64_t seed);

struct CsvSchema {
    std::string label_column;
    std::size_t num_classes = 0;
};

/// Reads a numeric CSV with a header row. All non-label columns become
/// features; the label column must hold integers < num_classes.
Dataset load_csv(const std::string& path, const CsvSchema& schema);

/// Writes the dataset as CSV (features f0..f{d-1} plus the label column).
void save_csv(const Dataset& ds, const std::string& path,
              const std::string& label_column = "label");

/// Uniformly random disjoint assignment satisfying every SplitPlan rule;
/// deterministic in seed. Non-member pools may overlap target_test (test
/// records are the natural non-member population) but never D or the
/// fine-tune set.
SplitPlan make_split(const Dataset& ds, const SplitSizes& sizes, std::uint64_t seed);

/// Fisher-Yates shuffle of 0..n-1 under the given stream.
std::vector<std::size_t> shuffled_indices(std::size_t n, class Rng& rng);

} // namespace mia
