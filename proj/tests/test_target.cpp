#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "mialab/target.hpp"

using namespace mia;

namespace {

// Linearly separable two-class set: one feature, sign decides the class.
Dataset separable(std::size_t n) {
    Dataset ds;
    ds.features = Tensor::zeros({n, 1});
    ds.labels.resize(n);
    ds.num_classes = 2;
    ds.name = "separable";
    for (std::size_t i = 0; i < n; ++i) {
        const double v = (i % 2 == 0) ? 1.0 + 0.01 * static_cast<double>(i)
                                      : -1.0 - 0.01 * static_cast<double>(i);
        ds.features.data[i] = v;
        ds.labels[i] = v > 0 ? 1 : 0;
    }
    return ds;
}

SplitPlan trivial_split(std::size_t n_train, std::size_t n_test) {
    SplitPlan plan;
    for (std::size_t i = 0; i < n_train; ++i) plan.target_train.push_back(i);
    for (std::size_t i = 0; i < n_test; ++i) plan.target_test.push_back(n_train + i);
    return plan;
}

} // namespace

TEST_CASE("a single dense layer fits linearly separable data") {
    const Dataset ds = separable(40);
    SplitPlan plan = trivial_split(30, 10);
    TargetConfig cfg;
    cfg.layer_sizes = {1, 2};
    cfg.optimizer = OptKind::Adam;
    cfg.learning_rate = 0.01;
    cfg.epochs = 50;
    cfg.batch_size = 8;

    const TrainResult result = train_target(ds, plan, cfg, 11);
    CHECK(result.train_accuracy.back() == doctest::Approx(1.0));
    CHECK(result.best_epoch >= 1);
}

TEST_CASE("zero epochs returns the initialization at chance accuracy") {
    const Dataset ds = synth_purchase_like(200, 12, 4, 0.2, 9);
    SplitPlan plan = trivial_split(100, 100);
    TargetConfig cfg;
    cfg.layer_sizes = {12, 8, 4};
    cfg.epochs = 0;

    const TrainResult result = train_target(ds, plan, cfg, 3);
    REQUIRE(result.snapshots.size() == 1);
    CHECK(result.snapshots[0].epoch == 0);
    Network net = result.snapshots[0].to_network();
    const double acc = accuracy(net, ds, plan.target_test);
    CHECK(acc > 0.05);
    CHECK(acc < 0.6); // near 1/K with near-zero weights
}

TEST_CASE("training twice with one seed gives identical curves") {
    const Dataset ds = synth_purchase_like(120, 10, 4, 0.3, 21);
    SplitPlan plan = trivial_split(80, 40);
    TargetConfig cfg;
    cfg.layer_sizes = {10, 16, 4};
    cfg.epochs = 5;
    cfg.snapshot_epochs = {3, 5};

    const TrainResult a = train_target(ds, plan, cfg, 77);
    const TrainResult b = train_target(ds, plan, cfg, 77);
    CHECK(a.train_accuracy == b.train_accuracy);
    CHECK(a.test_accuracy == b.test_accuracy);
    REQUIRE(a.snapshots.size() == 2);
    for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
        CHECK(a.snapshots[i].params == b.snapshots[i].params);
    }
}

TEST_CASE("snapshots are immutable under later training") {
    const Dataset ds = synth_purchase_like(100, 10, 4, 0.3, 2);
    SplitPlan plan = trivial_split(60, 40);
    TargetConfig cfg;
    cfg.layer_sizes = {10, 8, 4};
    cfg.epochs = 6;
    cfg.snapshot_epochs = {2};

    const TrainResult r = train_target(ds, plan, cfg, 5);
    // Re-run and stop at epoch 2 to reproduce that snapshot.
    TargetConfig cfg2 = cfg;
    cfg2.epochs = 2;
    cfg2.snapshot_epochs = {2};
    const TrainResult r2 = train_target(ds, plan, cfg2, 5);
    CHECK(r.snapshots[0].params == r2.snapshots[0].params);
}

TEST_CASE("fine-tuning with zero learning rate keeps parameters") {
    const Dataset ds = synth_purchase_like(60, 8, 3, 0.2, 13);
    SplitPlan plan = trivial_split(30, 20);
    TargetConfig cfg;
    cfg.layer_sizes = {8, 6, 3};
    cfg.epochs = 3;
    const TrainResult base = train_target(ds, plan, cfg, 1);

    std::vector<std::size_t> delta{50, 51, 52, 53};
    TargetConfig ft = cfg;
    ft.epochs = 1;
    ft.learning_rate = 0.0;
    const ModelSnapshot tuned = finetune_target(base.best, ds, plan.target_train, delta, ft, 2);
    CHECK(tuned.params == base.best.params);
}

TEST_CASE("fine-tuning reduces the loss on the new data") {
    const Dataset ds = synth_purchase_like(300, 20, 5, 0.25, 8);
    SplitPlan plan = trivial_split(150, 100);
    TargetConfig cfg;
    cfg.layer_sizes = {20, 24, 5};
    cfg.epochs = 5;
    const TrainResult base = train_target(ds, plan, cfg, 4);

    std::vector<std::size_t> delta;
    for (std::size_t i = 250; i < 300; ++i) delta.push_back(i);

    Network before = base.best.to_network();
    const double loss_before = mean_loss(before, ds, delta);

    TargetConfig ft = cfg;
    ft.epochs = 10;
    const ModelSnapshot tuned = finetune_target(base.best, ds, plan.target_train, delta, ft, 6);
    Network after = tuned.to_network();
    const double loss_after = mean_loss(after, ds, delta);
    CHECK(loss_after < loss_before);
}

TEST_CASE("fine-tune set overlapping D is rejected") {
    const Dataset ds = synth_purchase_like(50, 8, 3, 0.2, 3);
    SplitPlan plan = trivial_split(30, 10);
    TargetConfig cfg;
    cfg.layer_sizes = {8, 3};
    cfg.epochs = 1;
    const TrainResult base = train_target(ds, plan, cfg, 1);
    std::vector<std::size_t> delta{29, 40}; // 29 is in D
    CHECK_THROWS_AS(finetune_target(base.best, ds, plan.target_train, delta, cfg, 0),
                    ArgumentError);
}

TEST_CASE("a 60/40 split of 1000 training records sizes D and D_delta") {
    const Dataset ds = synth_purchase_like(1200, 6, 3, 0.2, 10);
    SplitSizes sizes;
    sizes.target_train = 600;
    sizes.finetune = 400;
    sizes.target_test = 100;
    const SplitPlan plan = make_split(ds, sizes, 12);
    CHECK(plan.target_train.size() == 600);
    CHECK(plan.finetune_set.size() == 400);
}

TEST_CASE("snapshot files round-trip") {
    const Dataset ds = synth_purchase_like(60, 10, 3, 0.2, 5);
    SplitPlan plan = trivial_split(40, 20);
    TargetConfig cfg;
    cfg.layer_sizes = {10, 12, 3};
    cfg.epochs = 2;
    const TrainResult r = train_target(ds, plan, cfg, 9);

    const auto path = std::filesystem::temp_directory_path() / "mia_test_snap.snap";
    save_snapshot(r.best, path.string());
    const ModelSnapshot back = load_snapshot(path.string());
    CHECK(back.epoch == r.best.epoch);
    CHECK(back.arch == r.best.arch);
    REQUIRE(back.params.size() == r.best.params.size());
    for (std::size_t i = 0; i < back.params.size(); ++i) {
        CHECK(back.params[i] == r.best.params[i]);
    }
    std::filesystem::remove(path);

    CHECK_THROWS_AS(load_snapshot("/nonexistent/missing.snap"), IoError);
}

TEST_CASE("target config validation") {
    const Dataset ds = synth_purchase_like(50, 8, 3, 0.2, 3);
    SplitPlan plan = trivial_split(30, 10);
    TargetConfig cfg;
    cfg.layer_sizes = {8, 5}; // wrong output size
    cfg.epochs = 1;
    CHECK_THROWS_AS(train_target(ds, plan, cfg, 0), ArgumentError);

    cfg.layer_sizes = {8, 3};
    cfg.snapshot_epochs = {7}; // beyond epochs
    CHECK_THROWS_AS(train_target(ds, plan, cfg, 0), ArgumentError);

    cfg.snapshot_epochs = {};
    SplitPlan empty;
    empty.target_test = plan.target_test;
    CHECK_THROWS_AS(train_target(ds, empty, cfg, 0), ArgumentError);
}
