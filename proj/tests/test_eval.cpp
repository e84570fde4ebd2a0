#include <cmath>
#include <random>

#include "doctest.h"
#include "jointdag/errors.hpp"
#include "jointdag/eval.hpp"
#include "jointdag/io.hpp"
#include "test_util.hpp"

using namespace jointdag;

namespace {

ExperimentConfig small_experiment() {
    ExperimentConfig cfg;
    cfg.model.p = 10;
    cfg.model.K = 2;
    cfg.model.core_edges = 8;
    cfg.model.extra_edges = 2;
    cfg.samples_per_class = {120, 120};
    cfg.replicates = 2;
    cfg.scaling_grid = {2.0, 3.0};
    cfg.tuning_grid = {0.5, 2.0, 8.0, 64.0};
    cfg.master_seed = 77;
    cfg.pipeline.lasso.grid_size = 12;
    cfg.pipeline.lasso.cv_folds = 4;
    return cfg;
}

}  // namespace

TEST_CASE("confusion counts") {
    const Dag truth(3, {{0, 1}});
    CHECK(confusion(truth, truth).fp == 0);
    CHECK(confusion(truth, truth).fn == 0);

    const Confusion empty = confusion(Dag(3), truth);
    CHECK(empty.tp == 0);
    CHECK(empty.fn == 1);

    // Hand enumeration of the three pairs under the skeleton convention.
    const Dag est(3, {{1, 0}, {1, 2}});
    const Confusion c = confusion(est, truth);
    CHECK(c.tp == 1);
    CHECK(c.fp == 1);
    CHECK(c.fn == 0);
    CHECK(c.tn == 1);

    CHECK_THROWS_AS(confusion(Dag(2), Dag(3)), SizeMismatchError);
}

TEST_CASE("confusion identities hold on random graphs") {
    std::mt19937_64 rng(211);
    for (int rep = 0; rep < 25; ++rep) {
        const Dag a = testutil::random_dag(6, 0.4, rng);
        const Dag b = testutil::random_dag(6, 0.4, rng);
        const Confusion c = confusion(a, b);
        CHECK(c.tp + c.fn == static_cast<long>(skeleton_vstructures(b).skeleton.size()));
        CHECK(c.fp + c.tn ==
              15 - static_cast<long>(skeleton_vstructures(b).skeleton.size()));
    }
}

TEST_CASE("hub_nodes thresholds strictly") {
    Dag star(7);
    for (int leaf = 1; leaf <= 6; ++leaf) star.add_edge(0, leaf);
    CHECK(hub_nodes(star, 5) == std::set<int>{0});
    CHECK(hub_nodes(Dag(4), 5).empty());
    Dag star5(6);
    for (int leaf = 1; leaf <= 5; ++leaf) star5.add_edge(0, leaf);
    CHECK(hub_nodes(star5, 5).empty());
}

TEST_CASE("run_comparison smoke and determinism") {
    const ExperimentConfig cfg = small_experiment();
    const MetricsSummary s1 = run_comparison(cfg, 1);
    CHECK(s1.cells.size() == 4);  // 2 methods x 2 scaling constants
    for (const auto& cell : s1.cells) {
        CHECK(cell.shd.size() == 2);
        CHECK(cell.mean_shd() >= 0.0);
        CHECK(cell.mean_tpr() >= 0.0);
        CHECK(cell.mean_tpr() <= 1.0);
        CHECK(cell.mean_fpr() >= 0.0);
        CHECK(cell.mean_fpr() <= 1.0);
    }
    for (const auto& err : s1.replicate_errors) CHECK(err.empty());

    // Identical master seed replays identically; jobs do not matter.
    const MetricsSummary s2 = run_comparison(cfg, 2);
    REQUIRE(s1.cells.size() == s2.cells.size());
    for (std::size_t i = 0; i < s1.cells.size(); ++i) {
        CHECK(s1.cells[i].shd == s2.cells[i].shd);
        CHECK(s1.cells[i].tpr == s2.cells[i].tpr);
        CHECK(s1.cells[i].fpr == s2.cells[i].fpr);
    }
}

TEST_CASE("reported SHD matches a recomputation from the pipeline outputs") {
    const ExperimentConfig cfg = small_experiment();
    const MetricsSummary summary = run_comparison(cfg, 1);

    // Re-run replicate 0 at c = 2 by hand and compare the recorded value.
    const ReplicateInstance inst = make_replicate(cfg, 0);
    const std::uint64_t base = derive_seed(cfg.master_seed, 0);
    const FitResult joint =
        joint_pipeline(inst.data, 2.0, cfg.pipeline, derive_seed(base, (1u << 20) + 0), 1);
    double shd_sum = 0.0;
    for (int k = 0; k < cfg.model.K; ++k)
        shd_sum += shd(joint.per_class[k].dag(), inst.true_dags[k]);
    const MethodCell* cell = summary.find("joint", 2.0);
    REQUIRE(cell != nullptr);
    CHECK(cell->shd[0] == doctest::Approx(shd_sum / cfg.model.K).epsilon(1e-12));

    // The serialized class estimates carry the same SHD after a round trip.
    const auto tmp = std::filesystem::temp_directory_path() / "jointdag_eval_roundtrip.sem";
    io::write_sem(tmp, joint.per_class[0]);
    CHECK(shd(io::read_sem(tmp).dag(), inst.true_dags[0]) ==
          shd(joint.per_class[0].dag(), inst.true_dags[0]));
    std::filesystem::remove(tmp);
}

TEST_CASE("roc_sweep produces sorted curves with extreme penalties at the origin") {
    const ExperimentConfig cfg = small_experiment();
    const RocCurves curves = roc_sweep(cfg, 2);
    REQUIRE(curves.joint.size() == cfg.tuning_grid.size());
    REQUIRE(curves.separate.size() == cfg.tuning_grid.size());
    for (std::size_t i = 1; i < curves.joint.size(); ++i)
        CHECK(curves.joint[i - 1].fpr <= curves.joint[i].fpr);

    // The huge penalty produces (almost) empty graphs: the origin.
    bool joint_origin = false;
    for (const auto& pt : curves.joint)
        if (pt.c == 64.0 && pt.fpr == 0.0) joint_origin = true;
    CHECK(joint_origin);
}

TEST_CASE("stability selection frequencies and thresholds") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
    a(0, 1) = 0.9;
    const SemModel m(a, Eigen::VectorXd::Ones(2));
    Rng rng(223);
    const MultiDataset data({sample(m, 400, rng)});

    PipelineConfig pcfg;
    pcfg.lasso.grid_size = 10;
    pcfg.lasso.cv_folds = 4;
    const StabilityResult res = stability_selection(data, pcfg, 20, 0.5, 0.9, 31, 2);
    CHECK(res.subsamples == 20);
    // The strong edge is selected in (nearly) every subsample.
    CHECK(res.union_freq(0, 1) + res.union_freq(1, 0) >= 0.9);

    // threshold 0 keeps everything ever selected; threshold 1 only the
    // always-selected edges.
    const StabilityResult all = stability_selection(data, pcfg, 5, 0.5, 0.0, 31, 1);
    for (int k = 0; k < 1; ++k)
        for (const auto& [i, j] : all.class_selected[k]) CHECK(all.class_freq[k](i, j) > 0.0);
    const StabilityResult strict = stability_selection(data, pcfg, 5, 0.5, 1.0, 31, 1);
    for (const auto& [i, j] : strict.union_selected) CHECK(strict.union_freq(i, j) == 1.0);

    // Subsample evaluation order does not change the frequencies.
    const StabilityResult seq = stability_selection(data, pcfg, 6, 0.5, 0.5, 47, 1);
    const StabilityResult par = stability_selection(data, pcfg, 6, 0.5, 0.5, 47, 2);
    CHECK(seq.union_freq == par.union_freq);
    for (int k = 0; k < 1; ++k) CHECK(seq.class_freq[k] == par.class_freq[k]);
}

TEST_CASE("experiment config validation") {
    ExperimentConfig cfg = small_experiment();
    cfg.samples_per_class = {100};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_experiment();
    cfg.replicates = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_experiment();
    cfg.scaling_grid.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
