#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "viewhash/io.hpp"
#include "viewhash/pipeline.hpp"
#include "viewhash/rng.hpp"

using namespace vh;

namespace {

DescriptorSet toy_database(std::uint64_t seed, int objects = 2, int views = 16,
                           double coherence = 0.8) {
    HemisphereSampling spec;
    spec.views_per_radius = views / 2;
    spec.in_plane_steps = 2;
    spec.scale_steps = 1;
    std::vector<SyntheticObjectModel> models;
    for (int i = 0; i < objects; ++i)
        models.push_back(make_random_model(static_cast<std::uint32_t>(i + 1), 4, 4, 0.6,
                                           coherence, derive_seed(seed, "model", i)));
    return generate_database(models, spec, seed, 1)[0];
}

ScaleIndex toy_index(const DescriptorSet& db, Strategy strategy, std::uint64_t seed,
                     int k = 1) {
    IndexBuildConfig cfg;
    cfg.strategy = strategy;
    cfg.tables_per_scale = k;
    cfg.seed = seed;
    return build_scale_index(db, cfg);
}

}  // namespace

TEST_CASE("slide_and_detect") {
    auto db = toy_database(101);
    auto index = toy_index(db, Strategy::TBS, 7);
    ThresholdMap thresholds;
    thresholds.fallback = 0.99;

    SUBCASE("noiseless plant recovered with score 1") {
        auto scene = compose_scene(db, {{5, {3, 2}}}, 16, 16, 0.0, 0.0, 21);
        auto dets = slide_and_detect(scene, db, index, thresholds);
        REQUIRE(!dets.empty());
        bool found = false;
        for (const auto& d : dets)
            if (d.x == 3 && d.y == 2 && d.descriptor_id == 5 &&
                d.score == doctest::Approx(1.0))
                found = true;
        CHECK(found);
    }
    SUBCASE("empty index yields no detections") {
        DescriptorSet empty_db = db;
        empty_db.descriptors.clear();
        ScaleIndex empty_index;
        empty_index.window_width = db.grid_width;
        empty_index.window_height = db.grid_height;
        auto scene = compose_scene(db, {{0, {0, 0}}}, 16, 16, 0.1, 0.0, 22);
        CHECK(slide_and_detect(scene, empty_db, empty_index, thresholds).empty());
    }
    SUBCASE("scale mismatch rejected") {
        ScaleIndex bad = index;
        bad.window_width = static_cast<std::uint16_t>(db.grid_width + 1);
        auto scene = compose_scene(db, {}, 16, 16, 0.0, 0.0, 23);
        CHECK_THROWS_AS(slide_and_detect(scene, db, bad, thresholds),
                        std::invalid_argument);
    }
    SUBCASE("detections sorted by score descending") {
        auto scene = compose_random_scene(db, 20, 20, 3, 0.05, 0.05, 24);
        ThresholdMap lax;
        lax.fallback = 0.2;
        auto dets = slide_and_detect(scene, db, index, lax);
        for (std::size_t i = 1; i < dets.size(); ++i)
            CHECK(dets[i - 1].score >= dets[i].score);
    }
}

TEST_CASE("filter property: hashed detections never exceed the exhaustive oracle") {
    auto db = toy_database(202, 3, 24);
    auto index = toy_index(db, Strategy::TBV, 9);
    for (int trial = 0; trial < 10; ++trial) {
        auto scene = compose_random_scene(db, 18, 18, 2, 0.05, 0.1, 300 + trial);
        ThresholdMap thresholds;
        thresholds.fallback = 0.4;
        auto hashed = slide_and_detect(scene, db, index, thresholds);
        auto oracle = exhaustive_detect(scene, db, thresholds);
        for (const auto& h : hashed) {
            bool matched = false;
            for (const auto& o : oracle)
                if (o.x == h.x && o.y == h.y && o.score >= h.score) matched = true;
            CHECK(matched);
        }
    }
}

TEST_CASE("exhaustive_detect completeness at eps 0") {
    auto db = toy_database(303);
    ThresholdMap thresholds;
    thresholds.fallback = 1.0;
    for (int trial = 0; trial < 5; ++trial) {
        auto scene = compose_random_scene(db, 16, 16, 2, 0.1, 0.0, 400 + trial);
        auto eval = evaluate_detections(scene, db, exhaustive_detect(scene, db, thresholds));
        CHECK(eval.recall == doctest::Approx(1.0));
    }
}

TEST_CASE("calibrate_thresholds") {
    auto db = toy_database(404);
    auto make_scenes = [&](double eps) {
        std::vector<SceneInstance> scenes;
        for (int i = 0; i < 10; ++i)
            scenes.push_back(compose_random_scene(db, 16, 16, 2, 0.05, eps, 500 + i));
        return scenes;
    };
    SUBCASE("noiseless scenes admit threshold 1") {
        auto cal = calibrate_thresholds(db, make_scenes(0.0), 0.98);
        CHECK(cal.unreachable_objects.empty());
        for (const auto& [obj, t] : cal.thresholds.per_object)
            CHECK(t == doctest::Approx(1.0));
    }
    SUBCASE("target 0 is vacuous") {
        auto cal = calibrate_thresholds(db, make_scenes(0.1), 0.0);
        for (const auto& [obj, t] : cal.thresholds.per_object)
            CHECK(t == doctest::Approx(1.0));
    }
    SUBCASE("noisy scenes push thresholds below 1") {
        auto cal = calibrate_thresholds(db, make_scenes(0.2), 0.98);
        for (const auto& [obj, t] : cal.thresholds.per_object) {
            CHECK(t < 1.0);
            CHECK(t >= 0.0);
        }
    }
}

TEST_CASE("matching_ratio") {
    CHECK(matching_ratio(0, 100, 640, 480, 8) == 0.0);
    CHECK(matching_ratio(10000, 46725, 640, 480, 8) ==
          doctest::Approx(10000.0 / 224280000.0));
    CHECK(matching_ratio(46725.0 * 4800, 46725, 640, 480, 8) == doctest::Approx(1.0));
    CHECK_THROWS_AS(matching_ratio(1, 0, 640, 480, 8), std::invalid_argument);
}

TEST_CASE("determinism: identical seeds give identical runs") {
    auto db = toy_database(505);
    auto index = toy_index(db, Strategy::TBV, 3);
    ThresholdMap thresholds;
    auto scene = compose_random_scene(db, 18, 18, 2, 0.05, 0.1, 606);
    auto a = slide_and_detect(scene, db, index, thresholds);
    auto b = slide_and_detect(scene, db, index, thresholds);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].descriptor_id == b[i].descriptor_id);
        CHECK(a[i].score == b[i].score);
    }
}

TEST_CASE("fit_loglog_exponent") {
    SUBCASE("exact power law") {
        std::vector<std::size_t> sizes{10, 100, 1000};
        std::vector<double> times;
        for (auto s : sizes) times.push_back(3.0 * std::pow(s, 0.7));
        CHECK(fit_loglog_exponent(sizes, times) == doctest::Approx(0.7));
    }
    SUBCASE("degenerate fit is NaN") {
        CHECK(std::isnan(fit_loglog_exponent({10}, {1.0})));
    }
}

TEST_CASE("scaling_experiment emits one row per size") {
    auto db = toy_database(707, 2, 32);
    ExperimentScenes scenes;
    scenes.scene_width = 14;
    scenes.scene_height = 14;
    scenes.num_scenes = 2;
    auto rows = scaling_experiment(db, {32, 64}, Strategy::TBS, {1, 2}, scenes, false);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].descriptors == 32);
    CHECK(rows[1].descriptors == 64);
    CHECK_THROWS_AS(scaling_experiment(db, {64, 32}, Strategy::TBS, {1}, scenes, false),
                    std::invalid_argument);
}
