#include <doctest.h>

#include <filesystem>

#include "viewhash/io.hpp"
#include "viewhash/pipeline.hpp"

using namespace vh;

namespace {

std::filesystem::path tmp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "viewhash_io_test";
    std::filesystem::create_directories(dir);
    return dir;
}

DescriptorSet sample_db(std::uint64_t seed) {
    HemisphereSampling spec;
    spec.views_per_radius = 8;
    spec.in_plane_steps = 2;
    spec.scale_steps = 1;
    auto models = std::vector{make_random_model(1, 3, 3, 0.6, 0.8, seed),
                              make_random_model(2, 3, 3, 0.6, 0.8, seed + 1)};
    return generate_database(models, spec, seed, 1)[0];
}

}  // namespace

TEST_CASE("descriptor database round-trip") {
    auto db = sample_db(1);
    const auto path = tmp_dir() / "db.bin";
    write_descriptor_db(path, db);
    auto back = read_descriptor_db(path);
    REQUIRE(back.size() == db.size());
    CHECK(back.bit_width == db.bit_width);
    CHECK(back.grid_width == db.grid_width);
    for (std::size_t i = 0; i < db.size(); ++i) {
        CHECK(back.descriptors[i].bits == db.descriptors[i].bits);
        CHECK(back.descriptors[i].object_id == db.descriptors[i].object_id);
        CHECK(back.descriptors[i].view_id == db.descriptors[i].view_id);
        CHECK(back.descriptors[i].pose.w == db.descriptors[i].pose.w);
        CHECK(back.descriptors[i].foreground_cell_count ==
              db.descriptors[i].foreground_cell_count);
    }
}

TEST_CASE("key file round-trip") {
    std::vector<HashKey> keys(2);
    keys[0].strategy = Strategy::TBV;
    keys[0].positions = {4, 99, 12};
    keys[1].strategy = Strategy::RBS;
    keys[1].positions = {0};
    const auto path = tmp_dir() / "keys.txt";
    write_keys(path, keys);
    auto back = read_keys(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].strategy == Strategy::TBV);
    CHECK(back[0].positions == keys[0].positions);
    CHECK(back[1].positions == keys[1].positions);
}

TEST_CASE("index round-trip preserves retrieval") {
    auto db = sample_db(2);
    IndexBuildConfig cfg;
    cfg.strategy = Strategy::TBS;
    cfg.tables_per_scale = 2;
    auto index = build_scale_index(db, cfg);
    const auto path = tmp_dir() / "index.bin";
    write_index(path, index);
    auto back = read_index(path);
    REQUIRE(back.tables.size() == index.tables.size());
    CHECK(back.window_width == index.window_width);
    for (std::size_t t = 0; t < index.tables.size(); ++t) {
        CHECK(back.tables[t].key.positions == index.tables[t].key.positions);
        CHECK(back.tables[t].buckets == index.tables[t].buckets);
    }
    for (std::uint32_t id = 0; id < db.size(); ++id) {
        auto spread_bits = spread(db.descriptors[id], 1).bits;
        CHECK(retrieve(back, spread_bits) == retrieve(index, spread_bits));
    }
}

TEST_CASE("scene round-trip") {
    auto db = sample_db(3);
    auto scene = compose_random_scene(db, 12, 12, 2, 0.1, 0.0, 4);
    const auto grid_path = tmp_dir() / "scene.bin";
    const auto sidecar = tmp_dir() / "scene.txt";
    write_scene(grid_path, sidecar, scene);
    auto back = read_scene(grid_path, sidecar);
    CHECK(back.grid.cells == scene.grid.cells);
    REQUIRE(back.plants.size() == scene.plants.size());
    for (std::size_t i = 0; i < scene.plants.size(); ++i) {
        CHECK(back.plants[i].descriptor_id == scene.plants[i].descriptor_id);
        CHECK(back.plants[i].x == scene.plants[i].x);
        CHECK(back.plants[i].y == scene.plants[i].y);
    }
}

TEST_CASE("missing file raises an I/O error") {
    CHECK_THROWS_AS(read_descriptor_db(tmp_dir() / "nope.bin"), std::runtime_error);
}

TEST_CASE("format_number uses 6 significant digits") {
    CHECK(format_number(4.459e-5) == "4.459e-05");
    CHECK(format_number(0.123456789) == "0.123457");
    CHECK(format_number(1.0) == "1");
}
