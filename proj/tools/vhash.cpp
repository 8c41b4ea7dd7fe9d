// Experiment front end: generation, key learning, indexing, detection,
// calibration and the scalability/bucket-balance experiment suites.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "viewhash/io.hpp"
#include "viewhash/pipeline.hpp"
#include "viewhash/rng.hpp"

namespace fs = std::filesystem;
using namespace vh;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitInvariant = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    std::string strategy = "tbv";
    int tables = 1;
    int objects = 2;
    int views = 64;
    double epsilon = 0.1;
    int grid = 4;           // view grid side length, cells
    double fg_density = 0.6;
    double coherence = 0.85;
    int scale_clusters = 1;
    int scene_size = 24;
    int plants = 2;
    double clutter = 0.02;
    int scenes = 10;
    double threshold = 0.5;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--seed", o.seed, "root random seed");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--strategy", o.strategy, "rbs|pbs|tbs|tbv")
        ->check(CLI::IsMember({"rbs", "pbs", "tbs", "tbv"}));
    cmd->add_option("--tables", o.tables, "hash tables per scale");
    cmd->add_option("--objects", o.objects, "number of objects M");
    cmd->add_option("--views", o.views, "views per object N");
    cmd->add_option("--epsilon", o.epsilon, "per-cell corruption rate");
    cmd->add_option("--grid", o.grid, "view grid side length in cells");
    cmd->add_option("--fg-density", o.fg_density, "foreground cell density");
    cmd->add_option("--coherence", o.coherence, "view coherence in [0,1]");
    cmd->add_option("--scale-clusters", o.scale_clusters, "scale clusters");
    cmd->add_option("--scene-size", o.scene_size, "scene side length in cells");
    cmd->add_option("--plants", o.plants, "planted views per scene");
    cmd->add_option("--clutter", o.clutter, "clutter density");
    cmd->add_option("--scenes", o.scenes, "scenes per configuration");
    cmd->add_option("--threshold", o.threshold, "fallback matching threshold");
    cmd->add_option("--config", o.config_path, "flat key=value config file");
}

// Flat key=value config; explicit command-line flags win over file values.
void apply_config(CLI::App* cmd, CommonOpts& o) {
    if (cmd->get_option_no_throw("--config") == nullptr) return;
    if (o.config_path.empty()) return;
    std::ifstream is(o.config_path);
    if (!is) throw std::runtime_error("cannot open config: " + o.config_path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    const auto set = [&](const std::string& key, auto& field) {
        if (cmd->count("--" + key) > 0) return;
        const auto it = kv.find(key);
        if (it == kv.end()) return;
        std::istringstream ss(it->second);
        if (!(ss >> field))
            throw UsageError("bad config value for " + key + ": " + it->second);
    };
    set("seed", o.seed);
    set("strategy", o.strategy);
    set("tables", o.tables);
    set("objects", o.objects);
    set("views", o.views);
    set("epsilon", o.epsilon);
    set("grid", o.grid);
    set("fg-density", o.fg_density);
    set("coherence", o.coherence);
    set("scale-clusters", o.scale_clusters);
    set("scene-size", o.scene_size);
    set("plants", o.plants);
    set("clutter", o.clutter);
    set("scenes", o.scenes);
    set("threshold", o.threshold);
    if (o.strategy != "rbs" && o.strategy != "pbs" && o.strategy != "tbs" &&
        o.strategy != "tbv")
        throw UsageError("unknown strategy: " + o.strategy);
}

// Key names match the long option names so the file feeds back via --config.
void echo_config(const CommonOpts& o, const std::string&) {
    fs::create_directories(o.out_dir);
    std::ofstream os(fs::path(o.out_dir) / "config.txt");
    os << "seed=" << o.seed << "\nstrategy=" << o.strategy << "\ntables=" << o.tables
       << "\nobjects=" << o.objects << "\nviews=" << o.views
       << "\nepsilon=" << o.epsilon << "\ngrid=" << o.grid
       << "\nfg-density=" << o.fg_density << "\ncoherence=" << o.coherence
       << "\nscale-clusters=" << o.scale_clusters << "\nscene-size=" << o.scene_size
       << "\nplants=" << o.plants << "\nclutter=" << o.clutter
       << "\nscenes=" << o.scenes << "\nthreshold=" << o.threshold << "\n";
}

HemisphereSampling sampling_for(const CommonOpts& o) {
    HemisphereSampling spec;
    spec.scale_steps = o.scale_clusters;
    spec.in_plane_steps = 1;
    spec.views_per_radius = std::max(1, o.views / o.scale_clusters);
    return spec;
}

std::vector<DescriptorSet> build_database(const CommonOpts& o) {
    std::vector<SyntheticObjectModel> models;
    for (int i = 0; i < o.objects; ++i)
        models.push_back(make_random_model(static_cast<std::uint32_t>(i + 1),
                                           static_cast<std::uint16_t>(o.grid),
                                           static_cast<std::uint16_t>(o.grid),
                                           o.fg_density, o.coherence,
                                           derive_seed(o.seed, "model", i)));
    return generate_database(models, sampling_for(o), derive_seed(o.seed, "db"),
                             o.scale_clusters);
}

void print_bucket_stats(const ScaleIndex& index) {
    for (std::size_t t = 0; t < index.tables.size(); ++t) {
        const auto stats = bucket_stats(index.tables[t]);
        std::cout << "scale " << index.scale_cluster << " table " << t << ": key "
                  << strategy_name(index.tables[t].key.strategy) << " b="
                  << index.tables[t].key.length() << " buckets="
                  << index.tables[t].buckets.size() << " used=" << stats.used_buckets
                  << " max=" << stats.max_bucket_size << " stddev="
                  << format_number(stats.stddev_nonempty) << "\n";
    }
}

struct MetricsRow {
    std::string strategy;
    int tables;
    int objects;
    std::size_t descriptors;
    double epsilon;
    std::uint64_t seed;
    double recall, pose_recall, matching_ratio_, retrieved_per_window, wall_ms;
};

// Wall times live in a separate file so the metrics CSV is reproducible
// byte for byte from the same config.
void write_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
    os << "strategy,tables,objects,descriptors,epsilon,seed,recall,pose_recall,"
          "matching_ratio,retrieved_per_window\n";
    for (const auto& r : rows) {
        os << r.strategy << ',' << r.tables << ',' << r.objects << ',' << r.descriptors
           << ',' << format_number(r.epsilon) << ',' << r.seed << ','
           << format_number(r.recall) << ',' << format_number(r.pose_recall) << ','
           << format_number(r.matching_ratio_) << ','
           << format_number(r.retrieved_per_window) << '\n';
    }
}

void write_timings(std::ostream& os, const std::vector<MetricsRow>& rows) {
    os << "strategy,tables,objects,descriptors,seed,wall_ms\n";
    for (const auto& r : rows)
        os << r.strategy << ',' << r.tables << ',' << r.objects << ',' << r.descriptors
           << ',' << r.seed << ',' << format_number(r.wall_ms) << '\n';
}

MetricsRow run_one(const DescriptorSet& db, const CommonOpts& o, Strategy strategy,
                   int tables, std::uint64_t seed) {
    IndexBuildConfig cfg;
    cfg.strategy = strategy;
    cfg.tables_per_scale = tables;
    cfg.seed = derive_seed(seed, "index");
    const auto index = build_scale_index(db, cfg);

    ThresholdMap thresholds;
    thresholds.fallback = o.threshold;
    double recall = 0, pose = 0, retr = 0, wall = 0, ratio = 0;
    for (int s = 0; s < o.scenes; ++s) {
        const auto scene =
            compose_random_scene(db, o.scene_size, o.scene_size, o.plants, o.clutter,
                                 o.epsilon, derive_seed(seed, "scene", s));
        DetectStats stats;
        const auto dets = slide_and_detect(scene, db, index, thresholds, &stats);
        const auto eval = evaluate_detections(scene, db, dets);
        recall += eval.recall;
        pose += eval.pose_recall;
        retr += static_cast<double>(stats.retrieved_total) / stats.windows;
        ratio += matching_ratio(static_cast<double>(stats.retrieved_total), db.size(),
                                o.scene_size, o.scene_size, 1);
        wall += stats.wall_ms;
    }
    MetricsRow row;
    row.strategy = strategy_name(strategy);
    row.tables = tables;
    row.objects = o.objects;
    row.descriptors = db.size();
    row.epsilon = o.epsilon;
    row.seed = seed;
    row.recall = recall / o.scenes;
    row.pose_recall = pose / o.scenes;
    row.matching_ratio_ = ratio / o.scenes;
    row.retrieved_per_window = retr / o.scenes;
    row.wall_ms = wall;
    return row;
}

int cmd_generate(const CommonOpts& o) {
    echo_config(o, "generate");
    const auto clusters = build_database(o);
    for (const auto& set : clusters) {
        const auto tag = "scale" + std::to_string(set.scale_cluster);
        write_descriptor_db(fs::path(o.out_dir) / ("db_" + tag + ".bin"), set);

        IndexBuildConfig cfg;
        cfg.strategy = parse_strategy(o.strategy);
        cfg.tables_per_scale = o.tables;
        cfg.seed = derive_seed(o.seed, "index", set.scale_cluster);
        const auto index = build_scale_index(set, cfg);
        std::vector<HashKey> keys;
        for (const auto& table : index.tables) keys.push_back(table.key);
        write_keys(fs::path(o.out_dir) / ("keys_" + tag + ".txt"), keys);
        write_index(fs::path(o.out_dir) / ("index_" + tag + ".bin"), index);
        const auto scene =
            compose_random_scene(set, o.scene_size, o.scene_size, o.plants, o.clutter,
                                 o.epsilon, derive_seed(o.seed, "demo", set.scale_cluster));
        write_scene(fs::path(o.out_dir) / ("scene_" + tag + ".bin"),
                    fs::path(o.out_dir) / ("scene_" + tag + ".txt"), scene);
        print_bucket_stats(index);
    }
    return kExitOk;
}

int cmd_learn_keys(const CommonOpts& o, const std::string& db_path,
                   const std::string& keys_out) {
    const auto db = read_descriptor_db(db_path);
    IndexBuildConfig cfg;
    cfg.strategy = parse_strategy(o.strategy);
    cfg.tables_per_scale = o.tables;
    cfg.seed = derive_seed(o.seed, "index", db.scale_cluster);
    const auto index = build_scale_index(db, cfg);
    std::vector<HashKey> keys;
    for (const auto& table : index.tables) keys.push_back(table.key);
    write_keys(keys_out, keys);
    std::cout << "wrote " << keys.size() << " key(s) to " << keys_out << "\n";
    return kExitOk;
}

int cmd_build_index(const CommonOpts& o, const std::string& db_path,
                    const std::string& keys_path, const std::string& index_out) {
    const auto db = read_descriptor_db(db_path);
    ScaleIndex index;
    if (!keys_path.empty()) {
        const auto keys = read_keys(keys_path);
        index.scale_cluster = db.scale_cluster;
        index.window_width = db.grid_width;
        index.window_height = db.grid_height;
        std::vector<BitVec> hash_bits(db.size());
        for (std::size_t i = 0; i < db.size(); ++i)
            hash_bits[i] = spread(db.descriptors[i], 1).bits;
        std::vector<std::vector<std::uint32_t>> subsets;
        if (keys.size() == 1) {
            subsets.emplace_back(db.size());
            std::iota(subsets[0].begin(), subsets[0].end(), 0u);
        } else {
            subsets = make_overlapping_subsets(db.size(), static_cast<int>(keys.size()),
                                               0.5, derive_seed(o.seed, "subsets"));
        }
        for (std::size_t t = 0; t < keys.size(); ++t)
            index.tables.push_back(build_table(hash_bits, subsets[t], keys[t]));
    } else {
        IndexBuildConfig cfg;
        cfg.strategy = parse_strategy(o.strategy);
        cfg.tables_per_scale = o.tables;
        cfg.seed = derive_seed(o.seed, "index", db.scale_cluster);
        index = build_scale_index(db, cfg);
    }
    write_index(index_out, index);
    print_bucket_stats(index);
    return kExitOk;
}

int cmd_detect(const CommonOpts& o, const std::string& db_path,
               const std::string& index_path, const std::string& scene_path,
               const std::string& sidecar_path, const std::string& thresholds_path) {
    const auto db = read_descriptor_db(db_path);
    const auto index = read_index(index_path);
    const auto scene = read_scene(scene_path, sidecar_path);
    ThresholdMap thresholds;
    thresholds.fallback = o.threshold;
    if (!thresholds_path.empty()) {
        std::ifstream is(thresholds_path);
        if (!is) throw std::runtime_error("cannot open: " + thresholds_path);
        std::uint32_t obj;
        double t;
        while (is >> obj >> t) thresholds.per_object[obj] = t;
    }
    DetectStats stats;
    const auto dets = slide_and_detect(scene, db, index, thresholds, &stats);
    std::cout << "x,y,object,view,score,candidates\n";
    for (const auto& d : dets)
        std::cout << d.x << ',' << d.y << ',' << d.object_id << ',' << d.view_id << ','
                  << format_number(d.score) << ',' << d.candidates_retrieved << '\n';
    if (!scene.plants.empty()) {
        const auto eval = evaluate_detections(scene, db, dets);
        std::cerr << "recall=" << format_number(eval.recall)
                  << " pose_recall=" << format_number(eval.pose_recall)
                  << " wall_ms=" << format_number(stats.wall_ms) << "\n";
    }
    return kExitOk;
}

int cmd_calibrate(const CommonOpts& o, const std::string& db_path, double target,
                  const std::string& thresholds_out) {
    const auto db = read_descriptor_db(db_path);
    std::vector<SceneInstance> scenes;
    for (int s = 0; s < o.scenes; ++s)
        scenes.push_back(compose_random_scene(db, o.scene_size, o.scene_size, o.plants,
                                              o.clutter, o.epsilon,
                                              derive_seed(o.seed, "cal", s)));
    const auto cal = calibrate_thresholds(db, scenes, target);
    std::ofstream os(thresholds_out);
    if (!os) throw std::runtime_error("cannot open for writing: " + thresholds_out);
    std::map<std::uint32_t, double> sorted(cal.thresholds.per_object.begin(),
                                           cal.thresholds.per_object.end());
    for (const auto& [obj, t] : sorted) os << obj << ' ' << format_number(t) << '\n';
    for (auto obj : cal.unreachable_objects)
        std::cerr << "warning: object " << obj << " cannot reach target recall\n";
    return kExitOk;
}

int cmd_compare(const CommonOpts& o, const std::vector<int>& sizes,
                const std::vector<std::uint64_t>& seeds) {
    echo_config(o, "compare");
    std::vector<MetricsRow> rows;
    for (const auto strategy :
         {Strategy::RBS, Strategy::PBS, Strategy::TBS, Strategy::TBV}) {
        for (int m : sizes) {
            CommonOpts local = o;
            local.objects = m;
            const auto db = build_database(local)[0];
            for (std::uint64_t seed : seeds)
                rows.push_back(run_one(db, local, strategy, o.tables, seed));
        }
    }
    fs::create_directories(o.out_dir);
    std::ofstream os(fs::path(o.out_dir) / "compare.csv");
    write_csv(os, rows);
    std::ofstream ts(fs::path(o.out_dir) / "timings.csv");
    write_timings(ts, rows);
    write_csv(std::cout, rows);
    return kExitOk;
}

int cmd_scaling(const CommonOpts& o, const std::vector<std::size_t>& sizes,
                const std::vector<std::uint64_t>& seeds, bool exhaustive) {
    echo_config(o, "scaling");
    const auto base = build_database(o)[0];
    ExperimentScenes scenes;
    scenes.scene_width = o.scene_size;
    scenes.scene_height = o.scene_size;
    scenes.plants_per_scene = o.plants;
    scenes.clutter_density = o.clutter;
    scenes.epsilon = o.epsilon;
    scenes.num_scenes = o.scenes;
    scenes.threshold = o.threshold;
    const auto rows = scaling_experiment(base, sizes, parse_strategy(o.strategy), seeds,
                                         scenes, exhaustive);
    fs::create_directories(o.out_dir);
    std::ofstream os(fs::path(o.out_dir) / "scaling.csv");
    os << "descriptors,recall,matching_ratio,retrieved_per_window,wall_ms\n";
    std::vector<std::size_t> xs;
    std::vector<double> ts;
    for (const auto& r : rows) {
        os << r.descriptors << ',' << format_number(r.recall) << ','
           << format_number(r.matching_ratio) << ','
           << format_number(r.retrieved_per_window) << ',' << format_number(r.wall_ms)
           << '\n';
        xs.push_back(r.descriptors);
        ts.push_back(r.wall_ms);
    }
    const double exponent = fit_loglog_exponent(xs, ts);
    if (std::isnan(exponent))
        std::cout << "growth exponent: n/a\n";
    else
        std::cout << "growth exponent: " << format_number(exponent) << "\n";
    return kExitOk;
}

int cmd_bucket_stats(const std::string& index_path) {
    print_bucket_stats(read_index(index_path));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hash-based sublinear retrieval of binary view descriptors"};
    app.require_subcommand(1);

    CommonOpts o;
    std::string db_path, index_path, keys_path, scene_path, sidecar_path;
    std::string thresholds_path, out_file;
    std::vector<int> object_sizes{1, 3, 5};
    std::vector<std::size_t> desc_sizes{1000, 2000, 4000};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    double target_recall = 0.98;
    bool exhaustive = false;

    auto* generate = app.add_subcommand("generate", "write database, keys and index");
    add_common(generate, o);

    auto* learn = app.add_subcommand("learn-keys", "learn hash keys for a database");
    add_common(learn, o);
    learn->add_option("--db", db_path, "descriptor database")->required();
    learn->add_option("--keys-out", out_file, "output key file")->required();

    auto* build = app.add_subcommand("build-index", "build hash tables");
    add_common(build, o);
    build->add_option("--db", db_path, "descriptor database")->required();
    build->add_option("--keys", keys_path, "learned key file (optional)");
    build->add_option("--index-out", out_file, "output index file")->required();

    auto* detect = app.add_subcommand("detect", "run the sliding-window detector");
    add_common(detect, o);
    detect->add_option("--db", db_path)->required();
    detect->add_option("--index", index_path)->required();
    detect->add_option("--scene", scene_path)->required();
    detect->add_option("--sidecar", sidecar_path)->required();
    detect->add_option("--thresholds", thresholds_path, "per-object threshold file");

    auto* calibrate = app.add_subcommand("calibrate", "sweep per-object thresholds");
    add_common(calibrate, o);
    calibrate->add_option("--db", db_path)->required();
    calibrate->add_option("--target", target_recall, "target recall");
    calibrate->add_option("--thresholds-out", out_file)->required();

    auto* compare = app.add_subcommand("compare", "compare all four strategies");
    add_common(compare, o);
    compare->add_option("--sizes", object_sizes, "object counts");
    compare->add_option("--seeds", seeds, "seeds");

    auto* scaling = app.add_subcommand("scaling", "database-size scaling experiment");
    add_common(scaling, o);
    scaling->add_option("--sizes", desc_sizes, "descriptor counts (ascending)");
    scaling->add_option("--seeds", seeds, "seeds");
    scaling->add_flag("--exhaustive", exhaustive, "linear-scan control run");

    auto* stats = app.add_subcommand("bucket-stats", "print per-table bucket stats");
    stats->add_option("--index", index_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        for (auto* sub : app.get_subcommands()) apply_config(sub, o);
        if (generate->parsed()) return cmd_generate(o);
        if (learn->parsed()) return cmd_learn_keys(o, db_path, out_file);
        if (build->parsed()) return cmd_build_index(o, db_path, keys_path, out_file);
        if (detect->parsed())
            return cmd_detect(o, db_path, index_path, scene_path, sidecar_path,
                              thresholds_path);
        if (calibrate->parsed())
            return cmd_calibrate(o, db_path, target_recall, out_file);
        if (compare->parsed()) return cmd_compare(o, object_sizes, seeds);
        if (scaling->parsed()) return cmd_scaling(o, desc_sizes, seeds, exhaustive);
        if (stats->parsed()) return cmd_bucket_stats(index_path);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitUsage;
}
