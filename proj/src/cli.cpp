#include "emip/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "emip/eval.hpp"
#include "emip/io.hpp"
#include "emip/losses.hpp"
#include "emip/parallel.hpp"
#include "emip/synth.hpp"

#ifndef EMIP_VERSION
#define EMIP_VERSION "0.0.0"
#endif

namespace emip::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::string format_double(double v) {
    char buf[64];
    const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
    return std::string(buf, end);
}

std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    throw Error(ErrorCode::InvalidArgument, "config key '" + key + "': '" + value + "' is not " + expected);
}

double to_double(const std::string& key, const std::string& v, double lo, double hi, const char* expected) {
    double out = 0.0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || end != v.data() + v.size() || !std::isfinite(out) || out < lo || out > hi)
        bad_value(key, v, expected);
    return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v, Int lo, Int hi, const char* expected) {
    Int out{};
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || end != v.data() + v.size() || out < lo || out > hi) bad_value(key, v, expected);
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v, "true or false");
}

struct Key {
    const char* name;
    const char* doc;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        {"d_clip", "float > 0; distance clip for the feature map (default 20)",
         [](auto& c, auto& v) { c.weak.d_clip = to_double("d_clip", v, 1e-12, kInf, "a positive number"); },
         [](auto& c) { return format_double(c.weak.d_clip); }},
        {"empty_fallback", "bool; project over every slice when a cell has no nucleus slice (default true)",
         [](auto& c, auto& v) { c.emip.empty_fallback = to_bool("empty_fallback", v); },
         [](auto& c) { return std::string(c.emip.empty_fallback ? "true" : "false"); }},
        {"k", "int >= 2; k-means cluster count (default 3)",
         [](auto& c, auto& v) { c.weak.kmeans.k = to_int<int>("k", v, 2, 255, "an integer in [2, 255]"); },
         [](auto& c) { return std::to_string(c.weak.kmeans.k); }},
        {"link_radius", "float > 0; slice-to-slice linking radius in pixels (default 5)",
         [](auto& c, auto& v) { c.link_radius = to_double("link_radius", v, 1e-12, kInf, "a positive number"); },
         [](auto& c) { return format_double(c.link_radius); }},
        {"marker_threshold", "float in [0, 1]; marker level calling a cell positive (default 0.1)",
         [](auto& c, auto& v) { c.marker_threshold = to_double("marker_threshold", v, 0.0, 1.0, "in [0, 1]"); },
         [](auto& c) { return format_double(c.marker_threshold); }},
        {"max_iter", "int >= 1; k-means iteration cap (default 100)",
         [](auto& c, auto& v) { c.weak.kmeans.max_iter = to_int<int>("max_iter", v, 1, 1000000, "a positive integer"); },
         [](auto& c) { return std::to_string(c.weak.kmeans.max_iter); }},
        {"min_pixels", "int >= 1; mask pixels a slice needs inside a cell to join its slice set (default 1)",
         [](auto& c, auto& v) {
             c.emip.min_pixels = to_int<std::size_t>("min_pixels", v, 1, 1u << 30, "a positive integer");
         },
         [](auto& c) { return std::to_string(c.emip.min_pixels); }},
        {"r_xy", "int >= 0; in-plane radius of the dilated points (default 3)",
         [](auto& c, auto& v) { c.weak.r_xy = to_int<int>("r_xy", v, 0, 1000, "an integer in [0, 1000]"); },
         [](auto& c) { return std::to_string(c.weak.r_xy); }},
        {"r_z", "int >= 0; axial radius of the dilated points (default 1)",
         [](auto& c, auto& v) { c.weak.r_z = to_int<int>("r_z", v, 0, 1000, "an integer in [0, 1000]"); },
         [](auto& c) { return std::to_string(c.weak.r_z); }},
        {"radius", "float > 0; detection matching radius in pixels (default 6)",
         [](auto& c, auto& v) { c.radius = to_double("radius", v, 1e-12, kInf, "a positive number"); },
         [](auto& c) { return format_double(c.radius); }},
        {"seed", "uint64; seed for synthesis, k-means and loss fixtures (default 0)",
         [](auto& c, auto& v) {
             c.seed = to_int<std::uint64_t>("seed", v, 0, std::numeric_limits<std::uint64_t>::max(), "an unsigned integer");
         },
         [](auto& c) { return std::to_string(c.seed); }},
        {"tau", "float > 0; contrastive temperature (default 0.1)",
         [](auto& c, auto& v) { c.tau = to_double("tau", v, 1e-12, kInf, "a positive number"); },
         [](auto& c) { return format_double(c.tau); }},
        {"tol", "float >= 0; k-means convergence tolerance on centroid motion (default 1e-6)",
         [](auto& c, auto& v) { c.weak.kmeans.tol = to_double("tol", v, 0.0, kInf, "a non-negative number"); },
         [](auto& c) { return format_double(c.weak.kmeans.tol); }},
        {"w_marker", "float in [0, 1]; marker weight in composites (default 1)",
         [](auto& c, auto& v) { c.w_marker = to_double("w_marker", v, 0.0, 1.0, "in [0, 1]"); },
         [](auto& c) { return format_double(c.w_marker); }},
        {"w_nuclei", "float in [0, 1]; nuclei weight in composites (default 1)",
         [](auto& c, auto& v) { c.w_nuclei = to_double("w_nuclei", v, 0.0, 1.0, "in [0, 1]"); },
         [](auto& c) { return format_double(c.w_nuclei); }},
        {"z_scale", "float >= 0; z voxel spacing relative to xy for the distance map (default 1)",
         [](auto& c, auto& v) { c.weak.z_scale = to_double("z_scale", v, 0.0, kInf, "a non-negative number"); },
         [](auto& c) { return format_double(c.weak.z_scale); }},
    };
    return table;
}

class Timer {
public:
    void stage(const std::string& name, const std::function<void()>& body) {
        const auto t0 = std::chrono::steady_clock::now();
        body();
        const std::chrono::duration<double, std::milli> dt = std::chrono::steady_clock::now() - t0;
        timings_[name] = dt.count();
    }
    const json& timings() const noexcept { return timings_; }

private:
    json timings_ = json::object();
};

struct Manifest {
    std::string command;
    std::vector<fs::path> inputs;
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;
    json results = json::object();
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
    f << text;
    if (!f) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_manifest(const fs::path& dir, const Manifest& m, const PipelineConfig& cfg, const Timer& timer) {
    json inputs = json::array();
    for (const auto& p : m.inputs) inputs.push_back({{"path", p.generic_string()}, {"fnv1a", hex64(io::file_hash(p))}});
    json config = json::object();
    for (const auto& [k, v] : config_entries(cfg)) config[k] = v;
    json doc = {
        {"format_version", kFormatVersion},
        {"tool", "emip"},
        {"version", EMIP_VERSION},
        {"command", m.command},
        {"inputs", inputs},
        {"outputs", m.outputs},
        {"config", config},
        {"config_hash", hex64(config_hash(cfg))},
        {"warnings", m.warnings},
        {"results", m.results},
        // Everything machine-dependent lives here so the rest of the file is
        // reproducible byte for byte.
        {"runtime", {{"threads", thread_count()}, {"timings_ms", timer.timings()}}},
    };
    write_text(dir / "manifest.json", doc.dump(2) + "\n");
}

MultiChannelVolume load_pair(const fs::path& nuclei, const fs::path& marker) {
    return MultiChannelVolume(io::read_volume(nuclei), io::read_volume(marker));
}

io::RawStack to_stack(const Shape3& shape, int bits, std::vector<std::uint16_t> samples) {
    return {shape, bits, std::move(samples)};
}

void write_voronoi(const fs::path& path, const VoronoiLabel& vor) {
    if (vor.cell_count() > 65535)
        throw Error(ErrorCode::InvalidArgument, "more than 65535 cells cannot be stored as 16-bit ids");
    std::vector<std::uint16_t> ids(vor.cell_ids().begin(), vor.cell_ids().end());
    io::write_stack(path, to_stack(Shape3{vor.width(), vor.height(), 1}, 16, std::move(ids)));
}

BinaryMask3D read_binary_mask(const fs::path& path, const Shape3& shape) {
    const io::RawStack s = io::read_stack(path);
    if (s.shape != shape) throw Error(ErrorCode::DimensionMismatch, path.string() + ": mask shape differs from the volume");
    BinaryMask3D m{shape, std::vector<std::uint8_t>(s.samples.size())};
    std::transform(s.samples.begin(), s.samples.end(), m.values.begin(), [](auto v) { return v != 0 ? 1 : 0; });
    return m;
}

// One detection per annotation, positive when the marker channel of the
// composite exceeds the threshold anywhere in the annotation's cell.
std::vector<Detection> classify_cells(const CompositeImage& comp, const VoronoiLabel& vor,
                                      const AnnotationSet& points, double threshold) {
    std::vector<float> peak(vor.cell_count(), 0.0f);
    for (int y = 0; y < comp.height; ++y)
        for (int x = 0; x < comp.width; ++x) {
            auto& p = peak[vor.at(x, y)];
            p = std::max(p, comp.r(x, y));
        }
    std::vector<Detection> out;
    for (std::size_t j = 0; j < points.size(); ++j) {
        const auto& p = points[j];
        out.push_back({p.x, p.y, p.z, peak[j] > threshold ? kPositiveClass : kNegativeClass, 1.0});
    }
    return out;
}

json scores_json(const Scores& s) { return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}}; }

struct Options {
    std::string config_path;
    std::uint64_t seed = 0;
    int threads = 0;
};

}  // namespace

std::string config_schema() {
    std::ostringstream s;
    s << "Config file: one 'key = value' per line, '#' starts a comment. Keys:\n";
    for (const auto& k : keys()) s << "  " << std::left << std::setw(18) << k.name << k.doc << "\n";
    return s.str();
}

PipelineConfig apply_config(const std::map<std::string, std::string>& values, PipelineConfig base) {
    for (const auto& [key, value] : values) {
        const auto it = std::find_if(keys().begin(), keys().end(), [&](const Key& k) { return key == k.name; });
        if (it == keys().end()) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
        it->set(base, value);
    }
    base.weak.kmeans.seed = base.seed;
    return base;
}

std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& config) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : keys()) out.emplace_back(k.name, k.get(config));
    return out;
}

std::uint64_t config_hash(const PipelineConfig& config) {
    std::string text;
    for (const auto& [k, v] : config_entries(config)) text += k + "=" + v + "\n";
    return io::fnv1a(text.data(), text.size());
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Per-nucleus projections of two-channel microscopy z-stacks", "emip"};
    app.require_subcommand(1);
    app.fallthrough();
    app.footer("\n" + config_schema());

    Options opt;
    auto* seed_opt = app.add_option("--seed", opt.seed, "Seed (overrides the config file)");
    app.add_option("--config", opt.config_path, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--threads", opt.threads, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);

    PipelineConfig cfg;
    std::function<void()> action;
    int status = 0;
    const auto resolve = [&] {
        if (!opt.config_path.empty()) cfg = apply_config(io::read_key_values(opt.config_path));
        if (seed_opt->count() > 0) cfg.seed = opt.seed;
        cfg.weak.kmeans.seed = cfg.seed;
        set_thread_count(opt.threads);
    };

    // synth
    std::string out_dir;
    int fixture = 0;
    synth::ScenarioConfig scen;
    std::string modes = "disjoint_in_z,overlap_in_z,disjoint_in_z,partial_overlap";
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic two-channel volume with ground truth");
    c_synth->add_option("--out", out_dir, "Output directory")->required();
    c_synth->add_option("--fixture", fixture, "Canned fixture 1-3 instead of a random scenario");
    c_synth->add_option("--width", scen.shape.width)->capture_default_str();
    c_synth->add_option("--height", scen.shape.height)->capture_default_str();
    c_synth->add_option("--depth", scen.shape.depth)->capture_default_str();
    c_synth->add_option("--nuclei", scen.nucleus_count)->capture_default_str();
    c_synth->add_option("--modes", modes, "Comma-separated marker modes, cycled over the nuclei")->capture_default_str();
    c_synth->callback([&] {
        action = [&] {
            const fs::path dir = out_dir;
            fs::create_directories(dir);
            Timer timer;
            Manifest m;
            m.command = "synth";
            synth::Scenario s;
            timer.stage("generate", [&] {
                if (fixture != 0) {
                    s = synth::challenge_fixture(fixture);
                } else {
                    scen.seed = cfg.seed;
                    scen.modes.clear();
                    std::stringstream list(modes);
                    for (std::string name; std::getline(list, name, ',');)
                        scen.modes.push_back(synth::marker_mode_from_string(name));
                    s = synth::generate(scen);
                }
            });
            timer.stage("write", [&] {
                io::write_volume(dir / "nuclei.tif", s.volume.nuclei());
                io::write_volume(dir / "marker.tif", s.volume.marker());
                io::write_annotations(dir / "points.csv", s.truth.annotations);
                io::write_stack(dir / "nucleus_labels.tif", to_stack(s.truth.shape, 16, s.truth.nucleus_labels));
                io::write_stack(dir / "marker_labels.tif", to_stack(s.truth.shape, 16, s.truth.marker_labels));
                write_text(dir / "pipeline.cfg", "# z spacing of the synthetic volume relative to xy\nz_scale = " +
                                                     format_double(synth::kSliceSpacing) + "\n");
            });
            m.outputs = {"nuclei.tif", "marker.tif", "points.csv", "nucleus_labels.tif", "marker_labels.tif",
                         "pipeline.cfg"};
            json nuclei = json::array();
            for (const auto& n : s.truth.nuclei)
                nuclei.push_back({{"x", n.spec.cx}, {"y", n.spec.cy}, {"cz", n.spec.cz},
                                  {"mode", std::string(synth::to_string(n.spec.mode))}, {"z_min", n.z_min},
                                  {"z_max", n.z_max}, {"class", n.class_id}});
            m.results["nuclei"] = nuclei;
            write_manifest(dir, m, cfg, timer);
        };
    });

    // weak-labels
    std::string nuclei_path, marker_path, points_path, mask_path;
    auto* c_weak = app.add_subcommand("weak-labels", "Derive weak pixel labels and the Voronoi partition from points");
    c_weak->add_option("--nuclei", nuclei_path, "Nuclei channel TIFF")->required()->check(CLI::ExistingFile);
    c_weak->add_option("--points", points_path, "Point annotations CSV")->required()->check(CLI::ExistingFile);
    c_weak->add_option("--out", out_dir, "Output directory")->required();
    c_weak->callback([&] {
        action = [&] {
            const fs::path dir = out_dir;
            fs::create_directories(dir);
            Timer timer;
            Manifest m;
            m.command = "weak-labels";
            m.inputs = {nuclei_path, points_path};
            ChannelVolume nuclei;
            AnnotationSet points;
            timer.stage("read", [&] {
                nuclei = io::read_volume(nuclei_path);
                points = io::read_annotations(points_path);
                check_annotations_in_bounds(points, nuclei.shape());
            });
            WeakLabels w;
            timer.stage("weak_labels", [&] { w = generate_weak_labels(nuclei, points, cfg.weak); });
            timer.stage("write", [&] {
                std::vector<std::uint16_t> codes(w.labels.regions.size());
                std::transform(w.labels.regions.begin(), w.labels.regions.end(), codes.begin(), [](Region r) {
                    return static_cast<std::uint16_t>(r == Region::Background ? 0 : r == Region::Unlabeled ? 128 : 255);
                });
                io::write_stack(dir / "labels.tif", to_stack(w.labels.shape, 8, std::move(codes)));
                std::vector<std::uint16_t> bin(w.mask.values.begin(), w.mask.values.end());
                for (auto& v : bin) v = v ? 255 : 0;
                io::write_stack(dir / "binary_mask.tif", to_stack(w.mask.shape, 8, std::move(bin)));
                io::write_stack(dir / "clusters.tif", to_stack(w.clusters.shape, 8, w.clusters.ids));
                write_voronoi(dir / "voronoi.tif", w.voronoi);
            });
            m.outputs = {"labels.tif", "binary_mask.tif", "clusters.tif", "voronoi.tif"};
            json centroids = json::array();
            for (const auto& c : w.clusters.centroids) centroids.push_back({c[0], c[1]});
            m.results = {{"background_cluster", w.background_id},
                         {"centroids", centroids},
                         {"cluster_sizes", w.clusters.sizes},
                         {"kmeans_iterations", w.clusters.iterations},
                         {"nucleus_voxels", w.mask.count()}};
            write_manifest(dir, m, cfg, timer);
        };
    });

    // mip
    auto* c_mip = app.add_subcommand("mip", "Plain maximum intensity projection of both channels");
    c_mip->add_option("--nuclei", nuclei_path, "Nuclei channel TIFF")->required()->check(CLI::ExistingFile);
    c_mip->add_option("--marker", marker_path, "Marker channel TIFF")->required()->check(CLI::ExistingFile);
    c_mip->add_option("--out", out_dir, "Output directory")->required();
    c_mip->callback([&] {
        action = [&] {
            const fs::path dir = out_dir;
            fs::create_directories(dir);
            Timer timer;
            Manifest m;
            m.command = "mip";
            m.inputs = {nuclei_path, marker_path};
            MultiChannelVolume vol;
            timer.stage("read", [&] { vol = load_pair(nuclei_path, marker_path); });
            ProjectionPair pair;
            timer.stage("project", [&] { pair = {mip(vol.nuclei()), mip(vol.marker())}; });
            timer.stage("write", [&] {
                io::write_image(dir / "nuclei_mip.tif", pair.nuclei);
                io::write_image(dir / "marker_mip.tif", pair.marker);
                io::write_png(dir / "composite.png", compose(pair, cfg.w_nuclei, cfg.w_marker));
            });
            m.outputs = {"nuclei_mip.tif", "marker_mip.tif", "composite.png"};
            write_manifest(dir, m, cfg, timer);
        };
    });

    // emip
    auto* c_emip = app.add_subcommand("emip", "Per-cell projection restricted to the slices holding each nucleus");
    c_emip->add_option("--nuclei", nuclei_path, "Nuclei channel TIFF")->required()->check(CLI::ExistingFile);
    c_emip->add_option("--marker", marker_path, "Marker channel TIFF")->required()->check(CLI::ExistingFile);
    c_emip->add_option("--points", points_path, "Point annotations CSV")->required()->check(CLI::ExistingFile);
    c_emip->add_option("--mask", mask_path, "Binary nucleus mask TIFF (default: derived from the points)")
        ->check(CLI::ExistingFile);
    c_emip->add_option("--out", out_dir, "Output directory")->required();
    c_emip->callback([&] {
        action = [&] {
            const fs::path dir = out_dir;
            fs::create_directories(dir);
            Timer timer;
            Manifest m;
            m.command = "emip";
            m.inputs = {nuclei_path, marker_path, points_path};
            if (!mask_path.empty()) m.inputs.emplace_back(mask_path);
            ValidatedInput in;
            timer.stage("read", [&] {
                in = validate_volume(io::read_volume(nuclei_path), io::read_volume(marker_path),
                                     io::read_annotations(points_path));
            });
            BinaryMask3D mask;
            VoronoiLabel vor;
            timer.stage("mask", [&] {
                if (mask_path.empty()) {
                    WeakLabels w = generate_weak_labels(in.volume.nuclei(), in.annotations, cfg.weak);
                    mask = std::move(w.mask);
                    vor = std::move(w.voronoi);
                } else {
                    mask = read_binary_mask(mask_path, in.volume.shape());
                    vor = voronoi_partition(in.annotations, in.volume.shape().width, in.volume.shape().height);
                }
            });
            EmipResult r;
            CompositeImage comp;
            timer.stage("project", [&] {
                r = emip(in.volume, mask, vor, cfg.emip);
                comp = compose(r.projection, cfg.w_nuclei, cfg.w_marker);
            });
            const auto dets = classify_cells(comp, vor, in.annotations, cfg.marker_threshold);
            timer.stage("write", [&] {
                io::write_image(dir / "nuclei_emip.tif", r.projection.nuclei);
                io::write_image(dir / "marker_emip.tif", r.projection.marker);
                io::write_png(dir / "composite.png", comp);
                io::write_detections(dir / "detections.csv", dets);
                json cells = json::array();
                for (std::size_t j = 0; j < r.slice_sets.size(); ++j) {
                    const bool fallback =
                        std::binary_search(r.fallback_cells.begin(), r.fallback_cells.end(), j);
                    cells.push_back({{"cell", j}, {"x", in.annotations[j].x}, {"y", in.annotations[j].y},
                                     {"slices", r.slice_sets[j]}, {"fallback", fallback}});
                }
                write_text(dir / "slice_sets.json",
                           json{{"format_version", kFormatVersion}, {"cells", cells}}.dump(2) + "\n");
            });
            for (auto j : r.fallback_cells)
                m.warnings.push_back("cell " + std::to_string(j) + ": no slice contains its nucleus; " +
                                     (cfg.emip.empty_fallback ? "projected over all slices" : "left empty"));
            m.outputs = {"nuclei_emip.tif", "marker_emip.tif", "composite.png", "detections.csv", "slice_sets.json"};
            m.results = {{"cells", r.slice_sets.size()}, {"fallback_cells", r.fallback_cells}};
            write_manifest(dir, m, cfg, timer);
        };
    });

    // compose-slices
    auto* c_slices = app.add_subcommand("compose-slices", "One RGB composite per z-slice");
    c_slices->add_option("--nuclei", nuclei_path, "Nuclei channel TIFF")->required()->check(CLI::ExistingFile);
    c_slices->add_option("--marker", marker_path, "Marker channel TIFF")->required()->check(CLI::ExistingFile);
    c_slices->add_option("--out", out_dir, "Output directory")->required();
    c_slices->callback([&] {
        action = [&] {
            const fs::path dir = out_dir;
            fs::create_directories(dir);
            Timer timer;
            Manifest m;
            m.command = "compose-slices";
            m.inputs = {nuclei_path, marker_path};
            MultiChannelVolume vol;
            timer.stage("read", [&] { vol = load_pair(nuclei_path, marker_path); });
            std::vector<CompositeImage> comps;
            timer.stage("compose", [&] { comps = per_slice_composites(vol, cfg.w_nuclei, cfg.w_marker); });
            timer.stage("write", [&] {
                for (std::size_t z = 0; z < comps.size(); ++z) {
                    std::ostringstream name;
                    name << "slice_" << std::setw(3) << std::setfill('0') << z << ".png";
                    io::write_png(dir / name.str(), comps[z]);
                    m.outputs.push_back(name.str());
                }
            });
            write_manifest(dir, m, cfg, timer);
        };
    });

    // eval
    std::string pred_path, gt_path, match_mode = "greedy";
    double radius = 0.0;
    bool integrate = false;
    auto* c_eval = app.add_subcommand("eval", "Detection and classification metrics as JSON on stdout");
    c_eval->add_option("--pred", pred_path, "Detections CSV")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--gt", gt_path, "Ground-truth points CSV")->required()->check(CLI::ExistingFile);
    auto* radius_opt = c_eval->add_option("--radius", radius, "Matching radius (default from config)");
    c_eval->add_option("--match", match_mode, "greedy or max")->check(CLI::IsMember({"greedy", "max"}));
    c_eval->add_flag("--integrate", integrate, "Link per-slice detections into nuclei before matching");
    c_eval->callback([&] {
        action = [&] {
            if (radius_opt->count() > 0) cfg.radius = radius;
            std::vector<Detection> dets = io::read_detections(pred_path);
            const AnnotationSet gt = io::read_annotations(gt_path);
            if (integrate) {
                int max_z = -1;
                for (const auto& d : dets) {
                    if (d.z < 0) throw Error(ErrorCode::OutOfBounds, "detection with negative z");
                    max_z = std::max(max_z, d.z);
                }
                std::vector<std::vector<Detection>> per_slice(static_cast<std::size_t>(max_z + 1));
                for (const auto& d : dets) per_slice[static_cast<std::size_t>(d.z)].push_back(d);
                std::vector<Detection> merged;
                for (const auto& t : link_tracks(per_slice, cfg.link_radius)) {
                    const auto n = integrate_slices(t);
                    Detection d = n.representative;
                    d.class_id = n.class_id;
                    merged.push_back(d);
                }
                dets = std::move(merged);
            }
            const auto mode = match_mode == "max" ? MatchMode::MaximumCardinality : MatchMode::Greedy;
            const MatchResult mr = match_points(dets, gt, cfg.radius, mode);
            const ClassificationScores cs = classification_scores(mr, dets, gt);
            json per_class = json::object();
            double min_f1 = cs.per_class.empty() ? 0.0 : 1.0;
            for (const auto& [k, c] : cs.per_class) {
                json entry = scores_json(c.scores);
                entry["tp"] = c.tp;
                entry["fp"] = c.fp;
                entry["fn"] = c.fn;
                per_class[std::to_string(k)] = entry;
                min_f1 = std::min(min_f1, c.scores.f1);
            }
            json doc = scores_json(cs.detection);
            doc["format_version"] = kFormatVersion;
            doc["radius"] = cfg.radius;
            doc["match"] = match_mode;
            doc["counts"] = {{"tp", mr.tp}, {"fp", mr.fp}, {"fn", mr.fn}};
            doc["per_class"] = per_class;
            doc["min_class_f1"] = min_f1;
            out << doc.dump(2) << "\n";
        };
    });

    // losses-check
    int fixtures = 10;
    double h = 1e-5;
    double threshold = 1e-4;
    auto* c_loss = app.add_subcommand("losses-check", "Gradient-check report for every loss term as JSON on stdout");
    c_loss->add_option("--fixtures", fixtures, "Random fixtures per loss")->capture_default_str()->check(CLI::PositiveNumber);
    c_loss->add_option("--step", h, "Central-difference step")->capture_default_str()->check(CLI::PositiveNumber);
    c_loss->add_option("--threshold", threshold, "Maximum accepted relative error")->capture_default_str();
    c_loss->callback([&] {
        action = [&] {
            using namespace losses;
            json checks = json::array();
            bool all_pass = true;
            for (auto kind : {LossKind::CrossEntropy, LossKind::Dice, LossKind::Entropy, LossKind::SclPixelToPixel,
                              LossKind::SclPixelToRegion}) {
                double worst = 0.0;
                std::size_t coords = 0;
                for (int f = 0; f < fixtures; ++f) {
                    const LossFixture fx = random_fixture(cfg.seed + static_cast<std::uint64_t>(f), 12, 3, 4, cfg.tau);
                    const bool embedding = kind == LossKind::SclPixelToPixel || kind == LossKind::SclPixelToRegion;
                    const auto r = embedding ? grad_check(kind, fx.embeddings, h) : grad_check(kind, fx.y, fx.x, h);
                    worst = std::max(worst, r.max_rel_error);
                    coords += r.coordinates;
                }
                const bool pass = worst < threshold;
                all_pass = all_pass && pass;
                checks.push_back({{"loss", std::string(to_string(kind))},
                                  {"fixtures", fixtures},
                                  {"coordinates", coords},
                                  {"max_rel_error", worst},
                                  {"pass", pass}});
            }
            json doc = {{"format_version", kFormatVersion}, {"h", h},          {"tau", cfg.tau},
                        {"threshold", threshold},           {"checks", checks}, {"pass", all_pass}};
            out << doc.dump(2) << "\n";
            if (!all_pass) status = 2;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, err, err);
        err << "\n" << app.help() << "\n";
        return 1;
    }

    try {
        resolve();
        if (action) action();
        set_thread_count(0);
        return status;
    } catch (const Error& e) {
        set_thread_count(0);
        err << "error: " << e.what() << "\n";
        return is_validation_error(e.code()) ? 1 : 2;
    } catch (const std::exception& e) {
        set_thread_count(0);
        err << "internal error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace emip::cli
