#include "elgen/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "elgen/core/error.hpp"
#include "elgen/corpus/png_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace elgen::corpus {

void DomainProfile::validate() const {
    if (image_side < 8 || (image_side & (image_side - 1)) != 0)
        throw ParameterError("profile " + id + ": image_side must be a power of two >= 8");
    if (grid_spacing < 2) throw ParameterError("profile " + id + ": grid_spacing must be >= 2");
    if (grid_intensity < 0.0 || grid_intensity > 1.0)
        throw ParameterError("profile " + id + ": grid_intensity outside [0,1]");
    if (background_mean < 0.0 || background_mean > 1.0)
        throw ParameterError("profile " + id + ": background_mean outside [0,1]");
    if (background_noise_sigma < 0.0)
        throw ParameterError("profile " + id + ": negative noise sigma");
    if (busbar_count < 0) throw ParameterError("profile " + id + ": negative busbar_count");
}

std::vector<DefectClass> default_classes(int image_side) {
    const double s = image_side / 64.0;
    auto px = [&](double v) { return std::max(4, static_cast<int>(std::lround(v * s))); };
    return {
        {"broken_gate", StampKind::VerticalSegment, px(10), px(18), -0.38, -0.22},
        {"unjoined_weld", StampKind::HorizontalBand, px(12), px(22), -0.30, -0.18},
        {"black_spot", StampKind::Disc, px(8), px(16), -0.50, -0.30},
        {"scratch", StampKind::Line, px(12), px(24), -0.45, -0.28},
        {"crack", StampKind::Polyline, px(14), px(26), -0.50, -0.30},
    };
}

const DefectClass& class_by_name(const std::vector<DefectClass>& classes,
                                 const std::string& name) {
    for (const DefectClass& c : classes)
        if (c.name == name) return c;
    throw ParameterError("unknown defect class: " + name);
}

TensorD synth_background(const DomainProfile& profile, uint64_t seed) {
    profile.validate();
    const int side = profile.image_side;
    TensorD img({side, side});

    // Busbar rows (horizontal, 2px) darken like grid lines.
    std::vector<uint8_t> busbar_row(static_cast<size_t>(side), 0);
    for (int i = 0; i < profile.busbar_count; ++i) {
        const int y = (i + 1) * side / (profile.busbar_count + 1);
        for (int dy = 0; dy < 2; ++dy)
            if (y + dy < side) busbar_row[static_cast<size_t>(y + dy)] = 1;
    }

    RandomStream rng = RandomStream::sub(seed, {0x1});
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            double base = profile.background_mean;
            if (x % profile.grid_spacing == 0) base = profile.grid_intensity;
            if (busbar_row[static_cast<size_t>(y)]) base = profile.grid_intensity;
            double v = base + profile.background_noise_sigma * rng.normal();
            img.at(y, x) = std::clamp(v, 0.0, 1.0);
        }
    }
    return img;
}

namespace {

void draw_thick_point(std::vector<uint8_t>& mask, const BoxSpec& box, int w, int x, int y,
                      int thickness) {
    for (int dy = 0; dy < thickness; ++dy) {
        for (int dx = 0; dx < thickness; ++dx) {
            const int px = x + dx, py = y + dy;
            if (box.contains(px, py))
                mask[static_cast<size_t>(py - box.y1) * static_cast<size_t>(w) +
                     static_cast<size_t>(px - box.x1)] = 1;
        }
    }
}

void draw_segment(std::vector<uint8_t>& mask, const BoxSpec& box, int x0, int y0, int x1, int y1,
                  int thickness) {
    // Bresenham, clipped to the box.
    const int w = box.width();
    int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    int x = x0, y = y0;
    while (true) {
        draw_thick_point(mask, box, w, x, y, thickness);
        if (x == x1 && y == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y += sy;
        }
    }
}

// Stamp footprint inside the box, as a box-local mask.
std::vector<uint8_t> stamp_mask(const TensorD& image, const DefectClass& cls, const BoxSpec& box,
                                RandomStream& rng) {
    const int w = box.width(), h = box.height();
    std::vector<uint8_t> mask(static_cast<size_t>(w) * h, 0);
    switch (cls.kind) {
        case StampKind::Disc: {
            const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
            const double rx = w / 2.0, ry = h / 2.0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double nx = (x - cx) / rx, ny = (y - cy) / ry;
                    if (nx * nx + ny * ny <= 1.0)
                        mask[static_cast<size_t>(y) * w + x] = 1;
                }
            break;
        }
        case StampKind::HorizontalBand: {
            const int band = std::max(2, static_cast<int>(std::lround(0.4 * h)));
            const int y0 = (h - band) / 2;
            for (int y = y0; y < y0 + band; ++y)
                for (int x = 0; x < w; ++x) mask[static_cast<size_t>(y) * w + x] = 1;
            break;
        }
        case StampKind::VerticalSegment: {
            // Interrupts a grid line: centered on the darkest column in the box.
            int best = w / 2;
            double best_mean = 1e9;
            for (int x = 1; x < w - 1; ++x) {
                double m = 0;
                for (int y = 0; y < h; ++y) m += image.at(box.y1 + y, box.x1 + x);
                if (m < best_mean) {
                    best_mean = m;
                    best = x;
                }
            }
            const int bar = std::max(2, w / 4);
            const int x0 = std::clamp(best - bar / 2, 0, w - bar);
            for (int y = 0; y < h; ++y)
                for (int x = x0; x < x0 + bar; ++x) mask[static_cast<size_t>(y) * w + x] = 1;
            break;
        }
        case StampKind::Line: {
            const bool main_diag = rng.uniform() < 0.5;
            const int jx = rng.uniform_int(std::max(1, w / 4));
            const int jy = rng.uniform_int(std::max(1, h / 4));
            int x0, y0, x1, y1;
            if (main_diag) {
                x0 = box.x1 + jx;
                y0 = box.y1 + jy;
                x1 = box.x2 - 1 - rng.uniform_int(std::max(1, w / 4));
                y1 = box.y2 - 1 - rng.uniform_int(std::max(1, h / 4));
            } else {
                x0 = box.x1 + jx;
                y0 = box.y2 - 1 - jy;
                x1 = box.x2 - 1 - rng.uniform_int(std::max(1, w / 4));
                y1 = box.y1 + rng.uniform_int(std::max(1, h / 4));
            }
            draw_segment(mask, box, x0, y0, x1, y1, std::max(1, box.width() / 12) + 1);
            break;
        }
        case StampKind::Polyline: {
            // Jagged path spanning the long axis with forced perpendicular
            // extent so its bounding box stays close to the requested box.
            const bool horizontal = w >= h;
            const int long_len = horizontal ? w : h;
            const int perp_len = horizontal ? h : w;
            const int n = 5;
            std::vector<std::pair<int, int>> pts;
            for (int i = 0; i < n; ++i) {
                const int along = static_cast<int>(
                    std::lround((long_len - 1) * (i / static_cast<double>(n - 1))));
                double f;
                if (i == 0)
                    f = rng.uniform(0.02, 0.20);
                else if (i == n - 1)
                    f = rng.uniform(0.80, 0.98);
                else
                    f = rng.uniform(0.10, 0.90);
                const int perp = std::clamp(static_cast<int>(std::lround(f * (perp_len - 1))), 0,
                                            perp_len - 1);
                if (horizontal)
                    pts.emplace_back(box.x1 + along, box.y1 + perp);
                else
                    pts.emplace_back(box.x1 + perp, box.y1 + along);
            }
            const int thick = std::max(1, perp_len / 10) + 1;
            for (int i = 0; i + 1 < n; ++i)
                draw_segment(mask, box, pts[i].first, pts[i].second, pts[i + 1].first,
                             pts[i + 1].second, thick);
            break;
        }
    }
    return mask;
}

}  // namespace

std::pair<TensorD, StampRecord> stamp_defect(const TensorD& image, const DefectClass& cls,
                                             const BoxSpec& box, uint64_t seed) {
    if (image.rank() != 2) throw ParameterError("stamp_defect: expected a 2-D image");
    box.validate(image.shape[1], image.shape[0]);
    if (box.area() < 4) throw ParameterError("stamp_defect: box area must be >= 4 pixels");

    RandomStream rng = RandomStream::sub(seed, {0x2});
    const double contrast = rng.uniform(cls.contrast_lo, cls.contrast_hi);
    const std::vector<uint8_t> mask = stamp_mask(image, cls, box, rng);

    TensorD out = image;
    const int w = box.width(), h = box.height();
    double before = 0.0, after = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = image.at(box.y1 + y, box.x1 + x);
            before += v;
            if (mask[static_cast<size_t>(y) * w + x]) {
                out.at(box.y1 + y, box.x1 + x) = std::clamp(v + contrast, 0.0, 1.0);
            }
            after += out.at(box.y1 + y, box.x1 + x);
        }
    }
    StampRecord rec;
    rec.class_name = cls.name;
    rec.box = box;
    rec.mean_shift = (after - before) / static_cast<double>(box.area());
    return {std::move(out), rec};
}

std::string caption_for(const std::string& style_word, const std::string& class_name,
                        const DomainProfile& profile) {
    const std::string context = profile.busbar_count > 0 ? "busbars" : "gridlines";
    return "a photo of " + style_word + " with " + class_name + " and " + context;
}

BoxSpec place_box(const DefectClass& cls, const DomainProfile& profile, RandomStream& rng) {
    const int side = profile.image_side;
    const int margin = std::max(2, side / 16);
    auto dim = [&] {
        const int lo = cls.size_min, hi = std::min(cls.size_max, side - 2 * margin);
        return lo + rng.uniform_int(std::max(1, hi - lo + 1));
    };
    const int w = dim(), h = dim();
    BoxSpec box;
    if (cls.kind == StampKind::VerticalSegment) {
        // Keep a grid column strictly inside the box.
        std::vector<int> cols;
        for (int c = 0; c < side; c += profile.grid_spacing)
            if (c >= margin + 2 && c < side - margin - 2) cols.push_back(c);
        const int col = cols.empty() ? side / 2 : cols[static_cast<size_t>(rng.uniform_int(
                                          static_cast<int>(cols.size())))];
        box.x1 = std::clamp(col - w / 2, margin, side - margin - w);
    } else {
        box.x1 = margin + rng.uniform_int(std::max(1, side - 2 * margin - w + 1));
    }
    box.y1 = margin + rng.uniform_int(std::max(1, side - 2 * margin - h + 1));
    box.x2 = box.x1 + w;
    box.y2 = box.y1 + h;
    return box;
}

std::pair<TensorD, StampRecord> render_sample(const DomainProfile& profile,
                                              const DefectClass& cls, const BoxSpec& box,
                                              uint64_t seed) {
    TensorD bg = synth_background(profile, splitmix64(seed ^ 0x9d));
    return stamp_defect(bg, cls, box, splitmix64(seed ^ 0x3b));
}

const DomainProfile& DatasetManifest::profile(const std::string& id) const {
    for (const DomainProfile& p : profiles)
        if (p.id == id) return p;
    throw ParameterError("manifest: unknown profile id " + id);
}

std::vector<const ManifestEntry*> DatasetManifest::split_entries(const std::string& split) const {
    std::vector<const ManifestEntry*> out;
    for (const ManifestEntry& e : entries)
        if (e.split == split) out.push_back(&e);
    return out;
}

namespace {

json profile_to_json(const DomainProfile& p) {
    return json{{"id", p.id},
                {"image_side", p.image_side},
                {"grid_spacing", p.grid_spacing},
                {"grid_intensity", p.grid_intensity},
                {"background_mean", p.background_mean},
                {"background_noise_sigma", p.background_noise_sigma},
                {"busbar_count", p.busbar_count}};
}

DomainProfile profile_from_json(const json& j) {
    DomainProfile p;
    p.id = j.at("id").get<std::string>();
    p.image_side = j.at("image_side").get<int>();
    p.grid_spacing = j.at("grid_spacing").get<int>();
    p.grid_intensity = j.at("grid_intensity").get<double>();
    p.background_mean = j.at("background_mean").get<double>();
    p.background_noise_sigma = j.at("background_noise_sigma").get<double>();
    p.busbar_count = j.at("busbar_count").get<int>();
    return p;
}

}  // namespace

void DatasetManifest::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write manifest: " + path);
    json meta = {{"seed", seed}, {"profiles", json::array()}};
    for (const DomainProfile& p : profiles) meta["profiles"].push_back(profile_to_json(p));
    os << json{{"meta", meta}}.dump() << "\n";
    for (const ManifestEntry& e : entries) {
        json boxes = json::array(), classes = json::array();
        for (const auto& [cls, b] : e.boxes) {
            classes.push_back(cls);
            boxes.push_back({b.x1, b.y1, b.x2, b.y2});
        }
        os << json{{"file", e.file},     {"caption", e.caption}, {"boxes", boxes},
                   {"classes", classes}, {"profile", e.profile_id}, {"split", e.split},
                   {"seed", e.seed}}
                  .dump()
           << "\n";
    }
    if (!os) throw IoError("manifest write failed: " + path);
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read manifest: " + path);
    DatasetManifest m;
    m.root = fs::path(path).parent_path().string();
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (first && j.contains("meta")) {
            const json& meta = j["meta"];
            m.seed = meta.value("seed", 0ULL);
            for (const json& p : meta.value("profiles", json::array()))
                m.profiles.push_back(profile_from_json(p));
            first = false;
            continue;
        }
        first = false;
        ManifestEntry e;
        e.file = j.at("file").get<std::string>();
        e.caption = j.at("caption").get<std::string>();
        e.profile_id = j.at("profile").get<std::string>();
        e.split = j.at("split").get<std::string>();
        e.seed = j.value("seed", 0ULL);
        const json& boxes = j.at("boxes");
        const json& classes = j.at("classes");
        for (size_t i = 0; i < boxes.size(); ++i) {
            BoxSpec b{boxes[i][0].get<int>(), boxes[i][1].get<int>(), boxes[i][2].get<int>(),
                      boxes[i][3].get<int>()};
            e.boxes.emplace_back(classes[i].get<std::string>(), b);
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

DatasetManifest build_corpus(const CorpusConfig& config, bool dry_run) {
    if (config.profiles.empty()) throw ParameterError("build_corpus: no profiles configured");
    for (const DomainProfile& p : config.profiles) p.validate();
    const std::vector<DefectClass> classes =
        config.classes.empty() ? default_classes(config.profiles[0].image_side) : config.classes;

    DatasetManifest manifest;
    manifest.root = config.root;
    manifest.seed = config.seed;
    manifest.profiles = config.profiles;

    if (!dry_run) {
        std::error_code ec;
        fs::create_directories(fs::path(config.root) / "images", ec);
        if (ec) throw IoError("cannot create dataset root: " + config.root);
    }

    int index = 0;
    auto emit = [&](const DomainProfile& profile, const DefectClass& cls,
                    const std::string& split) {
        const uint64_t sample_seed = splitmix64(config.seed ^ (0xC0FFEEULL + index));
        RandomStream rng = RandomStream::sub(sample_seed, {0x7});
        const BoxSpec box = place_box(cls, profile, rng);
        ManifestEntry e;
        char name[64];
        std::snprintf(name, sizeof(name), "images/img_%05d.png", index);
        e.file = name;
        e.caption = caption_for(config.style_word, cls.name, profile);
        e.boxes.emplace_back(cls.name, box);
        e.profile_id = profile.id;
        e.split = split;
        e.seed = sample_seed;
        if (!dry_run) {
            auto [img, rec] = render_sample(profile, cls, box, sample_seed);
            write_gray_png((fs::path(config.root) / e.file).string(), img);
        }
        manifest.entries.push_back(std::move(e));
        ++index;
    };

    for (size_t pi = 0; pi < config.profiles.size(); ++pi) {
        if (config.single_domain && pi > 0) break;
        for (const DefectClass& cls : classes)
            for (int i = 0; i < config.per_class_train; ++i)
                emit(config.profiles[pi], cls, "train");
    }
    for (const DomainProfile& profile : config.profiles)
        for (const DefectClass& cls : classes)
            for (int i = 0; i < config.per_class_test; ++i) emit(profile, cls, "test");

    if (!dry_run) manifest.save((fs::path(config.root) / "manifest.jsonl").string());
    return manifest;
}

}  // namespace elgen::corpus
