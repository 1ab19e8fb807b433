#pragma once

// Procedural synthesis of EL-like grayscale images: a grid-line background
// with per-profile brightness, noise and line spacing, plus stamped defects
// from the five-class taxonomy. Everything is a pure function of
// (config, seed); the builder writes PNGs and a JSON-lines manifest.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "elgen/core/box.hpp"
#include "elgen/core/random.hpp"
#include "elgen/core/tensor.hpp"

namespace elgen::corpus {

struct DomainProfile {
    std::string id = "p0";
    int image_side = 64;  // power of two
    int grid_spacing = 8;
    double grid_intensity = 0.35;
    double background_mean = 0.45;
    double background_noise_sigma = 0.02;
    int busbar_count = 2;

    void validate() const;
};

enum class StampKind { Polyline, Line, Disc, VerticalSegment, HorizontalBand };

struct DefectClass {
    std::string name;
    StampKind kind = StampKind::Disc;
    int size_min = 8, size_max = 16;          // requested box side, pixels
    double contrast_lo = -0.5, contrast_hi = -0.3;  // signed stamp luminance shift
};

// The five-class taxonomy; sizes are given for a 64px image and scale
// linearly for other sides.
std::vector<DefectClass> default_classes(int image_side = 64);

const DefectClass& class_by_name(const std::vector<DefectClass>& classes,
                                 const std::string& name);

struct StampRecord {
    std::string class_name;
    BoxSpec box;
    double mean_shift = 0.0;  // achieved inside-box mean luminance change
};

// Background with vertical grid lines at multiples of grid_spacing and
// busbar_count horizontal bars; deterministic in (profile, seed).
TensorD synth_background(const DomainProfile& profile, uint64_t seed);

// Stamps one defect inside `box`; pixels outside the box are untouched.
std::pair<TensorD, StampRecord> stamp_defect(const TensorD& image, const DefectClass& cls,
                                             const BoxSpec& box, uint64_t seed);

struct ManifestEntry {
    std::string file;  // relative to the dataset root
    std::string caption;
    std::vector<std::pair<std::string, BoxSpec>> boxes;  // (class, box)
    std::string profile_id;
    std::string split;  // "train" | "test"
    uint64_t seed = 0;
};

struct DatasetManifest {
    std::string root;
    uint64_t seed = 0;
    std::vector<DomainProfile> profiles;
    std::vector<ManifestEntry> entries;

    const DomainProfile& profile(const std::string& id) const;
    void save(const std::string& path) const;             // JSON lines
    static DatasetManifest load(const std::string& path); // root = dirname(path)
    std::vector<const ManifestEntry*> split_entries(const std::string& split) const;
};

struct CorpusConfig {
    std::string root;
    std::vector<DomainProfile> profiles;
    std::vector<DefectClass> classes;  // defaults to default_classes(profile side)
    int per_class_train = 20;
    int per_class_test = 0;
    bool single_domain = false;  // train split drawn from profiles[0] only
    uint64_t seed = 0;
    std::string style_word = "cell";
};

std::string caption_for(const std::string& style_word, const std::string& class_name,
                        const DomainProfile& profile);

// Draws a box for a defect class inside a profile's image, margins respected.
// broken_gate boxes are placed so that a grid column crosses the box.
BoxSpec place_box(const DefectClass& cls, const DomainProfile& profile, RandomStream& rng);

// Renders one fully-specified sample (background + one stamped defect).
std::pair<TensorD, StampRecord> render_sample(const DomainProfile& profile,
                                              const DefectClass& cls, const BoxSpec& box,
                                              uint64_t seed);

// Synthesizes the corpus onto disk; returns the manifest (also written to
// root/manifest.jsonl). When dry_run is set, nothing is written.
DatasetManifest build_corpus(const CorpusConfig& config, bool dry_run = false);

}  // namespace elgen::corpus
