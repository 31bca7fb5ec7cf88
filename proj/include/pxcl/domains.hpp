#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pxcl/replay.hpp"

namespace pxcl {

enum class SplitTag { Train, Val, Test };

struct DatasetSplit {
    std::vector<std::array<std::uint8_t, 784>> images;  // 28x28, row-major
    std::vector<std::uint8_t> labels;                   // 0 or 1
    SplitTag tag = SplitTag::Train;

    std::size_t size() const { return images.size(); }
};

struct Dataset {
    DatasetSplit train;
    DatasetSplit val;
    DatasetSplit test;
};

// Canonical dataset file, magic "PXCLDS01", little-endian: three sections in
// train/val/test order, each a u32 sample count followed by records of 784
// uint8 pixels plus 1 uint8 label.
Dataset load_canonical(const std::filesystem::path& path);
void write_canonical(const Dataset& dataset, const std::filesystem::path& path);

// Self-contained corpus for desk-scale experiments. Class 0 images are smooth
// low-frequency noise fields; class 1 images add a bright Gaussian blob at a
// seeded location.
struct SyntheticConfig {
    std::size_t n_train = 600;
    std::size_t n_val = 100;
    std::size_t n_test = 200;
    double class1_fraction = 0.3;
    double blob_intensity = 0.45;
    double noise_std = 0.10;
    std::uint64_t seed = 42;
};
Dataset generate_synthetic(const SyntheticConfig& config);

enum class DomainKind { Base, LowDose, Portable, Anatomical, Institutional };

const char* domain_kind_name(DomainKind kind);
DomainKind parse_domain_kind(const std::string& name);
// Position in the curriculum Base -> LowDose -> Portable -> Anatomical -> Institutional.
int domain_kind_rank(DomainKind kind);

// Parameters of the image corruptions. Defaults are the reference recipe; all
// of them are exposed through the experiment config for sweeps.
struct DomainParams {
    double lowdose_contrast = 0.7;          // x <- 0.5 + contrast*(x-0.5)
    double lowdose_noise_std = 0.15;        // additive Gaussian, per pixel
    double portable_blur_sigma = 1.0;       // 3x3 Gaussian, kernel sums to 1
    double anatomical_scale_min = 0.85;     // affine scale about the center
    double anatomical_scale_max = 1.0;
    int anatomical_max_shift = 2;           // integer translation, U{-s..s}
    double institutional_gamma_min = 1.2;   // x <- x^gamma
    double institutional_gamma_max = 1.4;
    double institutional_brightness_min = 0.02;
    double institutional_brightness_max = 0.10;
};

struct DomainSpec {
    DomainKind kind = DomainKind::Base;
    int domain_id = 0;
    DomainParams params;
    std::uint64_t seed = 0;

    std::string name() const { return domain_kind_name(kind); }
};

// Applies the domain's corruption to one image. Input pixels must lie in
// [0,1]; the output is clamped back to [0,1]. Deterministic in
// (spec.seed, sample_index), so streams can be regenerated in any order.
std::vector<double> apply_domain(const std::vector<double>& image, const DomainSpec& spec,
                                 std::int64_t sample_index);

// Scales a split to [0,1] floats, corrupts every image with apply_domain, and
// tags the samples with the domain id. Order is preserved; shuffling is the
// trainer's job.
std::vector<Sample> make_domain_stream(const DatasetSplit& split, const DomainSpec& spec);

}  // namespace pxcl
